//! The verification suite: every identity the library claims, checked on
//! seeded states at fixed tolerances.
//!
//! Each criterion yields one or more [`CheckResult`]s. A check passes when
//! its residual is at most its tolerance. The last criterion collects
//! diagnostics whose values are not expected to vanish; their checks only
//! assert that the finite-difference estimates have converged.

use crate::discrete::{
    build_plaquette, discrete_closure_residual, discrete_invariants, discrete_orbit, logdet_identity_residual, LatticeParams,
    Plaquette, SignConvention,
};
use crate::error::Result;
use crate::flows::{
    commutator_defect, evolve_path, integrate_flow, lagrangian_closure_residual, noether_charge, pluri_el_residual,
    poisson_bracket, velocity_state, PathSpec, VelocityMode, DEFAULT_BRACKET_STEP,
};
use crate::hierarchy::{hamiltonian, invariants, lax_residual, legendre_check, CouplingConvention, FlowIndex, PhaseState};
use crate::numerics::{max_diff, max_norm, step_halving, Convergence};
use crate::sampling::StateSampler;
use crate::semidiscrete::{evolve_chain, semi_closure_residual, semi_eom_residual, tau_velocities, Chain};

/// Seed and tolerance multiplier for a suite run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSettings {
    pub seed: u64,
    /// Every tolerance is multiplied by this.
    pub tolerance_scale: f64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        SuiteSettings { seed: 2024, tolerance_scale: 1.0 }
    }
}

impl SuiteSettings {
    fn tol(&self, t: f64) -> f64 {
        t * self.tolerance_scale
    }

    /// Independent stream per criterion so that adding states to one does
    /// not shift another.
    fn sampler(&self, stream: u64) -> StateSampler {
        StateSampler::new(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Context in insertion order: particle counts, seed, step counts and
    /// any reported values.
    pub meta: Vec<(&'static str, String)>,
}

impl CheckResult {
    pub fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        CheckResult { name, residual, tolerance, passed: residual <= tolerance, meta: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.meta.push((key, value.to_string()));
        self
    }

    fn num(self, key: &'static str, value: f64) -> Self {
        self.with(key, format!("{value:e}"))
    }
}

pub type Criterion = fn(&SuiteSettings) -> Result<Vec<CheckResult>>;

/// The criteria in order, with a short title each.
pub const CRITERIA: [(&str, Criterion); 13] = [
    ("involution of H2 and H3", involution),
    ("commuting flows", commuting_flows),
    ("continuous invariants", continuous_invariants),
    ("Lax equation", lax_identity),
    ("Lax traces match Hamiltonians", lax_hamiltonians),
    ("two-body closed form", two_body),
    ("discrete invariants", discrete_invariants_check),
    ("plaquette consistency", plaquette_consistency),
    ("discrete closure and log-det identity", discrete_closure),
    ("Noether charge", noether),
    ("generalised Euler-Lagrange", generalised_el),
    ("semi-discrete consistency", semi_discrete),
    ("diagnostics", diagnostics),
];

/// Every check of every criterion.
pub fn run_suite(settings: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (_, c) in CRITERIA {
        out.extend(c(settings)?);
    }
    Ok(out)
}

/// A three-particle state that stays well separated under both flows for
/// the durations used here.
pub fn separated_state() -> PhaseState {
    PhaseState { x: vec![-3.0, 0.2, 3.1], p: vec![-0.5, 0.1, 0.6] }
}

const DT: f64 = 1e-3;
const GAMMA: CouplingConvention = CouplingConvention { gamma: -2.0 };

fn h2(s: &PhaseState) -> Result<f64> {
    hamiltonian(FlowIndex::T2, s)
}

fn h3(s: &PhaseState) -> Result<f64> {
    hamiltonian(FlowIndex::T3, s)
}

pub fn involution(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let mut sm = s.sampler(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let st = sm.phase_state(3, 0.5)?;
        worst = worst.max(poisson_bracket(h2, h3, &st, DEFAULT_BRACKET_STEP)?.abs());
    }
    Ok(vec![CheckResult::new("involution", worst, s.tol(1e-6)).with("n", 3).with("seed", s.seed).with("states", 100)])
}

pub fn commuting_flows(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let mut sm = s.sampler(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let st = sm.phase_state(3, 0.5)?;
        worst = worst.max(commutator_defect(&st, 0.01, 0.01, DT)?);
    }
    Ok(vec![CheckResult::new("commuting-flows", worst, s.tol(1e-6))
        .with("n", 3)
        .with("seed", s.seed)
        .with("states", 20)
        .with("steps", 10)])
}

pub fn continuous_invariants(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let start = separated_state();
    let i0 = invariants(&start, GAMMA, 3)?;
    let mut worst: f64 = 0.0;
    for (k, duration) in [(FlowIndex::T2, 1.0), (FlowIndex::T3, 0.3)] {
        for smp in integrate_flow(k, &start, duration, DT)?.samples() {
            let i = invariants(&smp.state, GAMMA, 3)?;
            for (a, b) in i.iter().zip(&i0) {
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
    }
    Ok(vec![CheckResult::new("continuous-invariants", worst, s.tol(1e-8)).with("n", 3).with("steps", 1300)])
}

fn lax_states(s: &SuiteSettings) -> Result<Vec<PhaseState>> {
    let mut sm = s.sampler(4);
    (0..100).map(|i| sm.phase_state(2 + i % 3, 0.5)).collect()
}

pub fn lax_identity(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    for st in lax_states(s)? {
        worst = worst.max(lax_residual(&st, GAMMA)?);
    }
    Ok(vec![CheckResult::new("lax-equation", worst, s.tol(1e-10)).with("n", "2,3,4").with("seed", s.seed).with("states", 100)])
}

pub fn lax_hamiltonians(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let (mut w2, mut w3): (f64, f64) = (0.0, 0.0);
    for st in lax_states(s)? {
        let i = invariants(&st, GAMMA, 3)?;
        w2 = w2.max((i[1] - h2(&st)?).abs());
        w3 = w3.max((i[2] - h3(&st)?).abs());
    }
    let meta = |c: CheckResult| c.with("n", "2,3,4").with("seed", s.seed).with("states", 100);
    Ok(vec![
        meta(CheckResult::new("lax-trace-h2", w2, s.tol(1e-11))),
        meta(CheckResult::new("lax-trace-h3", w3, s.tol(1e-11))),
    ])
}

/// Two particles released from rest at `-2, 2`: the squared gap is
/// `16 + 4 H2 t^2 = 16 - t^2`.
pub fn two_body(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let start = PhaseState { x: vec![-2.0, 2.0], p: vec![0.0, 0.0] };
    let e_rel = 2.0 * h2(&start)?;
    let mut worst: f64 = 0.0;
    for smp in integrate_flow(FlowIndex::T2, &start, 0.5, DT)?.samples() {
        let r = smp.state.x[1] - smp.state.x[0];
        worst = worst.max((r * r - (16.0 + 2.0 * e_rel * smp.t2 * smp.t2)).abs());
    }
    Ok(vec![CheckResult::new("two-body-gap", worst, s.tol(1e-6)).with("n", 2).with("steps", 500).num("e_rel", e_rel)])
}

/// Seed of the discrete checks.
pub const DISCRETE_SEED: ([f64; 3], [f64; 3]) = ([0.0, 3.0, 6.0], [-0.2, 3.5, 7.2]);

pub fn discrete_invariants_check(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let params = LatticeParams::new(1.0, 2.0, 3)?;
    let orbit = discrete_orbit(&DISCRETE_SEED.0, &DISCRETE_SEED.1, 49, &params)?;
    let i0 = discrete_invariants(&orbit[0], &orbit[1], 3)?;
    let mut worst: f64 = 0.0;
    for w in orbit.windows(2) {
        worst = worst.max(max_diff(&discrete_invariants(&w[0], &w[1], 3)?, &i0));
    }
    Ok(vec![CheckResult::new("discrete-invariants", worst, s.tol(1e-10)).with("n", 3).with("steps", 50)])
}

/// Twenty plaquettes for each `N` in 1..=3: `x00` with gaps of at least 3, and
/// `x10 = x00 + 0.5` plus a little noise.
pub fn seeded_plaquettes(s: &SuiteSettings) -> Result<Vec<(LatticeParams, Plaquette, f64)>> {
    let mut sm = s.sampler(8);
    let mut out = Vec::new();
    for n in 1..=3 {
        let params = LatticeParams::new(1.0, 2.0, n)?;
        for _ in 0..20 {
            let x00 = sm.positions(n, 3.0)?;
            let noise = sm.uniform(n, 0.1);
            let x10: Vec<f64> = x00.iter().zip(&noise).map(|(x, e)| x + 0.5 + e).collect();
            let (pl, defect) = build_plaquette(&x00, &x10, &params)?;
            out.push((params, pl, defect));
        }
    }
    Ok(out)
}

pub fn plaquette_consistency(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let pls = seeded_plaquettes(s)?;
    let worst = pls.iter().map(|(_, _, d)| *d).fold(0.0, f64::max);
    // one particle: x01 - x00 = 1 / (1/(x10 - x00) + p1 - p2) and the
    // double shift closes the parallelogram
    let mut closed: f64 = 0.0;
    for (params, pl, _) in pls.iter().filter(|(p, _, _)| p.n == 1) {
        let a = pl.x10[0] - pl.x00[0];
        let x01 = pl.x00[0] + 1.0 / (1.0 / a + params.p1 - params.p2);
        let x11 = pl.x10[0] + x01 - pl.x00[0];
        closed = closed.max((pl.x01[0] - x01).abs()).max((pl.x11[0] - x11).abs());
    }
    Ok(vec![
        CheckResult::new("plaquette-consistency", worst, s.tol(1e-9)).with("n", "1,2,3").with("seed", s.seed).with("plaquettes", 60),
        CheckResult::new("plaquette-single-particle", closed, s.tol(1e-12)).with("n", 1).with("plaquettes", 20),
    ])
}

pub fn discrete_closure(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let pls = seeded_plaquettes(s)?;
    let mut convention = None;
    let (mut worst, mut max_printed, mut max_negated, mut logdet): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (params, pl, _) in &pls {
        let c = discrete_closure_residual(pl, params)?;
        let chosen = *convention.get_or_insert(c.convention);
        let under = match chosen {
            SignConvention::Printed => c.printed,
            SignConvention::Negated => c.negated,
        };
        worst = worst.max(under.abs());
        max_printed = max_printed.max(c.printed.abs());
        max_negated = max_negated.max(c.negated.abs());
        logdet = logdet.max(logdet_identity_residual(pl, params)?.residual);
    }
    let convention = convention.unwrap_or(SignConvention::Printed);
    Ok(vec![
        CheckResult::new("discrete-closure", worst, s.tol(1e-8))
            .with("n", "1,2,3")
            .with("seed", s.seed)
            .with("plaquettes", pls.len())
            .with("convention", convention.name())
            .num("printed", max_printed)
            .num("negated", max_negated),
        CheckResult::new("log-det-identity", logdet, s.tol(1e-8)).with("n", "1,2,3").with("plaquettes", pls.len()),
    ])
}

pub fn noether(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let path = PathSpec::new([1.0, 1.0], 0.5)?;
    let traj = evolve_path(&separated_state(), &path, DT)?;
    let e = noether_charge(&traj, path.direction)?;
    let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max);
    Ok(vec![CheckResult::new("noether-charge", drift, s.tol(1e-8)).with("n", 3).with("steps", path.steps(DT)).num("charge", e[0])])
}

pub fn generalised_el(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let worst = |r: Vec<Vec<f64>>| r.iter().map(|v| max_norm(v)).fold(0.0, f64::max);
    let path = PathSpec::new([1.0, 0.0], 0.5)?;
    let traj = evolve_path(&separated_state(), &path, DT)?;
    let on_t2 = worst(pluri_el_residual(&traj, path.direction)?);
    // a lone particle along a mixed direction
    let free = PhaseState { x: vec![0.0], p: vec![0.7] };
    let mixed = PathSpec::new([1.0, 1.0], 0.5)?;
    let on_mixed = worst(pluri_el_residual(&evolve_path(&free, &mixed, DT)?, mixed.direction)?);
    let bent = traj.map_positions(|s, _, x| x + 0.1 * s * s);
    let control = worst(pluri_el_residual(&bent, path.direction)?);
    Ok(vec![
        CheckResult::new("generalised-el", on_t2.max(on_mixed), s.tol(1e-6))
            .with("n", "3,1")
            .with("steps", path.steps(DT))
            .num("t2_path", on_t2)
            .num("mixed_free_path", on_mixed),
        // passes when the perturbed path is rejected by at least 1e-2
        CheckResult::new("generalised-el-control", (1e-2 - control).max(0.0), 0.0).with("n", 3).num("perturbed", control),
    ])
}

fn chain_stats(snaps: &[Chain]) -> Result<(f64, f64)> {
    let (mut disc, mut eom): (f64, f64) = (0.0, 0.0);
    for c in snaps {
        let v = tau_velocities(c)?;
        disc = disc.max(v.max_discrepancy());
        for r in semi_eom_residual(c, &v.velocities)? {
            eom = eom.max(max_norm(&r));
        }
    }
    Ok((disc, eom))
}

/// Chains with `K = 2` cut from discrete orbits.
pub fn seeded_chains() -> Result<Vec<Chain>> {
    Ok(vec![
        Chain::from_orbit(&[0.0], &[0.5], 2, &LatticeParams::new(1.0, 2.0, 1)?)?,
        Chain::from_orbit(&[0.0, 3.0], &[-0.3, 3.6], 2, &LatticeParams::new(1.0, 2.0, 2)?)?,
    ])
}

pub fn semi_discrete(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let (mut disc, mut eom): (f64, f64) = (0.0, 0.0);
    for c in seeded_chains()? {
        let (d, e) = chain_stats(&evolve_chain(&c, DT, 100)?)?;
        disc = disc.max(d);
        eom = eom.max(e);
    }
    let pair = Chain::new(vec![vec![0.0], vec![2.0]], 0.0)?;
    let gap = evolve_chain(&pair, DT, 100)?
        .iter()
        .map(|c| (c.sites[1][0] - c.sites[0][0] - 2.0).abs())
        .fold(0.0, f64::max);
    let meta = |c: CheckResult| c.with("n", "1,2").with("steps", 100);
    Ok(vec![
        meta(CheckResult::new("semi-discrete-discrepancy", disc, s.tol(1e-8))),
        meta(CheckResult::new("semi-discrete-eom", eom, s.tol(1e-10))),
        CheckResult::new("semi-discrete-gap", gap, s.tol(1e-10)).with("n", 1).with("steps", 100),
    ])
}

/// Halving ratios within 25% of 4 count as second-order convergence.
const RATIO_TOLERANCE: f64 = 0.25;
const NOISE_FLOOR: f64 = 1e-9;

fn converged(name: &'static str, c: &Convergence, s: &SuiteSettings) -> CheckResult {
    let r = CheckResult::new(name, c.ratio_error(2), s.tol(RATIO_TOLERANCE)).num("value", c.value());
    match c.ratio {
        Some(q) => r.num("halving_ratio", q),
        None => r.with("halving_ratio", "below noise floor"),
    }
}

/// Values that are reported but not expected to vanish. Each check asserts
/// only that its estimate is converged in the step size.
pub fn diagnostics(s: &SuiteSettings) -> Result<Vec<CheckResult>> {
    let st = separated_state();
    let mut out = Vec::new();
    for (name, mode) in [("lagrangian-closure-flow", VelocityMode::Flow), ("lagrangian-closure-constraint", VelocityMode::Constraint)] {
        let c = step_halving(|e| lagrangian_closure_residual(&st, e, mode), 4e-3, NOISE_FLOOR)?;
        out.push(converged(name, &c, s).with("n", 3));
    }
    let flow = legendre_check(FlowIndex::T3, &velocity_state(&st, VelocityMode::Flow)?)?;
    let cons = legendre_check(FlowIndex::T3, &velocity_state(&st, VelocityMode::Constraint)?)?;
    out.push(CheckResult::new("legendre-t3", 0.0, 0.0).with("n", 3).num("flow", flow).num("constraint", cons));

    let chain = seeded_chains()?.pop().expect("two chains");
    let p = 1.0;
    let around = |h: f64| -> Result<[Chain; 3]> {
        let minus = evolve_chain(&chain, -h, 1)?.pop().expect("one step");
        let plus = evolve_chain(&chain, h, 1)?.pop().expect("one step");
        Ok([minus, chain.clone(), plus])
    };
    let c = step_halving(|h| Ok(semi_closure_residual(&around(h)?, p)?.d_lagrangian), 1e-2, NOISE_FLOOR)?;
    let fine = semi_closure_residual(&around(2.5e-3)?, p)?;
    out.push(
        converged("semi-closure", &c, s)
            .with("n", 2)
            .num("printed", fine.printed)
            .num("negated", fine.negated)
            .with("convention", fine.convention.name()),
    );

    let (params, pl, _) = seeded_plaquettes(s)?.pop().expect("plaquettes");
    let edges = logdet_identity_residual(&pl, &params)?.edges;
    let printed = edges.iter().map(|e| e.printed).fold(0.0, f64::max);
    let negated = edges.iter().map(|e| e.negated).fold(0.0, f64::max);
    out.push(CheckResult::new("edge-lagrangian-log-det", 0.0, 0.0).with("n", params.n).num("printed", printed).num("negated", negated));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_follows_tolerance() {
        assert!(CheckResult::new("a", 1.0, 1.0).passed);
        assert!(!CheckResult::new("a", 1.1, 1.0).passed);
        assert!(!CheckResult::new("a", f64::NAN, 1.0).passed);
    }

    #[test]
    fn zero_scale_fails_nontrivial_checks() {
        let s = SuiteSettings { seed: 3, tolerance_scale: 0.0 };
        let r = lax_identity(&s).unwrap();
        assert!(!r[0].passed);
    }
}
