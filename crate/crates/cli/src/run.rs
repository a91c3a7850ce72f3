use std::path::{Path, PathBuf};

use calogero::discrete::{discrete_el_residual, discrete_invariants, discrete_orbit, LatticeParams};
use calogero::flows::{evolve_path, noether_charge, PathSpec, Trajectory};
use calogero::hierarchy::{invariants, CouplingConvention, PhaseState};
use calogero::numerics::max_norm;
use calogero::sampling::StateSampler;
use calogero::semidiscrete::{evolve_chain, semi_eom_residual, tau_velocities, Chain};
use calogero::suite::{run_suite, SuiteSettings};

use crate::error::CliError;
use crate::report::{Entry, VerificationReport};
use crate::scenario::{Initial, Kind, Scenario};
use crate::table::{Format, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub format: Format,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { out_dir: PathBuf::from("."), format: Format::Csv }
    }
}

/// Files written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub trajectory: Option<PathBuf>,
    pub report: PathBuf,
}

/// Drift of a sequence against its first value, relative to that value
/// once it exceeds 1 in magnitude.
fn drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    it.map(|v| (v - first).abs() / first.abs().max(1.0)).fold(0.0, f64::max)
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn continuous(sc: &Scenario) -> Result<(Table, Vec<Entry>), CliError> {
    let ctx = |what: &str| CliError::numerical(format!("continuous scenario (n = {}, seed = {}): {what}", sc.n, sc.seed));
    let start = match &sc.initial {
        Initial::Phase { x, p } => PhaseState::new(x.clone(), p.clone()).map_err(ctx("initial state"))?,
        _ => StateSampler::new(sc.seed).phase_state(sc.n, sc.min_gap).map_err(ctx("random state"))?,
    };
    let conv = CouplingConvention::new(sc.gamma).map_err(ctx("coupling"))?;
    let path = PathSpec::new(sc.direction, sc.duration).map_err(ctx("path"))?;
    let traj: Trajectory = evolve_path(&start, &path, sc.dt).map_err(ctx("integration"))?;

    let header = ["s", "t2", "t3"]
        .into_iter()
        .map(String::from)
        .chain(names("x", sc.n))
        .chain(names("p", sc.n))
        .chain(names("I", 3))
        .collect();
    let mut table = Table::new(header);
    let mut inv = Vec::with_capacity(traj.len());
    for smp in traj.samples() {
        let i = invariants(&smp.state, conv, 3).map_err(ctx("invariants"))?;
        let row = [smp.s, smp.t2, smp.t3].into_iter().chain(smp.state.x.iter().copied()).chain(smp.state.p.iter().copied());
        table.push(row.chain(i.iter().copied()).map(Some).collect());
        inv.push(i);
    }
    let charge = noether_charge(&traj, path.direction).map_err(ctx("noether charge"))?;
    let tol = 1e-8 * sc.tolerance_scale;
    let steps = path.steps(sc.dt);
    let mut entries: Vec<Entry> = (0..3)
        .map(|k| {
            Entry::new(&format!("invariant-drift-I{}", k + 1), drift(inv.iter().map(|i| i[k])), tol)
                .with("n", sc.n)
                .with("steps", steps)
        })
        .collect();
    entries.push(Entry::new("noether-charge-drift", drift(charge), tol).with("n", sc.n).with("steps", steps));
    Ok((table, entries))
}

fn orbit_seed(sc: &Scenario) -> (&[f64], &[f64]) {
    match &sc.initial {
        Initial::Orbit { x0, x1 } => (x0, x1),
        _ => unreachable!("validated discrete scenarios carry an orbit seed"),
    }
}

fn discrete(sc: &Scenario) -> Result<(Table, Vec<Entry>), CliError> {
    let ctx = |what: &str| CliError::numerical(format!("discrete scenario (n = {}): {what}", sc.n));
    let params = LatticeParams::new(sc.p1, sc.p2, sc.n).map_err(ctx("lattice parameters"))?;
    let (x0, x1) = orbit_seed(sc);
    let orbit = discrete_orbit(x0, x1, sc.steps - 1, &params).map_err(ctx("orbit"))?;

    let header = std::iter::once("n".to_string()).chain(names("x", sc.n)).chain(names("I", 3)).collect();
    let mut table = Table::new(header);
    let mut inv = Vec::new();
    for (k, x) in orbit.iter().enumerate() {
        let i = match orbit.get(k + 1) {
            Some(next) => {
                let i = discrete_invariants(x, next, 3).map_err(ctx("invariants"))?;
                inv.push(i.clone());
                i.into_iter().map(Some).collect()
            }
            None => vec![None; 3],
        };
        table.push(std::iter::once(Some(k as f64)).chain(x.iter().map(|v| Some(*v))).chain(i).collect());
    }
    let mut el: f64 = 0.0;
    for w in orbit.windows(3) {
        el = el.max(max_norm(&discrete_el_residual(&w[0], &w[1], &w[2]).map_err(ctx("equation of motion"))?));
    }
    let tol = 1e-10 * sc.tolerance_scale;
    let entries = vec![
        Entry::new("discrete-invariant-drift", (0..3).map(|k| drift(inv.iter().map(|i| i[k]))).fold(0.0, f64::max), tol)
            .with("n", sc.n)
            .with("steps", sc.steps),
        Entry::new("discrete-el-residual", el, tol).with("n", sc.n).with("steps", sc.steps),
    ];
    Ok((table, entries))
}

fn semidiscrete(sc: &Scenario) -> Result<(Table, Vec<Entry>), CliError> {
    let ctx = |what: &str| CliError::numerical(format!("semidiscrete scenario (n = {}, K = {}): {what}", sc.n, sc.shifts));
    let params = LatticeParams::new(sc.p1, sc.p2, sc.n).map_err(ctx("lattice parameters"))?;
    let (x0, x1) = orbit_seed(sc);
    let chain = Chain::from_orbit(x0, x1, sc.shifts, &params).map_err(ctx("chain seed"))?;
    let snaps = evolve_chain(&chain, sc.d_tau, sc.steps).map_err(ctx("evolution"))?;

    let mut table = Table::new(["tau", "site", "particle", "y", "v"].into_iter().map(String::from).collect());
    let (mut disc, mut eom): (f64, f64) = (0.0, 0.0);
    for c in &snaps {
        let v = tau_velocities(c).map_err(ctx("velocities"))?;
        disc = disc.max(v.max_discrepancy());
        for r in semi_eom_residual(c, &v.velocities).map_err(ctx("equation of motion"))? {
            eom = eom.max(max_norm(&r));
        }
        for (k, (site, vel)) in c.sites.iter().zip(&v.velocities).enumerate() {
            for (m, (y, w)) in site.iter().zip(vel).enumerate() {
                table.push(vec![Some(c.tau), Some(k as f64), Some((m + 1) as f64), Some(*y), Some(*w)]);
            }
        }
    }
    let meta = |e: Entry| e.with("n", sc.n).with("steps", sc.steps).with("shifts", sc.shifts);
    let entries = vec![
        meta(Entry::new("semi-discrete-discrepancy", disc, 1e-8 * sc.tolerance_scale)),
        meta(Entry::new("semi-discrete-eom", eom, 1e-10 * sc.tolerance_scale)),
    ];
    Ok((table, entries))
}

/// The full verification suite as report entries.
pub fn verify_all(sc: &Scenario) -> Result<VerificationReport, CliError> {
    let settings = SuiteSettings { seed: sc.seed, tolerance_scale: sc.tolerance_scale };
    let checks = run_suite(&settings).map_err(CliError::numerical(format!("verification suite (seed = {})", sc.seed)))?;
    Ok(VerificationReport::new(Kind::VerifyAll.name(), sc.seed, checks.into_iter().map(Entry::from).collect()))
}

fn trajectory_path(sc: &Scenario, opts: &RunOptions) -> PathBuf {
    let mut p = opts.out_dir.join(&sc.output.trajectory);
    if p.extension().is_none() {
        p.set_extension(opts.format.extension());
    }
    p
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Run a scenario, write its trajectory (if any) and report, and return
/// both.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<(Artifacts, VerificationReport), CliError> {
    let (table, report) = match sc.kind {
        Kind::VerifyAll => (None, verify_all(sc)?),
        kind => {
            let (table, entries) = match kind {
                Kind::Continuous => continuous(sc)?,
                Kind::Discrete => discrete(sc)?,
                _ => semidiscrete(sc)?,
            };
            (Some(table), VerificationReport::new(kind.name(), sc.seed, entries))
        }
    };
    let trajectory = match table {
        Some(t) => {
            let path = trajectory_path(sc, opts);
            write(&path, &t.render(opts.format))?;
            Some(path)
        }
        None => None,
    };
    let report_path = opts.out_dir.join(&sc.output.report);
    write(&report_path, &report.to_json()?)?;
    Ok((Artifacts { trajectory, report: report_path }, report))
}

/// Only the verification suite, with the scenario's seed and tolerance
/// scale; writes the report.
pub fn verify_scenario(sc: &Scenario, opts: &RunOptions) -> Result<(PathBuf, VerificationReport), CliError> {
    let report = verify_all(sc)?;
    let path = opts.out_dir.join(&sc.output.report);
    write(&path, &report.to_json()?)?;
    Ok((path, report))
}
