//! Discrete-time Calogero-Moser: the implicit time step, the four corner
//! equations of a two-parameter lattice, plaquettes and lattice sheets, the
//! discrete Lagrangian with its momenta and Hamiltonian, the discrete Lax
//! pair, and the closure and log-det identities on a plaquette.
//!
//! Sums written `sum'` skip the diagonal. The lattice parameters enter the
//! corner equations only through `delta = p1 - p2`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hierarchy::{check_collision, COLLISION_THRESHOLD};
use crate::numerics::{max_diff, max_norm, newton_solve, Matrix, NewtonSettings, Vector};

/// Lattice parameters and the Newton settings used by every implicit solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    pub p1: f64,
    pub p2: f64,
    /// Particle count.
    pub n: usize,
    pub newton: NewtonSettings,
}

impl LatticeParams {
    pub fn new(p1: f64, p2: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        if !p1.is_finite() || !p2.is_finite() {
            return Err(Error::invalid("lattice parameters must be finite"));
        }
        Ok(LatticeParams { p1, p2, n, newton: NewtonSettings::default() })
    }

    pub fn with_newton(mut self, newton: NewtonSettings) -> Result<Self> {
        newton.validate()?;
        self.newton = newton;
        Ok(self)
    }

    pub fn p(&self, dir: LatticeDirection) -> f64 {
        match dir {
            LatticeDirection::One => self.p1,
            LatticeDirection::Two => self.p2,
        }
    }

    fn delta(&self) -> f64 {
        self.p1 - self.p2
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeDirection {
    One,
    Two,
}

/// The four corners around a site `x`, named by which neighbours they link.
///
/// | variant | neighbours (in argument order) | equation |
/// |---|---|---|
/// | `A` | `T1 x`, `T2 x` | `delta = sum 1/(x - T1x) - sum 1/(x - T2x)` |
/// | `B` | `T1^-1 x`, `T2^-1 x` | `-delta = sum 1/(x - T1^-1x) - sum 1/(x - T2^-1x)` |
/// | `C` | `T1^-1 x`, `T2 x` | `-delta = sum 1/(x - T1^-1x) + sum 1/(x - T2x) - sum' 2/(x_m - x_l)` |
/// | `D` | `T2^-1 x`, `T1 x` | `delta = sum 1/(x - T2^-1x) + sum 1/(x - T1x) - sum' 2/(x_m - x_l)` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    A,
    B,
    C,
    D,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::A, Corner::B, Corner::C, Corner::D];

    /// Signs of the two neighbour sums, whether the interaction sum enters,
    /// and the sign of `delta` on the left-hand side.
    fn shape(self) -> (f64, f64, bool, f64) {
        match self {
            Corner::A => (1.0, -1.0, false, 1.0),
            Corner::B => (1.0, -1.0, false, -1.0),
            Corner::C => (1.0, 1.0, true, -1.0),
            Corner::D => (1.0, 1.0, true, 1.0),
        }
    }
}

/// The four momentum formulas at a site, one per neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentumRoute {
    /// From the `T1 x` edge with `p1`.
    Pmlt1,
    /// From the `T2 x` edge with `p2`.
    Pmlt2,
    /// From the `T1^-1 x` edge with `p1`.
    Pmlt3,
    /// From the `T2^-1 x` edge with `p2`.
    Pmlt4,
}

/// Elementary square: a site, its two single shifts and the double shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaquette {
    pub x00: Vector,
    pub x10: Vector,
    pub x01: Vector,
    pub x11: Vector,
}

/// `sum_l 1/(x_m - y_l)` for each `m`.
fn cross_sum(x: &[f64], y: &[f64]) -> Result<Vector> {
    let mut out = Vec::with_capacity(x.len());
    for &xm in x {
        let mut acc = 0.0;
        for &yl in y {
            let d = xm - yl;
            if d.abs() < COLLISION_THRESHOLD {
                return Err(Error::CollisionSingularity { gap: d.abs(), s: None });
            }
            acc += 1.0 / d;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `sum'_l 1/(x_m - x_l)` for each `m`.
fn self_sum(x: &[f64]) -> Result<Vector> {
    check_collision(x, COLLISION_THRESHOLD)?;
    Ok((0..x.len())
        .map(|m| (0..x.len()).filter(|&l| l != m).map(|l| 1.0 / (x[m] - x[l])).sum())
        .collect())
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::invalid("need at least one particle"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// `sum_l [1/(x_m - x_next_l) + 1/(x_m - x_prev_l)] - sum'_l 2/(x_m - x_l)`
/// at the middle configuration.
pub fn discrete_el_residual(x_prev: &[f64], x_cur: &[f64], x_next: &[f64]) -> Result<Vector> {
    same_len(x_cur, x_prev)?;
    same_len(x_cur, x_next)?;
    let a = cross_sum(x_cur, x_next)?;
    let b = cross_sum(x_cur, x_prev)?;
    let c = self_sum(x_cur)?;
    Ok((0..x_cur.len()).map(|m| a[m] + b[m] - 2.0 * c[m]).collect())
}

/// Jacobian of `sign * sum_l 1/(x_m - u_l)` with respect to `u`.
fn cross_jacobian(x: &[f64], u: &[f64], sign: f64) -> Matrix {
    Matrix::from_fn(x.len(), u.len(), |m, l| sign / (x[m] - u[l]).powi(2))
}

fn finish(u: Vector) -> Result<Vector> {
    check_collision(&u, COLLISION_THRESHOLD)?;
    Ok(u)
}

/// Next configuration of a discrete orbit, by Newton from `2 x_cur - x_prev`.
///
/// ```
/// use calogero::discrete::{discrete_step, LatticeParams};
/// let params = LatticeParams::new(1.0, 2.0, 1).unwrap();
/// let next = discrete_step(&[0.0], &[1.0], &params).unwrap();
/// assert!((next[0] - 2.0).abs() < 1e-12);
/// ```
pub fn discrete_step(x_prev: &[f64], x_cur: &[f64], params: &LatticeParams) -> Result<Vector> {
    params.check(x_prev)?;
    params.check(x_cur)?;
    check_collision(x_prev, COLLISION_THRESHOLD)?;
    let fixed: Vector = {
        let b = cross_sum(x_cur, x_prev)?;
        let c = self_sum(x_cur)?;
        (0..x_cur.len()).map(|m| b[m] - 2.0 * c[m]).collect()
    };
    let res = |u: &[f64]| -> Result<Vector> {
        let a = cross_sum(x_cur, u)?;
        Ok(a.iter().zip(&fixed).map(|(a, f)| a + f).collect())
    };
    let jac = |u: &[f64]| Ok(cross_jacobian(x_cur, u, 1.0));
    let guess: Vector = x_cur.iter().zip(x_prev).map(|(c, p)| 2.0 * c - p).collect();
    finish(newton_solve(&res, Some(&jac), &guess, &params.newton)?)
}

/// Left minus right side of one corner equation at `x`, with the two
/// neighbours in the order listed on [`Corner`].
pub fn corner_residual(variant: Corner, x: &[f64], nb1: &[f64], nb2: &[f64], params: &LatticeParams) -> Result<Vector> {
    params.check(x)?;
    params.check(nb1)?;
    params.check(nb2)?;
    let (s1, s2, inter, sd) = variant.shape();
    let a = cross_sum(x, nb1)?;
    let b = cross_sum(x, nb2)?;
    let c = if inter { self_sum(x)? } else { vec![0.0; x.len()] };
    let delta = params.delta();
    Ok((0..x.len()).map(|m| sd * delta - (s1 * a[m] + s2 * b[m] - 2.0 * c[m])).collect())
}

/// Solve one corner equation for the second neighbour of `x` given the
/// first (`A`: `T2 x` from `T1 x`; `B`: `T2^-1 x` from `T1^-1 x`;
/// `C`: `T2 x` from `T1^-1 x`; `D`: `T1 x` from `T2^-1 x`).
///
/// ```
/// use calogero::discrete::{corner_solve, Corner, LatticeParams};
/// let params = LatticeParams::new(2.0, 1.0, 1).unwrap();
/// let t2x = corner_solve(Corner::A, &[0.0], &[1.0], &params).unwrap();
/// assert!((t2x[0] - 0.5).abs() < 1e-12);
/// ```
pub fn corner_solve(variant: Corner, x: &[f64], known: &[f64], params: &LatticeParams) -> Result<Vector> {
    params.check(x)?;
    params.check(known)?;
    check_collision(x, COLLISION_THRESHOLD)?;
    let delta = params.delta();
    // each particle moved as if free: the single-particle closed form
    let (to_known, to_unknown, sd_guess) = match variant {
        Corner::A => (1.0, 1.0, 1.0),
        Corner::B => (-1.0, -1.0, 1.0),
        Corner::C => (-1.0, 1.0, 1.0),
        Corner::D => (-1.0, 1.0, -1.0),
    };
    let guess: Vector = (0..x.len())
        .map(|m| {
            let d1 = to_known * (known[m] - x[m]);
            let g = x[m] + to_unknown / (1.0 / d1 + sd_guess * delta);
            if g.is_finite() { g } else { x[m] + to_unknown * d1 }
        })
        .collect();
    match corner_newton(variant, x, known, delta, &guess, params) {
        Ok(u) if same_order(x, &u) => Ok(u),
        direct => corner_continuation(variant, x, known, params).or(direct),
    }
}

fn corner_newton(variant: Corner, x: &[f64], known: &[f64], delta: f64, guess: &[f64], params: &LatticeParams) -> Result<Vector> {
    let (s1, s2, inter, sd) = variant.shape();
    let a = cross_sum(x, known)?;
    let c = if inter { self_sum(x)? } else { vec![0.0; x.len()] };
    // rhs_m = s2 * sum_l 1/(x_m - u_l)
    let rhs: Vector = (0..x.len()).map(|m| sd * delta - s1 * a[m] + 2.0 * c[m]).collect();
    let res = |u: &[f64]| -> Result<Vector> {
        let b = cross_sum(x, u)?;
        Ok((0..x.len()).map(|m| s2 * b[m] - rhs[m]).collect())
    };
    let jac = |u: &[f64]| Ok(cross_jacobian(x, u, s2));
    finish(newton_solve(&res, Some(&jac), guess, &params.newton)?)
}

/// Whether `u` lists its particles in the same order as `x`.
fn same_order(x: &[f64], u: &[f64]) -> bool {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx
    };
    rank(x) == rank(u)
}

const CONTINUATION_STEPS: usize = 32;

/// Follow the solution from `delta = 0`, where `A` and `B` give back the
/// known neighbour and `C` and `D` reduce to a discrete time step, out to
/// the actual `delta`.
fn corner_continuation(variant: Corner, x: &[f64], known: &[f64], params: &LatticeParams) -> Result<Vector> {
    let mut u = match variant {
        Corner::A | Corner::B => known.to_vec(),
        Corner::C | Corner::D => discrete_step(known, x, params)?,
    };
    let delta = params.delta();
    for k in 1..=CONTINUATION_STEPS {
        u = corner_newton(variant, x, known, delta * k as f64 / CONTINUATION_STEPS as f64, &u, params)?;
    }
    Ok(u)
}

/// Fill in the plaquette spanned by `x00` and its `T1` shift `x10`.
///
/// `x01` comes from corner `A` at `x00`. The double shift is computed twice,
/// from corner `C` at `x10` and from corner `D` at `x01`; the plaquette
/// keeps the first and the max-norm gap between them is returned as the
/// consistency defect.
pub fn build_plaquette(x00: &[f64], x10: &[f64], params: &LatticeParams) -> Result<(Plaquette, f64)> {
    let x01 = corner_solve(Corner::A, x00, x10, params)?;
    let route1 = corner_solve(Corner::C, x10, x00, params)?;
    let route2 = corner_solve(Corner::D, &x01, x00, params)?;
    let defect = max_diff(&route1, &route2);
    Ok((Plaquette { x00: x00.to_vec(), x10: x10.to_vec(), x01, x11: route1 }, defect))
}

fn ln_abs(v: f64, what: &'static str) -> Result<f64> {
    if v == 0.0 || !v.is_finite() {
        return Err(Error::LogSingularity { what });
    }
    Ok(v.abs().ln())
}

/// `sum ln|x_m - tx_l| - 1/2 sum' [ln|x_m - x_l| + ln|tx_m - tx_l|] - p sum (x_m - tx_m)`
pub fn discrete_lagrangian(x: &[f64], tx: &[f64], p: f64) -> Result<f64> {
    same_len(x, tx)?;
    let n = x.len();
    let mut acc = 0.0;
    for m in 0..n {
        for l in 0..n {
            acc += ln_abs(x[m] - tx[l], "x - Tx")?;
            if m != l {
                acc -= 0.5 * (ln_abs(x[m] - x[l], "x_m - x_l")? + ln_abs(tx[m] - tx[l], "Tx_m - Tx_l")?);
            }
        }
    }
    Ok(acc - p * x.iter().zip(tx).map(|(a, b)| a - b).sum::<f64>())
}

/// One momentum route at a site.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMomentum {
    /// Pair contributions; row `m` sums to `momenta[m]`.
    pub terms: Matrix,
    pub momenta: Vector,
}

/// Momentum at site `x` computed from the neighbour named by `route`.
pub fn discrete_momentum(route: MomentumRoute, x: &[f64], neighbour: &[f64], params: &LatticeParams) -> Result<DiscreteMomentum> {
    params.check(x)?;
    params.check(neighbour)?;
    check_collision(x, COLLISION_THRESHOLD)?;
    cross_sum(x, neighbour)?;
    let (sign, p) = match route {
        MomentumRoute::Pmlt1 => (1.0, params.p1),
        MomentumRoute::Pmlt2 => (1.0, params.p2),
        MomentumRoute::Pmlt3 => (-1.0, params.p1),
        MomentumRoute::Pmlt4 => (-1.0, params.p2),
    };
    let n = x.len();
    let terms = Matrix::from_fn(n, n, |m, l| {
        let own = if m == l { -p } else { -sign / (x[m] - x[l]) };
        sign / (x[m] - neighbour[l]) + own
    });
    let momenta = (0..n).map(|m| terms.row(m).iter().sum()).collect();
    Ok(DiscreteMomentum { terms, momenta })
}

/// `M = -[1 / (tx_i - x_j)]` for the edge `x -> tx`.
pub fn build_discrete_m(x: &[f64], tx: &[f64]) -> Result<Matrix> {
    same_len(x, tx)?;
    cross_sum(tx, x)?;
    Ok(Matrix::from_fn(x.len(), x.len(), |i, j| -1.0 / (tx[i] - x[j])))
}

/// Discrete Lax pair of the edge `x -> tx`: `L = diag(p) - [1/(x_i - x_j)]`
/// with `p_i = sum_j 1/(x_i - tx_j) - sum'_j 1/(x_i - x_j)`, and
/// `M = -[1/(tx_i - x_j)]`.
pub fn build_discrete_lax(x: &[f64], tx: &[f64]) -> Result<(Matrix, Matrix)> {
    same_len(x, tx)?;
    let a = cross_sum(x, tx)?;
    let c = self_sum(x)?;
    let n = x.len();
    let l = Matrix::from_fn(n, n, |i, j| if i == j { a[i] - c[i] } else { -1.0 / (x[i] - x[j]) });
    Ok((l, build_discrete_m(x, tx)?))
}

/// Max-norm of `(T L) M - M L` for a consecutive orbit triple, with
/// `T L = L(x_cur, x_next)`, `L = L(x_prev, x_cur)` and `M = M(x_prev -> x_cur)`.
pub fn discrete_lax_residual(x_prev: &[f64], x_cur: &[f64], x_next: &[f64]) -> Result<f64> {
    let (l, m) = build_discrete_lax(x_prev, x_cur)?;
    let (tl, _) = build_discrete_lax(x_cur, x_next)?;
    Ok(tl.matmul(&m)?.sub(&m.matmul(&l)?)?.max_abs())
}

/// `Tr L^k` for `k = 1..=kmax` on the edge `x -> tx`.
pub fn discrete_invariants(x: &[f64], tx: &[f64], kmax: usize) -> Result<Vector> {
    if kmax == 0 {
        return Err(Error::invalid("kmax must be at least 1"));
    }
    let (l, _) = build_discrete_lax(x, tx)?;
    let mut pw = l.clone();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            pw = pw.matmul(&l)?;
        }
        out.push(pw.trace()?);
    }
    Ok(out)
}

/// Discrete Hamiltonian of one edge and the residuals of its Hamilton
/// equations.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonDiagnostics {
    /// The closed form in the extra variables `P_ml = 1/(x_m - tx_l)`,
    /// `rho_ml = -1/(tx_m - tx_l)`.
    pub h: f64,
    /// Direct Legendre sum `sum P (x - tx) + 1/2 sum' rho (tx_m - tx_l) - L`.
    /// Differs from `h` by the constant `N (N + 1) / 2`.
    pub h_legendre: f64,
    /// Max of `|dH/dP_ml - (x_m - tx_l)|`. The `p / P_mm` term of `h`
    /// leaves `p (x_m - tx_m)^2` on the diagonal.
    pub p_residual: f64,
    /// Max of `|dH/drho_ml - (tx_m - tx_l)/2|`.
    pub rho_residual: f64,
    /// Right minus left side of the `x` equation, pairing this edge with the
    /// previous one `x_prev -> x`; equals the discrete Euler-Lagrange residual.
    pub x_residual: Option<Vector>,
}

pub fn discrete_hamiltonian_diag(
    x: &[f64],
    tx: &[f64],
    params: &LatticeParams,
    direction: LatticeDirection,
    x_prev: Option<&[f64]>,
) -> Result<HamiltonDiagnostics> {
    params.check(x)?;
    params.check(tx)?;
    let p = params.p(direction);
    let n = x.len();
    check_collision(x, COLLISION_THRESHOLD)?;
    check_collision(tx, COLLISION_THRESHOLD)?;
    cross_sum(x, tx)?;
    let pp = |m: usize, l: usize| 1.0 / (x[m] - tx[l]);
    let rho = |m: usize, l: usize| -1.0 / (tx[m] - tx[l]);

    let mut h = 0.0;
    let mut legendre_pairs = 0.0;
    let mut p_res: f64 = 0.0;
    let mut rho_res: f64 = 0.0;
    for m in 0..n {
        h += p / pp(m, m);
        for l in 0..n {
            h += ln_abs(pp(m, l), "P")?;
            legendre_pairs += pp(m, l) * (x[m] - tx[l]);
            let dh_dp = 1.0 / pp(m, l) - if m == l { p / pp(m, m).powi(2) } else { 0.0 };
            p_res = p_res.max((dh_dp - (x[m] - tx[l])).abs());
            if m != l {
                h += -0.5 * ln_abs(rho(m, l), "rho")? + 0.5 * ln_abs(x[m] - x[l], "x_m - x_l")?;
                legendre_pairs += 0.5 * rho(m, l) * (tx[m] - tx[l]);
                let dh_drho = -0.5 / rho(m, l);
                rho_res = rho_res.max((dh_drho - 0.5 * (tx[m] - tx[l])).abs());
            }
        }
    }
    let h_legendre = legendre_pairs - discrete_lagrangian(x, tx, p)?;

    let x_residual = match x_prev {
        None => None,
        Some(xp) => {
            params.check(xp)?;
            cross_sum(x, xp)?;
            // unshifted variables of the previous edge, P taken transposed
            let prev_p = |l: usize, m: usize| 1.0 / (xp[l] - x[m]);
            let rho0 = |m: usize, l: usize| -1.0 / (x[m] - x[l]);
            let r = (0..n)
                .map(|m| {
                    let mut rhs = 0.0;
                    let mut dh_dx = 0.0;
                    for l in 0..n {
                        rhs += pp(m, l) - prev_p(l, m);
                        if l != m {
                            rhs += 0.5 * (rho0(m, l) - rho0(l, m));
                            dh_dx += 1.0 / (x[m] - x[l]);
                        }
                    }
                    rhs - dh_dx
                })
                .collect();
            Some(r)
        }
    };
    Ok(HamiltonDiagnostics { h, h_legendre, p_residual: p_res, rho_residual: rho_res, x_residual })
}

/// Sign convention of the discrete Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignConvention {
    /// `sum ln|x - tx| - ... - p sum (x - tx)` as in [`discrete_lagrangian`].
    Printed,
    /// `ln|det M| + p sum (x - tx)`, the determinant form.
    Negated,
}

impl SignConvention {
    pub fn name(self) -> &'static str {
        match self {
            SignConvention::Printed => "printed",
            SignConvention::Negated => "negated",
        }
    }
}

/// The closure sum on a plaquette under both sign conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteClosure {
    pub printed: f64,
    pub negated: f64,
    /// Smaller magnitude of the two.
    pub residual: f64,
    /// Convention achieving `residual`; `Printed` on ties.
    pub convention: SignConvention,
}

fn determinant_lagrangian(x: &[f64], tx: &[f64], p: f64) -> Result<f64> {
    let ld = build_discrete_m(x, tx)?.log_abs_det()?;
    Ok(ld + p * x.iter().zip(tx).map(|(a, b)| a - b).sum::<f64>())
}

fn closure_sum(pl: &Plaquette, params: &LatticeParams, l: impl Fn(&[f64], &[f64], f64) -> Result<f64>) -> Result<f64> {
    let (p1, p2) = (params.p1, params.p2);
    Ok(l(&pl.x00, &pl.x01, p2)? - l(&pl.x00, &pl.x10, p1)? - l(&pl.x10, &pl.x11, p2)? + l(&pl.x01, &pl.x11, p1)?)
}

/// `L2(x00, x01) - L1(x00, x10) - L2(x10, x11) + L1(x01, x11)`.
pub fn discrete_closure_residual(pl: &Plaquette, params: &LatticeParams) -> Result<DiscreteClosure> {
    let printed = closure_sum(pl, params, discrete_lagrangian)?;
    let negated = closure_sum(pl, params, determinant_lagrangian)?;
    let (residual, convention) = if negated.abs() < printed.abs() {
        (negated.abs(), SignConvention::Negated)
    } else {
        (printed.abs(), SignConvention::Printed)
    };
    Ok(DiscreteClosure { printed, negated, residual, convention })
}

/// Residual of `L = ln|det M| + p sum (x - tx)` on one edge, under both
/// conventions for `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeResidual {
    pub edge: &'static str,
    pub printed: f64,
    pub negated: f64,
}

/// The log-det form of the closure relation on a plaquette.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDetIdentity {
    /// `ln|det M1(x01->x11)| + ln|det M2(x00->x01)| - ln|det M2(x10->x11)| - ln|det M1(x00->x10)|`
    pub signed: f64,
    pub residual: f64,
    /// `(p1 - p2) sum (x00 - x10 - x01 + x11)`; the printed closure sum equals
    /// `com_term - signed`.
    pub com_term: f64,
    pub edges: Vec<EdgeResidual>,
}

pub fn logdet_identity_residual(pl: &Plaquette, params: &LatticeParams) -> Result<LogDetIdentity> {
    let ld = |a: &[f64], b: &[f64]| build_discrete_m(a, b)?.log_abs_det();
    let signed = ld(&pl.x01, &pl.x11)? + ld(&pl.x00, &pl.x01)? - ld(&pl.x10, &pl.x11)? - ld(&pl.x00, &pl.x10)?;
    let com: f64 = (0..pl.x00.len()).map(|i| pl.x00[i] - pl.x10[i] - pl.x01[i] + pl.x11[i]).sum();
    let edges = [
        ("x00->x10", &pl.x00, &pl.x10, params.p1),
        ("x00->x01", &pl.x00, &pl.x01, params.p2),
        ("x10->x11", &pl.x10, &pl.x11, params.p2),
        ("x01->x11", &pl.x01, &pl.x11, params.p1),
    ]
    .into_iter()
    .map(|(edge, a, b, p)| {
        let l = discrete_lagrangian(a, b, p)?;
        let rhs = determinant_lagrangian(a, b, p)?;
        Ok(EdgeResidual { edge, printed: (l - rhs).abs(), negated: (-l - rhs).abs() })
    })
    .collect::<Result<Vec<_>>>()?;
    Ok(LogDetIdentity { signed, residual: signed.abs(), com_term: (params.p1 - params.p2) * com, edges })
}

/// Positions on a rectangle of lattice sites `(n1, n2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSheet {
    sites: BTreeMap<(i64, i64), Vector>,
    params: LatticeParams,
}

impl LatticeSheet {
    /// Grow the sheet `0..=n1 x 0..=n2` from the seed `x(0,0)`, `x(1,0)`.
    ///
    /// Row 0 and column 0 advance with [`discrete_step`] (after `x(0,1)` from
    /// corner `A`); every other site comes from corner `C` at the site below
    /// it, with its left neighbour as the known `T1^-1` shift.
    pub fn build(x00: &[f64], x10: &[f64], params: &LatticeParams, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::invalid("sheet needs n1 >= 1 to hold the seed"));
        }
        let mut sites = BTreeMap::new();
        sites.insert((0, 0), x00.to_vec());
        sites.insert((1, 0), x10.to_vec());
        for i in 2..=n1 as i64 {
            let next = discrete_step(&sites[&(i - 2, 0)], &sites[&(i - 1, 0)], params)?;
            sites.insert((i, 0), next);
        }
        for j in 1..=n2 as i64 {
            let first = if j == 1 {
                corner_solve(Corner::A, x00, x10, params)?
            } else {
                discrete_step(&sites[&(0, j - 2)], &sites[&(0, j - 1)], params)?
            };
            sites.insert((0, j), first);
            for i in 1..=n1 as i64 {
                let next = corner_solve(Corner::C, &sites[&(i, j - 1)], &sites[&(i - 1, j - 1)], params)?;
                sites.insert((i, j), next);
            }
        }
        Ok(LatticeSheet { sites, params: *params })
    }

    pub fn get(&self, n1: i64, n2: i64) -> Option<&Vector> {
        self.sites.get(&(n1, n2))
    }

    pub fn sites(&self) -> &BTreeMap<(i64, i64), Vector> {
        &self.sites
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn plaquette(&self, n1: i64, n2: i64) -> Option<Plaquette> {
        Some(Plaquette {
            x00: self.get(n1, n2)?.clone(),
            x10: self.get(n1 + 1, n2)?.clone(),
            x01: self.get(n1, n2 + 1)?.clone(),
            x11: self.get(n1 + 1, n2 + 1)?.clone(),
        })
    }

    /// Largest corner residual over every site and corner whose neighbours
    /// lie on the sheet, together with the discrete Euler-Lagrange residual
    /// along both lattice directions.
    pub fn max_corner_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&(i, j), x) in &self.sites {
            let g = |a: i64, b: i64| self.get(a, b);
            let pairs = [
                (Corner::A, g(i + 1, j), g(i, j + 1)),
                (Corner::B, g(i - 1, j), g(i, j - 1)),
                (Corner::C, g(i - 1, j), g(i, j + 1)),
                (Corner::D, g(i, j - 1), g(i + 1, j)),
            ];
            for (c, a, b) in pairs {
                if let (Some(a), Some(b)) = (a, b) {
                    worst = worst.max(max_norm(&corner_residual(c, x, a, b, &self.params)?));
                }
            }
            for (a, b) in [(g(i - 1, j), g(i + 1, j)), (g(i, j - 1), g(i, j + 1))] {
                if let (Some(a), Some(b)) = (a, b) {
                    worst = worst.max(max_norm(&discrete_el_residual(a, x, b)?));
                }
            }
        }
        Ok(worst)
    }
}

/// Orbit `x_0, x_1, ..., x_{steps + 1}` of [`discrete_step`] from a seed pair.
pub fn discrete_orbit(x0: &[f64], x1: &[f64], steps: usize, params: &LatticeParams) -> Result<Vec<Vector>> {
    params.check(x0)?;
    params.check(x1)?;
    let mut orbit = vec![x0.to_vec(), x1.to_vec()];
    for _ in 0..steps {
        let k = orbit.len();
        let next = discrete_step(&orbit[k - 2], &orbit[k - 1], params)?;
        orbit.push(next);
    }
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n: usize) -> LatticeParams {
        LatticeParams::new(1.0, 2.0, n).unwrap()
    }

    const X0: [f64; 3] = [0.0, 3.0, 6.0];
    const X1: [f64; 3] = [-0.2, 3.5, 7.2];

    #[test]
    fn single_particle_step() {
        assert_abs_diff_eq!(discrete_step(&[0.0], &[1.0], &params(1)).unwrap()[0], 2.0, epsilon = 1e-12);
        assert_eq!(discrete_el_residual(&[0.0], &[1.0], &[2.0]).unwrap(), vec![0.0]);
        assert!(discrete_el_residual(&[0.0], &[1.0], &[2.5]).unwrap()[0].abs() > 0.1);
    }

    #[test]
    fn symmetric_pair_stays_symmetric() {
        let next = discrete_step(&[-1.0, 1.0], &[-1.4, 1.4], &params(2)).unwrap();
        assert_abs_diff_eq!(next[0], -next[1], epsilon = 1e-12);
    }

    #[test]
    fn step_output_satisfies_equation_and_reverses() {
        let p = params(3);
        let next = discrete_step(&X0, &X1, &p).unwrap();
        assert!(max_norm(&discrete_el_residual(&X0, &X1, &next).unwrap()) <= 1e-12);
        let back = discrete_step(&next, &X1, &p).unwrap();
        assert!(max_diff(&back, &X0) < 1e-9);
    }

    #[test]
    fn centre_of_mass_moves_uniformly() {
        let orbit = discrete_orbit(&X0, &X1, 20, &params(3)).unwrap();
        for w in orbit.windows(3) {
            let s: f64 = (0..3).map(|i| w[2][i] - 2.0 * w[1][i] + w[0][i]).sum();
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn corner_solve_keeps_particle_order() {
        // the free guess sends Newton to a root with the particles swapped
        let x00 = [-3.9145262880002427, -1.906988801184351];
        let x10 = [-3.34630551942255, -1.426559062734476];
        let (pl, defect) = build_plaquette(&x00, &x10, &params(2)).unwrap();
        assert!(defect < 1e-9);
        assert!(pl.x11[0] < pl.x11[1]);
    }

    #[test]
    fn invariants_along_orbit() {
        let orbit = discrete_orbit(&X0, &X1, 50, &params(3)).unwrap();
        let i0 = discrete_invariants(&orbit[0], &orbit[1], 3).unwrap();
        for w in orbit.windows(2) {
            let i = discrete_invariants(&w[0], &w[1], 3).unwrap();
            assert!(max_diff(&i, &i0) < 1e-10);
        }
        let one = discrete_invariants(&[0.0], &[1.0], 1).unwrap();
        assert_eq!(one, vec![-1.0]);
    }

    #[test]
    fn discrete_lax_examples() {
        let (l, m) = build_discrete_lax(&[0.0], &[1.0]).unwrap();
        assert_eq!((l.as_slice(), m.as_slice()), (&[-1.0][..], &[-1.0][..]));
        let (l, m) = build_discrete_lax(&[-1.0, 1.0], &[-0.5, 1.5]).unwrap();
        // p_1 = 1/(-1 + 0.5) + 1/(-1 - 1.5) - 1/(-2) = -2 - 0.4 + 0.5
        assert_abs_diff_eq!(l[(0, 0)], -1.9, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], 1.0 / 1.5 - 2.0 - 0.5, epsilon = 1e-15);
        assert_eq!(l[(0, 1)], 0.5);
        assert_eq!(l[(1, 0)], -0.5);
        assert_eq!(m.as_slice(), &[-2.0, 1.0 / 1.5, -0.4, -2.0]);
        assert_abs_diff_eq!(l.trace().unwrap(), -1.9 + 1.0 / 1.5 - 2.5, epsilon = 1e-15);

        assert_eq!(discrete_lax_residual(&[0.0], &[1.0], &[2.0]).unwrap(), 0.0);
        let p = params(2);
        let next = discrete_step(&[-1.0, 1.0], &[-1.4, 1.4], &p).unwrap();
        assert!(discrete_lax_residual(&[-1.0, 1.0], &[-1.4, 1.4], &next).unwrap() < 1e-9);
        let bad = [next[0] + 0.01, next[1]];
        assert!(discrete_lax_residual(&[-1.0, 1.0], &[-1.4, 1.4], &bad).unwrap() > 1e-3);
    }

    #[test]
    fn corner_examples() {
        let p = LatticeParams::new(2.0, 1.0, 1).unwrap();
        let t2 = corner_solve(Corner::A, &[0.0], &[1.0], &p).unwrap();
        assert_abs_diff_eq!(t2[0], 0.5, epsilon = 1e-14);
        let eq = LatticeParams::new(1.5, 1.5, 2).unwrap();
        let t2 = corner_solve(Corner::A, &[-1.0, 1.0], &[-0.6, 1.3], &eq).unwrap();
        assert!(max_diff(&t2, &[-0.6, 1.3]) < 1e-12);
        assert_eq!(corner_residual(Corner::A, &[-1.0, 1.0], &[-0.6, 1.3], &[-0.6, 1.3], &eq).unwrap(), vec![0.0, 0.0]);
        let r = corner_residual(Corner::C, &[-1.0, 1.0], &[-0.6, 1.3], &[0.2, 2.0], &params(2)).unwrap();
        assert!(max_norm(&r) > 1e-3);
    }

    #[test]
    fn corner_solve_satisfies_every_variant() {
        let p = params(3);
        let x = [0.0, 2.5, 5.0];
        let nb = [0.5, 2.95, 5.55];
        for c in Corner::ALL {
            let u = corner_solve(c, &x, &nb, &p).unwrap();
            assert!(max_norm(&corner_residual(c, &x, &nb, &u, &p).unwrap()) <= 1e-12, "{c:?}");
        }
    }

    #[test]
    fn plaquette_single_particle_closed_form() {
        let (pl, defect) = build_plaquette(&[0.0], &[0.5], &params(1)).unwrap();
        // 1/b = 1/a + delta with a = 1/2, delta = -1 gives b = 1
        assert_abs_diff_eq!(pl.x01[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pl.x11[0], 1.5, epsilon = 1e-12);
        assert!(defect <= 1e-12);
    }

    #[test]
    fn degenerate_plaquette() {
        let p = LatticeParams::new(1.0, 1.0, 2).unwrap();
        let (pl, defect) = build_plaquette(&[-1.0, 1.0], &[-0.5, 1.6], &p).unwrap();
        assert!(max_diff(&pl.x01, &pl.x10) < 1e-12);
        assert!(defect < 1e-12);
        assert!(discrete_closure_residual(&pl, &p).unwrap().residual < 1e-12);
        assert!(logdet_identity_residual(&pl, &p).unwrap().residual < 1e-12);
    }

    #[test]
    fn three_particle_plaquette_identities() {
        let p = params(3);
        let (pl, defect) = build_plaquette(&[0.0, 2.5, 5.0], &[0.5, 2.95, 5.55], &p).unwrap();
        assert!(defect <= 1e-9);
        let cl = discrete_closure_residual(&pl, &p).unwrap();
        assert!(cl.residual <= 1e-8);
        assert_abs_diff_eq!(cl.printed, -cl.negated, epsilon = 1e-10);
        let ld = logdet_identity_residual(&pl, &p).unwrap();
        assert!(ld.residual <= 1e-8);
        assert_abs_diff_eq!(cl.printed, ld.com_term - ld.signed, epsilon = 1e-10);
        for e in &ld.edges {
            assert!(e.negated < 1e-10);
            assert!(e.printed > 1e-3);
        }
    }

    #[test]
    fn lagrangian_examples() {
        assert_eq!(discrete_lagrangian(&[0.0], &[1.0], 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(discrete_lagrangian(&[0.0], &[2.0], 1.0).unwrap(), 2f64.ln() + 2.0, epsilon = 1e-15);
        let a = discrete_lagrangian(&[0.0, 2.0], &[0.4, 2.7], 0.0).unwrap();
        let b = discrete_lagrangian(&[3.0, 5.0], &[3.4, 5.7], 0.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        assert!(matches!(discrete_lagrangian(&[0.0], &[0.0], 0.0), Err(Error::LogSingularity { .. })));
    }

    #[test]
    fn momentum_routes() {
        let m = discrete_momentum(MomentumRoute::Pmlt1, &[0.0], &[1.0], &params(1)).unwrap();
        assert_eq!(m.momenta, vec![-2.0]);

        let p = params(3);
        let x = [0.0, 2.5, 5.0];
        let t1 = [0.5, 2.95, 5.55];
        let t2 = corner_solve(Corner::A, &x, &t1, &p).unwrap();
        let a = discrete_momentum(MomentumRoute::Pmlt1, &x, &t1, &p).unwrap();
        let b = discrete_momentum(MomentumRoute::Pmlt2, &x, &t2, &p).unwrap();
        assert!(max_diff(&a.momenta, &b.momenta) <= 1e-9);
        let wrong = discrete_momentum(MomentumRoute::Pmlt2, &x, &[0.3, 3.0, 5.9], &p).unwrap();
        assert!(max_diff(&a.momenta, &wrong.momenta) > 1e-3);
        for (i, v) in a.momenta.iter().enumerate() {
            assert_abs_diff_eq!(a.terms.row(i).iter().sum::<f64>(), *v);
        }
    }

    #[test]
    fn hamiltonian_diagnostics() {
        let d = discrete_hamiltonian_diag(&[0.0], &[1.0], &LatticeParams::new(0.0, 0.0, 1).unwrap(), LatticeDirection::One, None).unwrap();
        assert_eq!(d.h, 0.0);
        assert_eq!(d.p_residual, 0.0);
        assert_eq!(d.rho_residual, 0.0);

        let p = params(3);
        let orbit = discrete_orbit(&X0, &X1, 2, &p).unwrap();
        let d = discrete_hamiltonian_diag(&orbit[1], &orbit[2], &p, LatticeDirection::One, Some(&orbit[0])).unwrap();
        assert!(max_norm(d.x_residual.as_ref().unwrap()) <= 1e-12);
        assert!(d.rho_residual < 1e-12);
        assert_abs_diff_eq!(d.h_legendre - d.h, 6.0, epsilon = 1e-12);
        let el = discrete_el_residual(&orbit[0], &orbit[1], &[9.0, 10.0, 11.0]).unwrap();
        let d = discrete_hamiltonian_diag(&orbit[1], &[9.0, 10.0, 11.0], &p, LatticeDirection::One, Some(&orbit[0])).unwrap();
        assert!(max_diff(d.x_residual.as_ref().unwrap(), &el) < 1e-12);
    }

    #[test]
    fn lattice_sheet_is_consistent() {
        let p = params(2);
        let sheet = LatticeSheet::build(&[0.0, 3.0], &[0.5, 3.45], &p, 3, 3).unwrap();
        assert_eq!(sheet.sites().len(), 16);
        assert!(sheet.max_corner_residual().unwrap() <= 1e-9);
        let pl = sheet.plaquette(1, 1).unwrap();
        assert!(discrete_closure_residual(&pl, &p).unwrap().residual <= 1e-8);
    }
}
