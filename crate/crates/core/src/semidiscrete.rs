//! Semi-discrete Calogero-Moser: a chain `y(0), ..., y(K)` of successive
//! discrete shifts, all moving in a continuous time `tau`.
//!
//! Neighbouring sites constrain each other's velocities. For the pair
//! `(y(k), y(k+1))`:
//!
//! ```text
//! sum_l v(k+1)_l / (y(k)_m - y(k+1)_l)^2 = -1     fixes v(k+1)
//! sum_l v(k)_l   / (y(k+1)_m - y(k)_l)^2 = -1     fixes v(k)
//! ```
//!
//! so interior sites get two determinations of their velocity.

use crate::discrete::{discrete_lagrangian, discrete_orbit, LatticeParams};
use crate::error::{Error, Result};
use crate::hierarchy::{check_collision, COLLISION_THRESHOLD};
use crate::numerics::{linear_solve, max_diff, rk4_step, Matrix, Vector};

/// Sites closer than this (within a site or across neighbours) abort an
/// evolution.
pub const CHAIN_MIN_GAP: f64 = 1e-6;

/// Successive shifts of one configuration at a common time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub sites: Vec<Vector>,
    pub tau: f64,
}

impl Chain {
    /// At least two sites of equal, nonzero length with no coincidences
    /// inside a site or between neighbours.
    pub fn new(sites: Vec<Vector>, tau: f64) -> Result<Self> {
        let c = Chain { sites, tau };
        c.check(COLLISION_THRESHOLD)?;
        Ok(c)
    }

    /// The first `k + 1` configurations of a discrete orbit seeded with
    /// `(x0, x1)`, at `tau = 0`.
    pub fn from_orbit(x0: &[f64], x1: &[f64], k: usize, params: &LatticeParams) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("a chain needs K >= 1"));
        }
        let mut orbit = discrete_orbit(x0, x1, k.saturating_sub(1), params)?;
        orbit.truncate(k + 1);
        Chain::new(orbit, 0.0)
    }

    /// Number of shifts `K`; the chain holds `K + 1` sites.
    pub fn k(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn n(&self) -> usize {
        self.sites[0].len()
    }

    fn check(&self, gap: f64) -> Result<()> {
        if self.sites.len() < 2 {
            return Err(Error::invalid("a chain needs at least two sites"));
        }
        let n = self.sites[0].len();
        if n == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        for s in &self.sites {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            check_collision(s, gap)?;
        }
        for w in self.sites.windows(2) {
            for a in &w[0] {
                for b in &w[1] {
                    if (a - b).abs() < gap {
                        return Err(Error::CollisionSingularity { gap: (a - b).abs(), s: None });
                    }
                }
            }
        }
        Ok(())
    }

    fn to_flat(&self) -> Vector {
        self.sites.concat()
    }

    fn from_flat(y: &[f64], n: usize, tau: f64) -> Chain {
        Chain { sites: y.chunks(n).map(<[f64]>::to_vec).collect(), tau }
    }
}

/// `[1 / (a_m - b_l)^2]`
fn constraint_matrix(a: &[f64], b: &[f64]) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |m, l| (a[m] - b[l]).powi(-2))
}

/// Velocities of every site.
#[derive(Debug, Clone, PartialEq)]
pub struct TauVelocities {
    /// One velocity per site; interior sites hold the mean of their two
    /// determinations.
    pub velocities: Vec<Vector>,
    /// Max-norm gap between the two determinations at each site, 0 at the
    /// ends.
    pub discrepancies: Vec<f64>,
}

impl TauVelocities {
    pub fn max_discrepancy(&self) -> f64 {
        self.discrepancies.iter().cloned().fold(0.0, f64::max)
    }
}

/// Solve the constraint equations for the velocity of every site.
///
/// ```
/// use calogero::semidiscrete::{tau_velocities, Chain};
/// let chain = Chain::new(vec![vec![0.0], vec![2.0]], 0.0).unwrap();
/// let v = tau_velocities(&chain).unwrap();
/// assert_eq!(v.velocities, vec![vec![-4.0], vec![-4.0]]);
/// ```
pub fn tau_velocities(chain: &Chain) -> Result<TauVelocities> {
    chain.check(COLLISION_THRESHOLD)?;
    let n = chain.n();
    let ones = vec![-1.0; n];
    let k = chain.k();
    let mut from_left: Vec<Option<Vector>> = vec![None; k + 1];
    let mut from_right: Vec<Option<Vector>> = vec![None; k + 1];
    for j in 0..k {
        let (a, b) = (&chain.sites[j], &chain.sites[j + 1]);
        from_left[j + 1] = Some(linear_solve(&constraint_matrix(a, b), &ones)?);
        from_right[j] = Some(linear_solve(&constraint_matrix(b, a), &ones)?);
    }
    let mut velocities = Vec::with_capacity(k + 1);
    let mut discrepancies = Vec::with_capacity(k + 1);
    for (l, r) in from_left.into_iter().zip(from_right) {
        match (l, r) {
            (Some(l), Some(r)) => {
                discrepancies.push(max_diff(&l, &r));
                velocities.push(l.iter().zip(&r).map(|(a, b)| 0.5 * (a + b)).collect());
            }
            (Some(v), None) | (None, Some(v)) => {
                discrepancies.push(0.0);
                velocities.push(v);
            }
            (None, None) => unreachable!("every site has at least one neighbour"),
        }
    }
    Ok(TauVelocities { velocities, discrepancies })
}

/// RK4 in `tau` with [`tau_velocities`] as the field. Returns `steps + 1`
/// snapshots, the input first.
pub fn evolve_chain(chain: &Chain, d_tau: f64, steps: usize) -> Result<Vec<Chain>> {
    if !(d_tau != 0.0 && d_tau.is_finite()) {
        return Err(Error::invalid("d_tau must be finite and nonzero"));
    }
    chain.check(CHAIN_MIN_GAP)?;
    let n = chain.n();
    let field = |y: &[f64]| -> Result<Vector> {
        Ok(tau_velocities(&Chain::from_flat(y, n, 0.0))?.velocities.concat())
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(chain.clone());
    let mut y = chain.to_flat();
    for i in 1..=steps {
        let tau = chain.tau + i as f64 * d_tau;
        y = rk4_step(field, &y, d_tau).map_err(|e| e.at_s(tau - d_tau))?;
        let next = Chain::from_flat(&y, n, tau);
        next.check(CHAIN_MIN_GAP).map_err(|e| e.at_s(tau))?;
        out.push(next);
    }
    Ok(out)
}

/// Residuals of both constraint equations at every site that has the
/// neighbour they need: `(forward, backward)`, where `forward[k]` links
/// `y(k)` with `v(k+1)` (sites `0..K`) and `backward[k]` links `y(k)` with
/// `v(k-1)` (sites `1..=K`, stored at index `k - 1`).
pub fn constraint_residuals(chain: &Chain, velocities: &[Vector]) -> Result<(Vec<Vector>, Vec<Vector>)> {
    chain.check(COLLISION_THRESHOLD)?;
    if velocities.len() != chain.sites.len() {
        return Err(Error::DimensionMismatch { expected: chain.sites.len(), got: velocities.len() });
    }
    let k = chain.k();
    let y = &chain.sites;
    let r = |a: &[f64], b: &[f64], v: &[f64]| -> Result<Vector> {
        Ok(constraint_matrix(a, b).mul_vec(v)?.into_iter().map(|s| s + 1.0).collect())
    };
    let fwd = (0..k).map(|j| r(&y[j], &y[j + 1], &velocities[j + 1])).collect::<Result<Vec<_>>>()?;
    let bwd = (1..=k).map(|j| r(&y[j], &y[j - 1], &velocities[j - 1])).collect::<Result<Vec<_>>>()?;
    Ok((fwd, bwd))
}

/// `sum_l [v(k+1)_l / (y(k)_m - y(k+1)_l)^2 - v(k-1)_l / (y(k)_m - y(k-1)_l)^2]`
/// at each interior site `k = 1..K-1`.
pub fn semi_eom_residual(chain: &Chain, velocities: &[Vector]) -> Result<Vec<Vector>> {
    let (fwd, bwd) = constraint_residuals(chain, velocities)?;
    Ok((1..chain.k()).map(|j| fwd[j].iter().zip(&bwd[j - 1]).map(|(a, b)| a - b).collect()).collect())
}

/// `-sum_{m,l} v_l / (x_m - tx_l) - 1/2 sum' (v_m - v_l) / (tx_m - tx_l) + sum (x_m - tx_m + v_m)`
/// where `v` is the `tau` velocity of `tx`.
pub fn semi_lagrangian(x: &[f64], tx: &[f64], v_tx: &[f64]) -> Result<f64> {
    let n = x.len();
    if n == 0 || tx.len() != n || v_tx.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tx.len().min(v_tx.len()) });
    }
    check_collision(tx, COLLISION_THRESHOLD)?;
    let mut acc = 0.0;
    for m in 0..n {
        for l in 0..n {
            let d = x[m] - tx[l];
            if d.abs() < COLLISION_THRESHOLD {
                return Err(Error::CollisionSingularity { gap: d.abs(), s: None });
            }
            acc -= v_tx[l] / d;
            if m != l {
                acc -= 0.5 * (v_tx[m] - v_tx[l]) / (tx[m] - tx[l]);
            }
        }
        acc += x[m] - tx[m] + v_tx[m];
    }
    Ok(acc)
}

/// Both sides of the semi-discrete closure relation at the middle snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiClosure {
    /// `d/dtau L(y0, y1)` by central differences, printed sign of `L`.
    pub d_lagrangian: f64,
    /// `L_tau(y1, y2) - L_tau(y0, y1)`.
    pub shift_difference: f64,
    /// `d_lagrangian - shift_difference`.
    pub printed: f64,
    /// `-d_lagrangian - shift_difference`.
    pub negated: f64,
    pub residual: f64,
    pub convention: crate::discrete::SignConvention,
}

/// `|d/dtau L(y0, y1; p) - (L_tau(y1, y2) - L_tau(y0, y1))|` at the middle of
/// a run of evenly spaced snapshots, under both signs of the discrete
/// Lagrangian.
pub fn semi_closure_residual(snapshots: &[Chain], p: f64) -> Result<SemiClosure> {
    use crate::discrete::SignConvention;
    if snapshots.len() < 3 {
        return Err(Error::invalid("need at least 3 snapshots"));
    }
    let mid = snapshots.len() / 2;
    let (a, c, b) = (&snapshots[mid - 1], &snapshots[mid], &snapshots[mid + 1]);
    if c.k() < 2 {
        return Err(Error::invalid("closure needs a chain with K >= 2"));
    }
    let h = c.tau - a.tau;
    if !(h > 0.0) || ((b.tau - c.tau) - h).abs() > 1e-9 * h {
        return Err(Error::invalid("snapshots must be evenly spaced in increasing tau"));
    }
    let d_lagrangian =
        (discrete_lagrangian(&b.sites[0], &b.sites[1], p)? - discrete_lagrangian(&a.sites[0], &a.sites[1], p)?) / (2.0 * h);
    let v = tau_velocities(c)?.velocities;
    let y = &c.sites;
    let shift_difference = semi_lagrangian(&y[1], &y[2], &v[2])? - semi_lagrangian(&y[0], &y[1], &v[1])?;
    let printed = d_lagrangian - shift_difference;
    let negated = -d_lagrangian - shift_difference;
    let (residual, convention) = if negated.abs() < printed.abs() {
        (negated.abs(), SignConvention::Negated)
    } else {
        (printed.abs(), SignConvention::Printed)
    };
    Ok(SemiClosure { d_lagrangian, shift_difference, printed, negated, residual, convention })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_norm;
    use approx::assert_abs_diff_eq;

    fn orbit_chain(n: usize, k: usize) -> Chain {
        let params = LatticeParams::new(1.0, 2.0, n).unwrap();
        match n {
            1 => Chain::from_orbit(&[0.0], &[0.5], k, &params).unwrap(),
            _ => Chain::from_orbit(&[0.0, 3.0], &[-0.3, 3.6], k, &params).unwrap(),
        }
    }

    #[test]
    fn scalar_velocities() {
        let c = Chain::new(vec![vec![0.0], vec![2.0]], 0.0).unwrap();
        let v = tau_velocities(&c).unwrap();
        assert_eq!(v.velocities[1], vec![-4.0]);
        // a single-particle orbit has equal gaps, so both determinations agree
        let c = orbit_chain(1, 3);
        let v = tau_velocities(&c).unwrap();
        assert!(v.max_discrepancy() < 1e-14);
        let c = Chain::new(vec![vec![0.0], vec![0.7], vec![1.9]], 0.0).unwrap();
        let v = tau_velocities(&c).unwrap();
        assert_abs_diff_eq!(v.discrepancies[1], 1.44 - 0.49, epsilon = 1e-14);
    }

    #[test]
    fn chain_validation() {
        assert!(Chain::new(vec![vec![0.0]], 0.0).is_err());
        assert!(Chain::new(vec![vec![0.0, 1.0], vec![2.0]], 0.0).is_err());
        assert!(Chain::new(vec![vec![0.0, 1.0], vec![1.0, 3.0]], 0.0).is_err());
        assert_eq!(orbit_chain(2, 2).sites.len(), 3);
        assert_eq!(orbit_chain(2, 1).sites.len(), 2);
    }

    #[test]
    fn orbit_chain_velocities_agree() {
        let c = orbit_chain(2, 3);
        let v = tau_velocities(&c).unwrap();
        assert!(v.max_discrepancy() < 1e-10);
        let eom = semi_eom_residual(&c, &v.velocities).unwrap();
        assert_eq!(eom.len(), 2);
        assert!(eom.iter().all(|r| max_norm(r) < 1e-10));
    }

    #[test]
    fn eom_is_difference_of_constraints() {
        let c = orbit_chain(2, 2);
        let vel = vec![vec![0.3, -0.2], vec![1.0, 0.5], vec![-0.7, 0.1]];
        let (f, b) = constraint_residuals(&c, &vel).unwrap();
        let eom = semi_eom_residual(&c, &vel).unwrap();
        for m in 0..2 {
            assert_abs_diff_eq!(eom[0][m], f[1][m] - b[0][m], epsilon = 1e-14);
        }
        assert!(max_norm(&eom[0]) > 1e-3);
    }

    #[test]
    fn two_site_gap_is_constant() {
        let c = Chain::new(vec![vec![0.0], vec![2.0]], 0.0).unwrap();
        let snaps = evolve_chain(&c, 1e-2, 100).unwrap();
        for s in &snaps {
            assert_abs_diff_eq!(s.sites[1][0] - s.sites[0][0], 2.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(snaps[100].sites[0][0], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(snaps[100].tau, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evolved_chain_stays_consistent() {
        let snaps = evolve_chain(&orbit_chain(2, 2), 1e-3, 100).unwrap();
        for s in &snaps {
            assert!(tau_velocities(s).unwrap().max_discrepancy() < 1e-8);
        }
    }

    #[test]
    fn step_halving_ratio() {
        let c = orbit_chain(2, 2);
        let run = |h: f64, n: usize| evolve_chain(&c, h, n).unwrap().pop().unwrap().sites.concat();
        let fine = run(0.0125, 32);
        let e1 = max_diff(&run(0.1, 4), &fine);
        let e2 = max_diff(&run(0.05, 8), &fine);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn semi_lagrangian_examples() {
        assert_eq!(semi_lagrangian(&[0.0], &[1.0], &[-1.0]).unwrap(), -3.0);
        assert_eq!(semi_lagrangian(&[0.0], &[1.0], &[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn semi_closure_single_particle() {
        let snaps = evolve_chain(&orbit_chain(1, 2), 1e-3, 4).unwrap();
        let c = semi_closure_residual(&snaps, 1.0).unwrap();
        assert!(c.residual < 1e-10);
        assert!(semi_closure_residual(&snaps[..2], 1.0).is_err());
    }
}
