//! The continuous rational Calogero-Moser hierarchy: the first two
//! Hamiltonians and Lagrangians, their derivatives, the constraint between
//! the two hierarchy velocities, and the Lax pair with its trace invariants.
//!
//! With `x_ij = x_i - x_j` and primed sums running over `j != i`:
//!
//! ```text
//! H2 = sum p_i^2 / 2 - sum' 2 / x_ij^2
//! H3 = sum p_i^3 / 3 - sum' 4 p_i / x_ij^2
//! L2 = sum v2_i^2 / 2 + sum' 2 / x_ij^2
//! L3 = sum (v2_i v3_i + v2_i^3 / 4) - sum' 3 v2_i / x_ij^2
//! ```

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Gaps below this make every formula here meaningless.
pub const COLLISION_THRESHOLD: f64 = 1e-12;

/// Positions and momenta of `N` particles.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vector,
    pub p: Vector,
}

impl PhaseState {
    /// Checks lengths and finiteness. Collisions are checked by the
    /// operations that need distinct positions.
    pub fn new(x: Vector, p: Vector) -> Result<Self> {
        check_lengths(&x, &[&p])?;
        Ok(PhaseState { x, p })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Stack as `[x_1..x_N, p_1..p_N]`.
    pub fn to_flat(&self) -> Vector {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_flat(y: &[f64]) -> Self {
        let n = y.len() / 2;
        PhaseState { x: y[..n].to_vec(), p: y[n..].to_vec() }
    }
}

/// Positions with the two hierarchy velocities `v2 = dX/dt2`, `v3 = dX/dt3`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    pub x: Vector,
    pub v2: Vector,
    pub v3: Vector,
}

impl VelocityState {
    pub fn new(x: Vector, v2: Vector, v3: Vector) -> Result<Self> {
        check_lengths(&x, &[&v2, &v3])?;
        Ok(VelocityState { x, v2, v3 })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Off-diagonal Lax coefficient. The default `-2` makes `Tr L^2 / 2` and
/// `Tr L^3 / 3` equal `H2` and `H3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConvention {
    pub gamma: f64,
}

impl Default for CouplingConvention {
    fn default() -> Self {
        CouplingConvention { gamma: -2.0 }
    }
}

impl CouplingConvention {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::invalid("coupling gamma must be finite and nonzero"));
        }
        Ok(CouplingConvention { gamma })
    }
}

/// Selects the `t2` or the `t3` flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowIndex {
    T2,
    T3,
}

impl FlowIndex {
    pub fn new(k: u32) -> Result<Self> {
        match k {
            2 => Ok(FlowIndex::T2),
            3 => Ok(FlowIndex::T3),
            _ => Err(Error::invalid(format!("flow index must be 2 or 3, got {k}"))),
        }
    }

    pub fn k(self) -> u32 {
        match self {
            FlowIndex::T2 => 2,
            FlowIndex::T3 => 3,
        }
    }
}

fn check_lengths(x: &[f64], others: &[&Vector]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid("need at least one particle"));
    }
    for o in others {
        if o.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: o.len() });
        }
    }
    if x.iter().chain(others.iter().flat_map(|o| o.iter())).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    Ok(())
}

/// Smallest pairwise gap, `inf` for a single particle.
pub fn min_gap(x: &[f64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            g = g.min((x[i] - x[j]).abs());
        }
    }
    g
}

pub(crate) fn check_collision(x: &[f64], threshold: f64) -> Result<()> {
    let g = min_gap(x);
    if g < threshold || g.is_nan() {
        return Err(Error::CollisionSingularity { gap: g, s: None });
    }
    Ok(())
}

/// `sum_{j != i} 1 / (x_i - x_j)^2` for every `i`.
pub(crate) fn inverse_square_sums(x: &[f64]) -> Vector {
    (0..x.len())
        .map(|i| (0..x.len()).filter(|&j| j != i).map(|j| (x[i] - x[j]).powi(-2)).sum())
        .collect()
}

/// `sum_{j != i} w_ij / (x_i - x_j)^3` with `w_ij = a_i + a_j`.
fn cubic_sums(x: &[f64], a: Option<&[f64]>) -> Vector {
    (0..x.len())
        .map(|i| {
            (0..x.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let w = a.map_or(1.0, |a| a[i] + a[j]);
                    w / (x[i] - x[j]).powi(3)
                })
                .sum()
        })
        .collect()
}

/// `H2` or `H3` at a phase-space point.
///
/// ```
/// use calogero::hierarchy::{hamiltonian, FlowIndex, PhaseState};
/// let s = PhaseState::new(vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
/// assert_eq!(hamiltonian(FlowIndex::T2, &s).unwrap(), -1.0);
/// ```
pub fn hamiltonian(k: FlowIndex, state: &PhaseState) -> Result<f64> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let s2 = inverse_square_sums(&state.x);
    let p = &state.p;
    Ok(match k {
        FlowIndex::T2 => p.iter().map(|v| 0.5 * v * v).sum::<f64>() - 2.0 * s2.iter().sum::<f64>(),
        FlowIndex::T3 => {
            p.iter().map(|v| v * v * v / 3.0).sum::<f64>()
                - 4.0 * p.iter().zip(&s2).map(|(v, s)| v * s).sum::<f64>()
        }
    })
}

/// `(dH/dx, dH/dp)` in closed form.
pub fn hamiltonian_grad(k: FlowIndex, state: &PhaseState) -> Result<(Vector, Vector)> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let x = &state.x;
    let p = &state.p;
    Ok(match k {
        FlowIndex::T2 => {
            let dx = cubic_sums(x, None).into_iter().map(|c| 8.0 * c).collect();
            (dx, p.clone())
        }
        FlowIndex::T3 => {
            let dx = cubic_sums(x, Some(p)).into_iter().map(|c| 8.0 * c).collect();
            let s2 = inverse_square_sums(x);
            let dp = p.iter().zip(&s2).map(|(v, s)| v * v - 4.0 * s).collect();
            (dx, dp)
        }
    })
}

/// `L2` or `L3` at a velocity-space point.
pub fn lagrangian(k: FlowIndex, state: &VelocityState) -> Result<f64> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let s2 = inverse_square_sums(&state.x);
    let v2 = &state.v2;
    Ok(match k {
        FlowIndex::T2 => v2.iter().map(|v| 0.5 * v * v).sum::<f64>() + 2.0 * s2.iter().sum::<f64>(),
        FlowIndex::T3 => {
            v2.iter().zip(&state.v3).map(|(a, b)| a * b + 0.25 * a * a * a).sum::<f64>()
                - 3.0 * v2.iter().zip(&s2).map(|(v, s)| v * s).sum::<f64>()
        }
    })
}

/// Partial derivatives of one Lagrangian, per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPartials {
    pub dx: Vector,
    pub dv2: Vector,
    pub dv3: Vector,
}

pub fn lagrangian_partials(k: FlowIndex, state: &VelocityState) -> Result<LagrangianPartials> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let x = &state.x;
    let v2 = &state.v2;
    let n = x.len();
    Ok(match k {
        FlowIndex::T2 => LagrangianPartials {
            dx: cubic_sums(x, None).into_iter().map(|c| -8.0 * c).collect(),
            dv2: v2.clone(),
            dv3: vec![0.0; n],
        },
        FlowIndex::T3 => {
            let s2 = inverse_square_sums(x);
            LagrangianPartials {
                dx: cubic_sums(x, Some(v2)).into_iter().map(|c| 6.0 * c).collect(),
                dv2: (0..n).map(|i| state.v3[i] + 0.75 * v2[i] * v2[i] - 3.0 * s2[i]).collect(),
                dv3: v2.clone(),
            }
        }
    })
}

/// `v2_i^2 / 4 + v3_i / 3 - sum_{j != i} 1 / x_ij^2`, which vanishes on the
/// constraint surface linking the two velocities.
pub fn constraint_residual(state: &VelocityState) -> Result<Vector> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let s2 = inverse_square_sums(&state.x);
    Ok((0..state.n()).map(|i| 0.25 * state.v2[i].powi(2) + state.v3[i] / 3.0 - s2[i]).collect())
}

/// `H_k(x, P = v2) - (sum P v_k - L_k)`.
///
/// Identically zero for `k = 2`. For `k = 3` the printed Hamiltonian and
/// Lagrangian do not form a Legendre pair under `P = v2`, and the value is a
/// diagnostic.
pub fn legendre_check(k: FlowIndex, state: &VelocityState) -> Result<f64> {
    let ps = PhaseState { x: state.x.clone(), p: state.v2.clone() };
    let h = hamiltonian(k, &ps)?;
    let vk = match k {
        FlowIndex::T2 => &state.v2,
        FlowIndex::T3 => &state.v3,
    };
    let pv: f64 = state.v2.iter().zip(vk).map(|(a, b)| a * b).sum();
    Ok(h - (pv - lagrangian(k, state)?))
}

/// `L = diag(p) + [gamma / x_ij]`, `M = [gamma / x_ij^2]` off the diagonal
/// with `M_ii = -gamma sum_{k != i} 1 / x_ik^2` so that rows of `M` sum to 0.
pub fn build_lax_pair(state: &PhaseState, conv: CouplingConvention) -> Result<(Matrix, Matrix)> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let x = &state.x;
    let n = x.len();
    let g = conv.gamma;
    let s2 = inverse_square_sums(x);
    let l = Matrix::from_fn(n, n, |i, j| if i == j { state.p[i] } else { g / (x[i] - x[j]) });
    let m = Matrix::from_fn(n, n, |i, j| if i == j { -g * s2[i] } else { g / (x[i] - x[j]).powi(2) });
    Ok((l, m))
}

/// `I_l = Tr(L^l) / l` for `l = 1..=kmax`.
pub fn invariants(state: &PhaseState, conv: CouplingConvention, kmax: usize) -> Result<Vector> {
    if kmax == 0 {
        return Err(Error::invalid("kmax must be at least 1"));
    }
    let (l, _) = build_lax_pair(state, conv)?;
    let mut pw = l.clone();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            pw = pw.matmul(&l)?;
        }
        out.push(pw.trace()? / k as f64);
    }
    Ok(out)
}

/// Max-norm of `dL/dt2 + [L, M]`, with `dL/dt2` built from the `t2` vector
/// field.
pub fn lax_residual(state: &PhaseState, conv: CouplingConvention) -> Result<f64> {
    let (l, m) = build_lax_pair(state, conv)?;
    let (dhdx, dhdp) = hamiltonian_grad(FlowIndex::T2, state)?;
    let x = &state.x;
    let g = conv.gamma;
    let n = x.len();
    let ldot = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -dhdx[i]
        } else {
            -g * (dhdp[i] - dhdp[j]) / (x[i] - x[j]).powi(2)
        }
    });
    Ok(ldot.add(&l.commutator(&m)?)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{fd_derivative, max_diff};
    use approx::assert_abs_diff_eq;

    fn ps(x: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(x.to_vec(), p.to_vec()).unwrap()
    }

    fn vs(x: &[f64], v2: &[f64], v3: &[f64]) -> VelocityState {
        VelocityState::new(x.to_vec(), v2.to_vec(), v3.to_vec()).unwrap()
    }

    const T2: FlowIndex = FlowIndex::T2;
    const T3: FlowIndex = FlowIndex::T3;

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(T2, &ps(&[0.0], &[2.0])).unwrap(), 2.0);
        assert_eq!(hamiltonian(T2, &ps(&[-1.0, 1.0], &[0.0, 0.0])).unwrap(), -1.0);
        assert_abs_diff_eq!(hamiltonian(T3, &ps(&[-1.0, 1.0], &[1.0, 1.0])).unwrap(), -4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn collisions_are_rejected() {
        let s = ps(&[1.0, 1.0], &[0.0, 0.0]);
        assert!(matches!(hamiltonian(T2, &s), Err(Error::CollisionSingularity { .. })));
        assert!(hamiltonian_grad(T3, &s).is_err());
        assert!(build_lax_pair(&s, CouplingConvention::default()).is_err());
        assert!(PhaseState::new(vec![], vec![]).is_err());
        assert!(PhaseState::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(CouplingConvention::new(0.0).is_err());
        assert!(FlowIndex::new(4).is_err());
    }

    #[test]
    fn gradient_examples() {
        let (dx, dp) = hamiltonian_grad(T2, &ps(&[0.3], &[1.5])).unwrap();
        assert_eq!((dx, dp), (vec![0.0], vec![1.5]));
        let (dx, _) = hamiltonian_grad(T2, &ps(&[-1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert_eq!(dx, vec![-1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = ps(&[-1.3, 0.2, 1.9], &[0.4, -0.7, 0.1]);
        for k in [T2, T3] {
            let (dx, dp) = hamiltonian_grad(k, &s).unwrap();
            let y = s.to_flat();
            let h = |y: &[f64]| hamiltonian(k, &PhaseState::from_flat(y));
            for i in 0..6 {
                let fd = fd_derivative(h, &y, i, 1e-5).unwrap();
                let an = if i < 3 { dx[i] } else { dp[i - 3] };
                assert_abs_diff_eq!(fd, an, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn lagrangian_examples() {
        assert_eq!(lagrangian(T2, &vs(&[0.0], &[2.0], &[0.0])).unwrap(), 2.0);
        assert_eq!(lagrangian(T2, &vs(&[-1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(lagrangian(T3, &vs(&[0.0], &[2.0], &[1.0])).unwrap(), 4.0);
    }

    #[test]
    fn lagrangian_partials_match_finite_differences() {
        let s = vs(&[-1.1, 0.4, 2.0], &[0.3, -0.5, 0.9], &[0.2, 0.6, -0.4]);
        for k in [T2, T3] {
            let an = lagrangian_partials(k, &s).unwrap();
            let mut flat = s.x.clone();
            flat.extend(&s.v2);
            flat.extend(&s.v3);
            let f = |y: &[f64]| lagrangian(k, &vs(&y[0..3], &y[3..6], &y[6..9]));
            let fd: Vec<f64> = (0..9).map(|i| fd_derivative(f, &flat, i, 1e-5).unwrap()).collect();
            assert!(max_diff(&fd[0..3], &an.dx) < 1e-7);
            assert!(max_diff(&fd[3..6], &an.dv2) < 1e-7);
            assert!(max_diff(&fd[6..9], &an.dv3) < 1e-7);
        }
    }

    #[test]
    fn constraint_examples() {
        assert_eq!(constraint_residual(&vs(&[0.0], &[0.0], &[0.0])).unwrap(), vec![0.0]);
        assert_eq!(constraint_residual(&vs(&[0.0], &[2.0], &[-3.0])).unwrap(), vec![0.0]);
        let r = constraint_residual(&vs(&[-1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0])).unwrap();
        for v in r {
            assert_abs_diff_eq!(v, 1.0 / 12.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_check(T2, &vs(&[0.0], &[2.0], &[0.0])).unwrap(), 0.0);
        let s = vs(&[-0.8, 0.5, 1.7], &[0.3, -1.2, 0.8], &[0.1, 0.2, 0.3]);
        assert_abs_diff_eq!(legendre_check(T2, &s).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(legendre_check(T3, &vs(&[0.0], &[2.0], &[0.0])).unwrap(), 14.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn lax_pair_examples() {
        let conv = CouplingConvention::default();
        let (l, m) = build_lax_pair(&ps(&[0.0], &[1.5]), conv).unwrap();
        assert_eq!((l.as_slice(), m.as_slice()), (&[1.5][..], &[0.0][..]));

        let s = ps(&[-1.0, 1.0], &[0.0, 0.0]);
        let (l, m) = build_lax_pair(&s, conv).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 1.0, -1.0, 0.0]);
        for i in 0..2 {
            assert_abs_diff_eq!(m.row(i).iter().sum::<f64>(), 0.0);
        }
        let i2 = 0.5 * l.matmul(&l).unwrap().trace().unwrap();
        assert_eq!(i2, -1.0);
        assert_eq!(i2, hamiltonian(T2, &s).unwrap());
    }

    #[test]
    fn invariant_examples() {
        let conv = CouplingConvention::default();
        let inv = invariants(&ps(&[0.0], &[2.0]), conv, 3).unwrap();
        assert_abs_diff_eq!(inv[2], 8.0 / 3.0, epsilon = 1e-15);
        assert_eq!(&inv[..2], &[2.0, 2.0]);
        let inv = invariants(&ps(&[-1.0, 1.0], &[0.0, 0.0]), conv, 2).unwrap();
        assert_eq!(inv, vec![0.0, -1.0]);
        assert!(invariants(&ps(&[0.0], &[2.0]), conv, 0).is_err());

        let s = ps(&[-1.7, 0.1, 1.3], &[0.5, -0.2, 0.9]);
        let inv = invariants(&s, conv, 3).unwrap();
        assert_abs_diff_eq!(inv[0], 1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[1], hamiltonian(T2, &s).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(inv[2], hamiltonian(T3, &s).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn lax_residual_examples() {
        let conv = CouplingConvention::default();
        assert_eq!(lax_residual(&ps(&[0.4], &[1.0]), conv).unwrap(), 0.0);
        assert!(lax_residual(&ps(&[-1.0, 1.0], &[0.3, -0.7]), conv).unwrap() <= 1e-12);
        let s = ps(&[-2.1, -0.6, 0.8, 2.2], &[0.3, -0.1, 0.7, -0.9]);
        assert!(lax_residual(&s, conv).unwrap() <= 1e-10);
    }
}
