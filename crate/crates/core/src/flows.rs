//! Multi-time evolution under the `t2` and `t3` flows and the continuous
//! checks built on it: commutator defects, Poisson brackets, closure
//! residuals, the generalised Euler-Lagrange equations of a two-time path,
//! generalised momenta and Noether charges.
//!
//! A path in the `(t2, t3)` plane is a sequence of straight segments
//! parametrised by `s`, with constant `(dt2/ds, dt3/ds)` on each one.

use crate::error::{Error, Result};
use crate::hierarchy::{
    check_collision, hamiltonian, hamiltonian_grad, inverse_square_sums, lagrangian, lagrangian_partials,
    FlowIndex, PhaseState, VelocityState, COLLISION_THRESHOLD,
};
use crate::numerics::{fd_derivative, max_diff, max_norm, rk4_step, Vector};

/// A trajectory is aborted once two particles come closer than this.
pub const MID_FLIGHT_GAP: f64 = 1e-6;

/// Default step for flow-based partial derivatives.
pub const DEFAULT_FLOW_EPS: f64 = 1e-4;

/// Default step for finite-difference Poisson brackets.
pub const DEFAULT_BRACKET_STEP: f64 = 1e-5;

/// One straight segment in multi-time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    /// `(dt2/ds, dt3/ds)`
    pub direction: [f64; 2],
    /// Length of the segment in `s`, not negative.
    pub duration: f64,
}

impl PathSpec {
    pub fn new(direction: [f64; 2], duration: f64) -> Result<Self> {
        let p = PathSpec { direction, duration };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !self.direction.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("path direction must be finite"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::invalid("path duration must be finite and not negative"));
        }
        Ok(())
    }

    /// Number of RK4 steps used for step size `dt_s`: `ceil(duration / dt_s)`.
    pub fn steps(&self, dt_s: f64) -> usize {
        if self.duration == 0.0 {
            0
        } else {
            (self.duration / dt_s - 1e-9).ceil().max(1.0) as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub t2: f64,
    pub t3: f64,
    pub state: PhaseState,
}

/// Samples along a path, `s` strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty trajectory"));
        }
        if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(Error::invalid("trajectory samples must have strictly increasing s"));
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    /// Copy with every position replaced by `f(s, particle, x)`. Momenta are
    /// kept. Used to build off-shell trajectories for negative controls.
    pub fn map_positions(&self, f: impl Fn(f64, usize, f64) -> f64) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .map(|smp| {
                let mut smp = smp.clone();
                for (i, x) in smp.state.x.iter_mut().enumerate() {
                    *x = f(smp.s, i, *x);
                }
                smp
            })
            .collect();
        Trajectory { samples }
    }
}

/// Hamilton's equations of one flow: `(dH/dp, -dH/dx)`.
pub fn vector_field(k: FlowIndex, state: &PhaseState) -> Result<(Vector, Vector)> {
    let (dx, dp) = hamiltonian_grad(k, state)?;
    Ok((dp, dx.into_iter().map(|v| -v).collect()))
}

fn path_field(direction: [f64; 2], y: &[f64]) -> Result<Vector> {
    let state = PhaseState::from_flat(y);
    let n = state.n();
    let mut out = vec![0.0; 2 * n];
    for (c, k) in direction.iter().zip([FlowIndex::T2, FlowIndex::T3]) {
        if *c == 0.0 {
            continue;
        }
        let (xd, pd) = vector_field(k, &state)?;
        for i in 0..n {
            out[i] += c * xd[i];
            out[n + i] += c * pd[i];
        }
    }
    Ok(out)
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("step size must be positive"));
    }
    Ok(())
}

/// Fails when two particles got closer than [`MID_FLIGHT_GAP`] or swapped
/// order during the last step. A swap means a step jumped over a collision.
fn mid_flight_check(prev: &[f64], x: &[f64], s: f64) -> Result<()> {
    check_collision(x, MID_FLIGHT_GAP).map_err(|e| e.at_s(s))?;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if (prev[i] - prev[j]).signum() != (x[i] - x[j]).signum() {
                return Err(Error::CollisionSingularity { gap: (x[i] - x[j]).abs(), s: Some(s) });
            }
        }
    }
    Ok(())
}

/// Integrate the generalised Hamilton equations
/// `dX/ds = sum_k c_k dH_k/dP`, `dP/ds = -sum_k c_k dH_k/dX` along one
/// straight segment with RK4 and step `duration / ceil(duration / dt_s)`.
///
/// ```
/// use calogero::flows::{evolve_path, PathSpec};
/// use calogero::hierarchy::PhaseState;
/// // a single particle moves freely: x = x0 + c2 p + c3 p^2 after s = 1
/// let start = PhaseState::new(vec![0.5], vec![2.0]).unwrap();
/// let path = PathSpec::new([1.0, 0.5], 1.0).unwrap();
/// let traj = evolve_path(&start, &path, 1e-2).unwrap();
/// let end = &traj.last().state;
/// assert!((end.x[0] - (0.5 + 2.0 + 0.5 * 4.0)).abs() < 1e-12);
/// assert_eq!(end.p[0], 2.0);
/// ```
pub fn evolve_path(start: &PhaseState, path: &PathSpec, dt_s: f64) -> Result<Trajectory> {
    evolve_segments(start, std::slice::from_ref(path), dt_s)
}

/// Integrate along consecutive straight segments. The joint sample of two
/// segments appears once.
pub fn evolve_segments(start: &PhaseState, segments: &[PathSpec], dt_s: f64) -> Result<Trajectory> {
    check_step(dt_s)?;
    let _ = PhaseState::new(start.x.clone(), start.p.clone())?;
    mid_flight_check(&start.x, &start.x, 0.0)?;
    let mut samples = vec![Sample { s: 0.0, t2: 0.0, t3: 0.0, state: start.clone() }];
    let mut y = start.to_flat();
    let (mut s0, mut t2, mut t3) = (0.0, 0.0, 0.0);
    for seg in segments {
        seg.validate()?;
        let n = seg.steps(dt_s);
        if n == 0 {
            continue;
        }
        let h = seg.duration / n as f64;
        let [c2, c3] = seg.direction;
        for i in 1..=n {
            let s_prev = s0 + (i - 1) as f64 * h;
            y = rk4_step(|v: &[f64]| path_field(seg.direction, v), &y, h).map_err(|e| e.at_s(s_prev))?;
            let ds = i as f64 * h;
            let state = PhaseState::from_flat(&y);
            mid_flight_check(&samples.last().expect("never empty").state.x, &state.x, s0 + ds)?;
            samples.push(Sample { s: s0 + ds, t2: t2 + c2 * ds, t3: t3 + c3 * ds, state });
        }
        s0 += seg.duration;
        t2 += c2 * seg.duration;
        t3 += c3 * seg.duration;
    }
    Trajectory::new(samples)
}

/// RK4 trajectory of a single flow. A negative `duration` runs the flow
/// backwards; `s` then measures elapsed `|t_k|`.
pub fn integrate_flow(k: FlowIndex, start: &PhaseState, duration: f64, dt: f64) -> Result<Trajectory> {
    check_step(dt)?;
    if !duration.is_finite() {
        return Err(Error::invalid("flow duration must be finite"));
    }
    let sign = if duration < 0.0 { -1.0 } else { 1.0 };
    let direction = match k {
        FlowIndex::T2 => [sign, 0.0],
        FlowIndex::T3 => [0.0, sign],
    };
    evolve_path(start, &PathSpec::new(direction, duration.abs())?, dt)
}

fn flow_endpoint(k: FlowIndex, start: &PhaseState, duration: f64, dt: f64) -> Result<PhaseState> {
    Ok(integrate_flow(k, start, duration, dt)?.last().state.clone())
}

/// Max-norm difference between "t2 by `delta2`, then t3 by `delta3`" and the
/// opposite order, in positions and momenta.
pub fn commutator_defect(start: &PhaseState, delta2: f64, delta3: f64, dt: f64) -> Result<f64> {
    let a = flow_endpoint(FlowIndex::T3, &flow_endpoint(FlowIndex::T2, start, delta2, dt)?, delta3, dt)?;
    let b = flow_endpoint(FlowIndex::T2, &flow_endpoint(FlowIndex::T3, start, delta3, dt)?, delta2, dt)?;
    Ok(max_diff(&a.to_flat(), &b.to_flat()))
}

/// `{f, g} = sum_k (df/dp_k dg/dx_k - dg/dp_k df/dx_k)` with central
/// differences of step `h`.
pub fn poisson_bracket<F, G>(f: F, g: G, state: &PhaseState, h: f64) -> Result<f64>
where
    F: Fn(&PhaseState) -> Result<f64>,
    G: Fn(&PhaseState) -> Result<f64>,
{
    let y = state.to_flat();
    let n = state.n();
    let fy = |v: &[f64]| f(&PhaseState::from_flat(v));
    let gy = |v: &[f64]| g(&PhaseState::from_flat(v));
    let mut acc = 0.0;
    for k in 0..n {
        let fx = fd_derivative(fy, &y, k, h)?;
        let fp = fd_derivative(fy, &y, n + k, h)?;
        let gx = fd_derivative(gy, &y, k, h)?;
        let gp = fd_derivative(gy, &y, n + k, h)?;
        acc += fp * gx - gp * fx;
    }
    Ok(acc)
}

/// `{H_a, H_b}` from the closed-form gradients, same sign as
/// [`poisson_bracket`].
pub fn hamiltonian_bracket(a: FlowIndex, b: FlowIndex, state: &PhaseState) -> Result<f64> {
    let (ax, ap) = hamiltonian_grad(a, state)?;
    let (bx, bp) = hamiltonian_grad(b, state)?;
    Ok((0..state.n()).map(|k| ap[k] * bx[k] - bp[k] * ax[k]).sum())
}

/// Central difference of `f` along the `k` flow: `(f(+eps) - f(-eps)) / 2 eps`,
/// where each shifted state comes from one RK4 step of size `eps`.
fn flow_partial(k: FlowIndex, state: &PhaseState, eps: f64, f: impl Fn(&PhaseState) -> Result<f64>) -> Result<f64> {
    check_step(eps)?;
    let plus = flow_endpoint(k, state, eps, eps)?;
    let minus = flow_endpoint(k, state, -eps, eps)?;
    Ok((f(&plus)? - f(&minus)?) / (2.0 * eps))
}

/// `dH2/dt3 - dH3/dt2`, each derivative a central difference of one
/// Hamiltonian along the other flow. Equals `-2 {H2, H3}` up to `O(eps^2)`.
pub fn hamiltonian_closure_residual(state: &PhaseState, eps: f64) -> Result<f64> {
    let d23 = flow_partial(FlowIndex::T3, state, eps, |s| hamiltonian(FlowIndex::T2, s))?;
    let d32 = flow_partial(FlowIndex::T2, state, eps, |s| hamiltonian(FlowIndex::T3, s))?;
    Ok(d23 - d32)
}

/// Which `v3` goes with a phase-space point when a Lagrangian is evaluated
/// on the solution sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VelocityMode {
    /// `v3 = dH3/dp`, the velocity of the `t3` flow.
    Flow,
    /// `v3 = -3/4 v2^2 + 3 sum' 1/x^2`, from the constraint equation.
    Constraint,
}

/// Velocity-space point attached to a phase-space point, `v2 = p`.
pub fn velocity_state(state: &PhaseState, mode: VelocityMode) -> Result<VelocityState> {
    check_collision(&state.x, COLLISION_THRESHOLD)?;
    let s2 = inverse_square_sums(&state.x);
    let p = &state.p;
    let v3 = match mode {
        VelocityMode::Flow => p.iter().zip(&s2).map(|(v, s)| v * v - 4.0 * s).collect(),
        VelocityMode::Constraint => p.iter().zip(&s2).map(|(v, s)| -0.75 * v * v + 3.0 * s).collect(),
    };
    VelocityState::new(state.x.clone(), p.clone(), v3)
}

/// `dL2/dt3 - dL3/dt2` on the two-parameter solution sheet through `state`,
/// by central differences along each flow.
pub fn lagrangian_closure_residual(state: &PhaseState, eps: f64, mode: VelocityMode) -> Result<f64> {
    let l = |k: FlowIndex| move |s: &PhaseState| lagrangian(k, &velocity_state(s, mode)?);
    let d23 = flow_partial(FlowIndex::T3, state, eps, l(FlowIndex::T2))?;
    let d32 = flow_partial(FlowIndex::T2, state, eps, l(FlowIndex::T3))?;
    Ok(d23 - d32)
}

fn check_direction(direction: [f64; 2]) -> Result<()> {
    if direction == [0.0, 0.0] {
        return Err(Error::DegenerateDirection);
    }
    if !direction.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("direction must be finite"));
    }
    Ok(())
}

/// The bracket `sum_i dL_i/dv_i + sum_{i != j} (dL_i/dv_j) c_i / c_j` per
/// particle; cross terms are dropped when a component of the direction is 0.
fn momentum_bracket(sample: &VelocityState, direction: [f64; 2]) -> Result<Vector> {
    check_direction(direction)?;
    let [c2, c3] = direction;
    let a = lagrangian_partials(FlowIndex::T2, sample)?;
    let b = lagrangian_partials(FlowIndex::T3, sample)?;
    let cross = c2 != 0.0 && c3 != 0.0;
    Ok((0..sample.n())
        .map(|i| {
            let mut v = a.dv2[i] + b.dv3[i];
            if cross {
                v += a.dv3[i] * c2 / c3 + b.dv2[i] * c3 / c2;
            }
            v
        })
        .collect())
}

/// Momentum shared by the two Lagrangians along direction `(c2, c3)`:
/// half the bracket of [`pluri_el_residual`]. With one component zero it
/// reduces to `dL_active/dv_active = v2`.
///
/// ```
/// use calogero::flows::generalized_momentum;
/// use calogero::hierarchy::VelocityState;
/// let s = VelocityState::new(vec![0.0], vec![2.0], vec![-3.0]).unwrap();
/// assert_eq!(generalized_momentum(&s, [1.0, 1.0]).unwrap(), vec![2.0]);
/// assert_eq!(generalized_momentum(&s, [1.0, 0.0]).unwrap(), vec![2.0]);
/// ```
pub fn generalized_momentum(sample: &VelocityState, direction: [f64; 2]) -> Result<Vector> {
    Ok(momentum_bracket(sample, direction)?.into_iter().map(|v| 0.5 * v).collect())
}

/// Max over particles of
/// `|dL3/dv2 c3^2 + (dL2/dv2 - dL3/dv3) c2 c3 - dL2/dv3 c2^2|`.
pub fn pluri_constraint_residual(sample: &VelocityState, direction: [f64; 2]) -> Result<f64> {
    check_direction(direction)?;
    let [c2, c3] = direction;
    let a = lagrangian_partials(FlowIndex::T2, sample)?;
    let b = lagrangian_partials(FlowIndex::T3, sample)?;
    let r: Vector = (0..sample.n())
        .map(|i| b.dv2[i] * c3 * c3 + (a.dv2[i] - b.dv3[i]) * c2 * c3 - a.dv3[i] * c2 * c2)
        .collect();
    Ok(max_norm(&r))
}

/// Derivative of uniformly spaced samples: five-point fourth-order stencils
/// (one-sided near the ends), three-point ones for 3 or 4 samples.
fn sampled_derivative(f: &[Vector], h: f64) -> Vec<Vector> {
    let n = f.len();
    let m = f[0].len();
    let comb = |w: &[(usize, f64)], d: f64| -> Vector {
        (0..m).map(|c| w.iter().map(|(j, a)| a * f[*j][c]).sum::<f64>() / d).collect()
    };
    (0..n)
        .map(|j| {
            if n >= 5 {
                let d = 12.0 * h;
                match j {
                    0 => comb(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)], d),
                    1 => comb(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)], d),
                    _ if j == n - 2 => comb(&[(n - 1, 3.0), (n - 2, 10.0), (n - 3, -18.0), (n - 4, 6.0), (n - 5, -1.0)], d),
                    _ if j == n - 1 => {
                        comb(&[(n - 1, 25.0), (n - 2, -48.0), (n - 3, 36.0), (n - 4, -16.0), (n - 5, 3.0)], d)
                    }
                    _ => comb(&[(j - 2, 1.0), (j - 1, -8.0), (j + 1, 8.0), (j + 2, -1.0)], d),
                }
            } else {
                let d = 2.0 * h;
                match j {
                    0 => comb(&[(0, -3.0), (1, 4.0), (2, -1.0)], d),
                    _ if j == n - 1 => comb(&[(n - 1, 3.0), (n - 2, -4.0), (n - 3, 1.0)], d),
                    _ => comb(&[(j - 1, -1.0), (j + 1, 1.0)], d),
                }
            }
        })
        .collect()
}

fn uniform_spacing(traj: &Trajectory) -> Result<f64> {
    let s: Vec<f64> = traj.samples().iter().map(|x| x.s).collect();
    let n = s.len();
    let h = (s[n - 1] - s[0]) / (n - 1) as f64;
    if s.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-300)) {
        return Err(Error::invalid("trajectory samples must be uniformly spaced in s"));
    }
    Ok(h)
}

/// Generalised Euler-Lagrange residual
/// `sum_i c_i dL_i/dX - 1/2 d/ds[bracket]` at every sample, per particle.
///
/// Velocities come from the trajectory itself: on a pure `t2` path
/// `v2 = (dX/ds) / c2`; otherwise `v2 = p` and `v3` is whatever makes
/// `c2 v2 + c3 v3 = dX/ds`.
pub fn pluri_el_residual(traj: &Trajectory, direction: [f64; 2]) -> Result<Vec<Vector>> {
    check_direction(direction)?;
    if traj.len() < 3 {
        return Err(Error::invalid("need at least 3 samples for d/ds"));
    }
    let h = uniform_spacing(traj)?;
    let [c2, c3] = direction;
    let xs: Vec<Vector> = traj.samples().iter().map(|s| s.state.x.clone()).collect();
    let xdot = sampled_derivative(&xs, h);
    let mut forces = Vec::with_capacity(traj.len());
    let mut brackets = Vec::with_capacity(traj.len());
    for (smp, xd) in traj.samples().iter().zip(&xdot) {
        let n = smp.state.n();
        let p = &smp.state.p;
        let (v2, v3): (Vector, Vector) = if c3 == 0.0 {
            (xd.iter().map(|v| v / c2).collect(), vec![0.0; n])
        } else {
            (p.clone(), (0..n).map(|i| (xd[i] - c2 * p[i]) / c3).collect())
        };
        let vs = VelocityState::new(smp.state.x.clone(), v2, v3)?;
        let a = lagrangian_partials(FlowIndex::T2, &vs)?;
        let b = lagrangian_partials(FlowIndex::T3, &vs)?;
        forces.push((0..n).map(|i| c2 * a.dx[i] + c3 * b.dx[i]).collect::<Vector>());
        brackets.push(momentum_bracket(&vs, direction)?);
    }
    let dbr = sampled_derivative(&brackets, h);
    Ok(forces
        .iter()
        .zip(&dbr)
        .map(|(f, d)| f.iter().zip(d).map(|(a, b)| a - 0.5 * b).collect())
        .collect())
}

/// `E(s) = c2 H2 + c3 H3` at every sample.
pub fn noether_charge(traj: &Trajectory, direction: [f64; 2]) -> Result<Vector> {
    let [c2, c3] = direction;
    traj.samples()
        .iter()
        .map(|s| Ok(c2 * hamiltonian(FlowIndex::T2, &s.state)? + c3 * hamiltonian(FlowIndex::T3, &s.state)?))
        .collect()
}
