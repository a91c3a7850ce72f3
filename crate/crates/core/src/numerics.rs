//! Small dense linear algebra, Newton's method, central differences and a
//! classical RK4 step.
//!
//! Everything here works on `f64` slices and row-major [`Matrix`] values.
//! Particle counts in this crate are small, so nothing is sparse or blocked.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Coordinate tuples and residual vectors are plain `Vec<f64>`.
pub type Vector = Vec<f64>;

/// Relative pivot threshold used by the LU factorisation.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build from row-major entries. Fails unless `rows * cols == data.len()`
    /// and both counts are positive.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::invalid("trace of a non-square matrix"));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| c * a).collect() }
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Matrix) -> Result<Matrix> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Integer power of a square matrix, `k >= 1`.
    pub fn pow(&self, k: usize) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::invalid("power of a non-square matrix"));
        }
        if k == 0 {
            return Ok(Matrix::identity(self.rows));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.matmul(self)?;
        }
        Ok(acc)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        max_norm(&self.data)
    }

    /// `ln |det A|` from the LU pivots, so it does not underflow for
    /// moderately small determinants.
    pub fn log_abs_det(&self) -> Result<f64> {
        let lu = Lu::factor(self)?;
        Ok(lu.diag().map(|d| d.abs().ln()).sum())
    }

    pub fn det(&self) -> Result<f64> {
        let lu = Lu::factor(self)?;
        Ok(lu.sign * lu.diag().product::<f64>())
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// LU factorisation with partial pivoting, `P A = L U`, packed in one matrix.
struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn factor(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::invalid("LU factorisation of a non-square matrix"));
        }
        let n = a.rows;
        let threshold = PIVOT_THRESHOLD * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= threshold || pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::SingularMatrix { pivot: pmax, threshold });
            }
            if piv != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu.data[i * n + j] -= f * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.lu.rows).map(|i| self.lu[(i, i)])
    }

    fn solve(&self, b: &[f64]) -> Vector {
        let n = self.lu.rows;
        let mut y: Vector = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[(i, j)] * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }
}

/// Solve `a v = b` by LU with partial pivoting.
///
/// A pivot below `1e-14` times the largest entry of `a` counts as singular.
pub fn linear_solve(a: &Matrix, b: &[f64]) -> Result<Vector> {
    if !a.is_square() {
        return Err(Error::invalid("linear_solve needs a square matrix"));
    }
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch { expected: a.rows, got: b.len() });
    }
    Ok(Lu::factor(a)?.solve(b))
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Max-norm of the residual that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Factor in (0, 1] applied to each Newton update.
    pub damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tolerance: 1e-12, max_iterations: 50, damping: 1.0 }
    }
}

impl NewtonSettings {
    pub fn new(tolerance: f64, max_iterations: usize, damping: f64) -> Result<Self> {
        let s = NewtonSettings { tolerance, max_iterations, damping };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("newton tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("newton max_iterations must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("newton damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Residual callback for [`newton_solve`].
pub type ResidualFn<'a> = &'a dyn Fn(&[f64]) -> Result<Vector>;
/// Jacobian callback for [`newton_solve`].
pub type JacobianFn<'a> = &'a dyn Fn(&[f64]) -> Result<Matrix>;

/// Find `x` with `max|residual(x)| <= settings.tolerance`.
///
/// Without an analytic Jacobian a forward-difference one is built with step
/// `1e-7 (1 + |x_i|)`.
///
/// ```
/// use calogero::numerics::{newton_solve, NewtonSettings};
/// let f = |u: &[f64]| Ok(vec![u[0] * u[0] - 4.0]);
/// let root = newton_solve(&f, None, &[3.0], &NewtonSettings::default()).unwrap();
/// assert!((root[0] - 2.0).abs() < 1e-12);
/// ```
pub fn newton_solve(
    residual: ResidualFn<'_>,
    jacobian: Option<JacobianFn<'_>>,
    guess: &[f64],
    settings: &NewtonSettings,
) -> Result<Vector> {
    settings.validate()?;
    let n = guess.len();
    if n == 0 {
        return Err(Error::invalid("empty newton guess"));
    }
    let mut x = guess.to_vec();
    let mut r = residual(&x)?;
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: r.len() });
    }
    for _ in 0..settings.max_iterations {
        if max_norm(&r) <= settings.tolerance {
            return Ok(x);
        }
        let j = match jacobian {
            Some(jf) => jf(&x)?,
            None => fd_jacobian(residual, &x, &r)?,
        };
        let dx = match linear_solve(&j, &r) {
            Ok(dx) => dx,
            Err(Error::SingularMatrix { .. }) => return Err(Error::SingularJacobian),
            Err(e) => return Err(e),
        };
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= settings.damping * di;
        }
        r = residual(&x)?;
    }
    let res = max_norm(&r);
    if res <= settings.tolerance {
        Ok(x)
    } else {
        Err(Error::NonConvergence { iterations: settings.max_iterations, residual: res })
    }
}

fn fd_jacobian(residual: ResidualFn<'_>, x: &[f64], r0: &[f64]) -> Result<Matrix> {
    let n = x.len();
    let mut j = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for c in 0..n {
        let h = 1e-7 * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        let r1 = residual(&xp)?;
        xp[c] = x[c];
        for i in 0..n {
            j[(i, c)] = (r1[i] - r0[i]) / h;
        }
    }
    Ok(j)
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn fd_derivative<F>(f: F, point: &[f64], index: usize, step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if index >= point.len() {
        return Err(Error::invalid(format!("coordinate index {index} out of range")));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut xp = point.to_vec();
    xp[index] = point[index] + step;
    let fp = f(&xp)?;
    xp[index] = point[index] - step;
    let fm = f(&xp)?;
    Ok((fp - fm) / (2.0 * step))
}

/// Gradient by central differences, one coordinate at a time.
pub fn fd_gradient<F>(f: F, point: &[f64], step: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    (0..point.len()).map(|i| fd_derivative(&f, point, i, step)).collect()
}

/// One classical fourth-order Runge-Kutta step of `y' = field(y)`.
///
/// ```
/// use calogero::numerics::rk4_step;
/// // harmonic oscillator x' = p, p' = -x
/// let field = |y: &[f64]| Ok(vec![y[1], -y[0]]);
/// let y = rk4_step(&field, &[1.0, 0.0], 0.1).unwrap();
/// assert!((y[0] - 0.1f64.cos()).abs() < 1e-7);
/// assert!((y[1] + 0.1f64.sin()).abs() < 1e-7);
/// ```
pub fn rk4_step<F>(field: F, state: &[f64], dt: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Vector>,
{
    let n = state.len();
    let k1 = field(state)?;
    if k1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: k1.len() });
    }
    let k2 = field(&axpy(state, 0.5 * dt, &k1))?;
    let k3 = field(&axpy(state, 0.5 * dt, &k2))?;
    let k4 = field(&axpy(state, dt, &k3))?;
    Ok((0..n).map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// `x + a y`
pub fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vector {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest absolute value, 0 for an empty slice.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// Max-norm of the elementwise difference.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        let d = (x - y).abs();
        if d > m || d.is_nan() { d } else { m }
    })
}

/// Values of a step-dependent estimate at `h`, `h/2` and `h/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub values: [f64; 3],
    /// `|f(h) - f(h/2)| / |f(h/2) - f(h/4)|`, `None` when the second
    /// difference is below the noise floor.
    pub ratio: Option<f64>,
}

impl Convergence {
    /// Estimate at the finest step.
    pub fn value(&self) -> f64 {
        self.values[2]
    }

    /// Distance of the halving ratio from `2^order`, relative to it; 0 when
    /// the differences are already at the noise floor.
    pub fn ratio_error(&self, order: i32) -> f64 {
        let target = 2f64.powi(order);
        self.ratio.map_or(0.0, |r| (r - target).abs() / target)
    }
}

/// Evaluate `f` at three halved steps starting from `h`.
///
/// ```
/// use calogero::numerics::step_halving;
/// let c = step_halving(|h| Ok(1.0 + 3.0 * h * h), 0.1, 1e-14).unwrap();
/// assert!((c.ratio.unwrap() - 4.0).abs() < 1e-9);
/// ```
pub fn step_halving(f: impl Fn(f64) -> Result<f64>, h: f64, floor: f64) -> Result<Convergence> {
    if !(h > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let values = [f(h)?, f(h / 2.0)?, f(h / 4.0)?];
    let d1 = (values[0] - values[1]).abs();
    let d2 = (values[1] - values[2]).abs();
    let ratio = if d2 > floor { Some(d1 / d2) } else { None };
    Ok(Convergence { values, ratio })
}
