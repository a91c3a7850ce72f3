//! Reproducible random states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::PhaseState;
use crate::numerics::Vector;

/// Rejection attempts before giving up on a gap constraint.
const MAX_ATTEMPTS: usize = 10_000;

/// Seeded source of collision-free configurations.
///
/// ```
/// use calogero::sampling::StateSampler;
/// let mut a = StateSampler::new(7);
/// let mut b = StateSampler::new(7);
/// assert_eq!(a.phase_state(3, 0.5).unwrap(), b.phase_state(3, 0.5).unwrap());
/// ```
#[derive(Debug, Clone)]
pub struct StateSampler {
    rng: ChaCha8Rng,
}

impl StateSampler {
    pub fn new(seed: u64) -> Self {
        StateSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `n` sorted positions, uniform on an interval centred at 0, redrawn
    /// until every gap is at least `min_gap`.
    pub fn positions(&mut self, n: usize, min_gap: f64) -> Result<Vector> {
        if n == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        if !(min_gap >= 0.0 && min_gap.is_finite()) {
            return Err(Error::invalid("min_gap must be finite and non-negative"));
        }
        let half = (n as f64).max(2.0 * n as f64 * min_gap);
        for _ in 0..MAX_ATTEMPTS {
            let mut x: Vector = (0..n).map(|_| self.rng.gen_range(-half..half)).collect();
            x.sort_by(f64::total_cmp);
            if x.windows(2).all(|w| w[1] - w[0] >= min_gap) {
                return Ok(x);
            }
        }
        Err(Error::invalid(format!("no configuration with gap {min_gap} after {MAX_ATTEMPTS} draws")))
    }

    /// `n` values uniform in `[-bound, bound]`.
    pub fn uniform(&mut self, n: usize, bound: f64) -> Vector {
        (0..n).map(|_| self.rng.gen_range(-bound..=bound)).collect()
    }

    /// Positions from [`positions`](Self::positions), momenta uniform in
    /// `[-1, 1]`.
    pub fn phase_state(&mut self, n: usize, min_gap: f64) -> Result<PhaseState> {
        let x = self.positions(n, min_gap)?;
        let p = self.uniform(n, 1.0);
        PhaseState::new(x, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::min_gap;

    #[test]
    fn gaps_and_bounds() {
        let mut s = StateSampler::new(1);
        for n in 1..6 {
            let st = s.phase_state(n, 0.5).unwrap();
            assert!(n == 1 || min_gap(&st.x) >= 0.5);
            assert!(st.p.iter().all(|p| p.abs() <= 1.0));
        }
    }

    #[test]
    fn seeds_differ() {
        let a = StateSampler::new(1).phase_state(3, 0.5).unwrap();
        let b = StateSampler::new(2).phase_state(3, 0.5).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = StateSampler::new(0);
        assert!(s.positions(0, 0.5).is_err());
        assert!(s.positions(3, f64::NAN).is_err());
    }
}
