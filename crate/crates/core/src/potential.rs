//! Periodic approximants of the two-color quasi-periodic potential.
//!
//! The potential `V1 cos(2x) + V2 cos(2 beta x + theta)` is made periodic by
//! replacing `beta` with a rational convergent `p/q`. The approximant then
//! has period `pi q`, and everything downstream lives on the fundamental
//! interval `[-pi q / 2, pi q / 2)` with periodic boundary conditions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The golden ratio `(sqrt(5) + 1) / 2`.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Returns the `n`-th convergent `p/q` of the golden ratio.
///
/// Indexing starts after the trivial `1/1`, so `n = 1` gives `2/1` and
/// `n = 9` gives `89/55`. Both entries are consecutive Fibonacci numbers,
/// hence coprime.
pub fn golden_convergent(n: usize) -> Result<(u64, u64)> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "convergent index must be at least 1".into(),
        ));
    }
    // (q, p) walk the Fibonacci sequence starting from 1/1.
    let (mut q, mut p) = (1u64, 1u64);
    for _ in 0..n {
        let next = p.checked_add(q).ok_or(Error::ConvergentOverflow(n))?;
        q = p;
        p = next;
    }
    Ok((p, q))
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Parameters of a periodic approximant `V1 cos(2x) + V2 cos(2 (p/q) x + theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v1: f64,
    pub v2: f64,
    pub theta: f64,
    /// Approximant order, when the ratio comes from [`golden_convergent`].
    pub order: Option<usize>,
    pub p: u64,
    pub q: u64,
}

impl PotentialSpec {
    /// Approximant of order `n` built on the golden ratio.
    pub fn golden(v1: f64, v2: f64, theta: f64, n: usize) -> Result<Self> {
        let (p, q) = golden_convergent(n)?;
        let mut spec = Self::with_ratio(v1, v2, theta, p, q)?;
        spec.order = Some(n);
        Ok(spec)
    }

    /// Approximant with a user-supplied rational ratio `p/q`.
    pub fn with_ratio(v1: f64, v2: f64, theta: f64, p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidParameter("p and q must be positive".into()));
        }
        if gcd(p, q) != 1 {
            return Err(Error::InvalidParameter(format!(
                "p = {p} and q = {q} are not coprime"
            )));
        }
        if !(v1.is_finite() && v2.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidParameter(
                "potential parameters must be finite".into(),
            ));
        }
        Ok(Self {
            v1,
            v2,
            theta,
            order: None,
            p,
            q,
        })
    }

    /// Period of the approximant, `pi q`.
    pub fn length(&self) -> f64 {
        PI * self.q as f64
    }

    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Evaluates the potential at `x`.
    pub fn sample(&self, x: f64) -> f64 {
        self.v1 * (2.0 * x).cos() + self.v2 * (2.0 * self.ratio() * x + self.theta).cos()
    }

    /// Evaluates the potential on every node of `grid`.
    pub fn sample_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.coords().map(|x| self.sample(x)).collect()
    }
}

/// Uniform periodic grid on `[-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub length: f64,
    pub dx: f64,
}

impl Grid {
    /// Builds a grid over one period of `spec`.
    ///
    /// `points` must be a power of two and at least `4 q`.
    pub fn new(spec: &PotentialSpec, points: usize) -> Result<Self> {
        let required = (4 * spec.q as usize).next_power_of_two();
        if !points.is_power_of_two() || points < 4 * spec.q as usize {
            return Err(Error::UnderResolvedGrid { points, required });
        }
        let length = spec.length();
        Ok(Self {
            points,
            length,
            dx: length / points as f64,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx
    }

    pub fn coords(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.x(i))
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let base = 2.0 * PI / self.length;
        (0..n)
            .map(|i| if i < (n + 1) / 2 { i } else { i - n })
            .map(|m| base * m as f64)
            .collect()
    }

    /// Rectangle-rule integral of `f` over the period.
    pub fn integrate(&self, f: impl IntoIterator<Item = f64>) -> f64 {
        f.into_iter().sum::<f64>() * self.dx
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if len != self.points {
            return Err(Error::GridMismatch {
                expected: self.points,
                found: len,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> PotentialSpec {
        PotentialSpec::golden(1.5, 2.0, 0.13, 9).unwrap()
    }

    /// Convergents of the all-ones continued fraction, expanded from scratch.
    fn expand_continued_fraction(n: usize) -> (u64, u64) {
        // [1; 1, 1, ...] truncated after n + 1 terms, folded from the tail.
        let (mut num, mut den) = (1u64, 1u64);
        for _ in 0..n {
            (num, den) = (num + den, num);
        }
        (num, den)
    }

    #[test]
    fn convergent_anchors() {
        assert_eq!(golden_convergent(9).unwrap(), (89, 55));
        assert_eq!(golden_convergent(1).unwrap(), (2, 1));
        assert_eq!(golden_convergent(8).unwrap(), (55, 34));
        for n in 1..30 {
            assert_eq!(golden_convergent(n).unwrap(), expand_continued_fraction(n));
        }
    }

    #[test]
    fn convergent_rejects_zero_and_overflow() {
        assert!(golden_convergent(0).is_err());
        assert!(matches!(
            golden_convergent(200),
            Err(Error::ConvergentOverflow(200))
        ));
    }

    #[test]
    fn convergents_are_best_approximations() {
        for n in 1..40 {
            let (p, q) = golden_convergent(n).unwrap();
            assert_eq!(gcd(p, q), 1);
            let q = q as f64;
            assert!((GOLDEN_RATIO - p as f64 / q).abs() < 1.0 / (q * q));
        }
    }

    #[test]
    fn non_coprime_ratio_rejected() {
        assert!(PotentialSpec::with_ratio(1.0, 1.0, 0.0, 4, 2).is_err());
    }

    #[test]
    fn sample_at_origin() {
        let v = reference().sample(0.0);
        assert_relative_eq!(v, 1.5 + 2.0 * 0.13f64.cos(), epsilon = 1e-14);
        assert_relative_eq!(v, 3.483124, epsilon = 1e-6);
        let flat = PotentialSpec::golden(0.0, 0.0, 0.13, 9).unwrap();
        assert_eq!(flat.sample(12.3), 0.0);
    }

    #[test]
    fn grid_spacing() {
        let spec = reference();
        let grid = Grid::new(&spec, 4096).unwrap();
        assert_relative_eq!(grid.dx, 55.0 * PI / 4096.0, epsilon = 1e-15);
        assert_relative_eq!(grid.dx, 0.04218, epsilon = 1e-5);
        assert_relative_eq!(grid.x(0), -0.5 * spec.length());
        assert_relative_eq!(grid.dx * grid.points as f64, spec.length(), epsilon = 1e-12);
        assert_relative_eq!(grid.x(grid.points - 1) + grid.dx, 0.5 * spec.length(), epsilon = 1e-12);
        assert!(Grid::new(&spec, 2).is_err());
        assert!(Grid::new(&spec, 3000).is_err());
    }

    #[test]
    fn potential_bounded_on_grid() {
        let spec = reference();
        let grid = Grid::new(&spec, 4096).unwrap();
        let bound = spec.v1.abs() + spec.v2.abs();
        for v in spec.sample_grid(&grid) {
            assert!(v.abs() <= bound);
        }
    }

    proptest! {
        #[test]
        fn approximant_is_periodic(x in -200.0f64..200.0, n in 1usize..12) {
            let spec = PotentialSpec::golden(1.5, 2.0, 0.13, n).unwrap();
            let scale = spec.v1.abs() + spec.v2.abs();
            let shifted = spec.sample(x + spec.length());
            prop_assert!((shifted - spec.sample(x)).abs() < 1e-12 * scale);
        }
    }
}
