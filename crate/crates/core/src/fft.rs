use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::potential::Grid;

/// Forward/inverse transform pair for one grid size.
///
/// `inverse` divides by the length, so `inverse(forward(f)) == f`.
#[derive(Clone)]
pub(crate) struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            wavenumbers: grid.wavenumbers(),
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform without the `1/n` factor.
    pub fn inverse_unscaled(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Spectral first derivative.
    pub fn derivative(&mut self, f: &[Complex64]) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        let n = buf.len();
        for (i, (v, &k)) in buf.iter_mut().zip(&self.wavenumbers).enumerate() {
            // The Nyquist component has no well-defined sign.
            *v = if n.is_multiple_of(2) && i == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                *v * Complex64::new(0.0, k)
            };
        }
        self.inverse(&mut buf);
        buf
    }

    /// Applies `-(1/2) d^2/dx^2` spectrally.
    pub fn kinetic(&mut self, f: &[Complex64]) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        for (v, &k) in buf.iter_mut().zip(&self.wavenumbers) {
            *v *= 0.5 * k * k;
        }
        self.inverse(&mut buf);
        buf
    }
}
