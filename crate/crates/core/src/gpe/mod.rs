//! Split-step evolution of the one-dimensional Gross-Pitaevskii equation
//!
//! ```text
//! i dPsi/dt = -(1/2) Psi_xx + V(x) Psi + g |Psi|^2 Psi
//! ```
//!
//! on the periodic grid of the spectral solver. Two-mode initial data,
//! seeded noise, diagnostics and the on-disk formats live here too.

mod io;
mod period;
mod record;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::potential::{Grid, PotentialSpec};

pub use io::{read_snapshot, snapshot_paths, write_snapshot, SnapshotHeader};
pub use period::{oscillation_period, Period};
pub use record::{evolve, Observation, Probe, ProbeSettings, RecordSettings, Snapshot, TrajectoryRecord, TwoModeRun};

/// Largest overlap or norm defect tolerated in two-mode initial data.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

/// Condensate wave function at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpeField {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl GpeField {
    pub fn new(grid: Grid, psi: Vec<Complex64>) -> Result<Self> {
        grid.check(psi.len())?;
        Ok(Self { grid, psi, t: 0.0 })
    }

    /// `int |Psi|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.grid.integrate(self.psi.iter().map(|v| v.norm_sqr()))
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn peak_density(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// `<f, Psi>` for a real mode `f`.
    pub fn overlap(&self, f: &[f64]) -> Complex64 {
        self.psi.iter().zip(f).map(|(p, f)| p * f).sum::<Complex64>() * self.grid.dx
    }

    fn rescale_to(&mut self, n: f64) {
        let scale = (n / self.norm()).sqrt();
        self.psi.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `sqrt(N (1 + z0) / 2) phi_j + exp(i phi0) sqrt(N (1 - z0) / 2) phi_k`.
pub fn init_two_mode(n: f64, z0: f64, phi0: f64, fj: &[f64], fk: &[f64], grid: &Grid) -> Result<GpeField> {
    grid.check(fj.len())?;
    grid.check(fk.len())?;
    if !(n > 0.0) || !(z0.abs() <= 1.0) || !phi0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need N > 0, |z0| <= 1 and finite phi0 (N = {n}, z0 = {z0}, phi0 = {phi0})"
        )));
    }
    let overlap = grid.integrate(fj.iter().zip(fk).map(|(a, b)| a * b));
    let nj = grid.integrate(fj.iter().map(|a| a * a));
    let nk = grid.integrate(fk.iter().map(|a| a * a));
    let defect = overlap.abs().max((nj - 1.0).abs()).max((nk - 1.0).abs());
    if defect > ORTHONORMALITY_TOLERANCE {
        return Err(Error::NotOrthonormal(defect));
    }
    let cj = (0.5 * n * (1.0 + z0)).sqrt();
    let ck = Complex64::from_polar((0.5 * n * (1.0 - z0)).sqrt(), phi0);
    let psi = fj.iter().zip(fk).map(|(a, b)| cj * a + ck * b).collect();
    GpeField::new(*grid, psi)
}

/// Adds complex Gaussian noise `fraction |Psi(x)| eta(x)` with
/// `E|eta|^2 = 1` independently at every node, then restores the norm.
pub fn add_noise(field: &mut GpeField, fraction: f64, seed: u64) -> Result<()> {
    if !(fraction >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction must be non-negative, got {fraction}"
        )));
    }
    if fraction == 0.0 {
        return Ok(());
    }
    let n = field.norm();
    let normal = Normal::new(0.0, fraction / 2f64.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in field.psi.iter_mut() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *v += v.norm() * Complex64::new(re, im);
    }
    field.rescale_to(n);
    Ok(())
}

/// Strang split-step integrator for a fixed potential, `g` and `dt`.
#[derive(Clone)]
pub struct GpeSolver {
    pub grid: Grid,
    pub g: f64,
    pub dt: f64,
    potential: Vec<f64>,
    /// `exp(-i k^2 dt / 2) / n`, folding in the inverse-transform scale.
    kinetic_phase: Vec<Complex64>,
    spectral: Spectral,
}

impl std::fmt::Debug for GpeSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpeSolver")
            .field("grid", &self.grid)
            .field("g", &self.g)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

impl GpeSolver {
    pub fn new(spec: &PotentialSpec, grid: Grid, g: f64, dt: f64) -> Result<Self> {
        Self::with_potential(grid, spec.sample_grid(&grid), g, dt)
    }

    pub fn with_potential(grid: Grid, potential: Vec<f64>, g: f64, dt: f64) -> Result<Self> {
        grid.check(potential.len())?;
        if !(dt > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter(format!("need dt > 0 and finite g (dt = {dt}, g = {g})")));
        }
        let spectral = Spectral::new(&grid);
        let scale = 1.0 / grid.points as f64;
        let kinetic_phase = spectral
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(scale, -0.5 * k * k * dt))
            .collect();
        Ok(Self {
            grid,
            g,
            dt,
            potential,
            kinetic_phase,
            spectral,
        })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn local(&self, psi: &mut [Complex64], tau: f64) {
        for (v, pot) in psi.iter_mut().zip(&self.potential) {
            let phase = -(pot + self.g * v.norm_sqr()) * tau;
            *v *= Complex64::from_polar(1.0, phase);
        }
    }

    fn kinetic(&mut self, psi: &mut [Complex64]) {
        self.spectral.forward(psi);
        for (v, p) in psi.iter_mut().zip(&self.kinetic_phase) {
            *v *= p;
        }
        self.spectral.inverse_unscaled(psi);
    }

    /// One Strang step: half local phase, full kinetic, half local phase.
    pub fn step(&mut self, field: &mut GpeField) -> Result<()> {
        self.advance(field, 1)
    }

    /// `steps` Strang steps. The local phase preserves `|Psi|`, so the
    /// trailing and leading half steps of neighbours merge into one.
    pub fn advance(&mut self, field: &mut GpeField, steps: usize) -> Result<()> {
        self.grid.check(field.psi.len())?;
        if steps == 0 {
            return Ok(());
        }
        let dt = self.dt;
        self.local(&mut field.psi, 0.5 * dt);
        for s in 0..steps {
            self.kinetic(&mut field.psi);
            self.local(&mut field.psi, if s + 1 == steps { 0.5 * dt } else { dt });
        }
        field.t += steps as f64 * dt;
        if !field.psi.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { t: field.t });
        }
        Ok(())
    }

    /// `int (|Psi_x|^2 / 2 + V |Psi|^2 + g |Psi|^4 / 2) dx`.
    pub fn energy(&mut self, field: &GpeField) -> f64 {
        let mut buf = field.psi.clone();
        self.spectral.forward(&mut buf);
        let n = buf.len() as f64;
        let kinetic: f64 = buf
            .iter()
            .zip(self.spectral.wavenumbers())
            .map(|(v, k)| 0.5 * k * k * v.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
            / n;
        let local: f64 = field
            .psi
            .iter()
            .zip(&self.potential)
            .map(|(v, pot)| {
                let rho = v.norm_sqr();
                pot * rho + 0.5 * self.g * rho * rho
            })
            .sum::<f64>()
            * self.grid.dx;
        kinetic + local
    }

    /// Superfluid current `J = Im(Psi^* Psi_x)`.
    pub fn current_density(&mut self, field: &GpeField) -> Vec<f64> {
        let dpsi = self.spectral.derivative(&field.psi);
        field.psi.iter().zip(&dpsi).map(|(p, d)| (p.conj() * d).im).collect()
    }

    /// Spectral `dJ/dx`, for continuity checks.
    pub fn current_divergence(&mut self, current: &[f64]) -> Vec<f64> {
        let as_complex: Vec<Complex64> = current.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.spectral.derivative(&as_complex).iter().map(|v| v.re).collect()
    }
}

/// Standalone `J = Im(Psi^* Psi_x)`.
pub fn current_density(field: &GpeField) -> Vec<f64> {
    let mut spectral = Spectral::new(&field.grid);
    let dpsi = spectral.derivative(&field.psi);
    field.psi.iter().zip(&dpsi).map(|(p, d)| (p.conj() * d).im).collect()
}
