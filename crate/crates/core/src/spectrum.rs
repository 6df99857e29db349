//! Linear eigenmodes of the approximant, localization and the mobility edge.
//!
//! The Hamiltonian `-(1/2) d^2/dx^2 + V(x)` is discretized in the plane-wave
//! basis `exp(i 2 pi m x / L) / sqrt(L)`, `|m| <= m_max`. The two cosines only
//! couple wavenumbers that differ by `q` (first lattice) or `p` (second
//! lattice), so the matrix is sparse, but at the sizes used here a dense
//! Hermitian solve is cheap. Eigenvectors are synthesized onto the grid,
//! rotated to real functions, and classified by their inverse participation
//! ratio (IPR).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::potential::{Grid, PotentialSpec};

/// Extra wavenumber kept above `sqrt(2 E)` for the highest requested energy.
pub const CUTOFF_MARGIN: f64 = 2.0;

/// Imaginary residual above which a mode is treated as part of a degenerate
/// multiplet and cannot be made real.
pub const DEGENERACY_RESIDUAL: f64 = 1e-6;

/// Fraction of the period, measured from the center, outside which mass
/// counts as touching the boundary.
const BOUNDARY_FRACTION: f64 = 0.45;
const MAX_BOUNDARY_MASS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSettings {
    /// Largest kept wavenumber `k = 2 pi m / L`.
    pub cutoff: f64,
    /// Highest energy the basis must represent faithfully.
    pub target_energy: f64,
}

impl Default for BasisSettings {
    fn default() -> Self {
        Self {
            cutoff: 20.0,
            target_energy: 2.5,
        }
    }
}

impl BasisSettings {
    pub fn minimum_cutoff(&self) -> f64 {
        (2.0 * self.target_energy.max(0.0)).sqrt() + CUTOFF_MARGIN
    }
}

/// Dense plane-wave Hamiltonian. Row/column `i` holds wavenumber index
/// `m = i - m_max`.
#[derive(Debug, Clone)]
pub struct PlaneWaveHamiltonian {
    pub m_max: usize,
    pub length: f64,
    pub matrix: DMatrix<Complex64>,
}

impl PlaneWaveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Matrix element `<m_row | H | m_col>`.
    pub fn entry(&self, m_row: i64, m_col: i64) -> Complex64 {
        let shift = self.m_max as i64;
        self.matrix[((m_row + shift) as usize, (m_col + shift) as usize)]
    }
}

pub fn build_hamiltonian(spec: &PotentialSpec, basis: &BasisSettings) -> Result<PlaneWaveHamiltonian> {
    let minimum = basis.minimum_cutoff();
    if !(basis.cutoff >= minimum) {
        return Err(Error::CutoffTooLow {
            cutoff: basis.cutoff,
            target: basis.target_energy,
            minimum,
        });
    }
    let length = spec.length();
    // ceil(cutoff L / 2 pi) = ceil(cutoff q / 2), guarded against round-up of exact products.
    let m_max = (basis.cutoff * spec.q as f64 / 2.0 - 1e-9).ceil() as usize;
    let dim = 2 * m_max + 1;
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    let base = 2.0 * PI / length;
    for i in 0..dim {
        let k = base * (i as f64 - m_max as f64);
        matrix[(i, i)] = Complex64::new(0.5 * k * k, 0.0);
    }
    let couplings = [
        (spec.q as usize, Complex64::new(0.5 * spec.v1, 0.0)),
        (spec.p as usize, Complex64::from_polar(0.5 * spec.v2, spec.theta)),
    ];
    for (offset, c) in couplings {
        for col in 0..dim.saturating_sub(offset) {
            matrix[(col + offset, col)] += c;
            matrix[(col, col + offset)] += c.conj();
        }
    }
    Ok(PlaneWaveHamiltonian { m_max, length, matrix })
}

/// Lowest eigenpairs of a plane-wave Hamiltonian, energies ascending.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub energies: Vec<f64>,
    /// Column `j` is the eigenvector of `energies[j]`.
    pub vectors: DMatrix<Complex64>,
    /// `||H v - e v||_2` per pair.
    pub residuals: Vec<f64>,
    pub operator_norm: f64,
}

pub fn solve_modes(h: &PlaneWaveHamiltonian, count: usize) -> Result<Eigenpairs> {
    let dim = h.dim();
    if count == 0 || count > dim {
        return Err(Error::InvalidParameter(format!(
            "requested {count} eigenpairs from a {dim}-dimensional basis"
        )));
    }
    let (values, vectors) = match real_form(h) {
        Some(real) => {
            let (values, real_vectors) = symmetric_eigen(real, dim)?;
            (values, from_real_basis(&real_vectors, h.m_max))
        }
        None => symmetric_eigen(h.matrix.clone(), dim)?,
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let operator_norm = values.iter().fold(0.0f64, |m, e| m.max(e.abs()));

    let selected = &order[..count];
    let energies: Vec<f64> = selected.iter().map(|&i| values[i]).collect();
    let vectors = DMatrix::from_columns(
        &selected
            .iter()
            .map(|&i| vectors.column(i).into_owned())
            .collect::<Vec<DVector<Complex64>>>(),
    );
    let residuals = (0..count)
        .map(|j| {
            let v = vectors.column(j);
            let r = &h.matrix * v - v * Complex64::new(energies[j], 0.0);
            r.norm()
        })
        .collect();
    Ok(Eigenpairs {
        energies,
        vectors,
        residuals,
        operator_norm,
    })
}

fn symmetric_eigen<T>(matrix: DMatrix<T>, dim: usize) -> Result<(Vec<f64>, DMatrix<Complex64>)>
where
    T: nalgebra::ComplexField<RealField = f64> + Into<Complex64>,
{
    let max_iterations = 200 * dim;
    let eigen = SymmetricEigen::try_new(matrix, f64::EPSILON, max_iterations).ok_or_else(|| {
        Error::Eigensolver(format!(
            "no convergence within {max_iterations} QR sweeps on a {dim}x{dim} Hermitian matrix"
        ))
    })?;
    let vectors = eigen.eigenvectors.map(|v| v.into());
    Ok((eigen.eigenvalues.iter().copied().collect(), vectors))
}

// Real basis: index 0 is m = 0; 2m - 1 and 2m hold (e_m + e_-m)/sqrt 2 and
// i (e_m - e_-m)/sqrt 2, both real functions.
fn real_basis_column(b: usize, m_max: usize) -> [(usize, Complex64); 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    if b == 0 {
        return [(m_max, Complex64::new(1.0, 0.0)), (m_max, Complex64::new(0.0, 0.0))];
    }
    let m = b.div_ceil(2);
    if b % 2 == 1 {
        [(m_max + m, Complex64::new(h, 0.0)), (m_max - m, Complex64::new(h, 0.0))]
    } else {
        [(m_max + m, Complex64::new(0.0, h)), (m_max - m, Complex64::new(0.0, -h))]
    }
}

/// `U^dagger H U` in the real basis, when `H` maps real functions to real
/// functions (`H_{m', m} = conj(H_{-m', -m})`).
fn real_form(h: &PlaneWaveHamiltonian) -> Option<DMatrix<f64>> {
    let dim = h.dim();
    let scale = h.matrix.norm().max(1.0);
    for i in 0..dim {
        for j in 0..dim {
            let mirrored = h.matrix[(dim - 1 - i, dim - 1 - j)].conj();
            if (h.matrix[(i, j)] - mirrored).norm() > 1e-14 * scale {
                return None;
            }
        }
    }
    let columns: Vec<_> = (0..dim).map(|b| real_basis_column(b, h.m_max)).collect();
    let mut hu = DMatrix::<Complex64>::zeros(dim, dim);
    for (b, col) in columns.iter().enumerate() {
        for &(idx, w) in col {
            if w.norm_sqr() > 0.0 {
                for i in 0..dim {
                    hu[(i, b)] += h.matrix[(i, idx)] * w;
                }
            }
        }
    }
    let mut real = DMatrix::<f64>::zeros(dim, dim);
    for (a, col) in columns.iter().enumerate() {
        for b in 0..dim {
            let mut s = Complex64::new(0.0, 0.0);
            for &(idx, w) in col {
                s += w.conj() * hu[(idx, b)];
            }
            if s.im.abs() > 1e-12 * scale {
                return None;
            }
            real[(a, b)] = s.re;
        }
    }
    // Exact symmetry for the solver.
    let sym = (&real + real.transpose()) * 0.5;
    Some(sym)
}

fn from_real_basis(vectors: &DMatrix<Complex64>, m_max: usize) -> DMatrix<Complex64> {
    let dim = vectors.nrows();
    let mut out = DMatrix::<Complex64>::zeros(dim, vectors.ncols());
    for b in 0..dim {
        for &(idx, w) in &real_basis_column(b, m_max) {
            if w.norm_sqr() > 0.0 {
                for c in 0..vectors.ncols() {
                    out[(idx, c)] += w * vectors[(b, c)];
                }
            }
        }
    }
    out
}

/// Complex Hermitian solve without the real-basis reduction; used to
/// cross-check [`solve_modes`].
pub fn solve_modes_complex(h: &PlaneWaveHamiltonian, count: usize) -> Result<Vec<f64>> {
    let dim = h.dim();
    let (mut values, _) = symmetric_eigen(h.matrix.clone(), dim)?;
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    Ok(values)
}

/// Evaluates `sum_m c_m exp(i 2 pi m x / L) / sqrt(L)` on every grid node.
pub fn synthesize(coefficients: &[Complex64], m_max: usize, grid: &Grid) -> Result<Vec<Complex64>> {
    if coefficients.len() != 2 * m_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for m_max = {m_max}",
            coefficients.len()
        )));
    }
    if grid.points <= 2 * m_max + 1 {
        return Err(Error::UnderResolvedGrid {
            points: grid.points,
            required: (2 * m_max + 2).next_power_of_two(),
        });
    }
    let n = grid.points;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &c) in coefficients.iter().enumerate() {
        let m = i as i64 - m_max as i64;
        // exp(i 2 pi m x_0 / L) = (-1)^m with x_0 = -L/2.
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[m.rem_euclid(n as i64) as usize] = c * sign;
    }
    let mut spectral = Spectral::new(grid);
    spectral.inverse(&mut buf);
    let scale = n as f64 / grid.length.sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}

/// A mode rotated onto the real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Realified {
    pub samples: Vec<f64>,
    /// `sqrt(int Im(e^{i alpha} phi)^2 dx)` at the optimal phase.
    pub imag_residual: f64,
    pub degenerate: bool,
}

/// Removes the global phase of an eigenfunction of a real operator.
///
/// The phase `alpha = -arg(int phi^2 dx) / 2` minimizes the imaginary part.
/// The real part is renormalized and its sign fixed so the sample with the
/// largest magnitude is positive.
pub fn realify(samples: &[Complex64], grid: &Grid) -> Result<Realified> {
    grid.check(samples.len())?;
    let square: Complex64 = samples.iter().map(|v| v * v).sum::<Complex64>() * grid.dx;
    let rotation = Complex64::from_polar(1.0, -0.5 * square.arg());
    let rotated: Vec<Complex64> = samples.iter().map(|v| v * rotation).collect();
    let imag_residual = grid.integrate(rotated.iter().map(|v| v.im * v.im)).sqrt();

    let mut real: Vec<f64> = rotated.iter().map(|v| v.re).collect();
    let norm = grid.integrate(real.iter().map(|v| v * v)).sqrt();
    if norm > 0.0 {
        real.iter_mut().for_each(|v| *v /= norm);
    }
    let peak = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if real.get(peak).is_some_and(|v| *v < 0.0) {
        real.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(Realified {
        samples: real,
        imag_residual,
        degenerate: imag_residual >= DEGENERACY_RESIDUAL,
    })
}

pub fn inverse_participation_ratio(samples: &[f64], grid: &Grid) -> f64 {
    grid.integrate(samples.iter().map(|v| v.powi(4)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterOfMass {
    pub x: f64,
    /// Mass with `|x| > 0.45 L`.
    pub boundary_mass: f64,
    /// False when the mode leaks onto the periodic boundary, where the
    /// center of mass on one period is ill-defined.
    pub reliable: bool,
}

pub fn center_of_mass(samples: &[f64], grid: &Grid) -> Result<CenterOfMass> {
    grid.check(samples.len())?;
    let edge = BOUNDARY_FRACTION * grid.length;
    let mut x_mass = 0.0;
    let mut boundary = 0.0;
    for (x, v) in grid.coords().zip(samples) {
        let rho = v * v;
        x_mass += x * rho;
        if x.abs() > edge {
            boundary += rho;
        }
    }
    let boundary_mass = boundary * grid.dx;
    Ok(CenterOfMass {
        x: x_mass * grid.dx,
        boundary_mass,
        reliable: boundary_mass < MAX_BOUNDARY_MASS,
    })
}

/// One eigenmode sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    /// 1-based rank in energy.
    pub index: usize,
    pub energy: f64,
    pub samples: Vec<f64>,
    pub ipr: f64,
    pub com: CenterOfMass,
    pub imag_residual: f64,
    pub localized: bool,
}

/// Energy-ordered modes with the localized prefix identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub spec: PotentialSpec,
    pub grid: Grid,
    pub ipr_threshold: f64,
    pub modes: Vec<EigenMode>,
    /// Number of localized modes `M`.
    pub localized_count: usize,
    /// `epsilon_M`, absent when nothing is localized.
    pub mobility_edge: Option<f64>,
    /// `epsilon_{M+1}`, absent when every computed mode is localized.
    pub first_extended_energy: Option<f64>,
    pub extended_coupling_estimate: f64,
}

impl SpectrumResult {
    /// Mode `j`, 1-based.
    pub fn mode(&self, j: usize) -> Result<&EigenMode> {
        if j == 0 || j > self.modes.len() {
            return Err(Error::ModeIndex {
                index: j,
                count: self.modes.len(),
            });
        }
        Ok(&self.modes[j - 1])
    }

    /// Localized mode `j`, 1-based.
    pub fn localized_mode(&self, j: usize) -> Result<&EigenMode> {
        if j == 0 || j > self.localized_count {
            return Err(Error::ModeIndex {
                index: j,
                count: self.localized_count,
            });
        }
        Ok(&self.modes[j - 1])
    }

    pub fn localized(&self) -> &[EigenMode] {
        &self.modes[..self.localized_count]
    }

    pub fn energies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.energy).collect()
    }
}

/// Marks modes with `ipr >= threshold` as localized and locates the
/// mobility edge. Localized modes must be exactly the lowest `M`.
pub fn classify(
    mut modes: Vec<EigenMode>,
    ipr_threshold: f64,
    spec: &PotentialSpec,
    grid: &Grid,
) -> Result<SpectrumResult> {
    if !(ipr_threshold > 0.0 && ipr_threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "IPR threshold must be positive, got {ipr_threshold}"
        )));
    }
    if modes.windows(2).any(|w| w[1].energy < w[0].energy) {
        return Err(Error::InvalidParameter("modes are not energy-sorted".into()));
    }
    for mode in &mut modes {
        mode.localized = mode.ipr >= ipr_threshold;
    }
    let count = modes.iter().take_while(|m| m.localized).count();
    if let Some(stray) = modes[count..].iter().find(|m| m.localized) {
        return Err(Error::NonPrefixLocalization {
            extended: count + 1,
            localized: stray.index,
        });
    }
    let mobility_edge = count.checked_sub(1).map(|i| modes[i].energy);
    let first_extended_energy = modes.get(count).map(|m| m.energy);
    Ok(SpectrumResult {
        spec: *spec,
        grid: *grid,
        ipr_threshold,
        modes,
        localized_count: count,
        mobility_edge,
        first_extended_energy,
        extended_coupling_estimate: extended_coupling_estimate(spec),
    })
}

/// Typical amplitude `1/sqrt(pi q)` of a normalized extended state.
pub fn extended_coupling_estimate(spec: &PotentialSpec) -> f64 {
    1.0 / spec.length().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub basis: BasisSettings,
    pub grid_points: usize,
    /// Number of lowest eigenpairs sampled and classified.
    pub mode_count: usize,
    pub ipr_threshold: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            basis: BasisSettings::default(),
            grid_points: 4096,
            mode_count: 128,
            ipr_threshold: 0.05,
        }
    }
}

/// Builds, solves, samples and classifies the spectrum of `spec`.
pub fn compute_spectrum(spec: &PotentialSpec, settings: &SpectrumSettings) -> Result<SpectrumResult> {
    let grid = Grid::new(spec, settings.grid_points)?;
    let h = build_hamiltonian(spec, &settings.basis)?;
    let count = settings.mode_count.min(h.dim());
    let pairs = solve_modes(&h, count)?;
    let tolerance = 1e-8 * pairs.operator_norm.max(1.0);
    if let Some((j, r)) = pairs.residuals.iter().enumerate().find(|(_, r)| **r > tolerance) {
        return Err(Error::Eigensolver(format!(
            "residual {r:e} of pair {} exceeds {tolerance:e}",
            j + 1
        )));
    }

    let modes = (0..count)
        .into_par_iter()
        .map(|j| {
            let coefficients: Vec<Complex64> = pairs.vectors.column(j).iter().copied().collect();
            let complex = synthesize(&coefficients, h.m_max, &grid)?;
            let real = realify(&complex, &grid)?;
            let ipr = if real.degenerate {
                grid.integrate(complex.iter().map(|v| v.norm_sqr().powi(2)))
            } else {
                inverse_participation_ratio(&real.samples, &grid)
            };
            let com = center_of_mass(&real.samples, &grid)?;
            Ok(EigenMode {
                index: j + 1,
                energy: pairs.energies[j],
                samples: real.samples,
                ipr,
                com,
                imag_residual: real.imag_residual,
                localized: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    classify(modes, settings.ipr_threshold, spec, &grid)
}

/// `||H phi - e phi||_2 / ||phi||_2` with `H` applied on the grid
/// (spectral kinetic term, pointwise potential).
pub fn grid_residual(spec: &PotentialSpec, grid: &Grid, samples: &[f64], energy: f64) -> Result<f64> {
    grid.check(samples.len())?;
    let complex: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut spectral = Spectral::new(grid);
    let kinetic = spectral.kinetic(&complex);
    let potential = spec.sample_grid(grid);
    let mut residual = 0.0;
    let mut norm = 0.0;
    for i in 0..grid.points {
        let h_phi = kinetic[i] + potential[i] * complex[i];
        residual += (h_phi - energy * complex[i]).norm_sqr();
        norm += samples[i] * samples[i];
    }
    Ok((residual / norm).sqrt())
}
