//! Nonlinear hopping integrals between localized modes.
//!
//! Orthogonal eigenmodes have no linear coupling; they talk to each other
//! only through overlap integrals of four modes weighted by the interaction
//! sign `g`. Two families of pair integrals dominate:
//!
//! * `chi_jk = g int phi_j^2 phi_k^2` (symmetric),
//! * `chi~_jk = g int phi_j^3 phi_k` (not symmetric in general),
//!
//! with the diagonal `chi_j = chi_jj = chi~_jj` equal to `g` times the IPR.
//! Integrals with three or four distinct modes are much smaller and are only
//! sampled, never stored.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Grid;
use crate::spectrum::SpectrumResult;

/// Default magnitude below which pair couplings are dropped.
pub const DEFAULT_SPARSE_CUTOFF: f64 = 0.01;

/// `g * int fa fb fc fd dx` by the periodic rectangle rule.
pub fn overlap4(fa: &[f64], fb: &[f64], fc: &[f64], fd: &[f64], grid: &Grid, g: f64) -> Result<f64> {
    for f in [fa, fb, fc, fd] {
        grid.check(f.len())?;
    }
    let sum: f64 = fa
        .iter()
        .zip(fb)
        .zip(fc)
        .zip(fd)
        .map(|(((a, b), c), d)| a * b * c * d)
        .sum();
    Ok(g * sum * grid.dx)
}

/// Pair hopping tensors over the `M` localized modes. Indices are 0-based
/// (mode `j` lives at `j - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingTensors {
    pub g: f64,
    pub chi_diag: Vec<f64>,
    pub chi_pair: DMatrix<f64>,
    /// `chi_tilde[(j, k)] = g int phi_j^3 phi_k`.
    pub chi_tilde: DMatrix<f64>,
    /// Off-diagonal partners per mode once sparsified.
    pub neighbors: Option<Vec<Vec<usize>>>,
    pub sparse_cutoff: Option<f64>,
}

impl HoppingTensors {
    pub fn len(&self) -> usize {
        self.chi_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi_diag.is_empty()
    }

    /// Largest of `|chi_jk|`, `|chi~_jk|`, `|chi~_kj|` (0-based indices).
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.chi_pair[(j, k)]
            .abs()
            .max(self.chi_tilde[(j, k)].abs())
            .max(self.chi_tilde[(k, j)].abs())
    }

    /// Partners of mode `j` ordered by decreasing coupling (0-based).
    pub fn ranked_partners(&self, j: usize) -> Vec<(usize, f64)> {
        let mut partners: Vec<(usize, f64)> = (0..self.len())
            .filter(|&k| k != j)
            .map(|k| (k, self.coupling(j, k)))
            .collect();
        partners.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        partners
    }

    /// Copy with couplings below `cutoff` zeroed and neighbor lists filled.
    pub fn sparsify(&self, cutoff: f64) -> Result<Self> {
        if !(cutoff >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsification cutoff must be non-negative, got {cutoff}"
            )));
        }
        let m = self.len();
        let mut out = self.clone();
        let mut neighbors = vec![Vec::new(); m];
        for (j, row) in neighbors.iter_mut().enumerate() {
            for k in 0..m {
                if j == k {
                    continue;
                }
                if self.coupling(j, k) >= cutoff {
                    row.push(k);
                } else {
                    out.chi_pair[(j, k)] = 0.0;
                    out.chi_tilde[(j, k)] = 0.0;
                }
            }
        }
        out.neighbors = Some(neighbors);
        out.sparse_cutoff = Some(cutoff);
        Ok(out)
    }
}

/// Fills `chi_j`, `chi_jk` and `chi~_jk` for every pair of localized modes.
pub fn build_pair_tensors(spectrum: &SpectrumResult, g: f64) -> Result<HoppingTensors> {
    let modes = spectrum.localized();
    let m = modes.len();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "no localized modes to build hopping tensors from".into(),
        ));
    }
    let grid = &spectrum.grid;
    let squares: Vec<Vec<f64>> = modes.iter().map(|f| f.samples.iter().map(|v| v * v).collect()).collect();
    let cubes: Vec<Vec<f64>> = modes
        .iter()
        .zip(&squares)
        .map(|(f, sq)| f.samples.iter().zip(sq).map(|(v, s)| v * s).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 { g * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.dx };

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let pair = (0..m).map(|k| if k >= j { dot(&squares[j], &squares[k]) } else { 0.0 }).collect();
            let tilde = (0..m).map(|k| dot(&cubes[j], &modes[k].samples)).collect();
            (pair, tilde)
        })
        .collect();

    let mut chi_pair = DMatrix::zeros(m, m);
    let mut chi_tilde = DMatrix::zeros(m, m);
    for (j, (pair, tilde)) in rows.iter().enumerate() {
        for k in 0..m {
            chi_tilde[(j, k)] = tilde[k];
            if k >= j {
                chi_pair[(j, k)] = pair[k];
                chi_pair[(k, j)] = pair[k];
            }
        }
    }
    let chi_diag: Vec<f64> = (0..m).map(|j| chi_pair[(j, j)]).collect();
    for (j, &d) in chi_diag.iter().enumerate() {
        chi_tilde[(j, j)] = d;
    }
    Ok(HoppingTensors {
        g,
        chi_diag,
        chi_pair,
        chi_tilde,
        neighbors: None,
        sparse_cutoff: None,
    })
}

/// Both sides of `(int phi_j^2 phi_k^2)^2 <= int|phi_j^3 phi_k| int|phi_j phi_k^3|`.
pub fn pair_inequality(spectrum: &SpectrumResult, j: usize, k: usize) -> Result<(f64, f64)> {
    let a = &spectrum.localized_mode(j)?.samples;
    let b = &spectrum.localized_mode(k)?.samples;
    let grid = &spectrum.grid;
    let lhs = grid.integrate(a.iter().zip(b).map(|(x, y)| x * x * y * y)).powi(2);
    let left = grid.integrate(a.iter().zip(b).map(|(x, y)| (x.powi(3) * y).abs()));
    let right = grid.integrate(a.iter().zip(b).map(|(x, y)| (x * y.powi(3)).abs()));
    Ok((lhs, left * right))
}

/// Largest sampled four-mode integral with at least three distinct indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeglectedTerms {
    pub samples: usize,
    pub max_abs: f64,
    /// 1-based mode labels of the largest sample.
    pub argmax: [usize; 4],
    /// Smallest `|chi_j|` for scale.
    pub min_diagonal: f64,
}

/// Samples `count` random quadruples with three or more distinct modes.
pub fn sample_neglected_terms(spectrum: &SpectrumResult, g: f64, count: usize, seed: u64) -> Result<NeglectedTerms> {
    let modes = spectrum.localized();
    let m = modes.len();
    if m < 3 {
        return Err(Error::InvalidParameter(
            "at least three localized modes are needed".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quads = Vec::with_capacity(count);
    while quads.len() < count {
        let q: [usize; 4] = std::array::from_fn(|_| rng.random_range(0..m));
        let mut sorted = q;
        sorted.sort_unstable();
        let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
        if distinct >= 3 {
            quads.push(q);
        }
    }
    let values = quads
        .par_iter()
        .map(|q| {
            overlap4(
                &modes[q[0]].samples,
                &modes[q[1]].samples,
                &modes[q[2]].samples,
                &modes[q[3]].samples,
                &spectrum.grid,
                g,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let (best, max_abs) = values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let min_diagonal = modes.iter().map(|f| f.ipr).fold(f64::INFINITY, f64::min) * g.abs();
    Ok(NeglectedTerms {
        samples: count,
        max_abs,
        argmax: quads[best].map(|i| i + 1),
        min_diagonal,
    })
}
