//! Mode-amplitude lattices.
//!
//! Expanding the condensate over localized modes,
//! `Psi = exp(-i mu t) sum_j a_j(t) phi_j(x)`, gives a lattice whose sites are
//! energy levels rather than positions. There is no linear hopping: sites
//! only talk through the hopping tensors. [`ReducedLattice`] keeps the pair
//! integrals; [`FullLattice`] keeps every four-index integral on a small mode
//! subset and serves as its oracle.

use std::collections::HashMap;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopping::{overlap4, HoppingTensors};
use crate::ode::Rk4;
use crate::spectrum::SpectrumResult;

/// Largest mode subset accepted by [`FullLattice`].
pub const MAX_FULL_SUBSET: usize = 12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Chemical potential `epsilon_j + N chi_j` of a single populated mode.
pub fn monomer_mu(j: usize, n: f64, spectrum: &SpectrumResult, tensors: &HoppingTensors) -> Result<f64> {
    let mode = spectrum.localized_mode(j)?;
    Ok(mode.energy + n * tensors.chi_diag[j - 1])
}

/// Amplitudes at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub a: Vec<Complex64>,
    pub t: f64,
}

impl LatticeState {
    pub fn new(a: Vec<Complex64>) -> Self {
        Self { a, t: 0.0 }
    }

    /// `sum_j |a_j|^2`.
    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Common interface of the reduced and full mode lattices.
pub trait ModeLattice {
    /// 1-based mode labels of the lattice sites.
    fn labels(&self) -> &[usize];

    /// Writes `da/dt` for amplitudes `a`.
    fn rhs(&self, a: &[Complex64], out: &mut [Complex64]);
}

/// Lattice keeping on-site terms and pair hopping only.
#[derive(Debug, Clone)]
pub struct ReducedLattice {
    labels: Vec<usize>,
    pub mu: f64,
    energies: Vec<f64>,
    chi_diag: Vec<f64>,
    chi_pair: Vec<Vec<f64>>,
    chi_tilde: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
}

impl ReducedLattice {
    /// Lattice on the given 1-based modes. When `tensors` is sparsified the
    /// sums run over its neighbor lists only.
    pub fn new(spectrum: &SpectrumResult, tensors: &HoppingTensors, modes: &[usize], mu: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("empty mode subset".into()));
        }
        let mut energies = Vec::with_capacity(modes.len());
        for &j in modes {
            energies.push(spectrum.localized_mode(j)?.energy);
            if j > tensors.len() {
                return Err(Error::ModeIndex {
                    index: j,
                    count: tensors.len(),
                });
            }
        }
        let idx: Vec<usize> = modes.iter().map(|j| j - 1).collect();
        let pick = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            idx.iter().map(|&r| idx.iter().map(|&c| m[(r, c)]).collect()).collect()
        };
        let position: HashMap<usize, usize> = idx.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let neighbors = idx
            .iter()
            .enumerate()
            .map(|(p, &i)| match &tensors.neighbors {
                Some(lists) => lists[i].iter().filter_map(|k| position.get(k).copied()).collect(),
                None => (0..idx.len()).filter(|&q| q != p).collect(),
            })
            .collect();
        Ok(Self {
            labels: modes.to_vec(),
            mu,
            energies,
            chi_diag: idx.iter().map(|&i| tensors.chi_diag[i]).collect(),
            chi_pair: pick(&tensors.chi_pair),
            chi_tilde: pick(&tensors.chi_tilde),
            neighbors,
        })
    }

    /// Lattice over every localized mode.
    pub fn all_modes(spectrum: &SpectrumResult, tensors: &HoppingTensors, mu: f64) -> Result<Self> {
        let modes: Vec<usize> = (1..=tensors.len()).collect();
        Self::new(spectrum, tensors, &modes, mu)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl ModeLattice for ReducedLattice {
    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn rhs(&self, a: &[Complex64], out: &mut [Complex64]) {
        for j in 0..self.len() {
            let aj = a[j];
            let nj = aj.norm_sqr();
            let mut h = (self.energies[j] - self.mu) * aj + self.chi_diag[j] * nj * aj;
            for &k in &self.neighbors[j] {
                let ak = a[k];
                let nk = ak.norm_sqr();
                h += self.chi_tilde[j][k] * (2.0 * nj * ak + aj * aj * ak.conj())
                    + self.chi_pair[j][k] * (2.0 * nk * aj + ak * ak * aj.conj())
                    + self.chi_tilde[k][j] * nk * ak;
            }
            out[j] = -I * h;
        }
    }
}

/// Lattice with every four-index integral on a small mode subset.
#[derive(Debug, Clone)]
pub struct FullLattice {
    labels: Vec<usize>,
    pub mu: f64,
    energies: Vec<f64>,
    /// `chi[((j1 * s + j2) * s + j3) * s + j4]`.
    chi: Vec<f64>,
}

impl FullLattice {
    pub fn new(spectrum: &SpectrumResult, g: f64, modes: &[usize], mu: f64) -> Result<Self> {
        let s = modes.len();
        if s == 0 {
            return Err(Error::InvalidParameter("empty mode subset".into()));
        }
        if s > MAX_FULL_SUBSET {
            return Err(Error::SubsetTooLarge(s, MAX_FULL_SUBSET));
        }
        let samples = modes
            .iter()
            .map(|&j| spectrum.localized_mode(j).map(|m| &m.samples))
            .collect::<Result<Vec<_>>>()?;
        let energies = modes
            .iter()
            .map(|&j| spectrum.localized_mode(j).map(|m| m.energy))
            .collect::<Result<Vec<_>>>()?;
        // The integral is symmetric under any permutation of its four
        // arguments, so compute each multiset once.
        let mut cache: HashMap<[usize; 4], f64> = HashMap::new();
        let mut chi = vec![0.0; s * s * s * s];
        for j1 in 0..s {
            for j2 in 0..s {
                for j3 in 0..s {
                    for j4 in 0..s {
                        let mut key = [j1, j2, j3, j4];
                        key.sort_unstable();
                        let value = match cache.get(&key) {
                            Some(v) => *v,
                            None => {
                                let v = overlap4(
                                    samples[key[0]],
                                    samples[key[1]],
                                    samples[key[2]],
                                    samples[key[3]],
                                    &spectrum.grid,
                                    g,
                                )?;
                                cache.insert(key, v);
                                v
                            }
                        };
                        chi[((j1 * s + j2) * s + j3) * s + j4] = value;
                    }
                }
            }
        }
        Ok(Self {
            labels: modes.to_vec(),
            mu,
            energies,
            chi,
        })
    }

    /// `chi_{j1 j2; j3 j4}` on subset positions.
    pub fn coefficient(&self, j1: usize, j2: usize, j3: usize, j4: usize) -> f64 {
        let s = self.labels.len();
        self.chi[((j1 * s + j2) * s + j3) * s + j4]
    }
}

impl ModeLattice for FullLattice {
    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn rhs(&self, a: &[Complex64], out: &mut [Complex64]) {
        let s = self.labels.len();
        for j in 0..s {
            let mut h = (self.energies[j] - self.mu) * a[j];
            for j1 in 0..s {
                let c1 = a[j1].conj();
                for j2 in 0..s {
                    for j3 in 0..s {
                        h += self.coefficient(j, j1, j2, j3) * c1 * a[j2] * a[j3];
                    }
                }
            }
            out[j] = -I * h;
        }
    }
}

/// Amplitude history of a lattice run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTrajectory {
    pub labels: Vec<usize>,
    pub times: Vec<f64>,
    pub amplitudes: Vec<Vec<Complex64>>,
}

impl LatticeTrajectory {
    /// CSV with columns `t, re_a<j>, im_a<j>` per mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for j in &self.labels {
            write!(w, ",re_a{j},im_a{j}")?;
        }
        writeln!(w)?;
        for (t, row) in self.times.iter().zip(&self.amplitudes) {
            write!(w, "{t:.16e}")?;
            for a in row {
                write!(w, ",{:.16e},{:.16e}", a.re, a.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Fixed-step RK4 from `state.t` to `state.t + duration`, recording every
/// `stride` steps (and the final state).
pub fn integrate_lattice<L: ModeLattice>(
    lattice: &L,
    state: &LatticeState,
    duration: f64,
    dt: f64,
    stride: usize,
) -> Result<LatticeTrajectory> {
    if !(dt > 0.0) || !(duration >= 0.0) || stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, duration >= 0 and stride >= 1 (dt = {dt}, duration = {duration}, stride = {stride})"
        )));
    }
    if state.a.len() != lattice.labels().len() {
        return Err(Error::InvalidParameter(format!(
            "{} amplitudes for a {}-site lattice",
            state.a.len(),
            lattice.labels().len()
        )));
    }
    let steps = (duration / dt).round() as usize;
    let mut a = state.a.clone();
    let mut rk = Rk4::new(a.len());
    let mut out = LatticeTrajectory {
        labels: lattice.labels().to_vec(),
        times: vec![state.t],
        amplitudes: vec![a.clone()],
    };
    for step in 1..=steps {
        let t = state.t + (step - 1) as f64 * dt;
        rk.step(&mut a, t, dt, |_, y, dy| lattice.rhs(y, dy));
        if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { t: t + dt });
        }
        if step % stride == 0 || step == steps {
            out.times.push(state.t + step as f64 * dt);
            out.amplitudes.push(a.clone());
        }
    }
    Ok(out)
}
