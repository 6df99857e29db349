use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed::{bisect, classify_point, FixedPointKind};
use super::{jacobian, DimerCouplings, DimerParams, DimerState};
use crate::error::{Error, Result};

/// `|f_k - f_j|` below which `N(z)` is reported as divergent.
const DIVERGENCE_GAP: f64 = 1e-12;

/// Two-mode stationary state at a given imbalance and relative sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stationary {
    Physical { n: f64, mu: f64 },
    /// `N(z)` has a pole here.
    Divergent,
    /// The stationarity conditions need `N <= 0`.
    NonPhysical { n: f64 },
}

impl Stationary {
    pub fn atoms(&self) -> Option<f64> {
        match self {
            Stationary::Physical { n, .. } => Some(*n),
            _ => None,
        }
    }
}

/// Per-atom nonlinear shifts `(f_j, f_k)` of the two stationarity
/// conditions `mu = eps_j + N f_j = eps_k + N f_k`.
fn shifts(z: f64, sigma: f64, c: &DimerCouplings) -> (f64, f64) {
    let root = (1.0 - z * z).sqrt();
    let fj = c.chi_j * (1.0 + z) / 2.0
        + 1.5 * c.chit_jk * sigma * root
        + 1.5 * c.chi_jk * (1.0 - z)
        + c.chit_kj * sigma * (1.0 - z) / 2.0 * ((1.0 - z) / (1.0 + z)).sqrt();
    let fk = c.chi_k * (1.0 - z) / 2.0
        + 1.5 * c.chit_kj * sigma * root
        + 1.5 * c.chi_jk * (1.0 + z)
        + c.chit_jk * sigma * (1.0 + z) / 2.0 * ((1.0 + z) / (1.0 - z)).sqrt();
    (fj, fk)
}

fn check_sigma(sigma: i8) -> Result<f64> {
    match sigma {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidParameter(format!("sigma must be +1 or -1, got {sigma}"))),
    }
}

/// Atom number and chemical potential of the real stationary state
/// `a_j = sqrt(N (1 + z) / 2)`, `a_k = sigma sqrt(N (1 - z) / 2)`.
pub fn stationary_two_mode(z: f64, sigma: i8, c: &DimerCouplings) -> Result<Stationary> {
    let s = check_sigma(sigma)?;
    if !(z.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "imbalance must satisfy |z| < 1, got {z}"
        )));
    }
    let (fj, fk) = shifts(z, s, c);
    let gap = fk - fj;
    if gap.abs() < DIVERGENCE_GAP {
        return Ok(Stationary::Divergent);
    }
    let n = (c.eps_j - c.eps_k) / gap;
    if n > 0.0 {
        Ok(Stationary::Physical {
            n,
            mu: c.eps_j + n * fj,
        })
    } else {
        Ok(Stationary::NonPhysical { n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    /// Reaches `N = 0` at `|z| = 1`, i.e. grows out of a linear mode.
    LinearLimit,
    /// Bounded by poles of `N(z)` on both sides; exists only above `N_th`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySample {
    pub z: f64,
    pub n: f64,
    pub mu: f64,
    pub kind: FixedPointKind,
    /// `d(dz/dtau)/dphi` at the sample. Its sign decides which way the
    /// slope of `N(z)` maps onto stability.
    pub stiffness: f64,
}

impl FamilySample {
    pub fn stable(&self) -> bool {
        self.kind == FixedPointKind::Center
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBranch {
    pub sigma: i8,
    pub kind: BranchKind,
    /// 1-based labels of the linear modes the branch emanates from.
    pub attached: Vec<usize>,
    pub samples: Vec<FamilySample>,
    /// Saddle-node minimum of `N` on an upper branch.
    pub n_th: Option<f64>,
    pub z_th: Option<f64>,
}

impl FamilyBranch {
    /// Checks the slope rule "stable where `g dN/dz > 0`" (for
    /// `eps_j < eps_k`) on interior samples with positive stiffness, and
    /// returns `(checked, violations)`.
    ///
    /// At a fixed point on `phi = 0, pi` the Jacobian determinant is
    /// `-stiffness * d(dphi/dtau)/dz`, so stability follows the sign of
    /// `stiffness * (eps_k - eps_j) * g * dN/dz`. Where the stiffness turns
    /// negative the rule flips; those samples are not counted. Samples
    /// straddling the saddle-node are skipped as well.
    pub fn slope_rule(&self, g: f64) -> (usize, usize) {
        let s = &self.samples;
        let (mut checked, mut bad) = (0, 0);
        for i in 1..s.len().saturating_sub(1) {
            if s[i].stiffness <= 0.0 {
                continue;
            }
            if let Some(zt) = self.z_th {
                if (s[i - 1].z - zt) * (s[i + 1].z - zt) <= 0.0 {
                    continue;
                }
            }
            let slope = (s[i + 1].n - s[i - 1].n) / (s[i + 1].z - s[i - 1].z);
            checked += 1;
            if (g * slope > 0.0) != s[i].stable() {
                bad += 1;
            }
        }
        (checked, bad)
    }
}

/// Stationary families of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Families {
    pub couplings: DimerCouplings,
    pub branches: Vec<FamilyBranch>,
    /// `(sigma, z)` of every pole of `N(z)`.
    pub asymptotes: Vec<(i8, f64)>,
}

impl Families {
    /// Smallest saddle-node atom number over all upper branches.
    pub fn threshold(&self) -> Option<f64> {
        self.branches.iter().filter_map(|b| b.n_th).min_by(f64::total_cmp)
    }

    /// CSV with columns `sigma, z, N, mu, stable, branch, kind`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "sigma,z,N,mu,stable,branch,kind")?;
        for (b, branch) in self.branches.iter().enumerate() {
            let kind = match branch.kind {
                BranchKind::LinearLimit => "linear-limit",
                BranchKind::Upper => "upper",
            };
            for s in &branch.samples {
                writeln!(
                    w,
                    "{},{:.16e},{:.16e},{:.16e},{},{},{}",
                    branch.sigma,
                    s.z,
                    s.n,
                    s.mu,
                    u8::from(s.stable()),
                    b,
                    kind
                )?;
            }
        }
        Ok(())
    }
}

/// Golden-section minimum of a unimodal `f` on `[a, b]`.
fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let z = 0.5 * (a + b);
    (z, f(z))
}

/// Sweeps `z` over `resolution` points in `(-1, 1)` for each `sigma` and
/// splits the physical samples into branches.
pub fn trace_families(c: &DimerCouplings, sigmas: &[i8], resolution: usize) -> Result<Families> {
    c.check()?;
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "family sweep needs at least 8 points, got {resolution}"
        )));
    }
    let edge = 1e-9;
    let zs: Vec<f64> = (0..resolution)
        .map(|i| -1.0 + edge + (2.0 - 2.0 * edge) * i as f64 / (resolution - 1) as f64)
        .collect();
    let mut branches = Vec::new();
    let mut asymptotes = Vec::new();
    for &sigma in sigmas {
        let s = check_sigma(sigma)?;
        let states = zs
            .par_iter()
            .map(|&z| stationary_two_mode(z, sigma, c))
            .collect::<Result<Vec<_>>>()?;

        let gap = |z: f64| {
            let (fj, fk) = shifts(z, s, c);
            fk - fj
        };
        for i in 0..resolution - 1 {
            if states[i] == Stationary::Divergent {
                asymptotes.push((sigma, zs[i]));
            } else if states[i + 1] != Stationary::Divergent && gap(zs[i]) * gap(zs[i + 1]) < 0.0 {
                asymptotes.push((sigma, bisect(zs[i], zs[i + 1], gap)));
            }
        }

        let mut start = None;
        for i in 0..=resolution {
            let physical = i < resolution && states[i].atoms().is_some();
            match (physical, start) {
                (true, None) => start = Some(i),
                (false, Some(first)) => {
                    branches.push(build_branch(c, sigma, &zs[first..i], &states[first..i], first == 0, i == resolution)?);
                    start = None;
                }
                _ => {}
            }
        }
    }
    Ok(Families {
        couplings: *c,
        branches,
        asymptotes,
    })
}

fn build_branch(
    c: &DimerCouplings,
    sigma: i8,
    zs: &[f64],
    states: &[Stationary],
    touches_low: bool,
    touches_high: bool,
) -> Result<FamilyBranch> {
    let phi = if sigma > 0 { 0.0 } else { PI };
    let samples = zs
        .par_iter()
        .zip(states)
        .map(|(&z, st)| {
            let Stationary::Physical { n, mu } = *st else {
                unreachable!("branches hold physical samples only")
            };
            let p = DimerParams::new(*c, n)?;
            let state = DimerState::new(z, phi);
            let (kind, _) = classify_point(&state, &p);
            let stiffness = jacobian(&state, &p)?[0][1];
            Ok(FamilySample {
                z,
                n,
                mu,
                kind,
                stiffness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut attached = Vec::new();
    if touches_high {
        attached.push(c.j);
    }
    if touches_low {
        attached.push(c.k);
    }
    let kind = if attached.is_empty() {
        BranchKind::Upper
    } else {
        BranchKind::LinearLimit
    };
    let (mut n_th, mut z_th) = (None, None);
    if kind == BranchKind::Upper && samples.len() >= 3 {
        let i = samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.n.total_cmp(&b.1.n))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if i > 0 && i + 1 < samples.len() {
            let atoms = |z: f64| {
                stationary_two_mode(z, sigma, c)
                    .ok()
                    .and_then(|s| s.atoms())
                    .unwrap_or(f64::INFINITY)
            };
            let (z, n) = golden_min(samples[i - 1].z, samples[i + 1].z, atoms);
            n_th = Some(n);
            z_th = Some(z);
        }
    }
    Ok(FamilyBranch {
        sigma,
        kind,
        attached,
        samples,
        n_th,
        z_th,
    })
}
