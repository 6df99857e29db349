use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{hamiltonian, jacobian, rhs_unchecked, DimerParams, DimerState};

/// Points in the sign-change scan of `dphi/dtau` over `z`.
pub const SCAN_POINTS: usize = 10_000;

const SCAN_EDGE: f64 = 1e-9;

/// Jacobian eigenvalues smaller than this leave a fixed point unclassified.
const DEGENERATE_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPointKind {
    Center,
    Saddle,
    Degenerate,
}

/// Stationary point at `phi = 0` (`sigma = 1`) or `phi = pi` (`sigma = -1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub z: f64,
    pub sigma: i8,
    pub kind: FixedPointKind,
    /// Real and imaginary parts of the Jacobian eigenvalue with
    /// non-negative imaginary part (the other one is `-lambda`).
    pub eigenvalue: (f64, f64),
    /// `|dphi/dtau|` at the refined root.
    pub residual: f64,
    pub energy: f64,
}

impl FixedPoint {
    pub fn phi(&self) -> f64 {
        if self.sigma > 0 {
            0.0
        } else {
            PI
        }
    }

    pub fn state(&self) -> DimerState {
        DimerState::new(self.z, self.phi())
    }
}

fn phase_rate(z: f64, sigma: i8, p: &DimerParams) -> f64 {
    let phi = if sigma > 0 { 0.0 } else { PI };
    rhs_unchecked(z, phi, (1.0 - z * z).sqrt(), p).1
}

/// Classifies the linearization of the flow at `s`.
pub fn classify_point(s: &DimerState, p: &DimerParams) -> (FixedPointKind, (f64, f64)) {
    let Ok(j) = jacobian(s, p) else {
        return (FixedPointKind::Degenerate, (0.0, 0.0));
    };
    let half_trace = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = half_trace * half_trace - det;
    let (lambda, kind) = if disc >= 0.0 {
        ((half_trace.abs() + disc.sqrt(), 0.0), FixedPointKind::Saddle)
    } else {
        ((half_trace, (-disc).sqrt()), FixedPointKind::Center)
    };
    if lambda.0.hypot(lambda.1) < DEGENERATE_EIGENVALUE {
        return (FixedPointKind::Degenerate, lambda);
    }
    (kind, lambda)
}

/// Refines a bracketed sign change of `f` down to adjacent doubles.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// All fixed points on the lines `phi = 0` and `phi = pi`, ordered by
/// `sigma` (in-phase first) and then by `z`.
pub fn fixed_points(p: &DimerParams) -> Vec<FixedPoint> {
    let mut out = Vec::new();
    let zs: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| -1.0 + SCAN_EDGE + (2.0 - 2.0 * SCAN_EDGE) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    for sigma in [1i8, -1] {
        let f = |z: f64| phase_rate(z, sigma, p);
        let values: Vec<f64> = zs.iter().map(|&z| f(z)).collect();
        for i in 0..zs.len() - 1 {
            let (a, b) = (values[i], values[i + 1]);
            let z = if a == 0.0 {
                zs[i]
            } else if a * b < 0.0 {
                bisect(zs[i], zs[i + 1], f)
            } else {
                continue;
            };
            let s = DimerState::new(z, if sigma > 0 { 0.0 } else { PI });
            let (kind, eigenvalue) = classify_point(&s, p);
            out.push(FixedPoint {
                z,
                sigma,
                kind,
                eigenvalue,
                residual: f(z).abs(),
                energy: hamiltonian(&s, p).unwrap_or(f64::NAN),
            });
        }
    }
    out
}

/// Stationarity conditions at one fixed point, written as `nu = rhs(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub z: f64,
    pub sigma: i8,
    /// `nu - [(3 - xi+) z - xi- + sigma (2 eta- z^2 + eta+ z - eta-) / sqrt(1 - z^2)]`,
    /// the condition `dH/dz = 0` on `phi = 0, pi`.
    pub derived_residual: f64,
    /// `nu - [(1 - xi+) z - xi- + sigma (eta+ z^2 - eta- z - 2 eta+) / sqrt(1 - z^2)]`,
    /// the closed form as printed in the literature (with its `chi_-` read as `xi-`).
    pub printed_residual: f64,
}

/// Residuals of both closed-form stationarity conditions at every fixed
/// point found by [`fixed_points`].
pub fn compare_stationary_conditions(p: &DimerParams) -> Vec<ConditionCheck> {
    fixed_points(p)
        .iter()
        .map(|f| {
            let z = f.z;
            let sigma = f.sigma as f64;
            let root = (1.0 - z * z).sqrt();
            let derived = (3.0 - p.xi_plus) * z - p.xi_minus
                + sigma * (2.0 * p.eta_minus * z * z + p.eta_plus * z - p.eta_minus) / root;
            let printed = (1.0 - p.xi_plus) * z - p.xi_minus
                + sigma * (p.eta_plus * z * z - p.eta_minus * z - 2.0 * p.eta_plus) / root;
            ConditionCheck {
                z,
                sigma: f.sigma,
                derived_residual: p.nu - derived,
                printed_residual: p.nu - printed,
            }
        })
        .collect()
}
