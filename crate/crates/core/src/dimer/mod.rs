//! Two-mode reduction of the lattice.
//!
//! Keeping only modes `j` and `k` and writing
//!
//! ```text
//! a_j = sqrt(N (1 + z) / 2) exp(i (theta - phi) / 2)
//! a_k = sqrt(N (1 - z) / 2) exp(i (theta + phi) / 2)
//! ```
//!
//! turns the lattice into a one-degree-of-freedom Hamiltonian system for the
//! population imbalance `z` and the phase mismatch `phi`, in the rescaled
//! time `tau = N chi_jk t`. The global phase `theta` decouples and is
//! accumulated alongside. Everything the system depends on is packed into
//! five numbers: `nu`, `xi_plus`, `xi_minus`, `eta_plus`, `eta_minus`.

mod families;
mod fixed;
mod portrait;

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopping::HoppingTensors;
use crate::ode::Rk4;
use crate::spectrum::SpectrumResult;

pub use families::{stationary_two_mode, trace_families, BranchKind, Families, FamilyBranch, FamilySample, Stationary};
pub use fixed::{
    compare_stationary_conditions, fixed_points, ConditionCheck, FixedPoint, FixedPointKind, SCAN_POINTS,
};
pub use portrait::{phase_portrait, Orbit, PhasePortrait, PortraitSettings};

/// Pair couplings below this magnitude make the time rescaling singular.
pub const MIN_PAIR_COUPLING: f64 = 1e-6;

/// Distance from `|z| = 1` at which integration stops.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// Steps are subdivided once `1 - z^2` drops below this value.
const SUBSTEP_SCALE: f64 = 0.1;
const MAX_SUBSTEPS: f64 = 4096.0;

/// Raw two-mode couplings, independent of the atom number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerCouplings {
    /// 1-based labels of the two modes.
    pub j: usize,
    pub k: usize,
    pub eps_j: f64,
    pub eps_k: f64,
    pub chi_j: f64,
    pub chi_k: f64,
    pub chi_jk: f64,
    pub chit_jk: f64,
    pub chit_kj: f64,
    pub g: f64,
}

impl DimerCouplings {
    /// Couplings of localized modes `j` and `k` (1-based).
    pub fn from_tensors(j: usize, k: usize, spectrum: &SpectrumResult, tensors: &HoppingTensors) -> Result<Self> {
        if j == k {
            return Err(Error::InvalidParameter(format!(
                "dimer needs two distinct modes, got {j} twice"
            )));
        }
        let mj = spectrum.localized_mode(j)?;
        let mk = spectrum.localized_mode(k)?;
        let (a, b) = (j - 1, k - 1);
        if a >= tensors.len() || b >= tensors.len() {
            return Err(Error::ModeIndex {
                index: j.max(k),
                count: tensors.len(),
            });
        }
        let couplings = Self {
            j,
            k,
            eps_j: mj.energy,
            eps_k: mk.energy,
            chi_j: tensors.chi_diag[a],
            chi_k: tensors.chi_diag[b],
            chi_jk: tensors.chi_pair[(a, b)],
            chit_jk: tensors.chi_tilde[(a, b)],
            chit_kj: tensors.chi_tilde[(b, a)],
            g: tensors.g,
        };
        couplings.check()?;
        Ok(couplings)
    }

    fn check(&self) -> Result<()> {
        if self.chi_jk.abs() < MIN_PAIR_COUPLING {
            return Err(Error::WeakPairCoupling(self.chi_jk));
        }
        Ok(())
    }

    /// The same pair with the roles of `j` and `k` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            j: self.k,
            k: self.j,
            eps_j: self.eps_k,
            eps_k: self.eps_j,
            chi_j: self.chi_k,
            chi_k: self.chi_j,
            chi_jk: self.chi_jk,
            chit_jk: self.chit_kj,
            chit_kj: self.chit_jk,
            g: self.g,
        }
    }

    pub fn with_atoms(&self, n: f64) -> Result<DimerParams> {
        DimerParams::new(*self, n)
    }
}

/// Reduced parameters at atom number `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub couplings: DimerCouplings,
    pub n: f64,
    pub nu: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
}

impl DimerParams {
    pub fn new(couplings: DimerCouplings, n: f64) -> Result<Self> {
        couplings.check()?;
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "atom number must be positive, got {n}"
            )));
        }
        let c = &couplings;
        Ok(Self {
            couplings,
            n,
            nu: (c.eps_j - c.eps_k) / (c.chi_jk * n),
            xi_plus: (c.chi_j + c.chi_k) / (2.0 * c.chi_jk),
            xi_minus: (c.chi_j - c.chi_k) / (2.0 * c.chi_jk),
            eta_plus: (c.chit_jk + c.chit_kj) / c.chi_jk,
            eta_minus: (c.chit_jk - c.chit_kj) / c.chi_jk,
        })
    }

    /// `N chi_jk`, the factor converting physical time into `tau`.
    pub fn time_scale(&self) -> f64 {
        self.n * self.couplings.chi_jk
    }

    /// Chemical potential of the rotating frame in which `z`, `phi` obey
    /// [`rhs`] and `theta` accumulates [`theta_rate`].
    pub fn frame_mu(&self) -> f64 {
        let c = &self.couplings;
        0.5 * (c.eps_j + c.eps_k + 0.5 * self.n * (c.chi_j + c.chi_k) + self.n * c.chi_jk)
    }

    /// Lattice amplitudes `(a_j, a_k)` of a dimer state.
    pub fn amplitudes(&self, s: &DimerState) -> (Complex64, Complex64) {
        let aj = (0.5 * self.n * (1.0 + s.z)).max(0.0).sqrt();
        let ak = (0.5 * self.n * (1.0 - s.z)).max(0.0).sqrt();
        (
            Complex64::from_polar(aj, 0.5 * (s.theta - s.phi)),
            Complex64::from_polar(ak, 0.5 * (s.theta + s.phi)),
        )
    }

    /// Chemical potential of a fixed point: the frame value corrected by the
    /// rotation of the global phase.
    pub fn stationary_mu(&self, s: &DimerState) -> f64 {
        self.frame_mu() - 0.5 * self.time_scale() * theta_rate(s, self)
    }
}

/// Imbalance, half phase mismatch, global phase and rescaled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerState {
    pub z: f64,
    pub phi: f64,
    pub theta: f64,
    pub tau: f64,
}

impl DimerState {
    pub fn new(z: f64, phi: f64) -> Self {
        Self {
            z,
            phi,
            theta: 0.0,
            tau: 0.0,
        }
    }

    /// State of two lattice amplitudes (`theta` taken from their phases).
    pub fn from_amplitudes(aj: Complex64, ak: Complex64) -> Self {
        let (nj, nk) = (aj.norm_sqr(), ak.norm_sqr());
        let z = (nj - nk) / (nj + nk);
        let phi = (ak * aj.conj()).arg();
        let theta = aj.arg() + ak.arg();
        Self {
            z,
            phi,
            theta,
            tau: 0.0,
        }
    }
}

fn check_z(z: f64) -> Result<f64> {
    if z.abs() >= 1.0 || !z.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "imbalance must satisfy |z| < 1, got {z}"
        )));
    }
    Ok((1.0 - z * z).sqrt())
}

/// `(dz/dtau, dphi/dtau)`.
pub fn rhs(s: &DimerState, p: &DimerParams) -> Result<(f64, f64)> {
    let root = check_z(s.z)?;
    Ok(rhs_unchecked(s.z, s.phi, root, p))
}

fn rhs_unchecked(z: f64, phi: f64, root: f64, p: &DimerParams) -> (f64, f64) {
    let (sin, cos) = phi.sin_cos();
    let dz = (1.0 - z * z) * (2.0 * phi).sin() + root * (p.eta_minus * z + p.eta_plus) * sin;
    let poly = 2.0 * p.eta_minus * z * z + p.eta_plus * z - p.eta_minus;
    let dphi = p.nu + p.xi_minus - (1.0 - p.xi_plus) * z - 2.0 * z * cos * cos - poly * cos / root;
    (dz, dphi)
}

/// The conserved energy of the `(z, phi)` flow; `dz/dtau = -dH/dphi` and
/// `dphi/dtau = dH/dz`.
pub fn hamiltonian(s: &DimerState, p: &DimerParams) -> Result<f64> {
    let root = check_z(s.z)?;
    Ok(hamiltonian_unchecked(s.z, s.phi, root, p))
}

fn hamiltonian_unchecked(z: f64, phi: f64, root: f64, p: &DimerParams) -> f64 {
    let cos = phi.cos();
    (1.0 - z * z) * cos * cos + root * (p.eta_minus * z + p.eta_plus) * cos - 0.5 * (1.0 - p.xi_plus) * z * z
        + (p.nu + p.xi_minus) * z
}

/// `dtheta/dtau`; undefined at `|z| = 1`.
pub fn theta_rate(s: &DimerState, p: &DimerParams) -> f64 {
    let root = (1.0 - s.z * s.z).sqrt();
    let cos = s.phi.cos();
    (p.eta_plus * s.z * s.z - p.eta_minus * s.z - 2.0 * p.eta_plus) * cos / root - 2.0 * cos * cos - p.xi_minus * s.z
}

/// Jacobian `[[dz'/dz, dz'/dphi], [dphi'/dz, dphi'/dphi]]` of [`rhs`].
pub fn jacobian(s: &DimerState, p: &DimerParams) -> Result<[[f64; 2]; 2]> {
    let root = check_z(s.z)?;
    let z = s.z;
    let (sin, cos) = s.phi.sin_cos();
    let droot = -z / root;
    let lin = p.eta_minus * z + p.eta_plus;
    let poly = 2.0 * p.eta_minus * z * z + p.eta_plus * z - p.eta_minus;
    let dpoly = 4.0 * p.eta_minus * z + p.eta_plus;
    let dzdz = -2.0 * z * (2.0 * s.phi).sin() + (droot * lin + root * p.eta_minus) * sin;
    let dzdphi = 2.0 * (1.0 - z * z) * (2.0 * s.phi).cos() + root * lin * cos;
    let dphidz = -(1.0 - p.xi_plus) - 2.0 * cos * cos - cos * (dpoly / root + poly * z / root.powi(3));
    let dphidphi = 2.0 * z * (2.0 * s.phi).sin() + poly / root * sin;
    Ok([[dzdz, dzdphi], [dphidz, dphidphi]])
}

/// Sampled dimer trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimerTrajectory {
    pub states: Vec<DimerState>,
    pub energies: Vec<f64>,
    /// Set when the orbit ran into `|z| = 1` and was cut short.
    pub singular: bool,
}

impl DimerTrajectory {
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energies.first().copied().unwrap_or(0.0);
        self.energies.iter().fold(0.0, |m, h| m.max((h - h0).abs()))
    }

    /// CSV with columns `tau, z, phi, theta, H`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tau,z,phi,theta,H")?;
        for (s, h) in self.states.iter().zip(&self.energies) {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.tau, s.z, s.phi, s.theta, h)?;
        }
        Ok(())
    }
}

/// RK4 integration of `(z, phi, theta)` from `s0.tau` to `s0.tau + span`.
///
/// A negative `span` integrates backwards in `tau` (as happens in physical
/// time when `chi_jk < 0`). Hitting `|z| >= 1 - 1e-6` stops the run with
/// [`Error::Singular`].
pub fn integrate_dimer(s0: &DimerState, p: &DimerParams, span: f64, dtau: f64, stride: usize) -> Result<DimerTrajectory> {
    let traj = integrate_dimer_until_singular(s0, p, span, dtau, stride)?;
    if traj.singular {
        let tau = traj.states.last().map(|s| s.tau).unwrap_or(s0.tau);
        return Err(Error::Singular { tau });
    }
    Ok(traj)
}

/// Like [`integrate_dimer`], but returns the truncated orbit instead of an
/// error when it approaches `|z| = 1`.
pub fn integrate_dimer_until_singular(
    s0: &DimerState,
    p: &DimerParams,
    span: f64,
    dtau: f64,
    stride: usize,
) -> Result<DimerTrajectory> {
    if !(dtau > 0.0) || stride == 0 || !span.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need dtau > 0, stride >= 1 and a finite span (dtau = {dtau}, span = {span})"
        )));
    }
    check_z(s0.z)?;
    let steps = (span.abs() / dtau).round() as usize;
    let h = dtau * span.signum();
    let mut y = [s0.z, s0.phi, s0.theta];
    let mut rk = Rk4::new(3);
    let record = |y: &[f64; 3], tau: f64| -> DimerState {
        DimerState {
            z: y[0],
            phi: y[1],
            theta: y[2],
            tau,
        }
    };
    let mut out = DimerTrajectory {
        states: vec![*s0],
        energies: vec![hamiltonian(s0, p)?],
        singular: false,
    };
    for step in 1..=steps {
        // Near |z| = 1 the flow stiffens like 1 / (1 - z^2); split the step
        // so the local error stays comparable to the bulk of phase space.
        let pieces = (SUBSTEP_SCALE / (1.0 - y[0] * y[0])).ceil().clamp(1.0, MAX_SUBSTEPS) as usize;
        let sub = h / pieces as f64;
        let mut hit = false;
        for piece in 0..pieces {
            let tau = s0.tau + (step - 1) as f64 * h + piece as f64 * sub;
            rk.step(&mut y, tau, sub, |_, y, dy| {
                let z = y[0].clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                if y[0].abs() >= 1.0 {
                    hit = true;
                }
                let root = (1.0 - z * z).sqrt();
                let (dz, dphi) = rhs_unchecked(z, y[1], root, p);
                dy[0] = dz;
                dy[1] = dphi;
                dy[2] = theta_rate(&record(&[z, y[1], y[2]], 0.0), p);
            });
        }
        let now = s0.tau + step as f64 * h;
        if hit || y[0].abs() >= 1.0 - SINGULAR_MARGIN || !y.iter().all(|v| v.is_finite()) {
            out.singular = true;
            return Ok(out);
        }
        if step % stride == 0 || step == steps {
            let s = record(&y, now);
            out.energies.push(hamiltonian(&s, p)?);
            out.states.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn sample_couplings(g: f64) -> DimerCouplings {
        // Pair (32, 37) of the default approximant, rounded.
        DimerCouplings {
            j: 32,
            k: 37,
            eps_j: -0.790044,
            eps_k: -0.647177,
            chi_j: 0.589398 * g,
            chi_k: 0.566845 * g,
            chi_jk: 0.105413 * g,
            chit_jk: -0.165673 * g,
            chit_kj: 0.148825 * g,
            g,
        }
    }

    fn symmetric_params(nu: f64) -> DimerParams {
        let c = DimerCouplings {
            j: 1,
            k: 2,
            eps_j: 0.0,
            eps_k: 0.0,
            chi_j: 0.0,
            chi_k: 0.0,
            chi_jk: 1.0,
            chit_jk: 0.0,
            chit_kj: 0.0,
            g: 1.0,
        };
        let mut p = DimerParams::new(c, 1.0).unwrap();
        p.nu = nu;
        p
    }

    #[test]
    fn scaling_with_atom_number() {
        let c = sample_couplings(-1.0);
        let a = c.with_atoms(1.0).unwrap();
        let b = c.with_atoms(2.0).unwrap();
        assert_relative_eq!(b.nu, 0.5 * a.nu, epsilon = 1e-15);
        assert_eq!(a.xi_plus, b.xi_plus);
        assert_eq!(a.eta_minus, b.eta_minus);
        assert_relative_eq!(c.eps_j - c.eps_k, -0.143, epsilon = 1e-3);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let mut c = sample_couplings(1.0);
        assert!(c.with_atoms(0.0).is_err());
        c.chi_jk = 1e-9;
        assert!(matches!(c.with_atoms(1.0), Err(Error::WeakPairCoupling(_))));
        let p = sample_couplings(1.0).with_atoms(1.0).unwrap();
        assert!(rhs(&DimerState::new(1.0, 0.0), &p).is_err());
        assert!(integrate_dimer(&DimerState::new(-1.0, 0.0), &p, 1.0, 1e-3, 1).is_err());
    }

    #[test]
    fn closed_form_values() {
        let mut p = sample_couplings(1.0).with_atoms(1.0).unwrap();
        p.eta_plus = 0.0;
        p.eta_minus = 0.0;
        let (dz, dphi) = rhs(&DimerState::new(0.0, 0.0), &p).unwrap();
        assert_eq!(dz, 0.0);
        assert_relative_eq!(dphi, p.nu + p.xi_minus, epsilon = 1e-15);

        let p = sample_couplings(-1.0).with_atoms(2.0).unwrap();
        assert_relative_eq!(
            hamiltonian(&DimerState::new(0.0, std::f64::consts::FRAC_PI_2), &p).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(hamiltonian(&DimerState::new(0.0, 0.0), &p).unwrap(), 1.0 + p.eta_plus, epsilon = 1e-15);
        assert_relative_eq!(theta_rate(&DimerState::new(0.0, 0.0), &p), -2.0 * p.eta_plus - 2.0, epsilon = 1e-15);

        let mut q = p;
        q.xi_minus = 0.0;
        assert!(theta_rate(&DimerState::new(0.3, std::f64::consts::FRAC_PI_2), &q).abs() < 1e-15);
    }

    #[test]
    fn symmetric_self_trapping_limit() {
        // With no asymmetry, dphi/dtau at phi = 0 reduces to nu - 3 z.
        let p = symmetric_params(0.0);
        let points = fixed_points(&p);
        let at_zero: Vec<_> = points.iter().filter(|f| f.z.abs() < 1e-10).collect();
        assert_eq!(at_zero.len(), 2);
        assert!(at_zero.iter().any(|f| f.sigma == 1));
        assert!(at_zero.iter().any(|f| f.sigma == -1));
        let p = symmetric_params(0.6);
        let root = points_at(&p, 1);
        assert_relative_eq!(root, 0.2, epsilon = 1e-10);
    }

    fn points_at(p: &DimerParams, sigma: i8) -> f64 {
        fixed_points(p).into_iter().find(|f| f.sigma == sigma).unwrap().z
    }

    #[test]
    fn center_stays_put() {
        let p = sample_couplings(-1.0).with_atoms(2.0).unwrap();
        let center = fixed_points(&p)
            .into_iter()
            .find(|f| f.kind == FixedPointKind::Center)
            .unwrap();
        let traj = integrate_dimer(&center.state(), &p, 20.0, 1e-3, 100).unwrap();
        for s in &traj.states {
            assert!((s.z - center.z).abs() < 1e-8);
            assert!((s.phi - center.phi()).abs() < 1e-8);
        }
    }

    #[test]
    fn libration_stays_bounded() {
        let p = sample_couplings(-1.0).with_atoms(2.0).unwrap();
        let center = fixed_points(&p)
            .into_iter()
            .find(|f| f.kind == FixedPointKind::Center)
            .unwrap();
        let start = DimerState::new(center.z + 0.01, center.phi());
        let traj = integrate_dimer(&start, &p, 100.0, 1e-3, 10).unwrap();
        for s in &traj.states {
            let d = ((s.z - center.z).powi(2) + (s.phi - center.phi()).powi(2)).sqrt();
            assert!(d < 0.02 * 2.0 * 3.0, "deviation {d}");
            assert!((s.z - center.z).abs() < 2.0 * 0.01 * 3.0);
        }
        assert!(traj.energy_drift() < 1e-8);
    }

    proptest! {
        #[test]
        fn phi_parity(z in -0.95f64..0.95, phi in -3.0f64..3.0) {
            let p = sample_couplings(1.0).with_atoms(0.7).unwrap();
            let (a, b) = rhs(&DimerState::new(z, phi), &p).unwrap();
            let (c, d) = rhs(&DimerState::new(z, -phi), &p).unwrap();
            prop_assert!((a + c).abs() < 1e-14);
            prop_assert!((b - d).abs() < 1e-14);
        }

        #[test]
        fn analytic_jacobian_matches_differences(z in -0.9f64..0.9, phi in -3.0f64..3.0, n in 0.2f64..4.0) {
            let p = sample_couplings(-1.0).with_atoms(n).unwrap();
            let jac = jacobian(&DimerState::new(z, phi), &p).unwrap();
            let h = 1e-6;
            let f = |z: f64, phi: f64| rhs(&DimerState::new(z, phi), &p).unwrap();
            let (zp, zm) = (f(z + h, phi), f(z - h, phi));
            let (pp, pm) = (f(z, phi + h), f(z, phi - h));
            let fd = [
                [(zp.0 - zm.0) / (2.0 * h), (pp.0 - pm.0) / (2.0 * h)],
                [(zp.1 - zm.1) / (2.0 * h), (pp.1 - pm.1) / (2.0 * h)],
            ];
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((jac[r][c] - fd[r][c]).abs() < 1e-5 * (1.0 + fd[r][c].abs()));
                }
            }
        }
    }
}
