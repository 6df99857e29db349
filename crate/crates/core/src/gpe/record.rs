use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GpeField, GpeSolver};
use crate::error::{Error, Result};
use crate::spectrum::SpectrumResult;

/// Observation windows and projections for one mode pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub j: usize,
    pub k: usize,
    /// Half-width of the imbalance windows around `X_j`, `X_k`. Defaults
    /// to `|X_j - X_k| / 2`, which makes the two windows touch.
    pub window_half_width: Option<f64>,
    /// Radius of the containment region around each center of mass.
    pub containment_radius: f64,
    /// Gauge `mu` in `a_j = <phi_j, Psi> exp(i mu t)`.
    pub mu_gauge: f64,
}

impl ProbeSettings {
    pub fn pair(j: usize, k: usize) -> Self {
        Self {
            j,
            k,
            window_half_width: None,
            containment_radius: 3.0,
            mu_gauge: 0.0,
        }
    }
}

/// Precomputed projectors and window masks.
#[derive(Debug, Clone)]
pub struct Probe {
    pub settings: ProbeSettings,
    pub centers: (f64, f64),
    pub half_width: f64,
    fj: Vec<f64>,
    fk: Vec<f64>,
    localized: Vec<Vec<f64>>,
    window_j: Vec<bool>,
    window_k: Vec<bool>,
    contained: Vec<bool>,
    dx: f64,
}

/// Observables of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub a_j: Complex64,
    pub a_k: Complex64,
    /// Modal imbalance `(|a_j|^2 - |a_k|^2) / (|a_j|^2 + |a_k|^2)`.
    pub z: f64,
    /// `arg a_k - arg a_j`.
    pub phi: f64,
    pub window_j: f64,
    pub window_k: f64,
    pub window_imbalance: f64,
    /// Fraction of the norm inside the containment region.
    pub containment: f64,
    /// `N - sum over localized modes of |a|^2`.
    pub leakage: f64,
    pub norm: f64,
    pub peak_density: f64,
}

impl Probe {
    pub fn new(spectrum: &SpectrumResult, settings: ProbeSettings) -> Result<Self> {
        if settings.j == settings.k {
            return Err(Error::InvalidParameter("probe needs two distinct modes".into()));
        }
        let mj = spectrum.localized_mode(settings.j)?;
        let mk = spectrum.localized_mode(settings.k)?;
        let (xj, xk) = (mj.com.x, mk.com.x);
        let half_width = settings.window_half_width.unwrap_or(0.5 * (xj - xk).abs());
        if !(half_width > 0.0) || !(settings.containment_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window widths must be positive (half width {half_width}, containment {})",
                settings.containment_radius
            )));
        }
        let grid = &spectrum.grid;
        let mask = |c: f64, w: f64| grid.coords().map(|x| (x - c).abs() < w).collect::<Vec<_>>();
        let window_j = mask(xj, half_width);
        let window_k = mask(xk, half_width);
        let r = settings.containment_radius;
        let contained = grid.coords().map(|x| (x - xj).abs() < r || (x - xk).abs() < r).collect();
        Ok(Self {
            settings,
            centers: (xj, xk),
            half_width,
            fj: mj.samples.clone(),
            fk: mk.samples.clone(),
            localized: spectrum.localized().iter().map(|m| m.samples.clone()).collect(),
            window_j,
            window_k,
            contained,
            dx: grid.dx,
        })
    }

    fn project(&self, psi: &[Complex64], f: &[f64]) -> Complex64 {
        psi.iter().zip(f).map(|(p, f)| p * f).sum::<Complex64>() * self.dx
    }

    /// Gauged projections `(a_j, a_k)`.
    pub fn project_pair(&self, field: &GpeField) -> (Complex64, Complex64) {
        let gauge = Complex64::from_polar(1.0, self.settings.mu_gauge * field.t);
        (self.project(&field.psi, &self.fj) * gauge, self.project(&field.psi, &self.fk) * gauge)
    }

    pub fn observe(&self, field: &GpeField) -> Observation {
        let (a_j, a_k) = self.project_pair(field);
        let (nj, nk) = (a_j.norm_sqr(), a_k.norm_sqr());
        let mut wj = 0.0;
        let mut wk = 0.0;
        let mut inside = 0.0;
        let mut total = 0.0;
        let mut peak: f64 = 0.0;
        for (i, v) in field.psi.iter().enumerate() {
            let rho = v.norm_sqr();
            total += rho;
            peak = peak.max(rho);
            if self.window_j[i] {
                wj += rho;
            }
            if self.window_k[i] {
                wk += rho;
            }
            if self.contained[i] {
                inside += rho;
            }
        }
        let norm = total * self.dx;
        let (wj, wk) = (wj * self.dx, wk * self.dx);
        let captured: f64 = self.localized.iter().map(|f| self.project(&field.psi, f).norm_sqr()).sum();
        Observation {
            t: field.t,
            a_j,
            a_k,
            z: (nj - nk) / (nj + nk),
            phi: (a_k * a_j.conj()).arg(),
            window_j: wj,
            window_k: wk,
            window_imbalance: (wj - wk) / (wj + wk),
            containment: inside / total,
            leakage: norm - captured,
            norm,
            peak_density: peak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordSettings {
    pub t_end: f64,
    /// Steps between scalar observations.
    pub scalar_stride: usize,
    /// Steps between field snapshots; 0 disables them.
    pub snapshot_stride: usize,
}

/// Stored field with its density and current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub psi: Vec<Complex64>,
    pub current: Vec<f64>,
}

impl Snapshot {
    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|v| v.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub probe: ProbeSettings,
    pub g: f64,
    pub dt: f64,
    pub observations: Vec<Observation>,
    pub energies: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.t).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.z).collect()
    }

    pub fn window_imbalance(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.window_imbalance).collect()
    }

    pub fn min_containment(&self) -> f64 {
        self.observations.iter().map(|o| o.containment).fold(f64::INFINITY, f64::min)
    }

    /// Smallest fraction of the norm inside the two imbalance windows.
    pub fn min_window_fraction(&self) -> f64 {
        self.observations
            .iter()
            .map(|o| (o.window_j + o.window_k) / o.norm)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_leakage(&self) -> f64 {
        self.observations.iter().map(|o| o.leakage).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|N(t) / N(0) - 1|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.observations[0].norm;
        self.observations.iter().map(|o| (o.norm / n0 - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest `|E(t) / E(0) - 1|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies.iter().map(|e| (e / e0 - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Peak density at the first observation at or after `t`, relative to
    /// the initial peak.
    pub fn peak_ratio_at(&self, t: f64) -> Option<f64> {
        let p0 = self.observations.first()?.peak_density;
        self.observations.iter().find(|o| o.t >= t - 1e-9).map(|o| o.peak_density / p0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,z,phi,abs_aj2,abs_ak2,window_j,window_k,window_imbalance,containment,leakage,norm,energy,peak_density"
        )?;
        for (o, e) in self.observations.iter().zip(&self.energies) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                o.t,
                o.z,
                o.phi,
                o.a_j.norm_sqr(),
                o.a_k.norm_sqr(),
                o.window_j,
                o.window_k,
                o.window_imbalance,
                o.containment,
                o.leakage,
                o.norm,
                e,
                o.peak_density
            )?;
        }
        Ok(())
    }
}

/// Evolves `field` to `settings.t_end`, sampling observables as it goes.
///
/// A field that turns non-finite ends the run with [`Error::Truncated`],
/// which carries everything recorded up to that point.
pub fn evolve(
    solver: &mut GpeSolver,
    field: &mut GpeField,
    probe: &Probe,
    settings: &RecordSettings,
) -> Result<TrajectoryRecord> {
    if !(settings.t_end > 0.0) || settings.scalar_stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "need t_end > 0 and a positive scalar stride (t_end = {}, stride = {})",
            settings.t_end, settings.scalar_stride
        )));
    }
    let steps = (settings.t_end / solver.dt).round() as usize;
    let mut record = TrajectoryRecord {
        probe: probe.settings,
        g: solver.g,
        dt: solver.dt,
        observations: Vec::new(),
        energies: Vec::new(),
        snapshots: Vec::new(),
    };
    let snap = settings.snapshot_stride;
    let mut done = 0;
    loop {
        if done % settings.scalar_stride == 0 {
            record.observations.push(probe.observe(field));
            record.energies.push(solver.energy(field));
        }
        if snap > 0 && done % snap == 0 {
            record.snapshots.push(Snapshot {
                index: record.snapshots.len(),
                t: field.t,
                psi: field.psi.clone(),
                current: solver.current_density(field),
            });
        }
        if done == steps {
            break;
        }
        // Advance to the next sampling point in one fused call.
        let mut next = steps;
        next = next.min((done / settings.scalar_stride + 1) * settings.scalar_stride);
        if let Some(i) = done.checked_div(snap) {
            next = next.min((i + 1) * snap);
        }
        if let Err(e) = solver.advance(field, next - done) {
            return Err(match e {
                Error::NonFinite { t } => Error::Truncated {
                    t,
                    partial: Box::new(record),
                },
                other => other,
            });
        }
        done = next;
    }
    Ok(record)
}

/// One two-mode GPE run on the pair `(probe.j, probe.k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeRun {
    pub g: f64,
    pub n: f64,
    pub z0: f64,
    pub phi0: f64,
    pub noise: f64,
    pub seed: u64,
    pub dt: f64,
    pub record: RecordSettings,
    pub probe: ProbeSettings,
}

impl TwoModeRun {
    /// Builds the initial field, adds noise and evolves it.
    pub fn run(&self, spectrum: &SpectrumResult) -> Result<TrajectoryRecord> {
        let fj = &spectrum.localized_mode(self.probe.j)?.samples;
        let fk = &spectrum.localized_mode(self.probe.k)?.samples;
        let mut field = super::init_two_mode(self.n, self.z0, self.phi0, fj, fk, &spectrum.grid)?;
        super::add_noise(&mut field, self.noise, self.seed)?;
        let mut solver = GpeSolver::new(&spectrum.spec, spectrum.grid, self.g, self.dt)?;
        let probe = Probe::new(spectrum, self.probe)?;
        evolve(&mut solver, &mut field, &probe, &self.record)
    }
}
