//! Run configuration: a single JSON document, validated before anything runs.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qpbec::potential::PotentialSpec;
use qpbec::spectrum::{BasisSettings, SpectrumSettings};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub spectrum: SpectrumConfig,
    /// 1-based labels of the two modes.
    pub pair: [usize; 2],
    /// Interaction signs to process.
    pub couplings: Vec<f64>,
    pub dimer: DimerConfig,
    pub gpe: GpeConfig,
    pub output: PathBuf,
    /// Bands applied by `--check`; `null` disables checking.
    pub checks: Option<Checks>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub v1: f64,
    pub v2: f64,
    pub theta: f64,
    /// Order of the golden-ratio convergent.
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub cutoff: f64,
    pub target_energy: f64,
    pub grid_points: usize,
    pub mode_count: usize,
    pub ipr_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimerConfig {
    /// Atom numbers for fixed points and phase portraits.
    pub n_values: Vec<f64>,
    pub family_resolution: usize,
    pub portrait_points: usize,
    pub orbit_span: f64,
    pub dtau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpeConfig {
    pub dt: f64,
    pub noise: f64,
    pub seed: u64,
    /// Time between scalar observations.
    pub scalar_interval: f64,
    /// Time between field snapshots; 0 disables them.
    pub snapshot_interval: f64,
    pub containment_radius: f64,
    pub runs: Vec<GpeRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpeRun {
    pub tag: String,
    pub g: f64,
    pub n: f64,
    pub z0: f64,
    pub phi0: f64,
    pub t_end: f64,
    #[serde(default)]
    pub expect: Option<RunExpectation>,
}

/// Bands checked on one GPE run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum RunExpectation {
    /// Period of the window imbalance within `tolerance` of `target`.
    Period { target: f64, tolerance: f64 },
    /// Norm fraction near the two centers stays above `minimum`.
    Contained { minimum: f64 },
    /// Peak density at `t` below `fraction` of its initial value.
    PeakDecay { t: f64, fraction: f64 },
}

/// `(target, tolerance)` bands for the static stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub localized_count: Option<usize>,
    pub mobility_edge: Option<[f64; 2]>,
    pub first_extended: Option<[f64; 2]>,
    /// `(label, target, tolerance)`.
    pub energies: Vec<(usize, f64, f64)>,
    pub ipr: Vec<(usize, f64, f64)>,
    /// `(g, target, tolerance)`.
    pub thresholds: Vec<(f64, f64, f64)>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            v1: 1.5,
            v2: 2.0,
            theta: 0.13,
            order: 9,
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let s = SpectrumSettings::default();
        Self {
            cutoff: s.basis.cutoff,
            target_energy: s.basis.target_energy,
            grid_points: s.grid_points,
            mode_count: s.mode_count,
            ipr_threshold: s.ipr_threshold,
        }
    }
}

impl Default for DimerConfig {
    fn default() -> Self {
        Self {
            n_values: vec![0.3, 2.0],
            family_resolution: 4001,
            portrait_points: 200,
            orbit_span: 30.0,
            dtau: 1e-3,
        }
    }
}

impl Default for GpeConfig {
    fn default() -> Self {
        let run = |tag: &str, g, n, z0, phi0, t_end, expect| GpeRun {
            tag: tag.into(),
            g,
            n,
            z0,
            phi0,
            t_end,
            expect: Some(expect),
        };
        Self {
            dt: 1e-3,
            noise: 0.03,
            seed: 2024,
            scalar_interval: 0.1,
            snapshot_interval: 5.0,
            containment_radius: 3.0,
            runs: vec![
                run("attractive-weak", -1.0, 0.3, 0.0, PI, 500.0, RunExpectation::Period { target: 50.0, tolerance: 10.0 }),
                run("attractive-strong", -1.0, 2.0, 0.451, 0.0, 500.0, RunExpectation::Period { target: 5.0, tolerance: 1.5 }),
                run("repulsive-staggered", 1.0, 2.0, 0.7886, PI, 500.0, RunExpectation::Contained { minimum: 0.9 }),
                // The sigma = -1 center of the repulsive dimer at N = 8.
                run("repulsive-dense", 1.0, 8.0, 0.8174, PI, 100.0, RunExpectation::PeakDecay { t: 100.0, fraction: 0.5 }),
            ],
        }
    }
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            localized_count: Some(89),
            mobility_edge: Some([0.9330, 0.01]),
            first_extended: Some([2.181, 0.05]),
            energies: vec![(32, -0.790, 0.01), (37, -0.647, 0.01)],
            ipr: vec![(32, 0.589, 0.01), (37, 0.567, 0.01)],
            thresholds: vec![(-1.0, 0.416, 0.03), (1.0, 0.401, 0.03)],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialConfig::default(),
            spectrum: SpectrumConfig::default(),
            pair: [32, 37],
            couplings: vec![-1.0, 1.0],
            dimer: DimerConfig::default(),
            gpe: GpeConfig::default(),
            output: PathBuf::from("out"),
            checks: Some(Checks::default()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid(format!("malformed config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, CliError> {
        let p = &self.potential;
        PotentialSpec::golden(p.v1, p.v2, p.theta, p.order).map_err(|e| invalid(e.to_string()))
    }

    pub fn spectrum_settings(&self) -> SpectrumSettings {
        let s = &self.spectrum;
        SpectrumSettings {
            basis: BasisSettings {
                cutoff: s.cutoff,
                target_energy: s.target_energy,
            },
            grid_points: s.grid_points,
            mode_count: s.mode_count,
            ipr_threshold: s.ipr_threshold,
        }
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), CliError> {
        let spec = self.potential_spec()?;
        qpbec::potential::Grid::new(&spec, self.spectrum.grid_points).map_err(|e| invalid(e.to_string()))?;
        let s = &self.spectrum;
        if !(s.cutoff > 0.0) || s.mode_count == 0 || !(s.ipr_threshold > 0.0) {
            return Err(invalid("spectrum needs cutoff > 0, mode_count > 0 and ipr_threshold > 0"));
        }
        let [j, k] = self.pair;
        if j == 0 || k == 0 || j == k || j.max(k) > s.mode_count {
            return Err(invalid(format!("pair ({j}, {k}) must be two distinct labels in 1..={}", s.mode_count)));
        }
        if self.couplings.is_empty() || self.couplings.iter().any(|g| !g.is_finite() || *g == 0.0) {
            return Err(invalid("couplings must be a non-empty list of non-zero numbers"));
        }
        let d = &self.dimer;
        if d.n_values.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(invalid("dimer n_values must be positive"));
        }
        if d.family_resolution < 16 || d.portrait_points < 4 || !(d.dtau > 0.0) || !(d.orbit_span > 0.0) {
            return Err(invalid("dimer needs family_resolution >= 16, portrait_points >= 4, dtau > 0, orbit_span > 0"));
        }
        let g = &self.gpe;
        if !(g.dt > 0.0) || !(g.noise >= 0.0) || !(g.scalar_interval >= g.dt) || !(g.snapshot_interval >= 0.0) {
            return Err(invalid("gpe needs dt > 0, noise >= 0, scalar_interval >= dt and snapshot_interval >= 0"));
        }
        if !(g.containment_radius > 0.0) {
            return Err(invalid("gpe containment_radius must be positive"));
        }
        let mut tags: Vec<&str> = Vec::new();
        for run in &g.runs {
            if run.tag.is_empty() || !run.tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(invalid(format!("run tag {:?} must be non-empty [A-Za-z0-9_-]", run.tag)));
            }
            if tags.contains(&run.tag.as_str()) {
                return Err(invalid(format!("duplicate run tag {:?}", run.tag)));
            }
            tags.push(&run.tag);
            if !(run.n > 0.0) || !(run.z0.abs() <= 1.0) || !run.phi0.is_finite() || !(run.t_end > 0.0) || !run.g.is_finite() {
                return Err(invalid(format!("run {:?} needs N > 0, |z0| <= 1, finite phi0 and t_end > 0", run.tag)));
            }
        }
        Ok(())
    }

    /// Steps between scalar observations and between snapshots.
    pub fn gpe_strides(&self) -> (usize, usize) {
        let g = &self.gpe;
        let scalar = (g.scalar_interval / g.dt).round().max(1.0) as usize;
        let snapshot = (g.snapshot_interval / g.dt).round() as usize;
        (scalar, snapshot)
    }
}
