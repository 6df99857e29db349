//! The numbers a reproduction run is judged by, and the `--check` bands.

use qpbec::dimer::{ConditionCheck, FixedPoint};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunExpectation};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub spectrum: Option<SpectrumSummary>,
    pub hopping: Vec<HoppingSummary>,
    pub dimer: Vec<DimerSummary>,
    pub gpe: Vec<GpeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub p: u64,
    pub q: u64,
    pub localized_count: usize,
    pub mobility_edge: Option<f64>,
    pub first_extended_energy: Option<f64>,
    /// Energy, IPR and center of mass of each configured pair mode.
    pub pair: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub label: usize,
    pub energy: f64,
    pub ipr: f64,
    pub center: f64,
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingSummary {
    pub g: f64,
    pub chi_j: f64,
    pub chi_k: f64,
    pub chi_jk: f64,
    pub chi_tilde_jk: f64,
    pub chi_tilde_kj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimerSummary {
    pub g: f64,
    pub threshold: Option<f64>,
    /// `(sigma, z)` of the poles of `N(z)`.
    pub asymptotes: Vec<(i8, f64)>,
    pub portraits: Vec<PortraitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitSummary {
    pub n: f64,
    pub fixed_points: Vec<FixedPoint>,
    pub conditions: Vec<ConditionCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpeSummary {
    pub tag: String,
    pub g: f64,
    pub n: f64,
    pub z0: f64,
    pub phi0: f64,
    pub seed: u64,
    pub t_end: f64,
    /// `(mean, std, maxima)` of the window-imbalance period.
    pub period: Option<(f64, f64, usize)>,
    pub min_containment: f64,
    pub min_window_fraction: f64,
    pub max_leakage: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    /// `(t, peak density at t / initial peak density)`.
    pub peak_ratio: Option<(f64, f64)>,
    pub truncated_at: Option<f64>,
}

impl Summary {
    /// Replaces the sections present in `other`.
    pub fn merge(&mut self, other: Summary) {
        if other.spectrum.is_some() {
            self.spectrum = other.spectrum;
        }
        if !other.hopping.is_empty() {
            self.hopping = other.hopping;
        }
        if !other.dimer.is_empty() {
            self.dimer = other.dimer;
        }
        if !other.gpe.is_empty() {
            self.gpe = other.gpe;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn band(name: String, value: Option<f64>, target: f64, tol: f64) -> Self {
        match value {
            Some(v) => Self {
                name,
                passed: (v - target).abs() <= tol,
                detail: format!("{v:.4} (target {target} +- {tol})"),
            },
            None => Self {
                name,
                passed: false,
                detail: format!("not available (target {target} +- {tol})"),
            },
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("check {}: {verdict}: {}", self.name, self.detail)
    }
}

/// Applies the configured bands to whatever sections `summary` holds.
pub fn evaluate(config: &RunConfig, summary: &Summary) -> Vec<CheckLine> {
    let mut lines = Vec::new();
    if let (Some(checks), Some(s)) = (&config.checks, &summary.spectrum) {
        if let Some(m) = checks.localized_count {
            lines.push(CheckLine {
                name: "localized count".into(),
                passed: s.localized_count == m,
                detail: format!("{} (target {m})", s.localized_count),
            });
        }
        if let Some([t, tol]) = checks.mobility_edge {
            lines.push(CheckLine::band("mobility edge".into(), s.mobility_edge, t, tol));
        }
        if let Some([t, tol]) = checks.first_extended {
            lines.push(CheckLine::band("first extended energy".into(), s.first_extended_energy, t, tol));
        }
        let mode = |label: usize| s.pair.iter().find(|m| m.label == label);
        for &(label, t, tol) in &checks.energies {
            lines.push(CheckLine::band(format!("energy {label}"), mode(label).map(|m| m.energy), t, tol));
        }
        for &(label, t, tol) in &checks.ipr {
            lines.push(CheckLine::band(format!("ipr {label}"), mode(label).map(|m| m.ipr), t, tol));
        }
    }
    if let Some(checks) = &config.checks {
        if !summary.dimer.is_empty() {
            for &(g, t, tol) in &checks.thresholds {
                let value = summary.dimer.iter().find(|d| d.g == g).and_then(|d| d.threshold);
                lines.push(CheckLine::band(format!("threshold g={g}"), value, t, tol));
            }
        }
    }
    for run in &config.gpe.runs {
        let (Some(expect), Some(s)) = (run.expect, summary.gpe.iter().find(|s| s.tag == run.tag)) else {
            continue;
        };
        let name = format!("run {}", run.tag);
        lines.push(match expect {
            RunExpectation::Period { target, tolerance } => {
                CheckLine::band(format!("{name} period"), s.period.map(|p| p.0), target, tolerance)
            }
            RunExpectation::Contained { minimum } => CheckLine {
                name: format!("{name} containment"),
                passed: s.truncated_at.is_none() && s.min_containment > minimum,
                detail: format!("min {:.4} (must exceed {minimum})", s.min_containment),
            },
            RunExpectation::PeakDecay { t, fraction } => {
                let ratio = s.peak_ratio.filter(|r| (r.0 - t).abs() < 1e-9).map(|r| r.1);
                CheckLine {
                    name: format!("{name} peak decay"),
                    passed: ratio.is_some_and(|r| r < fraction),
                    detail: match ratio {
                        Some(r) => format!("peak ratio at t = {t}: {r:.4} (must stay below {fraction})"),
                        None => format!("no sample at t = {t}"),
                    },
                }
            }
        });
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(m: usize) -> SpectrumSummary {
        SpectrumSummary {
            p: 89,
            q: 55,
            localized_count: m,
            mobility_edge: Some(0.9331),
            first_extended_energy: None,
            pair: vec![ModeSummary {
                label: 32,
                energy: -0.79,
                ipr: 0.6,
                center: -1.0,
                localized: true,
            }],
        }
    }

    #[test]
    fn bands_and_missing_values() {
        let config = RunConfig::default();
        let summary = Summary {
            spectrum: Some(spectrum(89)),
            ..Summary::default()
        };
        let lines = evaluate(&config, &summary);
        let find = |n: &str| lines.iter().find(|l| l.name == n).unwrap();
        assert!(find("localized count").passed);
        assert!(find("mobility edge").passed);
        assert!(!find("first extended energy").passed);
        assert!(find("energy 32").passed);
        assert!(!find("energy 37").passed);
        assert!(!find("ipr 32").passed);
        // Stages that did not run are not judged.
        assert!(lines.iter().all(|l| !l.name.starts_with("threshold") && !l.name.starts_with("run")));
        assert!(find("ipr 32").line().starts_with("check ipr 32: FAIL: 0.6000"));
    }

    #[test]
    fn merge_keeps_untouched_sections() {
        let mut a = Summary {
            spectrum: Some(spectrum(89)),
            ..Summary::default()
        };
        let b = Summary {
            spectrum: Some(spectrum(3)),
            ..Summary::default()
        };
        a.merge(Summary::default());
        assert_eq!(a.spectrum.as_ref().unwrap().localized_count, 89);
        a.merge(b);
        assert_eq!(a.spectrum.as_ref().unwrap().localized_count, 3);
    }
}
