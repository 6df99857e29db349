//! The four pipeline stages. Each writes one directory under the output
//! root and returns its part of the summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use qpbec::dimer::{compare_stationary_conditions, fixed_points, phase_portrait, trace_families, DimerCouplings, FixedPointKind, PortraitSettings};
use qpbec::gpe::{oscillation_period, write_snapshot, ProbeSettings, RecordSettings, SnapshotHeader, TrajectoryRecord, TwoModeRun};
use qpbec::hopping::{build_pair_tensors, HoppingTensors};
use qpbec::spectrum::{compute_spectrum, SpectrumResult};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{config_hash, csv, write_json, Cell, Dataset, DatasetWriter, FORMAT_VERSION};
use crate::summary::{DimerSummary, GpeSummary, HoppingSummary, ModeSummary, PortraitSummary, SpectrumSummary, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Spectrum,
    Hopping,
    Dimer,
    Gpe,
    Pipeline,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::Spectrum, Stage::Hopping, Stage::Dimer, Stage::Gpe];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spectrum => "spectrum",
            Stage::Hopping => "hopping",
            Stage::Dimer => "dimer",
            Stage::Gpe => "gpe",
            Stage::Pipeline => "pipeline",
        }
    }

    /// Stages actually executed for this request, in order.
    pub fn expand(self) -> Vec<Stage> {
        match self {
            Stage::Pipeline => Self::ORDER.to_vec(),
            s => vec![s],
        }
    }
}

/// `g-1`, `g+1`, `g+0.5`: directory names per interaction strength.
pub fn g_tag(g: f64) -> String {
    format!("g{g:+}")
}

fn n_tag(n: f64) -> String {
    format!("N{n}")
}

/// Runs stages against one output directory, keeping the spectrum and the
/// tensors in memory once built or loaded.
pub struct Runner {
    pub config: RunConfig,
    pub out: PathBuf,
    spectrum: Option<SpectrumResult>,
    tensors: Vec<HoppingTensors>,
    log: Box<dyn FnMut(&str)>,
}

impl Runner {
    pub fn new(config: RunConfig) -> Self {
        Self::with_log(config, Box::new(|line| println!("{line}")))
    }

    /// A runner that hands every report line to `log` instead of stdout.
    pub fn with_log(config: RunConfig, log: Box<dyn FnMut(&str)>) -> Self {
        let out = config.output.clone();
        Self {
            config,
            out,
            spectrum: None,
            tensors: Vec::new(),
            log,
        }
    }

    fn say(&mut self, line: impl AsRef<str>) {
        (self.log)(line.as_ref())
    }

    pub fn run(&mut self, stage: Stage) -> Result<Summary, CliError> {
        let mut summary = Summary::default();
        for s in stage.expand() {
            match s {
                Stage::Spectrum => summary.spectrum = Some(self.spectrum_stage()?),
                Stage::Hopping => summary.hopping = self.hopping_stage()?,
                Stage::Dimer => summary.dimer = self.dimer_stage()?,
                Stage::Gpe => summary.gpe = self.gpe_stage()?,
                Stage::Pipeline => unreachable!("expanded above"),
            }
        }
        Ok(summary)
    }

    /// Lines describing what `stage` would do, with cache status.
    pub fn plan(&self, stage: Stage) -> Vec<String> {
        let c = &self.config;
        let mut lines = vec![format!("output directory {}", self.out.display())];
        for s in stage.expand() {
            lines.push(match s {
                Stage::Spectrum => {
                    let status = match Dataset::open(&self.out.join("spectrum"), &self.spectrum_hash()) {
                        Ok(_) => "cached".to_string(),
                        Err(reason) => format!("compute ({reason})"),
                    };
                    format!(
                        "spectrum: order {} approximant, cutoff {}, grid {}, {} modes [{status}]",
                        c.potential.order, c.spectrum.cutoff, c.spectrum.grid_points, c.spectrum.mode_count
                    )
                }
                Stage::Hopping => format!("hopping: tensors for g in {:?}", c.couplings),
                Stage::Dimer => format!(
                    "dimer: pair {:?}, families at resolution {}, portraits at N in {:?}",
                    c.pair, c.dimer.family_resolution, c.dimer.n_values
                ),
                Stage::Gpe => {
                    let runs: Vec<String> = c.gpe.runs.iter().map(|r| format!("{} (T = {})", r.tag, r.t_end)).collect();
                    format!("gpe: dt {}, noise {}, seed {}, runs [{}]", c.gpe.dt, c.gpe.noise, c.gpe.seed, runs.join(", "))
                }
                Stage::Pipeline => unreachable!("expanded above"),
            });
        }
        lines
    }

    fn spectrum_hash(&self) -> String {
        let c = &self.config;
        config_hash(&serde_json::json!({
            "format": FORMAT_VERSION,
            "potential": c.potential,
            "spectrum": c.spectrum,
        }))
    }

    fn hopping_hash(&self, g: f64) -> String {
        config_hash(&serde_json::json!({"spectrum": self.spectrum_hash(), "g": g}))
    }

    /// The spectrum from cache when valid, else freshly computed and cached.
    pub fn spectrum(&mut self) -> Result<&SpectrumResult, CliError> {
        if self.spectrum.is_none() {
            let loaded = self.load_spectrum()?;
            self.spectrum = Some(loaded);
        }
        Ok(self.spectrum.as_ref().expect("filled above"))
    }

    fn load_spectrum(&mut self) -> Result<SpectrumResult, CliError> {
        let dir = self.out.join("spectrum");
        let hash = self.spectrum_hash();
        match Dataset::open(&dir, &hash).and_then(|d| read_spectrum(&d)) {
            Ok(s) => {
                self.say(format!("spectrum: reusing cache in {}", dir.display()));
                return Ok(s);
            }
            Err(reason) if reason != "no manifest" => {
                self.say(format!("spectrum: cache ignored ({reason}); recomputing"));
            }
            Err(_) => {}
        }
        let spec = self.config.potential_spec()?;
        let result = compute_spectrum(&spec, &self.config.spectrum_settings()).map_err(CliError::numerical("spectrum"))?;
        write_spectrum(&dir, hash, &result)?;
        Ok(result)
    }

    fn spectrum_stage(&mut self) -> Result<SpectrumSummary, CliError> {
        let pair = self.config.pair;
        let s = self.spectrum()?;
        let summary = SpectrumSummary {
            p: s.spec.p,
            q: s.spec.q,
            localized_count: s.localized_count,
            mobility_edge: s.mobility_edge,
            first_extended_energy: s.first_extended_energy,
            pair: pair
                .iter()
                .filter_map(|&j| s.mode(j).ok())
                .map(|m| ModeSummary {
                    label: m.index,
                    energy: m.energy,
                    ipr: m.ipr,
                    center: m.com.x,
                    localized: m.localized,
                })
                .collect(),
        };
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.4}"));
        self.say(format!(
            "M={} mobility_edge={} first_extended={}",
            summary.localized_count,
            opt(summary.mobility_edge),
            opt(summary.first_extended_energy)
        ));
        for m in &summary.pair {
            self.say(format!(
                "  mode {}: energy {:.4}, ipr {:.4}, center {:.3}{}",
                m.label,
                m.energy,
                m.ipr,
                m.center,
                if m.localized { "" } else { " (extended)" }
            ));
        }
        Ok(summary)
    }

    /// Rejects a pair that is not made of localized modes.
    fn check_pair(&mut self) -> Result<(), CliError> {
        let [j, k] = self.config.pair;
        let s = self.spectrum()?;
        for label in [j, k] {
            if s.localized_mode(label).is_err() {
                return Err(CliError::Config(format!(
                    "pair ({j}, {k}) is not localized: only {} localized modes",
                    s.localized_count
                )));
            }
        }
        Ok(())
    }

    /// Tensors for every configured coupling, from cache when valid.
    pub fn tensors(&mut self) -> Result<&[HoppingTensors], CliError> {
        if self.tensors.is_empty() {
            for g in self.config.couplings.clone() {
                let t = self.load_tensors(g)?;
                self.tensors.push(t);
            }
        }
        Ok(&self.tensors)
    }

    fn load_tensors(&mut self, g: f64) -> Result<HoppingTensors, CliError> {
        let dir = self.out.join("hopping").join(g_tag(g));
        let hash = self.hopping_hash(g);
        match Dataset::open(&dir, &hash).and_then(|d| read_tensors(&d, g)) {
            Ok(t) => {
                self.say(format!("hopping {}: reusing cache", g_tag(g)));
                return Ok(t);
            }
            Err(reason) if reason != "no manifest" => {
                self.say(format!("hopping {}: cache ignored ({reason}); recomputing", g_tag(g)));
            }
            Err(_) => {}
        }
        let tensors = build_pair_tensors(self.spectrum()?, g).map_err(CliError::numerical("hopping"))?;
        write_tensors(&dir, hash, &tensors)?;
        Ok(tensors)
    }

    fn couplings(&mut self) -> Result<Vec<DimerCouplings>, CliError> {
        self.check_pair()?;
        let [j, k] = self.config.pair;
        self.tensors()?;
        let s = self.spectrum.as_ref().expect("loaded by check_pair");
        self.tensors
            .iter()
            .map(|t| DimerCouplings::from_tensors(j, k, s, t).map_err(CliError::numerical("dimer")))
            .collect()
    }

    fn hopping_stage(&mut self) -> Result<Vec<HoppingSummary>, CliError> {
        let couplings = self.couplings().map_err(|e| match e {
            CliError::Numerical { source, .. } => CliError::Numerical { stage: "hopping", source },
            e => e,
        })?;
        let mut out = Vec::new();
        for c in couplings {
            self.say(format!(
                "hopping {}: chi_j {:.4}, chi_k {:.4}, chi_jk {:.4e}, chi~_jk {:.4e}, chi~_kj {:.4e}",
                g_tag(c.g),
                c.chi_j,
                c.chi_k,
                c.chi_jk,
                c.chit_jk,
                c.chit_kj
            ));
            out.push(HoppingSummary {
                g: c.g,
                chi_j: c.chi_j,
                chi_k: c.chi_k,
                chi_jk: c.chi_jk,
                chi_tilde_jk: c.chit_jk,
                chi_tilde_kj: c.chit_kj,
            });
        }
        Ok(out)
    }

    fn dimer_stage(&mut self) -> Result<Vec<DimerSummary>, CliError> {
        let all = self.couplings()?;
        let d = self.config.dimer.clone();
        let mut out = Vec::new();
        for c in all {
            let dir = self.out.join("dimer").join(g_tag(c.g));
            let hash = config_hash(&serde_json::json!({
                "hopping": self.hopping_hash(c.g),
                "pair": self.config.pair,
                "dimer": d,
            }));
            let mut w = DatasetWriter::new(&dir, "dimer", hash)?;
            let families = trace_families(&c, &[1, -1], d.family_resolution).map_err(CliError::numerical("dimer"))?;
            let mut text = Vec::new();
            families.write_csv(&mut text).map_err(CliError::io(dir.join("families.csv")))?;
            w.text("families.csv", text)?;
            w.json("couplings.json", &c)?;
            let threshold = families.threshold();
            self.say(format!(
                "dimer {}: N_th = {}",
                g_tag(c.g),
                threshold.map_or("none".to_string(), |n| format!("{n:.4}"))
            ));

            let mut portraits = Vec::new();
            for &n in &d.n_values {
                let params = c.with_atoms(n).map_err(CliError::numerical("dimer"))?;
                let settings = PortraitSettings {
                    phi_points: d.portrait_points,
                    z_points: d.portrait_points,
                    orbit_span: d.orbit_span,
                    dtau: d.dtau,
                    ..PortraitSettings::default()
                };
                let portrait = phase_portrait(&params, &settings).map_err(CliError::numerical("dimer"))?;
                let mut grid = Vec::new();
                portrait
                    .write_grid_csv(&mut grid)
                    .map_err(CliError::io(dir.join("portrait.csv")))?;
                w.text(&format!("portrait-{}.csv", n_tag(n)), grid)?;
                let rows = portrait.orbits.iter().enumerate().flat_map(|(i, o)| {
                    let rotation = i64::from(o.is_rotation());
                    o.trajectory.states.iter().zip(&o.trajectory.energies).map(move |(s, h)| {
                        vec![Cell::I(i as i64), Cell::I(rotation), Cell::F(s.tau), Cell::F(s.z), Cell::F(s.phi), Cell::F(*h)]
                    })
                });
                w.text(&format!("orbits-{}.csv", n_tag(n)), csv("orbit,rotation,tau,z,phi,H", rows))?;

                let points = fixed_points(&params);
                let conditions = compare_stationary_conditions(&params);
                let mut line = format!("  N = {n}: {} fixed points:", points.len());
                for f in &points {
                    let kind = match f.kind {
                        FixedPointKind::Center => "center",
                        FixedPointKind::Saddle => "saddle",
                        FixedPointKind::Degenerate => "degenerate",
                    };
                    let _ = write!(line, " {kind} (phi {:.2}, z {:.4})", f.phi(), f.z);
                }
                self.say(line);
                let worst = |f: fn(&qpbec::dimer::ConditionCheck) -> f64| {
                    conditions.iter().map(|x| f(x).abs()).fold(0.0, f64::max)
                };
                self.say(format!(
                    "  N = {n}: stationarity residual {:.1e} (derived), {:.3e} (printed closed form)",
                    worst(|x| x.derived_residual),
                    worst(|x| x.printed_residual)
                ));
                portraits.push(PortraitSummary {
                    n,
                    fixed_points: points,
                    conditions,
                });
            }
            w.json("fixed_points.json", &portraits)?;
            w.finish()?;
            out.push(DimerSummary {
                g: c.g,
                threshold,
                asymptotes: families.asymptotes.clone(),
                portraits,
            });
        }
        Ok(out)
    }

    fn gpe_stage(&mut self) -> Result<Vec<GpeSummary>, CliError> {
        if self.config.gpe.runs.is_empty() {
            return Ok(Vec::new());
        }
        self.check_pair()?;
        let runs = self.config.gpe.runs.clone();
        let mut out = Vec::new();
        for run in &runs {
            let (summary, truncated) = self.gpe_run(run)?;
            out.push(summary);
            if let Some(t) = truncated {
                return Err(CliError::Truncated {
                    tag: run.tag.clone(),
                    t,
                    dir: self.out.join("gpe").join(format!("run-{}", run.tag)),
                });
            }
        }
        Ok(out)
    }

    fn gpe_run(&mut self, run: &crate::config::GpeRun) -> Result<(GpeSummary, Option<f64>), CliError> {
        let [j, k] = self.config.pair;
        let gc = self.config.gpe.clone();
        let (scalar_stride, snapshot_stride) = self.config.gpe_strides();
        let job = TwoModeRun {
            g: run.g,
            n: run.n,
            z0: run.z0,
            phi0: run.phi0,
            noise: gc.noise,
            seed: gc.seed,
            dt: gc.dt,
            record: RecordSettings {
                t_end: run.t_end,
                scalar_stride,
                snapshot_stride,
            },
            probe: ProbeSettings {
                containment_radius: gc.containment_radius,
                ..ProbeSettings::pair(j, k)
            },
        };
        let spectrum_hash = self.spectrum_hash();
        let spectrum = self.spectrum()?;
        let grid = spectrum.grid;
        let (record, truncated) = match job.run(spectrum) {
            Ok(r) => (r, None),
            Err(qpbec::Error::Truncated { t, partial }) => (*partial, Some(t)),
            Err(e) => return Err(CliError::numerical("gpe")(e)),
        };

        let root = self.out.join("gpe");
        let dir = root.join(format!("run-{}", run.tag));
        let hash = config_hash(&serde_json::json!({"spectrum": spectrum_hash, "pair": [j, k], "job": job}));
        let mut w = DatasetWriter::new(&dir, "gpe", hash)?;
        w.json("run.json", &job)?;
        let mut scalars = Vec::new();
        record.write_csv(&mut scalars).map_err(CliError::numerical("gpe"))?;
        w.text("scalars.csv", scalars)?;
        let parameters = serde_json::json!({"tag": run.tag, "N": run.n, "z0": run.z0, "phi0": run.phi0, "seed": gc.seed});
        for snap in &record.snapshots {
            let header = SnapshotHeader {
                grid,
                t: snap.t,
                index: snap.index,
                g: run.g,
                parameters: parameters.clone(),
            };
            let bin = write_snapshot(&root, &run.tag, &header, &snap.psi).map_err(CliError::numerical("gpe"))?;
            let stem = bin.file_stem().and_then(|s| s.to_str()).expect("snapshot names are ascii");
            w.record(&format!("{stem}.bin"));
            w.record(&format!("{stem}.json"));
        }
        let count = record.snapshots.len();
        let times: Vec<f64> = record.snapshots.iter().map(|s| s.t).collect();
        let current: Vec<f64> = record.snapshots.iter().flat_map(|s| s.current.iter().copied()).collect();
        w.array("current.bin", "snapshot_times", &[count], &times);
        w.array("current.bin", "current", &[count, grid.points], &current);
        if let Some(t) = truncated {
            w.text("TRUNCATED", format!("non-finite field at t = {t}\n"))?;
        }
        w.finish()?;

        let summary = describe(run, gc.seed, &record, truncated);
        let name = &run.tag;
        match summary.period {
            Some((mean, std, maxima)) => self.say(format!("gpe {name}: T_osc = {mean:.2} +- {std:.2} ({maxima} maxima)")),
            None => self.say(format!("gpe {name}: no period detected / quasi-stationary")),
        }
        let mut report = format!(
            "  window fractions >= {:.4}, norm within {} of the centers >= {:.4}, leakage <= {:.3e}, norm drift {:.1e}",
            summary.min_window_fraction, gc.containment_radius, summary.min_containment, summary.max_leakage, summary.norm_drift
        );
        if let Some((t, r)) = summary.peak_ratio {
            let _ = write!(report, ", peak density at t = {t} / initial {r:.3}");
        }
        self.say(report);
        if let Some(t) = truncated {
            self.say(format!("  truncated at t = {t}; partial data in {}", dir.display()));
        }
        Ok((summary, truncated))
    }
}

fn describe(run: &crate::config::GpeRun, seed: u64, record: &TrajectoryRecord, truncated: Option<f64>) -> GpeSummary {
    let period = oscillation_period(&record.times(), &record.window_imbalance())
        .ok()
        .map(|p| (p.mean, p.std, p.maxima));
    let probe_t = match run.expect {
        Some(crate::config::RunExpectation::PeakDecay { t, .. }) => t,
        _ => run.t_end,
    };
    GpeSummary {
        tag: run.tag.clone(),
        g: run.g,
        n: run.n,
        z0: run.z0,
        phi0: run.phi0,
        seed,
        t_end: run.t_end,
        period,
        min_containment: record.min_containment(),
        min_window_fraction: record.min_window_fraction(),
        max_leakage: record.max_leakage(),
        norm_drift: record.norm_drift(),
        energy_drift: record.energy_drift(),
        peak_ratio: record.peak_ratio_at(probe_t).map(|r| (probe_t, r)),
        truncated_at: truncated,
    }
}

fn write_spectrum(dir: &Path, hash: String, s: &SpectrumResult) -> Result<(), CliError> {
    let mut w = DatasetWriter::new(dir, "spectrum", hash)?;
    let count = s.modes.len();
    let points = s.grid.points;
    let rows = s.modes.iter().map(|m| {
        vec![
            Cell::I(m.index as i64),
            Cell::F(m.energy),
            Cell::F(m.ipr),
            Cell::F(m.com.x),
            Cell::I(i64::from(m.localized)),
        ]
    });
    w.text("modes.csv", csv("j,energy,ipr,x,localized", rows))?;
    let mut stripped = s.clone();
    stripped.modes.iter_mut().for_each(|m| m.samples = Vec::new());
    w.json("spectrum.json", &stripped)?;
    let x: Vec<f64> = s.grid.coords().collect();
    w.array("modes.bin", "x", &[points], &x);
    w.array("modes.bin", "potential", &[points], &s.spec.sample_grid(&s.grid));
    w.array("modes.bin", "energy", &[count], &s.energies());
    w.array("modes.bin", "ipr", &[count], &s.modes.iter().map(|m| m.ipr).collect::<Vec<_>>());
    w.array("modes.bin", "center", &[count], &s.modes.iter().map(|m| m.com.x).collect::<Vec<_>>());
    let samples: Vec<f64> = s.modes.iter().flat_map(|m| m.samples.iter().copied()).collect();
    w.array("modes.bin", "samples", &[count, points], &samples);
    w.finish()?;
    Ok(())
}

fn read_spectrum(d: &Dataset) -> Result<SpectrumResult, String> {
    let mut s: SpectrumResult = d.json("spectrum.json")?;
    let (shape, samples) = d.array("samples")?;
    if shape != [s.modes.len(), s.grid.points] {
        return Err(format!("samples have shape {shape:?}"));
    }
    for (m, row) in s.modes.iter_mut().zip(samples.chunks_exact(shape[1].max(1))) {
        m.samples = row.to_vec();
    }
    Ok(s)
}

fn write_tensors(dir: &Path, hash: String, t: &HoppingTensors) -> Result<(), CliError> {
    let mut w = DatasetWriter::new(dir, "hopping", hash)?;
    let m = t.len();
    let rows = (0..m).flat_map(|j| {
        (0..m).map(move |k| {
            vec![
                Cell::I(j as i64 + 1),
                Cell::I(k as i64 + 1),
                Cell::F(t.chi_pair[(j, k)]),
                Cell::F(t.chi_tilde[(j, k)]),
            ]
        })
    });
    w.text("tensors.csv", csv("j,k,chi,chi_tilde", rows))?;
    let row_major = |a: &DMatrix<f64>| a.transpose().as_slice().to_vec();
    w.array("tensors.bin", "chi_diag", &[m], &t.chi_diag);
    w.array("tensors.bin", "chi_pair", &[m, m], &row_major(&t.chi_pair));
    w.array("tensors.bin", "chi_tilde", &[m, m], &row_major(&t.chi_tilde));
    w.finish()?;
    Ok(())
}

fn read_tensors(d: &Dataset, g: f64) -> Result<HoppingTensors, String> {
    let (_, chi_diag) = d.array("chi_diag")?;
    let m = chi_diag.len();
    let matrix = |name: &str| -> Result<DMatrix<f64>, String> {
        let (shape, data) = d.array(name)?;
        if shape != [m, m] {
            return Err(format!("{name} has shape {shape:?}"));
        }
        Ok(DMatrix::from_row_slice(m, m, &data))
    };
    Ok(HoppingTensors {
        g,
        chi_diag,
        chi_pair: matrix("chi_pair")?,
        chi_tilde: matrix("chi_tilde")?,
        neighbors: None,
        sparse_cutoff: None,
    })
}

/// Merges `summary` into `<out>/summary.json`.
pub fn update_summary(out: &Path, summary: Summary) -> Result<Summary, CliError> {
    let path = out.join("summary.json");
    let mut all: Summary = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    all.merge(summary);
    write_json(&path, &all)?;
    Ok(all)
}
