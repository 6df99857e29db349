//! Split-step GPE on the 89/55 approximant, checked against linear
//! evolution, conservation laws and the two-mode dimer.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use qpbec::dimer::{fixed_points, integrate_dimer, DimerCouplings, DimerState, FixedPointKind};
use qpbec::gpe::{
    add_noise, current_density, evolve, init_two_mode, GpeField, GpeSolver, Probe, ProbeSettings, RecordSettings,
};
use qpbec::hopping::build_pair_tensors;
use qpbec::potential::PotentialSpec;
use qpbec::spectrum::{compute_spectrum, SpectrumResult, SpectrumSettings};

fn reference() -> PotentialSpec {
    PotentialSpec::golden(1.5, 2.0, 0.13, 9).unwrap()
}

// Half the default resolution keeps the long runs fast; the localized
// modes are fully resolved either way.
fn spectrum() -> &'static SpectrumResult {
    static CELL: OnceLock<SpectrumResult> = OnceLock::new();
    CELL.get_or_init(|| {
        let settings = SpectrumSettings {
            grid_points: 2048,
            ..SpectrumSettings::default()
        };
        compute_spectrum(&reference(), &settings).unwrap()
    })
}

fn mode(j: usize) -> &'static [f64] {
    &spectrum().localized_mode(j).unwrap().samples
}

fn pair(n: f64, z0: f64, phi0: f64) -> GpeField {
    init_two_mode(n, z0, phi0, mode(32), mode(37), &spectrum().grid).unwrap()
}

fn solver(g: f64, dt: f64) -> GpeSolver {
    GpeSolver::new(&reference(), spectrum().grid, g, dt).unwrap()
}

fn probe() -> Probe {
    Probe::new(spectrum(), ProbeSettings::pair(32, 37)).unwrap()
}

fn l2(a: &[Complex64], b: &[Complex64], dx: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx).sqrt()
}

#[test]
fn linear_eigenstate_keeps_its_shape() {
    let grid = spectrum().grid;
    let m = spectrum().localized_mode(32).unwrap();
    let psi = m.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut field = GpeField::new(grid, psi).unwrap();
    let mut s = solver(0.0, 1e-3);
    assert!((s.energy(&field) - m.energy).abs() < 1e-8);
    s.advance(&mut field, 10_000).unwrap();
    let a = field.overlap(&m.samples);
    assert!((a.norm() - 1.0).abs() < 1e-6, "|a| = {}", a.norm());
    let expected = Complex64::from_polar(1.0, -m.energy * field.t);
    assert!((a / a.norm() - expected).norm() < 1e-3, "phase {} vs {}", a.arg(), expected.arg());
}

#[test]
fn linear_evolution_decouples_modes() {
    let mut field = pair(1.0, 0.3, 1.0);
    let p = probe();
    let (aj0, ak0) = p.project_pair(&field);
    let mut s = solver(0.0, 1e-3);
    for _ in 0..5 {
        s.advance(&mut field, 1000).unwrap();
        let (aj, ak) = p.project_pair(&field);
        assert!((aj.norm() - aj0.norm()).abs() < 1e-6);
        assert!((ak.norm() - ak0.norm()).abs() < 1e-6);
    }
}

#[test]
fn projection_inverts_two_mode_data() {
    for (z0, phi0) in [(0.0, PI), (0.451, 0.0), (-0.7, 2.0)] {
        let field = pair(2.0, z0, phi0);
        assert!((field.norm() - 2.0).abs() < 1e-10);
        let o = probe().observe(&field);
        assert!((o.z - z0).abs() < 1e-10);
        let dphi = (o.phi - phi0 + PI).rem_euclid(2.0 * PI) - PI;
        assert!(dphi.abs() < 1e-10, "{} vs {phi0}", o.phi);
    }
}

#[test]
fn real_initial_data_carries_no_current() {
    for phi0 in [0.0, PI] {
        let j = current_density(&pair(2.0, 0.451, phi0));
        assert!(j.iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn split_step_is_second_order() {
    let p = probe();
    let run = |dt: f64| {
        let mut field = pair(2.0, 0.451, 0.0);
        let mut s = solver(-1.0, dt);
        s.advance(&mut field, (1.0 / dt).round() as usize).unwrap();
        p.project_pair(&field)
    };
    let reference = run(1.0 / 1600.0);
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let (aj, ak) = run(dt);
            (aj - reference.0).norm() + (ak - reference.1).norm()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn continuity_equation_holds() {
    let mut field = pair(2.0, 0.451, 0.0);
    solver(-1.0, 1e-3).advance(&mut field, 2000).unwrap();
    let dt = 1e-4;
    let mut s = solver(-1.0, dt);
    let settings = RecordSettings {
        t_end: 2.0 * dt,
        scalar_stride: 1,
        snapshot_stride: 1,
    };
    let record = evolve(&mut s, &mut field, &probe(), &settings).unwrap();
    let snaps = &record.snapshots;
    assert_eq!(snaps.len(), 3);
    let (before, mid, after) = (snaps[0].density(), &snaps[1], snaps[2].density());
    let drho: Vec<f64> = after.iter().zip(&before).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
    let div = s.current_divergence(&mid.current);
    let dx = spectrum().grid.dx;
    let residual = (drho.iter().zip(&div).map(|(r, d)| (r + d).powi(2)).sum::<f64>() * dx).sqrt();
    let scale = drho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(residual < 1e-4 * scale, "residual {residual:e}, max drho/dt {scale:e}");
}

#[test]
fn norm_and_energy_are_conserved() {
    let mut field = pair(2.0, 0.451, 0.0);
    let settings = RecordSettings {
        t_end: 100.0,
        scalar_stride: 1000,
        snapshot_stride: 0,
    };
    let record = evolve(&mut solver(-1.0, 1e-3), &mut field, &probe(), &settings).unwrap();
    assert_eq!(record.observations.len(), 101);
    assert!(record.norm_drift() < 1e-8, "norm drift {:e}", record.norm_drift());
    assert!(record.energy_drift() < 1e-6, "energy drift {:e}", record.energy_drift());
    let times = record.times();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn time_reversal_recovers_the_initial_field() {
    let mut field = pair(2.0, 0.451, 0.0);
    add_noise(&mut field, 0.03, 2).unwrap();
    let start = field.psi.clone();
    let mut s = solver(-1.0, 1e-3);
    s.advance(&mut field, 10_000).unwrap();
    field.psi.iter_mut().for_each(|v| *v = v.conj());
    s.advance(&mut field, 10_000).unwrap();
    field.psi.iter_mut().for_each(|v| *v = v.conj());
    let err = l2(&field.psi, &start, spectrum().grid.dx) / 2f64.sqrt();
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn weak_two_mode_evolution_follows_the_dimer() {
    let spec = spectrum();
    for g in [-1.0, 1.0] {
        let tensors = build_pair_tensors(spec, g).unwrap();
        let params = DimerCouplings::from_tensors(32, 37, spec, &tensors).unwrap().with_atoms(0.3).unwrap();
        let (z0, phi0) = (0.0, PI);
        let span = 50.0;
        let dimer = integrate_dimer(&DimerState::new(z0, phi0), &params, span * params.time_scale(), 1e-3, 1).unwrap();

        let mut field = pair(0.3, z0, phi0);
        let settings = RecordSettings {
            t_end: span,
            scalar_stride: 500,
            snapshot_stride: 0,
        };
        let record = evolve(&mut solver(g, 1e-3), &mut field, &probe(), &settings).unwrap();
        let worst = record
            .observations
            .iter()
            .map(|o| {
                let i = (o.t * params.time_scale().abs() / 1e-3).round() as usize;
                (o.z - dimer.states[i.min(dimer.states.len() - 1)].z).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "g = {g}: max |z_gpe - z_dimer| = {worst}");
    }
}

fn density_drift(n: f64, z: f64, phi: f64, g: f64, t_end: f64) -> f64 {
    let mut field = pair(n, z, phi);
    let rho0 = field.density();
    solver(g, 1e-3).advance(&mut field, (t_end / 1e-3).round() as usize).unwrap();
    let rho = field.density();
    let num: f64 = rho.iter().zip(&rho0).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = rho0.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

#[test]
fn stationary_states_keep_their_density() {
    let spec = spectrum();
    let tensors = build_pair_tensors(spec, -1.0).unwrap();
    let params = DimerCouplings::from_tensors(32, 37, spec, &tensors).unwrap().with_atoms(0.5).unwrap();
    let points = fixed_points(&params);
    assert_eq!(points.len(), 4);
    for f in points {
        let drift = density_drift(0.5, f.z, f.phi(), -1.0, 100.0);
        match f.kind {
            FixedPointKind::Center => assert!(drift < 0.05, "center z = {}: drift {drift}", f.z),
            _ => assert!(drift > 0.2, "saddle z = {}: drift {drift}", f.z),
        }
    }
}

#[test]
fn noise_on_a_localized_pair_stays_in_band() {
    let clean = pair(0.3, 0.0, PI);
    let mut noisy = clean.clone();
    add_noise(&mut noisy, 0.03, 11).unwrap();
    let rel = l2(&noisy.psi, &clean.psi, spectrum().grid.dx) / 0.3f64.sqrt();
    assert!(rel > 0.005 && rel < 0.1, "relative perturbation {rel}");
    assert!((noisy.norm() - 0.3).abs() < 1e-14);
    let o = probe().observe(&noisy);
    assert!(o.leakage < 0.01 * 0.3, "leakage {}", o.leakage);
}
