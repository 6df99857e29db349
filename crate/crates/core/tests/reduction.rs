//! Hopping tensors, mode lattices and the two-mode dimer on the default
//! 89/55 approximant.

use std::sync::OnceLock;

use approx::assert_relative_eq;
use num_complex::Complex64;
use qpbec::dimer::{
    integrate_dimer, stationary_two_mode, DimerCouplings, DimerState, Stationary,
};
use qpbec::hopping::{build_pair_tensors, pair_inequality, sample_neglected_terms, HoppingTensors};
use qpbec::lattice::{
    integrate_lattice, monomer_mu, FullLattice, LatticeState, ModeLattice, ReducedLattice,
};
use qpbec::potential::PotentialSpec;
use qpbec::spectrum::{compute_spectrum, SpectrumResult, SpectrumSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> PotentialSpec {
    PotentialSpec::golden(1.5, 2.0, 0.13, 9).unwrap()
}

fn spectrum() -> &'static SpectrumResult {
    static CELL: OnceLock<SpectrumResult> = OnceLock::new();
    CELL.get_or_init(|| compute_spectrum(&reference(), &SpectrumSettings::default()).unwrap())
}

fn tensors(g: f64) -> &'static HoppingTensors {
    static ATTRACTIVE: OnceLock<HoppingTensors> = OnceLock::new();
    static REPULSIVE: OnceLock<HoppingTensors> = OnceLock::new();
    let cell = if g < 0.0 { &ATTRACTIVE } else { &REPULSIVE };
    cell.get_or_init(|| build_pair_tensors(spectrum(), g).unwrap())
}

fn random_amplitudes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn diagonal_couplings() {
    for g in [-1.0, 1.0] {
        let t = tensors(g);
        assert_eq!(t.len(), 89);
        assert_relative_eq!(t.chi_diag[31], g * 0.589, epsilon = 0.01);
        assert_relative_eq!(t.chi_diag[36], g * 0.567, epsilon = 0.01);
        for (j, mode) in spectrum().localized().iter().enumerate() {
            assert_relative_eq!(t.chi_diag[j], g * mode.ipr, max_relative = 1e-12);
            assert_eq!(t.chi_diag[j], t.chi_pair[(j, j)]);
            assert_eq!(t.chi_diag[j], t.chi_tilde[(j, j)]);
        }
        assert_eq!(t.chi_pair, t.chi_pair.transpose());
    }
    assert_relative_eq!(monomer_mu(32, 0.0, spectrum(), tensors(1.0)).unwrap(), -0.790, epsilon = 0.01);
    assert_relative_eq!(monomer_mu(32, 1.0, spectrum(), tensors(1.0)).unwrap(), -0.201, epsilon = 0.02);
    assert_relative_eq!(monomer_mu(32, 1.0, spectrum(), tensors(-1.0)).unwrap(), -1.379, epsilon = 0.02);
}

#[test]
fn pair_inequalities_hold_for_every_pair() {
    let t = tensors(1.0);
    let grid = &spectrum().grid;
    let m = t.len();
    let mut signed_exceptions = Vec::new();
    for j in 1..=m {
        let fj = &spectrum().localized_mode(j).unwrap().samples;
        for k in 1..=m {
            let (lhs, rhs) = pair_inequality(spectrum(), j, k).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "pair ({j},{k}): {lhs} > {rhs}");

            // Consequence: one of the absolute three-one overlaps beats |chi_jk|.
            let fk = &spectrum().localized_mode(k).unwrap().samples;
            let left = grid.integrate(fj.iter().zip(fk).map(|(x, y)| (x.powi(3) * y).abs()));
            let right = grid.integrate(fj.iter().zip(fk).map(|(x, y)| (x * y.powi(3)).abs()));
            let (a, b) = (j - 1, k - 1);
            assert!(left.max(right) >= t.chi_pair[(a, b)].abs() * (1.0 - 1e-12));

            // The signed tensors can cancel; record where they do.
            if j < k && t.chi_tilde[(a, b)].abs().max(t.chi_tilde[(b, a)].abs()) < t.chi_pair[(a, b)].abs() {
                signed_exceptions.push((j, k));
            }
        }
    }
    println!("pairs with both |chi~| below |chi|: {signed_exceptions:?}");
    assert_eq!(signed_exceptions.len(), 16);
}

#[test]
fn pair_32_37_couplings() {
    let t = tensors(-1.0);
    let (a, b) = (31, 36);
    assert_relative_eq!(t.chi_pair[(a, b)], -0.105413, epsilon = 1e-5);
    assert_relative_eq!(t.chi_tilde[(a, b)], 0.165673, epsilon = 1e-5);
    assert_relative_eq!(t.chi_tilde[(b, a)], -0.148825, epsilon = 1e-5);

    let sparse = t.sparsify(0.01).unwrap();
    assert!(sparse.neighbors.as_ref().unwrap()[a].contains(&b));
    let top: Vec<usize> = t.ranked_partners(a).iter().take(3).map(|p| p.0).collect();
    println!("strongest partners of mode 32: {:?}", top.iter().map(|k| k + 1).collect::<Vec<_>>());
    assert!(t.coupling(a, b) > 0.01);
    let average = sparse.neighbors.as_ref().unwrap().iter().map(Vec::len).sum::<usize>() as f64 / 89.0;
    println!("average neighbors at cutoff 0.01: {average:.2}");
    assert!(average < 20.0);
}

#[test]
fn quadrature_is_converged() {
    let fine = compute_spectrum(
        &reference(),
        &SpectrumSettings {
            grid_points: 8192,
            ..Default::default()
        },
    )
    .unwrap();
    let coarse = tensors(1.0);
    let refined = build_pair_tensors(&fine, 1.0).unwrap();
    let pair = (&coarse.chi_pair - &refined.chi_pair).abs().max();
    let tilde = (&coarse.chi_tilde - &refined.chi_tilde).abs().max();
    assert!(pair < 1e-9 && tilde < 1e-9, "pair {pair:e} tilde {tilde:e}");
}

#[test]
fn neglected_terms_are_small() {
    let report = sample_neglected_terms(spectrum(), 1.0, 1000, 7).unwrap();
    println!(
        "largest of {} sampled 3-/4-index integrals: {:.3e} at {:?} (smallest diagonal {:.3})",
        report.samples, report.max_abs, report.argmax, report.min_diagonal
    );
    assert!(report.max_abs < report.min_diagonal);
}

#[test]
fn lattice_special_states() {
    let t = tensors(-1.0);
    let lattice = ReducedLattice::new(spectrum(), t, &[32, 37, 40], 0.0).unwrap();
    let mut out = vec![Complex64::new(1.0, 1.0); 3];
    lattice.rhs(&[Complex64::default(); 3], &mut out);
    assert!(out.iter().all(|v| *v == Complex64::default()));

    let n = 0.8;
    let mu = monomer_mu(32, n, spectrum(), t).unwrap();
    let monomer = ReducedLattice::new(spectrum(), t, &[32], mu).unwrap();
    let a0 = vec![Complex64::new(n.sqrt(), 0.0)];
    monomer.rhs(&a0, &mut out[..1]);
    assert!(out[0].norm() < 1e-15);
    let traj = integrate_lattice(&monomer, &LatticeState::new(a0.clone()), 50.0, 1e-3, 1000).unwrap();
    for row in &traj.amplitudes {
        assert!((row[0].norm() - n.sqrt()).abs() < 1e-10);
    }

    // Without interactions every site only rotates its phase.
    let free = build_pair_tensors(spectrum(), 0.0).unwrap();
    let lattice = ReducedLattice::new(spectrum(), &free, &[1, 32, 37, 89], 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_amplitudes(&mut rng, 4);
    let traj = integrate_lattice(&lattice, &LatticeState::new(a.clone()), 20.0, 1e-3, 500).unwrap();
    for row in &traj.amplitudes {
        for (x, y) in row.iter().zip(&a) {
            assert!((x.norm() - y.norm()).abs() < 1e-10);
        }
    }
}

#[test]
fn reduced_and_full_lattices_agree_on_two_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in [-1.0, 1.0] {
        let reduced = ReducedLattice::new(spectrum(), tensors(g), &[32, 37], 0.3).unwrap();
        let full = FullLattice::new(spectrum(), g, &[32, 37], 0.3).unwrap();
        for _ in 0..20 {
            let a = random_amplitudes(&mut rng, 2);
            let (mut r, mut f) = (vec![Complex64::default(); 2], vec![Complex64::default(); 2]);
            reduced.rhs(&a, &mut r);
            full.rhs(&a, &mut f);
            assert!(max_diff(&r, &f) < 1e-14, "{r:?} vs {f:?}");
        }
    }
    // A single site collapses to the monomer equation.
    let full = FullLattice::new(spectrum(), -1.0, &[5], 0.0).unwrap();
    let a = [Complex64::new(0.3, -0.4)];
    let mut f = [Complex64::default()];
    full.rhs(&a, &mut f);
    let mode = spectrum().localized_mode(5).unwrap();
    let expected = -Complex64::i() * (mode.energy + tensors(-1.0).chi_diag[4] * a[0].norm_sqr()) * a[0];
    assert!((f[0] - expected).norm() < 1e-15);
}

#[test]
fn full_lattice_conserves_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(1..=89)).collect::<Vec<_>>();
    let mut labels = labels;
    labels.sort_unstable();
    labels.dedup();
    let full = FullLattice::new(spectrum(), 1.0, &labels, -0.2).unwrap();
    for _ in 0..10 {
        let a = random_amplitudes(&mut rng, labels.len());
        let mut da = vec![Complex64::default(); a.len()];
        full.rhs(&a, &mut da);
        let dnorm: f64 = a.iter().zip(&da).map(|(x, d)| 2.0 * (x.conj() * d).re).sum();
        assert!(dnorm.abs() < 1e-12, "d|a|^2/dt = {dnorm:e}");
    }
    assert!(FullLattice::new(spectrum(), 1.0, &(1..=13).collect::<Vec<_>>(), 0.0).is_err());
}

#[test]
fn whole_lattice_norm_and_reversibility() {
    let t = tensors(-1.0).sparsify(0.01).unwrap();
    let lattice = ReducedLattice::all_modes(spectrum(), &t, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<Complex64> = random_amplitudes(&mut rng, 89).into_iter().map(|v| v * 0.1).collect();
    let start = LatticeState::new(a.clone());
    let n0 = start.norm();
    let traj = integrate_lattice(&lattice, &start, 100.0, 1e-3, 10_000).unwrap();
    let drift = traj
        .amplitudes
        .iter()
        .map(|row| (row.iter().map(|v| v.norm_sqr()).sum::<f64>() - n0).abs() / n0)
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "norm drift {drift:e}");

    // Conjugation reverses time for real tensors.
    let forward = integrate_lattice(&lattice, &start, 10.0, 1e-3, 10_000).unwrap();
    let turned: Vec<Complex64> = forward.amplitudes.last().unwrap().iter().map(|v| v.conj()).collect();
    let back = integrate_lattice(&lattice, &LatticeState::new(turned), 10.0, 1e-3, 10_000).unwrap();
    let end: Vec<Complex64> = back.amplitudes.last().unwrap().iter().map(|v| v.conj()).collect();
    assert!(max_diff(&end, &a) < 1e-6);
}

/// Lattice oracle for the dimer: the ansatz mapped through the two-mode
/// reduced lattice must reproduce `(z, phi, theta)`.
#[test]
fn dimer_matches_two_mode_lattice() {
    for (g, n, z0, phi0) in [(-1.0, 0.7, 0.3, 0.4), (-1.0, 2.0, 0.1, 2.5), (1.0, 1.3, -0.6, -1.0)] {
        let couplings = DimerCouplings::from_tensors(32, 37, spectrum(), tensors(g)).unwrap();
        let p = couplings.with_atoms(n).unwrap();
        let scale = p.time_scale();
        let t_end = 10.0 / scale.abs();
        let steps = 20_000;
        let dt = t_end / steps as f64;
        let stride = 200;

        let s0 = DimerState::new(z0, phi0);
        let (aj, ak) = p.amplitudes(&s0);
        let lattice = ReducedLattice::new(spectrum(), tensors(g), &[32, 37], p.frame_mu()).unwrap();
        let lat = integrate_lattice(&lattice, &LatticeState::new(vec![aj, ak]), t_end, dt, stride).unwrap();
        let dim = integrate_dimer(&s0, &p, scale * t_end, dt * scale.abs(), stride).unwrap();
        assert_eq!(lat.amplitudes.len(), dim.states.len());

        let mut worst = 0.0f64;
        for (row, s) in lat.amplitudes.iter().zip(&dim.states) {
            let (bj, bk) = p.amplitudes(s);
            worst = worst.max((row[0] - bj).norm()).max((row[1] - bk).norm());
            let z = (row[0].norm_sqr() - row[1].norm_sqr()) / n;
            assert!((z - s.z).abs() < 1e-6);
        }
        assert!(worst < 1e-6, "amplitude mismatch {worst:e} for g = {g}, N = {n}");
        assert!(dim.energy_drift() < 1e-10);
    }
}

#[test]
fn stationary_states_are_lattice_fixed_points() {
    for g in [-1.0, 1.0] {
        let couplings = DimerCouplings::from_tensors(32, 37, spectrum(), tensors(g)).unwrap();
        let mut checked = 0;
        for i in 1..200 {
            let z = -1.0 + i as f64 / 100.0;
            for sigma in [1i8, -1] {
                let Stationary::Physical { n, mu } = stationary_two_mode(z, sigma, &couplings).unwrap() else {
                    continue;
                };
                if n > 50.0 {
                    continue;
                }
                let a = vec![
                    Complex64::new((n * (1.0 + z) / 2.0).sqrt(), 0.0),
                    Complex64::new(sigma as f64 * (n * (1.0 - z) / 2.0).sqrt(), 0.0),
                ];
                let lattice = ReducedLattice::new(spectrum(), tensors(g), &[32, 37], mu).unwrap();
                let mut da = vec![Complex64::default(); 2];
                lattice.rhs(&a, &mut da);
                let size = da[0].norm().max(da[1].norm());
                assert!(size < 1e-10, "g {g} z {z} sigma {sigma}: |da/dt| = {size:e}");

                // The same state is a fixed point of the dimer, rotating with
                // the chemical potential found above.
                let p = couplings.with_atoms(n).unwrap();
                let s = DimerState::new(z, if sigma > 0 { 0.0 } else { std::f64::consts::PI });
                let (dz, dphi) = qpbec::dimer::rhs(&s, &p).unwrap();
                assert!(dz.abs() < 1e-10 && dphi.abs() < 1e-8 * (1.0 + p.nu.abs()));
                assert_relative_eq!(p.stationary_mu(&s), mu, epsilon = 1e-10 * (1.0 + n));
                checked += 1;
            }
        }
        assert!(checked > 100);
    }
}
