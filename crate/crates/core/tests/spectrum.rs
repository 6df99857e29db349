use std::time::Instant;

use approx::assert_relative_eq;
use qpbec::potential::PotentialSpec;
use qpbec::spectrum::{
    build_hamiltonian, compute_spectrum, grid_residual, solve_modes, BasisSettings, SpectrumSettings,
};

fn reference() -> PotentialSpec {
    PotentialSpec::golden(1.5, 2.0, 0.13, 9).unwrap()
}

#[test]
fn reference_spectrum_landmarks() {
    let start = Instant::now();
    let result = compute_spectrum(&reference(), &SpectrumSettings::default()).unwrap();
    println!("spectrum solved in {:?}", start.elapsed());

    assert_eq!(result.localized_count, 89);
    assert_relative_eq!(result.mobility_edge.unwrap(), 0.9330, epsilon = 0.01);
    assert_relative_eq!(result.first_extended_energy.unwrap(), 2.181, epsilon = 0.05);
    assert_relative_eq!(result.mode(32).unwrap().energy, -0.790, epsilon = 0.01);
    assert_relative_eq!(result.mode(37).unwrap().energy, -0.647, epsilon = 0.01);
    assert!(result.first_extended_energy.unwrap() - result.mobility_edge.unwrap() > 1.0);

    let grid = result.grid;
    for mode in result.localized() {
        assert!(mode.imag_residual < 1e-8, "mode {} residual {}", mode.index, mode.imag_residual);
        let norm = grid.integrate(mode.samples.iter().map(|v| v * v));
        assert_relative_eq!(norm, 1.0, epsilon = 1e-10);
        assert!(mode.ipr > 0.1);
    }
    // Bimodal IPRs: nothing sits near the default threshold.
    for mode in &result.modes[89..] {
        assert!(mode.ipr < 0.02, "extended mode {} has ipr {}", mode.index, mode.ipr);
    }

    // Orthonormality of the localized set.
    let local = result.localized();
    let mut worst = 0.0f64;
    for a in local {
        for b in local {
            let overlap = grid.integrate(a.samples.iter().zip(&b.samples).map(|(x, y)| x * y));
            let target = if a.index == b.index { 1.0 } else { 0.0 };
            worst = worst.max((overlap - target).abs());
        }
    }
    assert!(worst < 1e-9, "orthonormality defect {worst}");
}

#[test]
fn galerkin_modes_satisfy_the_grid_operator() {
    let spec = reference();
    let settings = SpectrumSettings::default();
    let h = build_hamiltonian(&spec, &settings.basis).unwrap();
    let pairs = solve_modes(&h, 40).unwrap();
    for (j, r) in pairs.residuals.iter().enumerate() {
        assert!(*r <= 1e-8 * pairs.operator_norm, "pair {} residual {r}", j + 1);
    }
    // Columns are orthonormal.
    let gram = pairs.vectors.adjoint() * &pairs.vectors;
    for i in 0..40 {
        for j in 0..40 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)].norm() - target).abs() < 1e-10);
        }
    }

    let result = compute_spectrum(&spec, &settings).unwrap();
    for mode in result.localized() {
        let r = grid_residual(&spec, &result.grid, &mode.samples, mode.energy).unwrap();
        assert!(r < 1e-8 * pairs.operator_norm, "mode {} grid residual {r}", mode.index);
    }
}

#[test]
fn cutoff_refinement_leaves_low_energies_unchanged() {
    let spec = reference();
    let coarse = build_hamiltonian(&spec, &BasisSettings::default()).unwrap();
    let fine = build_hamiltonian(
        &spec,
        &BasisSettings {
            cutoff: 16.0,
            ..BasisSettings::default()
        },
    )
    .unwrap();
    let a = solve_modes(&coarse, 95).unwrap();
    let b = solve_modes(&fine, 95).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn deterministic_across_runs() {
    let spec = reference();
    let settings = SpectrumSettings {
        mode_count: 100,
        ..SpectrumSettings::default()
    };
    let a = compute_spectrum(&spec, &settings).unwrap();
    let b = compute_spectrum(&spec, &settings).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pair_modes_have_distinct_centers() {
    let result = compute_spectrum(&reference(), &SpectrumSettings::default()).unwrap();
    let x32 = result.mode(32).unwrap().com;
    let x37 = result.mode(37).unwrap().com;
    assert!(x32.reliable && x37.reliable);
    // Regression values from the verified run on the 4096-point grid.
    assert_relative_eq!(x32.x, -1.0229882, epsilon = 1e-6);
    assert_relative_eq!(x37.x, 0.9918194, epsilon = 1e-6);
}
