use super::*;
use crate::lattice_hamiltonian::{
    build_hamiltonian, build_landau, gamma_from_flux, magnetic_translation, Boundary, CellProfile, DisorderModel,
    Distribution, Geometry, Realization,
};
use crate::linalg::{dagger, eigvalsh, max_abs, unitarity_defect};
use std::f64::consts::PI;

fn lattice_8x8() -> OperatorMatrix {
    let model = DisorderModel::anderson(0.5);
    let g = Geometry::open(8, 8, 1.0, gamma_from_flux(0.125, 1.0)).unwrap();
    build_hamiltonian(&g, &model, &Realization::sample(&model, 3)).unwrap()
}

#[test]
fn gaussian_fourier_pair() {
    // e^E F(E) = e^{−E²/2}  ⇒  F̃(t) = e^{−t²/2}/√(2π)
    let f = |e: f64| c((-0.5 * e * e - e).exp());
    let knots: Vec<f64> = (-12..=12).map(f64::from).collect();
    for t in [-3.0f64, -0.5, 0.0, 1.0, 2.5] {
        let want = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        assert!((fourier_weight_on(&f, &knots, t) - want).norm() < 1e-12);
    }
    let quad = QuadratureSpec { t_max: 12.0, n_t: 256, ..Default::default() };
    let nodes = quad.nodes();
    for i in 0..=60 {
        let e = -3.0 + 0.1 * i as f64;
        let back: C64 = nodes
            .iter()
            .map(|&(t, w)| w * (-0.5 * t * t).exp() / (2.0 * PI).sqrt() * (-(c(1.0) + I * t) * e).exp())
            .sum();
        assert!((back - f(e)).norm() < 1e-8, "E = {e}: {back} vs {}", f(e));
    }
}

#[test]
fn zero_function_has_zero_weight_and_image() {
    let zero = FnProfile { f: |_| c(0.0), knots: vec![-1.0, 5.0], smoothness: 8 };
    for t in [-10.0, 0.0, 3.0] {
        assert_eq!(fourier_weight(&zero, t).unwrap(), c(0.0));
    }
    let h = lattice_8x8();
    let quad = QuadratureSpec { n_t: 64, ..Default::default() };
    for backend in [SemigroupBackend::Spectral, SemigroupBackend::Taylor] {
        let out = apply_function_heatkernel(&h, &zero, &quad, backend).unwrap();
        assert_eq!(max_abs(&out.matrix.view()), 0.0);
    }
}

#[test]
fn fourier_weight_decays_like_the_smoothness_predicts() {
    let bump = make_bump(2.0, 8);
    let scaled = |t: f64| fourier_weight(&bump, t).unwrap().norm() * (1.0 + t.abs().powi(7));
    let near = (0..=50).map(|i| scaled(-25.0 + i as f64)).fold(0.0, f64::max);
    let far = (0..=50).map(|i| scaled(25.0 + 0.5 * i as f64)).fold(0.0, f64::max);
    assert!(near.is_finite() && far <= 10.0 * near, "near {near}, far {far}");
}

#[test]
fn heatkernel_path_matches_spectral_oracle() {
    let h = lattice_8x8();
    let f = bump_on((-1.0, 5.0), 8);
    let exact = apply_function_spectral(&h, &f).unwrap();
    let out = apply_function_heatkernel(&h, &f, &QuadratureSpec::default(), SemigroupBackend::Spectral).unwrap();
    let err = relative_error(&out.matrix, &exact.entries);
    assert!(err < 1e-6, "relative error {err}");
    assert!(out.tail_estimate < 1e-6);
    assert!(out.shift <= eigvalsh(&h.entries.view()).unwrap()[0] + 1e-9);
}

#[test]
fn tail_check_rejects_short_windows() {
    let h = lattice_8x8();
    let f = bump_on((-1.0, 5.0), 3);
    let quad = QuadratureSpec { t_max: 2.0, n_t: 64, ..Default::default() };
    let err = apply_function_heatkernel(&h, &f, &quad, SemigroupBackend::Spectral).unwrap_err();
    assert!(matches!(err, Error::QuadratureTail { .. }));
}

#[test]
fn trapezoid_converges_spectrally() {
    let h = lattice_8x8();
    let f = bump_on((-1.0, 5.0), 8);
    let exact = apply_function_spectral(&h, &f).unwrap().entries;
    let err = |n_t| {
        let quad = QuadratureSpec { t_max: 40.0, n_t, rule: QuadratureRule::Trapezoid, tail_tol: 1e-6 };
        let out = apply_function_heatkernel(&h, &f, &quad, SemigroupBackend::Spectral).unwrap();
        relative_error(&out.matrix, &exact)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(coarse / fine > 100.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn spectral_mapping_examples() {
    let h = lattice_8x8();
    let ev = eigvalsh(&h.entries.view()).unwrap();
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    let one = compact_f((lo - 2.0, hi + 2.0), 1.0, 8);
    let id = apply_function_spectral(&h, &one).unwrap();
    assert!(max_abs(&(&id.entries - &identity(h.dim())).view()) < 1e-12);
    let below = compact_f((lo - 3.0, lo - 0.5), 1.0, 8);
    assert!(max_abs(&apply_function_spectral(&h, &below).unwrap().entries.view()) < 1e-14);

    let g = make_switch((lo + 1.0, lo + 3.0), 8);
    let image = apply_function_spectral(&h, &FnProfile { f: |e| c(g.eval(e)), knots: vec![], smoothness: 8 }).unwrap();
    let mapped = eigvalsh(&image.entries.view()).unwrap();
    let mut want: Vec<f64> = ev.iter().map(|&e| g.eval(e)).collect();
    want.sort_by(f64::total_cmp);
    for (m, w) in mapped.iter().zip(&want) {
        assert!((m - w).abs() < 1e-10);
        assert!((-1e-12..=1.0 + 1e-12).contains(m));
    }
}

#[test]
fn winding_operator_is_unitary() {
    let h = lattice_8x8();
    let g = make_switch((0.5, 1.5), 8);
    let u = apply_function_spectral(&h, &WindingMinusOne { g: &g, power: 1 }).unwrap().entries + identity(h.dim());
    assert!(unitarity_defect(&u.view()) < 1e-12);
}

#[test]
fn functional_calculus_preserves_covariance() {
    let model = DisorderModel {
        w: CellProfile::Zero,
        v: CellProfile::Bump { amplitude: 1.0 },
        lambda_max: 0.4,
        dist: Distribution::Uniform,
        cell: 1,
    };
    let w = Realization::sample(&model, 21);
    let g = Geometry::torus(10, 10, 1.0, 0.2).unwrap();
    let f = compact_f((0.2, 1.6), 0.5, 8);
    let fh = apply_function_spectral(&build_hamiltonian(&g, &model, &w).unwrap(), &f).unwrap();
    for m in [[2, 0], [-1, 3]] {
        let u = magnetic_translation(&g, m).unwrap().entries;
        let moved = u.dot(&fh.entries).dot(&dagger(&u.view()));
        let direct = apply_function_spectral(&build_hamiltonian(&g, &model, &w.translated(m)).unwrap(), &f).unwrap();
        assert!(max_abs(&(moved - &direct.entries).view()) < 1e-10);
    }
}

#[test]
fn identity_decays_exactly() {
    let g = Geometry::open(8, 8, 1.0, 0.5).unwrap();
    let report = kernel_decay_report(&OperatorMatrix::identity(g), 3).unwrap();
    assert!(report.exact && report.power_rate.is_infinite());
}

#[test]
fn vanishing_kernel_is_a_degenerate_fit() {
    let g = Geometry::open(8, 8, 1.0, 0.5).unwrap();
    let err = kernel_decay_report(&OperatorMatrix::zeros(g), 3).unwrap_err();
    assert!(matches!(err, Error::DegenerateFit(_)));
}

#[test]
fn smooth_function_kernel_decays_faster_than_power_four() {
    let g = Geometry::open(20, 20, 1.0, gamma_from_flux(0.2, 1.0)).unwrap();
    let fh = apply_function_spectral(&build_landau(&g), &bump_on((-1.0, 5.0), 8)).unwrap();
    let report = kernel_decay_report(&fh, 3).unwrap();
    assert!(report.power_rate > 4.0, "{report:?}");
}

#[test]
fn boundary_correction_is_edge_localized() {
    let model = DisorderModel::anderson(0.3);
    let flux = 0.2;
    let (l1, rows, below) = (16, 20, 12);
    let s = 0.2;
    let plane = Geometry::with_origin(
        l1,
        rows + below,
        1.0,
        gamma_from_flux(flux, 1.0),
        Boundary::Periodic,
        Boundary::Open,
        [0.0, 1.0 - s - below as f64],
    )
    .unwrap();
    let h = build_hamiltonian(&plane, &model, &Realization::sample(&model, 5)).unwrap();
    let k = boundary_comparison_kernel(&h, s, &bump_on((-1.0, 5.0), 8)).unwrap();
    assert_eq!(k.geometry.l2(), rows);
    let report = edge_decay_profile(&k, 4).unwrap();
    assert!(report.monotone, "{:?}", report.profile);
    assert!(report.profile[10].1 < 1e-3 * report.profile[0].1);
}
