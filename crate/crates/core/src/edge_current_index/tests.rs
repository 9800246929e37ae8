use super::*;
use crate::covariant_algebra::{hilbert_schmidt_commutator, sign_operator, EDGE_LEAK_TOL};
use crate::functional_calculus::{bump_on, fermi_smooth, make_switch, make_switch_with_plateau, FnProfile};
use crate::lattice_hamiltonian::{
    build_hamiltonian, build_landau, gamma_from_flux, position, Boundary, DisorderModel, Realization,
};
use crate::linalg::{c, commutator, hermiticity_defect, identity, max_abs, unitarity_defect};

/// Lowest Hofstadter gap at flux 1/5 with `a = 1`.
const LOWEST_GAP: (f64, f64) = (0.5489, 1.3258);

fn strip(l1: usize, l2: usize, bc1: Boundary) -> OperatorMatrix {
    build_landau(&Geometry::strip(l1, l2, 1.0, 0.2, bc1, 0.0).unwrap())
}

fn reference_switch() -> SmoothProfile {
    make_switch_with_plateau((LOWEST_GAP.0 + 0.01, LOWEST_GAP.1 - 0.01), (0.20, 0.23), 2)
}

#[test]
fn current_is_the_commutator_with_position() {
    let model = DisorderModel::anderson(0.7);
    let g = Geometry::open(12, 12, 1.0, gamma_from_flux(0.2, 1.0)).unwrap();
    let h = build_hamiltonian(&g, &model, &Realization::sample(&model, 1)).unwrap();
    let hl = build_landau(&g);
    for dir in 0..2 {
        let x = position(&g, dir).entries;
        let full = commutator(&h.entries, &x);
        assert_eq!(full, commutator(&hl.entries, &x));
        let j = current_operator(&g, dir).entries;
        assert!(max_abs(&(full.mapv(|z| I * z) - j).view()) < 1e-10);
    }
    let free = Geometry::open(6, 6, 0.5, 0.0).unwrap();
    assert!(hermiticity_defect(&current_operator(&free, 1).entries.view()) < 1e-15);
}

#[test]
fn gap_certificate() {
    let torus = build_landau(&Geometry::torus(10, 10, 1.0, 0.2).unwrap());
    let gap = GapSpec::certify((0.6, 1.3), std::slice::from_ref(&torus)).unwrap();
    assert!(gap.gap_certificate > 0.01);
    let err = GapSpec::certify((0.3, 1.3), &[torus]).unwrap_err();
    assert!(matches!(err, Error::GapViolation { .. }));
}

#[test]
fn winding_unitary_spectral_mapping() {
    let h = strip(10, 8, Boundary::Periodic);
    let below = make_switch((-3.0, -2.0), 8);
    let above = make_switch((10.0, 11.0), 8);
    for g in [&below, &above] {
        let u = winding_unitary(&h, g, 1).unwrap();
        assert!(max_abs(&(&u.entries - &identity(h.dim())).view()) < 1e-12);
    }
    let g = make_switch((0.6, 1.3), 8);
    let u = winding_unitary(&h, &g, 1).unwrap();
    assert!(unitarity_defect(&u.entries.view()) < 1e-12);
    let sp = Spectral::new(&h.entries.view()).unwrap();
    let rotated = sp.vectors.t().mapv(|z| z.conj()).dot(&u.entries).dot(&sp.vectors);
    for (i, &e) in sp.values.iter().enumerate() {
        let want = C64::from_polar(1.0, -TAU * g.eval(e));
        assert!((rotated[[i, i]] - want).norm() < 1e-10);
    }
}

#[test]
fn identity_has_zero_index_and_pairing() {
    let g = Geometry::strip(12, 8, 1.0, 0.2, Boundary::Open, 0.0).unwrap();
    let u = OperatorMatrix::identity(g);
    assert_eq!(fedosov_index(&u).value, 0.0);
    assert_eq!(cocycle_pairing(&u, EDGE_LEAK_TOL).unwrap(), c(0.0));
}

#[test]
fn shift_has_index_minus_one() {
    let g = Geometry::strip(16, 8, 1.0, 0.0, Boundary::Periodic, 0.0).unwrap();
    let mut u = OperatorMatrix::zeros(g);
    // Shift along the boundary row, identity elsewhere.
    for i in 0..g.n_sites() {
        let [n1, n2] = g.lattice_coords(i);
        let j = if n2 == 0 { g.index((n1 + 1) % 16, 0) } else { i };
        u.entries[[j, i]] = c(1.0);
    }
    let ind = fedosov_index(&u);
    assert_eq!(ind.nearest, -1);
    assert!(ind.residual < 1e-12);
}

#[test]
fn trivial_gap_gives_zero_everywhere() {
    let h = strip(16, 10, Boundary::Open);
    let torus = build_landau(&Geometry::torus(10, 10, 1.0, 0.2).unwrap());
    let gap = GapSpec::certify((-3.0, -1.0), &[torus]).unwrap();
    let report = quantization_check(&gap, &make_switch((-3.0, -1.0), 8), &[h], PIPELINE_LEAK_TOL).unwrap();
    assert_eq!(report.index, 0);
    assert!(report.residuals.chain < 1e-12 && report.residuals.worst_realization < 1e-12);
    assert!(report.passes(0.05));
}

#[test]
fn switch_outside_the_gap_is_rejected() {
    let h = strip(16, 10, Boundary::Open);
    let gap = GapSpec { delta: (0.6, 1.3), gap_certificate: 0.05 };
    assert!(edge_quantities(&h, &gap, &make_switch((0.2, 1.3), 8), PIPELINE_LEAK_TOL).is_err());
}

#[test]
fn edge_chain_on_a_small_strip() {
    let h = strip(24, 20, Boundary::Open);
    let gap = GapSpec { delta: (LOWEST_GAP.0 + 0.01, LOWEST_GAP.1 - 0.01), gap_certificate: 0.01 };
    let q = edge_quantities(&h, &gap, &reference_switch(), 1e-2).unwrap();
    assert_eq!(q.fedosov.nearest, 1);
    for v in [q.normalized_current, q.pairing, q.half_pairing_squared] {
        assert!((v - 1.0).abs() < 0.1, "{q:?}");
    }
}

#[test]
fn chern_character_trivial_cases() {
    let free = build_landau(&Geometry::torus(10, 10, 1.0, 0.0).unwrap());
    let p = fermi_projection(&free, &fermi_smooth((1.9, 2.1), 8)).unwrap();
    assert!(bulk_chern(&p).unwrap().abs() < 1e-8);
    let h = build_landau(&Geometry::torus(10, 10, 1.0, 0.2).unwrap());
    let all = fermi_projection(&h, &fermi_smooth((10.0, 11.0), 8)).unwrap();
    assert!(bulk_chern(&all).unwrap().abs() < 1e-10);
}

#[test]
fn chern_character_of_the_lowest_band_is_integral() {
    let h = build_landau(&Geometry::torus(20, 20, 1.0, 0.2).unwrap());
    let p = fermi_projection(&h, &fermi_smooth((0.6, 1.3), 8)).unwrap();
    let ch = bulk_chern(&p).unwrap();
    assert!((ch - ch.round()).abs() < 0.05 && ch.round().abs() == 1.0, "ch = {ch}");
}

#[test]
fn no_bulk_current_at_equilibrium() {
    let h = build_landau(&Geometry::torus(20, 20, 1.0, 0.2).unwrap());
    let zero = FnProfile { f: |_| c(0.0), knots: vec![0.0, 1.0], smoothness: 8 };
    assert_eq!(bulk_no_current(&h, &zero).unwrap(), [c(0.0); 2]);
    for v in bulk_no_current(&h, &bump_on((-0.2, 0.9), 8)).unwrap() {
        assert!(v.norm() < 1e-6);
    }
}

#[test]
fn commutator_with_sign_is_size_stable() {
    let hs = |l1: usize| {
        let h = strip(l1, 12, Boundary::Open);
        let mut u = winding_unitary(&h, &reference_switch(), 1).unwrap();
        u.entries -= &identity(h.dim());
        hilbert_schmidt_commutator(&u, &sign_operator(&h.geometry))
    };
    let (small, large) = (hs(16), hs(32));
    assert!(small > 0.1);
    assert!(((large - small) / small).abs() < 0.05, "{small} -> {large}");
}

#[test]
fn scalars_are_gauge_invariant() {
    let model = DisorderModel::anderson(0.05);
    let w = Realization::sample(&model, 7);
    let g = Geometry::strip(20, 20, 1.0, 0.2, Boundary::Open, 0.0).unwrap();
    let gap = GapSpec { delta: (LOWEST_GAP.0 + 0.06, LOWEST_GAP.1 - 0.06), gap_certificate: 0.01 };
    let sw = make_switch_with_plateau(gap.delta, (0.2, 0.23), 2);
    let m = [3, 2];
    let a = edge_quantities(&build_hamiltonian(&g, &model, &w).unwrap(), &gap, &sw, 1e-2).unwrap();
    let b = edge_quantities(&build_hamiltonian(&g.translated(m), &model, &w.translated(m)).unwrap(), &gap, &sw, 1e-2)
        .unwrap();
    for (x, y) in [
        (a.edge_current, b.edge_current),
        (a.pairing, b.pairing),
        (a.fedosov.value, b.fedosov.value),
        (a.half_pairing_squared, b.half_pairing_squared),
    ] {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}
