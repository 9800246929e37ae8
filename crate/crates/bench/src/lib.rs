//! Fixtures shared by the benchmarks.

use edgehall_core::edge_current_index::GapSpec;
use edgehall_core::functional_calculus::{make_switch_with_plateau, SmoothProfile};
use edgehall_core::lattice_hamiltonian::{build_hamiltonian, build_landau};
use edgehall_core::{Boundary, DisorderModel, Geometry, OperatorMatrix, Realization};

/// Lowest gap of the flux-1/5 lattice Landau operator.
pub const LOWEST_GAP: (f64, f64) = (0.5489, 1.3258);

/// Anderson torus with flux `1/side`.
pub fn disordered_torus(side: usize, lambda: f64) -> OperatorMatrix {
    let g = Geometry::torus(side, side, 1.0, 1.0 / side as f64).expect("quantized torus");
    let model = DisorderModel::anderson(lambda);
    build_hamiltonian(&g, &model, &Realization::sample(&model, 1)).expect("hamiltonian")
}

/// Clean strip at flux 1/5 with its certified lowest-gap switch.
pub fn reference_strip(l1: usize, l2: usize) -> (OperatorMatrix, GapSpec, SmoothProfile) {
    let g = Geometry::strip(l1, l2, 1.0, 0.2, Boundary::Open, 0.0).expect("strip");
    let delta = (LOWEST_GAP.0 + 0.01, LOWEST_GAP.1 - 0.01);
    let gap = GapSpec { delta, gap_certificate: 0.01 };
    (build_landau(&g), gap, make_switch_with_plateau(delta, (0.20, 0.23), 2))
}
