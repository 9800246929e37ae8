//! Acceptance criteria 1–10, each judged at its stated tolerance. Every
//! criterion prints one PASS/FAIL line; the binary fails if any criterion does.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use edgehall_core::covariant_algebra::{bulk_density, edge_density, nabla, trace_identities_suite};
use edgehall_core::edge_current_index::bulk_no_current;
use edgehall_core::experiment::{convergence_study, evaluate, Axis, ConvergenceRow, ExperimentConfig};
use edgehall_core::functional_calculus::{
    apply_function_heatkernel, apply_function_spectral, boundary_comparison_kernel, bump_on, edge_decay_profile,
    relative_error, QuadratureRule, SemigroupBackend,
};
use edgehall_core::heat_kernels::{semigroup, verify_gaussian_bound};
use edgehall_core::lattice_hamiltonian::{
    build_hamiltonian, build_landau, covariant_derivative, gamma_from_flux, realization_seeds,
};
use edgehall_core::{
    BoundId, Boundary, ComplexTime, DisorderModel, Geometry, OperatorMatrix, QuadratureSpec, Realization, C64,
};
use edgehall_validation::{fhs_chern, report};
use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REFERENCE: &str = r#"
[geometry]
l1 = 40
l2 = 20
flux = "1/5"
bc1 = "open"
bc2 = "dirichlet_edge"
torus = [10, 10]

[gap]
delta = "auto:gap_index=1"
margin = 0.01
plateau = [0.20, 0.23]
switch_k = 2

[run]
experiments = ["quantization", "chern"]
"#;

fn reference() -> ExperimentConfig {
    ExperimentConfig::from_toml(REFERENCE).unwrap()
}

/// The integer every edge quantity must reproduce, from the Bloch-band oracle.
fn oracle_index() -> i64 {
    fhs_chern(1, 5, 1, 24).round() as i64
}

fn criterion_01_heat_kernel_calculus_matches_spectral_oracle() -> bool {
    let start = Instant::now();
    let g = Geometry::torus(8, 8, 1.0, 1.0 / 8.0).unwrap();
    let model = DisorderModel::anderson(0.5);
    let h = build_hamiltonian(&g, &model, &Realization::sample(&model, 3)).unwrap();
    let f = bump_on((-1.0, 5.0), 8);
    let quad = QuadratureSpec { t_max: 40.0, n_t: 2048, rule: QuadratureRule::Trapezoid, tail_tol: 1e-6 };
    let hk = apply_function_heatkernel(&h, &f, &quad, SemigroupBackend::Taylor).unwrap();
    let exact = apply_function_spectral(&h, &f).unwrap();
    let err = relative_error(&hk.matrix, &exact.entries);
    let elapsed = start.elapsed();
    let pass = err < 1e-6 && elapsed < Duration::from_secs(60);
    report(1, pass, &format!("relative Frobenius error {err:.2e}, {:.1}s", elapsed.as_secs_f64()))
}

/// Fitted constants of every bound on an `l × l` lattice.
fn bound_constants(l: usize, a: f64, flux: f64, model: &DisorderModel, w: &Realization) -> Vec<(BoundId, C64, f64)> {
    let torus = Geometry::torus(l, l, a, flux).unwrap();
    let strip = Geometry::strip(l, l, a, flux, Boundary::Periodic, 0.0).unwrap();
    let clean = build_landau(&torus);
    let rough = build_hamiltonian(&torus, model, w).unwrap();
    let half = build_hamiltonian(&strip, model, w).unwrap();
    let d1 = covariant_derivative(&strip, 0);
    let mut out = Vec::new();
    for z in [C64::new(1.0, 0.0), C64::new(1.0, 1.0)] {
        let zt = ComplexTime::new(z).unwrap();
        let fit = |k: &OperatorMatrix, id| verify_gaussian_bound(k, zt, id, 3, 1e-12).fitted_c;
        out.push((BoundId::Landauest, z, fit(&semigroup(&clean, zt).unwrap(), BoundId::Landauest)));
        out.push((BoundId::Complexest, z, fit(&semigroup(&rough, zt).unwrap(), BoundId::Complexest)));
        let mut k = semigroup(&half, zt).unwrap();
        for id in [BoundId::HalfplaneN0, BoundId::HalfplaneN1, BoundId::HalfplaneN2] {
            out.push((id, z, fit(&k, id)));
            k = k.with_entries(d1.entries.dot(&k.entries));
        }
    }
    out
}

/// The same comparison with the box held fixed and the spacing halved. The
/// field and the bumps are fixed in physical units (unit cells of `1/a` sites).
fn refined_drift() -> f64 {
    let field = 4.0 * std::f64::consts::PI / 3.0;
    let at = |l: usize| {
        let a = 6.0 / l as f64;
        let model = DisorderModel { cell: l / 6, ..DisorderModel::anderson(0.5) };
        bound_constants(
            l,
            a,
            field * a * a / (2.0 * std::f64::consts::PI),
            &model,
            &Realization { x0: [0, 0], seed: 11 },
        )
    };
    largest_drift("refined", &at(12), &at(24))
}

fn largest_drift(label: &str, small: &[(BoundId, C64, f64)], large: &[(BoundId, C64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((id, z, c12), (_, _, c24)) in small.iter().zip(large) {
        let drift = (c24 - c12).abs() / c12;
        println!("  {label} {id:?} z = {z}: c(12) = {c12:.4e}, c(24) = {c24:.4e}, drift {drift:.3}");
        worst = worst.max(drift);
    }
    worst
}

fn criterion_02_gaussian_bounds_have_size_stable_constants() -> bool {
    let start = Instant::now();
    let model = DisorderModel::anderson(0.5);
    let w = Realization::sample(&model, 11);
    let fixed = |l| bound_constants(l, 0.5, 1.0 / 12.0, &model, &w);
    let worst = largest_drift("a = 0.5", &fixed(12), &fixed(24));
    let elapsed = start.elapsed();
    // At fixed spacing the larger lattice reaches distances of many hops,
    // where the lattice kernel's tail is not Gaussian; refinement is reported
    // alongside as a diagnostic.
    let refined = refined_drift();
    let pass = worst < 0.2 && elapsed < Duration::from_secs(300);
    report(
        2,
        pass,
        &format!(
            "largest drift 12→24 {worst:.3} ({:.1}s); same box at half the spacing {refined:.3}",
            elapsed.as_secs_f64()
        ),
    )
}

/// Random dense matrix damped by `e^{−κ·row}` on both sides.
fn edge_localized(g: &Geometry, kappa: f64, rng: &mut ChaCha8Rng) -> OperatorMatrix {
    let n = g.n_sites();
    let w = Array1::from_shape_fn(n, |i| (-kappa * g.lattice_coords(i)[1] as f64).exp());
    let m = Array2::from_shape_fn((n, n), |(x, y)| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w[x] * w[y]
    });
    OperatorMatrix { geometry: *g, entries: m, hermitian: false }
}

/// `F(Ĥ_s) − φ_s F(H) φ_s` on a plane whose medium moves with the wall.
fn boundary_part(plane: &Geometry, model: &DisorderModel, w: &Realization, s: f64) -> OperatorMatrix {
    let h = build_hamiltonian(plane, model, w).unwrap();
    boundary_comparison_kernel(&h, s, &bump_on((-1.0, 5.0), 8)).unwrap()
}

fn criterion_03_trace_algebra() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let strip = Geometry::strip(8, 16, 1.0, 0.25, Boundary::Periodic, 0.0).unwrap();
    let f_strip = apply_function_spectral(&build_landau(&strip), &bump_on((-1.0, 5.0), 8)).unwrap();
    let (mut cyclicity, mut inequalities) = (0.0f64, true);
    for i in 0..20 {
        let b = edge_localized(&strip, 3.0, &mut rng);
        // Half the pairs take a bounded, non-localized left factor.
        let a = if i % 2 == 0 { edge_localized(&strip, 3.0, &mut rng) } else { f_strip.clone() };
        let r = trace_identities_suite(&a, &b).unwrap();
        cyclicity = cyclicity.max(r.cyclicity_residual);
        inequalities &= r.holder_holds && r.triangle_holds;
    }

    let model = DisorderModel::anderson(0.4);
    let w = Realization::sample(&model, 17);
    let torus = Geometry::torus(12, 12, 1.0, 0.25).unwrap();
    let fh =
        apply_function_spectral(&build_hamiltonian(&torus, &model, &w).unwrap(), &bump_on((-1.0, 5.0), 8)).unwrap();
    let bulk_derivation = (0..2).map(|j| bulk_density(&nabla(&fh, j)).unwrap().norm()).fold(0.0, f64::max);
    let edge_derivation = edge_density(&nabla(&edge_localized(&strip, 3.0, &mut rng), 0)).unwrap().norm();

    let plane =
        Geometry::with_origin(10, 32, 1.0, gamma_from_flux(0.2, 1.0), Boundary::Periodic, Boundary::Open, [0.0, -8.0])
            .unwrap();
    let at_s = edge_density(&boundary_part(&plane, &model, &w, 0.0)).unwrap();
    let moved = edge_density(&boundary_part(&plane.translated([0, 1]), &model, &w.translated([0, 1]), -1.0)).unwrap();
    let s_shift = (at_s - moved).norm();

    let pass = cyclicity < 1e-8 && inequalities && bulk_derivation < 1e-8 && edge_derivation < 1e-8 && s_shift < 1e-6;
    report(
        3,
        pass,
        &format!(
            "cyclicity {cyclicity:.1e}, Hölder/triangle {inequalities}, T(∇A) {bulk_derivation:.1e}, \
             T̂(∇₁A) {edge_derivation:.1e}, s-shift {s_shift:.1e}"
        ),
    )
}

fn criterion_04_clean_quantization_chain() -> bool {
    let start = Instant::now();
    let res = evaluate(&reference()).unwrap();
    let q = res.quantization.unwrap();
    let n = oracle_index();
    let values = [q.edge_current.mean.re, q.pairing.mean.re, q.fedosov.mean.re];
    let pairwise = q.residuals.chain;
    let to_oracle = values.iter().map(|v| (v - n as f64).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = pairwise < 0.05 && q.index == n && to_oracle < 0.05 && elapsed < Duration::from_secs(600);
    report(
        4,
        pass,
        &format!(
            "−2πT̂(J₁G′) {:.4}, pairing {:.4}, Fedosov {:.4}, oracle {n}, pairwise {pairwise:.1e}, {:.1}s",
            values[0],
            values[1],
            values[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_05_disorder_robustness() -> bool {
    let n = oracle_index();
    let mut pass = true;
    let mut details = Vec::new();
    for fraction in [0.1, 0.2] {
        let mut cfg = reference();
        cfg.disorder.lambda_gap_fraction = Some(fraction);
        cfg.disorder.n_realizations = 16;
        cfg.disorder.master_seed = 2024;
        cfg.run.experiments = vec![edgehall_core::experiment::Experiment::Quantization];
        let res = evaluate(&cfg).unwrap();
        let q = res.quantization.unwrap();
        let constant = res.failures.is_empty()
            && q.fedosov_per_realization.len() == 16
            && q.fedosov_per_realization.iter().all(|f| f.nearest == n);
        let residual = (q.edge_current.mean.re - n as f64).abs();
        let se = q.edge_current.std_error;
        pass &= constant && residual < 0.05 && se < 0.02;
        details.push(format!(
            "λ = {:.3} ({:.0}%): index constant {constant}, residual {residual:.1e}, std_error {se:.1e}",
            res.lambda,
            fraction * 100.0
        ));
    }
    report(5, pass, &details.join("; "))
}

fn criterion_06_winding_linearity() -> bool {
    let q = evaluate(&reference()).unwrap().quantization.unwrap();
    let p1 = q.pairing.mean.re;
    let p2 = 2.0 * q.half_pairing_squared.mean.re;
    let defect = (p2 - 2.0 * p1).abs();
    report(6, defect < 0.05, &format!("pairing(U²) {p2:.4}, 2·pairing(U) {:.4}, defect {defect:.1e}", 2.0 * p1))
}

fn criterion_07_edge_equals_bulk() -> bool {
    let res = evaluate(&reference()).unwrap();
    let ind = res.quantization.unwrap().fedosov.mean.re;
    let ch = res.chern.unwrap().mean.re;
    let ind_res = (ind - ind.round()).abs();
    let ch_res = (ch - ch.round()).abs();
    let pass = (ch - ind).abs() < 0.1 && ind_res < 0.05 && ch_res < 0.05;
    report(
        7,
        pass,
        &format!(
            "ch(P,P,P) {ch:.4}, Ind {ind:.4}, |ch − Ind| {:.3}, residuals {ch_res:.1e}/{ind_res:.1e}",
            (ch - ind).abs()
        ),
    )
}

fn criterion_08_no_bulk_current() -> bool {
    let torus = Geometry::torus(20, 20, 1.0, 0.2).unwrap();
    let f = bump_on((-1.0, 5.0), 8);
    let clean = bulk_no_current(&build_landau(&torus), &f).unwrap();
    let clean_max = clean.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let model = DisorderModel::anderson(0.3);
    let per: Vec<[C64; 2]> = realization_seeds(8, 8)
        .into_iter()
        .map(|s| {
            bulk_no_current(&build_hamiltonian(&torus, &model, &Realization::sample(&model, s)).unwrap(), &f).unwrap()
        })
        .collect();
    let mean = |j: usize| (per.iter().map(|v| v[j]).sum::<C64>() / per.len() as f64).norm();
    let ensemble_max = mean(0).max(mean(1));
    let pass = clean_max < 1e-6 && ensemble_max < 1e-4;
    report(8, pass, &format!("clean {clean_max:.1e}, disordered ensemble mean {ensemble_max:.1e}"))
}

fn criterion_09_boundary_comparison_is_edge_localized() -> bool {
    let (l1, rows, below, s) = (16, 20, 12, 0.2);
    let plane = Geometry::with_origin(
        l1,
        rows + below,
        1.0,
        gamma_from_flux(0.2, 1.0),
        Boundary::Periodic,
        Boundary::Open,
        [0.0, 1.0 - s - below as f64],
    )
    .unwrap();
    let model = DisorderModel::anderson(0.3);
    let k = boundary_part(&plane, &model, &Realization::sample(&model, 5), s);
    assert_eq!(k.geometry.l2(), rows);
    let profile = edge_decay_profile(&k, 4).unwrap();
    let suppression = profile.profile[0].1 / profile.profile[10].1;
    let pass = profile.monotone && suppression >= 1e3;
    report(9, pass, &format!("monotone {}, suppression at 10 sites {suppression:.2e}", profile.monotone))
}

fn criterion_10_residual_shrinks_with_l1() -> bool {
    let values = [16.0, 24.0, 32.0, 40.0];
    // Within noise: an increase smaller than 10% of the previous residual is tolerated.
    let shrinking = |rows: &[ConvergenceRow]| {
        for r in rows {
            println!("  L1 = {}: residual {:.3e}", r.value, r.residual);
        }
        rows.windows(2).all(|w| w[1].residual <= 1.1 * w[0].residual)
    };
    let (pass, detail) = match convergence_study(&reference(), Axis::L1, &values) {
        Ok(rows) => (shrinking(&rows), "residuals shrink".to_string()),
        Err(e) => {
            // Not part of the verdict: the trend once the localization guard is widened.
            let mut loose = reference();
            loose.run.tolerances.edge_leak = 1e-2;
            let trend = convergence_study(&loose, Axis::L1, &values).map(|rows| shrinking(&rows));
            (false, format!("{e}; with edge_leak 1e-2 the residuals shrink: {trend:?}"))
        }
    };
    report(10, pass, &detail)
}

type Criterion = (&'static str, fn() -> bool);

const CRITERIA: [Criterion; 10] = [
    (
        "criterion_01_heat_kernel_calculus_matches_spectral_oracle",
        criterion_01_heat_kernel_calculus_matches_spectral_oracle,
    ),
    (
        "criterion_02_gaussian_bounds_have_size_stable_constants",
        criterion_02_gaussian_bounds_have_size_stable_constants,
    ),
    ("criterion_03_trace_algebra", criterion_03_trace_algebra),
    ("criterion_04_clean_quantization_chain", criterion_04_clean_quantization_chain),
    ("criterion_05_disorder_robustness", criterion_05_disorder_robustness),
    ("criterion_06_winding_linearity", criterion_06_winding_linearity),
    ("criterion_07_edge_equals_bulk", criterion_07_edge_equals_bulk),
    ("criterion_08_no_bulk_current", criterion_08_no_bulk_current),
    ("criterion_09_boundary_comparison_is_edge_localized", criterion_09_boundary_comparison_is_edge_localized),
    ("criterion_10_residual_shrinks_with_l1", criterion_10_residual_shrinks_with_l1),
];

/// Runs every criterion (or those whose name contains a positional filter),
/// printing one verdict line each; a panic counts as a failure.
fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (number, (name, check)) in (1..).zip(CRITERIA) {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let pass = std::panic::catch_unwind(check).unwrap_or_else(|_| report(number, false, "panicked"));
        if !pass {
            failed.push(number);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
