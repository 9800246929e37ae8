//! Configuration-driven ensemble experiments.
//!
//! Every realization is an independent job: its seed is split off the master
//! seed by counter, it runs on the rayon pool, and its results are gathered
//! back in realization order, so outputs do not depend on the worker count.
//! A failing realization is recorded and the rest of the ensemble continues.

mod config;
mod output;

pub use config::{
    Bc, CalculusBlock, CalculusPath, DisorderBlock, Experiment, ExperimentConfig, Flux, GapBlock, GapSelect,
    GeometryBlock, RunBlock, Tolerances,
};
pub use output::{write_convergence_csv, RunManifest, ScalarRow};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

use crate::covariant_algebra::{bulk_density, edge_density_with, nabla, TraceResult};
use crate::edge_current_index::{
    bulk_chern, bulk_no_current, edge_quantities, fermi_projection, EdgeQuantities, GapSpec, QuantizationReport,
};
use crate::functional_calculus::{
    apply_function_heatkernel, apply_function_spectral, boundary_comparison_kernel, bump_on, edge_decay_profile,
    fermi_smooth, kernel_decay_report, make_switch_with_plateau, relative_error, SmoothProfile,
};
use crate::heat_kernels::{semigroup, verify_gaussian_bound, BoundId, ComplexTime};
use crate::lattice_hamiltonian::{
    build_hamiltonian, covariant_derivative, realization_seeds, Boundary, DisorderModel, Geometry, OperatorMatrix,
    Realization,
};
use crate::linalg::{eigvalsh, C64};
use crate::{Error, Result};

/// Times at which the Gaussian bounds are fitted.
const BOUND_TIMES: [(f64, f64); 2] = [(1.0, 0.0), (1.0, 1.0)];
/// Sites excluded next to artificial boundaries in bound and decay fits.
const MARGIN: usize = 3;
const BOUND_FLOOR: f64 = 1e-12;
/// Rows of the plane below the wall in the boundary comparison.
const PLANE_ROWS_BELOW: usize = 12;
/// Distance (in sites) at which the boundary correction's suppression is read.
const SUPPRESSION_DEPTH: usize = 10;

/// A spectral gap of the scanned Hamiltonians: the open interval between
/// two consecutive eigenvalues of the ensemble spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lower_edge: f64,
    pub upper_edge: f64,
}

impl SpectralGap {
    pub fn width(&self) -> f64 {
        self.upper_edge - self.lower_edge
    }

    /// The subinterval kept `margin` away from both edges, certified
    /// against the scanned spectrum.
    pub fn certificate(&self, margin: f64) -> Option<GapSpec> {
        let delta = (self.lower_edge + margin, self.upper_edge - margin);
        (margin > 0.0 && delta.0 < delta.1).then_some(GapSpec { delta, gap_certificate: margin })
    }
}

/// Maximal spectral gaps wider than `threshold` in a sorted spectrum.
pub fn gaps_of(spectrum: &[f64], threshold: f64) -> Vec<SpectralGap> {
    spectrum
        .windows(2)
        .filter(|w| w[1] - w[0] > threshold)
        .map(|w| SpectralGap { lower_edge: w[0], upper_edge: w[1] })
        .collect()
}

/// Gaps of the bulk (torus) spectrum, united over the configured ensemble.
///
/// With `lambda_gap_fraction` the coupling is fixed by a clean scan first.
pub fn spectrum_scan(cfg: &ExperimentConfig) -> Result<Vec<SpectralGap>> {
    let lambda = resolve_lambda(cfg)?;
    let model = cfg.disorder.model(lambda)?;
    let realizations = ensemble(cfg, &model);
    scan(cfg, &model, &realizations)
}

fn scan(cfg: &ExperimentConfig, model: &DisorderModel, realizations: &[Realization]) -> Result<Vec<SpectralGap>> {
    let torus = cfg.geometry.torus()?;
    let spectra: Vec<Vec<f64>> = realizations
        .par_iter()
        .map(|r| Ok(eigvalsh(&build_hamiltonian(&torus, model, r)?.entries.view())?.to_vec()))
        .collect::<Result<_>>()?;
    let mut all: Vec<f64> = spectra.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    Ok(gaps_of(&all, cfg.gap.scan_threshold))
}

fn clean_gaps(cfg: &ExperimentConfig) -> Result<Vec<SpectralGap>> {
    scan(cfg, &cfg.disorder.model(0.0)?, &[Realization::clean()])
}

fn selected_clean_gap(cfg: &ExperimentConfig, m: usize) -> Result<SpectralGap> {
    let gaps = clean_gaps(cfg)?;
    gaps.get(m - 1).copied().ok_or_else(|| {
        Error::Config(format!(
            "gap.delta: gap_index = {m} requested but the clean scan finds {} gaps wider than {}",
            gaps.len(),
            cfg.gap.scan_threshold
        ))
    })
}

fn resolve_lambda(cfg: &ExperimentConfig) -> Result<f64> {
    match (cfg.disorder.lambda, cfg.disorder.lambda_gap_fraction) {
        (_, Some(frac)) => {
            let m = cfg.gap.delta.auto_index()?.expect("validated: fraction needs an auto gap");
            Ok(frac * selected_clean_gap(cfg, m)?.width())
        }
        (lambda, None) => Ok(lambda.unwrap_or(0.0)),
    }
}

fn ensemble(cfg: &ExperimentConfig, model: &DisorderModel) -> Vec<Realization> {
    if model.is_clean() {
        return vec![Realization::clean(); cfg.disorder.n_realizations];
    }
    realization_seeds(cfg.disorder.master_seed, cfg.disorder.n_realizations)
        .into_iter()
        .map(|seed| Realization::sample(model, seed))
        .collect()
}

/// Interval `Δ` of the configuration: explicit, or the selected clean gap
/// shrunk by `λ + margin` on both sides. Certified against every torus of
/// the ensemble.
fn resolve_gap(cfg: &ExperimentConfig, model: &DisorderModel, realizations: &[Realization]) -> Result<GapSpec> {
    let delta = match (&cfg.gap.delta, cfg.gap.delta.auto_index()?) {
        (GapSelect::Explicit([lo, hi]), _) => (*lo, *hi),
        (_, Some(m)) => {
            let gap = selected_clean_gap(cfg, m)?;
            let pad = model.lambda_max + cfg.gap.margin;
            (gap.lower_edge + pad, gap.upper_edge - pad)
        }
        (GapSelect::Auto(_), None) => unreachable!("auto selection always has an index"),
    };
    if delta.0 >= delta.1 {
        return Err(Error::Config(format!(
            "gap.delta: disorder λ = {} closes the selected gap (Δ = [{:.4}, {:.4}])",
            model.lambda_max, delta.0, delta.1
        )));
    }
    let torus = cfg.geometry.torus()?;
    let tori: Vec<OperatorMatrix> =
        realizations.par_iter().map(|r| build_hamiltonian(&torus, model, r)).collect::<Result<_>>()?;
    GapSpec::certify(delta, &tori)
}

/// A realization-level error, kept in the results instead of aborting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub experiment: Experiment,
    /// `None` when the ensemble-level reduction itself failed.
    pub realization: Option<usize>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub bound_id: BoundId,
    pub z: ComplexTime,
    /// Fitted constant per successful realization.
    pub fitted_c: Vec<f64>,
    pub max_fitted_c: f64,
    pub pairs_checked: usize,
    pub pairs_below_floor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    /// Power-law rate of `F(H)` on the torus, per realization.
    pub power_rate: Vec<f64>,
    pub gaussian_rate: Vec<f64>,
    /// `max|K|` at 10 sites from the wall over its value at the wall, for
    /// the boundary correction `K = F(Ĥ) − φF(H)φ`.
    pub edge_suppression: Vec<f64>,
    pub edge_monotone: Vec<bool>,
    pub edge_profile: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoCurrentSummary {
    pub j1: TraceResult,
    pub j2: TraceResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationSummary {
    /// `max_j |T(∇ⱼF(H))|` over realizations.
    pub bulk: f64,
    /// `max |T̂(∇₁K)|` over realizations.
    pub edge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalculusSummary {
    /// Relative Frobenius error of the heat-kernel path against the spectral oracle.
    pub relative_error: Vec<f64>,
    pub tail_estimate: f64,
    pub nodes: usize,
}

/// Everything a run computes; serialized as `results.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub config_hash: String,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantization: Option<QuantizationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chern: Option<TraceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_current: Option<NoCurrentSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_bulk: Option<TraceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_edge: Option<TraceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivations: Option<DerivationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calculus: Option<CalculusSummary>,
    pub failures: Vec<Failure>,
    /// Tolerance checks that did not hold.
    pub violations: Vec<String>,
    #[serde(skip)]
    pub scalars: Vec<ScalarRow>,
}

impl RunResults {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: DisorderModel,
    realizations: Vec<Realization>,
    seeds: Vec<u64>,
    gap: Option<GapSpec>,
    f: SmoothProfile,
}

impl Ctx<'_> {
    fn strip(&self, r: &Realization) -> Result<OperatorMatrix> {
        build_hamiltonian(&self.cfg.geometry.lattice()?, &self.model, r)
    }

    fn torus(&self, r: &Realization) -> Result<OperatorMatrix> {
        build_hamiltonian(&self.cfg.geometry.torus()?, &self.model, r)
    }

    /// `F(H)` along the configured path; `both` uses the spectral result.
    fn apply_f(&self, h: &OperatorMatrix) -> Result<OperatorMatrix> {
        let c = &self.cfg.calculus;
        match c.path {
            CalculusPath::Heatkernel => {
                Ok(h.with_entries(apply_function_heatkernel(h, &self.f, &c.quadrature, c.backend)?.matrix))
            }
            _ => apply_function_spectral(h, &self.f),
        }
    }

    fn switch(&self) -> Result<SmoothProfile> {
        let gap = self.gap.ok_or_else(|| Error::Config("experiment needs gap.delta".into()))?;
        let [p1, p2] = self.cfg.gap.plateau;
        Ok(make_switch_with_plateau(gap.delta, (p1, p2), self.cfg.gap.switch_k))
    }

    fn per_realization<T: Send>(&self, job: impl Fn(&Realization) -> Result<T> + Sync + Send) -> Vec<Result<T>> {
        self.realizations.par_iter().map(job).collect()
    }
}

/// Successful realizations in order; errors become [`Failure`]s.
fn harvest<T>(experiment: Experiment, results: Vec<Result<T>>, failures: &mut Vec<Failure>) -> Vec<(usize, T)> {
    results
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Ok(v) => Some((i, v)),
            Err(e) => {
                failures.push(Failure { experiment, realization: Some(i), error: e.to_string() });
                None
            }
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

impl RunResults {
    fn scalar(&mut self, experiment: Experiment, realization: usize, scalar: impl Into<String>, value: f64) {
        let seed = self.seeds[realization];
        self.scalars.push(ScalarRow { experiment, realization, seed, scalar: scalar.into(), value });
    }

    fn ensemble_failure(&mut self, experiment: Experiment, e: Error) {
        self.failures.push(Failure { experiment, realization: None, error: e.to_string() });
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(message());
        }
    }
}

/// Runs the configured experiments in memory.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<RunResults> {
    cfg.validate()?;
    let lambda = resolve_lambda(cfg)?;
    let model = cfg.disorder.model(lambda)?;
    let realizations = ensemble(cfg, &model);
    let seeds = realizations.iter().map(|r| r.seed).collect();
    let experiments: std::collections::BTreeSet<Experiment> = cfg.run.experiments.iter().copied().collect();
    let needs_gap = experiments.contains(&Experiment::Quantization) || experiments.contains(&Experiment::Chern);
    let gap = if needs_gap { Some(resolve_gap(cfg, &model, &realizations)?) } else { None };
    let [lo, hi] = cfg.calculus.support;
    let ctx = Ctx { cfg, model, realizations, seeds, gap, f: bump_on((lo, hi), cfg.calculus.k) };

    let mut out = RunResults { config_hash: cfg.hash(), lambda, seeds: ctx.seeds.clone(), gap, ..Default::default() };
    for exp in experiments {
        match exp {
            Experiment::Quantization => quantization(&ctx, &mut out),
            Experiment::Chern => chern(&ctx, &mut out),
            Experiment::NoCurrent => no_current(&ctx, &mut out),
            Experiment::Bounds => bounds(&ctx, &mut out),
            Experiment::Decay => decay(&ctx, &mut out),
            Experiment::Traces => traces(&ctx, &mut out),
            Experiment::Calculus => calculus(&ctx, &mut out),
        }
    }
    if let (Some(q), Some(ch)) = (&out.quantization, &out.chern) {
        let (ind, ch) = (q.index as f64, ch.mean.re);
        let tol = cfg.run.tolerances.edge_bulk;
        out.check((ch - ind).abs() < tol, || format!("edge_bulk: |ch − Ind| = |{ch:.4} − {ind}| ≥ {tol}"));
    }
    Ok(out)
}

fn quantization(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Quantization;
    let (gap, g) = match (ctx.gap, ctx.switch()) {
        (Some(gap), Ok(g)) => (gap, g),
        (_, Err(e)) => return out.ensemble_failure(exp, e),
        (None, Ok(_)) => unreachable!("switch exists only with a gap"),
    };
    let leak = ctx.cfg.run.tolerances.edge_leak;
    let per = ctx.per_realization(|r| edge_quantities(&ctx.strip(r)?, &gap, &g, leak));
    let ok: Vec<(usize, EdgeQuantities)> = harvest(exp, per, &mut out.failures);
    for (i, q) in &ok {
        out.scalar(exp, *i, "normalized_current", q.normalized_current);
        out.scalar(exp, *i, "pairing", q.pairing);
        out.scalar(exp, *i, "half_pairing_squared", q.half_pairing_squared);
        out.scalar(exp, *i, "fedosov", q.fedosov.value);
    }
    let qs: Vec<EdgeQuantities> = ok.into_iter().map(|(_, q)| q).collect();
    match QuantizationReport::from_quantities(&gap, &qs) {
        Ok(report) => {
            let tol = ctx.cfg.run.tolerances.integer;
            out.check(report.passes(tol), || {
                format!("quantization: residuals {:?} exceed {tol} or the index varies", report.residuals)
            });
            out.check(report.residuals.linearity < tol, || {
                format!("linearity: |½pairing(U²) − pairing(U)| = {:.3e} ≥ {tol}", report.residuals.linearity)
            });
            out.quantization = Some(report);
        }
        Err(e) => out.ensemble_failure(exp, e),
    }
}

fn chern(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Chern;
    let Some(gap) = ctx.gap else {
        return out.ensemble_failure(exp, Error::Config("chern needs gap.delta".into()));
    };
    let fermi = fermi_smooth(gap.delta, ctx.cfg.gap.switch_k);
    let per = ctx.per_realization(|r| bulk_chern(&fermi_projection(&ctx.torus(r)?, &fermi)?));
    let ok = harvest(exp, per, &mut out.failures);
    for &(i, v) in &ok {
        out.scalar(exp, i, "chern", v);
    }
    match TraceResult::from_values(ok.iter().map(|&(_, v)| C64::new(v, 0.0)).collect()) {
        Ok(t) => out.chern = Some(t),
        Err(e) => out.ensemble_failure(exp, e),
    }
}

fn no_current(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::NoCurrent;
    let per = ctx.per_realization(|r| bulk_no_current(&ctx.torus(r)?, &ctx.f));
    let ok = harvest(exp, per, &mut out.failures);
    for &(i, [j1, j2]) in &ok {
        out.scalar(exp, i, "abs_t_j1_f", j1.norm());
        out.scalar(exp, i, "abs_t_j2_f", j2.norm());
    }
    let trace = |dir: usize| TraceResult::from_values(ok.iter().map(|(_, j)| j[dir]).collect());
    match (trace(0), trace(1)) {
        (Ok(j1), Ok(j2)) => {
            let tol = ctx.cfg.run.tolerances.no_current;
            let worst = j1.mean.norm().max(j2.mean.norm());
            out.check(worst < tol, || format!("no_current: |T(JF(H))| = {worst:.3e} ≥ {tol}"));
            out.no_current = Some(NoCurrentSummary { j1, j2 });
        }
        (Err(e), _) | (_, Err(e)) => out.ensemble_failure(exp, e),
    }
}

/// `D₁ⁿ e^{−zĤ}`.
fn derivative_power(k: &OperatorMatrix, n: i32) -> OperatorMatrix {
    let d = covariant_derivative(&k.geometry, 0);
    (0..n).fold(k.clone(), |acc, _| acc.with_entries(d.entries.dot(&acc.entries)))
}

fn bounds(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Bounds;
    let times: Vec<ComplexTime> =
        BOUND_TIMES.iter().map(|&(re, im)| ComplexTime::new(C64::new(re, im)).expect("positive real part")).collect();
    let has_wall = ctx.cfg.geometry.bc2 == Bc::DirichletEdge;
    let per = ctx.per_realization(|r| {
        let torus = ctx.torus(r)?;
        let strip = if has_wall { Some(ctx.strip(r)?) } else { None };
        let mut reports = Vec::new();
        for &z in &times {
            let k = semigroup(&torus, z)?;
            for id in [BoundId::Landauest, BoundId::Complexest] {
                reports.push((z, verify_gaussian_bound(&k, z, id, MARGIN, BOUND_FLOOR)));
            }
            if let Some(strip) = &strip {
                let k = semigroup(strip, z)?;
                for id in [BoundId::HalfplaneN0, BoundId::HalfplaneN1, BoundId::HalfplaneN2] {
                    let dk = derivative_power(&k, id.derivative_order());
                    reports.push((z, verify_gaussian_bound(&dk, z, id, MARGIN, BOUND_FLOOR)));
                }
            }
        }
        Ok(reports)
    });
    let ok = harvest(exp, per, &mut out.failures);
    let Some((_, first)) = ok.first() else {
        return out.ensemble_failure(exp, Error::Numerical("no realization completed".into()));
    };
    let mut summaries: Vec<BoundSummary> = first
        .iter()
        .map(|(z, r)| BoundSummary {
            bound_id: r.bound_id,
            z: *z,
            fitted_c: Vec::new(),
            max_fitted_c: 0.0,
            pairs_checked: r.pairs_checked,
            pairs_below_floor: 0,
        })
        .collect();
    for (i, reports) in &ok {
        for (s, (z, r)) in summaries.iter_mut().zip(reports) {
            s.fitted_c.push(r.fitted_c);
            s.max_fitted_c = s.max_fitted_c.max(r.fitted_c);
            s.pairs_below_floor += r.pairs_below_floor;
            let name = format!("c_{:?}_z{}{:+}i", r.bound_id, z.z().re, z.z().im).to_lowercase();
            out.scalars.push(ScalarRow {
                experiment: exp,
                realization: *i,
                seed: out.seeds[*i],
                scalar: name,
                value: r.fitted_c,
            });
        }
    }
    out.bounds = Some(summaries);
}

/// Plane below a strip: the strip's rows plus `below` more, open in the 2-direction.
fn plane_under(strip: &Geometry, below: usize) -> Result<Geometry> {
    let s = strip.edge_offset().ok_or_else(|| Error::Config("decay needs geometry.bc2 = dirichlet_edge".into()))?;
    let a = strip.a();
    Geometry::with_origin(
        strip.l1(),
        strip.l2() + below,
        a,
        strip.gamma(),
        strip.bc1(),
        Boundary::Open,
        [strip.origin()[0], a - s - below as f64 * a],
    )
}

fn decay(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Decay;
    struct Row {
        power: f64,
        gaussian: f64,
        suppression: f64,
        monotone: bool,
        profile: Vec<(f64, f64)>,
    }
    let per = ctx.per_realization(|r| {
        let fh = ctx.apply_f(&ctx.torus(r)?)?;
        let report = kernel_decay_report(&fh, MARGIN)?;
        let strip = ctx.cfg.geometry.lattice()?;
        let plane = plane_under(&strip, PLANE_ROWS_BELOW)?;
        let h = build_hamiltonian(&plane, &ctx.model, r)?;
        let k = boundary_comparison_kernel(&h, strip.edge_offset().unwrap_or(0.0), &ctx.f)?;
        let edge = edge_decay_profile(&k, 4)?;
        let depth = SUPPRESSION_DEPTH.min(edge.profile.len() - 1);
        let suppression = edge.profile[depth].1 / edge.profile[0].1;
        Ok(Row {
            power: report.power_rate,
            gaussian: report.gaussian_rate,
            suppression,
            monotone: edge.monotone,
            profile: edge.profile,
        })
    });
    let ok = harvest(exp, per, &mut out.failures);
    let mut summary = DecaySummary {
        power_rate: Vec::new(),
        gaussian_rate: Vec::new(),
        edge_suppression: Vec::new(),
        edge_monotone: Vec::new(),
        edge_profile: Vec::new(),
    };
    for (i, row) in ok {
        out.scalar(exp, i, "power_rate", row.power);
        out.scalar(exp, i, "gaussian_rate", row.gaussian);
        out.scalar(exp, i, "edge_suppression", row.suppression);
        summary.power_rate.push(row.power);
        summary.gaussian_rate.push(row.gaussian);
        summary.edge_suppression.push(row.suppression);
        summary.edge_monotone.push(row.monotone);
        summary.edge_profile.push(row.profile);
    }
    out.decay = Some(summary);
}

fn traces(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Traces;
    let leak = ctx.cfg.run.tolerances.edge_leak;
    let has_wall = ctx.cfg.geometry.bc2 == Bc::DirichletEdge;
    let per = ctx.per_realization(|r| {
        let fh = ctx.apply_f(&ctx.torus(r)?)?;
        let bulk = bulk_density(&fh)?;
        let derivation = bulk_density(&nabla(&fh, 0))?.norm().max(bulk_density(&nabla(&fh, 1))?.norm());
        let edge = if has_wall {
            let strip = ctx.cfg.geometry.lattice()?;
            let plane = plane_under(&strip, PLANE_ROWS_BELOW)?;
            let h = build_hamiltonian(&plane, &ctx.model, r)?;
            let k = boundary_comparison_kernel(&h, strip.edge_offset().unwrap_or(0.0), &ctx.f)?;
            Some((edge_density_with(&k, leak)?, edge_density_with(&nabla(&k, 0), leak)?.norm()))
        } else {
            None
        };
        Ok((bulk, derivation, edge))
    });
    let ok = harvest(exp, per, &mut out.failures);
    let mut summary = DerivationSummary { bulk: 0.0, edge: 0.0 };
    for (i, (bulk, derivation, edge)) in &ok {
        out.scalar(exp, *i, "trace_bulk_f", bulk.re);
        out.scalar(exp, *i, "abs_trace_bulk_derivation", *derivation);
        summary.bulk = summary.bulk.max(*derivation);
        if let Some((t, d)) = edge {
            out.scalar(exp, *i, "trace_edge_boundary_correction", t.re);
            out.scalar(exp, *i, "abs_trace_edge_derivation", *d);
            summary.edge = summary.edge.max(*d);
        }
    }
    match TraceResult::from_values(ok.iter().map(|(_, (b, _, _))| *b).collect()) {
        Ok(t) => out.trace_bulk = Some(t),
        Err(e) => return out.ensemble_failure(exp, e),
    }
    if has_wall {
        match TraceResult::from_values(ok.iter().filter_map(|(_, (_, _, e))| e.map(|(t, _)| t)).collect()) {
            Ok(t) => out.trace_edge = Some(t),
            Err(e) => out.ensemble_failure(exp, e),
        }
    }
    out.derivations = Some(summary);
}

fn calculus(ctx: &Ctx, out: &mut RunResults) {
    let exp = Experiment::Calculus;
    let c = &ctx.cfg.calculus;
    let per = ctx.per_realization(|r| {
        let h = ctx.torus(r)?;
        let hk = apply_function_heatkernel(&h, &ctx.f, &c.quadrature, c.backend)?;
        let exact = apply_function_spectral(&h, &ctx.f)?;
        Ok((relative_error(&hk.matrix, &exact.entries), hk.tail_estimate, hk.nodes))
    });
    let ok = harvest(exp, per, &mut out.failures);
    let Some(&(_, (_, tail, nodes))) = ok.first() else {
        return out.ensemble_failure(exp, Error::Numerical("no realization completed".into()));
    };
    let errors: Vec<f64> = ok.iter().map(|(_, (e, _, _))| *e).collect();
    for (i, (e, _, _)) in &ok {
        out.scalar(exp, *i, "relative_error", *e);
    }
    let tol = ctx.cfg.run.tolerances.calculus;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    out.check(worst < tol, || format!("calculus: heat-kernel vs spectral error {worst:.3e} ≥ {tol}"));
    out.calculus = Some(CalculusSummary { relative_error: errors, tail_estimate: tail, nodes });
}

/// Options of a run that do not enter the configuration hash.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Rayon workers; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// A finished run: manifest, results, and the files written.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub results: RunResults,
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}"))),
    }
}

/// Executes the configured experiments and writes `results.json`,
/// `scalars.csv` and `manifest.json` into `opts.out_dir`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = chrono::Utc::now();
    let results = with_workers(opts.workers, || evaluate(cfg))??;
    let outputs = output::write_run(&opts.out_dir, &results)?;
    let manifest = RunManifest::new(cfg, &results, started, outputs);
    manifest.write(&opts.out_dir)?;
    Ok(RunOutcome { manifest, results })
}

/// Parameter varied by [`convergence_study`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    L1,
    L2,
    NT,
    A,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Axis::L1),
            "l2" => Ok(Axis::L2),
            "n_t" | "nt" => Ok(Axis::NT),
            "a" => Ok(Axis::A),
            _ => Err(Error::Config(format!("--axis {s:?}: expected one of L1, L2, n_t, a"))),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::L1 => "L1",
            Axis::L2 => "L2",
            Axis::NT => "n_t",
            Axis::A => "a",
        })
    }
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub value: f64,
    pub scalars: Vec<(String, f64)>,
    /// Distance of the quantization chain to its integer, or the
    /// heat-kernel error along `n_t`.
    pub residual: f64,
}

fn set_axis(cfg: &ExperimentConfig, axis: Axis, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    let count = || {
        (value >= 1.0 && value.fract() == 0.0)
            .then_some(value as usize)
            .ok_or_else(|| Error::Config(format!("--values: {axis} = {value} must be a positive integer")))
    };
    match axis {
        Axis::L1 => c.geometry.l1 = count()?,
        Axis::L2 => c.geometry.l2 = count()?,
        Axis::NT => c.calculus.quadrature.n_t = count()?,
        Axis::A => c.geometry.a = value,
    }
    c.run.experiments = match axis {
        Axis::NT => vec![Experiment::Calculus],
        _ => vec![Experiment::Quantization],
    };
    c.validate()?;
    Ok(c)
}

/// Sweeps one parameter: the quantization chain along `L1`, `L2` or `a`,
/// the heat-kernel error along `n_t`.
pub fn convergence_study(cfg: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if values.is_empty() {
        return Err(Error::Config("--values: at least one value is required".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("--values must be sorted ascending".into()));
    }
    values
        .iter()
        .map(|&value| {
            let c = set_axis(cfg, axis, value)?;
            let res = evaluate(&c)?;
            if let Some(f) = res.failures.first() {
                return Err(Error::Numerical(format!("{axis} = {value}: {}", f.error)));
            }
            let (scalars, residual) = match axis {
                Axis::NT => {
                    let e = mean(&res.calculus.expect("calculus ran").relative_error);
                    (vec![("relative_error".to_string(), e)], e)
                }
                _ => {
                    let q = res.quantization.expect("quantization ran");
                    let r = q.residuals;
                    let scalars = vec![
                        ("index".to_string(), q.index as f64),
                        ("normalized_current".to_string(), q.edge_current.mean.re),
                        ("pairing".to_string(), q.pairing.mean.re),
                        ("fedosov".to_string(), q.fedosov.mean.re),
                        ("half_pairing_squared".to_string(), q.half_pairing_squared.mean.re),
                    ];
                    (scalars, r.edge_current.max(r.pairing).max(r.fedosov))
                }
            };
            Ok(ConvergenceRow { value, scalars, residual })
        })
        .collect()
}
