//! Derivations, covariant derivatives and the bulk and edge traces.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice_hamiltonian::{covariant_derivative, Boundary, Geometry, OperatorMatrix, Realization};
use crate::linalg::{abs_matrix, c, commutator, operator_norm, C64, I};
use crate::{Error, Result};

/// Fraction of window mass allowed in the top rows of an edge window.
pub const EDGE_LEAK_TOL: f64 = 1e-6;
const LEAK_ROWS: usize = 3;
const LEAK_FLOOR: f64 = 1e-12;

/// `∇ⱼA = i[Xⱼ, A]`, kernel `i(xⱼ − yⱼ)A(x, y)` with the minimal image on
/// periodic directions.
pub fn nabla(a: &OperatorMatrix, dir: usize) -> OperatorMatrix {
    let g = &a.geometry;
    let entries = Array2::from_shape_fn(a.entries.dim(), |(x, y)| I * g.displacement(x, y, dir) * a.entries[[x, y]]);
    OperatorMatrix { geometry: *g, entries, hermitian: a.hermitian }
}

/// `Dⱼ·A`, the covariant derivative acting on the first kernel argument.
pub fn cov_derivative(a: &OperatorMatrix, dir: usize) -> OperatorMatrix {
    let d = covariant_derivative(&a.geometry, dir);
    a.with_entries(d.entries.dot(&a.entries))
}

/// Sites entering a trace, and the 1-direction length they average over.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub sites: Vec<usize>,
    pub columns: usize,
    /// Sites in the top rows of an edge window, used for the leak test.
    pub top: Vec<usize>,
}

impl Window {
    /// Every site of a torus, or the sites 3 away from open boundaries.
    pub fn bulk(g: &Geometry) -> Self {
        let sites = g.interior(3, true);
        Self { columns: 0, top: Vec::new(), sites }
    }

    /// Lower half of a strip. With an open 1-direction only the central
    /// half of the columns is used, away from the corners.
    pub fn edge(g: &Geometry) -> Result<Self> {
        if g.edge_offset().is_none() {
            return Err(Error::Geometry("edge trace needs a Dirichlet strip".into()));
        }
        let rows = g.l2() / 2;
        let cols: Vec<usize> = match g.bc1() {
            Boundary::Periodic => (0..g.l1()).collect(),
            _ => (g.l1() / 4..3 * g.l1() / 4).collect(),
        };
        let sites: Vec<usize> = (0..rows).flat_map(|r| cols.iter().map(move |&n1| g.index(n1, r))).collect();
        let top = sites.iter().copied().filter(|&i| g.lattice_coords(i)[1] + LEAK_ROWS >= rows).collect();
        Ok(Self { sites, columns: cols.len(), top })
    }
}

/// Disorder average with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub mean: C64,
    pub std_error: f64,
    pub n: usize,
    pub values: Vec<C64>,
}

impl TraceResult {
    pub fn from_values(values: Vec<C64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Numerical("trace over an empty ensemble".into()));
        }
        let mean = values.iter().sum::<C64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self { mean, std_error, n, values })
    }
}

/// Trace per unit area of one matrix: mean diagonal kernel over the bulk window.
pub fn bulk_density(a: &OperatorMatrix) -> Result<C64> {
    let w = Window::bulk(&a.geometry);
    if w.sites.is_empty() {
        return Err(Error::Geometry("bulk trace window is empty".into()));
    }
    let sum: C64 = w.sites.iter().map(|&i| a.entries[[i, i]]).sum();
    Ok(sum / (w.sites.len() as f64 * a.geometry.a().powi(2)))
}

/// Trace per unit edge length of one matrix: the window's diagonal summed
/// over rows and averaged over columns, in units of `1/a`.
///
/// Fails when more than [`EDGE_LEAK_TOL`] of the diagonal mass sits in the
/// top rows of the window.
pub fn edge_density(a: &OperatorMatrix) -> Result<C64> {
    edge_density_with(a, EDGE_LEAK_TOL)
}

/// [`edge_density`] with an explicit leak tolerance.
pub fn edge_density_with(a: &OperatorMatrix, leak_tol: f64) -> Result<C64> {
    let w = Window::edge(&a.geometry)?;
    let mass = |sites: &[usize]| sites.iter().map(|&i| a.entries[[i, i]].norm()).sum::<f64>();
    let total = mass(&w.sites);
    let top = mass(&w.top);
    // Below the absolute floor the operator vanishes in the window and
    // there is nothing to leak.
    if top > LEAK_FLOOR {
        let leaked = top / total;
        if leaked > leak_tol {
            return Err(Error::NotEdgeLocalized { leaked });
        }
    }
    let sum: C64 = w.sites.iter().map(|&i| a.entries[[i, i]]).sum();
    Ok(sum / (w.columns as f64 * a.geometry.a()))
}

pub fn trace_bulk(ops: &[OperatorMatrix]) -> Result<TraceResult> {
    TraceResult::from_values(ops.iter().map(bulk_density).collect::<Result<_>>()?)
}

pub fn trace_edge(ops: &[OperatorMatrix]) -> Result<TraceResult> {
    TraceResult::from_values(ops.iter().map(edge_density).collect::<Result<_>>()?)
}

/// Operators `A_{ω,s}` generated from an ensemble by a deterministic builder.
pub struct CovariantFamily<F> {
    pub builder: F,
    pub ensemble: Vec<Realization>,
    pub offset: f64,
}

impl<F> CovariantFamily<F>
where
    F: Fn(&Realization, f64) -> Result<OperatorMatrix> + Sync,
{
    /// Builds every member in parallel; the output order follows the ensemble.
    pub fn members(&self) -> Result<Vec<OperatorMatrix>> {
        let ops: Vec<OperatorMatrix> =
            self.ensemble.par_iter().map(|w| (self.builder)(w, self.offset)).collect::<Result<_>>()?;
        if let Some(first) = ops.first() {
            if ops.iter().any(|o| o.geometry != first.geometry) {
                return Err(Error::Geometry("family members live on different lattices".into()));
            }
        }
        Ok(ops)
    }

    pub fn trace_bulk(&self) -> Result<TraceResult> {
        trace_bulk(&self.members()?)
    }

    pub fn trace_edge(&self) -> Result<TraceResult> {
        trace_edge(&self.members()?)
    }
}

/// Largest operator norm over an ensemble, the finite stand-in for the
/// essential supremum over the hull.
pub fn ensemble_norm(ops: &[OperatorMatrix]) -> Result<f64> {
    ops.iter().map(|o| operator_norm(&o.entries.view())).try_fold(0.0f64, |m, n| Ok(m.max(n?)))
}

/// Residuals of the trace properties of `T̂` for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentities {
    pub cyclicity_residual: f64,
    pub holder_lhs: f64,
    pub holder_rhs: f64,
    pub holder_holds: bool,
    pub triangle_lhs: f64,
    pub triangle_rhs: f64,
    pub triangle_holds: bool,
}

/// Cyclicity `T̂(AB) = T̂(BA)`, Hölder `|T̂(AB)| ≤ ‖A‖ T̂(|B|)` and the
/// triangle inequality `T̂(|AB + B|) ≤ T̂(|AB|) + T̂(|B|)`.
///
/// `A` only needs to be bounded; `B` must be edge-localized, and the triangle
/// inequality is taken on the localized pair `AB`, `B`.
pub fn trace_identities_suite(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<TraceIdentities> {
    let ab = b.with_entries(a.entries.dot(&b.entries));
    let ba = b.with_entries(b.entries.dot(&a.entries));
    let abs = |m: &Array2<C64>| -> Result<OperatorMatrix> { Ok(b.with_entries(abs_matrix(&m.view())?)) };
    let cyclicity_residual = (edge_density(&ab)? - edge_density(&ba)?).norm();
    let holder_lhs = edge_density(&ab)?.norm();
    let abs_b = edge_density(&abs(&b.entries)?)?.re;
    let holder_rhs = operator_norm(&a.entries.view())? * abs_b;
    let triangle_lhs = edge_density(&abs(&(&ab.entries + &b.entries))?)?.re;
    let triangle_rhs = edge_density(&abs(&ab.entries)?)?.re + abs_b;
    let slack = 1e-12 * (1.0 + holder_rhs.abs() + triangle_rhs.abs());
    Ok(TraceIdentities {
        cyclicity_residual,
        holder_lhs,
        holder_rhs,
        holder_holds: holder_lhs <= holder_rhs + slack,
        triangle_lhs,
        triangle_rhs,
        triangle_holds: triangle_lhs <= triangle_rhs + slack,
    })
}

/// `Σ = sign(x₁ − centre)` with `sign(0) = +1`, minimal image when periodic.
pub fn sign_operator(g: &Geometry) -> OperatorMatrix {
    let centre = g.origin()[0] + g.a() * (g.l1() / 2) as f64;
    let period = g.a() * g.l1() as f64;
    let n = g.n_sites();
    let mut sigma = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let mut d = g.coords(i)[0] - centre;
        if g.bc1().is_periodic() {
            d -= period * (d / period).round();
        }
        sigma[[i, i]] = c(if d >= -1e-12 * g.a() { 1.0 } else { -1.0 });
    }
    OperatorMatrix { geometry: *g, entries: sigma, hermitian: true }
}

/// `‖[Σ, A]‖₂²`.
pub fn hilbert_schmidt_commutator(a: &OperatorMatrix, sigma: &OperatorMatrix) -> f64 {
    commutator(&sigma.entries, &a.entries).iter().map(|z| z.norm_sqr()).sum()
}
