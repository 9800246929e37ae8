//! Continuum Landau heat kernel in complex time, matrix semigroups, the
//! reflection construction of the half-plane semigroup, and fitted Gaussian
//! bounds on lattice kernels.

use gauss_quad::GaussLegendre;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::lattice_hamiltonian::{restrict_half_plane, Boundary, OperatorMatrix};
use crate::linalg::{c, expm, Spectral, C64, I};
use crate::{Error, Result};

/// Complex time with strictly positive real part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "C64", into = "C64")]
pub struct ComplexTime(C64);

impl ComplexTime {
    pub fn new(z: C64) -> Result<Self> {
        if z.re > 0.0 && z.is_finite() {
            Ok(Self(z))
        } else {
            Err(Error::Numerical(format!("complex time {z} needs a positive real part")))
        }
    }

    pub fn real(t: f64) -> Result<Self> {
        Self::new(c(t))
    }

    pub fn z(self) -> C64 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.im == 0.0
    }
}

impl TryFrom<C64> for ComplexTime {
    type Error = Error;
    fn try_from(z: C64) -> Result<Self> {
        Self::new(z)
    }
}

impl From<ComplexTime> for C64 {
    fn from(z: ComplexTime) -> C64 {
        z.0
    }
}

/// Landau heat kernel `⟨x|e^{−zH_L}|y⟩` from Mehler's formula,
/// `(γ/4π)·sinh(γz/2)⁻¹·e^{−(γ/4)coth(γz/2)|x−y|²}` times the gauge phase
/// `e^{−i(γ/2)(x₁−y₁)(x₂+y₂)}` of the lattice (`D₁ = i∂₁ − γx₂`).
/// Falls back to the free kernel as `γz → 0`.
pub fn mehler_kernel(x: [f64; 2], y: [f64; 2], z: ComplexTime, gamma: f64) -> C64 {
    let z = z.z();
    let d = [x[0] - y[0], x[1] - y[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    let phase = (-I * 0.5 * gamma * d[0] * (x[1] + y[1])).exp();
    let w = 0.5 * gamma * z;
    if w.norm() < 1e-6 {
        return phase / (2.0 * PI * z) * (-r2 / (2.0 * z)).exp();
    }
    let (sh, ch) = (w.sinh(), w.cosh());
    phase * gamma / (4.0 * PI) / sh * (-0.25 * gamma * ch / sh * r2).exp()
}

/// `e^{−zH}` by spectral decomposition.
pub fn semigroup(h: &OperatorMatrix, z: ComplexTime) -> Result<OperatorMatrix> {
    let sp = Spectral::new(&h.entries.view())?;
    Ok(h.with_entries(sp.semigroup(z.z())))
}

/// Half-plane semigroup `e^{−zĤ_s}` from the reflection principle:
/// `Π e^{−zH̃}(1 − S) Π` with `H̃ = ΠH + (1 − Π)SHS` on the lattice doubled
/// about the wall row `x₂ = −s`.
///
/// `h_bulk` must be nearest-neighbour in the 2-direction and contain the row
/// just below the wall. The exponential is taken by scaling and squaring, so
/// this path never touches the restricted operator or an eigensolver.
pub fn dirichlet_reflection_semigroup(h_bulk: &OperatorMatrix, s: f64, z: ComplexTime) -> Result<OperatorMatrix> {
    let g = &h_bulk.geometry;
    if g.bc2() == Boundary::Periodic {
        return Err(Error::Geometry("reflection needs a lattice that is open in the 2-direction".into()));
    }
    let a = g.a();
    let wall_f = (-s - g.origin()[1]) / a;
    let wall = wall_f.round();
    if (wall - wall_f).abs() > 1e-9 || wall < 1.0 || wall as usize + 1 >= g.l2() {
        return Err(Error::Geometry(format!(
            "cannot symmetrize about x2 = {}: the wall must be an interior lattice row",
            -s
        )));
    }
    let wall = wall as usize;
    let strip = restrict_half_plane(h_bulk, s)?.geometry;
    let rows = strip.l2();
    let l1 = g.l1();
    // Doubled rows k = 0..=2·rows with the wall at k = rows; plane row of k ≥ rows − 1.
    let plane_row = |k: usize| (wall + k) as isize - rows as isize;
    let mirror = |k: usize| 2 * rows - k;
    let dim = l1 * (2 * rows + 1);
    let entry = |k: usize, n1: usize, j: usize, m1: usize| -> C64 {
        let (pk, pj) =
            if k > rows { (plane_row(k), plane_row(j)) } else { (plane_row(mirror(k)), plane_row(mirror(j))) };
        if pj < 0 || pj as usize >= g.l2() || pk < 0 {
            return c(0.0);
        }
        h_bulk.entries[[g.index(n1, pk as usize), g.index(m1, pj as usize)]]
    };
    let mut ht = Array2::<C64>::zeros((dim, dim));
    for k in 0..=2 * rows {
        for j in k.saturating_sub(1)..=(k + 1).min(2 * rows) {
            for n1 in 0..l1 {
                for m1 in 0..l1 {
                    ht[[k * l1 + n1, j * l1 + m1]] = entry(k, n1, j, m1);
                }
            }
        }
    }
    let e = expm(&ht.mapv(|v| -z.z() * v).view());
    let n = strip.n_sites();
    let mut out = Array2::<C64>::zeros((n, n));
    for x in 0..n {
        let kx = rows + 1 + x / l1;
        for y in 0..n {
            let (ky, n1y) = (rows + 1 + y / l1, y % l1);
            out[[x, y]] = e[[kx * l1 + x % l1, ky * l1 + n1y]] - e[[kx * l1 + x % l1, mirror(ky) * l1 + n1y]];
        }
    }
    Ok(OperatorMatrix { geometry: strip, entries: out, hermitian: false })
}

/// Which Gaussian bound a kernel is tested against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// `(1/Re z)·e^{−½|x−y|² Re(1/z)}`, the modulus of the Mehler kernel.
    Landauest,
    /// `(1/Re z)·e^{−¼|x−y|² Re(1/z)}` for the full disordered semigroup.
    Complexest,
    /// `D₁ⁿ e^{−zĤ}` on the half-plane. Real `z = t` uses
    /// `(1+t)^{n+½}/t^{n/2+1}·e^{−|x−y|²/(2^{n+1}t)}`, complex `z` uses
    /// `(1+|z|^{n+1})/(Re z)^{n/2+1}·e^{−|x−y|² Re(1/z)/10}`.
    HalfplaneN0,
    HalfplaneN1,
    HalfplaneN2,
}

impl BoundId {
    pub fn derivative_order(self) -> i32 {
        match self {
            BoundId::HalfplaneN1 => 1,
            BoundId::HalfplaneN2 => 2,
            _ => 0,
        }
    }

    /// `(prefactor, α)` with the bound `c·prefactor·e^{−α|x−y|²}`.
    pub fn envelope(self, z: ComplexTime) -> (f64, f64) {
        let w = z.z();
        let re_inv = w.inv().re;
        let n = self.derivative_order();
        match self {
            BoundId::Landauest => (1.0 / w.re, 0.5 * re_inv),
            BoundId::Complexest => (1.0 / w.re, 0.25 * re_inv),
            _ if z.is_real() => {
                let t = w.re;
                ((1.0 + t).powf(n as f64 + 0.5) / t.powf(0.5 * n as f64 + 1.0), 1.0 / (2f64.powi(n + 1) * t))
            }
            _ => ((1.0 + w.norm().powi(n + 1)) / w.re.powf(0.5 * n as f64 + 1.0), re_inv / 10.0),
        }
    }
}

/// Smallest constant for which a Gaussian bound holds on a lattice kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    pub fitted_c: f64,
    /// `max |K|/bound` at the fitted constant; 1 whenever some pair is fitted.
    pub max_violation_ratio: f64,
    pub pairs_checked: usize,
    /// Pairs whose entry lies below `relative_floor·max|K|` and so cannot
    /// inform the Gaussian tail; they are counted, not fitted.
    pub pairs_below_floor: usize,
}

/// Fit `c` in `|K(x,y)| ≤ c·prefactor(z)·e^{−α|x−y|²}` over all pairs of
/// window sites, reading the matrix as a kernel density (`entries/a²`).
///
/// The window excludes `margin` sites next to artificial boundaries; a
/// Dirichlet wall stays inside.
pub fn verify_gaussian_bound(
    kernel: &OperatorMatrix,
    z: ComplexTime,
    bound_id: BoundId,
    margin: usize,
    relative_floor: f64,
) -> BoundReport {
    let g = &kernel.geometry;
    let sites = g.interior(margin, false);
    let (pref, alpha) = bound_id.envelope(z);
    let area = g.a() * g.a();
    let max = sites
        .iter()
        .flat_map(|&x| sites.iter().map(move |&y| (x, y)))
        .map(|(x, y)| kernel.entries[[x, y]].norm())
        .fold(0.0, f64::max);
    let floor = relative_floor * max;
    let (ratio, below) = sites
        .par_iter()
        .map(|&x| {
            sites.iter().fold((0.0f64, 0usize), |(r, b), &y| {
                let v = kernel.entries[[x, y]].norm();
                if v < floor || v == 0.0 {
                    return (r, b + 1);
                }
                let r2 = g.distance(x, y).powi(2);
                (r.max(v / area / (pref * (-alpha * r2).exp())), b)
            })
        })
        .reduce(|| (0.0, 0), |(r1, b1), (r2, b2)| (r1.max(r2), b1 + b2));
    BoundReport {
        bound_id,
        fitted_c: ratio,
        max_violation_ratio: if ratio > 0.0 { 1.0 } else { 0.0 },
        pairs_checked: sites.len() * sites.len(),
        pairs_below_floor: below,
    }
}

/// `∫d²r e^{−|x−r|²/a} e^{−|r−y|²/b}` by tensor Gauss–Legendre on the square
/// of half-width `half_width` around the saddle, against the closed form
/// `π·ab/(a+b)·e^{−|x−y|²/(a+b)}`.
pub fn gaussian_convolution_check(a: C64, b: C64, x: [f64; 2], y: [f64; 2], half_width: f64) -> Result<(C64, C64)> {
    if a.re <= 0.0 || b.re <= 0.0 {
        return Err(Error::Numerical("Gaussian convolution needs Re a > 0 and Re b > 0".into()));
    }
    let (ka, kb) = (a.inv().re, b.inv().re);
    let kappa = ka + kb;
    let gl = GaussLegendre::new(48.try_into().unwrap());
    let panels = ((2.0 * half_width * kappa.sqrt()).ceil() as usize).max(4);
    let mut lhs = c(1.0);
    let mut tail = 0.0f64;
    for dir in 0..2 {
        let centre = (ka * x[dir] + kb * y[dir]) / kappa;
        let peak = (-(ka * kb / kappa) * (x[dir] - y[dir]).powi(2)).exp();
        tail = tail.max(peak * (-kappa * half_width.powi(2)).exp() / (kappa * half_width));
        let width = 2.0 * half_width / panels as f64;
        let mut sum = c(0.0);
        for p in 0..panels {
            let mid = centre - half_width + width * (p as f64 + 0.5);
            for &(u, w) in gl.as_node_weight_pairs() {
                let r = mid + 0.5 * width * u;
                sum += 0.5 * width * w * (-(x[dir] - r).powi(2) / a - (r - y[dir]).powi(2) / b).exp();
            }
        }
        lhs *= sum;
    }
    if tail > 1e-10 {
        return Err(Error::Numerical(format!(
            "quadrature window of half-width {half_width} leaves tail mass {tail:.1e}; enlarge it"
        )));
    }
    let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    let rhs = PI * a * b / (a + b) * (-r2 / (a + b)).exp();
    Ok((lhs, rhs))
}
