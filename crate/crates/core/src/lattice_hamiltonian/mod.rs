//! Lattice Landau Hamiltonians in the Landau gauge, random potentials,
//! Dirichlet restriction to a half-plane and magnetic translations.
//!
//! The kinetic part is `H_L = ½ Σⱼ ∇ⱼ⁺* ∇ⱼ⁺` with Peierls phase `e^{iγa·x₂}`
//! on every hop in the 1-direction, which reproduces `½(D₁² + D₂²)` with
//! `D₁ = i∂₁ − γX₂`, `D₂ = i∂₂` as `a → 0`.

mod disorder;
mod geometry;
mod operator;

pub use disorder::{realization_seeds, CellProfile, DisorderModel, Distribution, Realization};
pub use geometry::{gamma_from_flux, Boundary, Geometry};
pub use operator::OperatorMatrix;

use ndarray::Array2;

use crate::linalg::{c, C64, I};
use crate::{Error, Result};

/// Neighbour of site `i` one step forward in `dir`, honouring the boundary.
fn forward(g: &Geometry, i: usize, dir: usize) -> Option<usize> {
    let [n1, n2] = g.lattice_coords(i);
    let (n, len) = if dir == 0 { (n1, g.l1()) } else { (n2, g.l2()) };
    let next = if n + 1 < len {
        n + 1
    } else if g.bc(dir).is_periodic() {
        0
    } else {
        return None;
    };
    Some(if dir == 0 { g.index(next, n2) } else { g.index(n1, next) })
}

/// Landau Hamiltonian `H_L` on `geometry`.
///
/// Diagonal `2/a²` (one `1/a²` per direction), hops `−1/(2a²)` with the
/// phase `e^{iγa·x₂}` forward in the 1-direction. Hops leaving an open or
/// Dirichlet boundary are dropped.
pub fn build_landau(geometry: &Geometry) -> OperatorMatrix {
    let g = geometry;
    let n = g.n_sites();
    let a = g.a();
    let t = 0.5 / (a * a);
    let mut h = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        h[[i, i]] = c(2.0 / (a * a));
        if let Some(j) = forward(g, i, 0) {
            let hop = -t * (I * g.gamma() * a * g.coords(i)[1]).exp();
            h[[i, j]] += hop;
            h[[j, i]] += hop.conj();
        }
        if let Some(j) = forward(g, i, 1) {
            h[[i, j]] += c(-t);
            h[[j, i]] += c(-t);
        }
    }
    OperatorMatrix { geometry: *g, entries: h, hermitian: true }
}

/// Nearest plane-lattice index of a coordinate, shifted by the realization offset.
fn plane_index(x: f64, a: f64, shift: i64) -> i64 {
    (x / a + 0.5 + 1e-9).floor() as i64 + shift
}

/// Potential `V_ω` as a diagonal matrix.
///
/// A site at `x` is attributed to the plane-lattice point nearest to `x`;
/// its unit cell `n` and sub-site `k` decide `w(k) + λ(n)·v(k)`.
pub fn build_potential(
    model: &DisorderModel,
    realization: &Realization,
    geometry: &Geometry,
) -> Result<OperatorMatrix> {
    model.validate()?;
    let g = geometry;
    let cell = model.cell as i64;
    for dir in 0..2 {
        if g.bc(dir).is_periodic() && g.len(dir) as i64 % cell != 0 {
            return Err(Error::Geometry(format!(
                "unit cell of {} sites does not divide the periodic extent {} in direction {}",
                model.cell,
                g.len(dir),
                dir + 1
            )));
        }
    }
    let n = g.n_sites();
    let mut v = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let x = g.coords(i);
        let mut cell_idx = [0i64; 2];
        let mut u = [0.0; 2];
        for dir in 0..2 {
            let mut k = plane_index(x[dir], g.a(), realization.x0[dir]);
            if g.bc(dir).is_periodic() {
                k = k.rem_euclid(g.len(dir) as i64);
            }
            cell_idx[dir] = k.div_euclid(cell);
            u[dir] = (k.rem_euclid(cell) as f64 + 0.5) / cell as f64;
        }
        let mut val = model.w.eval(u);
        let bump = model.v.eval(u);
        if bump != 0.0 {
            val += realization.coupling(model, cell_idx) * bump;
        }
        v[[i, i]] = c(val);
    }
    Ok(OperatorMatrix { geometry: *g, entries: v, hermitian: true })
}

/// `H_L + V_ω` on `geometry`.
pub fn build_hamiltonian(
    geometry: &Geometry,
    model: &DisorderModel,
    realization: &Realization,
) -> Result<OperatorMatrix> {
    let mut h = build_landau(geometry);
    if !model.is_clean() {
        h.entries += &build_potential(model, realization, geometry)?.entries;
    }
    Ok(h)
}

/// Rows of `geometry` lying strictly inside the half-plane `x₂ > −s`, and the
/// strip geometry they form.
fn half_plane_rows(geometry: &Geometry, s: f64) -> Result<(usize, Geometry)> {
    let g = geometry;
    if g.bc2().is_periodic() {
        return Err(Error::Geometry("cannot cut a half-plane out of a periodic 2-direction".into()));
    }
    let a = g.a();
    // Position of the wall measured in rows from the bottom row.
    let wall = (-s - g.origin()[1]) / a;
    if (wall - wall.round()).abs() > 1e-9 {
        return Err(Error::Geometry(format!("wall x2 = {} is not on a lattice row", -s)));
    }
    let wall = wall.round() as i64;
    if wall < -1 {
        return Err(Error::Geometry(format!("edge offset s = {s} lies below the lattice")));
    }
    let first = (wall + 1).max(0) as usize;
    let rows = g.l2().saturating_sub(first);
    let strip = if rows == 0 {
        *g
    } else {
        Geometry::with_origin(
            g.l1(),
            rows,
            a,
            g.gamma(),
            g.bc1(),
            Boundary::DirichletEdge { s },
            [g.origin()[0], -s + a],
        )?
    };
    Ok((first, strip))
}

/// Principal submatrix of `op` on the half-plane `x₂ > −s`.
///
/// Applied to a Hamiltonian this is the Dirichlet restriction; applied to any
/// other operator it is `φ_s A φ_s` read on the strip.
pub fn restrict_half_plane(op: &OperatorMatrix, s: f64) -> Result<OperatorMatrix> {
    let (first, strip) = half_plane_rows(&op.geometry, s)?;
    let l1 = op.geometry.l1();
    let start = first * l1;
    let n = op.dim();
    if start >= n {
        return Ok(OperatorMatrix { geometry: strip, entries: Array2::zeros((0, 0)), hermitian: true });
    }
    let entries = op.entries.slice(ndarray::s![start.., start..]).to_owned();
    Ok(OperatorMatrix { geometry: strip, entries, hermitian: op.hermitian })
}

/// Dirichlet restriction `Ĥ_{ω,s}` of a bulk Hamiltonian (row deletion).
pub fn restrict_dirichlet(h_bulk: &OperatorMatrix, s: f64) -> Result<OperatorMatrix> {
    restrict_half_plane(h_bulk, s)
}

/// Magnetic translation `(U(ξ)ψ)(x) = e^{−iγξ₂(x₁−ξ₁)} ψ(x − ξ)` with `ξ = a·m`.
///
/// The result maps `ℓ²(geometry)` onto `ℓ²(geometry.translated(m))`; on
/// periodic directions sites are relabelled, on the others the lattice moves.
pub fn magnetic_translation(geometry: &Geometry, m: [i64; 2]) -> Result<OperatorMatrix> {
    let g = geometry;
    let a = g.a();
    let xi = [a * m[0] as f64, a * m[1] as f64];
    if g.bc1().is_periodic() && m[1] != 0 && !geometry::flux_integer(g.flux() * (m[1] * g.l1() as i64) as f64) {
        return Err(Error::Geometry(format!(
            "translation by {m:?} is incompatible with the torus flux: flux * m2 * L1 must be an integer"
        )));
    }
    let target = g.translated(m);
    let n = g.n_sites();
    let mut u = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let [n1, n2] = target.lattice_coords(i);
        let x = target.coords(i);
        let mut src = [n1 as i64, n2 as i64];
        for dir in 0..2 {
            if g.bc(dir).is_periodic() {
                src[dir] = (src[dir] - m[dir]).rem_euclid(g.len(dir) as i64);
            }
        }
        let j = g.index(src[0] as usize, src[1] as usize);
        u[[i, j]] = (-I * g.gamma() * xi[1] * (x[0] - xi[0])).exp();
    }
    Ok(OperatorMatrix { geometry: target, entries: u, hermitian: false })
}

/// Projective multiplier `Φ(ξ, η) = e^{−iγξ₂η₁}` of the magnetic translations.
pub fn translation_cocycle(gamma: f64, xi: [f64; 2], eta: [f64; 2]) -> C64 {
    (-I * gamma * xi[1] * eta[0]).exp()
}

/// Lattice covariant derivative `Dⱼ`: the central difference for `i∂ⱼ`
/// dressed with the Peierls phase, `D₁ → i∂₁ − γx₂` as `a → 0`.
///
/// With this choice `i[H_L, Xⱼ] = −Dⱼ` holds exactly on the lattice.
pub fn covariant_derivative(geometry: &Geometry, dir: usize) -> OperatorMatrix {
    let g = geometry;
    let n = g.n_sites();
    let a = g.a();
    let mut d = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        if let Some(j) = forward(g, i, dir) {
            let phase = if dir == 0 { (I * g.gamma() * a * g.coords(i)[1]).exp() } else { c(1.0) };
            let hop = I / (2.0 * a) * phase;
            d[[i, j]] += hop;
            d[[j, i]] += hop.conj();
        }
    }
    OperatorMatrix { geometry: *g, entries: d, hermitian: true }
}

/// Position operator `Xⱼ` (diagonal).
pub fn position(geometry: &Geometry, dir: usize) -> OperatorMatrix {
    let n = geometry.n_sites();
    let mut x = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        x[[i, i]] = c(geometry.coords(i)[dir]);
    }
    OperatorMatrix { geometry: *geometry, entries: x, hermitian: true }
}
