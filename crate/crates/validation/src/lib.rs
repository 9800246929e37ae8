//! Independent oracles for the acceptance suite: Bloch-band Chern numbers
//! and band edges of the Hofstadter model, computed with nalgebra. The crate
//! does not depend on the production code.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use std::f64::consts::TAU;

/// Bloch Hamiltonian of the flux-`p/q` half-Laplacian on its magnetic cell
/// of `q` rows: diagonal `2 − cos(k₁ + γn)`, hops `−½` between rows and the
/// Bloch phase `e^{ik₂}` on the wrap.
fn bloch(p: i64, q: usize, k1: f64, k2: f64) -> DMatrix<Complex<f64>> {
    let gamma = TAU * p as f64 / q as f64;
    let mut h = DMatrix::zeros(q, q);
    for n in 0..q {
        h[(n, n)] += Complex::new(2.0 - (k1 + gamma * n as f64).cos(), 0.0);
        let m = (n + 1) % q;
        let hop = if m == 0 { Complex::from_polar(0.5, k2) } else { Complex::new(0.5, 0.0) };
        h[(n, m)] -= hop;
        h[(m, n)] -= hop.conj();
    }
    h
}

/// Lowest `bands` eigenvectors of the Bloch Hamiltonian, as columns.
fn frame(p: i64, q: usize, k1: f64, k2: f64, bands: usize) -> DMatrix<Complex<f64>> {
    let eig = SymmetricEigen::new(bloch(p, q, k1, k2));
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(q, bands, |r, c| eig.eigenvectors[(r, order[c])])
}

/// Chern number of the lowest `bands` bands by the plaquette Berry-curvature
/// sum (gauge-invariant link variables) on an `n × n` Brillouin-zone grid.
pub fn fhs_chern(p: i64, q: usize, bands: usize, n: usize) -> f64 {
    let k = |i: usize| TAU * (i % n) as f64 / n as f64;
    let frames: Vec<Vec<DMatrix<Complex<f64>>>> =
        (0..n).map(|i| (0..n).map(|j| frame(p, q, k(i), k(j), bands)).collect()).collect();
    let link = |a: &DMatrix<Complex<f64>>, b: &DMatrix<Complex<f64>>| (a.adjoint() * b).determinant();
    let mut flux = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&frames[i][j], &frames[(i + 1) % n][j]);
            let (c, d) = (&frames[(i + 1) % n][(j + 1) % n], &frames[i][(j + 1) % n]);
            flux += (link(a, b) * link(b, c) * link(c, d) * link(d, a)).arg();
        }
    }
    flux / TAU
}

/// Energy bands of the Bloch Hamiltonian on the grid, sorted per k.
pub fn band_edges(p: i64, q: usize, n: usize) -> Vec<(f64, f64)> {
    let mut edges = vec![(f64::INFINITY, f64::NEG_INFINITY); q];
    for i in 0..n {
        for j in 0..n {
            let mut e: Vec<f64> =
                SymmetricEigen::new(bloch(p, q, TAU * i as f64 / n as f64, TAU * j as f64 / n as f64))
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect();
            e.sort_by(f64::total_cmp);
            for (b, v) in e.into_iter().enumerate() {
                edges[b] = (edges[b].0.min(v), edges[b].1.max(v));
            }
        }
    }
    edges
}

/// `PASS`/`FAIL` line for one criterion.
pub fn report(criterion: u32, pass: bool, detail: &str) -> bool {
    println!("criterion {criterion:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
