//! Dense complex linear algebra shared by every module.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder, Zip};
use ndarray_linalg::{Eigh, EighInto, UPLO};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// Largest entry modulus.
pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_defect(a: &ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Diagonal of `a·b` without forming the product.
pub fn diag_of_product(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array1<C64> {
    let n = a.nrows();
    Array1::from_shape_fn(n, |i| a.row(i).iter().zip(b.column(i).iter()).map(|(x, y)| x * y).sum())
}

/// `‖A†A − 1‖_max`.
pub fn unitarity_defect(a: &ArrayView2<C64>) -> f64 {
    let p = dagger(a).dot(a);
    p.indexed_iter().fold(0.0f64, |worst, ((i, j), z)| {
        let target = if i == j { 1.0 } else { 0.0 };
        worst.max((z - target).norm())
    })
}

/// Column-major copy. The LAPACK bindings read a row-major Hermitian matrix
/// as its transpose, i.e. its complex conjugate, so inputs are normalized.
fn fortran(h: &ArrayView2<C64>) -> Array2<C64> {
    let mut m = Array2::zeros(h.raw_dim().f());
    m.assign(h);
    m
}

/// Eigendecomposition `H = Q Λ Q†` of a Hermitian matrix, reusable for any
/// spectral function.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

impl Spectral {
    pub fn new(h: &ArrayView2<C64>) -> Result<Self> {
        if h.nrows() == 0 {
            return Ok(Self { values: Array1::zeros(0), vectors: Array2::zeros((0, 0)) });
        }
        let (values, vectors) = fortran(h).eigh_into(UPLO::Upper).map_err(|e| Error::Linalg(e.to_string()))?;
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q f(Λ) Q†` for a complex-valued spectral function.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> Array2<C64> {
        let weights: Vec<C64> = self.values.iter().map(|&e| f(e)).collect();
        self.apply_weights(&weights)
    }

    pub fn apply_real<F: Fn(f64) -> f64>(&self, f: F) -> Array2<C64> {
        self.apply(|e| c(f(e)))
    }

    pub fn apply_weights(&self, weights: &[C64]) -> Array2<C64> {
        let mut scaled = self.vectors.clone();
        for (mut col, w) in scaled.columns_mut().into_iter().zip(weights) {
            col.mapv_inplace(|z| z * w);
        }
        scaled.dot(&dagger(&self.vectors.view()))
    }

    /// `e^{−zH}`.
    pub fn semigroup(&self, z: C64) -> Array2<C64> {
        self.apply(|e| (-z * e).exp())
    }
}

/// Eigenvalues only.
pub fn eigvalsh(h: &ArrayView2<C64>) -> Result<Array1<f64>> {
    if h.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    let (values, _) = fortran(h).eigh(UPLO::Upper).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(values)
}

/// Matrix exponential of a general (non-normal) complex matrix by scaling
/// and squaring with a truncated Taylor series.
pub fn expm(a: &ArrayView2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let x = a.mapv(|z| z * scale);
    let mut result = identity(n);
    let mut term = identity(n);
    // ‖x‖ ≤ 1/2, so 20 terms reach double precision.
    for k in 1..=20 {
        term = term.dot(&x).mapv(|z| z / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Positive square root of a positive semidefinite Hermitian matrix.
pub fn sqrt_psd(a: &ArrayView2<C64>) -> Result<Array2<C64>> {
    Ok(Spectral::new(a)?.apply_real(|e| e.max(0.0).sqrt()))
}

/// `|B| = (B†B)^{1/2}`.
pub fn abs_matrix(b: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let btb = dagger(b).dot(b);
    sqrt_psd(&btb.view())
}

/// Operator 2-norm via the largest eigenvalue of `A†A`.
pub fn operator_norm(a: &ArrayView2<C64>) -> Result<f64> {
    let ata = dagger(a).dot(a);
    Ok(eigvalsh(&ata.view())?.iter().cloned().fold(0.0, f64::max).sqrt())
}

pub fn scaled_sum(a: &Array2<C64>, alpha: C64, b: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    Zip::from(&mut out).and(b).for_each(|o, &y| *o += alpha * y);
    out
}
