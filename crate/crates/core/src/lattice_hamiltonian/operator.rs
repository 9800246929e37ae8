use ndarray::Array2;

use super::Geometry;
use crate::linalg::{hermiticity_defect, C64};
use crate::{Error, Result};

/// Dense operator on the sites of a [`Geometry`]; entries are the lattice
/// kernel `⟨x|A|y⟩` up to the cell-area normalization `a²`.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub geometry: Geometry,
    pub entries: Array2<C64>,
    pub hermitian: bool,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl OperatorMatrix {
    pub fn new(geometry: Geometry, entries: Array2<C64>) -> Result<Self> {
        let n = geometry.n_sites();
        if entries.dim() != (n, n) {
            return Err(Error::Geometry(format!(
                "matrix shape {:?} does not match {} lattice sites",
                entries.dim(),
                n
            )));
        }
        Ok(Self { geometry, entries, hermitian: false })
    }

    /// Construct and certify Hermiticity to `1e-12` in the max norm.
    pub fn hermitian(geometry: Geometry, entries: Array2<C64>) -> Result<Self> {
        let mut op = Self::new(geometry, entries)?;
        let defect = hermiticity_defect(&op.entries.view());
        if defect > HERMITIAN_TOL {
            return Err(Error::Numerical(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.n_sites();
        Self { geometry, entries: Array2::zeros((n, n)), hermitian: true }
    }

    pub fn identity(geometry: Geometry) -> Self {
        Self { geometry, entries: Array2::eye(geometry.n_sites()), hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Matrix entry between lattice sites `x = (n₁, n₂)` and `y`.
    pub fn kernel(&self, x: [usize; 2], y: [usize; 2]) -> C64 {
        let g = &self.geometry;
        self.entries[[g.index(x[0], x[1]), g.index(y[0], y[1])]]
    }

    /// Continuum-normalized kernel value `entries/a²`.
    pub fn kernel_density(&self, i: usize, j: usize) -> C64 {
        let a = self.geometry.a();
        self.entries[[i, j]] / (a * a)
    }

    pub fn with_entries(&self, entries: Array2<C64>) -> Self {
        Self { geometry: self.geometry, entries, hermitian: false }
    }
}
