use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Profile on the unit cell, sampled at sub-site centres `(k + ½)/cell`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellProfile {
    Zero,
    /// `A·(2 − cos 2πu₁ − cos 2πu₂)/4`, periodic with values in `[0, A]`.
    Cosine {
        amplitude: f64,
    },
    /// `A·sin²(πu₁)·sin²(πu₂)`, vanishing on the cell boundary.
    Bump {
        amplitude: f64,
    },
}

impl CellProfile {
    pub fn eval(&self, u: [f64; 2]) -> f64 {
        match *self {
            CellProfile::Zero => 0.0,
            CellProfile::Cosine { amplitude } => {
                amplitude * (2.0 - (2.0 * PI * u[0]).cos() - (2.0 * PI * u[1]).cos()) / 4.0
            }
            CellProfile::Bump { amplitude } => amplitude * (PI * u[0]).sin().powi(2) * (PI * u[1]).sin().powi(2),
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            CellProfile::Zero => 0.0,
            CellProfile::Cosine { amplitude } | CellProfile::Bump { amplitude } => amplitude,
        }
    }
}

/// Law of the per-cell couplings `λ(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[−λ, λ]`.
    Uniform,
    /// Uniform on `[0, λ]`, keeping the potential nonnegative.
    UniformNonneg,
    /// Every cell carries `λ`.
    Fixed,
}

/// Periodic background plus random single-cell bumps,
/// `V(x) = w(x + x₀) + Σₙ λ(n)·v(x + x₀ + n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderModel {
    pub w: CellProfile,
    pub v: CellProfile,
    pub lambda_max: f64,
    pub dist: Distribution,
    /// Unit cell side in lattice sites.
    pub cell: usize,
}

impl DisorderModel {
    pub fn clean() -> Self {
        Self { w: CellProfile::Zero, v: CellProfile::Zero, lambda_max: 0.0, dist: Distribution::Fixed, cell: 1 }
    }

    /// On-site Anderson disorder: one site per cell, couplings uniform in `[−λ, λ]`.
    pub fn anderson(lambda: f64) -> Self {
        Self {
            w: CellProfile::Zero,
            v: CellProfile::Bump { amplitude: 1.0 },
            lambda_max: lambda,
            dist: Distribution::Uniform,
            cell: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 {
            return Err(Error::Config("disorder.cell must be at least 1".into()));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max >= 0.0) {
            return Err(Error::Config(format!("disorder.lambda = {} must be finite and nonnegative", self.lambda_max)));
        }
        for p in [self.w, self.v] {
            if !p.amplitude().is_finite() {
                return Err(Error::Config("profile amplitude must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.w == CellProfile::Zero && (self.v == CellProfile::Zero || self.lambda_max == 0.0)
    }
}

/// One disorder configuration ω: a lattice offset `x₀` (in sites) and a
/// seed from which every coupling `λ(n)` is regenerated on demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub x0: [i64; 2],
    pub seed: u64,
}

fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

impl Realization {
    /// Draw the offset uniformly in the unit cell.
    pub fn sample(model: &DisorderModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = model.cell as i64;
        let x0 = [rng.random_range(0..cell), rng.random_range(0..cell)];
        Self { x0, seed }
    }

    pub fn clean() -> Self {
        Self { x0: [0, 0], seed: 0 }
    }

    /// Coupling of unit cell `n`; each cell owns an independent ChaCha stream.
    pub fn coupling(&self, model: &DisorderModel, n: [i64; 2]) -> f64 {
        let lam = model.lambda_max;
        if lam == 0.0 {
            return 0.0;
        }
        match model.dist {
            Distribution::Fixed => lam,
            dist => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(((zigzag(n[0]) & 0xffff_ffff) << 32) | (zigzag(n[1]) & 0xffff_ffff));
                match dist {
                    Distribution::Uniform => rng.random_range(-lam..=lam),
                    _ => rng.random_range(0.0..=lam),
                }
            }
        }
    }

    /// Couplings on an `n₁ × n₂` block of cells, row-major.
    pub fn lambdas(&self, model: &DisorderModel, cells: [usize; 2]) -> Vec<f64> {
        (0..cells[1] as i64)
            .flat_map(|n2| (0..cells[0] as i64).map(move |n1| [n1, n2]))
            .map(|n| self.coupling(model, n))
            .collect()
    }

    /// The configuration `ξ·ω`, with `V_{ξ·ω}(x) = V_ω(x − ξ)` for `ξ = a·m`.
    pub fn translated(&self, m: [i64; 2]) -> Self {
        Self { x0: [self.x0[0] - m[0], self.x0[1] - m[1]], seed: self.seed }
    }
}

/// Per-realization seeds split off a master seed by stream counter, so the
/// assignment is independent of scheduling.
pub fn realization_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(r);
            rng.random()
        })
        .collect()
}
