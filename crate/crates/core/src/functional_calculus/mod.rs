//! Smooth spectral functions, the complex heat-kernel functional calculus
//! `F(H) = ∫dt F̃(t) e^{−H(1+it)}` and its exact spectral oracle, and
//! kernel-decay diagnostics.
//!
//! The Fourier weight is normalized as `F̃(t) = (1/2π)∫dE e^{iEt} e^E F(E)`,
//! the unique choice that makes the heat-kernel representation an identity.

mod decay;
mod profiles;

pub use decay::{boundary_comparison_kernel, edge_decay_profile, kernel_decay_report, DecayReport, EdgeDecayReport};
pub use profiles::{
    bump_on, compact_f, fermi_smooth, make_bump, make_switch, make_switch_with_plateau, smoothstep,
    smoothstep_derivative, FnProfile, NegDerivative, ProfileKind, Ramp, SmoothProfile, SpectralFunction,
    WindingMinusOne,
};

use gauss_quad::GaussLegendre;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::lattice_hamiltonian::OperatorMatrix;
use crate::linalg::{c, expm, frobenius, identity, Spectral, C64, I};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendrePanels,
}

/// Discretization of the `t`-integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub t_max: f64,
    pub n_t: usize,
    pub rule: QuadratureRule,
    /// Largest acceptable estimate of `∫_{|t|>t_max}|F̃|`.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    1e-6
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { t_max: 40.0, n_t: 2048, rule: QuadratureRule::Trapezoid, tail_tol: default_tail_tol() }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 2 {
            return Err(Error::Config(format!("calculus.quadrature.n_t = {} must be at least 2", self.n_t)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("calculus.quadrature.t_max = {} must be positive", self.t_max)));
        }
        Ok(())
    }

    /// Nodes and weights on `[−t_max, t_max]`.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let t = self.t_max;
        match self.rule {
            QuadratureRule::Trapezoid => {
                let h = 2.0 * t / self.n_t as f64;
                (0..=self.n_t)
                    .map(|j| {
                        let w = if j == 0 || j == self.n_t { 0.5 * h } else { h };
                        (-t + h * j as f64, w)
                    })
                    .collect()
            }
            QuadratureRule::GaussLegendrePanels => {
                const PER_PANEL: usize = 16;
                let panels = self.n_t.div_ceil(PER_PANEL);
                let gl = GaussLegendre::new(PER_PANEL.try_into().unwrap());
                let width = 2.0 * t / panels as f64;
                (0..panels)
                    .flat_map(|p| {
                        let mid = -t + width * (p as f64 + 0.5);
                        gl.as_node_weight_pairs()
                            .iter()
                            .map(move |&(x, w)| (mid + 0.5 * width * x, 0.5 * width * w))
                            .collect::<Vec<_>>()
                    })
                    .collect()
            }
        }
    }
}

/// `F̃(t) = (1/2π)∫dE e^{iEt} e^E F(E)` by Gauss–Legendre panels between the
/// knots of `F`, refined to resolve the oscillation at frequency `t`.
pub fn fourier_weight(f: &dyn SpectralFunction, t: f64) -> Result<C64> {
    let knots =
        f.knots().ok_or_else(|| Error::Numerical("Fourier weight needs a compactly supported function".into()))?;
    Ok(fourier_weight_on(&|e| f.eval(e), &knots, t))
}

/// Fourier weight of an arbitrary function integrated over `[knots₀, knots_last]`.
pub fn fourier_weight_on(f: &dyn Fn(f64) -> C64, knots: &[f64], t: f64) -> C64 {
    const NODES: usize = 24;
    let gl = GaussLegendre::new(NODES.try_into().unwrap());
    let mut total = C64::new(0.0, 0.0);
    for seg in knots.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let panels = (((hi - lo) * (1.0 + t.abs()) / 2.0).ceil() as usize).max(2);
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + width * (p as f64 + 0.5);
            for &(x, w) in gl.as_node_weight_pairs() {
                let e = mid + 0.5 * width * x;
                total += 0.5 * width * w * (I * e * t + e).exp() * f(e);
            }
        }
    }
    total / TAU
}

/// Exact oracle `Q F(Λ) Q†`.
pub fn apply_function_spectral(h: &OperatorMatrix, f: &dyn SpectralFunction) -> Result<OperatorMatrix> {
    let sp = Spectral::new(&h.entries.view())?;
    Ok(h.with_entries(sp.apply(|e| f.eval(e))))
}

/// How each `e^{−z(H−c)}` of the quadrature is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupBackend {
    /// Accumulate the quadrature on the eigenvalues, one decomposition for all nodes.
    Spectral,
    /// One scaling-and-squaring exponential per node; independent of any eigensolver.
    Taylor,
}

/// Result of the heat-kernel path.
#[derive(Clone, Debug)]
pub struct HeatKernelApplication {
    pub matrix: Array2<C64>,
    /// `H` was replaced by `H − shift` so that its spectrum lies in `[0, e_max]`.
    pub shift: f64,
    pub e_max: f64,
    pub tail_estimate: f64,
    pub nodes: usize,
}

/// Gershgorin enclosure of the spectrum of a Hermitian matrix.
fn gershgorin(h: &Array2<C64>) -> (f64, f64) {
    h.rows().into_iter().enumerate().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (i, row)| {
        let r: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, z)| z.norm()).sum();
        let d = row[i].re;
        (lo.min(d - r), hi.max(d + r))
    })
}

/// `∫_{|t|>T}|F̃| ≈ 2|F̃(T)|·T/(k−2)` for `|F̃(t)| ~ t^{−(k−1)}`.
fn tail_estimate(f: &dyn SpectralFunction, shifted: &dyn Fn(f64) -> C64, knots: &[f64], t_max: f64) -> f64 {
    let k = f.smoothness().max(3) as f64;
    let at = fourier_weight_on(shifted, knots, t_max).norm().max(fourier_weight_on(shifted, knots, -t_max).norm());
    2.0 * at * t_max / (k - 2.0)
}

/// Heat-kernel functional calculus
/// `F(H) ≈ Σⱼ wⱼ F̃_c(tⱼ) e^{−(1+itⱼ)(H−c)}` with `F_c(E) = F(E + c)`.
pub fn apply_function_heatkernel(
    h: &OperatorMatrix,
    f: &dyn SpectralFunction,
    quad: &QuadratureSpec,
    backend: SemigroupBackend,
) -> Result<HeatKernelApplication> {
    quad.validate()?;
    let knots = f
        .knots()
        .ok_or_else(|| Error::Numerical("heat-kernel calculus needs a compactly supported function".into()))?;
    let n = h.dim();
    let spectral = match backend {
        SemigroupBackend::Spectral => Some(Spectral::new(&h.entries.view())?),
        SemigroupBackend::Taylor => None,
    };
    let (lo, hi) = match &spectral {
        Some(sp) if n > 0 => (sp.min(), sp.max()),
        _ => gershgorin(&h.entries),
    };
    let shift = if n > 0 { lo } else { 0.0 };
    let shifted_knots: Vec<f64> = knots.iter().map(|k| k - shift).collect();
    let shifted = |e: f64| f.eval(e + shift);
    let tail = tail_estimate(f, &shifted, &shifted_knots, quad.t_max);
    if tail > quad.tail_tol {
        return Err(Error::QuadratureTail { tail, tol: quad.tail_tol });
    }
    let nodes = quad.nodes();
    let weights: Vec<(f64, C64)> =
        nodes.par_iter().map(|&(t, w)| (t, w * fourier_weight_on(&shifted, &shifted_knots, t))).collect();

    let matrix = match spectral {
        Some(sp) => {
            let acc: Vec<C64> = sp
                .values
                .iter()
                .map(|&e| {
                    let e = e - shift;
                    weights.iter().map(|&(t, w)| w * (-(c(1.0) + I * t) * e).exp()).sum()
                })
                .collect();
            sp.apply_weights(&acc)
        }
        None => {
            let hs = &h.entries - &identity(n).mapv(|z| z * shift);
            // Fixed chunking keeps the reduction order independent of the thread count.
            let partial: Vec<Array2<C64>> = weights
                .par_chunks(32)
                .map(|chunk| {
                    chunk.iter().fold(Array2::zeros((n, n)), |acc, &(t, w)| {
                        let z = c(1.0) + I * t;
                        acc + expm(&hs.mapv(|v| -z * v).view()).mapv(|v| v * w)
                    })
                })
                .collect();
            partial.into_iter().fold(Array2::zeros((n, n)), |acc, p| acc + p)
        }
    };
    Ok(HeatKernelApplication { matrix, shift, e_max: hi - shift, tail_estimate: tail, nodes: nodes.len() })
}

/// Relative Frobenius distance `‖A − B‖/‖B‖`.
pub fn relative_error(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let nb = frobenius(&b.view());
    let d = frobenius(&(a - b).view());
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

#[cfg(test)]
mod tests;
