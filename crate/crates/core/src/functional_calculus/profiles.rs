use serde::{Deserialize, Serialize};

use crate::linalg::{c, C64};

/// Polynomial smoothstep of order `k`: `S(0) = 0`, `S(1) = 1`, and the first
/// `k` derivatives vanish at both ends.
pub fn smoothstep(u: f64, k: u32) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    // Regularized incomplete beta I_u(k+1, k+1): a sum of positive terms, so
    // no cancellation and exact symmetry S(u) + S(1−u) = 1 up to rounding.
    let n = 2 * k as u64 + 1;
    (k as u64 + 1..=n).map(|j| binomial(n, j) * u.powi(j as i32) * (1.0 - u).powi((n - j) as i32)).sum::<f64>().min(1.0)
}

/// `S′(u) = u^k (1−u)^k / B(k+1, k+1)`.
pub fn smoothstep_derivative(u: f64, k: u32) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let norm = (k + 1..=2 * k + 1).map(|j| j as f64).product::<f64>() / (1..=k).map(|j| j as f64).product::<f64>();
    norm * (u * (1.0 - u)).powi(k as i32)
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    BumpChi,
    SwitchG,
    CompactF,
    FermiProjectionSmooth,
}

/// One smoothstep transition of height `height` across `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
    pub height: f64,
}

impl Ramp {
    fn u(&self, e: f64) -> f64 {
        (e - self.start) / (self.end - self.start)
    }
}

/// Smooth real function of energy, `base + Σ height·S_k((E − start)/(end − start))`,
/// with closed-form value and derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothProfile {
    pub kind: ProfileKind,
    pub k: u32,
    pub base: f64,
    pub ramps: Vec<Ramp>,
}

impl SmoothProfile {
    pub fn eval(&self, e: f64) -> f64 {
        self.ramps.iter().fold(self.base, |acc, r| acc + r.height * smoothstep(r.u(e), self.k))
    }

    pub fn derivative(&self, e: f64) -> f64 {
        self.ramps.iter().fold(0.0, |acc, r| acc + r.height * smoothstep_derivative(r.u(e), self.k) / (r.end - r.start))
    }

    /// Value far to the right of every ramp.
    pub fn right_limit(&self) -> f64 {
        self.base + self.ramps.iter().map(|r| r.height).sum::<f64>()
    }

    /// Interval carrying every ramp, i.e. the support of the derivative.
    pub fn transition_support(&self) -> (f64, f64) {
        let lo = self.ramps.iter().map(|r| r.start).fold(f64::INFINITY, f64::min);
        let hi = self.ramps.iter().map(|r| r.end).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Whether the profile itself vanishes outside a bounded interval.
    pub fn is_compact(&self) -> bool {
        self.base == 0.0 && self.right_limit().abs() < 1e-14
    }

    /// Sorted ramp endpoints.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.ramps.iter().flat_map(|r| [r.start, r.end]).collect();
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        k
    }
}

/// Switch `G` across `Δ = [lo, hi]`: 1 left of `Δ`, 0 right of it, exact
/// plateau `½` on the middle third.
pub fn make_switch(delta: (f64, f64), k: u32) -> SmoothProfile {
    make_switch_with_plateau(delta, (1.0 / 3.0, 2.0 / 3.0), k)
}

/// Switch with the plateau at the given fractions of `Δ`.
pub fn make_switch_with_plateau(delta: (f64, f64), plateau: (f64, f64), k: u32) -> SmoothProfile {
    let (lo, hi) = delta;
    let w = hi - lo;
    let (p1, p2) = (lo + plateau.0 * w, lo + plateau.1 * w);
    SmoothProfile {
        kind: ProfileKind::SwitchG,
        k,
        base: 1.0,
        ramps: vec![Ramp { start: lo, end: p1, height: -0.5 }, Ramp { start: p2, end: hi, height: -0.5 }],
    }
}

/// Bump `χ ≥ 0` of unit integral supported on `[−width/2, width/2]`.
pub fn make_bump(width: f64, k: u32) -> SmoothProfile {
    bump_on((-0.5 * width, 0.5 * width), k)
}

/// Unit-integral bump supported on `[lo, hi]`.
pub fn bump_on(support: (f64, f64), k: u32) -> SmoothProfile {
    let (lo, hi) = support;
    let mid = 0.5 * (lo + hi);
    let h = 2.0 / (hi - lo);
    SmoothProfile {
        kind: ProfileKind::BumpChi,
        k,
        base: 0.0,
        ramps: vec![Ramp { start: lo, end: mid, height: h }, Ramp { start: mid, end: hi, height: -h }],
    }
}

/// Compactly supported `F` with peak value 1: rises on `[lo, lo + ramp]`,
/// falls on `[hi − ramp, hi]`.
pub fn compact_f(support: (f64, f64), ramp: f64, k: u32) -> SmoothProfile {
    let (lo, hi) = support;
    let ramp = ramp.min(0.5 * (hi - lo));
    SmoothProfile {
        kind: ProfileKind::CompactF,
        k,
        base: 0.0,
        ramps: vec![Ramp { start: lo, end: lo + ramp, height: 1.0 }, Ramp { start: hi - ramp, end: hi, height: -1.0 }],
    }
}

/// Smooth Fermi function, 1 below `lo` and 0 above `hi`; inside a gap it
/// equals the Fermi projection on the spectrum.
pub fn fermi_smooth(window: (f64, f64), k: u32) -> SmoothProfile {
    SmoothProfile {
        kind: ProfileKind::FermiProjectionSmooth,
        k,
        base: 1.0,
        ramps: vec![Ramp { start: window.0, end: window.1, height: -1.0 }],
    }
}

/// Complex spectral function handed to the functional calculus.
pub trait SpectralFunction: Sync {
    fn eval(&self, e: f64) -> C64;
    /// Sorted breakpoints; the function vanishes outside `[first, last]`.
    /// `None` when the support is unbounded.
    fn knots(&self) -> Option<Vec<f64>>;
    /// Order of continuity at the knots, used by the tail estimate.
    fn smoothness(&self) -> u32;
}

impl SpectralFunction for SmoothProfile {
    fn eval(&self, e: f64) -> C64 {
        c(SmoothProfile::eval(self, e))
    }
    fn knots(&self) -> Option<Vec<f64>> {
        self.is_compact().then(|| SmoothProfile::knots(self))
    }
    fn smoothness(&self) -> u32 {
        self.k
    }
}

/// `−G′`, a density supported in the ramps of `G`.
pub struct NegDerivative<'a>(pub &'a SmoothProfile);

impl SpectralFunction for NegDerivative<'_> {
    fn eval(&self, e: f64) -> C64 {
        c(-self.0.derivative(e))
    }
    fn knots(&self) -> Option<Vec<f64>> {
        Some(self.0.knots())
    }
    fn smoothness(&self) -> u32 {
        self.0.k.saturating_sub(1)
    }
}

/// `e^{−2πi·n·G} − 1`, compactly supported when `G` is a switch.
pub struct WindingMinusOne<'a> {
    pub g: &'a SmoothProfile,
    pub power: i32,
}

impl SpectralFunction for WindingMinusOne<'_> {
    fn eval(&self, e: f64) -> C64 {
        let phase = -std::f64::consts::TAU * self.power as f64 * self.g.eval(e);
        C64::from_polar(1.0, phase) - 1.0
    }
    fn knots(&self) -> Option<Vec<f64>> {
        Some(self.g.knots())
    }
    fn smoothness(&self) -> u32 {
        self.g.k
    }
}

/// Arbitrary closure with declared knots.
pub struct FnProfile<F: Fn(f64) -> C64 + Sync> {
    pub f: F,
    pub knots: Vec<f64>,
    pub smoothness: u32,
}

impl<F: Fn(f64) -> C64 + Sync> SpectralFunction for FnProfile<F> {
    fn eval(&self, e: f64) -> C64 {
        (self.f)(e)
    }
    fn knots(&self) -> Option<Vec<f64>> {
        Some(self.knots.clone())
    }
    fn smoothness(&self) -> u32 {
        self.smoothness
    }
}
