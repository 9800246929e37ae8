//! TOML experiment configuration.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::functional_calculus::{QuadratureSpec, SemigroupBackend};
use crate::lattice_hamiltonian::{gamma_from_flux, Boundary, CellProfile, DisorderModel, Distribution, Geometry};
use crate::{Error, Result};

/// Flux per plaquette `p/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Flux {
    pub p: i64,
    pub q: u64,
}

impl Flux {
    pub fn value(self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl FromStr for Flux {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("geometry.flux = {s:?} must be a fraction p/q with q > 0"));
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: u64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        Ok(Self { p, q })
    }
}

impl TryFrom<String> for Flux {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Flux> for String {
    fn from(f: Flux) -> String {
        f.to_string()
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Periodic,
    Open,
    DirichletEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub l1: usize,
    pub l2: usize,
    #[serde(default = "one")]
    pub a: f64,
    pub flux: Flux,
    #[serde(default = "default_bc1")]
    pub bc1: Bc,
    #[serde(default = "default_bc2")]
    pub bc2: Bc,
    #[serde(default)]
    pub s: f64,
    /// Torus used for gap scans, gap certificates and bulk quantities.
    /// Defaults to the smallest multiple of `q` that is at least 10.
    #[serde(default)]
    pub torus: Option<[usize; 2]>,
}

fn one() -> f64 {
    1.0
}
fn default_bc1() -> Bc {
    Bc::Open
}
fn default_bc2() -> Bc {
    Bc::DirichletEdge
}

impl GeometryBlock {
    pub fn gamma(&self) -> f64 {
        gamma_from_flux(self.flux.value(), self.a)
    }

    fn boundary(&self, bc: Bc, field: &str) -> Result<Boundary> {
        match bc {
            Bc::Periodic => Ok(Boundary::Periodic),
            Bc::Open => Ok(Boundary::Open),
            Bc::DirichletEdge if field == "bc2" => Ok(Boundary::DirichletEdge { s: self.s }),
            Bc::DirichletEdge => Err(Error::Config(format!("geometry.{field} cannot be dirichlet_edge"))),
        }
    }

    /// The configured lattice (a strip when `bc2 = dirichlet_edge`).
    pub fn lattice(&self) -> Result<Geometry> {
        let bc1 = self.boundary(self.bc1, "bc1")?;
        let bc2 = self.boundary(self.bc2, "bc2")?;
        Geometry::new(self.l1, self.l2, self.a, self.gamma(), bc1, bc2)
            .map_err(|e| Error::Config(format!("geometry: {e}")))
    }

    pub fn torus_dims(&self) -> [usize; 2] {
        self.torus.unwrap_or_else(|| {
            let q = self.flux.q as usize;
            let side = q * 10usize.div_ceil(q);
            [side, side]
        })
    }

    pub fn torus(&self) -> Result<Geometry> {
        let [l1, l2] = self.torus_dims();
        Geometry::torus(l1, l2, self.a, self.flux.value()).map_err(|e| Error::Config(format!("geometry.torus: {e}")))
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("geometry.a = {} must be positive", self.a)));
        }
        self.lattice()?;
        self.torus()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderBlock {
    /// Coupling bound `λ`; exclusive with `lambda_gap_fraction`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// `λ` as a fraction of the width of the selected clean gap.
    #[serde(default)]
    pub lambda_gap_fraction: Option<f64>,
    #[serde(default = "default_dist")]
    pub dist: Distribution,
    #[serde(default = "one_usize")]
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one_usize")]
    pub cell: usize,
    #[serde(default = "default_w")]
    pub w: CellProfile,
    #[serde(default = "default_v")]
    pub v: CellProfile,
}

fn default_dist() -> Distribution {
    Distribution::Uniform
}
fn one_usize() -> usize {
    1
}
fn default_w() -> CellProfile {
    CellProfile::Zero
}
fn default_v() -> CellProfile {
    CellProfile::Bump { amplitude: 1.0 }
}

impl Default for DisorderBlock {
    fn default() -> Self {
        Self {
            lambda: None,
            lambda_gap_fraction: None,
            dist: default_dist(),
            n_realizations: 1,
            master_seed: 0,
            cell: 1,
            w: default_w(),
            v: default_v(),
        }
    }
}

impl DisorderBlock {
    pub fn model(&self, lambda: f64) -> Result<DisorderModel> {
        let m = DisorderModel { w: self.w, v: self.v, lambda_max: lambda, dist: self.dist, cell: self.cell };
        m.validate().map_err(|e| Error::Config(format!("disorder: {e}")))?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.lambda.is_some() && self.lambda_gap_fraction.is_some() {
            return Err(Error::Config("disorder.lambda and disorder.lambda_gap_fraction are exclusive".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("lambda_gap_fraction", self.lambda_gap_fraction)] {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("disorder.{name} must be a nonnegative number")));
            }
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("disorder.n_realizations must be at least 1".into()));
        }
        self.model(self.lambda.unwrap_or(0.0)).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalculusPath {
    Spectral,
    Heatkernel,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalculusBlock {
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Smoothstep order of the compact test function `F`.
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_path")]
    pub path: CalculusPath,
    #[serde(default = "default_backend")]
    pub backend: SemigroupBackend,
    /// Support of the compact test function `F`.
    #[serde(default = "default_support")]
    pub support: [f64; 2],
}

fn default_k() -> u32 {
    8
}
fn default_path() -> CalculusPath {
    CalculusPath::Spectral
}
fn default_backend() -> SemigroupBackend {
    SemigroupBackend::Taylor
}
fn default_support() -> [f64; 2] {
    [-1.0, 5.0]
}

impl Default for CalculusBlock {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            k: default_k(),
            path: default_path(),
            backend: default_backend(),
            support: default_support(),
        }
    }
}

/// Either explicit endpoints or `auto:gap_index=m` (1 = lowest gap).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GapSelect {
    Explicit([f64; 2]),
    Auto(String),
}

impl GapSelect {
    pub fn auto_index(&self) -> Result<Option<usize>> {
        match self {
            GapSelect::Explicit(_) => Ok(None),
            GapSelect::Auto(s) => {
                let m = s
                    .strip_prefix("auto:gap_index=")
                    .and_then(|m| m.trim().parse::<usize>().ok())
                    .filter(|&m| m >= 1)
                    .ok_or_else(|| {
                        Error::Config(format!("gap.delta = {s:?}: expected \"auto:gap_index=m\" with m ≥ 1"))
                    })?;
                Ok(Some(m))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapBlock {
    pub delta: GapSelect,
    /// Distance kept from the scanned band edges, on top of `λ`.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Plateau of the switch as fractions of `Δ`.
    #[serde(default = "default_plateau")]
    pub plateau: [f64; 2],
    /// Smoothstep order of the switch.
    #[serde(default = "default_switch_k")]
    pub switch_k: u32,
    /// Smallest spectral gap reported by scans.
    #[serde(default = "default_threshold")]
    pub scan_threshold: f64,
}

fn default_margin() -> f64 {
    0.01
}
fn default_plateau() -> [f64; 2] {
    [0.20, 0.23]
}
fn default_switch_k() -> u32 {
    2
}
fn default_threshold() -> f64 {
    0.2
}

impl Default for GapBlock {
    fn default() -> Self {
        Self {
            delta: GapSelect::Auto("auto:gap_index=1".into()),
            margin: default_margin(),
            plateau: default_plateau(),
            switch_k: default_switch_k(),
            scan_threshold: default_threshold(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Bounds,
    Decay,
    Traces,
    Quantization,
    Chern,
    NoCurrent,
    Calculus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_integer_tol")]
    pub integer: f64,
    #[serde(default = "default_chern_tol")]
    pub edge_bulk: f64,
    #[serde(default = "default_current_tol")]
    pub no_current: f64,
    #[serde(default = "default_calc_tol")]
    pub calculus: f64,
    #[serde(default = "default_leak_tol")]
    pub edge_leak: f64,
}

fn default_integer_tol() -> f64 {
    0.05
}
fn default_chern_tol() -> f64 {
    0.1
}
fn default_current_tol() -> f64 {
    1e-4
}
fn default_calc_tol() -> f64 {
    1e-6
}
fn default_leak_tol() -> f64 {
    crate::edge_current_index::PIPELINE_LEAK_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            integer: default_integer_tol(),
            edge_bulk: default_chern_tol(),
            no_current: default_current_tol(),
            calculus: default_calc_tol(),
            edge_leak: default_leak_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_experiments")]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Turn tolerance violations into a failed run.
    #[serde(default)]
    pub assert: bool,
}

fn default_experiments() -> Vec<Experiment> {
    vec![Experiment::Quantization]
}

impl Default for RunBlock {
    fn default() -> Self {
        Self { experiments: default_experiments(), tolerances: Tolerances::default(), assert: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub disorder: DisorderBlock,
    #[serde(default)]
    pub calculus: CalculusBlock,
    #[serde(default)]
    pub gap: GapBlock,
    #[serde(default)]
    pub run: RunBlock,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.disorder.validate()?;
        self.calculus.quadrature.validate()?;
        if self.calculus.k < 2 || self.gap.switch_k < 2 {
            return Err(Error::Config("smoothstep orders calculus.k and gap.switch_k must be at least 2".into()));
        }
        self.gap.delta.auto_index()?;
        if let GapSelect::Explicit([lo, hi]) = self.gap.delta {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Config(format!("gap.delta = [{lo}, {hi}] is empty")));
            }
        }
        let [p1, p2] = self.gap.plateau;
        if !(0.0 < p1 && p1 < p2 && p2 < 1.0) {
            return Err(Error::Config(format!("gap.plateau = [{p1}, {p2}] must satisfy 0 < p1 < p2 < 1")));
        }
        if self.disorder.lambda_gap_fraction.is_some() && self.gap.delta.auto_index()?.is_none() {
            return Err(Error::Config("disorder.lambda_gap_fraction needs gap.delta = \"auto:gap_index=m\"".into()));
        }
        Ok(())
    }

    /// Canonical JSON of the parsed configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
