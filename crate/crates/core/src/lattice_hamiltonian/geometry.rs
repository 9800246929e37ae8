use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Boundary condition in one lattice direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
    /// Dirichlet wall on the line `x₂ = −s`; only valid in the 2-direction.
    DirichletEdge {
        s: f64,
    },
}

impl Boundary {
    pub fn is_periodic(self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

/// Finite rectangular lattice carrying the magnetic parameter γ.
///
/// Sites are indexed row by row, `index = n₂·L₁ + n₁`, and sit at
/// `x = origin + a·(n₁, n₂)`. For a Dirichlet edge the wall row `x₂ = −s`
/// is removed, so the first kept row lies at `−s + a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    l1: usize,
    l2: usize,
    a: f64,
    gamma: f64,
    bc1: Boundary,
    bc2: Boundary,
    origin: [f64; 2],
}

const QUANT_TOL: f64 = 1e-9;

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < QUANT_TOL
}

impl Geometry {
    pub fn new(l1: usize, l2: usize, a: f64, gamma: f64, bc1: Boundary, bc2: Boundary) -> Result<Self> {
        let origin = match bc2 {
            Boundary::DirichletEdge { s } => [0.0, a - s],
            _ => [0.0, 0.0],
        };
        Self::with_origin(l1, l2, a, gamma, bc1, bc2, origin)
    }

    pub fn with_origin(
        l1: usize,
        l2: usize,
        a: f64,
        gamma: f64,
        bc1: Boundary,
        bc2: Boundary,
        origin: [f64; 2],
    ) -> Result<Self> {
        let g = Self { l1, l2, a, gamma, bc1, bc2, origin };
        g.validate()?;
        Ok(g)
    }

    /// Torus with flux `p/q` per plaquette.
    pub fn torus(l1: usize, l2: usize, a: f64, flux: f64) -> Result<Self> {
        Self::new(l1, l2, a, gamma_from_flux(flux, a), Boundary::Periodic, Boundary::Periodic)
    }

    /// Strip with a Dirichlet edge at `x₂ = −s` and the given 1-direction condition.
    pub fn strip(l1: usize, l2: usize, a: f64, flux: f64, bc1: Boundary, s: f64) -> Result<Self> {
        Self::new(l1, l2, a, gamma_from_flux(flux, a), bc1, Boundary::DirichletEdge { s })
    }

    /// Open rectangle (Dirichlet walls on all four sides).
    pub fn open(l1: usize, l2: usize, a: f64, gamma: f64) -> Result<Self> {
        Self::new(l1, l2, a, gamma, Boundary::Open, Boundary::Open)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Geometry(msg));
        if self.l1 < 4 {
            return bad(format!("L1 = {} must be at least 4", self.l1));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("lattice spacing a = {} must be positive", self.a));
        }
        if !self.gamma.is_finite() {
            return bad("gamma must be finite".into());
        }
        if matches!(self.bc1, Boundary::DirichletEdge { .. }) {
            return bad("the Dirichlet edge is only available in the 2-direction".into());
        }
        if self.bc2.is_periodic() && self.l2 < 3 {
            return bad("a periodic 2-direction needs L2 >= 3".into());
        }
        if let Boundary::DirichletEdge { s } = self.bc2 {
            if !s.is_finite() {
                return bad("edge offset s must be finite".into());
            }
            if (self.origin[1] - (self.a - s)).abs() > 1e-12 * (1.0 + s.abs()) {
                return bad(format!("first strip row must sit at -s + a = {}, got {}", self.a - s, self.origin[1]));
            }
        }
        // Peierls phases on the 1-hops depend on x₂; wrapping the 2-direction
        // is consistent only if the flux through one column is integral.
        if self.bc2.is_periodic() && !is_integer(self.flux() * self.l2 as f64) {
            return bad(format!(
                "flux quantization violated: flux per plaquette {} times L2 = {} is not an integer \
                 (flux p/q needs q | L2 on a periodic 2-direction)",
                self.flux(),
                self.l2
            ));
        }
        Ok(())
    }

    pub fn l1(&self) -> usize {
        self.l1
    }
    pub fn l2(&self) -> usize {
        self.l2
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn bc1(&self) -> Boundary {
        self.bc1
    }
    pub fn bc2(&self) -> Boundary {
        self.bc2
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Edge offset `s` of a Dirichlet strip.
    pub fn edge_offset(&self) -> Option<f64> {
        match self.bc2 {
            Boundary::DirichletEdge { s } => Some(s),
            _ => None,
        }
    }

    /// Flux per plaquette `γa²/2π`.
    pub fn flux(&self) -> f64 {
        self.gamma * self.a * self.a / std::f64::consts::TAU
    }

    pub fn n_sites(&self) -> usize {
        self.l1 * self.l2
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n2 * self.l1 + n1
    }

    pub fn lattice_coords(&self, i: usize) -> [usize; 2] {
        [i % self.l1, i / self.l1]
    }

    pub fn coords(&self, i: usize) -> [f64; 2] {
        let [n1, n2] = self.lattice_coords(i);
        [self.origin[0] + self.a * n1 as f64, self.origin[1] + self.a * n2 as f64]
    }

    pub fn bc(&self, dir: usize) -> Boundary {
        if dir == 0 {
            self.bc1
        } else {
            self.bc2
        }
    }

    pub fn len(&self, dir: usize) -> usize {
        if dir == 0 {
            self.l1
        } else {
            self.l2
        }
    }

    /// `x_dir − y_dir`, using the minimal image on periodic directions.
    pub fn displacement(&self, x: usize, y: usize, dir: usize) -> f64 {
        let d = self.coords(x)[dir] - self.coords(y)[dir];
        if self.bc(dir).is_periodic() {
            let period = self.a * self.len(dir) as f64;
            d - period * (d / period).round()
        } else {
            d
        }
    }

    /// Distance of a site to the Dirichlet wall, `x₂ + s`.
    pub fn edge_distance(&self, i: usize) -> Option<f64> {
        self.edge_offset().map(|s| self.coords(i)[1] + s)
    }

    /// The same lattice moved by the lattice vector `a·m`. Periodic
    /// directions are relabelled instead of moved.
    pub fn translated(&self, m: [i64; 2]) -> Self {
        let mut g = *self;
        for (dir, step) in m.into_iter().enumerate() {
            if !self.bc(dir).is_periodic() {
                g.origin[dir] += self.a * step as f64;
            }
        }
        if let Boundary::DirichletEdge { s } = self.bc2 {
            g.bc2 = Boundary::DirichletEdge { s: s - self.a * m[1] as f64 };
        }
        g
    }

    /// Sites at least `margin` rows/columns away from every artificial
    /// truncation. A Dirichlet wall is physical and only trimmed when
    /// `trim_wall` is set.
    pub fn interior(&self, margin: usize, trim_wall: bool) -> Vec<usize> {
        let keep = |dir: usize, n: usize| -> bool {
            let len = self.len(dir);
            match self.bc(dir) {
                Boundary::Periodic => true,
                Boundary::Open => n >= margin && n + margin < len,
                Boundary::DirichletEdge { .. } => (!trim_wall || n >= margin) && n + margin < len,
            }
        };
        (0..self.n_sites())
            .filter(|&i| {
                let [n1, n2] = self.lattice_coords(i);
                keep(0, n1) && keep(1, n2)
            })
            .collect()
    }

    /// Euclidean distance `|x − y|` (minimal image on periodic directions).
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.displacement(x, y, 0).hypot(self.displacement(x, y, 1))
    }

    /// Same lattice, different magnetic parameter.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_origin(self.l1, self.l2, self.a, gamma, self.bc1, self.bc2, self.origin)
    }
}

/// `γ = 2π·flux/a²`.
pub fn gamma_from_flux(flux: f64, a: f64) -> f64 {
    std::f64::consts::TAU * flux / (a * a)
}

pub(crate) fn flux_integer(x: f64) -> bool {
    is_integer(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_quantization_is_enforced() {
        assert!(Geometry::torus(10, 10, 1.0, 0.2).is_ok());
        let err = Geometry::torus(10, 12, 1.0, 0.2).unwrap_err();
        assert!(err.to_string().contains("flux quantization"));
    }

    #[test]
    fn strip_rows_start_one_spacing_above_the_wall() {
        let g = Geometry::strip(8, 5, 0.5, 0.1, Boundary::Open, 0.3).unwrap();
        assert!((g.coords(0)[1] - 0.2).abs() < 1e-15);
        assert!((g.edge_distance(g.index(3, 2)).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn minimal_image_displacement() {
        let g = Geometry::torus(10, 5, 1.0, 0.2).unwrap();
        let x = g.index(9, 0);
        let y = g.index(0, 0);
        assert_eq!(g.displacement(x, y, 0), -1.0);
        assert_eq!(g.displacement(y, x, 0), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Geometry::open(3, 4, 1.0, 0.0).is_err());
        assert!(Geometry::open(4, 4, -1.0, 0.0).is_err());
        assert!(Geometry::new(4, 4, 1.0, 0.0, Boundary::DirichletEdge { s: 0.0 }, Boundary::Open).is_err());
    }

    #[test]
    fn translating_a_strip_moves_its_wall() {
        let g = Geometry::strip(8, 4, 1.0, 0.2, Boundary::Open, 0.0).unwrap();
        let t = g.translated([0, -1]);
        assert_eq!(t.edge_offset(), Some(1.0));
        assert!((t.coords(0)[1] - 0.0).abs() < 1e-15);
    }
}
