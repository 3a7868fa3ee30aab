//! Numerical laboratory for eigenvalue clusters of the Landau Hamiltonian
//! `H = (-i grad - A)^2 + V` with a long-range electric potential `V`.
//!
//! The crate computes the compressions `P_q V P_q` of `V` onto the Landau
//! levels in the angular-momentum basis, their spectra, and both sides of the
//! trace asymptotics relating the rescaled cluster eigenvalue counts to the
//! circle-average (mean-value) transform of the homogeneous tail of `V`.
//!
//! Module map:
//!
//! - [`specfun`]: Laguerre and Bessel functions, Gaussian and adaptive quadrature
//! - [`potentials`]: potential models, the mean-value transform, orbit averages
//! - [`landau`]: angular-momentum basis and Toeplitz block assembly
//! - [`eigen`]: dense symmetric eigensolver with residual certificates
//! - [`symbols`]: Weyl-symbol side (Laguerre kernel, circle distributions)
//! - [`measures`]: empirical and limiting cluster measures, convergence study
//! - [`report`]: CSV/JSON writers shared by the command-line front end

pub mod eigen;
pub mod error;
pub mod landau;
pub mod measures;
pub mod potentials;
pub mod report;
pub mod specfun;
pub mod symbols;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn scale(self, s: f64) -> Self {
        Point::new(s * self.x, s * self.y)
    }

    pub fn sub(self, other: Point) -> Self {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Self {
        Point::new(self.x + other.x, self.y + other.y)
    }

    /// The isometry `(x1, x2) -> (-x2, -x1)`.
    pub fn swap_negate(self) -> Self {
        Point::new(-self.y, -self.x)
    }
}
