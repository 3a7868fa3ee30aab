//! Potential models, their homogeneous tails, and circle averages.
//!
//! The built-in long-range models are globally smooth:
//!
//! - isotropic: `V(x) = A (1+|x|^2)^{-rho/2}`, tail `A |x|^{-rho}`
//! - anisotropic: the isotropic part plus
//!   `A eps r^m cos(m theta) (1+r^2)^{-(rho+m)/2}`, tail
//!   `A |x|^{-rho} (1 + eps cos(m theta))`
//!
//! `r^m cos(m theta)` is a harmonic polynomial, so the anisotropic model is
//! smooth at the origin. Both satisfy `|V - V_tail| <= C |x|^{-rho-2}` for
//! `|x| > 1`. The compact Gaussian bump `A exp(-|x|^2 / (2 w^2))` has a zero tail.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{integrate_with_breaks, Tolerance};
use crate::Point;

/// A real function on the plane that the circle-average machinery can integrate.
pub trait PlaneFunction: Sync {
    fn value(&self, x: Point) -> f64;

    /// Order `rho` of an integrable `|x|^{-rho}` singularity at the origin.
    fn origin_singularity(&self) -> Option<f64> {
        None
    }
}

impl<F: Fn(Point) -> f64 + Sync> PlaneFunction for F {
    fn value(&self, x: Point) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    IsotropicLongRange,
    AnisotropicLongRange,
    CompactGaussianBump,
}

fn one() -> f64 {
    1.0
}

/// A potential `V` together with its homogeneous tail.
///
/// `amplitude` multiplies every kind; `width` is used by the Gaussian bump only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialModel {
    pub kind: PotentialKind,
    pub rho: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub mode: u32,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
}

impl PotentialModel {
    pub fn isotropic(rho: f64) -> Self {
        PotentialModel {
            kind: PotentialKind::IsotropicLongRange,
            rho,
            epsilon: 0.0,
            mode: 0,
            amplitude: 1.0,
            width: 1.0,
        }
    }

    pub fn anisotropic(rho: f64, epsilon: f64, mode: u32) -> Self {
        PotentialModel {
            kind: PotentialKind::AnisotropicLongRange,
            epsilon,
            mode,
            ..Self::isotropic(rho)
        }
    }

    /// Gaussian bump. `rho` is only the cluster scaling exponent for this kind.
    pub fn gaussian_bump(amplitude: f64, width: f64, rho: f64) -> Self {
        PotentialModel {
            kind: PotentialKind::CompactGaussianBump,
            amplitude,
            width,
            ..Self::isotropic(rho)
        }
    }

    /// The same model multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("model.rho = {} must lie in (0, 1)", self.rho)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "model.epsilon = {} must lie in [0, 1)",
                self.epsilon
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Config("model.amplitude must be finite".into()));
        }
        if self.kind == PotentialKind::CompactGaussianBump && !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("model.width = {} must be positive", self.width)));
        }
        Ok(())
    }

    fn harmonic_damping(&self, r: f64) -> f64 {
        let m = self.mode as i32;
        r.powi(m) * (1.0 + r * r).powf(-0.5 * (self.rho + self.mode as f64))
    }

    /// `V(x)`.
    pub fn evaluate(&self, x: Point) -> f64 {
        let r2 = x.x * x.x + x.y * x.y;
        let a = self.amplitude;
        match self.kind {
            PotentialKind::IsotropicLongRange => a * (1.0 + r2).powf(-0.5 * self.rho),
            PotentialKind::AnisotropicLongRange => {
                let r = r2.sqrt();
                let theta = x.angle();
                a * ((1.0 + r2).powf(-0.5 * self.rho)
                    + self.epsilon * (self.mode as f64 * theta).cos() * self.harmonic_damping(r))
            }
            PotentialKind::CompactGaussianBump => a * (-r2 / (2.0 * self.width * self.width)).exp(),
        }
    }

    /// The homogeneous tail `V_tail(x)`, homogeneous of degree `-rho`.
    pub fn evaluate_tail(&self, x: Point) -> Result<f64> {
        let r = x.norm();
        if r == 0.0 {
            return Err(Error::Domain("homogeneous tail is singular at the origin".into()));
        }
        Ok(self.tail_value(r, x.angle()))
    }

    fn tail_value(&self, r: f64, theta: f64) -> f64 {
        let a = self.amplitude;
        match self.kind {
            PotentialKind::IsotropicLongRange => a * r.powf(-self.rho),
            PotentialKind::AnisotropicLongRange => {
                a * r.powf(-self.rho) * (1.0 + self.epsilon * (self.mode as f64 * theta).cos())
            }
            PotentialKind::CompactGaussianBump => 0.0,
        }
    }

    /// View of the homogeneous tail as a [`PlaneFunction`].
    pub fn tail(&self) -> Tail<'_> {
        Tail(self)
    }

    fn has_angular_part(&self) -> bool {
        self.kind == PotentialKind::AnisotropicLongRange && self.epsilon != 0.0 && self.mode > 0
    }

    /// True when `V` and its tail depend on `|x|` only.
    pub fn is_radial(&self) -> bool {
        !self.has_angular_part()
    }

    /// Angular Fourier modes `j` with nonzero radial profile.
    pub fn angular_modes(&self) -> Vec<i64> {
        if self.has_angular_part() {
            let m = self.mode as i64;
            vec![-m, 0, m]
        } else {
            vec![0]
        }
    }

    /// Radial profile `v_j` in `V(r, theta) = sum_j v_j(r) e^{i j theta}`.
    pub fn mode_profile(&self, j: i64) -> AngularModeProfile {
        AngularModeProfile { mode: j, model: *self }
    }

    /// `sup_{r >= r0} |v_j(r)|`, in closed form for the built-ins.
    pub fn mode_envelope(&self, j: i64, r0: f64) -> f64 {
        let r0 = r0.max(0.0);
        let a = self.amplitude.abs();
        match (self.kind, j) {
            (PotentialKind::CompactGaussianBump, 0) => a * (-r0 * r0 / (2.0 * self.width * self.width)).exp(),
            (PotentialKind::CompactGaussianBump, _) => 0.0,
            (PotentialKind::IsotropicLongRange, 0) => a * (1.0 + r0 * r0).powf(-0.5 * self.rho),
            (PotentialKind::IsotropicLongRange, _) => 0.0,
            (PotentialKind::AnisotropicLongRange, 0) => {
                let base = a * (1.0 + r0 * r0).powf(-0.5 * self.rho);
                if self.has_angular_part() {
                    base
                } else {
                    base * (1.0 + self.epsilon)
                }
            }
            (PotentialKind::AnisotropicLongRange, j) => {
                if !self.has_angular_part() || j.unsigned_abs() != self.mode as u64 {
                    return 0.0;
                }
                // r^m (1+r^2)^{-(rho+m)/2} peaks at r^2 = m / rho.
                let peak = (self.mode as f64 / self.rho).sqrt();
                0.5 * a * self.epsilon * self.harmonic_damping(r0.max(peak))
            }
        }
    }

    /// Upper bound on `sup |V|`.
    pub fn sup_abs(&self) -> f64 {
        self.angular_modes().iter().map(|&j| self.mode_envelope(j, 0.0)).sum()
    }

    /// Constant `c` with `|V_tail(x)| <= c |x|^{-rho}`.
    pub fn tail_bound_constant(&self) -> f64 {
        let a = self.amplitude.abs();
        match self.kind {
            PotentialKind::IsotropicLongRange => a,
            PotentialKind::AnisotropicLongRange => a * (1.0 + self.epsilon),
            PotentialKind::CompactGaussianBump => 0.0,
        }
    }

    /// `int V dx` when `V` is integrable (Gaussian bump only).
    pub fn integral(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::CompactGaussianBump => Some(self.amplitude * 2.0 * PI * self.width * self.width),
            _ => None,
        }
    }
}

impl PlaneFunction for PotentialModel {
    fn value(&self, x: Point) -> f64 {
        self.evaluate(x)
    }
}

/// The homogeneous tail of a model.
#[derive(Debug, Clone, Copy)]
pub struct Tail<'a>(pub &'a PotentialModel);

impl PlaneFunction for Tail<'_> {
    fn value(&self, x: Point) -> f64 {
        let r = x.norm();
        if r == 0.0 {
            return f64::INFINITY * self.0.amplitude.signum();
        }
        self.0.tail_value(r, x.angle())
    }

    fn origin_singularity(&self) -> Option<f64> {
        match self.0.kind {
            PotentialKind::CompactGaussianBump => None,
            _ => Some(self.0.rho),
        }
    }
}

/// One angular Fourier component `v_j(r)` of a model.
#[derive(Debug, Clone, Copy)]
pub struct AngularModeProfile {
    pub mode: i64,
    model: PotentialModel,
}

impl AngularModeProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let m = &self.model;
        let a = m.amplitude;
        match (m.kind, self.mode) {
            (PotentialKind::CompactGaussianBump, 0) => a * (-r * r / (2.0 * m.width * m.width)).exp(),
            (PotentialKind::IsotropicLongRange, 0) => a * (1.0 + r * r).powf(-0.5 * m.rho),
            (PotentialKind::AnisotropicLongRange, 0) => {
                let base = a * (1.0 + r * r).powf(-0.5 * m.rho);
                if m.has_angular_part() {
                    base
                } else {
                    // mode 0 folds the cosine term into the radial part
                    base + a * m.epsilon * m.harmonic_damping(r)
                }
            }
            (PotentialKind::AnisotropicLongRange, j) if m.has_angular_part() && j.unsigned_abs() == m.mode as u64 => {
                0.5 * a * m.epsilon * m.harmonic_damping(r)
            }
            _ => 0.0,
        }
    }
}

const CIRCLE_TOL: Tolerance = Tolerance::new(1e-14, 1e-12);

/// Average of `u` over the circle `{center - radius * omega : |omega| = 1}`.
///
/// When `u` has an origin singularity and the circle passes close to the
/// origin, the angle integral is split at the nearest angle and each half is
/// integrated on a mesh graded by `theta - theta* = pi s^p`, `p = 2/(1-rho)`.
pub fn circle_average(u: &(impl PlaneFunction + ?Sized), center: Point, radius: f64) -> Result<f64> {
    if radius == 0.0 {
        return Ok(u.value(center));
    }
    let d = center.norm();
    let theta_star = if d > 0.0 { center.angle() } else { 0.0 };
    let at = |theta: f64| u.value(center.sub(Point::polar(radius, theta)));
    // Offset angle phi from theta*, computed without cancellation near the origin.
    let (cs, sn) = (theta_star.cos(), theta_star.sin());
    let near = |phi: f64| {
        let h = (0.5 * phi).sin();
        let a = (d - radius) + 2.0 * radius * h * h;
        let b = -radius * phi.sin();
        u.value(Point::new(cs * a - sn * b, sn * a + cs * b))
    };
    let near_singular = u
        .origin_singularity()
        .filter(|_| (d - radius).abs() < 0.5 * radius)
        .map(|rho| 2.0 / (1.0 - rho));
    let total = match near_singular {
        Some(p) => {
            let mut sum = 0.0;
            for sigma in [1.0, -1.0] {
                // The graded integrand vanishes at s = 0; a node that rounds onto
                // the singular point itself contributes nothing.
                let graded = |s: f64| {
                    let v = near(sigma * PI * s.powf(p)) * PI * p * s.powf(p - 1.0);
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                };
                sum += integrate_with_breaks(graded, &[0.0, 0.25, 0.5, 1.0], CIRCLE_TOL)
                    .map_err(|e| with_context(e, "circle average (graded)"))?
                    .value;
            }
            sum
        }
        None => {
            let breaks: Vec<f64> = (0..=4).map(|i| theta_star - PI + 0.5 * PI * i as f64).collect();
            integrate_with_breaks(at, &breaks, CIRCLE_TOL)
                .map_err(|e| with_context(e, "circle average"))?
                .value
        }
    };
    Ok(total / (2.0 * PI))
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Numerical { achieved, .. } => Error::numerical(ctx, achieved),
        other => other,
    }
}

/// Mean-value transform `(1/2pi) int_{S^1} u(x - omega) d omega`.
pub fn mean_value_transform(u: &(impl PlaneFunction + ?Sized), x: Point) -> Result<f64> {
    circle_average(u, x, 1.0)
}

/// Mean-value transform of `|x|^{-rho}` at distance `r` from the origin:
/// `m(r) = (1/2pi) int (r^2 - 2 r cos t + 1)^{-rho/2} dt`.
///
/// Finite at `r = 1` for `rho < 1`; `m(r) r^rho -> 1` as `r -> inf`.
pub fn mean_value_radial_profile(rho: f64, r: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho = {rho} must lie in (0, 1)")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius {r} must be nonnegative")));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let dr2 = (r - 1.0) * (r - 1.0);
    let f = |t: f64| {
        let s = (0.5 * t).sin();
        (dr2 + 4.0 * r * s * s).powf(-0.5 * rho)
    };
    let value = if (r - 1.0).abs() < 0.5 {
        let p = 2.0 / (1.0 - rho);
        let graded = |s: f64| f(PI * s.powf(p)) * PI * p * s.powf(p - 1.0);
        integrate_with_breaks(graded, &[0.0, 0.25, 0.5, 1.0], CIRCLE_TOL)
    } else {
        integrate_with_breaks(f, &[0.0, 0.5 * PI, PI], CIRCLE_TOL)
    }
    .map_err(|e| with_context(e, "radial mean-value profile"))?;
    Ok(value.value / PI)
}

/// The unique `r > 1` with `m(r) = level`, for `0 < level < m(1)`.
pub fn radial_profile_inverse(rho: f64, level: f64) -> Result<f64> {
    let peak = mean_value_radial_profile(rho, 1.0)?;
    if !(level > 0.0 && level < peak) {
        return Err(Error::Domain(format!(
            "level {level} outside the monotone range (0, {peak}) of the profile"
        )));
    }
    let mut lo = 1.0;
    let mut hi = 2.0 * level.powf(-1.0 / rho).max(2.0);
    while mean_value_radial_profile(rho, hi)? > level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_value_radial_profile(rho, mid)? > level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Average of `u` along the projected cyclotron orbit of energy `energy`
/// centred at `c`: a circle of radius `sqrt(E)/B`.
pub fn orbit_average(u: &(impl PlaneFunction + ?Sized), c: Point, energy: f64, b: f64) -> Result<f64> {
    if !(energy > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "orbit needs E > 0 and B > 0, got E={energy}, B={b}"
        )));
    }
    circle_average(u, c, energy.sqrt() / b)
}
