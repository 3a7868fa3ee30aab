//! Symbol side: the rescaled potential `V_B`, the Laguerre kernel `Psi_q`,
//! circle distributions `delta_k`, their convolutions with `V_B`, and the
//! Hilbert-Schmidt distance between the two smoothed symbols.
//!
//! `V_B(x) = V(-x_2 / sqrt(B), -x_1 / sqrt(B))` and
//! `Psi_q(x, xi) = ((-1)^q / pi) L_q(2(x^2 + xi^2)) e^{-(x^2 + xi^2)}`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau::landau_level;
use crate::potentials::{circle_average, mean_value_transform, PlaneFunction, PotentialModel};
use crate::specfun::{integrate_with_breaks, laguerre_weighted, Tolerance};
use crate::Point;

/// `V_B(x)`.
pub fn v_b(model: &PotentialModel, b: f64, x: Point) -> f64 {
    model.evaluate(x.swap_negate().scale(b.sqrt().recip()))
}

/// `V_B` as a plane function.
#[derive(Debug, Clone, Copy)]
pub struct ScaledModel {
    pub model: PotentialModel,
    pub b: f64,
}

impl PlaneFunction for ScaledModel {
    fn value(&self, x: Point) -> f64 {
        v_b(&self.model, self.b, x)
    }
}

/// The homogeneous tail of `V_B`, singular at the origin.
#[derive(Debug, Clone, Copy)]
pub struct ScaledTail {
    pub model: PotentialModel,
    pub b: f64,
}

impl PlaneFunction for ScaledTail {
    fn value(&self, x: Point) -> f64 {
        self.model.tail().value(x.swap_negate().scale(self.b.sqrt().recip()))
    }

    fn origin_singularity(&self) -> Option<f64> {
        self.model.tail().origin_singularity()
    }
}

/// `Psi_q(x, xi)`.
pub fn psi_q(q: u32, x: f64, xi: f64) -> f64 {
    let s = x * x + xi * xi;
    let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / PI * laguerre_weighted(q, 2.0 * s)
}

/// `(f * delta_k)(z)`: the average of `f` over the circle of radius `k` about `z`.
pub fn circle_convolution(f: &(impl PlaneFunction + ?Sized), k: f64, z: Point) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("circle radius k = {k} must be positive")));
    }
    circle_average(f, z, k)
}

const SMOOTHING_TOL: Tolerance = Tolerance::new(1e-12, 1e-11);

/// Upper end `T` of the `t = 2|w|^2` integral for `Psi_q`, with the neglected
/// part `int_T^inf |L_q(t)| e^{-t/2} dt` below `1e-10`.
fn smoothing_extent(q: u32) -> f64 {
    // For t >= q, |L_q(t)| <= 2^q t^q / q!, and past 4q the majorant
    // t^q e^{-t/2} decays at least like e^{-t/4}, so its tail is below 4T times its value.
    let qf = q as f64;
    let ln_fact = crate::specfun::ln_gamma(qf + 1.0);
    let mut t = 4.0 * qf + 20.0;
    loop {
        let log_tail = qf * t.ln() + qf * 2f64.ln() - ln_fact - 0.5 * t + (4.0 * t).ln();
        if log_tail < (1e-10f64).ln() {
            return t;
        }
        t += 4.0;
    }
}

/// `(f * Psi_q)(z)` for a plane function `f`, by polar quadrature about `z`:
/// `((-1)^q / 2) int_0^T L_q(t) e^{-t/2} C(sqrt(t/2)) dt` with `C(s)` the
/// average of `f` over the circle of radius `s` about `z`.
pub fn laguerre_smoothing_fn(f: &(impl PlaneFunction + ?Sized), q: u32, z: Point) -> Result<f64> {
    if q > 64 {
        return Err(Error::Domain(format!("laguerre smoothing supports q <= 64, got {q}")));
    }
    let top = smoothing_extent(q);
    let pieces = (q as usize + 4).max(8);
    let breaks: Vec<f64> = (0..=pieces).map(|i| top * (i as f64 / pieces as f64).powi(2)).collect();
    let failure_cell = std::cell::RefCell::new(None::<Error>);
    let inner = |t: f64| {
        let s = (0.5 * t).sqrt();
        match circle_average(f, z, s) {
            Ok(c) => laguerre_weighted(q, t) * c,
            Err(e) => {
                failure_cell.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let v = integrate_with_breaks(inner, &breaks, SMOOTHING_TOL)?;
    if let Some(e) = failure_cell.into_inner() {
        return Err(e);
    }
    let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(0.5 * sign * v.value)
}

/// `(V_B * Psi_q)(z)`.
pub fn laguerre_smoothing(model: &PotentialModel, b: f64, q: u32, z: Point) -> Result<f64> {
    laguerre_smoothing_fn(&ScaledModel { model: *model, b }, q, z)
}

/// Hilbert-Schmidt distance with its domain truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsDistance {
    pub value: f64,
    /// Outer radius of the `z` integral.
    pub r_max: f64,
    /// Estimate of the neglected `int_{r_max}^inf f^2 r dr`, relative to the result squared.
    pub relative_tail: f64,
}

/// `((1/2pi) int |(V_B * Psi_q)(z) - (V_B * delta_k)(z)|^2 dz)^{1/2}`,
/// `k = sqrt(2q+1)`, for radial models.
///
/// The two kernels share mass and second moment, so the difference of the
/// smoothed symbols decays like `|z|^{-rho-4}`; the integral is truncated at
/// `r_max = k + 30` and the remainder estimated from that power law.
pub fn hs_distance(model: &PotentialModel, b: f64, q: u32) -> Result<HsDistance> {
    if q > 32 {
        return Err(Error::Domain(format!("hs_distance supports q <= 32, got {q}")));
    }
    if !model.is_radial() {
        return Err(Error::Method("hs_distance requires a radial model".into()));
    }
    let k = (2.0 * q as f64 + 1.0).sqrt();
    let vb = ScaledModel { model: *model, b };
    let diff = |r: f64| -> Result<f64> {
        let z = Point::new(r, 0.0);
        Ok(laguerre_smoothing_fn(&vb, q, z)? - circle_convolution(&vb, k, z)?)
    };
    let r_max = k + 30.0;
    let mut breaks = vec![0.0, 0.5 * k, k, 1.5 * k + 1.0];
    let mut r = breaks[3];
    while r < r_max {
        r = (r * 1.5).min(r_max);
        breaks.push(r);
    }
    let failure = std::cell::RefCell::new(None::<Error>);
    let integrand = |r: f64| match diff(r) {
        Ok(d) => d * d * r,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let hs2 = integrate_with_breaks(integrand, &breaks, Tolerance::new(1e-16, 1e-7))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let edge = diff(r_max)?;
    let p = 2.0 * (4.0 + model.rho) - 2.0;
    let tail = edge * edge * r_max * r_max / p;
    let total = hs2.value + tail;
    if total == 0.0 {
        return Ok(HsDistance {
            value: 0.0,
            r_max,
            relative_tail: 0.0,
        });
    }
    let relative_tail = tail / total;
    if relative_tail > 0.1 {
        return Err(Error::Accuracy(format!(
            "hs_distance tail estimate is {:.1}% of the result at q={q}",
            100.0 * relative_tail
        )));
    }
    Ok(HsDistance {
        value: total.sqrt(),
        r_max,
        relative_tail,
    })
}

/// `I_rho(k) = int_0^1 (k^2 t^2 + 1)^{-rho/2} dt`, on a mesh graded at the
/// scale `1/k` of the integrand's knee.
pub fn i_rho(k: f64, rho: f64) -> Result<f64> {
    if !(k >= 0.0) || !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "i_rho needs k >= 0 and rho > 0, got k={k}, rho={rho}"
        )));
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    let mut breaks = vec![0.0];
    let mut t = 1.0 / k;
    while t < 1.0 {
        breaks.push(t);
        t *= 4.0;
    }
    breaks.push(1.0);
    let f = |t: f64| (k * k * t * t + 1.0).powf(-0.5 * rho);
    Ok(integrate_with_breaks(f, &breaks, Tolerance::new(1e-15, 1e-13))?.value)
}

/// Both sides of the homogeneity identity
/// `lambda_q^{rho/2} (Vt_B * delta_k)(z) = B^rho Vt°(S(z/k))`,
/// `k = sqrt(2q+1)`, `S(x_1, x_2) = (-x_2, -x_1)`, `Vt` the tail.
pub fn scaled_symbol_identity(model: &PotentialModel, b: f64, q: u32, z: Point) -> Result<(f64, f64)> {
    let k = (2.0 * q as f64 + 1.0).sqrt();
    let tail = ScaledTail { model: *model, b };
    let lhs = landau_level(b, q).powf(0.5 * model.rho) * circle_convolution(&tail, k, z)?;
    let rhs = b.powf(model.rho) * mean_value_transform(&model.tail(), z.scale(1.0 / k).swap_negate())?;
    Ok((lhs, rhs))
}

/// Which smoothed symbol a profile samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    LaguerreSmoothing,
    CircleConvolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub kind: SymbolKind,
    /// `q` for the Laguerre kernel, `k` for the circle.
    pub parameter: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub rho: f64,
}

/// A radial symbol sampled on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSymbolProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: ProfileMeta,
}

impl RadialSymbolProfile {
    /// Sample `(V_B * Psi_q)` or `(V_B * delta_k)` of a radial model along the positive axis.
    pub fn sample(model: &PotentialModel, b: f64, kind: SymbolKind, parameter: f64, radii: &[f64]) -> Result<Self> {
        if !model.is_radial() {
            return Err(Error::Method("radial symbol profiles need a radial model".into()));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii.first().is_some_and(|&r| r < 0.0) {
            return Err(Error::Domain(
                "profile radii must be nonnegative and strictly ascending".into(),
            ));
        }
        let vb = ScaledModel { model: *model, b };
        let values = radii
            .iter()
            .map(|&r| {
                let z = Point::new(r, 0.0);
                match kind {
                    SymbolKind::LaguerreSmoothing => laguerre_smoothing_fn(&vb, parameter as u32, z),
                    SymbolKind::CircleConvolution => circle_convolution(&vb, parameter, z),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RadialSymbolProfile {
            radii: radii.to_vec(),
            values,
            meta: ProfileMeta {
                kind,
                parameter,
                b,
                rho: model.rho,
            },
        })
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "r,value")?;
        for (r, v) in self.radii.iter().zip(&self.values) {
            writeln!(w, "{},{}", crate::report::fmt_f64(*r), crate::report::fmt_f64(*v))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::mean_value_radial_profile;
    use crate::specfun::{bessel_j0, integrate_adaptive, laguerre};

    #[test]
    fn v_b_cases() {
        let m = PotentialModel::isotropic(0.5);
        let v = v_b(&m, 4.0, Point::polar(2.0, 0.3));
        assert!((v - 2f64.powf(-0.25)).abs() < 1e-15);
        let a = PotentialModel::anisotropic(0.5, 0.3, 3);
        let x = Point::new(0.7, -1.9);
        assert_eq!(v_b(&a, 1.0, x), a.evaluate(Point::new(1.9, -0.7)));
        assert_eq!(x.swap_negate().swap_negate(), x);
    }

    #[test]
    fn psi_q_cases_and_mass() {
        assert!((psi_q(0, 0.0, 0.0) - 1.0 / PI).abs() < 1e-16);
        for q in [1u32, 2, 7] {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            assert!((psi_q(q, 0.0, 0.0) - sign / PI).abs() < 1e-15);
        }
        // int Psi_q over the plane = 2 pi int_0^inf Psi_q(s) s ds
        for q in [0u32, 1, 5] {
            let f = |s: f64| 2.0 * PI * psi_q(q, s, 0.0) * s;
            let v = integrate_adaptive(f, 0.0, 30.0, Tolerance::new(1e-14, 1e-12))
                .unwrap()
                .value;
            assert!((v - 1.0).abs() < 1e-8, "q={q}: {v}");
            // Laplace oracle: int_0^inf L_q(2u) e^{-u} du = (-1)^q
            let g = |u: f64| laguerre(q, 2.0 * u) * (-u).exp();
            let w = integrate_adaptive(g, 0.0, 80.0, Tolerance::new(1e-14, 1e-12))
                .unwrap()
                .value;
            assert!((w - if q % 2 == 0 { 1.0 } else { -1.0 }).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_convolution_cases() {
        let one = |_: Point| 1.0;
        assert!((circle_convolution(&one, 3.0, Point::new(1.0, 2.0)).unwrap() - 1.0).abs() < 1e-14);
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        let z = Point::new(0.4, -0.9);
        let a = circle_convolution(&m, 1.0, z).unwrap();
        let b = mean_value_transform(&m, z).unwrap();
        assert!((a - b).abs() < 1e-12);
        let t = PotentialModel::isotropic(0.5);
        for (k, r) in [(2.0, 1.0), (3.0, 3.0), (5.0, 2.5), (1.7, 9.0)] {
            let z = Point::polar(r, 0.8);
            let c = circle_convolution(&t.tail(), k, z).unwrap();
            let want = k.powf(-0.5) * mean_value_radial_profile(0.5, r / k).unwrap();
            assert!((c - want).abs() < 1e-8, "k={k} r={r}: {c} {want}");
        }
        assert!(circle_convolution(&one, 0.0, z).is_err());
    }

    #[test]
    fn smoothing_of_constant_is_one() {
        let one = |_: Point| 1.0;
        for q in [0u32, 1, 4, 16, 64] {
            let v = laguerre_smoothing_fn(&one, q, Point::new(0.3, 0.2)).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "q={q}: {v}");
        }
        assert!(laguerre_smoothing_fn(&one, 65, Point::ORIGIN).is_err());
    }

    #[test]
    fn smoothing_gaussian_closed_form() {
        let (a, w, b) = (1.3, 0.8, 2.0);
        let m = PotentialModel::gaussian_bump(a, w, 0.5);
        let s2 = b * w * w;
        for z in [Point::ORIGIN, Point::new(0.5, 0.0), Point::new(1.0, -2.0)] {
            let v = laguerre_smoothing(&m, b, 0, z).unwrap();
            let zz = z.x * z.x + z.y * z.y;
            let exact = a * s2 / (s2 + 0.5) * (-zz / (2.0 * (s2 + 0.5))).exp();
            assert!((v - exact).abs() < 1e-7, "{v} {exact}");
        }
    }

    #[test]
    fn smoothing_preserves_radial_symmetry() {
        let m = PotentialModel::isotropic(0.5);
        let r = 2.3;
        let vals: Vec<f64> = (0..8)
            .map(|i| laguerre_smoothing(&m, 1.0, 3, Point::polar(r, i as f64 * PI / 4.0 + 0.1)).unwrap())
            .collect();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-9);
        }
        let c: Vec<f64> = (0..8)
            .map(|i| circle_convolution(&m, 2.0, Point::polar(r, i as f64 * 0.7)).unwrap())
            .collect();
        for v in &c {
            assert!((v - c[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn hs_distance_of_zero_potential() {
        let m = PotentialModel::isotropic(0.5).scaled(0.0);
        let h = hs_distance(&m, 1.0, 2).unwrap();
        assert_eq!(h.value, 0.0);
        assert!(hs_distance(&PotentialModel::anisotropic(0.5, 0.3, 2), 1.0, 2).is_err());
    }

    /// Hankel-side value: `hs^2 = int_0^inf gap(zeta)^2 F(zeta)^2 zeta d zeta`,
    /// with `gap = L_q(zeta^2/2) e^{-zeta^2/4} - J_0(k zeta)` the difference
    /// of the two kernels' transforms and `F` the transform of `<x>^{-rho}`:
    /// `F(zeta) = (1/Gamma(nu)) int_0^inf t^{nu-2} e^{-t - zeta^2/(4t)} dt / 2`.
    fn hs_fourier(rho: f64, q: u32) -> f64 {
        let nu = 0.5 * rho;
        let g = crate::specfun::ln_gamma(nu).exp();
        let ft = |zeta: f64| {
            let a = 0.25 * zeta * zeta;
            // t = e^u
            let h = |u: f64| {
                let t = u.exp();
                t.powf(nu - 1.0) * (-t - a / t).exp()
            };
            let lo = (a.max(1e-300)).ln() - 48.0;
            integrate_adaptive(h, lo.max(-200.0), 6.0, Tolerance::new(1e-300, 1e-11))
                .unwrap()
                .value
                / (2.0 * g)
        };
        let k = (2.0 * q as f64 + 1.0).sqrt();
        let f = |zeta: f64| {
            let gap = laguerre_weighted(q, 0.5 * zeta * zeta) - bessel_j0(k * zeta);
            gap * gap * ft(zeta).powi(2) * zeta
        };
        let breaks: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
        integrate_with_breaks(f, &breaks, Tolerance::new(1e-16, 1e-9))
            .unwrap()
            .value
            .sqrt()
    }

    #[test]
    fn hs_distance_dual_representation_q1() {
        let m = PotentialModel::isotropic(0.5);
        let h = hs_distance(&m, 1.0, 1).unwrap();
        let f = hs_fourier(0.5, 1);
        assert!(((h.value - f) / f).abs() < 0.01, "{} {f}", h.value);
        assert!(h.relative_tail < 0.1);
    }

    #[test]
    fn i_rho_cases() {
        for rho in [0.3, 1.0, 2.5] {
            assert_eq!(i_rho(0.0, rho).unwrap(), 1.0);
        }
        // rho = 1: asinh closed form; rho = 2: arctan.
        for k in [0.5, 3.0, 1e3] {
            assert!((i_rho(k, 1.0).unwrap() - k.asinh() / k).abs() < 1e-13);
            assert!((i_rho(k, 2.0).unwrap() - k.atan() / k).abs() < 1e-13);
        }
        let v = 1e4f64.powf(0.5) * i_rho(1e4, 0.5).unwrap();
        assert!((v - 2.0).abs() / 2.0 < 0.02);
        let w = 1e3 * i_rho(1e3, 2.0).unwrap();
        assert!((w - PI / 2.0).abs() / (PI / 2.0) < 0.01);
    }

    #[test]
    fn scaled_identity_isotropic_radial_oracle() {
        let m = PotentialModel::isotropic(0.5);
        for q in [0u32, 3, 10] {
            let k = (2.0 * q as f64 + 1.0).sqrt();
            let z = Point::polar(3.0 * k, 0.4);
            let (l, r) = scaled_symbol_identity(&m, 1.0, q, z).unwrap();
            let want = mean_value_radial_profile(0.5, 3.0).unwrap();
            assert!((l - want).abs() < 1e-8 && (r - want).abs() < 1e-8);
        }
    }

    #[test]
    fn scaled_identity_b_scaling_and_anisotropic() {
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        let q = 4;
        let u = Point::new(0.7, 1.6);
        let (l1, r1) = scaled_symbol_identity(&m, 1.0, q, u).unwrap();
        let (l2, r2) = scaled_symbol_identity(&m, 2.0, q, u).unwrap();
        let f = 2f64.powf(0.5);
        assert!((l2 - f * l1).abs() < 1e-9 && (r2 - f * r1).abs() < 1e-9);
        for i in 0..16 {
            let radius = if i < 8 { 1.0 } else { 4.5 };
            let z = Point::polar(radius, i as f64 * PI / 4.0 + 0.2);
            let (l, r) = scaled_symbol_identity(&m, 1.0, 8, z).unwrap();
            assert!((l - r).abs() < 1e-7, "{i}: {l} {r}");
        }
    }

    #[test]
    fn circle_symbol_norm_surrogate_bounded() {
        for rho in [0.3, 0.5, 0.7] {
            let m = PotentialModel::isotropic(rho);
            let mut worst = 0.0f64;
            for k in [2.0, 10.0, 100.0, 1000.0] {
                for i in 0..40 {
                    let r = k * 2.5 * i as f64 / 39.0;
                    let v = circle_convolution(&m, k, Point::new(r, 0.0)).unwrap();
                    worst = worst.max(v.abs() * k.powf(rho));
                }
            }
            assert!(worst < 5.0, "rho={rho}: {worst}");
        }
    }

    #[test]
    fn profile_csv() {
        let m = PotentialModel::isotropic(0.5);
        let p = RadialSymbolProfile::sample(&m, 1.0, SymbolKind::CircleConvolution, 2.0, &[0.0, 1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("r,value\n0.0000000000000000e0,"));
        assert!(RadialSymbolProfile::sample(&m, 1.0, SymbolKind::CircleConvolution, 2.0, &[1.0, 1.0]).is_err());
    }
}
