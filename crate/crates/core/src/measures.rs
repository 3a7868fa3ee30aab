//! Both sides of the trace asymptotics
//! `lambda_q^{-1} sum_j phi(lambda_q^{rho/2} e_j) -> (1/2piB) int phi(B^rho Vt°(x)) dx`:
//! empirical cluster measures built from eigenvalues, and the limiting
//! measure built from the mean-value transform of the tail `Vt`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{block_spectrum, EigenSpectrum};
use crate::error::{Error, Result};
use crate::landau::{default_quad_order_base, landau_level, truncated_block, ToeplitzBlock};
use crate::potentials::{
    mean_value_radial_profile, mean_value_transform, orbit_average, radial_profile_inverse, PlaneFunction,
    PotentialModel,
};
use crate::report::{fmt_f64, CsvTable};
use crate::specfun::{integrate_with_breaks, legendre_rule, Tolerance};
use crate::Point;

/// The bump `phi(t) = e * exp(-1/(1-s^2))`, `s = (t - c)/w`, supported on
/// `[c - w, c + w]`, which must not contain 0. `phi(c) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub center: f64,
    pub half_width: f64,
}

impl TestFunction {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        let phi = TestFunction { center, half_width };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite() && self.center.is_finite()) {
            return Err(Error::Domain(format!(
                "test function needs a finite center and positive half-width, got ({}, {})",
                self.center, self.half_width
            )));
        }
        if self.lower_edge() <= 0.0 {
            return Err(Error::Domain(format!(
                "test function support [{}, {}] contains 0",
                self.center - self.half_width,
                self.center + self.half_width
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        let s2 = s * s;
        if s2 < 1.0 {
            (-s2 / (1.0 - s2)).exp()
        } else {
            0.0
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// Distance from 0 to the support.
    pub fn lower_edge(&self) -> f64 {
        self.center.abs() - self.half_width
    }
}

fn check_interval(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha < beta) {
        return Err(Error::Domain(format!(
            "interval needs alpha < beta, got [{alpha}, {beta}]"
        )));
    }
    if alpha <= 0.0 && beta >= 0.0 {
        return Err(Error::Domain(format!("interval [{alpha}, {beta}] contains 0")));
    }
    Ok(())
}

/// Cluster eigenvalues of level `q` rescaled by `lambda_q^{rho/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalClusterMeasure {
    pub q: u32,
    pub lambda_q: f64,
    pub scaled_eigenvalues: Vec<f64>,
    pub truncation_tail_bound: f64,
}

impl EmpiricalClusterMeasure {
    pub fn new(q: u32, b: f64, rho: f64, spectrum: &EigenSpectrum, truncation_tail_bound: f64) -> Self {
        let lambda_q = landau_level(b, q);
        let s = lambda_q.powf(0.5 * rho);
        EmpiricalClusterMeasure {
            q,
            lambda_q,
            scaled_eigenvalues: spectrum.values.iter().map(|e| s * e).collect(),
            truncation_tail_bound,
        }
    }

    pub fn from_block(block: &ToeplitzBlock, rho: f64) -> Result<Self> {
        let spec = block_spectrum(block)?;
        Ok(Self::new(block.q, block.b, rho, &spec, block.truncation_tail_bound))
    }
}

/// Number of scaled eigenvalues in `[alpha, beta]`.
pub fn eigenvalue_counting(measure: &EmpiricalClusterMeasure, alpha: f64, beta: f64) -> Result<usize> {
    check_interval(alpha, beta)?;
    Ok(measure
        .scaled_eigenvalues
        .iter()
        .filter(|&&v| v >= alpha && v <= beta)
        .count())
}

/// `sum_j phi(lambda_q^{rho/2} e_j)`.
///
/// `tail_bound` bounds the row sums of the discarded indices; the sum is only
/// meaningful when `lambda_q^{rho/2} * tail_bound` stays below the support of
/// `phi`, so that nothing discarded can reach it.
pub fn trace_functional(
    spec: &EigenSpectrum,
    lambda_q: f64,
    rho: f64,
    phi: &TestFunction,
    tail_bound: Option<f64>,
) -> Result<f64> {
    phi.validate()?;
    let s = lambda_q.powf(0.5 * rho);
    let tail = tail_bound.ok_or_else(|| Error::Contract("trace functional needs a truncation tail bound".into()))?;
    if !(s * tail < phi.lower_edge()) {
        return Err(Error::Contract(format!(
            "scaled truncation tail {} reaches the test function support (lower edge {})",
            s * tail,
            phi.lower_edge()
        )));
    }
    Ok(spec.values.iter().map(|e| phi.eval(s * e)).sum())
}

/// Which Schatten quantity [`schatten_norm`] computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchattenIndex {
    /// `(sum |e_j|^l)^{1/l}`.
    Strong(f64),
    /// `sup_j j^{1/l} |e|_(j)` over the non-increasing rearrangement.
    Weak(f64),
}

pub fn schatten_norm(spec: &EigenSpectrum, index: SchattenIndex) -> f64 {
    schatten_of(&spec.values, index)
}

fn schatten_of(values: &[f64], index: SchattenIndex) -> f64 {
    match index {
        SchattenIndex::Strong(l) => {
            let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if top == 0.0 {
                return 0.0;
            }
            let s: f64 = values.iter().map(|v| (v.abs() / top).powf(l)).sum();
            top * s.powf(1.0 / l)
        }
        SchattenIndex::Weak(l) => {
            let mut a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
            a.sort_by(|x, y| y.total_cmp(x));
            a.iter()
                .enumerate()
                .map(|(j, v)| ((j + 1) as f64).powf(1.0 / l) * v)
                .fold(0.0, f64::max)
        }
    }
}

/// How the limiting measure is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    /// One-dimensional radial integrals and bisection on the monotone profile.
    RadialInversion,
    /// Tensor quadrature in polar coordinates.
    #[serde(rename = "grid-2d")]
    Grid2d,
    /// Uniform sampling of the support disk.
    MonteCarlo { seed: u64, samples: u64 },
}

/// The measure `mu([a, b]) = (1/2piB) |{x : Vt°(x) in B^{-rho} [a, b]}|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitingMeasure {
    pub model: PotentialModel,
    #[serde(rename = "B")]
    pub b: f64,
    pub method: Method,
}

/// Offset applied to interval endpoints that sit on a critical value of the profile.
const ATOM_NUDGE: f64 = 1e-9;
const MU_GRID_RADII: usize = 1024;
const GRID_ANGLES: usize = 128;
const GRID_PANEL_ORDER: usize = 10;
const MC_CHUNK: u64 = 1 << 16;
const RADIAL_TOL: Tolerance = Tolerance::new(1e-15, 1e-11);

/// Panel breaks on `[0, r_max]`, graded geometrically on both sides of `r = 1`
/// where the mean-value transform of a `|x|^{-rho}` tail has a cusp.
fn radial_breaks(r_max: f64) -> Vec<f64> {
    let mut b = vec![0.0, 0.5];
    b.extend((2..=24).map(|j| 1.0 - 0.5f64.powi(j)));
    b.push(1.0);
    b.extend((2..=24).rev().map(|j| 1.0 + 0.5f64.powi(j)));
    b.extend([1.5, 2.0]);
    let mut r = 2.0;
    while r < r_max {
        r *= 1.25;
        b.push(r);
    }
    let mut out: Vec<f64> = b.into_iter().filter(|&x| x < r_max).collect();
    out.push(r_max);
    out
}

impl LimitingMeasure {
    pub fn new(model: PotentialModel, b: f64, method: Method) -> Result<Self> {
        let m = LimitingMeasure { model, b, method };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Config(format!("B = {} must be positive", self.b)));
        }
        if let Method::MonteCarlo { samples: 0, .. } = self.method {
            return Err(Error::Config("monte-carlo needs at least one sample".into()));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.model.rho
    }

    fn scale(&self) -> f64 {
        self.b.powf(self.model.rho)
    }

    /// `B^rho Vt°(x)`.
    fn scaled_symbol(&self, x: Point) -> Result<f64> {
        Ok(self.scale() * mean_value_transform(&self.model.tail(), x)?)
    }

    /// Coefficient `a` with `Vt(x) = a |x|^{-rho}` for radial models.
    fn radial_coefficient(&self) -> Result<f64> {
        if !self.model.is_radial() {
            return Err(Error::Method(
                "radial-inversion needs a radial model; use grid-2d or monte-carlo".into(),
            ));
        }
        Ok(self.model.tail().value(Point::new(1.0, 0.0)))
    }

    /// Radius outside which `|B^rho Vt°| < level`, from `|Vt(y)| <= C |y|^{-rho}`.
    fn support_radius(&self, level: f64) -> Result<f64> {
        let c = self.model.tail_bound_constant();
        if c == 0.0 {
            return Ok(0.0);
        }
        let rho = self.model.rho;
        let l = level / (self.scale() * c);
        if l >= mean_value_radial_profile(rho, 1.0)? {
            return Ok(0.0);
        }
        Ok(radial_profile_inverse(rho, l)? * (1.0 + 1e-9))
    }

    /// Sum of `f(x)` over a deterministic sample of `samples` uniform points
    /// in the disk of radius `r`, split into independently seeded streams.
    fn monte_carlo_sum(r: f64, seed: u64, samples: u64, f: impl Fn(Point) -> Result<f64> + Sync) -> Result<f64> {
        let chunks = samples.div_ceil(MC_CHUNK);
        let sums = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let n = MC_CHUNK.min(samples - c * MC_CHUNK);
                let mut s = 0.0;
                for _ in 0..n {
                    let u: f64 = rng.gen();
                    let v: f64 = rng.gen();
                    s += f(Point::polar(r * u.sqrt(), 2.0 * PI * v))?;
                }
                Ok(s)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(sums.iter().sum())
    }

    /// `mu([alpha, beta])`.
    pub fn mu_interval(&self, alpha: f64, beta: f64) -> Result<f64> {
        check_interval(alpha, beta)?;
        let b = self.b;
        match self.method {
            Method::RadialInversion => {
                let a = self.radial_coefficient()?;
                if a == 0.0 {
                    return Ok(0.0);
                }
                let rho = self.model.rho;
                let peak = mean_value_radial_profile(rho, 1.0)?;
                let (l1, l2) = (alpha / (self.scale() * a), beta / (self.scale() * a));
                let (mut lo, mut hi) = (l1.min(l2), l1.max(l2));
                if hi <= 0.0 {
                    return Ok(0.0);
                }
                // Keep endpoints off the profile's critical values m(0) = 1 and m(1),
                // pushing them out of the non-monotone band [1, m(1)].
                for x in [&mut lo, &mut hi] {
                    if (*x - 1.0).abs() <= ATOM_NUDGE {
                        *x = 1.0 - ATOM_NUDGE;
                    } else if (*x - peak).abs() <= ATOM_NUDGE {
                        *x = peak + ATOM_NUDGE;
                    }
                }
                if lo >= peak {
                    return Ok(0.0);
                }
                if hi >= 1.0 {
                    return Err(Error::Method(format!(
                        "levels [{lo}, {hi}] reach the non-monotone band [1, {peak}] of the radial profile; use grid-2d"
                    )));
                }
                let (r_lo, r_hi) = (radial_profile_inverse(rho, lo)?, radial_profile_inverse(rho, hi)?);
                Ok((r_lo * r_lo - r_hi * r_hi) / (2.0 * b))
            }
            Method::Grid2d => {
                let r_max = self.support_radius(alpha.abs().min(beta.abs()))?;
                if r_max == 0.0 {
                    return Ok(0.0);
                }
                let dr = r_max / MU_GRID_RADII as f64;
                let rows = (0..MU_GRID_RADII)
                    .into_par_iter()
                    .map(|i| {
                        let r = (i as f64 + 0.5) * dr;
                        let mut hits = 0usize;
                        for j in 0..GRID_ANGLES {
                            let th = 2.0 * PI * (j as f64 + 0.5) / GRID_ANGLES as f64;
                            let v = self.scaled_symbol(Point::polar(r, th))?;
                            hits += (v >= alpha && v <= beta) as usize;
                        }
                        Ok(hits as f64 * r * dr)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(rows.iter().sum::<f64>() / (b * GRID_ANGLES as f64))
            }
            Method::MonteCarlo { seed, samples } => {
                let r_max = self.support_radius(alpha.abs().min(beta.abs()))?;
                if r_max == 0.0 {
                    return Ok(0.0);
                }
                let hits = Self::monte_carlo_sum(r_max, seed, samples, |x| {
                    let v = self.scaled_symbol(x)?;
                    Ok(if v >= alpha && v <= beta { 1.0 } else { 0.0 })
                })?;
                Ok(r_max * r_max / (2.0 * b) * hits / samples as f64)
            }
        }
    }

    /// `(1/2piB) int phi(B^rho Vt°(x)) dx`.
    pub fn limiting_density_integral(&self, phi: &TestFunction) -> Result<f64> {
        phi.validate()?;
        let b = self.b;
        let r_max = self.support_radius(phi.lower_edge())?;
        if r_max == 0.0 {
            return Ok(0.0);
        }
        match self.method {
            Method::RadialInversion => {
                let a = self.radial_coefficient()?;
                let rho = self.model.rho;
                let s = self.scale() * a;
                let failure = std::cell::RefCell::new(None::<Error>);
                let f = |r: f64| match mean_value_radial_profile(rho, r) {
                    Ok(m) => phi.eval(s * m) * r,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                };
                let v = integrate_with_breaks(f, &radial_breaks(r_max), RADIAL_TOL)?;
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                Ok(v.value / b)
            }
            Method::Grid2d => {
                let rule = legendre_rule(GRID_PANEL_ORDER);
                let nodes: Vec<(f64, f64)> = radial_breaks(r_max)
                    .windows(2)
                    .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
                    .collect();
                let rows = nodes
                    .par_iter()
                    .map(|&(r, w)| {
                        let mut s = 0.0;
                        for j in 0..GRID_ANGLES {
                            let th = 2.0 * PI * (j as f64 + 0.5) / GRID_ANGLES as f64;
                            s += phi.eval(self.scaled_symbol(Point::polar(r, th))?);
                        }
                        Ok(w * r * s)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(rows.iter().sum::<f64>() / (b * GRID_ANGLES as f64))
            }
            Method::MonteCarlo { seed, samples } => {
                let s = Self::monte_carlo_sum(r_max, seed, samples, |x| Ok(phi.eval(self.scaled_symbol(x)?)))?;
                Ok(r_max * r_max / (2.0 * b) * s / samples as f64)
            }
        }
    }
}

/// `(1/2pi)(B/E) int phi(E^{rho/2} Av(V)(c, E)) dc` by Monte Carlo over orbit
/// centres `c`, with `Av(V)(c, E)` the average of the full potential over the
/// cyclotron circle of radius `sqrt(E)/B` about `c`.
pub fn averaging_principle(
    model: &PotentialModel,
    b: f64,
    phi: &TestFunction,
    energy: f64,
    seed: u64,
    samples: u64,
) -> Result<f64> {
    phi.validate()?;
    if samples == 0 {
        return Err(Error::Config("averaging principle needs at least one sample".into()));
    }
    let lim = LimitingMeasure::new(*model, b, Method::Grid2d)?;
    let radius = energy.sqrt() / b;
    let r_max = lim.support_radius(phi.lower_edge())? * radius;
    if r_max == 0.0 {
        return Ok(0.0);
    }
    let s = energy.powf(0.5 * model.rho);
    let sum = LimitingMeasure::monte_carlo_sum(r_max, seed, samples, |c| {
        Ok(phi.eval(s * orbit_average(model, c, energy, b)?))
    })?;
    Ok(b * r_max * r_max / (2.0 * energy) * sum / samples as f64)
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub q: u32,
    pub lambda_q: f64,
    pub k_max: i64,
    /// `lambda_q^{-1} * trace_functional`.
    pub lhs: f64,
    /// The limiting integral, identical in every row.
    pub rhs: f64,
    pub rel_gap: f64,
}

/// Both sides of the trace asymptotics for each `q` in `q_list`.
///
/// Each level is truncated at `delta`, assembled, and diagonalised
/// independently; rows come back in `q_list` order.
pub fn convergence_study(
    model: &PotentialModel,
    b: f64,
    phi: &TestFunction,
    q_list: &[u32],
    delta: f64,
    method: Method,
) -> Result<Vec<ConvergenceRow>> {
    phi.validate()?;
    if q_list.is_empty() || q_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("q_list must be nonempty and strictly ascending".into()));
    }
    if !(delta > 0.0 && delta < phi.lower_edge()) {
        return Err(Error::Config(format!(
            "delta = {delta} must lie in (0, {}), below the test function support",
            phi.lower_edge()
        )));
    }
    let rho = model.rho;
    let rhs = LimitingMeasure::new(*model, b, method)?.limiting_density_integral(phi)?;
    let base = default_quad_order_base();
    q_list
        .par_iter()
        .map(|&q| {
            let block = truncated_block(model, b, q, delta, base)?;
            let spec = block_spectrum(&block)?;
            let lambda_q = landau_level(b, q);
            let lhs = trace_functional(&spec, lambda_q, rho, phi, Some(block.truncation_tail_bound))? / lambda_q;
            Ok(ConvergenceRow {
                q,
                lambda_q,
                k_max: block.k_max,
                lhs,
                rhs,
                rel_gap: (lhs - rhs).abs() / rhs.abs().max(1e-12),
            })
        })
        .collect()
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> CsvTable {
    let mut t = CsvTable::new(&["q", "lambda_q", "k_max", "lhs", "rhs", "rel_gap"]);
    for r in rows {
        t.push(vec![
            r.q.to_string(),
            fmt_f64(r.lambda_q),
            r.k_max.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.rel_gap),
        ]);
    }
    t
}
