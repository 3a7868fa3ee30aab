//! Angular-momentum basis of the Landau levels and the truncated
//! Berezin-Toeplitz matrices of `P_q V P_q`.
//!
//! Gauge: `A = (B/2)(-x_2, x_1)`. The level-`q` eigenspace has the orthonormal
//! basis `phi_{k,q}(r, theta) = (2 pi)^{-1/2} e^{i k theta} R_{k,q}(r)`,
//! `k >= -q`, with `R_{k,q}(r) = sqrt(B) psi_n^{(|k|)}(B r^2 / 2)` and
//! `n = q + min(k, 0)`. Its orbit-centre radius grows like `sqrt(2(q+k)/B)`.
//!
//! Matrix entries are integrals in `xi = B r^2 / 2`:
//! `<V phi_{k'}, phi_k> = int v_{k-k'}(sqrt(2 xi / B)) psi_n psi_{n'} d xi`,
//! evaluated by Gauss-Legendre on the classically allowed window of the two
//! Laguerre functions. Each rule is certified by reproducing both unit
//! masses; failures retry with a doubled order and wider window.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{AngularModeProfile, PotentialKind, PotentialModel};
use crate::specfun::{legendre_rule, LaguerreFunction};

/// Largest retained angular index accepted by [`truncation_bound`].
pub const DEFAULT_K_CAP: i64 = 200_000;
/// Largest dimension stored as a dense matrix.
pub const DENSE_CAP: usize = 4096;
/// Required accuracy of the quadrature mass check.
pub const MASS_TOL: f64 = 1e-12;
/// Bound on `sup|V|`-relative contribution of the region inside an orbit's
/// inner truncation radius; the Laguerre mass there is below `1e-18`.
pub const TAIL_FLOOR: f64 = 1e-9;

pub fn landau_level(b: f64, q: u32) -> f64 {
    b * (2.0 * q as f64 + 1.0)
}

pub fn default_quad_order_base() -> usize {
    32
}

/// Parameters of one truncated level block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauConfig {
    #[serde(rename = "B")]
    pub b: f64,
    pub q: u32,
    pub k_max: i64,
    #[serde(default = "default_quad_order_base")]
    pub quad_order_base: usize,
}

impl LandauConfig {
    pub fn new(b: f64, q: u32, k_max: i64) -> Self {
        LandauConfig {
            b,
            q,
            k_max,
            quad_order_base: default_quad_order_base(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Config(format!("B = {} must be positive", self.b)));
        }
        if self.k_max < -(self.q as i64) {
            return Err(Error::Config(format!("K_max = {} below -q = -{}", self.k_max, self.q)));
        }
        if self.quad_order_base == 0 {
            return Err(Error::Config("quad_order_base must be positive".into()));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        landau_level(self.b, self.q)
    }

    pub fn dimension(&self) -> usize {
        (self.k_max + self.q as i64 + 1) as usize
    }
}

/// Index `(q, k)` of the basis function `phi_{k,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub q: u32,
    pub k: i64,
}

impl BasisIndex {
    pub fn new(q: u32, k: i64) -> Result<Self> {
        if k < -(q as i64) {
            return Err(Error::Domain(format!("angular index k = {k} below -q = -{q}")));
        }
        Ok(BasisIndex { q, k })
    }

    /// Laguerre degree `n = q + min(k, 0)`.
    pub fn degree(&self) -> u32 {
        (self.q as i64 + self.k.min(0)) as u32
    }

    /// Laguerre order `alpha = |k|`.
    pub fn order(&self) -> u32 {
        self.k.unsigned_abs() as u32
    }

    fn laguerre(&self) -> LaguerreFunction {
        LaguerreFunction::new(self.degree(), self.order())
    }

    /// Turning points `c -+ sqrt(c^2 - alpha^2)` in `xi`, `c = 2n + alpha + 1`.
    fn turning_points(&self) -> (f64, f64) {
        let c = 2.0 * self.degree() as f64 + self.order() as f64 + 1.0;
        let a = self.order() as f64;
        let disc = ((c - a) * (c + a)).sqrt();
        (a * a / (c + disc), c + disc)
    }

    fn centre(&self) -> f64 {
        2.0 * self.degree() as f64 + self.order() as f64 + 1.0
    }
}

/// Radial factor `R_{k,q}(r)`, normalized by `int R^2 r dr = 1`.
pub fn radial_basis(idx: BasisIndex, b: f64, r: f64) -> f64 {
    b.sqrt() * idx.laguerre().eval(0.5 * b * r * r)
}

/// Sign convention used in the radial Landau operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularSign {
    /// `(k/r - B r / 2)^2`, matching `radial_basis`.
    Standard,
    /// `(-k/r - B r / 2)^2`: a deliberately wrong orientation.
    Flipped,
}

/// Threshold above which [`eigen_residual_check`] reports a convention error.
pub const RESIDUAL_THRESHOLD: f64 = 1e-5;

/// Window `[r_lo, r_hi]` and step used by the residual check.
fn residual_grid(idx: BasisIndex, b: f64) -> (f64, f64, f64) {
    let c = idx.centre();
    let xi_hi = c + 10.0 * c.sqrt() + 20.0;
    let scale = b.sqrt().recip();
    (0.2 * scale, (2.0 * xi_hi / b).sqrt().max(6.0 * scale), 1e-3 * scale)
}

/// Max-norm of `(H_k - lambda_q) R_{k,q}` on a grid, relative to
/// `lambda_q max |R|`, where
/// `H_k R = -R'' - R'/r + (s k / r - B r / 2)^2 R` with `s = +-1`.
///
/// Derivatives use sixth-order central differences with step `1e-3/sqrt(B)`
/// on `r in [0.2/sqrt(B), r_hi]`, `r_hi` past the outer turning point.
pub fn eigen_residual(idx: BasisIndex, b: f64, sign: AngularSign) -> f64 {
    let (lo, hi, h) = residual_grid(idx, b);
    let f = idx.laguerre();
    let sb = b.sqrt();
    let steps = ((hi - lo) / h).ceil() as usize;
    let values: Vec<f64> = (0..steps + 7)
        .map(|i| {
            let r = lo + (i as f64 - 3.0) * h;
            sb * f.eval(0.5 * b * r * r)
        })
        .collect();
    let lambda = landau_level(b, idx.q);
    let k = match sign {
        AngularSign::Standard => idx.k as f64,
        AngularSign::Flipped => -(idx.k as f64),
    };
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for i in 3..steps + 4 {
        let r = lo + (i as f64 - 3.0) * h;
        let w = &values[i - 3..=i + 3];
        let d1 = (-w[0] + 9.0 * w[1] - 45.0 * w[2] + 45.0 * w[4] - 9.0 * w[5] + w[6]) / (60.0 * h);
        let d2 = (2.0 * w[0] - 27.0 * w[1] + 270.0 * w[2] - 490.0 * w[3] + 270.0 * w[4] - 27.0 * w[5] + 2.0 * w[6])
            / (180.0 * h * h);
        let pot = (k / r - 0.5 * b * r).powi(2);
        let res = -d2 - d1 / r + (pot - lambda) * w[3];
        worst = worst.max(res.abs());
        peak = peak.max(w[3].abs());
    }
    worst / (lambda * peak)
}

/// [`eigen_residual`] with the standard convention, as a certificate.
pub fn eigen_residual_check(idx: BasisIndex, b: f64) -> Result<f64> {
    let res = eigen_residual(idx, b, AngularSign::Standard);
    if !(res < RESIDUAL_THRESHOLD) {
        return Err(Error::Convention {
            q: idx.q,
            k: idx.k,
            residual: res,
        });
    }
    Ok(res)
}

/// Quadrature window pad in `xi` around the turning points.
fn quad_pad(c: f64) -> f64 {
    30.0 + 7.0 * c.sqrt()
}

/// Pad below the inner turning point used for truncation bounds; the
/// Laguerre mass below `xi_- - pad` is far under `TAIL_FLOOR^2`.
fn truncation_pad(c: f64) -> f64 {
    14.0 + 9.0 * c.sqrt()
}

/// Inner radius of `phi_{k,q}` for envelope bounds.
pub fn inner_radius(idx: BasisIndex, b: f64) -> f64 {
    let (lo, _) = idx.turning_points();
    let xi = (lo - truncation_pad(idx.centre())).max(0.0);
    (2.0 * xi / b).sqrt()
}

struct Window {
    lo: f64,
    hi: f64,
}

fn window(idx: &[BasisIndex], widen: f64) -> Window {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in idx {
        let (a, z) = i.turning_points();
        let pad = widen * quad_pad(i.centre());
        lo = lo.min(a - pad);
        hi = hi.max(z + pad);
    }
    Window { lo: lo.max(0.0), hi }
}

/// Panel breakpoints on `[lo, hi]`, graded geometrically away from a
/// singularity of the weight at `xi = -s`: each panel is no longer than its
/// distance to the singularity.
fn graded_breaks(lo: f64, hi: f64, sing: Option<f64>) -> Vec<f64> {
    let mut breaks = vec![lo];
    if let Some(s) = sing {
        let mut x = lo;
        while hi - x > 2.0 * (x + s) {
            x = 2.0 * x + s;
            breaks.push(x);
        }
    }
    breaks.push(hi);
    breaks
}

/// `int f(xi) psi_1 psi_2 d xi` with mass-certified Gauss-Legendre.
///
/// `sing` is the distance below `xi = 0` of the nearest singularity of `f`;
/// `split` restricts the value (not the mass check) to `xi < split`.
fn certified_integral(
    f: impl Fn(f64) -> f64,
    i1: BasisIndex,
    i2: BasisIndex,
    base: usize,
    sing: Option<f64>,
    split: Option<f64>,
    context: impl Fn() -> String,
) -> Result<f64> {
    let l1 = i1.laguerre();
    let same = i1 == i2;
    let l2 = if same { None } else { Some(i2.laguerre()) };
    // Single-panel Gauss-Legendre resolves psi_n^2 with about 24 + 3n nodes.
    let mut order = base + 24 + (3 * (i1.degree() + i2.degree()) as usize).div_ceil(2);
    let mut widen = 1.0;
    let mut worst = f64::INFINITY;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    for _ in 0..4 {
        let w = window(&[i1, i2], widen);
        let mut breaks = graded_breaks(w.lo, w.hi, sing);
        if let Some(s) = split {
            if s > w.lo && s < w.hi && !breaks.contains(&s) {
                breaks.push(s);
                breaks.sort_by(f64::total_cmp);
            }
        }
        let rule = legendre_rule(order);
        xs.clear();
        ws.clear();
        let mut counted = Vec::new();
        for p in breaks.windows(2) {
            let keep = split.is_none_or(|s| p[1] <= s);
            for (x, wt) in rule.mapped(p[0], p[1]) {
                xs.push(x);
                ws.push(wt);
                counted.push(keep);
            }
        }
        p1.resize(xs.len(), 0.0);
        l1.eval_many(&xs, &mut p1);
        if let Some(l) = &l2 {
            p2.resize(xs.len(), 0.0);
            l.eval_many(&xs, &mut p2);
        }
        let q2 = if same { &p1 } else { &p2 };
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut value = 0.0;
        for i in 0..xs.len() {
            let (a, c) = (p1[i], q2[i]);
            m1 += ws[i] * a * a;
            m2 += ws[i] * c * c;
            if counted[i] {
                value += ws[i] * f(xs[i]) * a * c;
            }
        }
        let err = (m1 - 1.0).abs().max((m2 - 1.0).abs());
        if err < MASS_TOL {
            return Ok(value);
        }
        worst = worst.min(err);
        order *= 2;
        widen *= 1.5;
    }
    Err(Error::numerical(context(), worst))
}

/// `<V phi_{k',q}, phi_{k,q}>` using the angular modes of the model.
pub fn matrix_element(model: &PotentialModel, b: f64, q: u32, k: i64, kp: i64, quad_order_base: usize) -> Result<f64> {
    let i1 = BasisIndex::new(q, k)?;
    let i2 = BasisIndex::new(q, kp)?;
    if !model.angular_modes().contains(&(k - kp)) {
        return Ok(0.0);
    }
    entry(
        &model.mode_profile(k - kp),
        singularity(model, b),
        b,
        i1,
        i2,
        quad_order_base,
    )
}

/// Distance below `xi = 0` of the nearest complex singularity of the radial
/// profiles as functions of `xi`: `(1 + 2 xi / B)^{-s}` is singular at `-B/2`.
fn singularity(model: &PotentialModel, b: f64) -> Option<f64> {
    match model.kind {
        PotentialKind::CompactGaussianBump => None,
        _ => Some(0.5 * b),
    }
}

fn entry(
    profile: &AngularModeProfile,
    sing: Option<f64>,
    b: f64,
    i1: BasisIndex,
    i2: BasisIndex,
    base: usize,
) -> Result<f64> {
    let f = |xi: f64| profile.eval((2.0 * xi / b).sqrt());
    certified_integral(f, i1, i2, base, sing, None, || {
        format!("matrix element (k={}, k'={}) at q={}", i1.k, i2.k, i1.q)
    })
}

/// `<1_{|x|<R} phi_{k,q}, phi_{k,q}> = int_0^R R_{k,q}^2 r dr`, with the
/// quadrature split at the kink `r = R`.
pub fn indicator_element(idx: BasisIndex, b: f64, radius: f64, quad_order_base: usize) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::Domain(format!("radius {radius} must be nonnegative")));
    }
    let split = 0.5 * b * radius * radius;
    certified_integral(
        |_| 1.0,
        idx,
        idx,
        quad_order_base,
        None,
        Some(split),
        || format!("indicator element (k={}, R={radius}) at q={}", idx.k, idx.q),
    )
}

/// Closed-form Gershgorin-type bound on the absolute row sum of row `k`:
/// the mode envelopes beyond the inner truncation radius of `phi_{k,q}`.
fn row_bound(model: &PotentialModel, b: f64, q: u32, k: i64) -> f64 {
    let idx = BasisIndex { q, k };
    let r0 = inner_radius(idx, b);
    model.angular_modes().iter().map(|&j| model.mode_envelope(j, r0)).sum()
}

/// Absolute row sum of row `k` of the infinite matrix, by quadrature.
fn direct_row_sum(model: &PotentialModel, b: f64, q: u32, k: i64, base: usize) -> Result<f64> {
    let sing = singularity(model, b);
    let mut sum = 0.0;
    for j in model.angular_modes() {
        let kp = k - j;
        if kp >= -(q as i64) {
            sum += entry(
                &model.mode_profile(j),
                sing,
                b,
                BasisIndex { q, k },
                BasisIndex { q, k: kp },
                base,
            )?
            .abs();
        }
    }
    Ok(sum)
}

fn floor(model: &PotentialModel) -> f64 {
    model.sup_abs() * TAIL_FLOOR
}

/// Last row whose closed-form bound reaches `level`. The bound is
/// non-increasing once `k >= 0`, so the scan stops at the first such row below it.
fn envelope_cutoff(model: &PotentialModel, b: f64, q: u32, level: f64, cap: i64) -> Result<i64> {
    let mut last_fail = -(q as i64) - 1;
    let mut k = -(q as i64);
    loop {
        if row_bound(model, b, q, k) >= level {
            last_fail = k;
        } else if k >= 0 {
            return Ok(last_fail);
        }
        if k >= cap {
            return Err(Error::Capacity(format!(
                "truncation needs K_max > {cap} at q={q}; use a larger delta"
            )));
        }
        k += 1;
    }
}

fn envelope_tail(model: &PotentialModel, b: f64, q: u32, from: i64) -> f64 {
    let mut worst = row_bound(model, b, q, from.max(0));
    for k in from..0 {
        worst = worst.max(row_bound(model, b, q, k));
    }
    worst
}

const SCAN_CHUNK: i64 = 256;

/// A truncation index with the bound on every discarded row sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub k_max: i64,
    pub tail_bound: f64,
}

/// Smallest `K >= -q` such that every row `k > K` has absolute row sum below
/// `threshold`, or below the floor `sup|V| * TAIL_FLOOR` if that is larger.
///
/// Rows far out are cleared by the closed-form envelope bound; rows between
/// the true crossing and the envelope crossing are cleared by evaluating
/// their entries directly.
pub fn truncate(model: &PotentialModel, b: f64, q: u32, threshold: f64, cap: i64, base: usize) -> Result<Truncation> {
    let level = threshold.max(floor(model));
    let k_min = -(q as i64);
    let k_env = envelope_cutoff(model, b, q, level, cap)?;
    let mut direct_max = 0.0f64;
    let mut hi = k_env;
    let mut k_max = k_min;
    'scan: while hi >= k_min {
        let lo = (hi - SCAN_CHUNK + 1).max(k_min);
        let sums = (lo..=hi)
            .into_par_iter()
            .map(|k| direct_row_sum(model, b, q, k, base))
            .collect::<Result<Vec<_>>>()?;
        for (k, s) in (lo..=hi).rev().zip(sums.into_iter().rev()) {
            if s >= level {
                k_max = k;
                break 'scan;
            }
            direct_max = direct_max.max(s);
        }
        hi = lo - 1;
    }
    let tail = direct_max.max(envelope_tail(model, b, q, k_env + 1)) + floor(model);
    Ok(Truncation {
        k_max,
        tail_bound: tail,
    })
}

/// [`truncate`] with the default cap and quadrature order.
pub fn truncation_for_threshold(model: &PotentialModel, b: f64, q: u32, threshold: f64, cap: i64) -> Result<i64> {
    Ok(truncate(model, b, q, threshold, cap, default_quad_order_base())?.k_max)
}

/// Truncation index for a test function whose scaled support stays above
/// `delta` in magnitude: rows beyond `K_max` satisfy
/// `lambda_q^{rho/2} * row sum < delta`.
pub fn truncation_bound(model: &PotentialModel, b: f64, q: u32, delta: f64) -> Result<i64> {
    Ok(truncation_for_delta(model, b, q, delta, default_quad_order_base())?.k_max)
}

pub fn truncation_for_delta(model: &PotentialModel, b: f64, q: u32, delta: f64, base: usize) -> Result<Truncation> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta = {delta} must be positive")));
    }
    let scale = landau_level(b, q).powf(0.5 * model.rho);
    truncate(model, b, q, delta / scale, DEFAULT_K_CAP, base)
}

/// Bound on the absolute row sum of every discarded row `k > k_max`.
///
/// Rows are evaluated directly until the closed-form envelope drops below
/// the largest row sum seen.
pub fn tail_bound(model: &PotentialModel, b: f64, q: u32, k_max: i64, base: usize) -> Result<f64> {
    let mut direct_max = 0.0f64;
    let mut lo = k_max + 1;
    loop {
        let hi = lo + SCAN_CHUNK - 1;
        let sums = (lo..=hi)
            .into_par_iter()
            .map(|k| direct_row_sum(model, b, q, k, base))
            .collect::<Result<Vec<_>>>()?;
        for (k, s) in (lo..=hi).zip(sums) {
            direct_max = direct_max.max(s);
            if k >= 0 && row_bound(model, b, q, k + 1) <= direct_max.max(floor(model)) {
                return Ok(direct_max.max(row_bound(model, b, q, k + 1)) + floor(model));
            }
        }
        if hi >= DEFAULT_K_CAP {
            return Err(Error::Capacity(format!("tail bound scan passed k = {hi} at q={q}")));
        }
        lo = hi + 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockEntries {
    /// Diagonal of a radial model indexed by `k - k_min`.
    Diagonal(Vec<f64>),
    /// Row-major dense symmetric matrix.
    Dense { dim: usize, data: Vec<f64> },
}

/// Finite section of `P_q V P_q` in the angular-momentum basis,
/// indexed by `k in -q..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzBlock {
    pub q: u32,
    pub b: f64,
    pub k_max: i64,
    pub entries: BlockEntries,
    pub bandwidth: usize,
    pub truncation_tail_bound: f64,
}

/// JSON summary of a [`ToeplitzBlock`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub q: u32,
    #[serde(rename = "B")]
    pub b: f64,
    pub k_max: i64,
    pub dimension: usize,
    pub bandwidth: usize,
    pub min_diagonal: f64,
    pub max_diagonal: f64,
    pub truncation_tail_bound: f64,
}

impl ToeplitzBlock {
    pub fn k_min(&self) -> i64 {
        -(self.q as i64)
    }

    pub fn dimension(&self) -> usize {
        (self.k_max - self.k_min() + 1) as usize
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.entries, BlockEntries::Diagonal(_))
    }

    /// Entry at angular indices `(k, k')`.
    pub fn entry(&self, k: i64, kp: i64) -> f64 {
        let (i, j) = ((k - self.k_min()) as usize, (kp - self.k_min()) as usize);
        match &self.entries {
            BlockEntries::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            BlockEntries::Dense { dim, data } => data[i * dim + j],
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.entries {
            BlockEntries::Diagonal(d) => d.clone(),
            BlockEntries::Dense { dim, data } => (0..*dim).map(|i| data[i * dim + i]).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn max_abs_entry(&self) -> f64 {
        match &self.entries {
            BlockEntries::Diagonal(d) => d.iter().fold(0.0, |m, v| m.max(v.abs())),
            BlockEntries::Dense { data, .. } => data.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Row-major dense copy; fails above [`DENSE_CAP`].
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        match &self.entries {
            BlockEntries::Dense { data, .. } => Ok(data.clone()),
            BlockEntries::Diagonal(d) => {
                let n = d.len();
                if n > DENSE_CAP {
                    return Err(Error::Capacity(format!("dimension {n} exceeds dense cap {DENSE_CAP}")));
                }
                let mut out = vec![0.0; n * n];
                for (i, v) in d.iter().enumerate() {
                    out[i * n + i] = *v;
                }
                Ok(out)
            }
        }
    }

    pub fn summary(&self) -> BlockSummary {
        let d = self.diagonal();
        BlockSummary {
            q: self.q,
            b: self.b,
            k_max: self.k_max,
            dimension: self.dimension(),
            bandwidth: self.bandwidth,
            min_diagonal: d.iter().cloned().fold(f64::INFINITY, f64::min),
            max_diagonal: d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            truncation_tail_bound: self.truncation_tail_bound,
        }
    }

    /// CSV with header `k,k_prime,value`: the diagonal and upper band
    /// (`k <= k'`), including structural zeros inside the band.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "k,k_prime,value")?;
        let (lo, hi) = (self.k_min(), self.k_max);
        for k in lo..=hi {
            for kp in k..=(k + self.bandwidth as i64).min(hi) {
                writeln!(w, "{k},{kp},{}", crate::report::fmt_f64(self.entry(k, kp)))?;
            }
        }
        Ok(())
    }
}

/// Assemble the finite section of `P_q V P_q` for `k, k' in -q..=K_max`.
///
/// Radial models produce a diagonal block of any size; others are stored
/// dense up to [`DENSE_CAP`].
pub fn toeplitz_matrix(model: &PotentialModel, cfg: &LandauConfig) -> Result<ToeplitzBlock> {
    cfg.validate()?;
    model.validate()?;
    let tail = tail_bound(model, cfg.b, cfg.q, cfg.k_max, cfg.quad_order_base)?;
    assemble(model, cfg, tail)
}

/// Block truncated by [`truncation_for_delta`].
pub fn truncated_block(
    model: &PotentialModel,
    b: f64,
    q: u32,
    delta: f64,
    quad_order_base: usize,
) -> Result<ToeplitzBlock> {
    model.validate()?;
    let t = truncation_for_delta(model, b, q, delta, quad_order_base)?;
    let cfg = LandauConfig {
        b,
        q,
        k_max: t.k_max,
        quad_order_base,
    };
    cfg.validate()?;
    assemble(model, &cfg, t.tail_bound)
}

fn assemble(model: &PotentialModel, cfg: &LandauConfig, tail: f64) -> Result<ToeplitzBlock> {
    let q = cfg.q;
    let dim = cfg.dimension();
    let k_min = -(q as i64);
    let base = cfg.quad_order_base;
    let sing = singularity(model, cfg.b);
    let modes = model.angular_modes();
    let bandwidth = modes.iter().map(|j| j.unsigned_abs() as usize).max().unwrap_or(0);
    let profile0 = model.mode_profile(0);
    let diag_entry = |k: i64| entry(&profile0, sing, cfg.b, BasisIndex { q, k }, BasisIndex { q, k }, base);
    let entries = if bandwidth == 0 {
        let d = (k_min..=cfg.k_max)
            .into_par_iter()
            .map(diag_entry)
            .collect::<Result<Vec<_>>>()?;
        BlockEntries::Diagonal(d)
    } else {
        if dim > DENSE_CAP {
            return Err(Error::Capacity(format!(
                "dense block of dimension {dim} exceeds cap {DENSE_CAP} at q={q}"
            )));
        }
        let upper: Vec<usize> = modes.iter().filter(|&&j| j > 0).map(|&j| j as usize).collect();
        let rows = (0..dim)
            .into_par_iter()
            .map(|i| {
                let k = k_min + i as i64;
                let mut row = vec![(i, diag_entry(k)?)];
                for &j in &upper {
                    if i + j < dim {
                        let kp = k + j as i64;
                        let profile = model.mode_profile(-(j as i64));
                        let v = entry(
                            &profile,
                            sing,
                            cfg.b,
                            BasisIndex { q, k },
                            BasisIndex { q, k: kp },
                            base,
                        )?;
                        row.push((i + j, v));
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = vec![0.0; dim * dim];
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row {
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        BlockEntries::Dense { dim, data }
    };
    Ok(ToeplitzBlock {
        q,
        b: cfg.b,
        k_max: cfg.k_max,
        entries,
        bandwidth,
        truncation_tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{gauss_nodes, QuadratureKind};

    #[test]
    fn levels() {
        assert_eq!(landau_level(1.0, 0), 1.0);
        assert_eq!(landau_level(2.0, 3), 14.0);
        for q in 0..20 {
            assert_eq!(landau_level(1.5, q + 1) - landau_level(1.5, q), 3.0);
        }
    }

    #[test]
    fn ground_state_radial_factor() {
        let i = BasisIndex::new(0, 0).unwrap();
        assert!((radial_basis(i, 1.0, 0.0) - 1.0).abs() < 1e-15);
        for r in [0.3, 1.0, 2.5] {
            let exact = 2f64.sqrt() * (-2.0 * r * r / 4.0f64).exp();
            assert!((radial_basis(i, 2.0, r) - exact).abs() < 1e-14);
        }
        assert!(BasisIndex::new(3, -4).is_err());
    }

    /// `int R^2 r dr = int psi^2 d xi` by Gauss-Laguerre in `xi`: the weight
    /// `e^{-xi}` is divided out and the remaining polynomial is integrated exactly.
    #[test]
    fn normalization_gauss_laguerre_oracle() {
        let rule = gauss_nodes(QuadratureKind::LaguerreHalfline, 160).unwrap();
        for (q, k) in [
            (0u32, 0i64),
            (3, -3),
            (5, 7),
            (10, -2),
            (20, 50),
            (40, 200),
            (40, -40),
            (33, 120),
        ] {
            let idx = BasisIndex::new(q, k).unwrap();
            let b = 1.7;
            // psi^2 e^{xi} is a polynomial of degree 2n + alpha in xi.
            let mass: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| {
                    let r = (2.0 * x / b).sqrt();
                    let rb = radial_basis(idx, b, r);
                    w * rb * rb / b * x.exp()
                })
                .sum();
            assert!((mass - 1.0).abs() < 1e-10, "(q={q}, k={k}): {mass}");
        }
    }

    #[test]
    fn gram_matrix_same_k_across_levels() {
        let b = 1.0;
        for k in [0i64, 3, 25] {
            let idx: Vec<_> = [4u32, 5, 6].iter().map(|&q| BasisIndex::new(q, k).unwrap()).collect();
            for a in &idx {
                for c in &idx {
                    // radial overlap in xi with a fixed fine rule
                    let rule = legendre_rule(200);
                    let (la, lc) = (a.laguerre(), c.laguerre());
                    let g: f64 = (0..20)
                        .map(|p| rule.integrate_on(8.0 * p as f64, 8.0 * (p + 1) as f64, |x| la.eval(x) * lc.eval(x)))
                        .sum();
                    let want = if a == c { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-8, "{a:?} {c:?}: {g}");
                }
            }
        }
        let _ = b;
    }

    #[test]
    fn radial_probability_peaks_at_cyclotron_radius() {
        for q in [10u32, 40] {
            let idx = BasisIndex::new(q, -(q as i64)).unwrap();
            let b = 1.0;
            let target = ((2.0 * q as f64 + 1.0) / b).sqrt();
            let (best, _) = (1..40000)
                .map(|i| {
                    let r = i as f64 * 5e-4 * target;
                    (r, r * radial_basis(idx, b, r).powi(2))
                })
                .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
            assert!((best / target - 1.0).abs() < 0.05, "q={q}: {best} vs {target}");
        }
    }

    #[test]
    fn residual_certifies_convention() {
        let r = eigen_residual_check(BasisIndex::new(0, 0).unwrap(), 1.0).unwrap();
        assert!(r < 1e-6, "{r}");
        let r = eigen_residual_check(BasisIndex::new(2, -1).unwrap(), 1.0).unwrap();
        assert!(r < 1e-5, "{r}");
        for (q, k, b) in [(3u32, 2i64, 1.0), (5, -4, 0.5), (1, 6, 3.0)] {
            let idx = BasisIndex::new(q, k).unwrap();
            assert!(eigen_residual_check(idx, b).is_ok());
            let flipped = eigen_residual(idx, b, AngularSign::Flipped);
            assert!(flipped > 0.1, "({q},{k}): {flipped}");
        }
        let flipped = eigen_residual(BasisIndex::new(2, -1).unwrap(), 1.0, AngularSign::Flipped);
        assert!(flipped > 0.1);
    }

    #[test]
    fn radial_blocks_are_diagonal() {
        let m = PotentialModel::isotropic(0.5);
        let blk = toeplitz_matrix(&m, &LandauConfig::new(1.0, 3, 10)).unwrap();
        assert!(blk.is_diagonal());
        assert_eq!(blk.bandwidth, 0);
        assert_eq!(blk.dimension(), 14);
        assert_eq!(blk.entry(2, 4), 0.0);
        // Direct element agrees with the assembled diagonal.
        let d = matrix_element(&m, 1.0, 3, 5, 5, 32).unwrap();
        assert!((d - blk.entry(5, 5)).abs() < 1e-15);
        assert_eq!(matrix_element(&m, 1.0, 3, 5, 6, 32).unwrap(), 0.0);
    }

    #[test]
    fn anisotropic_band_structure() {
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        let blk = toeplitz_matrix(&m, &LandauConfig::new(1.0, 4, 12)).unwrap();
        assert_eq!(blk.bandwidth, 2);
        let n = blk.dimension() as i64;
        for k in -4..=12 {
            for kp in -4..=12 {
                let v = blk.entry(k, kp);
                assert_eq!(v, blk.entry(kp, k));
                if (k - kp).abs() != 0 && (k - kp).abs() != 2 {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(blk.entry(0, 2).abs() > 1e-4);
        assert_eq!(n, 17);
    }

    #[test]
    fn matrix_element_dual_quadrature() {
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        let (b, q) = (1.3, 6u32);
        for (k, kp) in [(0i64, 2i64), (-6, -4), (10, 8), (3, 3)] {
            let v = matrix_element(&m, b, q, k, kp, 32).unwrap();
            let p = m.mode_profile(k - kp);
            let i1 = BasisIndex::new(q, k).unwrap();
            let i2 = BasisIndex::new(q, kp).unwrap();
            // r-space integral by adaptive Gauss-Kronrod
            let f = |r: f64| p.eval(r) * radial_basis(i1, b, r) * radial_basis(i2, b, r) * r;
            let w = crate::specfun::integrate_adaptive(f, 0.0, 30.0, crate::specfun::Tolerance::new(1e-15, 1e-13))
                .unwrap()
                .value;
            assert!((v - w).abs() < 1e-12, "({k},{kp}): {v} {w}");
        }
    }

    #[test]
    fn gaussian_trace_identity() {
        let m = PotentialModel::gaussian_bump(1.0, 1.0, 0.5);
        for q in [0u32, 1, 2, 4] {
            let k = truncation_for_threshold(&m, 1.0, q, 1e-14, DEFAULT_K_CAP).unwrap();
            let blk = toeplitz_matrix(&m, &LandauConfig::new(1.0, q, k)).unwrap();
            assert!((blk.trace() - 1.0).abs() < 1e-6, "q={q}: {}", blk.trace());
        }
        // A B w^2 scaling
        let m = PotentialModel::gaussian_bump(0.7, 1.4, 0.5);
        let k = truncation_for_threshold(&m, 2.0, 1, 1e-14, DEFAULT_K_CAP).unwrap();
        let blk = toeplitz_matrix(&m, &LandauConfig::new(2.0, 1, k)).unwrap();
        assert!((blk.trace() - 0.7 * 2.0 * 1.96).abs() < 1e-6);
    }

    #[test]
    fn gaussian_truncation_is_small_and_saturates() {
        let m = PotentialModel::gaussian_bump(1.0, 1.0, 0.5);
        let k1 = truncation_bound(&m, 1.0, 4, 1e-3).unwrap();
        let k2 = truncation_bound(&m, 1.0, 4, 1e-12).unwrap();
        let k3 = truncation_bound(&m, 1.0, 4, 1e-15).unwrap();
        assert!(k3 < 60, "{k3}");
        assert!(k1 <= k2 && k2 <= k3);
        assert_eq!(k3, truncation_bound(&m, 1.0, 4, 1e-20).unwrap());
        // direct diagonal scan: entries past K are below the floor of the bound
        for k in k3 + 1..k3 + 20 {
            let d = matrix_element(&m, 1.0, 4, k, k, 32).unwrap();
            assert!(d < 2e-9, "k={k}: {d}");
        }
    }

    #[test]
    fn isotropic_truncation_post_hoc() {
        let m = PotentialModel::isotropic(0.5);
        let q = 16;
        let k = truncation_bound(&m, 1.0, q, 0.25).unwrap();
        let scale = landau_level(1.0, q).powf(-0.25);
        let d = matrix_element(&m, 1.0, q, k + 1, k + 1, 32).unwrap();
        assert!(d < 0.25 * scale, "{d} vs {}", 0.25 * scale);
        let mut prev = i64::MAX;
        for delta in [0.1, 0.2, 0.25, 0.4, 0.8] {
            let kd = truncation_bound(&m, 1.0, q, delta).unwrap();
            assert!(kd <= prev);
            prev = kd;
        }
        assert!(matches!(truncation_bound(&m, 1.0, 128, 1e-3), Err(Error::Capacity(_))));
    }

    #[test]
    fn inner_tail_mass_is_negligible() {
        for (q, k) in [(0u32, 30i64), (8, 100), (32, 1000), (128, 5000), (4, 20000)] {
            let idx = BasisIndex::new(q, k).unwrap();
            let b = 1.0;
            let xi0 = 0.5 * b * inner_radius(idx, b).powi(2);
            if xi0 == 0.0 {
                continue;
            }
            let l = idx.laguerre();
            let mass = crate::specfun::integrate_adaptive(|x| l.eval(x).powi(2), 0.0, xi0, Default::default())
                .unwrap()
                .value;
            assert!(mass < 1e-18, "({q},{k}): {mass}");
        }
    }

    #[test]
    fn envelope_part_monotone_in_k() {
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        for q in [0u32, 8, 48] {
            let mut prev = f64::INFINITY;
            for k in 0..3000 {
                let g = row_bound(&m, 1.0, q, k);
                assert!(g <= prev * (1.0 + 1e-14));
                prev = g;
            }
        }
    }

    #[test]
    fn entries_contract_and_tail_bound_dominates() {
        let m = PotentialModel::anisotropic(0.4, 0.5, 3);
        let blk = toeplitz_matrix(&m, &LandauConfig::new(1.0, 5, 30)).unwrap();
        assert!(blk.max_abs_entry() <= m.sup_abs());
        for k in 31..60 {
            for j in m.angular_modes() {
                if k + j >= -5 {
                    let v = matrix_element(&m, 1.0, 5, k, k + j, 32).unwrap();
                    assert!(v.abs() <= blk.truncation_tail_bound);
                }
            }
        }
    }

    #[test]
    fn indicator_element_cases() {
        let idx = BasisIndex::new(0, 0).unwrap();
        // int_0^R B e^{-B r^2/2} r dr = 1 - e^{-B R^2 / 2}
        for (b, rad) in [(1.0, 1.0), (2.0, 0.7), (1.0, 5.0)] {
            let v = indicator_element(idx, b, rad, 32).unwrap();
            let exact = 1.0 - (-0.5 * b * rad * rad).exp();
            assert!((v - exact).abs() < 1e-13, "{v} {exact}");
        }
        let far = indicator_element(BasisIndex::new(0, 50).unwrap(), 1.0, 1.0, 32).unwrap();
        assert!(far.abs() < 1e-30);
        assert!((indicator_element(idx, 1.0, 100.0, 32).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_exports() {
        let m = PotentialModel::anisotropic(0.5, 0.3, 2);
        let blk = toeplitz_matrix(&m, &LandauConfig::new(1.0, 1, 3)).unwrap();
        let mut buf = Vec::new();
        blk.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,k_prime,value");
        assert!(lines[1].starts_with("-1,-1,"));
        let s = serde_json::to_value(blk.summary()).unwrap();
        assert_eq!(s["dimension"], 5);
        assert_eq!(s["bandwidth"], 2);
    }

    #[test]
    fn config_validation() {
        assert!(LandauConfig::new(1.0, 3, -4).validate().is_err());
        assert!(LandauConfig::new(0.0, 3, 4).validate().is_err());
        assert!(LandauConfig::new(1.0, 3, -3).validate().is_ok());
        assert_eq!(LandauConfig::new(1.0, 3, -3).dimension(), 1);
    }
}
