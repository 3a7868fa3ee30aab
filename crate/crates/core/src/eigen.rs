//! Dense real-symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form, then implicit QL iteration with
//! Wilkinson shifts. Eigenvectors are not accumulated. A few eigenpairs are
//! recovered afterwards by inverse iteration on the tridiagonal matrix and
//! back-transformed through the stored reflectors to certify a residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau::{BlockEntries, ToeplitzBlock, DENSE_CAP};

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// QL sweeps allowed per eigenvalue.
pub const MAX_SWEEPS: usize = 50;
const RESIDUAL_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `max ||A v - lambda v|| / ||A||` over the sampled eigenpairs.
    pub residual_bound: f64,
    pub dimension: usize,
}

/// Eigenvalues of the row-major symmetric `n x n` matrix `a`.
pub fn sym_eig(a: &[f64], n: usize) -> Result<EigenSpectrum> {
    if n == 0 || a.len() != n * n {
        return Err(Error::Domain(format!(
            "expected a square matrix of {n}x{n}, got {} entries",
            a.len()
        )));
    }
    if n > DENSE_CAP {
        return Err(Error::Capacity(format!("dimension {n} exceeds dense cap {DENSE_CAP}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let max_abs = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    if asym > SYMMETRY_TOL * max_abs {
        return Err(Error::Contract(format!(
            "matrix asymmetry {asym:e} exceeds {SYMMETRY_TOL:e} relative to max entry {max_abs:e}"
        )));
    }
    let mut work = a.to_vec();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (work[i * n + j] + work[j * n + i]);
            work[i * n + j] = m;
            work[j * n + i] = m;
        }
    }
    let tri = tridiagonalize(&mut work, n);
    let mut values = tri.d.clone();
    let mut off = tri.e.clone();
    ql_implicit(&mut values, &mut off)?;
    values.sort_by(f64::total_cmp);

    check_invariants(a, n, &values, max_abs)?;

    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual_bound = if norm == 0.0 {
        0.0
    } else {
        sample_indices(n)
            .into_iter()
            .map(|i| {
                let v = tri.back_transform(&work, inverse_iteration(&tri.d, &tri.e, values[i], norm));
                residual(a, n, &v, values[i]) / norm
            })
            .fold(0.0, f64::max)
    };
    Ok(EigenSpectrum {
        values,
        residual_bound,
        dimension: n,
    })
}

/// Spectrum of a block: the sorted diagonal for radial blocks, [`sym_eig`] otherwise.
pub fn block_spectrum(block: &ToeplitzBlock) -> Result<EigenSpectrum> {
    match &block.entries {
        BlockEntries::Diagonal(d) => {
            let mut values = d.clone();
            values.sort_by(f64::total_cmp);
            Ok(EigenSpectrum {
                values,
                residual_bound: 0.0,
                dimension: d.len(),
            })
        }
        BlockEntries::Dense { dim, data } => sym_eig(data, *dim),
    }
}

fn check_invariants(a: &[f64], n: usize, values: &[f64], max_abs: f64) -> Result<()> {
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let frob2: f64 = a.iter().map(|v| v * v).sum();
    let sum: f64 = values.iter().sum();
    let sum2: f64 = values.iter().map(|v| v * v).sum();
    let tol = 1e-9 * n as f64 * max_abs;
    if (sum - trace).abs() > tol {
        return Err(Error::numerical("eigenvalue sum vs trace", (sum - trace).abs()));
    }
    if (sum2 - frob2).abs() > tol * max_abs {
        return Err(Error::numerical(
            "eigenvalue squares vs Frobenius norm",
            (sum2 - frob2).abs(),
        ));
    }
    Ok(())
}

fn sample_indices(n: usize) -> Vec<usize> {
    let s = RESIDUAL_SAMPLES.min(n);
    let mut idx: Vec<usize> = (0..s).map(|i| if s == 1 { 0 } else { i * (n - 1) / (s - 1) }).collect();
    idx.dedup();
    idx
}

struct Tridiagonal {
    n: usize,
    d: Vec<f64>,
    e: Vec<f64>,
    /// `beta` of the reflector `I - beta v v^T` for column `k`; the vector is
    /// stored in the lower part of column `k` of the work matrix.
    beta: Vec<f64>,
}

/// Householder reduction `Q^T A Q = T`. On return the work matrix holds the
/// reflector vectors below the subdiagonal of each column.
fn tridiagonalize(a: &mut [f64], n: usize) -> Tridiagonal {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut beta = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        // x = A[k+1.., k]
        let mut sigma = 0.0;
        for i in 0..m {
            let x = a[(k + 1 + i) * n + k];
            v[i] = x;
            sigma += x * x;
        }
        let alpha = if sigma == 0.0 {
            0.0
        } else {
            let norm = sigma.sqrt();
            if v[0] > 0.0 {
                -norm
            } else {
                norm
            }
        };
        let bet = if sigma == 0.0 {
            0.0
        } else {
            v[0] -= alpha;
            let vv: f64 = v[..m].iter().map(|x| x * x).sum();
            2.0 / vv
        };
        e[k] = if bet == 0.0 { a[(k + 1) * n + k] } else { alpha };
        beta[k] = bet;
        if bet != 0.0 {
            // p = beta * A22 v
            for i in 0..m {
                let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                let mut s = 0.0;
                for (x, y) in row.iter().zip(&v[..m]) {
                    s += x * y;
                }
                p[i] = bet * s;
            }
            // w = p - (beta/2)(p^T v) v
            let pv: f64 = p[..m].iter().zip(&v[..m]).map(|(x, y)| x * y).sum();
            let c = 0.5 * bet * pv;
            for i in 0..m {
                p[i] -= c * v[i];
            }
            for i in 0..m {
                let (vi, wi) = (v[i], p[i]);
                let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
                for j in 0..m {
                    row[j] -= vi * p[j] + wi * v[j];
                }
            }
        }
        for i in 0..m {
            a[(k + 1 + i) * n + k] = v[i];
        }
        d[k] = a[k * n + k];
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    d[n - 1] = a[(n - 1) * n + n - 1];
    Tridiagonal { n, d, e, beta }
}

impl Tridiagonal {
    /// `Q y` with `Q = H_0 H_1 ... H_{n-3}`.
    fn back_transform(&self, a: &[f64], mut y: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        for k in (0..n.saturating_sub(2)).rev() {
            let bet = self.beta[k];
            if bet == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in k + 1..n {
                s += a[i * n + k] * y[i];
            }
            let s = bet * s;
            for i in k + 1..n {
                y[i] -= s * a[i * n + k];
            }
        }
        y
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e`, in place in `d`.
fn ql_implicit(d: &mut [f64], e_in: &mut [f64]) -> Result<()> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in[..n - 1]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::numerical(
                    format!("QL iteration for eigenvalue index {l}"),
                    e[l].abs(),
                ));
            }
            // Wilkinson shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvector of the tridiagonal matrix for the computed eigenvalue
/// `lambda` by two steps of inverse iteration with partial pivoting.
fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64, norm: f64) -> Vec<f64> {
    let n = d.len();
    let shift = lambda + 4.0 * f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    // Deterministic start with all components active.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
        .collect();
    for _ in 0..3 {
        x = solve_tridiagonal(d, e, shift, &x, norm);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || !nx.is_finite() {
            break;
        }
        for v in &mut x {
            *v /= nx;
        }
    }
    x
}

/// Solve `(T - sigma I) x = b` by Gaussian elimination with partial
/// pivoting (row interchanges create one extra superdiagonal).
fn solve_tridiagonal(d: &[f64], e: &[f64], sigma: f64, b: &[f64], norm: f64) -> Vec<f64> {
    let n = d.len();
    let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    let guard = |p: f64| if p.abs() < tiny { tiny.copysign(p) } else { p };
    let mut dd: Vec<f64> = d.iter().map(|v| v - sigma).collect();
    let mut du: Vec<f64> = e.to_vec();
    let mut du2 = vec![0.0; n];
    let mut rhs = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        let dl = e[i];
        if dd[i].abs() >= dl.abs() {
            let f = dl / guard(dd[i]);
            dd[i + 1] -= f * du[i];
            rhs[i + 1] -= f * rhs[i];
        } else {
            let f = dd[i] / dl;
            dd[i] = dl;
            let old = dd[i + 1];
            dd[i + 1] = du[i] - f * old;
            du[i] = old;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            let r = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = r - f * rhs[i];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / guard(dd[i]);
    }
    x
}

fn residual(a: &[f64], n: usize, v: &[f64], lambda: f64) -> f64 {
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r2 = 0.0;
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let av: f64 = row.iter().zip(v).map(|(x, y)| x * y).sum();
        let r = av - lambda * v[i];
        r2 += r * r;
    }
    r2.sqrt() / nv
}

/// Cyclic Jacobi eigen-decomposition: ascending values and the matching unit
/// eigenvectors as columns of a row-major matrix. Slow; used as an oracle.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 * m.iter().map(|x| x * x).sum::<f64>().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (c, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + c] = v[k * n + i];
        }
    }
    (values, vecs)
}
