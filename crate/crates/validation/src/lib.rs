//! Oracles that the acceptance suite checks the main pipeline against.
//! They are computed by routes independent of the code under test.

use lcl_core::specfun::{bessel_j0, integrate_adaptive, integrate_with_breaks, laguerre_weighted, ln_gamma, Tolerance};
use lcl_core::Result;

/// Radial Fourier transform (unitary normalisation) of `<x>^{-rho}`:
/// `F(z) = (1 / 2 Gamma(rho/2)) int_0^inf t^{rho/2 - 2} exp(-t - z^2 / 4t) dt`,
/// singular at `z = 0` for `rho < 2`.
pub fn bracket_fourier(rho: f64, zeta: f64) -> Result<f64> {
    let nu = 0.5 * rho;
    let a = 0.25 * zeta * zeta;
    // t = e^u keeps the integrand smooth near t = 0.
    let h = |u: f64| {
        let t = u.exp();
        t.powf(nu - 1.0) * (-t - a / t).exp()
    };
    let lo = (a.max(1e-300).ln() - 48.0).max(-200.0);
    Ok(integrate_adaptive(h, lo, 6.0, Tolerance::new(1e-300, 1e-11))?.value / (2.0 * ln_gamma(nu).exp()))
}

/// Hilbert-Schmidt distance between the Laguerre-smoothed and circle-averaged
/// symbols of the isotropic model (`B = 1`), evaluated in frequency space
/// where both smoothings act by multiplication.
pub fn hs_distance_fourier(rho: f64, q: u32) -> Result<f64> {
    let k = (2.0 * q as f64 + 1.0).sqrt();
    let f = |zeta: f64| {
        let gap = laguerre_weighted(q, 0.5 * zeta * zeta) - bessel_j0(k * zeta);
        gap * gap * bracket_fourier(rho, zeta).unwrap_or(f64::NAN).powi(2) * zeta
    };
    let breaks: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    Ok(integrate_with_breaks(f, &breaks, Tolerance::new(1e-16, 1e-9))?
        .value
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_transform_closed_form_at_rho_one() {
        // K_{1/2} is elementary: F(z) = exp(-z) / z.
        for z in [0.1, 0.7, 2.0, 6.0] {
            let f = bracket_fourier(1.0, z).unwrap();
            let want = (-z).exp() / z;
            assert!((f - want).abs() < 1e-9 * want, "{z}: {f} {want}");
        }
    }

    #[test]
    fn fourier_transform_decays() {
        let a = bracket_fourier(0.5, 1.0).unwrap();
        let b = bracket_fourier(0.5, 4.0).unwrap();
        assert!(a > b && b > 0.0);
    }
}
