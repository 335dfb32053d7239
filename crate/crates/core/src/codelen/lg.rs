//! Laplacian convolved with a Gaussian.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgParams {
    /// Laplacian rate.
    pub theta: f64,
    /// Gaussian variance.
    pub sigma2: f64,
}

impl LgParams {
    pub fn new(theta: f64, sigma2: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite() && sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "LG needs theta > 0, sigma2 >= 0 (got {theta}, {sigma2})"
            )));
        }
        Ok(Self { theta, sigma2 })
    }
}

/// `ln(exp(z^2) erfc(z))` for `z >= 0`.
fn ln_erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 20.0 {
        erfc(z).ln() + z * z
    } else {
        // asymptotic expansion, truncation error below 1e-12 at z = 20
        let w = 1.0 / (2.0 * z * z);
        let series = 1.0 - w + 3.0 * w * w - 15.0 * w * w * w + 105.0 * w.powi(4);
        -(z * std::f64::consts::PI.sqrt()).ln() + series.ln()
    }
}

/// Log of one of the two half-line terms `exp(theta^2 s2 / 2 - theta x) erfc(z)`.
fn ln_half_term(x: f64, theta: f64, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let z = (theta * sigma2 - x) / (sigma * std::f64::consts::SQRT_2);
    if z >= 0.0 {
        -x * x / (2.0 * sigma2) + ln_erfcx(z)
    } else {
        0.5 * theta * theta * sigma2 - theta * x + erfc(z).ln()
    }
}

/// Log-density of a Laplacian(theta) variable plus independent N(0, sigma2) noise.
pub fn lg_log_density(x: f64, params: LgParams) -> f64 {
    let LgParams { theta, sigma2 } = params;
    if sigma2 == 0.0 {
        return (theta / 2.0).ln() - theta * x.abs();
    }
    let a = ln_half_term(x, theta, sigma2);
    let b = ln_half_term(-x, theta, sigma2);
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    (theta / 4.0).ln() + hi + (lo - hi).exp().ln_1p()
}
