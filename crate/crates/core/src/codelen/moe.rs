//! Mixture of exponentials: the universal model for shifted magnitudes.
//!
//! Mixing an exponential over a Gamma(kappa, beta) prior on its rate gives the
//! density `kappa beta^kappa (u + beta)^-(kappa+1)` on `u >= 0`, whose tail
//! function is `S(u) = (beta / (u + beta))^kappa`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoeParams {
    pub kappa: f64,
    pub beta: f64,
}

impl MoeParams {
    pub fn new(kappa: f64, beta: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "MOE needs kappa, beta > 0 (got {kappa}, {beta})"
            )));
        }
        Ok(Self { kappa, beta })
    }

    pub fn density(&self, u: f64) -> f64 {
        self.kappa * self.beta.powf(self.kappa) * (u + self.beta).powf(-(self.kappa + 1.0))
    }

    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            -(self.kappa * (self.beta / (u + self.beta)).ln()).exp_m1()
        }
    }

    /// `ln S(u)`.
    #[inline]
    pub fn ln_tail(&self, u: f64) -> f64 {
        self.kappa * (self.beta / (u + self.beta)).ln()
    }

    /// `ln (S(lo) - S(lo + width))` for `lo >= 0`, free of cancellation.
    #[inline]
    pub fn ln_interval_mass(&self, lo: f64, width: f64) -> f64 {
        let shrink = -(-self.kappa * (width / (lo + self.beta)).ln_1p()).exp_m1();
        self.ln_tail(lo) + shrink.ln()
    }

    /// Ideal codelength in bits of the bin `[k delta, (k+1) delta)`.
    #[inline]
    pub fn level_bits(&self, level: u32, delta: f64) -> f64 {
        -self.ln_interval_mass(f64::from(level) * delta, delta) / std::f64::consts::LN_2
    }
}

/// Probability of the bin `[u, u + delta)` under the MOE.
pub fn moe_bin_prob(u: f64, params: MoeParams, delta: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!(
            "magnitude must be non-negative, got {u}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "bin width must be positive, got {delta}"
        )));
    }
    Ok(params.ln_interval_mass(u, delta).exp())
}
