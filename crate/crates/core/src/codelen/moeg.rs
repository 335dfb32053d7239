//! MOEG: the universal error model.
//!
//! Mixing the Laplacian rate of an LG variable over a Gamma(kappa, beta) prior
//! yields a symmetric MOE convolved with the Gaussian. The symmetric MOE has
//! the closed-form tail `P(|X| > x) = (beta / (x + beta))^kappa`, so the mass
//! of a residual bin reduces to a one-dimensional Gaussian average of that
//! closed form, computed here by adaptive quadrature and tabulated.

use crate::error::{Error, Result};
use crate::quadrature::integrate_pieces;

use super::moe::MoeParams;

/// Bins with `|index| <= TABLE_RADIUS` are tabulated at construction.
pub const TABLE_RADIUS: usize = 4096;

const GAUSS_SPAN: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct MoegModel {
    kappa: f64,
    beta: f64,
    sigma2: f64,
    delta_e: f64,
    bits: Vec<f64>,
}

impl MoegModel {
    pub fn new(kappa: f64, beta: f64, sigma2: f64, delta_e: f64) -> Result<Self> {
        MoeParams::new(kappa, beta)?;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance must be >= 0, got {sigma2}"
            )));
        }
        if !(delta_e > 0.0 && delta_e.is_finite()) {
            return Err(Error::Domain(format!(
                "error step must be positive, got {delta_e}"
            )));
        }
        let mut model = Self {
            kappa,
            beta,
            sigma2,
            delta_e,
            bits: Vec::new(),
        };
        model.bits = (0..=TABLE_RADIUS as i64)
            .map(|k| -model.bin_mass(k).log2())
            .collect();
        if model.bits.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("MOEG bin mass underflowed".into()));
        }
        Ok(model)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    /// Mass of the symmetric MOE (no noise) on `[lo, hi)`.
    fn moe_mass(&self, lo: f64, hi: f64) -> f64 {
        let moe = MoeParams {
            kappa: self.kappa,
            beta: self.beta,
        };
        if lo >= 0.0 {
            0.5 * moe.ln_interval_mass(lo, hi - lo).exp()
        } else if hi <= 0.0 {
            0.5 * moe.ln_interval_mass(-hi, hi - lo).exp()
        } else {
            1.0 - 0.5 * moe.ln_tail(-lo).exp() - 0.5 * moe.ln_tail(hi).exp()
        }
    }

    /// Probability of the residual bin `[(k - 1/2) delta_e, (k + 1/2) delta_e)`.
    pub fn bin_mass(&self, index: i64) -> f64 {
        let k = index.unsigned_abs() as f64;
        let lo = (k - 0.5) * self.delta_e;
        let hi = (k + 0.5) * self.delta_e;
        if self.sigma2 == 0.0 {
            return self.moe_mass(lo, hi);
        }
        let sigma = self.sigma2.sqrt();
        let span = GAUSS_SPAN * sigma;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.sigma2).sqrt();
        // the integrand has kinks where either bin edge crosses zero
        let mut breaks = vec![-span];
        breaks.extend([lo, hi].into_iter().filter(|b| b.abs() < span));
        breaks.push(span);
        integrate_pieces(
            |s| norm * (-s * s / (2.0 * self.sigma2)).exp() * self.moe_mass(lo - s, hi - s),
            &breaks,
            0.0,
            1e-12,
        )
    }

    /// Ideal codelength in bits of residual bin `index`.
    #[inline]
    pub fn bin_bits(&self, index: i64) -> f64 {
        match self.bits.get(index.unsigned_abs() as usize) {
            Some(&b) => b,
            None => -self.bin_mass(index).log2(),
        }
    }
}

/// Codelength of a residual value `e` on the `delta_e` grid.
pub fn moeg_bin_codelength(e: f64, model: &MoegModel) -> f64 {
    model.bin_bits((e / model.delta_e).round() as i64)
}
