//! Probability models and their ideal Shannon codelengths.
//!
//! A patch `y` coded as `y = D a + e` costs
//! `L(e) + L(z) + L(s | z) + L(v | z)` bits: the quantized residual under the
//! MOEG model, the support (enumerative or Markov), one bit per sign, and the
//! shifted magnitudes under the MOE model. The dictionary costs `m p log2 n`
//! bits on top, independent of its values.

pub mod lg;
pub mod markov;
pub mod moe;
pub mod moeg;
pub mod support;

pub use lg::{lg_log_density, LgParams};
pub use markov::{markov_fit, markov_support_codelength, MarkovSupportModel};
pub use moe::{moe_bin_prob, MoeParams};
pub use moeg::{moeg_bin_codelength, MoegModel};
pub use support::{sign_codelength, support_codelength_enumerative, EnumerativeTable};

use crate::code::SparseCode;
use crate::error::{Error, Result};
use crate::quant::QuantizationGrid;

/// Variance of uniform quantization noise for unit-step 8-bit data.
pub const QUANTIZATION_NOISE_VAR: f64 = 1.0 / 12.0;
pub const DEFAULT_KAPPA: f64 = 3.0;
pub const DEFAULT_DELTA_A: f64 = 0.5;

/// Every scalar that parameterizes a [`CodelengthModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub delta_a: f64,
    pub delta_e: f64,
    pub sigma2: f64,
    pub kappa_nu: f64,
    pub beta_nu: f64,
    pub kappa_eps: f64,
    pub beta_eps: f64,
}

impl Hyperparams {
    /// `kappa = 3`, `beta = delta_a` for both mixtures and unit error step.
    pub fn with_defaults(delta_a: f64, sigma2: f64) -> Self {
        Self {
            delta_a,
            delta_e: 1.0,
            sigma2,
            kappa_nu: DEFAULT_KAPPA,
            beta_nu: delta_a,
            kappa_eps: DEFAULT_KAPPA,
            beta_eps: delta_a,
        }
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::with_defaults(DEFAULT_DELTA_A, QUANTIZATION_NOISE_VAR)
    }
}

/// Codelength functions for residuals and coefficient magnitudes.
#[derive(Debug, Clone)]
pub struct CodelengthModel {
    hyper: Hyperparams,
    moe: MoeParams,
    moeg: MoegModel,
    delta_a: QuantizationGrid,
    delta_e: QuantizationGrid,
}

impl CodelengthModel {
    pub fn new(hyper: Hyperparams) -> Result<Self> {
        Ok(Self {
            moe: MoeParams::new(hyper.kappa_nu, hyper.beta_nu)?,
            moeg: MoegModel::new(hyper.kappa_eps, hyper.beta_eps, hyper.sigma2, hyper.delta_e)?,
            delta_a: QuantizationGrid::new(hyper.delta_a)?,
            delta_e: QuantizationGrid::new(hyper.delta_e)?,
            hyper,
        })
    }

    /// Defaults with the given coefficient step and noise variance.
    pub fn with_noise(delta_a: f64, sigma2: f64) -> Result<Self> {
        Self::new(Hyperparams::with_defaults(delta_a, sigma2))
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn moe(&self) -> MoeParams {
        self.moe
    }

    pub fn moeg(&self) -> &MoegModel {
        &self.moeg
    }

    pub fn delta_a(&self) -> QuantizationGrid {
        self.delta_a
    }

    pub fn delta_e(&self) -> QuantizationGrid {
        self.delta_e
    }

    /// Bits for a shifted magnitude of `level` coefficient steps.
    #[inline]
    pub fn level_bits(&self, level: u32) -> f64 {
        self.moe.level_bits(level, self.delta_a.step())
    }

    #[inline]
    pub fn residual_entry_bits(&self, e: f64) -> f64 {
        self.moeg.bin_bits(self.delta_e.index(e))
    }

    pub fn residual_bits(&self, residual: &[f64]) -> f64 {
        residual.iter().map(|&e| self.residual_entry_bits(e)).sum()
    }
}

/// How supports are coded.
#[derive(Debug, Clone, Copy)]
pub enum SupportCodec<'a> {
    Enumerative,
    /// Markov model plus the per-atom context of the patch being coded.
    Markov {
        model: &'a MarkovSupportModel,
        contexts: &'a [u8],
    },
}

impl SupportCodec<'_> {
    pub fn bits(&self, support: &[bool]) -> Result<f64> {
        match self {
            SupportCodec::Enumerative => Ok(support_codelength_enumerative(support)),
            SupportCodec::Markov { model, contexts } => model.codelength(support, contexts),
        }
    }
}

/// Sum of `-log2 Q_nu(v_k)` over the support.
pub fn magnitude_codelength(code: &SparseCode, model: &CodelengthModel) -> Result<f64> {
    if code.delta_a() != model.delta_a().step() {
        return Err(Error::Contract(format!(
            "code quantized with step {}, model expects {}",
            code.delta_a(),
            model.delta_a().step()
        )));
    }
    Ok(code.active().map(|k| model.level_bits(code.level(k))).sum())
}

/// `m p log2 n` bits for an `m x p` dictionary learned from `n` samples.
pub fn dictionary_codelength(m: usize, p: usize, n: usize) -> f64 {
    (m * p) as f64 * (n.max(1) as f64).log2()
}

/// The four terms of a patch description.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Breakdown {
    pub residual: f64,
    pub support: f64,
    pub signs: f64,
    pub magnitudes: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.residual + self.support + self.signs + self.magnitudes
    }

    /// Everything except the residual.
    pub fn coefficients(&self) -> f64 {
        self.support + self.signs + self.magnitudes
    }
}

impl std::ops::AddAssign for Breakdown {
    fn add_assign(&mut self, o: Self) {
        self.residual += o.residual;
        self.support += o.support;
        self.signs += o.signs;
        self.magnitudes += o.magnitudes;
    }
}

pub fn breakdown(
    residual: &[f64],
    code: &SparseCode,
    model: &CodelengthModel,
    codec: SupportCodec<'_>,
) -> Result<Breakdown> {
    Ok(Breakdown {
        residual: model.residual_bits(residual),
        support: codec.bits(code.support())?,
        signs: sign_codelength(code.support()),
        magnitudes: magnitude_codelength(code, model)?,
    })
}

/// Total description length of one patch, evaluated from scratch.
pub fn total_codelength(
    residual: &[f64],
    code: &SparseCode,
    model: &CodelengthModel,
    codec: SupportCodec<'_>,
) -> Result<f64> {
    Ok(breakdown(residual, code, model, codec)?.total())
}
