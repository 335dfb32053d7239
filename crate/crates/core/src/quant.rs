//! Uniform scalar quantization.

use crate::error::{Error, Result};

/// Uniform quantizer with a fixed positive step.
///
/// Values are mapped to the nearest integer multiple of the step; exact
/// half-step ties go away from zero, which keeps the quantizer odd-symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationGrid {
    step: f64,
}

impl QuantizationGrid {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Domain(format!(
                "quantization step must be positive and finite, got {step}"
            )));
        }
        Ok(Self { step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Integer index of the reconstruction level nearest to `x`.
    #[inline]
    pub fn index(&self, x: f64) -> i64 {
        // f64::round already breaks ties away from zero.
        (x / self.step).round() as i64
    }

    #[inline]
    pub fn level(&self, index: i64) -> f64 {
        index as f64 * self.step
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        self.level(self.index(x))
    }
}

/// Free-function form of [`QuantizationGrid::quantize`].
pub fn quantize(x: f64, grid: QuantizationGrid) -> f64 {
    grid.quantize(x)
}
