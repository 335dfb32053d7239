//! Sparse coding and dictionary learning driven by description length.
//!
//! Image patches are encoded by explicitly minimizing the number of bits needed
//! to describe them: the quantized approximation error, the support of the
//! sparse code, the signs and the magnitudes of the coefficients. Dictionaries
//! are learned and pruned under the same codelength, which leaves nothing to
//! tune by hand. On top of the coding machinery sit three applications:
//! denoising, texture segmentation and compression accounting.
//!
//! Layout:
//!
//! - [`quant`], [`image`], [`pgm`], [`patches`], [`dictionary`], [`code`],
//!   [`metrics`]: value types and signal plumbing.
//! - [`codelen`]: probability models and their ideal codelengths.
//! - [`coding`]: codelength-based forward selection.
//! - [`learning`]: dictionary update and atom pruning.
//! - [`pipelines`]: denoising, segmentation, bits-per-pixel statistics.
//! - [`model_file`], [`cli`]: serialized models and the command-line tool.

pub mod cli;
pub mod code;
pub mod codelen;
pub mod coding;
pub mod dictionary;
pub mod error;
pub mod image;
pub mod learning;
pub mod metrics;
pub mod model_file;
pub mod patches;
pub mod pgm;
pub mod pipelines;
pub mod quadrature;
pub mod quant;

pub use code::SparseCode;
pub use codelen::{CodelengthModel, MarkovSupportModel, SupportCodec};
pub use coding::{EncodeResult, Encoder, StopRule};
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use image::GrayImage;
pub use learning::{LearnConfig, Loss};
pub use patches::PatchGrid;
pub use quant::QuantizationGrid;
