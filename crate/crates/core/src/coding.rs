//! Codelength-based forward selection.
//!
//! Starting from the empty code, every round tries each inactive atom with a
//! step equal to its correlation with the current residual, quantized to the
//! coefficient grid. The candidate with the smallest total codelength is
//! accepted if it shortens the description; otherwise coding stops. The
//! denoising variant replaces that stopping rule by a distortion ball.

use rayon::prelude::*;

use crate::code::SparseCode;
use crate::codelen::markov::grid_contexts;
use crate::codelen::{CodelengthModel, EnumerativeTable, MarkovSupportModel, SupportCodec};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::patches::PatchGrid;

/// When forward selection stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop as soon as no candidate shortens the description.
    Mdl,
    /// Keep adding atoms, among those that shrink the residual, until the
    /// residual norm is at most `sqrt(m) * sigma`.
    Ball { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeResult {
    pub code: SparseCode,
    /// `y - D a` quantized to the error step.
    pub residual: Vec<f64>,
    /// Total codelength of `(residual, code)` in bits.
    pub bits: f64,
    /// Number of accepted atoms.
    pub iterations: usize,
    /// Codelength before the first step and after each accepted step.
    pub trace: Vec<f64>,
}

/// Forward-selection coder bound to one dictionary and codelength model.
#[derive(Debug)]
pub struct Encoder<'a> {
    dict: &'a Dictionary,
    model: &'a CodelengthModel,
    gram: Vec<f64>,
    enumerative: EnumerativeTable,
}

enum SupportCost<'a> {
    Enumerative(&'a EnumerativeTable),
    Markov {
        model: &'a MarkovSupportModel,
        contexts: &'a [u8],
    },
}

impl<'a> Encoder<'a> {
    pub fn new(dict: &'a Dictionary, model: &'a CodelengthModel) -> Self {
        Self {
            gram: dict.gram(),
            enumerative: EnumerativeTable::new(dict.atom_count()),
            dict,
            model,
        }
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    pub fn model(&self) -> &CodelengthModel {
        self.model
    }

    pub fn encode(
        &self,
        y: &[f64],
        codec: SupportCodec<'_>,
        stop: StopRule,
    ) -> Result<EncodeResult> {
        let m = self.dict.dim();
        let p = self.dict.atom_count();
        if y.len() != m {
            return Err(Error::Dimension(format!(
                "patch has {} samples, atoms have {m}",
                y.len()
            )));
        }
        let cost = match codec {
            SupportCodec::Enumerative => SupportCost::Enumerative(&self.enumerative),
            SupportCodec::Markov { model, contexts } => {
                if model.atom_count() != p || contexts.len() != p {
                    return Err(Error::Dimension(format!(
                        "Markov model for {} atoms with {} contexts, dictionary has {p}",
                        model.atom_count(),
                        contexts.len()
                    )));
                }
                SupportCost::Markov { model, contexts }
            }
        };
        let radius2 = match stop {
            StopRule::Mdl => None,
            StopRule::Ball { sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::Domain(format!(
                        "noise level must be positive, got {sigma}"
                    )));
                }
                Some(m as f64 * sigma * sigma)
            }
        };

        let qa = self.model.delta_a();
        let qe = self.model.delta_e();
        let moeg = self.model.moeg();

        let mut residual = y.to_vec();
        let mut corr = self.dict.correlate(y);
        let mut steps = vec![0i64; p];
        let mut gamma = 0usize;
        let mut magnitude_bits = 0.0;
        let mut support_bits = match cost {
            SupportCost::Enumerative(t) => t.bits(0),
            SupportCost::Markov { model, contexts } => {
                (0..p).map(|k| model.bit_bits(k, contexts[k], false)).sum()
            }
        };
        let support_delta = |i: usize, gamma: usize, current: f64| match cost {
            SupportCost::Enumerative(t) => t.bits(gamma + 1),
            SupportCost::Markov { model, contexts } => {
                current + model.bit_bits(i, contexts[i], true)
                    - model.bit_bits(i, contexts[i], false)
            }
        };

        let mut norm2: f64 = residual.iter().map(|&v| qe.quantize(v).powi(2)).sum();
        let mut bits = residual
            .iter()
            .map(|&v| moeg.bin_bits(qe.index(v)))
            .sum::<f64>()
            + support_bits;
        let mut trace = vec![bits];

        let inside = |n2: f64| radius2.is_some_and(|r2| n2 <= r2);
        if !inside(norm2) {
            while gamma < p {
                // (atom, step, total bits, support bits, residual norm^2)
                let mut best: Option<(usize, i64, f64, f64, f64)> = None;
                for i in 0..p {
                    if steps[i] != 0 {
                        continue;
                    }
                    let q = qa.index(corr[i]);
                    if q == 0 {
                        continue;
                    }
                    let delta = qa.level(q);
                    let mut res_bits = 0.0;
                    let mut cand_norm2 = 0.0;
                    for (&r, &d) in residual.iter().zip(self.dict.atom(i)) {
                        let k = qe.index(r - delta * d);
                        res_bits += moeg.bin_bits(k);
                        cand_norm2 += qe.level(k).powi(2);
                    }
                    if radius2.is_some() && cand_norm2 >= norm2 {
                        continue;
                    }
                    let sup = support_delta(i, gamma, support_bits);
                    let level = (q.unsigned_abs() - 1) as u32;
                    let total = res_bits
                        + sup
                        + (gamma + 1) as f64
                        + magnitude_bits
                        + self.model.level_bits(level);
                    if best.is_none_or(|b| total < b.2) {
                        best = Some((i, q, total, sup, cand_norm2));
                    }
                }
                let Some((i, q, total, sup, cand_norm2)) = best else {
                    break;
                };
                if radius2.is_none() && total >= bits {
                    break;
                }
                let delta = qa.level(q);
                residual
                    .iter_mut()
                    .zip(self.dict.atom(i))
                    .for_each(|(r, &d)| *r -= delta * d);
                let g = &self.gram[i * p..(i + 1) * p];
                corr.iter_mut().zip(g).for_each(|(c, &gk)| *c -= delta * gk);
                steps[i] = q;
                gamma += 1;
                magnitude_bits += self.model.level_bits((q.unsigned_abs() - 1) as u32);
                support_bits = sup;
                bits = total;
                norm2 = cand_norm2;
                trace.push(bits);
                if inside(norm2) {
                    break;
                }
            }
        }

        Ok(EncodeResult {
            code: SparseCode::from_steps(&steps, qa.step()),
            residual: residual.iter().map(|&v| qe.quantize(v)).collect(),
            bits,
            iterations: gamma,
            trace,
        })
    }
}

/// Codelength-based forward selection of a single patch.
pub fn forward_selection(
    y: &[f64],
    dict: &Dictionary,
    model: &CodelengthModel,
    codec: SupportCodec<'_>,
) -> Result<EncodeResult> {
    Encoder::new(dict, model).encode(y, codec, StopRule::Mdl)
}

/// Forward selection that stops once `||e||_2 <= sqrt(m) sigma_eta`.
pub fn denoise_encode(
    y: &[f64],
    dict: &Dictionary,
    model: &CodelengthModel,
    codec: SupportCodec<'_>,
    sigma_eta: f64,
) -> Result<EncodeResult> {
    Encoder::new(dict, model).encode(y, codec, StopRule::Ball { sigma: sigma_eta })
}

/// Support codec applied across a whole patch grid.
#[derive(Debug, Clone, Copy)]
pub enum GridCodec<'a> {
    Enumerative,
    /// Contexts are read from the already coded left, top and top-left patches.
    Markov(&'a MarkovSupportModel),
}

/// Encodes every patch of `grid` in raster order.
pub fn encode_grid(
    grid: &PatchGrid,
    encoder: &Encoder<'_>,
    codec: GridCodec<'_>,
    stop: StopRule,
) -> Result<Vec<EncodeResult>> {
    match codec {
        GridCodec::Enumerative => (0..grid.len())
            .into_par_iter()
            .map(|j| encoder.encode(grid.column(j), SupportCodec::Enumerative, stop))
            .collect(),
        GridCodec::Markov(model) => {
            let p = encoder.dictionary().atom_count();
            let mut out: Vec<EncodeResult> = Vec::with_capacity(grid.len());
            for j in 0..grid.len() {
                let contexts = grid_contexts(grid, j, p, |i| out[i].code.support());
                let res = encoder.encode(
                    grid.column(j),
                    SupportCodec::Markov {
                        model,
                        contexts: &contexts,
                    },
                    stop,
                )?;
                out.push(res);
            }
            Ok(out)
        }
    }
}

/// Context vectors that a Markov-coded grid saw for each patch.
pub fn grid_context_table(grid: &PatchGrid, results: &[EncodeResult]) -> Vec<Vec<u8>> {
    let p = results.first().map_or(0, |r| r.code.atom_count());
    (0..results.len())
        .map(|j| grid_contexts(grid, j, p, |i| results[i].code.support()))
        .collect()
}
