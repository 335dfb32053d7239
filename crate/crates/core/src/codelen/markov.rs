//! Support model with Markov dependencies between neighbouring patches.
//!
//! The presence of atom `k` in a patch is coded conditionally on whether the
//! same atom is present in the left, top and top-left patches. The three
//! neighbour bits form a context `left | top << 1 | top_left << 2`; a missing
//! neighbour (image border) contributes 0. Probabilities are Krichevsky-Trofimov
//! estimates `(n1 + 1/2) / (n0 + n1 + 1)` of the per-(atom, context) counts.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::patches::PatchGrid;

pub const CONTEXTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSupportModel {
    counts: Vec<[[u64; 2]; CONTEXTS]>,
    probs: Vec<[f64; CONTEXTS]>,
}

/// Contexts for one patch given the supports of its causal neighbours.
pub fn contexts_from_neighbors(p: usize, neighbors: [Option<&[bool]>; 3]) -> Vec<u8> {
    (0..p)
        .map(|k| {
            neighbors
                .iter()
                .enumerate()
                .map(|(bit, n)| u8::from(n.is_some_and(|s| s[k])) << bit)
                .sum()
        })
        .collect()
}

/// Context vector of patch `j` of `grid`, reading neighbour supports through `support_of`.
pub fn grid_contexts<'a>(
    grid: &PatchGrid,
    j: usize,
    p: usize,
    support_of: impl Fn(usize) -> &'a [bool],
) -> Vec<u8> {
    let [l, t, tl] = grid.causal_neighbors(j);
    contexts_from_neighbors(
        p,
        [l.map(&support_of), t.map(&support_of), tl.map(&support_of)],
    )
}

impl MarkovSupportModel {
    /// Model with no observations: every probability is 1/2.
    pub fn uniform(p: usize) -> Self {
        Self::from_counts(vec![[[0; 2]; CONTEXTS]; p])
    }

    pub fn from_counts(counts: Vec<[[u64; 2]; CONTEXTS]>) -> Self {
        let probs = counts
            .iter()
            .map(|row| {
                let mut pr = [0.0; CONTEXTS];
                for (ctx, &[n0, n1]) in row.iter().enumerate() {
                    pr[ctx] = (n1 as f64 + 0.5) / ((n0 + n1) as f64 + 1.0);
                }
                pr
            })
            .collect();
        Self { counts, probs }
    }

    pub fn atom_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[[[u64; 2]; CONTEXTS]] {
        &self.counts
    }

    /// Probability that atom `k` is present in context `ctx`.
    #[inline]
    pub fn prob(&self, k: usize, ctx: u8) -> f64 {
        self.probs[k][ctx as usize]
    }

    #[inline]
    pub fn bit_bits(&self, k: usize, ctx: u8, present: bool) -> f64 {
        let p = self.prob(k, ctx);
        -(if present { p } else { 1.0 - p }).log2()
    }

    pub fn observe(&mut self, support: &[bool], contexts: &[u8]) {
        for (k, (&z, &ctx)) in support.iter().zip(contexts).enumerate() {
            self.counts[k][ctx as usize][usize::from(z)] += 1;
        }
    }

    /// Recomputes probabilities after a batch of [`observe`](Self::observe) calls.
    pub fn refresh(&mut self) {
        *self = Self::from_counts(std::mem::take(&mut self.counts));
    }

    /// Accumulates the supports of one patch grid, in raster order.
    pub fn observe_grid(&mut self, grid: &PatchGrid, supports: &[&[bool]]) {
        let p = self.atom_count();
        for (j, s) in supports.iter().enumerate() {
            let ctx = grid_contexts(grid, j, p, |i| supports[i]);
            self.observe(s, &ctx);
        }
    }

    pub fn without_atom(&self, k: usize) -> Self {
        let mut counts = self.counts.clone();
        counts.remove(k);
        Self::from_counts(counts)
    }

    /// `sum_k -log2 P(z_k | ctx_k)`.
    pub fn codelength(&self, support: &[bool], contexts: &[u8]) -> Result<f64> {
        let p = self.atom_count();
        if support.len() != p || contexts.len() != p {
            return Err(Error::Dimension(format!(
                "Markov model fitted for {p} atoms, got support {} / contexts {}",
                support.len(),
                contexts.len()
            )));
        }
        if let Some(&c) = contexts.iter().find(|&&c| c as usize >= CONTEXTS) {
            return Err(Error::Domain(format!("context {c} out of range 0..8")));
        }
        Ok((0..p)
            .map(|k| self.bit_bits(k, contexts[k], support[k]))
            .sum())
    }
}

/// Fits a Markov support model from supports keyed by their lattice position
/// `(grid_row, grid_col)`. Input order does not matter.
pub fn markov_fit<'a>(
    supports: impl IntoIterator<Item = ((usize, usize), &'a [bool])>,
) -> Result<MarkovSupportModel> {
    let map: HashMap<(usize, usize), &[bool]> = supports.into_iter().collect();
    let p = map
        .values()
        .next()
        .map(|s| s.len())
        .ok_or_else(|| Error::EmptyInput("no supports to fit".into()))?;
    if map.values().any(|s| s.len() != p) {
        return Err(Error::Dimension("supports differ in length".into()));
    }
    let mut model = MarkovSupportModel::uniform(p);
    for (&(r, c), s) in &map {
        let left = c.checked_sub(1).and_then(|c| map.get(&(r, c)).copied());
        let top = r.checked_sub(1).and_then(|r| map.get(&(r, c)).copied());
        let top_left = r
            .checked_sub(1)
            .zip(c.checked_sub(1))
            .and_then(|rc| map.get(&rc).copied());
        let ctx = contexts_from_neighbors(p, [left, top, top_left]);
        model.observe(s, &ctx);
    }
    model.refresh();
    Ok(model)
}

/// Support codelength under a fitted Markov model.
pub fn markov_support_codelength(
    support: &[bool],
    contexts: &[u8],
    model: &MarkovSupportModel,
) -> Result<f64> {
    model.codelength(support, contexts)
}
