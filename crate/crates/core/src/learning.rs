//! Two-stage dictionary learning.
//!
//! Stage one alternates sparse coding with a dictionary update that minimizes
//! a Huber surrogate of the residual codelength under unit-ball constraints on
//! the atoms, using a diagonally scaled projected gradient with backtracking.
//! Stage two prunes atoms whose removal shortens the total description,
//! dictionary bits included.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::code::SparseCode;
use crate::codelen::markov::grid_contexts;
use crate::codelen::{
    dictionary_codelength, support_codelength_enumerative, CodelengthModel, MarkovSupportModel,
};
use crate::coding::{encode_grid, EncodeResult, Encoder, GridCodec, StopRule};
use crate::dictionary::{project_columns, Dictionary};
use crate::error::{Error, Result};
use crate::patches::PatchGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Huber,
    /// Plain squared error, for comparison.
    L2,
}

/// Scaled projected gradient settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub initial_step: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Gradient steps per dictionary update.
    pub inner_iters: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            backtrack: 0.5,
            max_backtracks: 40,
            inner_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub p_max: usize,
    pub max_outer_iters: usize,
    /// Huber knee; `None` derives it from the codelength model.
    pub huber_delta: Option<f64>,
    pub loss: Loss,
    pub step_rule: StepRule,
    /// Relative change of the average codelength that ends the alternation.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Stopping rule of the coding passes inside learning and pruning.
    pub stop: StopRule,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            p_max: 64,
            max_outer_iters: 10,
            huber_delta: None,
            loss: Loss::Huber,
            step_rule: StepRule::default(),
            convergence_tol: 1e-3,
            seed: 0,
            stop: StopRule::Mdl,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_max == 0 {
            return Err(Error::Usage("p_max must be at least 1".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Usage("need at least one outer iteration".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Usage(
                "convergence tolerance must be positive".into(),
            ));
        }
        if self.huber_delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Usage("Huber delta must be positive".into()));
        }
        let s = &self.step_rule;
        if !(s.initial_step > 0.0 && s.backtrack > 0.0 && s.backtrack < 1.0) {
            return Err(Error::Usage(
                "step rule needs initial_step > 0 and 0 < backtrack < 1".into(),
            ));
        }
        Ok(())
    }

    /// Huber knee actually used with `model`.
    pub fn effective_huber_delta(&self, model: &CodelengthModel) -> f64 {
        self.huber_delta
            .unwrap_or_else(|| default_huber_delta(model))
    }
}

/// Knee at `sigma_eta + beta_eps`, where `-log LG` turns from quadratic to linear.
pub fn default_huber_delta(model: &CodelengthModel) -> f64 {
    let h = model.hyper();
    h.sigma2.sqrt() + h.beta_eps
}

#[inline]
fn huber(x: f64, delta: f64) -> (f64, f64) {
    let a = x.abs();
    if a <= delta {
        (0.5 * x * x, x)
    } else {
        (delta * (a - 0.5 * delta), delta * x.signum())
    }
}

/// Elementwise Huber loss summed over `residual`, and its gradient.
pub fn huber_surrogate(residual: &[f64], delta: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let grad = residual
        .iter()
        .map(|&x| {
            let (v, g) = huber(x, delta);
            value += v;
            g
        })
        .collect();
    (value, grad)
}

/// Coefficient columns in sparse form.
fn sparse_columns(codes: &[&SparseCode]) -> Vec<Vec<(usize, f64)>> {
    codes
        .iter()
        .map(|c| c.active().map(|k| (k, c.coefficient(k))).collect())
        .collect()
}

struct Problem<'a> {
    samples: Vec<&'a [f64]>,
    coefs: Vec<Vec<(usize, f64)>>,
    dim: usize,
    atoms: usize,
    delta: f64,
}

impl Problem<'_> {
    fn loss(&self, x: f64) -> (f64, f64) {
        huber(x, self.delta)
    }

    fn residual(&self, atoms: &[f64], j: usize, out: &mut [f64]) {
        out.copy_from_slice(self.samples[j]);
        for &(k, a) in &self.coefs[j] {
            let d = &atoms[k * self.dim..(k + 1) * self.dim];
            out.iter_mut().zip(d).for_each(|(r, &dv)| *r -= a * dv);
        }
    }

    fn objective(&self, atoms: &[f64]) -> f64 {
        let mut r = vec![0.0; self.dim];
        let mut f = 0.0;
        for j in 0..self.samples.len() {
            self.residual(atoms, j, &mut r);
            f += r.iter().map(|&x| self.loss(x).0).sum::<f64>();
        }
        f
    }

    fn objective_and_gradient(&self, atoms: &[f64]) -> (f64, Vec<f64>) {
        let mut r = vec![0.0; self.dim];
        let mut f = 0.0;
        let mut grad = vec![0.0; self.dim * self.atoms];
        for j in 0..self.samples.len() {
            self.residual(atoms, j, &mut r);
            for x in r.iter_mut() {
                let (v, g) = self.loss(*x);
                f += v;
                *x = g;
            }
            for &(k, a) in &self.coefs[j] {
                let gk = &mut grad[k * self.dim..(k + 1) * self.dim];
                gk.iter_mut().zip(&r).for_each(|(g, &psi)| *g -= a * psi);
            }
        }
        (f, grad)
    }
}

/// Result of one dictionary update.
#[derive(Debug, Clone)]
pub struct DictUpdate {
    pub dictionary: Dictionary,
    /// Objective before the update and after every accepted step.
    pub objective: Vec<f64>,
}

/// Minimizes the Huber (or squared) residual over the dictionary with codes
/// held fixed. Every accepted step satisfies an Armijo decrease condition, so
/// the objective never increases; atoms stay in the unit ball.
pub fn dict_update(
    dict: &Dictionary,
    grids: &[PatchGrid],
    codes: &[&SparseCode],
    config: &LearnConfig,
    delta: f64,
) -> Result<DictUpdate> {
    let samples: Vec<&[f64]> = grids.iter().flat_map(|g| g.columns()).collect();
    if samples.len() != codes.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} codes",
            samples.len(),
            codes.len()
        )));
    }
    if samples.first().is_some_and(|s| s.len() != dict.dim()) {
        return Err(Error::Dimension("patch size differs from atom size".into()));
    }
    if codes.iter().any(|c| c.atom_count() != dict.atom_count()) {
        return Err(Error::Dimension(
            "code length differs from dictionary size".into(),
        ));
    }
    let (m, p) = (dict.dim(), dict.atom_count());
    let problem = Problem {
        samples,
        coefs: sparse_columns(codes),
        dim: m,
        atoms: p,
        delta: match config.loss {
            Loss::Huber => delta,
            Loss::L2 => f64::INFINITY,
        },
    };
    let mut scale = vec![1e-8; p];
    for col in &problem.coefs {
        for &(k, a) in col {
            scale[k] += a * a;
        }
    }

    let rule = config.step_rule;
    let mut atoms = dict.elements().to_vec();
    let (mut f, _) = problem.objective_and_gradient(&atoms);
    let mut trace = vec![f];
    let mut t0 = rule.initial_step;
    for _ in 0..rule.inner_iters {
        let (_, grad) = problem.objective_and_gradient(&atoms);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite dictionary gradient".into()));
        }
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        let mut t = t0;
        let mut accepted = None;
        for _ in 0..=rule.max_backtracks {
            let mut cand: Vec<f64> = atoms
                .iter()
                .zip(&grad)
                .enumerate()
                .map(|(i, (&d, &g))| d - t * g / scale[i / m])
                .collect();
            project_columns(&mut cand, m);
            let fc = problem.objective(&cand);
            let slope: f64 = grad
                .iter()
                .zip(cand.iter().zip(&atoms))
                .map(|(g, (c, d))| g * (c - d))
                .sum();
            if fc.is_finite() && fc <= f && fc <= f + 1e-4 * slope {
                // try a longer step next time
                t0 = t / rule.backtrack;
                accepted = Some((cand, fc));
                break;
            }
            t *= rule.backtrack;
        }
        let Some((cand, fc)) = accepted else { break };
        if cand == atoms {
            break;
        }
        atoms = cand;
        f = fc;
        trace.push(f);
    }
    Ok(DictUpdate {
        dictionary: Dictionary::new(m, p, atoms, dict.sample_count())?,
        objective: trace,
    })
}

/// Encodes every grid with the enumerative support code.
pub fn encode_all(
    grids: &[PatchGrid],
    dict: &Dictionary,
    model: &CodelengthModel,
    stop: StopRule,
) -> Result<Vec<Vec<EncodeResult>>> {
    let enc = Encoder::new(dict, model);
    grids
        .iter()
        .map(|g| encode_grid(g, &enc, GridCodec::Enumerative, stop))
        .collect()
}

pub(crate) fn average_bits(results: &[Vec<EncodeResult>]) -> f64 {
    let (sum, n) = results
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), r| (s + r.bits, n + 1));
    sum / n.max(1) as f64
}

/// Initial dictionary: a constant atom followed by `p_max - 1` distinct random
/// training patches with their mean removed, scaled to unit norm.
///
/// Raw patches of natural images are dominated by their mean, so normalizing
/// them directly yields atoms that all point near the constant direction.
pub fn initial_dictionary(grids: &[PatchGrid], p_max: usize, seed: u64) -> Result<Dictionary> {
    let samples: Vec<&[f64]> = grids.iter().flat_map(|g| g.columns()).collect();
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyInput("no training patches".into()));
    }
    if p_max == 0 {
        return Err(Error::Usage("p_max must be at least 1".into()));
    }
    let m = samples[0].len();
    let mut atoms = vec![1.0 / (m as f64).sqrt(); m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want = p_max - 1;
    let mut picks: Vec<usize> = index::sample(&mut rng, n, want.min(n)).into_vec();
    while picks.len() < want {
        picks.push(rng.random_range(0..n));
    }
    for &j in &picks {
        let y = samples[j];
        let mean = y.iter().sum::<f64>() / m as f64;
        let norm = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
        atoms.extend(
            y.iter()
                .map(|&v| if norm > 0.0 { (v - mean) / norm } else { 0.0 }),
        );
    }
    Dictionary::new(m, p_max, atoms, n)
}

#[derive(Debug, Clone)]
pub struct Learned {
    pub dictionary: Dictionary,
    /// Average codelength per patch after each coding pass.
    pub history: Vec<f64>,
    /// Codes under `dictionary`.
    pub results: Vec<Vec<EncodeResult>>,
}

/// Alternates coding and dictionary updates from a random initialization.
/// Returns the dictionary of the pass with the smallest average codelength.
pub fn learn_dictionary(
    grids: &[PatchGrid],
    config: &LearnConfig,
    model: &CodelengthModel,
) -> Result<Learned> {
    config.validate()?;
    let dict = initial_dictionary(grids, config.p_max, config.seed)?;
    learn_from(dict, grids, config, model)
}

/// [`learn_dictionary`] starting from a given dictionary.
pub fn learn_from(
    dict: Dictionary,
    grids: &[PatchGrid],
    config: &LearnConfig,
    model: &CodelengthModel,
) -> Result<Learned> {
    learn_at(dict, grids, config, model, Precision::Real)
}

/// Learning loop whose passes are scored, and whose result is returned, at
/// `precision`. Updates always act on the real-valued dictionary.
fn learn_at(
    mut dict: Dictionary,
    grids: &[PatchGrid],
    config: &LearnConfig,
    model: &CodelengthModel,
    precision: Precision,
) -> Result<Learned> {
    config.validate()?;
    let n: usize = grids.iter().map(PatchGrid::len).sum();
    if n == 0 {
        return Err(Error::EmptyInput("no training patches".into()));
    }
    dict.set_sample_count(n);
    let delta = config.effective_huber_delta(model);
    let mut history = Vec::new();
    let mut best: Option<(f64, Dictionary, Vec<Vec<EncodeResult>>)> = None;
    loop {
        let results = encode_all(grids, &dict, model, config.stop)?;
        let (scored, scored_results) = match precision {
            Precision::Real => (dict.clone(), None),
            Precision::Stored => {
                let q = dict.quantized();
                let r = encode_all(grids, &q, model, config.stop)?;
                (q, Some(r))
            }
        };
        let avg = average_bits(scored_results.as_ref().unwrap_or(&results));
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (prev - avg).abs() <= config.convergence_tol * prev.abs());
        history.push(avg);
        let done = converged || history.len() >= config.max_outer_iters;
        let codes: Option<Vec<SparseCode>> =
            (!done).then(|| results.iter().flatten().map(|r| r.code.clone()).collect());
        if best.as_ref().is_none_or(|b| avg < b.0) {
            best = Some((avg, scored, scored_results.unwrap_or(results)));
        }
        let update = match codes {
            None => None,
            Some(codes) => {
                let refs: Vec<&SparseCode> = codes.iter().collect();
                Some(dict_update(&dict, grids, &refs, config, delta)?.dictionary)
                    .filter(|d| *d != dict)
            }
        };
        match update {
            Some(d) => dict = d,
            None => {
                let (_, dictionary, results) = best.expect("at least one pass");
                return Ok(Learned {
                    dictionary,
                    history,
                    results,
                });
            }
        }
    }
}

/// Support code used while pruning.
#[derive(Debug, Clone)]
pub enum PruneCodec {
    Enumerative,
    Markov(MarkovSupportModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneStrategy {
    /// Re-evaluates only the current best candidate after each removal,
    /// refreshing everything before declaring convergence.
    Lazy,
    /// Re-evaluates every candidate after each removal.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneOptions {
    pub strategy: PruneStrategy,
    /// Stopping rule used when re-encoding the users of a removed atom.
    pub stop: StopRule,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            strategy: PruneStrategy::Lazy,
            stop: StopRule::Mdl,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneReport {
    pub dictionary: Dictionary,
    pub results: Vec<Vec<EncodeResult>>,
    pub markov: Option<MarkovSupportModel>,
    /// Indices (in the input dictionary) of removed atoms, in removal order.
    pub removed: Vec<usize>,
    /// Total description length before pruning and after each removal.
    pub totals: Vec<f64>,
}

struct PruneState {
    dict: Dictionary,
    results: Vec<Vec<EncodeResult>>,
    markov: Option<MarkovSupportModel>,
    origin: Vec<usize>,
    total: f64,
}

fn supports_of(results: &[EncodeResult]) -> Vec<&[bool]> {
    results.iter().map(|r| r.code.support()).collect()
}

/// Support bits of every patch under the current codec.
fn support_bits(
    grids: &[PatchGrid],
    results: &[Vec<EncodeResult>],
    markov: Option<&MarkovSupportModel>,
) -> Vec<Vec<f64>> {
    grids
        .iter()
        .zip(results)
        .map(|(grid, res)| match markov {
            None => res
                .iter()
                .map(|r| support_codelength_enumerative(r.code.support()))
                .collect(),
            Some(mk) => {
                let sup = supports_of(res);
                (0..res.len())
                    .map(|j| {
                        let ctx = grid_contexts(grid, j, mk.atom_count(), |i| sup[i]);
                        mk.codelength(sup[j], &ctx).expect("dims checked")
                    })
                    .collect()
            }
        })
        .collect()
}

/// Re-derives `bits` of every result from its parts plus the current support codelength.
fn restate(
    grids: &[PatchGrid],
    results: &mut [Vec<EncodeResult>],
    model: &CodelengthModel,
    markov: Option<&MarkovSupportModel>,
) -> f64 {
    let sup = support_bits(grids, results, markov);
    let mut total = 0.0;
    for (res, sb) in results.iter_mut().zip(sup) {
        for (r, s) in res.iter_mut().zip(sb) {
            r.bits = non_support_bits(r, model) + s;
            total += r.bits;
        }
    }
    total
}

fn non_support_bits(r: &EncodeResult, model: &CodelengthModel) -> f64 {
    model.residual_bits(&r.residual)
        + r.code.gamma() as f64
        + r.code
            .active()
            .map(|k| model.level_bits(r.code.level(k)))
            .sum::<f64>()
}

fn description_total(
    grids: &[PatchGrid],
    state_results: &mut [Vec<EncodeResult>],
    dict: &Dictionary,
    model: &CodelengthModel,
    markov: Option<&MarkovSupportModel>,
) -> f64 {
    let n: usize = grids.iter().map(PatchGrid::len).sum();
    restate(grids, state_results, model, markov)
        + dictionary_codelength(dict.dim(), dict.atom_count(), n)
}

/// State after removing atom `k`: its users are re-encoded with the smaller
/// dictionary, everyone else keeps their code.
fn remove_atom(
    state: &PruneState,
    k: usize,
    grids: &[PatchGrid],
    model: &CodelengthModel,
    stop: StopRule,
) -> Result<PruneState> {
    let dict = state.dict.without_atom(k)?;
    let markov = state.markov.as_ref().map(|m| m.without_atom(k));
    let enc = Encoder::new(&dict, model);
    let p = dict.atom_count();
    let mut results = Vec::with_capacity(grids.len());
    for (grid, old) in grids.iter().zip(&state.results) {
        let mut res: Vec<EncodeResult> = old
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if !r.code.support()[k] {
                    r.code = r.code.without_atom(k);
                }
                r
            })
            .collect();
        let users: Vec<usize> = (0..old.len())
            .filter(|&j| old[j].code.support()[k])
            .collect();
        match &markov {
            None => {
                let fresh: Vec<EncodeResult> = users
                    .par_iter()
                    .map(|&j| {
                        enc.encode(
                            grid.column(j),
                            crate::codelen::SupportCodec::Enumerative,
                            stop,
                        )
                    })
                    .collect::<Result<_>>()?;
                for (j, r) in users.into_iter().zip(fresh) {
                    res[j] = r;
                }
            }
            Some(mk) => {
                // raster order, so earlier users see their neighbours' new codes
                for j in users {
                    let ctx = grid_contexts(grid, j, p, |i| {
                        if res[i].code.atom_count() == p {
                            res[i].code.support()
                        } else {
                            &[]
                        }
                    });
                    res[j] = enc.encode(
                        grid.column(j),
                        crate::codelen::SupportCodec::Markov {
                            model: mk,
                            contexts: &ctx,
                        },
                        stop,
                    )?;
                }
            }
        }
        results.push(res);
    }
    let mut origin = state.origin.clone();
    origin.remove(k);
    let total = description_total(grids, &mut results, &dict, model, markov.as_ref());
    Ok(PruneState {
        dict,
        results,
        markov,
        origin,
        total,
    })
}

/// Encodes `grids` with `dict` and prunes it (lazy greedy search).
pub fn prune_atoms(
    dict: &Dictionary,
    grids: &[PatchGrid],
    model: &CodelengthModel,
    codec: PruneCodec,
) -> Result<PruneReport> {
    let enc = Encoder::new(dict, model);
    let results = grids
        .iter()
        .map(|g| match &codec {
            PruneCodec::Enumerative => encode_grid(g, &enc, GridCodec::Enumerative, StopRule::Mdl),
            PruneCodec::Markov(mk) => encode_grid(g, &enc, GridCodec::Markov(mk), StopRule::Mdl),
        })
        .collect::<Result<Vec<_>>>()?;
    prune_with(dict, grids, model, codec, results, PruneOptions::default())
}

/// Greedy backward elimination starting from existing codes.
///
/// Repeatedly removes the atom whose removal most decreases
/// `L(E) + L(A) + L(D)` until no single removal helps. Never removes the last atom.
pub fn prune_with(
    dict: &Dictionary,
    grids: &[PatchGrid],
    model: &CodelengthModel,
    codec: PruneCodec,
    mut results: Vec<Vec<EncodeResult>>,
    options: PruneOptions,
) -> Result<PruneReport> {
    let PruneOptions { strategy, stop } = options;
    if results.len() != grids.len() || results.iter().zip(grids).any(|(r, g)| r.len() != g.len()) {
        return Err(Error::Dimension(
            "codes do not match the patch grids".into(),
        ));
    }
    if results
        .iter()
        .flatten()
        .any(|r| r.code.atom_count() != dict.atom_count())
    {
        return Err(Error::Dimension("codes do not match the dictionary".into()));
    }
    let markov = match codec {
        PruneCodec::Enumerative => None,
        PruneCodec::Markov(mk) => {
            if mk.atom_count() != dict.atom_count() {
                return Err(Error::Dimension(
                    "Markov model does not match the dictionary".into(),
                ));
            }
            Some(mk)
        }
    };
    let n: usize = grids.iter().map(PatchGrid::len).sum();
    let mut dict = dict.clone();
    dict.set_sample_count(n);
    let total = description_total(grids, &mut results, &dict, model, markov.as_ref());
    let mut state = PruneState {
        origin: (0..dict.atom_count()).collect(),
        dict,
        results,
        markov,
        total,
    };
    let mut totals = vec![state.total];
    let mut removed = Vec::new();
    // cached (delta, fresh) per current atom
    let mut cache: Vec<Option<(f64, bool)>> = vec![None; state.dict.atom_count()];

    while state.dict.atom_count() > 1 {
        for k in 0..cache.len() {
            if cache[k].is_none() {
                let cand = remove_atom(&state, k, grids, model, stop)?;
                cache[k] = Some((cand.total - state.total, true));
            }
        }
        let (best, (delta, fresh)) = cache
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.expect("filled above")))
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .expect("at least two atoms");
        if !fresh {
            let cand = remove_atom(&state, best, grids, model, stop)?;
            cache[best] = Some((cand.total - state.total, true));
            continue;
        }
        if delta < 0.0 {
            let next = remove_atom(&state, best, grids, model, stop)?;
            debug_assert!(next.total < state.total);
            removed.push(state.origin[best]);
            state = next;
            totals.push(state.total);
            cache.remove(best);
            for c in cache.iter_mut() {
                *c = match strategy {
                    PruneStrategy::Lazy => c.map(|(d, _)| (d, false)),
                    PruneStrategy::Exhaustive => None,
                };
            }
            continue;
        }
        if cache.iter().any(|c| c.is_some_and(|(_, f)| !f)) {
            for c in cache.iter_mut() {
                if c.is_some_and(|(_, f)| !f) {
                    *c = None;
                }
            }
            continue;
        }
        break;
    }
    Ok(PruneReport {
        dictionary: state.dict,
        results: state.results,
        markov: state.markov,
        removed,
        totals,
    })
}

/// Precision at which training scores its passes, prunes and returns the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Keep the learned real values (denoising, segmentation).
    Real,
    /// Quantize to `n^-1/2` before pruning, as stored in model files.
    Stored,
}

#[derive(Debug, Clone)]
pub struct Trained {
    /// Pruned dictionary at the requested precision.
    pub dictionary: Dictionary,
    /// Average bits per patch after every learning pass, then after pruning.
    pub history: Vec<f64>,
    /// MDL-stopped codes under `dictionary`.
    pub results: Vec<Vec<EncodeResult>>,
    pub removed_atoms: usize,
}

/// Learning followed by pruning.
///
/// Pruning always measures the description under MDL-stopped codes, whatever
/// rule the learning passes used.
pub fn train_dictionary(
    grids: &[PatchGrid],
    config: &LearnConfig,
    model: &CodelengthModel,
    precision: Precision,
) -> Result<Trained> {
    config.validate()?;
    let init = initial_dictionary(grids, config.p_max, config.seed)?;
    let learned = learn_at(init, grids, config, model, precision)?;
    let dict = learned.dictionary;
    let results = if config.stop == StopRule::Mdl {
        learned.results
    } else {
        encode_all(grids, &dict, model, StopRule::Mdl)?
    };
    let pruned = prune_with(
        &dict,
        grids,
        model,
        PruneCodec::Enumerative,
        results,
        PruneOptions::default(),
    )?;
    let mut history = learned.history;
    history.push(average_bits(&pruned.results));
    Ok(Trained {
        dictionary: pruned.dictionary,
        history,
        results: pruned.results,
        removed_atoms: pruned.removed.len(),
    })
}
