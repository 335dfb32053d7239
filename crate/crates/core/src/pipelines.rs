//! Denoising, texture segmentation and compression statistics built on the
//! learning and coding modules.

use rayon::prelude::*;

use crate::code::reconstruct;
use crate::codelen::{
    dictionary_codelength, CodelengthModel, MarkovSupportModel, DEFAULT_DELTA_A,
    QUANTIZATION_NOISE_VAR,
};
use crate::coding::{encode_grid, EncodeResult, Encoder, GridCodec, StopRule};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::learning::{learn_dictionary, train_dictionary, LearnConfig, Precision, Trained};
use crate::metrics::psnr;
use crate::patches::{assemble_patches, extract_patches, extract_tiles, PatchGrid};

pub const DEFAULT_PATCH_SIDE: usize = 8;

/// Settings shared by all pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub patch_side: usize,
    pub delta_a: f64,
    pub learn: LearnConfig,
    /// Code supports with the causal Markov model instead of the enumerative code.
    pub markov: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_side: DEFAULT_PATCH_SIDE,
            delta_a: DEFAULT_DELTA_A,
            learn: LearnConfig::default(),
            markov: false,
        }
    }
}

/// Counts the supports of every grid, each in raster order, into one KT model.
pub fn fit_markov(
    grids: &[PatchGrid],
    results: &[Vec<EncodeResult>],
) -> Result<MarkovSupportModel> {
    let p = results
        .iter()
        .flatten()
        .next()
        .map(|r| r.code.atom_count())
        .ok_or_else(|| Error::EmptyInput("no codes to fit a Markov model".into()))?;
    let mut model = MarkovSupportModel::uniform(p);
    for (grid, res) in grids.iter().zip(results) {
        let sup: Vec<&[bool]> = res.iter().map(|r| r.code.support()).collect();
        model.observe_grid(grid, &sup);
    }
    model.refresh();
    Ok(model)
}

/// Fit and re-encode rounds used whenever a Markov support model is fitted.
pub const MARKOV_PASSES: usize = 3;

/// Alternates fitting a Markov model to the current supports and re-encoding
/// under it, starting from `results`. Keeps the round with the smallest total
/// codelength and stops early once a round does not improve on it.
pub fn refine_markov(
    grids: &[PatchGrid],
    encoder: &Encoder<'_>,
    results: Vec<Vec<EncodeResult>>,
    stop: StopRule,
    passes: usize,
) -> Result<(MarkovSupportModel, Vec<Vec<EncodeResult>>)> {
    let mut best: Option<(f64, MarkovSupportModel, Vec<Vec<EncodeResult>>)> = None;
    let mut current = results;
    for _ in 0..passes.max(1) {
        let mk = fit_markov(grids, &current)?;
        let coded = grids
            .iter()
            .map(|g| encode_grid(g, encoder, GridCodec::Markov(&mk), stop))
            .collect::<Result<Vec<_>>>()?;
        let bits: f64 = coded.iter().flatten().map(|r| r.bits).sum();
        if best.as_ref().is_some_and(|b| bits >= b.0) {
            break;
        }
        current = coded.clone();
        best = Some((bits, mk, coded));
    }
    let (_, mk, coded) = best.expect("at least one pass");
    Ok((mk, coded))
}

/// Sum of the support bits of `results`, recomputed under `codec`.
fn support_bits_total(
    grid: &PatchGrid,
    results: &[EncodeResult],
    markov: Option<&MarkovSupportModel>,
) -> Result<f64> {
    let p = results.first().map_or(0, |r| r.code.atom_count());
    let mut total = 0.0;
    for (j, r) in results.iter().enumerate() {
        total += match markov {
            None => crate::codelen::support_codelength_enumerative(r.code.support()),
            Some(mk) => {
                let ctx = crate::codelen::markov::grid_contexts(grid, j, p, |i| {
                    results[i].code.support()
                });
                mk.codelength(r.code.support(), &ctx)?
            }
        };
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct DenoiseReport {
    pub denoised: GrayImage,
    /// Present only when a clean reference was supplied.
    pub psnr_vs_clean: Option<f64>,
    pub avg_bits_per_patch: f64,
    pub avg_support_bits: f64,
    pub dict_size_used: usize,
    /// Learning history (average bits per patch).
    pub history: Vec<f64>,
}

/// Codes every patch of `grid` inside the distortion ball and averages the
/// reconstructions back into an image.
pub fn denoise_with_dictionary(
    grid: &PatchGrid,
    dict: &Dictionary,
    model: &CodelengthModel,
    sigma_eta: f64,
    markov: bool,
) -> Result<(GrayImage, f64, f64)> {
    let enc = Encoder::new(dict, model);
    let stop = StopRule::Ball { sigma: sigma_eta };
    let mut results = encode_grid(grid, &enc, GridCodec::Enumerative, stop)?;
    let mut mk = None;
    if markov {
        let (fitted, mut coded) = refine_markov(
            std::slice::from_ref(grid),
            &enc,
            vec![results],
            stop,
            MARKOV_PASSES,
        )?;
        results = coded.pop().expect("one grid");
        mk = Some(fitted);
    }
    let n = results.len().max(1) as f64;
    let avg_bits = results.iter().map(|r| r.bits).sum::<f64>() / n;
    let avg_support = support_bits_total(grid, &results, mk.as_ref())? / n;
    let estimates: Vec<Vec<f64>> = results
        .par_iter()
        .map(|r| reconstruct(&r.code, dict))
        .collect::<Result<_>>()?;
    let denoised = assemble_patches(&grid.with_data(estimates.concat())?);
    Ok((denoised, avg_bits, avg_support))
}

/// Learns a dictionary on the noisy patches, coding them inside the distortion ball.
///
/// Only the alternating stage runs: pruning judges atoms by MDL-stopped codes,
/// which use a handful of atoms, while ball-stopped codes lean on most of them.
pub fn denoising_dictionary(
    noisy: &GrayImage,
    sigma_eta: f64,
    config: &PipelineConfig,
) -> Result<(Dictionary, Vec<f64>)> {
    if !(sigma_eta > 0.0) {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {sigma_eta}"
        )));
    }
    let model = CodelengthModel::with_noise(config.delta_a, sigma_eta * sigma_eta)?;
    let grid = extract_patches(noisy, config.patch_side)?;
    let learn = LearnConfig {
        stop: StopRule::Ball { sigma: sigma_eta },
        ..config.learn.clone()
    };
    let learned = learn_dictionary(std::slice::from_ref(&grid), &learn, &model)?;
    Ok((learned.dictionary, learned.history))
}

/// Learns a dictionary on the noisy image itself and denoises it.
pub fn denoise_image(
    noisy: &GrayImage,
    sigma_eta: f64,
    config: &PipelineConfig,
    clean: Option<&GrayImage>,
) -> Result<DenoiseReport> {
    if let Some(c) = clean {
        if c.dims() != noisy.dims() {
            return Err(Error::Dimension("clean reference differs in size".into()));
        }
    }
    let (dict, history) = denoising_dictionary(noisy, sigma_eta, config)?;
    let model = CodelengthModel::with_noise(config.delta_a, sigma_eta * sigma_eta)?;
    let grid = extract_patches(noisy, config.patch_side)?;
    let (denoised, avg_bits, avg_support) =
        denoise_with_dictionary(&grid, &dict, &model, sigma_eta, config.markov)?;
    Ok(DenoiseReport {
        psnr_vs_clean: clean.map(|c| psnr(c, &denoised)).transpose()?,
        denoised,
        avg_bits_per_patch: avg_bits,
        avg_support_bits: avg_support,
        dict_size_used: dict.atom_count(),
        history,
    })
}

/// Per-pixel class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} labels for a {height}x{width} map",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Fraction of pixels whose label differs from `truth`.
    pub fn error_rate(&self, truth: &LabelMap) -> Result<f64> {
        if truth.dims() != self.dims() {
            return Err(Error::Dimension("ground truth differs in size".into()));
        }
        let wrong = self
            .labels
            .iter()
            .zip(&truth.labels)
            .filter(|(a, b)| a != b)
            .count();
        Ok(wrong as f64 / self.labels.len().max(1) as f64)
    }

    /// Gray image with class `l` of `classes` drawn at `l * 255 / (classes - 1)`.
    pub fn to_image(&self, classes: usize) -> GrayImage {
        let scale = 255.0 / (classes.max(2) - 1) as f64;
        let px = self
            .labels
            .iter()
            .map(|&l| (f64::from(l) * scale).round())
            .collect();
        GrayImage::new(self.height, self.width, px).expect("dims match")
    }

    /// Inverse of [`to_image`](Self::to_image), snapping to the nearest class.
    pub fn from_image(image: &GrayImage, classes: usize) -> Result<Self> {
        if !(2..=256).contains(&classes) {
            return Err(Error::Domain(format!(
                "need 2..=256 classes, got {classes}"
            )));
        }
        let scale = (classes - 1) as f64 / 255.0;
        let labels = image
            .pixels()
            .iter()
            .map(|&g| (g * scale).round().clamp(0.0, (classes - 1) as f64) as u8)
            .collect();
        Self::new(image.height(), image.width(), labels)
    }
}

/// 3x3 median filter with replicated borders.
pub fn median3x3(map: &LabelMap) -> LabelMap {
    let (h, w) = map.dims();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let mut win = [0u8; 9];
            let mut i = 0;
            for dr in [-1isize, 0, 1] {
                for dc in [-1isize, 0, 1] {
                    let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                    let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                    win[i] = map.get(rr, cc);
                    i += 1;
                }
            }
            win.sort_unstable();
            out.push(win[4]);
        }
    }
    LabelMap::new(h, w, out).expect("dims match")
}

/// Trained model of one texture class.
#[derive(Debug, Clone)]
pub struct ClassModel {
    pub dictionary: Dictionary,
    pub markov: Option<MarkovSupportModel>,
}

#[derive(Debug, Clone)]
pub struct SegmentationReport {
    /// Median-filtered labels.
    pub label_map: LabelMap,
    /// Labels before filtering.
    pub raw_label_map: LabelMap,
    pub error_rate: Option<f64>,
    pub raw_error_rate: Option<f64>,
    pub per_class_dict_sizes: Vec<usize>,
}

/// Learns one dictionary (and Markov model if configured) per class.
pub fn train_classes(
    training: &[Vec<GrayImage>],
    model: &CodelengthModel,
    config: &PipelineConfig,
) -> Result<Vec<ClassModel>> {
    if training.len() < 2 {
        return Err(Error::Usage(format!(
            "segmentation needs at least 2 classes, got {}",
            training.len()
        )));
    }
    training
        .iter()
        .enumerate()
        .map(|(r, images)| {
            let grids = images
                .iter()
                .map(|im| extract_patches(im, config.patch_side))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::Dimension(_) | Error::Domain(_) => {
                        Error::EmptyInput(format!("class {r}: images smaller than a patch"))
                    }
                    e => e,
                })?;
            let n: usize = grids.iter().map(PatchGrid::len).sum();
            if n < 2 {
                return Err(Error::EmptyInput(format!(
                    "class {r} has {n} training patches, need at least 2"
                )));
            }
            let Trained {
                dictionary,
                results,
                ..
            } = train_dictionary(&grids, &config.learn, model, Precision::Real)?;
            let markov = if config.markov {
                let enc = Encoder::new(&dictionary, model);
                Some(refine_markov(&grids, &enc, results, StopRule::Mdl, MARKOV_PASSES)?.0)
            } else {
                None
            };
            Ok(ClassModel { dictionary, markov })
        })
        .collect()
}

/// Labels every pixel of `mosaic` with the class giving the shortest description.
pub fn classify(
    mosaic: &GrayImage,
    classes: &[ClassModel],
    model: &CodelengthModel,
    patch_side: usize,
) -> Result<LabelMap> {
    let grid = extract_patches(mosaic, patch_side)?;
    let bits: Vec<Vec<f64>> = classes
        .iter()
        .map(|cm| {
            let enc = Encoder::new(&cm.dictionary, model);
            let codec = match &cm.markov {
                Some(mk) => GridCodec::Markov(mk),
                None => GridCodec::Enumerative,
            };
            Ok(encode_grid(&grid, &enc, codec, StopRule::Mdl)?
                .into_iter()
                .map(|r| r.bits)
                .collect())
        })
        .collect::<Result<_>>()?;
    let (gh, gw) = grid.grid_dims();
    let mut centre = vec![0u8; gh * gw];
    for (j, lab) in centre.iter_mut().enumerate() {
        let mut best = 0;
        for r in 1..classes.len() {
            if bits[r][j] < bits[best][j] {
                best = r;
            }
        }
        *lab = best as u8;
    }
    // patch centres form a gh x gw block offset by (w-1)/2; outside it, take the nearest centre
    let (h, w) = mosaic.dims();
    let off = (patch_side - 1) / 2;
    let labels = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| {
            let gr = r.saturating_sub(off).min(gh - 1);
            let gc = c.saturating_sub(off).min(gw - 1);
            centre[gr * gw + gc]
        })
        .collect();
    LabelMap::new(h, w, labels)
}

/// Trains per-class models on `training` and segments `mosaic`.
pub fn segment_textures(
    training: &[Vec<GrayImage>],
    mosaic: &GrayImage,
    config: &PipelineConfig,
    truth: Option<&LabelMap>,
) -> Result<SegmentationReport> {
    if training.len() > 256 {
        return Err(Error::Usage("at most 256 classes".into()));
    }
    let model = CodelengthModel::with_noise(config.delta_a, QUANTIZATION_NOISE_VAR)?;
    let classes = train_classes(training, &model, config)?;
    let raw = classify(mosaic, &classes, &model, config.patch_side)?;
    let filtered = median3x3(&raw);
    Ok(SegmentationReport {
        error_rate: truth.map(|t| filtered.error_rate(t)).transpose()?,
        raw_error_rate: truth.map(|t| raw.error_rate(t)).transpose()?,
        label_map: filtered,
        raw_label_map: raw,
        per_class_dict_sizes: classes.iter().map(|c| c.dictionary.atom_count()).collect(),
    })
}

/// Compression figures under non-overlapping tile accounting.
#[derive(Debug, Clone)]
pub struct BppReport {
    /// `(sum of patch bits + L(D)) / pixels`.
    pub bpp: f64,
    pub total_bits: f64,
    pub dict_bits: f64,
    pub pixels: usize,
    pub patches: usize,
    pub atoms: usize,
    pub history: Vec<f64>,
}

/// Learns a dictionary on the tiles of `images` and reports bits per pixel.
pub fn compression_stats(images: &[GrayImage], config: &PipelineConfig) -> Result<BppReport> {
    if images.is_empty() {
        return Err(Error::EmptyInput("no images".into()));
    }
    let model = CodelengthModel::with_noise(config.delta_a, QUANTIZATION_NOISE_VAR)?;
    let grids = images
        .iter()
        .map(|im| extract_tiles(im, config.patch_side))
        .collect::<Result<Vec<_>>>()?;
    // the decoder only ever sees the stored dictionary
    let trained = train_dictionary(&grids, &config.learn, &model, Precision::Stored)?;
    let history = trained.history;
    let dict = &trained.dictionary;
    let mut results = trained.results;
    if config.markov {
        let enc = Encoder::new(dict, &model);
        results = refine_markov(&grids, &enc, results, StopRule::Mdl, MARKOV_PASSES)?.1;
    }
    let patches: usize = grids.iter().map(PatchGrid::len).sum();
    let pixels = patches * dict.dim();
    if pixels == 0 {
        return Err(Error::EmptyInput("images smaller than one tile".into()));
    }
    let dict_bits = dictionary_codelength(dict.dim(), dict.atom_count(), patches);
    let total_bits = results.iter().flatten().map(|r| r.bits).sum::<f64>() + dict_bits;
    Ok(BppReport {
        bpp: total_bits / pixels as f64,
        total_bits,
        dict_bits,
        pixels,
        patches,
        atoms: dict.atom_count(),
        history,
    })
}
