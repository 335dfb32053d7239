//! `mdlsparse` command line: learn, encode, denoise, segment, stats.
//!
//! Reports go to stdout as `key=value` lines. Exit codes: 0 success, 1 usage
//! or invalid input, 2 I/O or file format, 3 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codelen::{dictionary_codelength, CodelengthModel, Hyperparams, QUANTIZATION_NOISE_VAR};
use crate::coding::{encode_grid, EncodeResult, Encoder, GridCodec, StopRule};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::learning::{train_dictionary, LearnConfig, Loss, Precision};
use crate::model_file::ModelFile;
use crate::patches::{extract_patches, extract_tiles, PatchGrid};
use crate::pipelines::{
    compression_stats, denoise_image, denoise_with_dictionary, refine_markov, segment_textures,
    LabelMap, PipelineConfig, MARKOV_PASSES,
};
use crate::{metrics, pgm};

pub const THREADS_ENV: &str = "MDLSPARSE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "mdlsparse",
    version,
    about = "MDL sparse coding and dictionary learning for 8-bit images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a dictionary on the tiles of one or more images and save it.
    Learn(LearnCmd),
    /// Encode an image with a saved model and report its codelength.
    Encode(EncodeCmd),
    /// Denoise an image corrupted by Gaussian noise of known level.
    Denoise(DenoiseCmd),
    /// Segment a texture mosaic given training textures per class.
    Segment(SegmentCmd),
    /// Learn on a set of images and report bits per pixel.
    Stats(StatsCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Huber,
    L2,
}

#[derive(Debug, Args)]
struct LearnOpts {
    /// Initial number of atoms.
    #[arg(long, default_value_t = 64)]
    pmax: usize,
    /// Patch side w (patches are w x w).
    #[arg(long, default_value_t = 8)]
    patch: usize,
    /// Coefficient quantization step.
    #[arg(long = "delta-a", default_value_t = 0.5)]
    delta_a: f64,
    /// Relative codelength change that ends learning.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Maximum number of coding / update rounds.
    #[arg(long = "max-iters", default_value_t = 10)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = LossArg::Huber)]
    loss: LossArg,
}

impl LearnOpts {
    fn learn_config(&self) -> Result<LearnConfig> {
        if self.patch == 0 {
            return Err(Error::Usage("--patch must be positive".into()));
        }
        if !(self.delta_a > 0.0 && self.delta_a.is_finite()) {
            return Err(Error::Usage("--delta-a must be positive".into()));
        }
        let cfg = LearnConfig {
            p_max: self.pmax,
            max_outer_iters: self.max_iters,
            convergence_tol: self.tol,
            seed: self.seed,
            loss: match self.loss {
                LossArg::Huber => Loss::Huber,
                LossArg::L2 => Loss::L2,
            },
            ..LearnConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn pipeline(&self, markov: bool) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            patch_side: self.patch,
            delta_a: self.delta_a,
            learn: self.learn_config()?,
            markov,
        })
    }
}

#[derive(Debug, Args)]
struct LearnCmd {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Model file to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Also fit and store a Markov support table.
    #[arg(long)]
    markov: bool,
    #[command(flatten)]
    opts: LearnOpts,
}

#[derive(Debug, Args)]
struct EncodeCmd {
    image: PathBuf,
    #[arg(short, long)]
    model: PathBuf,
    /// Code supports with the Markov table (stored, or fitted on this image).
    #[arg(long)]
    markov: bool,
    /// Print one line per tile.
    #[arg(long = "per-patch")]
    per_patch: bool,
}

#[derive(Debug, Args)]
struct DenoiseCmd {
    noisy: PathBuf,
    /// Noise standard deviation (known, never estimated).
    #[arg(long)]
    sigma: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Use this model's dictionary instead of learning one on the noisy image.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    markov: bool,
    /// Clean reference for a PSNR report.
    #[arg(long)]
    clean: Option<PathBuf>,
    #[command(flatten)]
    opts: LearnOpts,
}

#[derive(Debug, Args)]
struct SegmentCmd {
    mosaic: PathBuf,
    /// Training textures of one class: a PGM file or a directory of PGM files. Repeat per class.
    #[arg(long = "class", required = true)]
    classes: Vec<PathBuf>,
    /// Label map to write.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    markov: bool,
    /// Ground-truth label map (gray level l * 255 / (c - 1) for class l).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    opts: LearnOpts,
}

#[derive(Debug, Args)]
struct StatsCmd {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    markov: bool,
    #[command(flatten)]
    opts: LearnOpts,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format(_) => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    // a second call in the same process (tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Learn(c) => cmd_learn(&c, out),
        Command::Encode(c) => cmd_encode(&c, out),
        Command::Denoise(c) => cmd_denoise(&c, out),
        Command::Segment(c) => cmd_segment(&c, out),
        Command::Stats(c) => cmd_stats(&c, out),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "mdlsparse: {e}");
            exit_code(&e)
        }
    }
}

fn read_images(paths: &[PathBuf]) -> Result<Vec<GrayImage>> {
    paths.iter().map(read_pgm).collect()
}

fn read_pgm(path: &PathBuf) -> Result<GrayImage> {
    pgm::read(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// A single file, or every `.pgm` file of a directory in name order.
fn class_images(path: &Path) -> Result<Vec<GrayImage>> {
    if !path.is_dir() {
        return Ok(vec![read_pgm(&path.to_path_buf())?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")));
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no .pgm files in {}",
            path.display()
        )));
    }
    read_images(&files)
}

fn tiles_of(images: &[GrayImage], w: usize) -> Result<Vec<PatchGrid>> {
    images.iter().map(|im| extract_tiles(im, w)).collect()
}

fn avg(results: &[Vec<EncodeResult>]) -> f64 {
    let n = results.iter().map(Vec::len).sum::<usize>().max(1);
    results.iter().flatten().map(|r| r.bits).sum::<f64>() / n as f64
}

fn cmd_learn(c: &LearnCmd, out: &mut dyn Write) -> Result<()> {
    let cfg = c.opts.learn_config()?;
    let images = read_images(&c.inputs)?;
    let grids = tiles_of(&images, c.opts.patch)?;
    let hyper = Hyperparams::with_defaults(c.opts.delta_a, QUANTIZATION_NOISE_VAR);
    let model = CodelengthModel::new(hyper)?;
    let trained = train_dictionary(&grids, &cfg, &model, Precision::Stored)?;
    let n: usize = grids.iter().map(PatchGrid::len).sum();
    if n < cfg.p_max {
        writeln!(
            out,
            "warning=fewer training patches ({n}) than initial atoms ({})",
            cfg.p_max
        )?;
    }
    for (i, b) in trained.history.iter().enumerate() {
        writeln!(out, "iter={i} avg_bits_per_patch={b:.6}")?;
    }
    let markov = if c.markov {
        let enc = Encoder::new(&trained.dictionary, &model);
        let (mk, res) = refine_markov(
            &grids,
            &enc,
            trained.results.clone(),
            StopRule::Mdl,
            MARKOV_PASSES,
        )?;
        writeln!(out, "markov_avg_bits_per_patch={:.6}", avg(&res))?;
        Some(mk)
    } else {
        None
    };
    let file = ModelFile::new(c.opts.patch, hyper, &trained.dictionary, markov)?;
    file.save(&c.output)?;
    writeln!(out, "patches={n}")?;
    writeln!(out, "atoms={}", trained.dictionary.atom_count())?;
    writeln!(out, "pruned={}", trained.removed_atoms)?;
    writeln!(out, "model={}", c.output.display())?;
    Ok(())
}

fn cmd_encode(c: &EncodeCmd, out: &mut dyn Write) -> Result<()> {
    let file = ModelFile::load(&c.model)?;
    let image = read_pgm(&c.image)?;
    let model = file.codelength_model()?;
    let dict = file.dictionary();
    let grid = extract_tiles(&image, file.patch_side())?;
    let enc = Encoder::new(dict, &model);
    let mut results = encode_grid(&grid, &enc, GridCodec::Enumerative, StopRule::Mdl)?;
    if c.markov {
        match file.markov() {
            Some(mk) => results = encode_grid(&grid, &enc, GridCodec::Markov(mk), StopRule::Mdl)?,
            None => {
                let grids = std::slice::from_ref(&grid);
                results = refine_markov(grids, &enc, vec![results], StopRule::Mdl, MARKOV_PASSES)?
                    .1
                    .pop()
                    .expect("one grid");
            }
        }
    }
    let total: f64 = results.iter().map(|r| r.bits).sum();
    let pixels = grid.len() * grid.dim();
    if c.per_patch {
        for (j, r) in results.iter().enumerate() {
            let (row, col) = grid.positions()[j];
            writeln!(
                out,
                "patch={j} row={row} col={col} bits={:.6} support={}",
                r.bits,
                r.code.gamma()
            )?;
        }
    }
    writeln!(out, "patches={}", grid.len())?;
    writeln!(out, "total_bits={total:.6}")?;
    writeln!(
        out,
        "bits_per_patch={:.6}",
        total / grid.len().max(1) as f64
    )?;
    writeln!(out, "bpp={:.6}", total / pixels.max(1) as f64)?;
    writeln!(
        out,
        "dict_bits={:.6}",
        dictionary_codelength(dict.dim(), dict.atom_count(), dict.sample_count())
    )?;
    let mut hist = vec![0usize; dict.atom_count() + 1];
    for r in &results {
        hist[r.code.gamma()] += 1;
    }
    for (g, &k) in hist.iter().enumerate().filter(|(_, &k)| k > 0) {
        writeln!(out, "support_hist_{g}={k}")?;
    }
    Ok(())
}

fn cmd_denoise(c: &DenoiseCmd, out: &mut dyn Write) -> Result<()> {
    if !(c.sigma > 0.0 && c.sigma.is_finite()) {
        return Err(Error::Usage("--sigma must be positive".into()));
    }
    let noisy = read_pgm(&c.noisy)?;
    let clean = c.clean.as_ref().map(read_pgm).transpose()?;
    let (denoised, bits, support, atoms) = match &c.model {
        Some(path) => {
            let file = ModelFile::load(path)?;
            let hyper = Hyperparams {
                sigma2: c.sigma * c.sigma,
                ..*file.hyper()
            };
            let model = CodelengthModel::new(hyper)?;
            let grid = extract_patches(&noisy, file.patch_side())?;
            let (img, b, s) =
                denoise_with_dictionary(&grid, file.dictionary(), &model, c.sigma, c.markov)?;
            (img, b, s, file.dictionary().atom_count())
        }
        None => {
            let rep = denoise_image(&noisy, c.sigma, &c.opts.pipeline(c.markov)?, None)?;
            for (i, b) in rep.history.iter().enumerate() {
                writeln!(out, "iter={i} avg_bits_per_patch={b:.6}")?;
            }
            (
                rep.denoised,
                rep.avg_bits_per_patch,
                rep.avg_support_bits,
                rep.dict_size_used,
            )
        }
    };
    pgm::write(&c.output, &denoised)?;
    writeln!(out, "atoms={atoms}")?;
    writeln!(out, "avg_bits_per_patch={bits:.6}")?;
    writeln!(out, "avg_support_bits={support:.6}")?;
    if let Some(cl) = &clean {
        writeln!(out, "psnr_noisy={:.6}", metrics::psnr(cl, &noisy)?)?;
        writeln!(out, "psnr={:.6}", metrics::psnr(cl, &denoised)?)?;
    }
    writeln!(out, "output={}", c.output.display())?;
    Ok(())
}

fn cmd_segment(c: &SegmentCmd, out: &mut dyn Write) -> Result<()> {
    if c.classes.len() < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 --class entries, got {}",
            c.classes.len()
        )));
    }
    let training = c
        .classes
        .iter()
        .map(|p| class_images(p))
        .collect::<Result<Vec<_>>>()?;
    let mosaic = read_pgm(&c.mosaic)?;
    let truth = match &c.truth {
        Some(p) => {
            let t = LabelMap::from_image(&read_pgm(p)?, c.classes.len())?;
            if t.dims() != mosaic.dims() {
                return Err(Error::Dimension(
                    "truth map and mosaic differ in size".into(),
                ));
            }
            Some(t)
        }
        None => None,
    };
    let rep = segment_textures(
        &training,
        &mosaic,
        &c.opts.pipeline(c.markov)?,
        truth.as_ref(),
    )?;
    pgm::write(&c.output, &rep.label_map.to_image(c.classes.len()))?;
    for (r, p) in rep.per_class_dict_sizes.iter().enumerate() {
        writeln!(out, "class_{r}_atoms={p}")?;
    }
    if let (Some(e), Some(raw)) = (rep.error_rate, rep.raw_error_rate) {
        writeln!(out, "error_rate_unfiltered={raw:.6}")?;
        writeln!(out, "error_rate={e:.6}")?;
    }
    writeln!(out, "output={}", c.output.display())?;
    Ok(())
}

fn cmd_stats(c: &StatsCmd, out: &mut dyn Write) -> Result<()> {
    let images = read_images(&c.inputs)?;
    let rep = compression_stats(&images, &c.opts.pipeline(c.markov)?)?;
    for (i, b) in rep.history.iter().enumerate() {
        writeln!(out, "iter={i} avg_bits_per_patch={b:.6}")?;
    }
    writeln!(out, "patches={}", rep.patches)?;
    writeln!(out, "pixels={}", rep.pixels)?;
    writeln!(out, "atoms={}", rep.atoms)?;
    writeln!(out, "dict_bits={:.6}", rep.dict_bits)?;
    writeln!(out, "total_bits={:.6}", rep.total_bits)?;
    writeln!(out, "bpp={:.6}", rep.bpp)?;
    Ok(())
}
