//! `acube`: train, evaluate and run A-CubeNet restoration models.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use acubenet::harness::{self, Checkpoint, TrainConfig};
use acubenet::imaging::{self, ColorSpace, Degradation, DegradationSpec, ImageBuffer};
use acubenet::model::{format_thousands, Model, Task};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

/// Largest relative gradient error `gradcheck` accepts.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "acube", version, about = "A-CubeNet image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Sr,
    Denoise,
    Deblock,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model (Adam optimizer with step-halving learning rate).
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Image file or directory of PGM/PPM/PNG images.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of a fresh model.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Degrade every image, restore it, and print a PSNR/SSIM table.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        scale: Option<usize>,
        #[arg(long)]
        quality: Option<u8>,
        /// Seed of the evaluation noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the table here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Restore one image with a trained model.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the exact parameter count and its rounding to thousands.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference check of every parameter gradient.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// Input height and width.
        #[arg(long, default_value_t = 8)]
        size: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
    /// Apply a degradation such as `awgn:30,seed=1`, `jpeg:10` or `bicubic_down:2`.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        spec: String,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, data, out, resume } => {
            let cfg = TrainConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let images: Vec<ImageBuffer> = harness::load_dataset(&data)?.into_iter().map(|(_, im)| im).collect();
            let mut state = match resume {
                Some(path) => {
                    let mut state = Checkpoint::load(&path)?;
                    if state.config.model != cfg.model {
                        bail!("{} was trained with a different model config", path.display());
                    }
                    state.config = cfg;
                    state
                }
                None => Checkpoint::initial(&cfg)?,
            };
            let stdout = std::io::stdout();
            let mut log = stdout.lock();
            harness::train(&mut state, &images, Some(&out), &mut log)?;
            writeln!(log, "wrote {} after {} iterations", out.display(), state.iteration)?;
        }
        Command::Eval { ckpt, data, task, sigma, scale, quality, seed, table } => {
            let state = Checkpoint::load(&ckpt)?;
            let kind = match task {
                TaskArg::Sr => Degradation::BicubicDown(scale.context("--scale is required for sr")?),
                TaskArg::Denoise => Degradation::Awgn(sigma.context("--sigma is required for denoise")?),
                TaskArg::Deblock => Degradation::Jpeg(quality.context("--quality is required for deblock")?),
            };
            let spec = DegradationSpec::new(kind, seed)?;
            let images = harness::load_dataset(&data)?;
            let metrics = harness::evaluate(&state.model, &images, &spec)?;
            print!("{metrics}");
            if let Some(path) = table {
                std::fs::write(&path, metrics.to_tsv()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Infer { ckpt, input, out } => {
            let model = Checkpoint::load(&ckpt)?.model;
            let img = imaging::load_image(&input)?;
            let restored = infer_image(&model, &img)?;
            imaging::save_image(&restored, &out)?;
        }
        Command::Params { config } => {
            let cfg = TrainConfig::load(&config)?;
            let n = Model::build(&cfg.model, cfg.seed)?.count_params();
            println!("{n} ({})", format_thousands(n));
        }
        Command::Gradcheck { config, size, step } => {
            let cfg = TrainConfig::load(&config)?;
            let err = harness::model_gradcheck(&cfg.model, cfg.seed, size, step)?;
            println!("max_rel_error={err:e}");
            if err >= GRADCHECK_TOLERANCE {
                eprintln!("gradient check failed: {err:e} >= {GRADCHECK_TOLERANCE:e}");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Degrade { input, out, spec } => {
            let spec: DegradationSpec = spec.parse()?;
            let img = imaging::load_image(&input)?;
            let img = match spec.kind {
                Degradation::Jpeg(_) if img.colorspace() == ColorSpace::Rgb => imaging::rgb_to_y(&img)?,
                _ => img,
            };
            imaging::save_image(&spec.degrade_image(&img, 0)?, &out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Runs the model on an image file's pixels and returns an image in the
/// input's layout: gray in, gray out.
fn infer_image(model: &Model, img: &ImageBuffer) -> Result<ImageBuffer> {
    let task = model.config.task;
    let prepared = harness::prepare_for_task(img, task)?;
    let out = model.infer(&prepared.to_tensor())?;
    let restored = ImageBuffer::from_tensor(&out, 0, prepared.colorspace())?.clipped();
    Ok(match (img.colorspace(), restored.colorspace(), task) {
        (ColorSpace::Gray, ColorSpace::Rgb, Task::SuperResolution { .. }) => {
            let n = restored.channels() as f64;
            ImageBuffer::from_fn(restored.width(), restored.height(), ColorSpace::Gray, |_, y, x| {
                (0..restored.channels()).map(|c| restored.get(c, y, x)).sum::<f64>() / n
            })
        }
        _ => restored,
    })
}
