use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use uniar::codec::decode_robust;
use uniar::data::io::{read_manifest, read_ppm, write_pgm, write_ppm, write_scanpaths};
use uniar::data::{chi_square_uniform, draw_histogram, synthetic_handles, DatasetHandle, MixtureConfig};
use uniar::model::{Model, ModelConfig, ModelParams};
use uniar::train::{train_with, TrainConfig};
use uniar::{Error, InputType, OutputType, PromptSpec, RatingSample, RgbImage, Sample, Target};

use crate::overlay::render_overlay;
use crate::{usage, CliResult};

pub const CHECKPOINT: &str = "model.ckpt";
pub const LOG: &str = "train_log.csv";
pub const CONFIG: &str = "config.txt";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model config (`key = value` lines); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest (`samples.jsonl`); repeatable.
    #[arg(long, required_unless_present = "synthetic")]
    data: Vec<PathBuf>,
    /// Train on generated saliency, scanpath and rating tasks.
    #[arg(long, conflicts_with = "data")]
    synthetic: bool,
    /// Total synthetic samples, split over the three tasks.
    #[arg(long, default_value_t = 64, requires = "synthetic")]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Seeds initialization and synthetic data; the mixture uses seed + 1.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    /// Greedy-decode one scanpath sample every N steps (0 disables).
    #[arg(long, default_value_t = 10)]
    probe_every: usize,
    /// Also write `step-NNNNNN.ckpt` every N steps (0: final checkpoint only).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Output directory for checkpoints, config and log.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Model config; defaults to `config.txt` beside the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input image (binary PPM).
    #[arg(long)]
    image: PathBuf,
    /// e.g. `INPUT_TYPE: natural image OUTPUT_TYPE: scanpath`.
    #[arg(long)]
    prompt: String,
    /// PGM for heatmaps, JSONL for scanpaths, text for scores.
    #[arg(long)]
    out: Option<PathBuf>,
    /// PPM with the predicted fixation order (scanpath prompts only).
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    /// Dataset manifest; repeatable.
    #[arg(long, required_unless_present = "sizes")]
    data: Vec<PathBuf>,
    /// Comma-separated handle sizes of a placeholder mixture, e.g. `1000,1,1`.
    #[arg(long, conflicts_with = "data", value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> CliResult<ModelConfig> {
    let cfg = match path {
        Some(p) => ModelConfig::load(p)?,
        None => ModelConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_handles(manifests: &[PathBuf]) -> CliResult<Vec<DatasetHandle>> {
    let mut handles = Vec::new();
    for m in manifests {
        handles.extend(read_manifest(m)?);
    }
    Ok(handles)
}

pub fn train(a: TrainArgs) -> CliResult<String> {
    if a.steps == 0 || a.batch == 0 {
        return Err(usage("--steps and --batch must be positive"));
    }
    if !(a.lr.is_finite() && a.lr > 0.0) {
        return Err(usage("--lr must be a positive number"));
    }
    let model_cfg = load_config(a.config.as_deref())?;
    let handles = if a.synthetic { synthetic_handles(a.seed, a.samples)? } else { load_handles(&a.data)? };
    let mixture = MixtureConfig::new(handles, a.seed.wrapping_add(1))?;
    let mut cfg = TrainConfig { steps: a.steps, batch_size: a.batch, seed: a.seed, probe_every: a.probe_every, probe_samples: 1, ..Default::default() };
    cfg.adam.lr = a.lr;

    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join(CONFIG), model_cfg.to_text())?;
    info!("training {} steps on {} handles", a.steps, mixture.handles.len());
    let out_dir = a.out.clone();
    let every = a.checkpoint_every;
    let mut hook = |step: usize, p: &ModelParams| {
        if every > 0 && step.is_multiple_of(every) {
            p.save(&out_dir.join(format!("step-{step:06}.ckpt")))?;
        }
        Ok(())
    };
    let params = ModelParams::init(&model_cfg, cfg.seed)?;
    let outcome = train_with(params, &mixture, &cfg, &mut hook)?;
    outcome.params.save(&a.out.join(CHECKPOINT))?;
    fs::write(a.out.join(LOG), outcome.log_csv())?;

    let first = outcome.log.first().map_or(f64::NAN, |r| r.loss);
    let last = outcome.log.last().map_or(f64::NAN, |r| r.loss);
    if !last.is_finite() {
        return Err(Error::NonFinite { op: "training loss" }.into());
    }
    let mut s = format!("steps {}  loss {first:.5} -> {last:.5}\n", a.steps);
    if let Some(v) = outcome.log.last().and_then(|r| r.valid_rate) {
        let _ = writeln!(s, "last probe valid-rate {v}");
    }
    let _ = writeln!(s, "wrote {}", a.out.display());
    Ok(s)
}

pub fn predict(a: PredictArgs) -> CliResult<String> {
    let config_path = a.config.clone().or_else(|| {
        let p = a.checkpoint.parent()?.join(CONFIG);
        p.is_file().then_some(p)
    });
    let model_cfg = load_config(config_path.as_deref())?;
    let model = Model::new(ModelParams::load(&model_cfg, &a.checkpoint)?);
    let image = read_ppm(&a.image)?;
    let prompt = PromptSpec::parse(&a.prompt)?;
    if a.overlay.is_some() && prompt.output_type() != OutputType::Scanpath {
        return Err(usage("--overlay needs a scanpath prompt"));
    }

    let mut s = String::new();
    match prompt.output_type() {
        OutputType::Scanpath => {
            let raw = model.generate_scanpath(&image, &prompt, a.max_tokens.unwrap_or(model_cfg.max_output_tokens))?;
            let _ = writeln!(s, "{raw}");
            match decode_robust(&raw, image.frame()).scanpath() {
                Some(path) => {
                    if let Some(out) = &a.out {
                        write_scanpaths(out, &[(path.clone(), prompt.clone())])?;
                    }
                    if let Some(ov) = &a.overlay {
                        write_ppm(ov, &render_overlay(&image, path)?)?;
                    }
                }
                None => s.push_str("INVALID\n"),
            }
        }
        OutputType::AestheticsScore => {
            let score = model.predict_rating(&image, &prompt)?;
            let _ = writeln!(s, "{score}");
            if let Some(out) = &a.out {
                fs::write(out, format!("{score}\n"))?;
            }
        }
        _ => {
            let map = model.predict_heatmap(&image, &prompt)?;
            let out = a.out.as_ref().ok_or_else(|| usage("heatmap prompts need --out"))?;
            write_pgm(out, &map)?;
            let _ = writeln!(s, "wrote {}", out.display());
        }
    }
    Ok(s)
}

/// Handles of the requested sizes holding identical 2×2 rating samples.
fn placeholder_handles(sizes: &[usize]) -> CliResult<Vec<DatasetHandle>> {
    let image = RgbImage::new(2, 2, vec![0.5; 12])?;
    let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::AestheticsScore);
    let sample = Sample::new(image, prompt, Target::Rating(RatingSample::new(0.5)?))?;
    sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let h = DatasetHandle::new(format!("h{i}"), InputType::NaturalImage, OutputType::AestheticsScore, vec![sample.clone(); n])?;
            Ok(h)
        })
        .collect()
}

pub fn mixture_check(a: MixtureArgs) -> CliResult<String> {
    let handles = if a.sizes.is_empty() { load_handles(&a.data)? } else { placeholder_handles(&a.sizes)? };
    let mixture = MixtureConfig::new(handles, a.seed)?;
    let counts = draw_histogram(&mixture, a.draws)?;
    let (stat, p) = chi_square_uniform(&counts)?;
    let expected = a.draws as f64 / counts.len() as f64;
    let mut csv = String::from("handle,name,size,count,expected\n");
    for (i, (h, c)) in mixture.handles.iter().zip(&counts).enumerate() {
        let _ = writeln!(csv, "{i},{},{},{c},{expected}", h.name().replace(',', ";"), h.len());
    }
    if let Some(out) = &a.out {
        fs::write(out, &csv)?;
    }
    eprintln!("chi-square {stat:.4} on {} degrees of freedom, p = {p:.6}", counts.len() - 1);
    Ok(csv)
}
