//! Seeded single-threaded training loop over a dataset mixture.

use std::fmt::Write as _;

use log::{debug, info};

use crate::codec::decode_robust;
use crate::data::{mixture_next, MixtureConfig};
use crate::error::Result;
use crate::model::{train_step, Model, ModelConfig, ModelParams, PreparedSample};
use crate::tensor::optim::{AdamConfig, AdamState};
use crate::types::OutputType;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Seeds parameter initialization; the mixture carries its own seed.
    pub seed: u64,
    pub adam: AdamConfig,
    /// Run a greedy-generation probe every this many steps (0 disables).
    pub probe_every: usize,
    /// Scanpath samples decoded per probe.
    pub probe_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 200, batch_size: 8, seed: 0, adam: AdamConfig::default(), probe_every: 10, probe_samples: 1, }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    /// Valid fraction of the most recent probe, if any probe has run.
    pub valid_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
    /// Validity of every probe generation, in order.
    pub generations: Vec<bool>,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        log_csv(&self.log)
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut s = String::from("step,loss,valid_rate\n");
    for r in rows {
        let v = r.valid_rate.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", r.step, r.loss, v);
    }
    s
}

pub fn train(model_cfg: &ModelConfig, mixture: &MixtureConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = ModelParams::init(model_cfg, cfg.seed)?;
    train_from(params, mixture, cfg)
}

/// Continues training from `params`; `cfg.seed` is unused here.
pub fn train_from(params: ModelParams, mixture: &MixtureConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(params, mixture, cfg, &mut |_, _| Ok(()))
}

/// As [`train_from`], calling `after_step(step, params)` after every update.
pub fn train_with(
    mut params: ModelParams,
    mixture: &MixtureConfig,
    cfg: &TrainConfig,
    after_step: &mut dyn FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    let model_cfg = params.config().clone();
    let prepared: Vec<Vec<PreparedSample>> = mixture
        .handles
        .iter()
        .map(|h| h.samples().iter().map(|s| PreparedSample::new(&model_cfg, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let probes: Vec<(usize, usize)> = mixture
        .handles
        .iter()
        .enumerate()
        .filter(|(_, h)| h.output_type() == OutputType::Scanpath)
        .flat_map(|(hi, h)| (0..h.len()).map(move |si| (hi, si)))
        .collect();

    let mut rng = mixture.rng();
    let mut state = AdamState::new(params.tensors());
    let mut log = Vec::with_capacity(cfg.steps);
    let mut generations = Vec::new();
    let mut last_rate = None;
    let mut next_probe = 0;
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size.max(1) {
            let d = mixture_next(mixture, &mut rng)?;
            batch.push(prepared[d.handle][d.index].clone());
        }
        let loss = train_step(&batch, &mut params, &mut state, &cfg.adam)?;
        if cfg.probe_every > 0 && step % cfg.probe_every == 0 && !probes.is_empty() {
            let model = Model::new(params.clone());
            let mut valid = 0;
            for _ in 0..cfg.probe_samples.max(1) {
                let (hi, si) = probes[next_probe % probes.len()];
                next_probe += 1;
                let sample = &mixture.handles[hi].samples()[si];
                let raw = model.generate_scanpath(&sample.image, &sample.prompt, model_cfg.max_output_tokens)?;
                let ok = decode_robust(&raw, sample.image.frame()).is_valid();
                debug!("step {step} probe: {raw}");
                generations.push(ok);
                valid += ok as usize;
            }
            last_rate = Some(valid as f64 / cfg.probe_samples.max(1) as f64);
        }
        if step == 1 || step % 50 == 0 || step == cfg.steps {
            info!("step {step}: loss {loss:.5}");
        }
        log.push(LogRow { step, loss, valid_rate: last_rate });
        after_step(step, &params)?;
    }
    Ok(TrainOutcome { params, log, generations })
}
