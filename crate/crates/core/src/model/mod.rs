//! Reference encoder/decoder model with heatmap, scanpath and rating heads.

pub mod config;
pub mod net;
pub mod params;
pub mod vocab;

pub use config::{LossWeights, ModelConfig};
pub use net::{combined_loss, Bound};
pub use params::ModelParams;

use crate::codec::{encode_scanpath, TokenString};
use crate::error::{Error, Result};
use crate::tensor::optim::{adam_step, AdamConfig, AdamState};
use crate::tensor::{Tape, Tensor, Var};
use crate::types::{GrayMap, PromptSpec, RgbImage, Sample, Target};

#[derive(Debug, Clone)]
pub enum PreparedTarget {
    /// Ground truth over the unpadded `width × height` region.
    Heatmap { gt: Tensor, width: usize, height: usize },
    Scanpath(TokenString),
    Rating(f64),
}

/// A sample converted to model inputs: padded image, prompt ids, encoded target.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub image: RgbImage,
    pub prompt_ids: Vec<usize>,
    pub target: PreparedTarget,
}

impl PreparedSample {
    pub fn new(cfg: &ModelConfig, sample: &Sample) -> Result<Self> {
        let image = net::prepare_image(cfg, &sample.image)?;
        let prompt_ids = vocab::tokenize_prompt(&sample.prompt)?;
        let target = match &sample.target {
            Target::Heatmap(map) => PreparedTarget::Heatmap {
                gt: Tensor::new(&[1, map.height(), map.width()], map.values().to_vec())?,
                width: map.width(),
                height: map.height(),
            },
            Target::Scanpath(path) => PreparedTarget::Scanpath(encode_scanpath(path)?),
            Target::Rating(r) => PreparedTarget::Rating(r.score()),
        };
        Ok(PreparedSample { image, prompt_ids, target })
    }
}

/// Weighted loss of one sample; only the head matching its target contributes.
pub fn sample_loss(tape: &mut Tape, b: &Bound, sample: &PreparedSample) -> Result<Var> {
    let w = b.config().loss_weights;
    let fused = net::encode_inputs(tape, b, &sample.image, &sample.prompt_ids)?;
    match &sample.target {
        PreparedTarget::Heatmap { gt, width, height } => {
            let map = net::heatmap_head(tape, b, fused)?;
            let map = tape.crop(map, *height, *width)?;
            let gt = tape.constant(gt.clone());
            let l = tape.squared_error(map, gt)?;
            tape.scale(l, w.heat)
        }
        PreparedTarget::Scanpath(tokens) => {
            let l = net::scanpath_teacher_loss(tape, b, fused, tokens)?;
            tape.scale(l, w.seq)
        }
        PreparedTarget::Rating(score) => {
            let y = net::rating_head(tape, b, fused)?;
            let t = tape.constant(Tensor::new(&[1, 1], vec![*score])?);
            let l = tape.squared_error(y, t)?;
            tape.scale(l, w.score)
        }
    }
}

/// Mean of [`sample_loss`] over the batch.
pub fn batch_loss(tape: &mut Tape, b: &Bound, batch: &[PreparedSample]) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = sample_loss(tape, b, &batch[0])?;
    for s in &batch[1..] {
        let l = sample_loss(tape, b, s)?;
        total = tape.add(total, l)?;
    }
    tape.scale(total, 1.0 / batch.len() as f64)
}

/// Forward, backward and one optimizer update; returns the batch loss before the update.
pub fn train_step(
    batch: &[PreparedSample],
    params: &mut ModelParams,
    state: &mut AdamState,
    adam: &AdamConfig,
) -> Result<f64> {
    let (loss, grads) = {
        let mut tape = Tape::new();
        let b = Bound::new(&mut tape, params, true);
        let loss = batch_loss(&mut tape, &b, batch)?;
        let g = tape.backward(loss)?;
        let grads: Vec<Tensor> = b.vars().iter().map(|&v| g.wrt(v)).collect();
        (tape.value(loss).item(), grads)
    };
    adam_step(params.tensors_mut(), &grads, state, adam)?;
    Ok(loss)
}

/// Inference over a frozen parameter snapshot.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
}

impl Model {
    pub fn new(params: ModelParams) -> Self {
        Model { params }
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn encode<'a>(&'a self, tape: &mut Tape, image: &RgbImage, prompt: &PromptSpec) -> Result<(Bound<'a>, Var)> {
        let b = Bound::new(tape, &self.params, false);
        let img = net::prepare_image(self.config(), image)?;
        let ids = vocab::tokenize_prompt(prompt)?;
        let fused = net::encode_inputs(tape, &b, &img, &ids)?;
        Ok((b, fused))
    }

    /// Heatmap cropped to the image's own size.
    pub fn predict_heatmap(&self, image: &RgbImage, prompt: &PromptSpec) -> Result<GrayMap> {
        let mut tape = Tape::new();
        let (b, fused) = self.encode(&mut tape, image, prompt)?;
        let map = net::heatmap_head(&mut tape, &b, fused)?;
        net::map_from_output(tape.value(map), image.width(), image.height())
    }

    pub fn predict_rating(&self, image: &RgbImage, prompt: &PromptSpec) -> Result<f64> {
        let mut tape = Tape::new();
        let (b, fused) = self.encode(&mut tape, image, prompt)?;
        let y = net::rating_head(&mut tape, &b, fused)?;
        Ok(tape.value(y).item())
    }

    /// Raw greedy decoder output, to be read with the tolerant codec decoder.
    pub fn generate_scanpath(&self, image: &RgbImage, prompt: &PromptSpec, max_tokens: usize) -> Result<String> {
        let mut tape = Tape::new();
        let (b, fused) = self.encode(&mut tape, image, prompt)?;
        net::scanpath_generate(&mut tape, &b, fused, max_tokens)
    }

    /// Decoder logits `[prefix.len(), vocab]` given a token-id prefix.
    pub fn decoder_logits(&self, image: &RgbImage, prompt: &PromptSpec, prefix: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (b, fused) = self.encode(&mut tape, image, prompt)?;
        let logits = net::decoder_logits(&mut tape, &b, fused, prefix)?;
        Ok(tape.value(logits).clone())
    }

    pub fn fused_tokens(&self, image: &RgbImage, prompt: &PromptSpec) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (_, fused) = self.encode(&mut tape, image, prompt)?;
        Ok(tape.value(fused).clone())
    }
}
