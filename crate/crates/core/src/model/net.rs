//! Forward computations of the encoder, the decoder and the two dense heads.

use super::config::{LossWeights, ModelConfig};
use super::params::{upsample_stages, ModelParams, RATING_CONVS};
use crate::codec::{Token, TokenString};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};
use crate::types::{GrayMap, RgbImage};

const MASKED: f64 = -1e9;

/// Model parameters registered on a tape.
pub struct Bound<'a> {
    params: &'a ModelParams,
    vars: Vec<Var>,
}

impl<'a> Bound<'a> {
    pub fn new(tape: &mut Tape, params: &'a ModelParams, trainable: bool) -> Self {
        let vars = params.tensors().iter().map(|t| tape.leaf(t.clone(), trainable)).collect();
        Bound { params, vars }
    }

    /// Uses already-registered variables, one per parameter in order.
    pub fn from_vars(params: &'a ModelParams, vars: Vec<Var>) -> Result<Self> {
        if vars.len() != params.len() {
            return Err(Error::Invalid(format!("{} variables for {} parameters", vars.len(), params.len())));
        }
        Ok(Bound { params, vars })
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn p(&self, name: &str) -> Var {
        match self.params.index_of(name) {
            Some(i) => self.vars[i],
            None => panic!("parameter `{name}` missing from layout"),
        }
    }
}

/// Pads an image up to the model resolution (bottom/right), rejecting larger ones.
pub fn prepare_image(cfg: &ModelConfig, image: &RgbImage) -> Result<RgbImage> {
    let s = cfg.image_size;
    if image.width() > s || image.height() > s {
        return Err(Error::Dimension(format!("image {} exceeds model resolution {s}x{s}", image.frame())));
    }
    image.pad_to_square(s)
}

/// `[grid², patch²·3]` rows of patch pixels in raster order.
pub fn patchify(cfg: &ModelConfig, image: &RgbImage) -> Result<Tensor> {
    let s = cfg.image_size;
    if image.width() != s || image.height() != s {
        return Err(Error::Dimension(format!("image {} does not match model resolution {s}x{s}", image.frame())));
    }
    let (p, g) = (cfg.patch_size, cfg.grid());
    let mut data = Vec::with_capacity(s * s * 3);
    for gy in 0..g {
        for gx in 0..g {
            for y in 0..p {
                for x in 0..p {
                    data.extend_from_slice(&image.pixel(gx * p + x, gy * p + y));
                }
            }
        }
    }
    Tensor::new(&[g * g, p * p * 3], data)
}

fn causal_mask(n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            t.data_mut()[i * n + j] = MASKED;
        }
    }
    t
}

fn attention(tape: &mut Tape, b: &Bound, prefix: &str, xq: Var, xkv: Var, mask: Option<Var>) -> Result<Var> {
    let cfg = b.config();
    let hd = cfg.embed_dim / cfg.heads;
    let q = tape.matmul(xq, b.p(&format!("{prefix}.q")))?;
    let k = tape.matmul(xkv, b.p(&format!("{prefix}.k")))?;
    let v = tape.matmul(xkv, b.p(&format!("{prefix}.v")))?;
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let qh = tape.narrow(q, 1, h * hd, hd)?;
        let kh = tape.narrow(k, 1, h * hd, hd)?;
        let vh = tape.narrow(v, 1, h * hd, hd)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let mut scores = tape.scale(scores, 1.0 / (hd as f64).sqrt())?;
        if let Some(m) = mask {
            scores = tape.add(scores, m)?;
        }
        let weights = tape.softmax(scores)?;
        heads.push(tape.matmul(weights, vh)?);
    }
    let joined = if heads.len() == 1 { heads[0] } else { tape.concat(&heads, 1)? };
    tape.matmul(joined, b.p(&format!("{prefix}.o")))
}

fn layer_norm(tape: &mut Tape, b: &Bound, prefix: &str, x: Var) -> Result<Var> {
    tape.layer_norm(x, b.p(&format!("{prefix}.g")), b.p(&format!("{prefix}.b")))
}

fn mlp(tape: &mut Tape, b: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let h = tape.matmul(x, b.p(&format!("{prefix}.w1")))?;
    let h = tape.add_row(h, b.p(&format!("{prefix}.b1")))?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, b.p(&format!("{prefix}.w2")))?;
    tape.add_row(h, b.p(&format!("{prefix}.b2")))
}

/// Patch and prompt embeddings through the encoder: `[grid² + prompt_len, d]`.
pub fn encode_inputs(tape: &mut Tape, b: &Bound, image: &RgbImage, prompt_ids: &[usize]) -> Result<Var> {
    let cfg = b.config();
    if prompt_ids.len() > cfg.max_prompt_tokens {
        return Err(Error::Invalid(format!(
            "prompt has {} tokens, the model accepts {}",
            prompt_ids.len(),
            cfg.max_prompt_tokens
        )));
    }
    let patches = tape.constant(patchify(cfg, image)?);
    let x = tape.matmul(patches, b.p("patch.w"))?;
    let x = tape.add_row(x, b.p("patch.b"))?;
    let img = tape.add(x, b.p("pos.image"))?;
    let mut x = if prompt_ids.is_empty() {
        img
    } else {
        let words = tape.embedding(b.p("prompt.embed"), prompt_ids)?;
        let pos = tape.narrow(b.p("pos.prompt"), 0, 0, prompt_ids.len())?;
        let text = tape.add(words, pos)?;
        tape.concat(&[img, text], 0)?
    };
    for l in 0..cfg.encoder_layers {
        let pre = format!("enc.{l}");
        let h = layer_norm(tape, b, &format!("{pre}.ln1"), x)?;
        let h = attention(tape, b, &format!("{pre}.attn"), h, h, None)?;
        x = tape.add(x, h)?;
        let h = layer_norm(tape, b, &format!("{pre}.ln2"), x)?;
        let h = mlp(tape, b, &format!("{pre}.mlp"), h)?;
        x = tape.add(x, h)?;
    }
    layer_norm(tape, b, "enc.ln", x)
}

/// Image-position rows of the fused sequence as a `[d, grid, grid]` feature map.
fn image_grid(tape: &mut Tape, b: &Bound, fused: Var) -> Result<Var> {
    let cfg = b.config();
    let g = cfg.grid();
    let img = tape.narrow(fused, 0, 0, g * g)?;
    let t = tape.transpose(img)?;
    tape.reshape(t, &[cfg.embed_dim, g, g])
}

fn channel_norm(tape: &mut Tape, b: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let (c, hw) = (shape[0], shape[1] * shape[2]);
    let flat = tape.reshape(x, &[c, hw])?;
    let rows = tape.transpose(flat)?;
    let normed = layer_norm(tape, b, prefix, rows)?;
    let back = tape.transpose(normed)?;
    tape.reshape(back, &shape)
}

fn conv(tape: &mut Tape, b: &Bound, prefix: &str, x: Var, stride: usize, pad: usize) -> Result<Var> {
    tape.conv2d(x, b.p(&format!("{prefix}.w")), b.p(&format!("{prefix}.b")), stride, pad)
}

/// `[1, S, S]` map in (0, 1) at model resolution.
pub fn heatmap_head(tape: &mut Tape, b: &Bound, fused: Var) -> Result<Var> {
    let cfg = b.config();
    let mut x = image_grid(tape, b, fused)?;
    for i in 0..2 {
        x = conv(tape, b, &format!("heat.conv{i}"), x, 1, 1)?;
        x = tape.relu(x)?;
    }
    for s in 0..upsample_stages(cfg) {
        let pre = format!("heat.up{s}");
        x = tape.conv_transpose2d(x, b.p(&format!("{pre}.w")), b.p(&format!("{pre}.b")), 2, 1, 1)?;
        x = channel_norm(tape, b, &format!("{pre}.ln"), x)?;
        x = tape.relu(x)?;
    }
    x = conv(tape, b, "heat.read0", x, 1, 1)?;
    x = tape.relu(x)?;
    x = conv(tape, b, "heat.read1", x, 1, 1)?;
    tape.sigmoid(x)
}

/// `[1, 1]` score in (0, 1).
pub fn rating_head(tape: &mut Tape, b: &Bound, fused: Var) -> Result<Var> {
    let mut x = image_grid(tape, b, fused)?;
    for i in 0..RATING_CONVS {
        x = conv(tape, b, &format!("rate.conv{i}"), x, 1, 0)?;
        x = tape.relu(x)?;
    }
    let n = tape.value(x).len();
    let flat = tape.reshape(x, &[1, n])?;
    let h = tape.matmul(flat, b.p("rate.fc0.w"))?;
    let h = tape.add_row(h, b.p("rate.fc0.b"))?;
    let h = tape.relu(h)?;
    let y = tape.matmul(h, b.p("rate.fc1.w"))?;
    let y = tape.add_row(y, b.p("rate.fc1.b"))?;
    tape.sigmoid(y)
}

/// Next-token logits `[len, vocab]` for every prefix of `input_ids`.
pub fn decoder_logits(tape: &mut Tape, b: &Bound, fused: Var, input_ids: &[usize]) -> Result<Var> {
    let cfg = b.config();
    let n = input_ids.len();
    if n == 0 || n > cfg.max_output_tokens + 1 {
        return Err(Error::Invalid(format!("decoder input of {n} tokens")));
    }
    let tok = tape.embedding(b.p("dec.embed"), input_ids)?;
    let pos = tape.narrow(b.p("dec.pos"), 0, 0, n)?;
    let mut x = tape.add(tok, pos)?;
    let mask = tape.constant(causal_mask(n));
    for l in 0..cfg.decoder_layers {
        let pre = format!("dec.{l}");
        let h = layer_norm(tape, b, &format!("{pre}.ln1"), x)?;
        let h = attention(tape, b, &format!("{pre}.self"), h, h, Some(mask))?;
        x = tape.add(x, h)?;
        let h = layer_norm(tape, b, &format!("{pre}.ln2"), x)?;
        let h = attention(tape, b, &format!("{pre}.cross"), h, fused, None)?;
        x = tape.add(x, h)?;
        let h = layer_norm(tape, b, &format!("{pre}.ln3"), x)?;
        let h = mlp(tape, b, &format!("{pre}.mlp"), h)?;
        x = tape.add(x, h)?;
    }
    let x = layer_norm(tape, b, "dec.ln", x)?;
    let y = tape.matmul(x, b.p("dec.out.w"))?;
    tape.add_row(y, b.p("dec.out.b"))
}

/// Mean token negative log-likelihood of `target` under teacher forcing.
pub fn scanpath_teacher_loss(tape: &mut Tape, b: &Bound, fused: Var, target: &TokenString) -> Result<Var> {
    let ids = target.ids();
    if ids.len() < 2 || ids[0] != Token::Start.id() {
        return Err(Error::Invalid("target must start with the start sentinel and hold at least one more token".into()));
    }
    if ids.len() - 1 > b.config().max_output_tokens {
        return Err(Error::Invalid(format!(
            "target of {} tokens exceeds max_output_tokens {}",
            ids.len() - 1,
            b.config().max_output_tokens
        )));
    }
    let logits = decoder_logits(tape, b, fused, &ids[..ids.len() - 1])?;
    tape.cross_entropy(logits, &ids[1..])
}

/// Greedy decoding after the start sentinel; the result always begins with it.
pub fn scanpath_generate(tape: &mut Tape, b: &Bound, fused: Var, max_tokens: usize) -> Result<String> {
    let limit = max_tokens.min(b.config().max_output_tokens);
    let mut ids = vec![Token::Start.id()];
    while ids.len() <= limit {
        let logits = decoder_logits(tape, b, fused, &ids)?;
        let t = tape.value(logits);
        let v = t.shape()[1];
        let last = &t.data()[(ids.len() - 1) * v..ids.len() * v];
        let mut best = 0;
        for (i, &x) in last.iter().enumerate() {
            if x > last[best] {
                best = i;
            }
        }
        ids.push(best);
        if best == Token::End.id() {
            break;
        }
    }
    let tokens = ids.into_iter().filter_map(Token::from_id).collect();
    Ok(TokenString::from_tokens(tokens).to_string())
}

/// `w_seq·seq + w_heat·heat + w_score·score` over non-negative components.
pub fn combined_loss(seq: f64, heat: f64, score: f64, w: LossWeights) -> Result<f64> {
    if !(seq >= 0.0 && heat >= 0.0 && score >= 0.0) {
        return Err(Error::Invalid(format!("negative loss component ({seq}, {heat}, {score})")));
    }
    Ok(w.seq * seq + w.heat * heat + w.score * score)
}

/// The `[1, h, w]` top-left region of a `[1, S, S]` map as a GrayMap.
pub fn map_from_output(value: &Tensor, width: usize, height: usize) -> Result<GrayMap> {
    let s = value.shape()[2];
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        out.extend_from_slice(&value.data()[y * s..y * s + width]);
    }
    GrayMap::new(width, height, out)
}
