use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::vocab::prompt_vocab_size;
use crate::error::{Error, Result};
use crate::tensor::{checkpoint, Tensor};

/// Hidden width of the rating head's dense stack.
pub const RATING_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Normal(f64),
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn he(fan_in: usize) -> Init {
    Init::Normal((2.0 / fan_in as f64).sqrt())
}

fn glorot(fan_in: usize) -> Init {
    Init::Normal((1.0 / fan_in as f64).sqrt())
}

/// Channels after each upsampling stage of the heatmap head.
pub fn upsample_channels(cfg: &ModelConfig) -> usize {
    (cfg.head_channels / 2).max(1)
}

/// Number of ×2 upsampling stages taking the patch grid to pixel resolution.
pub fn upsample_stages(cfg: &ModelConfig) -> usize {
    cfg.patch_size.trailing_zeros() as usize
}

pub const RATING_CONVS: usize = 4;

fn specs(cfg: &ModelConfig) -> Vec<Spec> {
    let d = cfg.embed_dim;
    let m = cfg.mlp_dim;
    let c = cfg.head_channels;
    let cu = upsample_channels(cfg);
    let patch_in = cfg.patch_size * cfg.patch_size * 3;
    let mut out = Vec::new();
    let mut add = |name: String, shape: &[usize], init: Init| out.push(Spec { name, shape: shape.to_vec(), init });

    add("patch.w".into(), &[patch_in, d], glorot(patch_in));
    add("patch.b".into(), &[d], Init::Zeros);
    add("pos.image".into(), &[cfg.image_tokens(), d], Init::Normal(0.1));
    add("prompt.embed".into(), &[prompt_vocab_size(), d], Init::Normal(0.5));
    add("pos.prompt".into(), &[cfg.max_prompt_tokens, d], Init::Normal(0.1));

    let block = |add: &mut dyn FnMut(String, &[usize], Init), prefix: String, attn: &[&str]| {
        let mut ln = 1;
        for a in attn {
            add(format!("{prefix}.ln{ln}.g"), &[d], Init::Ones);
            add(format!("{prefix}.ln{ln}.b"), &[d], Init::Zeros);
            for proj in ["q", "k", "v", "o"] {
                add(format!("{prefix}.{a}.{proj}"), &[d, d], glorot(d));
            }
            ln += 1;
        }
        add(format!("{prefix}.ln{ln}.g"), &[d], Init::Ones);
        add(format!("{prefix}.ln{ln}.b"), &[d], Init::Zeros);
        add(format!("{prefix}.mlp.w1"), &[d, m], he(d));
        add(format!("{prefix}.mlp.b1"), &[m], Init::Zeros);
        add(format!("{prefix}.mlp.w2"), &[m, d], glorot(m));
        add(format!("{prefix}.mlp.b2"), &[d], Init::Zeros);
    };
    for l in 0..cfg.encoder_layers {
        block(&mut add, format!("enc.{l}"), &["attn"]);
    }
    add("enc.ln.g".into(), &[d], Init::Ones);
    add("enc.ln.b".into(), &[d], Init::Zeros);

    let v = cfg.output_vocab();
    add("dec.embed".into(), &[v, d], Init::Normal(0.5));
    add("dec.pos".into(), &[cfg.max_output_tokens + 1, d], Init::Normal(0.1));
    for l in 0..cfg.decoder_layers {
        block(&mut add, format!("dec.{l}"), &["self", "cross"]);
    }
    add("dec.ln.g".into(), &[d], Init::Ones);
    add("dec.ln.b".into(), &[d], Init::Zeros);
    add("dec.out.w".into(), &[d, v], glorot(d));
    add("dec.out.b".into(), &[v], Init::Zeros);

    add("heat.conv0.w".into(), &[c, d, 3, 3], he(d * 9));
    add("heat.conv0.b".into(), &[c], Init::Zeros);
    add("heat.conv1.w".into(), &[c, c, 3, 3], he(c * 9));
    add("heat.conv1.b".into(), &[c], Init::Zeros);
    for s in 0..upsample_stages(cfg) {
        let cin = if s == 0 { c } else { cu };
        add(format!("heat.up{s}.w"), &[cin, cu, 3, 3], he(cin * 9 / 4));
        add(format!("heat.up{s}.b"), &[cu], Init::Zeros);
        add(format!("heat.up{s}.ln.g"), &[cu], Init::Ones);
        add(format!("heat.up{s}.ln.b"), &[cu], Init::Zeros);
    }
    add("heat.read0.w".into(), &[cu, cu, 3, 3], he(cu * 9));
    add("heat.read0.b".into(), &[cu], Init::Zeros);
    add("heat.read1.w".into(), &[1, cu, 3, 3], glorot(cu * 9));
    add("heat.read1.b".into(), &[1], Init::Zeros);

    for i in 0..RATING_CONVS {
        let cin = if i == 0 { d } else { c };
        add(format!("rate.conv{i}.w"), &[c, cin, 2, 2], he(cin * 4));
        add(format!("rate.conv{i}.b"), &[c], Init::Zeros);
    }
    let side = cfg.grid() - RATING_CONVS;
    let flat = c * side * side;
    add("rate.fc0.w".into(), &[flat, RATING_HIDDEN], he(flat));
    add("rate.fc0.b".into(), &[RATING_HIDDEN], Init::Zeros);
    add("rate.fc1.w".into(), &[RATING_HIDDEN, 1], glorot(RATING_HIDDEN));
    add("rate.fc1.b".into(), &[1], Init::Zeros);
    out
}

/// Every learnable tensor of the model, addressed by name, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ModelParams {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for s in specs(config) {
            let n: usize = s.shape.iter().product();
            let data = match s.init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Normal(std) => {
                    let dist = Normal::new(0.0, std).map_err(|e| Error::Invalid(e.to_string()))?;
                    (0..n).map(|_| dist.sample(&mut rng)).collect()
                }
            };
            names.push(s.name);
            tensors.push(Tensor::new(&s.shape, data)?);
        }
        Ok(Self::assemble(config.clone(), names, tensors))
    }

    fn assemble(config: ModelConfig, names: Vec<String>, tensors: Vec<Tensor>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        ModelParams { config, names, tensors, index }
    }

    /// Same layout with every tensor replaced by `f(name, tensor)`.
    pub fn map(&self, mut f: impl FnMut(&str, &Tensor) -> Tensor) -> Result<Self> {
        let tensors: Vec<Tensor> = self.names.iter().zip(&self.tensors).map(|(n, t)| f(n, t)).collect();
        for (t, old) in tensors.iter().zip(&self.tensors) {
            if t.shape() != old.shape() {
                return Err(Error::Shape { op: "params.map", detail: format!("{:?} -> {:?}", old.shape(), t.shape()) });
            }
        }
        Ok(Self::assemble(self.config.clone(), self.names.clone(), tensors))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn to_named(&self) -> Vec<(String, Tensor)> {
        self.names.iter().cloned().zip(self.tensors.iter().cloned()).collect()
    }

    /// Rebuilds parameters for `config` from named tensors, e.g. a loaded checkpoint.
    pub fn from_named(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let mut by_name: HashMap<String, Tensor> = named.into_iter().collect();
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for s in specs(config) {
            let t = by_name
                .remove(&s.name)
                .ok_or_else(|| Error::Invalid(format!("checkpoint lacks tensor `{}`", s.name)))?;
            if t.shape() != s.shape.as_slice() {
                return Err(Error::Invalid(format!(
                    "tensor `{}` has shape {:?}, config expects {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )));
            }
            names.push(s.name);
            tensors.push(t);
        }
        if let Some(extra) = by_name.keys().min() {
            return Err(Error::Invalid(format!("checkpoint has unexpected tensor `{extra}`")));
        }
        Ok(Self::assemble(config.clone(), names, tensors))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.to_named())
    }

    pub fn load(config: &ModelConfig, path: &Path) -> Result<Self> {
        Self::from_named(config, checkpoint::load(path)?)
    }
}
