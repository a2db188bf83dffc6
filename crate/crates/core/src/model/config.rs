use std::fmt::Write as _;
use std::path::Path;

use crate::codec::VOCAB_SIZE;
use crate::error::{Error, Result};

/// `(w_seq, w_heat, w_score)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub seq: f64,
    pub heat: f64,
    pub score: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { seq: 1.0, heat: 500.0, score: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub mlp_dim: usize,
    /// Channels of the heatmap and rating heads.
    pub head_channels: usize,
    pub max_prompt_tokens: usize,
    pub max_output_tokens: usize,
    pub loss_weights: LossWeights,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_size: 64,
            patch_size: 8,
            embed_dim: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            mlp_dim: 128,
            head_channels: 16,
            max_prompt_tokens: 16,
            max_output_tokens: 64,
            loss_weights: LossWeights::default(),
        }
    }
}

impl ModelConfig {
    /// A very small configuration for fast gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            image_size: 12,
            patch_size: 2,
            embed_dim: 8,
            encoder_layers: 1,
            decoder_layers: 1,
            heads: 2,
            mlp_dim: 8,
            head_channels: 8,
            max_prompt_tokens: 16,
            max_output_tokens: 16,
            loss_weights: LossWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.patch_size == 0 || self.image_size == 0 || self.image_size % self.patch_size != 0 {
            return bad(format!("image size {} is not a multiple of patch size {}", self.image_size, self.patch_size));
        }
        if self.patch_size < 2 || !self.patch_size.is_power_of_two() {
            return bad(format!("patch size {} must be a power of two of at least 2", self.patch_size));
        }
        if self.grid() < 5 {
            return bad(format!("the patch grid must be at least 5 wide, got {}", self.grid()));
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!("embed_dim {} is not divisible by {} heads", self.embed_dim, self.heads));
        }
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("mlp_dim", self.mlp_dim),
            ("head_channels", self.head_channels),
            ("max_prompt_tokens", self.max_prompt_tokens),
            ("max_output_tokens", self.max_output_tokens),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.head_channels < 4 {
            // channel norm over a single upsampled channel is constant
            return bad(format!("head_channels must be at least 4, got {}", self.head_channels));
        }
        let w = self.loss_weights;
        if !(w.seq > 0.0 && w.heat > 0.0 && w.score > 0.0) || ![w.seq, w.heat, w.score].iter().all(|v| v.is_finite()) {
            return bad("loss weights must be positive".into());
        }
        Ok(())
    }

    /// Patches per image side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn image_tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn output_vocab(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = self.loss_weights;
        for (k, v) in [
            ("image_size", self.image_size.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("encoder_layers", self.encoder_layers.to_string()),
            ("decoder_layers", self.decoder_layers.to_string()),
            ("heads", self.heads.to_string()),
            ("mlp_dim", self.mlp_dim.to_string()),
            ("head_channels", self.head_channels.to_string()),
            ("max_prompt_tokens", self.max_prompt_tokens.to_string()),
            ("max_output_tokens", self.max_output_tokens.to_string()),
            ("loss_weights", format!("{}, {}, {}", w.seq, w.heat, w.score)),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Parses `key = value` lines; `#` starts a comment, unknown keys are errors
    /// and missing keys keep their defaults.
    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(path, lineno, 1, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let col = raw.find(value).map_or(1, |c| c + 1);
            let int = || value.parse::<usize>().map_err(|_| Error::parse(path, lineno, col, format!("`{value}` is not a non-negative integer")));
            match key {
                "image_size" => cfg.image_size = int()?,
                "patch_size" => cfg.patch_size = int()?,
                "embed_dim" => cfg.embed_dim = int()?,
                "encoder_layers" => cfg.encoder_layers = int()?,
                "decoder_layers" => cfg.decoder_layers = int()?,
                "heads" => cfg.heads = int()?,
                "mlp_dim" => cfg.mlp_dim = int()?,
                "head_channels" => cfg.head_channels = int()?,
                "max_prompt_tokens" => cfg.max_prompt_tokens = int()?,
                "max_output_tokens" => cfg.max_output_tokens = int()?,
                "loss_weights" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(path, lineno, col, "loss_weights must be three numbers"))?;
                    let [seq, heat, score] = parts[..] else {
                        return Err(Error::parse(path, lineno, col, "loss_weights must be three numbers"));
                    };
                    cfg.loss_weights = LossWeights { seq, heat, score };
                }
                _ => return Err(Error::parse(path, lineno, 1, format!("unknown key `{key}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.image_tokens(), 64);
        let back = ModelConfig::from_text(&cfg.to_text(), Path::new("cfg")).unwrap();
        assert_eq!(back, cfg);
        ModelConfig::tiny().validate().unwrap();
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ModelConfig::from_text("embed_dim = 64\nheads = four\n", Path::new("c.txt")).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 9)),
            e => panic!("{e}"),
        }
        assert!(ModelConfig::from_text("colour = red", Path::new("c")).is_err());
        assert!(ModelConfig::from_text("heads = 3", Path::new("c")).is_err());
        assert!(ModelConfig::from_text("loss_weights = 1, 0, 2", Path::new("c")).is_err());
    }
}
