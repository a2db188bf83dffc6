//! Dataset handles, the equal-rate mixture, synthetic tasks and file formats.

pub mod io;
pub mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::types::{InputType, OutputType, Sample};

pub use synth::{gen_rating_task, gen_saliency_task, gen_scanpath_task, synthetic_handles};

/// A named collection of samples sharing one input/output type pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHandle {
    name: String,
    input_type: InputType,
    output_type: OutputType,
    samples: Vec<Sample>,
}

impl DatasetHandle {
    pub fn new(name: impl Into<String>, input_type: InputType, output_type: OutputType, samples: Vec<Sample>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::Invalid(format!("dataset `{name}` has no samples")));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| s.prompt.input_type() != input_type || s.prompt.output_type() != output_type)
        {
            return Err(Error::Invalid(format!(
                "sample {i} of `{name}` does not match ({}, {})",
                input_type.as_str(),
                output_type.as_str()
            )));
        }
        Ok(DatasetHandle { name, input_type, output_type, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_type(&self) -> InputType {
        self.input_type
    }

    pub fn output_type(&self) -> OutputType {
        self.output_type
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub handles: Vec<DatasetHandle>,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn new(handles: Vec<DatasetHandle>, seed: u64) -> Result<Self> {
        if handles.is_empty() {
            return Err(Error::Empty("mixture handle list"));
        }
        Ok(MixtureConfig { handles, seed })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn sample(&self, draw: Draw) -> &Sample {
        &self.handles[draw.handle].samples[draw.index]
    }
}

/// Position of one drawn sample inside a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub handle: usize,
    pub index: usize,
}

/// Picks a handle uniformly, then a sample uniformly within it.
pub fn mixture_next(cfg: &MixtureConfig, rng: &mut ChaCha8Rng) -> Result<Draw> {
    if cfg.handles.is_empty() {
        return Err(Error::Empty("mixture handle list"));
    }
    let handle = rng.random_range(0..cfg.handles.len());
    let index = rng.random_range(0..cfg.handles[handle].len());
    Ok(Draw { handle, index })
}

/// Per-handle counts of `draws` consecutive draws from the configured seed.
pub fn draw_histogram(cfg: &MixtureConfig, draws: usize) -> Result<Vec<u64>> {
    let mut rng = cfg.rng();
    let mut counts = vec![0u64; cfg.handles.len()];
    for _ in 0..draws {
        counts[mixture_next(cfg, &mut rng)?.handle] += 1;
    }
    Ok(counts)
}

/// Pearson chi-square statistic against equal expected counts, and its p-value.
pub fn chi_square_uniform(counts: &[u64]) -> Result<(f64, f64)> {
    if counts.len() < 2 {
        return Err(Error::Invalid("chi-square test needs at least two categories".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("draw counts"));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((stat, dist.sf(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{RatingSample, RgbImage, PromptSpec, Target};

    fn handle(name: &str, n: usize) -> DatasetHandle {
        let img = RgbImage::new(1, 1, vec![0.5; 3]).unwrap();
        let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::AestheticsScore);
        let s = Sample::new(img, prompt, Target::Rating(RatingSample::new(0.5).unwrap())).unwrap();
        DatasetHandle::new(name, InputType::NaturalImage, OutputType::AestheticsScore, vec![s; n]).unwrap()
    }

    #[test]
    fn single_handle_always_chosen() {
        let cfg = MixtureConfig::new(vec![handle("a", 3)], 1).unwrap();
        assert_eq!(draw_histogram(&cfg, 100).unwrap(), vec![100]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(MixtureConfig::new(vec![], 0).is_err());
        assert!(DatasetHandle::new("x", InputType::Webpage, OutputType::Scanpath, vec![]).is_err());
        let h = handle("a", 1);
        let wrong = DatasetHandle::new("b", InputType::Webpage, OutputType::AestheticsScore, h.samples().to_vec());
        assert!(wrong.is_err());
    }

    #[test]
    fn sizes_do_not_bias_the_draw() {
        let cfg = MixtureConfig::new(vec![handle("small", 10), handle("large", 10_000)], 42).unwrap();
        let counts = draw_histogram(&cfg, 10_000).unwrap();
        // binomial(10000, 1/2): sigma = 50
        for c in &counts {
            assert!((*c as f64 - 5000.0).abs() <= 150.0, "{counts:?}");
        }
    }

    #[test]
    fn mixture_is_deterministic() {
        let cfg = MixtureConfig::new(vec![handle("a", 7), handle("b", 5)], 9).unwrap();
        let run = || {
            let mut rng = cfg.rng();
            (0..50).map(|_| mixture_next(&cfg, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn chi_square_reference_values() {
        let (stat, p) = chi_square_uniform(&[50, 50]).unwrap();
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        // chi2 = 4 with 1 dof: p = erfc(sqrt(2)) ≈ 0.0455003
        let (stat, p) = chi_square_uniform(&[60, 40]).unwrap();
        assert!((stat - 4.0).abs() < 1e-12);
        assert!((p - 0.045500263896358).abs() < 1e-9);
    }
}
