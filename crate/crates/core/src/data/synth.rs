//! Seeded synthetic stand-ins for saliency, scanpath and rating datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetHandle;
use crate::error::{Error, Result};
use crate::types::{Frame, GrayMap, InputType, OutputType, Point, PromptSpec, RatingSample, RgbImage, Sample, Scanpath, Target};

pub const SYNTH_SIZE: usize = 64;
pub const SCANPATH_QUERY: &str = "search for the brightest blob";

/// One Gaussian blob; centers sit on pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub x: usize,
    pub y: usize,
    pub sigma: f64,
    pub brightness: f64,
}

impl Blob {
    fn at(&self, x: usize, y: usize) -> f64 {
        let dx = x as f64 - self.x as f64;
        let dy = y as f64 - self.y as f64;
        self.brightness * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// 1–3 well-separated blobs with distinct brightness levels.
pub fn random_blobs(rng: &mut ChaCha8Rng, size: usize) -> Vec<Blob> {
    let scale = size as f64 / SYNTH_SIZE as f64;
    let margin = (6.0 * scale).ceil() as usize;
    let min_sep = 20.0 * scale;
    let count = rng.random_range(1..=3);
    let mut blobs: Vec<Blob> = Vec::with_capacity(count);
    let mut levels = vec![1.0, 0.8, 0.6];
    // shuffle brightness ranks so ordering is independent of placement
    for i in (1..levels.len()).rev() {
        let j = rng.random_range(0..=i);
        levels.swap(i, j);
    }
    let mut attempts = 0;
    while blobs.len() < count && attempts < 1000 {
        attempts += 1;
        let x = rng.random_range(margin..size - margin);
        let y = rng.random_range(margin..size - margin);
        let far = blobs.iter().all(|b| {
            let (dx, dy) = (b.x as f64 - x as f64, b.y as f64 - y as f64);
            (dx * dx + dy * dy).sqrt() >= min_sep
        });
        if far {
            let sigma = rng.random_range(3.0..4.5) * scale;
            blobs.push(Blob { x, y, sigma, brightness: levels[blobs.len()] });
        }
    }
    blobs
}

/// Blobs over low uniform noise, clamped to the unit range.
pub fn render_blobs(size: usize, blobs: &[Blob], rng: &mut ChaCha8Rng) -> Result<RgbImage> {
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let v: f64 = blobs.iter().map(|b| b.at(x, y)).sum::<f64>() + rng.random_range(0.0..0.08);
            let v = v.clamp(0.0, 1.0);
            data.extend_from_slice(&[v, v, v]);
        }
    }
    RgbImage::new(size, size, data)
}

/// Sum of blob Gaussians divided by its maximum.
pub fn blob_ground_truth(size: usize, blobs: &[Blob]) -> Result<GrayMap> {
    let raw = GrayMap::from_fn(size, size, |x, y| blobs.iter().map(|b| b.at(x, y)).sum())?;
    let max = raw.max();
    if max <= 0.0 {
        return Err(Error::Normalization("blob ground truth"));
    }
    raw.map(|v| v / max)
}

/// Blob centers, brightest first.
pub fn blob_scanpath(size: usize, blobs: &[Blob]) -> Result<Scanpath> {
    let mut order: Vec<&Blob> = blobs.iter().collect();
    order.sort_by(|a, b| b.brightness.total_cmp(&a.brightness));
    let points = order.iter().map(|b| Point::new(b.x as f64, b.y as f64)).collect();
    Scanpath::new(points, Frame::new(size, size)?)
}

fn count_check(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("a synthetic dataset needs at least one sample".into()));
    }
    Ok(())
}

pub fn gen_saliency_task(seed: u64, n: usize) -> Result<DatasetHandle> {
    gen_saliency_task_sized(seed, n, SYNTH_SIZE)
}

pub fn gen_saliency_task_sized(seed: u64, n: usize, size: usize) -> Result<DatasetHandle> {
    count_check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::SaliencyHeatmap);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let blobs = random_blobs(&mut rng, size);
        let image = render_blobs(size, &blobs, &mut rng)?;
        let gt = blob_ground_truth(size, &blobs)?;
        samples.push(Sample::new(image, prompt.clone(), Target::Heatmap(gt))?);
    }
    DatasetHandle::new("synthetic-saliency", InputType::NaturalImage, OutputType::SaliencyHeatmap, samples)
}

pub fn gen_scanpath_task(seed: u64, n: usize) -> Result<DatasetHandle> {
    gen_scanpath_task_sized(seed, n, SYNTH_SIZE)
}

pub fn gen_scanpath_task_sized(seed: u64, n: usize, size: usize) -> Result<DatasetHandle> {
    count_check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let blobs = random_blobs(&mut rng, size);
        let image = render_blobs(size, &blobs, &mut rng)?;
        let path = blob_scanpath(size, &blobs)?;
        let prompt = if rng.random_bool(0.5) {
            PromptSpec::with_query(InputType::NaturalImage, OutputType::Scanpath, SCANPATH_QUERY)?
        } else {
            PromptSpec::new(InputType::NaturalImage, OutputType::Scanpath)
        };
        samples.push(Sample::new(image, prompt, Target::Scanpath(path))?);
    }
    DatasetHandle::new("synthetic-scanpath", InputType::NaturalImage, OutputType::Scanpath, samples)
}

/// Zero-mean pattern with values in [-0.5, 0.5], mostly near the extremes.
pub fn contrast_pattern(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let fx = rng.random_range(0.5..3.0);
            let fy = rng.random_range(0.5..3.0);
            (fx, fy, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let raw: Vec<f64> = (0..size * size)
        .map(|i| {
            let (x, y) = ((i % size) as f64 / size as f64, (i / size) as f64 / size as f64);
            waves.iter().map(|&(fx, fy, ph)| (tau * (fx * x + fy * y) + ph).sin()).sum()
        })
        .collect();
    raw.iter().map(|v| 0.5 * (2.0 * v).tanh()).collect()
}

/// `0.5 + gain·pattern` replicated over the three channels.
pub fn contrast_image(size: usize, pattern: &[f64], gain: f64) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&gain) {
        return Err(Error::Invalid(format!("contrast gain {gain} outside [0, 1]")));
    }
    let data = pattern.iter().flat_map(|&d| {
        let v = (0.5 + gain * d).clamp(0.0, 1.0);
        [v, v, v]
    });
    RgbImage::new(size, size, data.collect())
}

/// `clamp(2.5 · RMS contrast of luminance, 0, 1)`; a two-level 0/1 pattern saturates.
pub fn contrast_score(image: &RgbImage) -> f64 {
    let lum = image.luminance();
    let n = lum.len() as f64;
    let mean = lum.iter().sum::<f64>() / n;
    let rms = (lum.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (2.5 * rms).clamp(0.0, 1.0)
}

pub fn gen_rating_task(seed: u64, n: usize) -> Result<DatasetHandle> {
    gen_rating_task_sized(seed, n, SYNTH_SIZE)
}

pub fn gen_rating_task_sized(seed: u64, n: usize, size: usize) -> Result<DatasetHandle> {
    count_check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::AestheticsScore);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let pattern = contrast_pattern(&mut rng, size);
        let gain = rng.random_range(0.0..1.0);
        let image = contrast_image(size, &pattern, gain)?;
        let score = RatingSample::new(contrast_score(&image))?;
        samples.push(Sample::new(image, prompt.clone(), Target::Rating(score))?);
    }
    DatasetHandle::new("synthetic-rating", InputType::NaturalImage, OutputType::AestheticsScore, samples)
}

/// The three synthetic tasks with `total` samples split as evenly as possible.
pub fn synthetic_handles(seed: u64, total: usize) -> Result<Vec<DatasetHandle>> {
    if total < 3 {
        return Err(Error::Invalid("a synthetic mixture needs at least three samples".into()));
    }
    let n = |i: usize| total / 3 + usize::from(i < total % 3);
    Ok(vec![
        gen_saliency_task(seed, n(0))?,
        gen_scanpath_task(seed.wrapping_add(1), n(1))?,
        gen_rating_task(seed.wrapping_add(2), n(2))?,
    ])
}
