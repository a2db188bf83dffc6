//! Heatmap-level saliency metrics and ground-truth map construction.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{FixationSet, Frame, GrayMap};

/// Regularizer added to the prediction in [`kld`].
pub const KLD_EPS: f64 = 1e-12;
/// sAUC keeps at most this many negatives per positive fixation.
pub const SAUC_NEGATIVES_PER_FIXATION: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatmapScores {
    pub cc: Option<f64>,
    pub kld: Option<f64>,
    pub auc_judd: Option<f64>,
    pub sauc: Option<f64>,
    pub nss: Option<f64>,
    pub sim: Option<f64>,
    pub rmse: Option<f64>,
    pub r_squared: Option<f64>,
}

impl HeatmapScores {
    pub const NAMES: [&'static str; 8] = ["CC", "KLD", "AUC-Judd", "sAUC", "NSS", "SIM", "RMSE", "R2"];
    /// `true` where larger values are better.
    pub const HIGHER_IS_BETTER: [bool; 8] = [true, false, true, true, true, true, false, true];

    pub fn as_array(&self) -> [Option<f64>; 8] {
        [
            self.cc,
            self.kld,
            self.auc_judd,
            self.sauc,
            self.nss,
            self.sim,
            self.rmse,
            self.r_squared,
        ]
    }
}

/// Gaussian-blurred fixation map rescaled to a maximum of 1.
///
/// Unit impulses sit at the rounded fixation pixels; the kernel is truncated
/// at `ceil(3σ)` and simply cut at the image border.
pub fn fixations_to_map(fixations: &FixationSet, sigma: f64) -> Result<GrayMap> {
    if fixations.is_empty() {
        return Err(Error::Empty("fixation set"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    let Frame { width, height } = fixations.frame();
    let mut impulses = vec![0.0; width * height];
    for &p in fixations.points() {
        let (x, y) = fixations.frame().pixel_of(p);
        impulses[y * width + x] += 1.0;
    }

    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();

    let mut rows = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let sx = x as isize + k as isize - radius;
                if sx >= 0 && (sx as usize) < width {
                    acc += w * impulses[y * width + sx as usize];
                }
            }
            rows[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let sy = y as isize + k as isize - radius;
                if sy >= 0 && (sy as usize) < height {
                    acc += w * rows[sy as usize * width + x];
                }
            }
            out[y * width + x] = acc;
        }
    }
    let max = out.iter().copied().fold(0.0, f64::max);
    out.iter_mut().for_each(|v| *v /= max);
    GrayMap::new(width, height, out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean and population standard deviation.
fn moments(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Pearson correlation of two equally long slices.
pub(crate) fn pearson(a: &[f64], b: &[f64], what: &'static str) -> Result<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ZeroVariance(what));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn normalized(map: &GrayMap, what: &'static str) -> Result<Vec<f64>> {
    let sum: f64 = map.values().iter().sum();
    if !(sum > 0.0) || map.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Normalization(what));
    }
    Ok(map.values().iter().map(|v| v / sum).collect())
}

fn require_fixations(f: &FixationSet, map: &GrayMap) -> Result<()> {
    if f.is_empty() {
        return Err(Error::Empty("fixation set"));
    }
    if f.frame() != map.frame() {
        return Err(Error::Dimension(format!(
            "fixations recorded on {} but map is {}",
            f.frame(),
            map.frame()
        )));
    }
    Ok(())
}

pub fn cc(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.check_same_dims(gt)?;
    pearson(pred.values(), gt.values(), "heatmap")
}

/// `KL(gt ‖ pred)` over sum-normalized maps, natural log, prediction regularized by `eps`.
///
/// The regularized sum can dip below zero by at most `n·eps` when the maps
/// agree; the result is floored at zero.
pub fn kld(pred: &GrayMap, gt: &GrayMap, eps: f64) -> Result<f64> {
    pred.check_same_dims(gt)?;
    let p = normalized(pred, "predicted heatmap")?;
    let g = normalized(gt, "ground-truth heatmap")?;
    let sum: f64 = g
        .iter()
        .zip(&p)
        .filter(|(&gi, _)| gi > 0.0)
        .map(|(&gi, &pi)| gi * (gi / (pi + eps)).ln())
        .sum();
    if !sum.is_finite() {
        return Err(Error::NonFinite { op: "kld" });
    }
    Ok(sum.max(0.0))
}

/// AUC with thresholds at the saliency values of fixated pixels.
///
/// At each threshold the true-positive rate is the share of fixations whose
/// value reaches it and the false-positive rate the share of never-fixated
/// pixels that do. The curve is closed with `(0,0)` and `(1,1)` and
/// integrated with the trapezoid rule.
pub fn auc_judd(pred: &GrayMap, fixations: &FixationSet) -> Result<f64> {
    require_fixations(fixations, pred)?;
    let frame = pred.frame();
    let mut fixated = vec![false; frame.area()];
    let mut positives: Vec<f64> = fixations
        .points()
        .iter()
        .map(|&p| {
            let (x, y) = frame.pixel_of(p);
            fixated[y * frame.width + x] = true;
            pred.get(x, y)
        })
        .collect();
    let mut negatives: Vec<f64> = pred
        .values()
        .iter()
        .zip(&fixated)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v)
        .collect();
    positives.sort_by(|a, b| b.total_cmp(a));
    negatives.sort_by(|a, b| b.total_cmp(a));

    let mut thresholds = positives.clone();
    thresholds.dedup();
    Ok(roc_area(&positives, &negatives, &thresholds))
}

/// Trapezoidal ROC area for descending-sorted scores and descending thresholds.
fn roc_area(positives: &[f64], negatives: &[f64], thresholds: &[f64]) -> f64 {
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    let (mut ip, mut ineg) = (0usize, 0usize);
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    let mut area = 0.0;
    for &t in thresholds {
        while ip < positives.len() && positives[ip] >= t {
            ip += 1;
        }
        while ineg < negatives.len() && negatives[ineg] >= t {
            ineg += 1;
        }
        let tpr = ip as f64 / np;
        let fpr = if nn > 0.0 { ineg as f64 / nn } else { 0.0 };
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
    area
}

/// Seeded subsample of the negative pool capped at ten per positive fixation.
pub fn sample_negatives(positives: &FixationSet, negatives: &FixationSet, seed: u64) -> Result<FixationSet> {
    let cap = SAUC_NEGATIVES_PER_FIXATION * positives.len();
    if negatives.len() <= cap {
        return Ok(negatives.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, negatives.len(), cap).into_vec();
    picked.sort_unstable();
    FixationSet::new(picked.into_iter().map(|i| negatives.points()[i]).collect(), negatives.frame())
}

/// Shuffled AUC: negatives are fixation locations borrowed from other images.
///
/// Negatives recorded on a different frame are rescaled onto the prediction's
/// frame. Every distinct score is a threshold, which makes the area equal to
/// the pairwise probability that a positive outranks a negative (ties ½).
pub fn sauc(pred: &GrayMap, fixations: &FixationSet, negatives: &FixationSet, seed: u64) -> Result<f64> {
    require_fixations(fixations, pred)?;
    if negatives.is_empty() {
        return Err(Error::Empty("sAUC negative set"));
    }
    let frame = pred.frame();
    let negatives = FixationSet::union([&sample_negatives(fixations, negatives, seed)?], frame)?;
    let mut pos: Vec<f64> = fixations.points().iter().map(|&p| pred.at(p)).collect();
    let mut neg: Vec<f64> = negatives.points().iter().map(|&p| pred.at(p)).collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    Ok(roc_area(&pos, &neg, &thresholds))
}

pub fn nss(pred: &GrayMap, fixations: &FixationSet) -> Result<f64> {
    require_fixations(fixations, pred)?;
    let (m, sd) = moments(pred.values());
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("predicted heatmap"));
    }
    let total: f64 = fixations.points().iter().map(|&p| (pred.at(p) - m) / sd).sum();
    Ok(total / fixations.len() as f64)
}

pub fn sim(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.check_same_dims(gt)?;
    let p = normalized(pred, "predicted heatmap")?;
    let g = normalized(gt, "ground-truth heatmap")?;
    Ok(p.iter().zip(&g).map(|(a, b)| a.min(*b)).sum::<f64>().min(1.0))
}

pub fn rmse(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.check_same_dims(gt)?;
    let se: f64 = pred.values().iter().zip(gt.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((se / pred.values().len() as f64).sqrt())
}

/// Coefficient of determination with the ground truth as reference.
pub fn r_squared(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.check_same_dims(gt)?;
    let m = mean(gt.values());
    let ss_tot: f64 = gt.values().iter().map(|g| (g - m) * (g - m)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::ZeroVariance("ground-truth heatmap"));
    }
    let ss_res: f64 = pred.values().iter().zip(gt.values()).map(|(p, g)| (g - p) * (g - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(map: &GrayMap, width: usize, height: usize) -> Result<GrayMap> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("cannot resize to {width}x{height}")));
    }
    if map.width() == width && map.height() == height {
        return Ok(map.clone());
    }
    let sx = map.width() as f64 / width as f64;
    let sy = map.height() as f64 / height as f64;
    let sample = |pos: f64, n: usize| {
        let c = (pos.max(0.0)).min((n - 1) as f64);
        let i0 = c.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    GrayMap::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = sample((x as f64 + 0.5) * sx - 0.5, map.width());
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sy - 0.5, map.height());
        let top = map.get(x0, y0) * (1.0 - fx) + map.get(x1, y0) * fx;
        let bottom = map.get(x0, y1) * (1.0 - fx) + map.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Inputs for scoring one predicted heatmap.
#[derive(Debug, Clone, Copy)]
pub struct HeatmapEvalInput<'a> {
    pub pred: &'a GrayMap,
    pub gt: &'a GrayMap,
    pub fixations: Option<&'a FixationSet>,
    pub negatives: Option<&'a FixationSet>,
    pub seed: u64,
}

/// Every metric that the available data supports, after resizing the
/// prediction to the ground-truth resolution. Metrics undefined for the
/// instance (e.g. a constant map) are left empty.
pub fn evaluate_heatmap(input: HeatmapEvalInput<'_>) -> Result<HeatmapScores> {
    let pred = resize_bilinear(input.pred, input.gt.width(), input.gt.height())?;
    let gt = input.gt;
    let ok = |r: Result<f64>| r.ok();
    let fix = input.fixations.filter(|f| !f.is_empty());
    Ok(HeatmapScores {
        cc: ok(cc(&pred, gt)),
        kld: ok(kld(&pred, gt, KLD_EPS)),
        auc_judd: fix.and_then(|f| ok(auc_judd(&pred, f))),
        sauc: fix.zip(input.negatives).and_then(|(f, n)| ok(sauc(&pred, f, n, input.seed))),
        nss: fix.and_then(|f| ok(nss(&pred, f))),
        sim: ok(sim(&pred, gt)),
        rmse: ok(rmse(&pred, gt)),
        r_squared: ok(r_squared(&pred, gt)),
    })
}
