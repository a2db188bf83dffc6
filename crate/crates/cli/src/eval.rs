use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use uniar::data::io::{read_map, read_rating_csv, read_scanpaths, read_segmentation};
use uniar::metrics::{
    evaluate_heatmap, evaluate_scanpath, fixations_to_map, plcc, srcc, HeatmapEvalInput, HeatmapScores, PairedScores,
    ScanpathEvalInput, ScanpathScores,
};
use uniar::{Error, FixationSet, GrayMap};

use crate::report::{report_table, Metric};
use crate::{usage, CliResult};

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Directory of predicted maps; repeat to compare models.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Directory of ground-truth maps (PGM or grid text).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Directory of `<id>.jsonl` scanpath files whose fixations score AUC, sAUC and NSS.
    #[arg(long)]
    fixations: Option<PathBuf>,
    /// Blur for ground-truth maps built from fixations when `--gt` is absent.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Seeds sAUC negative sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-sample CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanpathArgs {
    /// Scanpath JSONL, paired with `--gt` by line; repeat to compare models.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long)]
    gt: PathBuf,
    /// Directory with one label grid per ground-truth line, in file-name order.
    #[arg(long)]
    segmentation: Option<PathBuf>,
    /// Mean-shift bandwidth in pixels (default: frame diagonal / 10).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatingArgs {
    /// CSV with header `id,predicted,observed`; repeat to compare models.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start worker pool: {e}")))
}

fn model_name(path: &Path) -> String {
    path.file_stem().or(path.file_name()).map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Regular files of `dir` keyed by file stem, sorted.
fn files_by_stem(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Error::Invalid(format!("{} and {} share the id `{stem}`", prev.display(), path.display())).into());
        }
    }
    Ok(out)
}

/// Mean of the defined entries per column.
fn column_means<const N: usize>(rows: &[[Option<f64>; N]]) -> Vec<Option<f64>> {
    (0..N)
        .map(|c| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn metrics<'a>(names: &[&'a str], higher: &[bool]) -> Vec<Metric<'a>> {
    names.iter().zip(higher).map(|(&name, &higher_is_better)| Metric { name, higher_is_better }).collect()
}

type Row = (String, Vec<Option<f64>>);

struct Report<'a> {
    names: &'a [&'a str],
    /// Model name, per-sample rows, column means.
    models: Vec<(String, Vec<Row>, Vec<Option<f64>>)>,
}

impl Report<'_> {
    fn csv(&self) -> String {
        let mut s = format!("model,id,{}\n", self.names.join(","));
        for (model, rows, mean) in &self.models {
            for (id, vals) in rows.iter().chain([&("mean".to_string(), mean.clone())]) {
                let cells: Vec<String> = vals.iter().map(|&v| cell(v)).collect();
                let _ = writeln!(s, "{model},{id},{}", cells.join(","));
            }
        }
        s
    }

    fn finish(self, higher: &[bool], out: Option<&Path>) -> CliResult<String> {
        if let Some(p) = out {
            fs::write(p, self.csv())?;
        }
        let rows: Vec<Row> = self.models.iter().map(|(m, _, mean)| (m.clone(), mean.clone())).collect();
        Ok(report_table(&rows, &metrics(self.names, higher)))
    }
}

struct HeatmapCase {
    id: String,
    gt: GrayMap,
    fixations: Option<FixationSet>,
    negatives: Option<FixationSet>,
}

fn load_fixations(path: &Path) -> CliResult<FixationSet> {
    let paths = read_scanpaths(path)?;
    let first = paths.first().ok_or_else(|| Error::Invalid(format!("{} holds no scanpaths", path.display())))?;
    let frame = first.0.frame();
    let sets: Vec<FixationSet> = paths.iter().map(|(p, _)| p.to_fixation_set()).collect();
    Ok(FixationSet::union(&sets, frame)?)
}

pub fn heatmap(a: HeatmapArgs) -> CliResult<String> {
    let pool = pool(a.jobs)?;
    let fix_files = a.fixations.as_deref().map(files_by_stem).transpose()?;
    let gt_files = a.gt.as_deref().map(files_by_stem).transpose()?;
    let ids: Vec<String> = match (&gt_files, &fix_files) {
        (Some(g), _) => g.keys().cloned().collect(),
        (None, Some(f)) => f.keys().cloned().collect(),
        (None, None) => return Err(usage("one of --gt or --fixations is required")),
    };
    if ids.is_empty() {
        return Err(Error::Empty("ground-truth directory").into());
    }

    let mut fixations: Vec<Option<FixationSet>> = Vec::with_capacity(ids.len());
    for id in &ids {
        fixations.push(match &fix_files {
            Some(f) => {
                let p = f.get(id).ok_or_else(|| Error::Invalid(format!("no fixation file for `{id}`")))?;
                Some(load_fixations(p)?)
            }
            None => None,
        });
    }
    let mut cases = Vec::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        let gt = match &gt_files {
            Some(g) => read_map(&g[id])?,
            None => fixations_to_map(fixations[i].as_ref().expect("fixations present without --gt"), a.sigma)?,
        };
        let fix = fixations[i].clone().map(|f| FixationSet::union([&f], gt.frame())).transpose()?;
        // shuffled AUC takes negatives from every other image
        let others: Vec<&FixationSet> = fixations.iter().enumerate().filter(|&(j, _)| j != i).filter_map(|(_, f)| f.as_ref()).collect();
        let negatives = (!others.is_empty()).then(|| FixationSet::union(others, gt.frame())).transpose()?;
        cases.push(HeatmapCase { id: id.clone(), gt, fixations: fix, negatives });
    }

    let mut models = Vec::new();
    for dir in &a.pred {
        let preds = files_by_stem(dir)?;
        let scored: Vec<CliResult<[Option<f64>; 8]>> = pool.install(|| {
            cases
                .par_iter()
                .map(|c| {
                    let path = preds.get(&c.id).ok_or_else(|| Error::Invalid(format!("{} has no prediction for `{}`", dir.display(), c.id)))?;
                    let pred = read_map(path)?;
                    let input = HeatmapEvalInput {
                        pred: &pred,
                        gt: &c.gt,
                        fixations: c.fixations.as_ref(),
                        negatives: c.negatives.as_ref(),
                        seed: a.seed,
                    };
                    Ok(evaluate_heatmap(input)?.as_array())
                })
                .collect()
        });
        let scored = scored.into_iter().collect::<CliResult<Vec<_>>>()?;
        let mean = column_means(&scored);
        let rows = cases.iter().zip(&scored).map(|(c, s)| (c.id.clone(), s.to_vec())).collect();
        models.push((model_name(dir), rows, mean));
    }
    Report { names: &HeatmapScores::NAMES, models }.finish(&HeatmapScores::HIGHER_IS_BETTER, a.out.as_deref())
}

pub fn scanpath(a: ScanpathArgs) -> CliResult<String> {
    let pool = pool(a.jobs)?;
    if let Some(b) = a.bandwidth {
        if !(b.is_finite() && b > 0.0) {
            return Err(usage("--bandwidth must be a positive number"));
        }
    }
    let gt = read_scanpaths(&a.gt)?;
    if gt.is_empty() {
        return Err(Error::Empty("ground-truth scanpath file").into());
    }
    let segs = match &a.segmentation {
        Some(dir) => {
            let files = files_by_stem(dir)?;
            if files.len() != gt.len() {
                return Err(Error::Invalid(format!("{} segmentation files for {} scanpaths", files.len(), gt.len())).into());
            }
            Some(files.values().map(|p| read_segmentation(p)).collect::<Result<Vec<_>, _>>()?)
        }
        None => None,
    };

    let mut models = Vec::new();
    for path in &a.pred {
        let pred = read_scanpaths(path)?;
        if pred.len() != gt.len() {
            return Err(Error::Invalid(format!("{} has {} scanpaths, ground truth has {}", path.display(), pred.len(), gt.len())).into());
        }
        let scored: Vec<CliResult<[Option<f64>; 7]>> = pool.install(|| {
            (0..gt.len())
                .into_par_iter()
                .map(|i| {
                    let input = ScanpathEvalInput {
                        pred: &pred[i].0,
                        gt: &gt[i].0,
                        segmentation: segs.as_ref().map(|s| &s[i]),
                        bandwidth: a.bandwidth,
                    };
                    Ok(evaluate_scanpath(input)?.as_array())
                })
                .collect()
        });
        let scored = scored.into_iter().collect::<CliResult<Vec<_>>>()?;
        let mean = column_means(&scored);
        let rows = scored.iter().enumerate().map(|(i, s)| ((i + 1).to_string(), s.to_vec())).collect();
        models.push((model_name(path), rows, mean));
    }
    Report { names: &ScanpathScores::NAMES, models }.finish(&ScanpathScores::HIGHER_IS_BETTER, a.out.as_deref())
}

pub fn rating(a: RatingArgs) -> CliResult<String> {
    const NAMES: [&str; 2] = ["SRCC", "PLCC"];
    let mut models = Vec::new();
    for path in &a.pred {
        let rows = read_rating_csv(path)?;
        let pairs = PairedScores::new(rows.iter().map(|r| r.predicted).collect(), rows.iter().map(|r| r.observed).collect())?;
        let scores = vec![Some(srcc(&pairs)?), Some(plcc(&pairs)?)];
        models.push((model_name(path), Vec::new(), scores));
    }
    Report { names: &NAMES, models }.finish(&[true, true], a.out.as_deref())
}
