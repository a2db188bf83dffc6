//! Sequence-level scanpath metrics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::{Frame, Point, Scanpath};

pub const MEANSHIFT_TOLERANCE: f64 = 1e-3;
pub const MEANSHIFT_MAX_ITER: usize = 300;

/// Default mean-shift bandwidth: a tenth of the frame diagonal.
pub fn default_bandwidth(frame: Frame) -> f64 {
    frame.diagonal() / 10.0
}

/// Integer region labels over a frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl SegmentationMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "segmentation {width}x{height} with {} labels",
                labels.len()
            )));
        }
        Ok(SegmentationMap { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame(&self) -> Frame {
        Frame { width: self.width, height: self.height }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, p: Point) -> Result<u32> {
        if !self.frame().contains(p) {
            return Err(Error::Invalid(format!(
                "fixation ({}, {}) outside segmentation {}",
                p.x,
                p.y,
                self.frame()
            )));
        }
        let (x, y) = self.frame().pixel_of(p);
        Ok(self.labels[y * self.width + x])
    }

    fn ids(&self, path: &Scanpath) -> Result<Vec<usize>> {
        if path.frame() != self.frame() {
            return Err(Error::Dimension(format!(
                "scanpath frame {} does not match segmentation {}",
                path.frame(),
                self.frame()
            )));
        }
        path.fixations().iter().map(|&p| self.label_at(p).map(|l| l as usize)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clusters {
    pub centers: Vec<Point>,
    /// Cluster index of each input point.
    pub labels: Vec<usize>,
}

impl Clusters {
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = c.distance(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn ids(&self, path: &Scanpath) -> Vec<usize> {
        path.fixations().iter().map(|&p| self.nearest(p)).collect()
    }
}

/// Flat-kernel mean shift.
///
/// Every point climbs to the mean of its neighbors within `bandwidth` until it
/// moves less than [`MEANSHIFT_TOLERANCE`]. Converged modes within half a
/// bandwidth of an earlier cluster center join that cluster; otherwise they
/// start a new one, centered on the mode.
pub fn meanshift_clusters(points: &[Point], bandwidth: f64) -> Result<Clusters> {
    if points.is_empty() {
        return Err(Error::Empty("mean-shift input"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut centers: Vec<Point> = Vec::new();
    let mut labels = Vec::with_capacity(points.len());
    for &start in points {
        let mode = climb(points, start, bandwidth);
        let label = match centers.iter().position(|c| c.distance(mode) < bandwidth / 2.0) {
            Some(i) => i,
            None => {
                centers.push(mode);
                centers.len() - 1
            }
        };
        labels.push(label);
    }
    Ok(Clusters { centers, labels })
}

fn climb(points: &[Point], start: Point, bandwidth: f64) -> Point {
    let mut at = start;
    for _ in 0..MEANSHIFT_MAX_ITER {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            if p.distance(at) <= bandwidth {
                sx += p.x;
                sy += p.y;
                n += 1;
            }
        }
        if n == 0 {
            break;
        }
        let next = Point::new(sx / n as f64, sy / n as f64);
        let moved = next.distance(at);
        at = next;
        if moved < MEANSHIFT_TOLERANCE {
            break;
        }
    }
    at
}

/// Needleman–Wunsch score with match 1, mismatch 0 and gap 0, divided by the longer length.
pub fn nw_similarity(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("ID string"));
    }
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            let diag = prev[j] + u32::from(x == y);
            cur[j + 1] = diag.max(prev[j + 1]).max(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len()] as f64 / a.len().max(b.len()) as f64)
}

/// Unit-cost edit distance.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn sequence_score(pred: &Scanpath, gt: &Scanpath, clusters: &Clusters) -> Result<f64> {
    if clusters.centers.is_empty() {
        return Err(Error::Empty("cluster set"));
    }
    nw_similarity(&clusters.ids(pred), &clusters.ids(gt))
}

fn collapse_repeats(mut ids: Vec<usize>) -> Vec<usize> {
    ids.dedup();
    ids
}

pub fn semss(pred: &Scanpath, gt: &Scanpath, seg: &SegmentationMap) -> Result<f64> {
    let a = collapse_repeats(seg.ids(pred)?);
    let b = collapse_repeats(seg.ids(gt)?);
    nw_similarity(&a, &b)
}

pub fn semfed(pred: &Scanpath, gt: &Scanpath, seg: &SegmentationMap) -> Result<usize> {
    Ok(levenshtein(&seg.ids(pred)?, &seg.ids(gt)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiMatchScores {
    pub shape: f64,
    pub direction: f64,
    pub length: f64,
    pub position: f64,
    pub average: f64,
}

#[derive(Debug, Clone, Copy)]
struct Saccade {
    start: Point,
    dx: f64,
    dy: f64,
}

impl Saccade {
    fn len(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    fn diff(&self, o: &Saccade) -> f64 {
        (self.dx - o.dx).hypot(self.dy - o.dy)
    }

    fn angle_to(&self, o: &Saccade) -> f64 {
        let d = (self.dy.atan2(self.dx) - o.dy.atan2(o.dx)).abs();
        if d > PI { 2.0 * PI - d } else { d }
    }
}

fn saccades(path: &Scanpath) -> Vec<Saccade> {
    path.fixations()
        .windows(2)
        .map(|w| Saccade { start: w[0], dx: w[1].x - w[0].x, dy: w[1].y - w[0].y })
        .collect()
}

/// Minimum-cost monotone path through the saccade-difference matrix, from
/// the first pair to the last, stepping right, down or diagonally.
pub(crate) fn align_saccades(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let (n, m) = (cost.len(), cost[0].len());
    let mut acc = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[i - 1][j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[i - 1][j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i][j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i][j] = best_prev + cost[i][j];
        }
    }
    let (mut i, mut j) = (n - 1, m - 1);
    let mut path = vec![(i, j)];
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { acc[i - 1][j - 1] } else { f64::INFINITY };
        let up = if i > 0 { acc[i - 1][j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i][j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    path
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

/// Shape, direction, length and position similarity of two scanpaths.
///
/// Saccade sequences are aligned by [`align_saccades`] on vector-difference
/// cost. Each dimension's dissimilarity is the median over aligned pairs,
/// normalized by twice the frame diagonal (spatial terms) or π (direction),
/// and reported as `1 - d`.
pub fn multimatch(pred: &Scanpath, gt: &Scanpath, frame: Frame) -> Result<MultiMatchScores> {
    if pred.len() < 2 || gt.len() < 2 {
        return Err(Error::Invalid("MultiMatch needs at least two fixations per scanpath".into()));
    }
    let (a, b) = (saccades(pred), saccades(gt));
    let cost: Vec<Vec<f64>> = a.iter().map(|u| b.iter().map(|v| u.diff(v)).collect()).collect();
    let pairs = align_saccades(&cost);

    let spatial = 2.0 * frame.diagonal();
    let mut shape = Vec::with_capacity(pairs.len());
    let mut length = Vec::with_capacity(pairs.len());
    let mut direction = Vec::with_capacity(pairs.len());
    let mut position = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let (u, v) = (&a[i], &b[j]);
        shape.push(u.diff(v) / spatial);
        length.push((u.len() - v.len()).abs() / spatial);
        direction.push(u.angle_to(v) / PI);
        position.push(u.start.distance(v.start) / spatial);
    }
    let sim = |v: &mut Vec<f64>| (1.0 - median(v)).clamp(0.0, 1.0);
    let (shape, direction, length, position) =
        (sim(&mut shape), sim(&mut direction), sim(&mut length), sim(&mut position));
    Ok(MultiMatchScores {
        shape,
        direction,
        length,
        position,
        average: (shape + direction + length + position) / 4.0,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScanpathScores {
    pub sequence_score: Option<f64>,
    pub semss: Option<f64>,
    pub semfed: Option<f64>,
    pub mm_shape: Option<f64>,
    pub mm_direction: Option<f64>,
    pub mm_length: Option<f64>,
    pub mm_position: Option<f64>,
}

impl ScanpathScores {
    pub const NAMES: [&'static str; 7] = ["SeqScore", "SemSS", "SemFED", "MM-Shape", "MM-Dir", "MM-Len", "MM-Pos"];
    pub const HIGHER_IS_BETTER: [bool; 7] = [true, true, false, true, true, true, true];

    pub fn as_array(&self) -> [Option<f64>; 7] {
        [
            self.sequence_score,
            self.semss,
            self.semfed,
            self.mm_shape,
            self.mm_direction,
            self.mm_length,
            self.mm_position,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanpathEvalInput<'a> {
    pub pred: &'a Scanpath,
    pub gt: &'a Scanpath,
    pub segmentation: Option<&'a SegmentationMap>,
    /// Mean-shift bandwidth; defaults to [`default_bandwidth`] of the ground-truth frame.
    pub bandwidth: Option<f64>,
}

/// Every metric the inputs support. Sequence Score clusters the ground-truth
/// fixations; the semantic metrics need a segmentation.
pub fn evaluate_scanpath(input: ScanpathEvalInput<'_>) -> Result<ScanpathScores> {
    let frame = input.gt.frame();
    let bandwidth = input.bandwidth.unwrap_or_else(|| default_bandwidth(frame));
    let clusters = meanshift_clusters(input.gt.fixations(), bandwidth)?;
    let mm = multimatch(input.pred, input.gt, frame).ok();
    let seg = input.segmentation;
    Ok(ScanpathScores {
        sequence_score: sequence_score(input.pred, input.gt, &clusters).ok(),
        semss: seg.and_then(|s| semss(input.pred, input.gt, s).ok()),
        semfed: seg.and_then(|s| semfed(input.pred, input.gt, s).ok()).map(|d| d as f64),
        mm_shape: mm.map(|m| m.shape),
        mm_direction: mm.map(|m| m.direction),
        mm_length: mm.map(|m| m.length),
        mm_position: mm.map(|m| m.position),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_identity_and_missing_segmentation() {
        let f = Frame::new(40, 30).unwrap();
        let p = Scanpath::new(vec![Point::new(3.0, 4.0), Point::new(30.0, 20.0), Point::new(10.0, 25.0)], f).unwrap();
        let s = evaluate_scanpath(ScanpathEvalInput { pred: &p, gt: &p, segmentation: None, bandwidth: None }).unwrap();
        assert_eq!(s.sequence_score, Some(1.0));
        assert_eq!((s.semss, s.semfed), (None, None));
        assert_eq!(s.mm_shape, Some(1.0));
        let seg = SegmentationMap::new(40, 30, (0..1200).map(|i| (i % 40 / 10) as u32).collect()).unwrap();
        let s = evaluate_scanpath(ScanpathEvalInput { pred: &p, gt: &p, segmentation: Some(&seg), bandwidth: Some(5.0) }).unwrap();
        assert_eq!((s.semss, s.semfed), (Some(1.0), Some(0.0)));
    }

    fn sp(pts: &[(f64, f64)], f: Frame) -> Scanpath {
        Scanpath::new(pts.iter().map(|&p| p.into()).collect(), f).unwrap()
    }

    /// Longest common subsequence by exhaustive recursion.
    fn lcs_brute(a: &[usize], b: &[usize]) -> usize {
        match (a.split_first(), b.split_first()) {
            (Some((x, ra)), Some((y, rb))) => {
                if x == y {
                    1 + lcs_brute(ra, rb)
                } else {
                    lcs_brute(ra, b).max(lcs_brute(a, rb))
                }
            }
            _ => 0,
        }
    }

    fn lev_brute(a: &[usize], b: &[usize]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = lev_brute(ra, rb) + usize::from(x != y);
                sub.min(lev_brute(ra, b) + 1).min(lev_brute(a, rb) + 1)
            }
        }
    }

    #[test]
    fn meanshift_single_point() {
        let c = meanshift_clusters(&[Point::new(3.0, 4.0)], 5.0).unwrap();
        assert_eq!(c.centers, vec![Point::new(3.0, 4.0)]);
        assert_eq!(c.labels, vec![0]);
    }

    #[test]
    fn meanshift_two_separated_groups() {
        let pts: Vec<Point> = [(10.0, 10.0), (12.0, 11.0), (200.0, 200.0), (11.0, 9.0), (201.0, 203.0)]
            .iter()
            .map(|&p| p.into())
            .collect();
        let c = meanshift_clusters(&pts, 20.0).unwrap();
        assert_eq!(c.centers.len(), 2);
        assert_eq!(c.labels, vec![0, 0, 1, 0, 1]);
        assert!(meanshift_clusters(&[], 1.0).is_err());
    }

    #[test]
    fn nw_examples() {
        assert_eq!(nw_similarity(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(nw_similarity(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(nw_similarity(&[1, 2, 3, 4], &[1, 3, 4]).unwrap(), 0.75);
        assert!(nw_similarity(&[], &[1]).is_err());
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(&[4, 5, 6], &[4, 5, 6]), 0);
        assert_eq!(levenshtein(&[], &[1, 2, 3, 4]), 4);
        assert_eq!(levenshtein(&[1, 2], &[1, 3]), 1);
    }

    #[test]
    fn sequence_score_examples() {
        let f = Frame::new(300, 100).unwrap();
        let a = (50.0, 50.0);
        let b = (150.0, 50.0);
        let c = (250.0, 50.0);
        let gt = sp(&[a, b, c], f);
        let gt_points: Vec<Point> = [a, b, c, (52.0, 50.0), (148.0, 51.0), (251.0, 49.0)]
            .iter()
            .map(|&p| p.into())
            .collect();
        let clusters = meanshift_clusters(&gt_points, 20.0).unwrap();
        assert_eq!(clusters.centers.len(), 3);
        assert_eq!(sequence_score(&gt, &gt, &clusters).unwrap(), 1.0);
        let pred = sp(&[a, b], f);
        assert!((sequence_score(&pred, &gt, &clusters).unwrap() - 2.0 / 3.0).abs() < 1e-12);

        let only_a = meanshift_clusters(&[Point::new(50.0, 50.0)], 20.0).unwrap();
        let two = Clusters { centers: vec![Point::new(50.0, 50.0), Point::new(250.0, 50.0)], labels: vec![] };
        let far = sp(&[c, c], f);
        assert_eq!(sequence_score(&far, &sp(&[a], f), &two).unwrap(), 0.0);
        assert_eq!(sequence_score(&far, &sp(&[a], f), &only_a).unwrap(), 0.5);
        assert_eq!(sequence_score(&sp(&[c], f), &sp(&[a], f), &only_a).unwrap(), 1.0);
        let none = Clusters { centers: vec![], labels: vec![] };
        assert!(sequence_score(&far, &far, &none).is_err());
    }

    fn halves() -> SegmentationMap {
        // left half region 0, right half region 1
        SegmentationMap::new(4, 2, vec![0, 0, 1, 1, 0, 0, 1, 1]).unwrap()
    }

    #[test]
    fn semss_examples() {
        let f = Frame::new(4, 2).unwrap();
        let seg = halves();
        let p = sp(&[(0.2, 0.0), (3.0, 1.0), (2.6, 0.0)], f);
        assert_eq!(semss(&p, &p, &seg).unwrap(), 1.0);
        let single = SegmentationMap::new(4, 2, vec![7; 8]).unwrap();
        let q = sp(&[(3.0, 1.0), (0.0, 0.0)], f);
        assert_eq!(semss(&p, &q, &single).unwrap(), 1.0);
        // p -> [0, 1, 1] -> [0, 1]; q -> [1, 0]
        let expected = lcs_brute(&[0, 1], &[1, 0]) as f64 / 2.0;
        assert_eq!(semss(&p, &q, &seg).unwrap(), expected);
        let wrong = Frame::new(5, 2).unwrap();
        assert!(semss(&sp(&[(4.5, 0.0)], wrong), &q, &seg).is_err());
    }

    #[test]
    fn semfed_examples() {
        let f = Frame::new(4, 2).unwrap();
        let seg = SegmentationMap::new(4, 2, vec![0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let p = sp(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], f);
        assert_eq!(semfed(&p, &p, &seg).unwrap(), 0);
        let q = sp(&[(3.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], f);
        assert_eq!(semfed(&p, &q, &seg).unwrap(), 5);
        let r = sp(&[(1.0, 0.0), (3.0, 1.0), (0.0, 0.0), (2.0, 0.0)], f);
        assert_eq!(semfed(&p, &r, &seg).unwrap(), lev_brute(&[0, 1, 2], &[1, 7, 0, 2]));
    }

    #[test]
    fn multimatch_identity_and_translation() {
        let f = Frame::new(200, 100).unwrap();
        let p = sp(&[(10.0, 10.0), (60.0, 40.0), (90.0, 20.0), (30.0, 70.0)], f);
        let s = multimatch(&p, &p, f).unwrap();
        assert_eq!((s.shape, s.direction, s.length, s.position, s.average), (1.0, 1.0, 1.0, 1.0, 1.0));
        let moved = sp(&[(20.0, 15.0), (70.0, 45.0), (100.0, 25.0), (40.0, 75.0)], f);
        let s = multimatch(&moved, &p, f).unwrap();
        assert!((s.shape - 1.0).abs() < 1e-12);
        assert!((s.length - 1.0).abs() < 1e-12);
        assert!((s.direction - 1.0).abs() < 1e-12);
        assert!(s.position < 1.0);
        assert!(multimatch(&sp(&[(1.0, 1.0)], f), &p, f).is_err());
    }

    /// All monotone paths from (0,0) to (n-1,m-1) with right/down/diagonal steps.
    fn all_paths(n: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
        fn go(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
            cur.push((i, j));
            if i == n - 1 && j == m - 1 {
                out.push(cur.clone());
            } else {
                if i + 1 < n && j + 1 < m {
                    go(i + 1, j + 1, n, m, cur, out);
                }
                if i + 1 < n {
                    go(i + 1, j, n, m, cur, out);
                }
                if j + 1 < m {
                    go(i, j + 1, n, m, cur, out);
                }
            }
            cur.pop();
        }
        let mut out = Vec::new();
        go(0, 0, n, m, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn multimatch_matches_exhaustive_alignment() {
        let f = Frame::new(100, 100).unwrap();
        let p = sp(&[(10.0, 10.0), (50.0, 20.0), (40.0, 80.0)], f);
        let q = sp(&[(20.0, 30.0), (30.0, 30.0), (90.0, 50.0), (60.0, 90.0)], f);
        let a = [(40.0, 10.0), (-10.0, 60.0)];
        let b = [(10.0, 0.0), (60.0, 20.0), (-30.0, 40.0)];
        let starts_a = [(10.0, 10.0), (50.0, 20.0)];
        let starts_b = [(20.0, 30.0), (30.0, 30.0), (90.0, 50.0)];
        let norm = |(x, y): (f64, f64)| f64::hypot(x, y);
        let cost = |i: usize, j: usize| norm((a[i].0 - b[j].0, a[i].1 - b[j].1));
        let best = all_paths(2, 3)
            .into_iter()
            .min_by(|x, y| {
                let cx: f64 = x.iter().map(|&(i, j)| cost(i, j)).sum();
                let cy: f64 = y.iter().map(|&(i, j)| cost(i, j)).sum();
                cx.total_cmp(&cy)
            })
            .unwrap();
        let diag2 = 2.0 * f.diagonal();
        let med = |mut v: Vec<f64>| median(&mut v);
        let shape = 1.0 - med(best.iter().map(|&(i, j)| cost(i, j) / diag2).collect());
        let length = 1.0 - med(best.iter().map(|&(i, j)| (norm(a[i]) - norm(b[j])).abs() / diag2).collect());
        let position = 1.0
            - med(best
                .iter()
                .map(|&(i, j)| norm((starts_a[i].0 - starts_b[j].0, starts_a[i].1 - starts_b[j].1)) / diag2)
                .collect());
        let direction = 1.0
            - med(best
                .iter()
                .map(|&(i, j)| {
                    let d = (a[i].1.atan2(a[i].0) - b[j].1.atan2(b[j].0)).abs();
                    (if d > PI { 2.0 * PI - d } else { d }) / PI
                })
                .collect());
        let s = multimatch(&p, &q, f).unwrap();
        assert!((s.shape - shape).abs() < 1e-12);
        assert!((s.length - length).abs() < 1e-12);
        assert!((s.position - position).abs() < 1e-12);
        assert!((s.direction - direction).abs() < 1e-12);
        assert!((s.average - (shape + length + position + direction) / 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nw_matches_brute_lcs_and_is_symmetric(a in proptest::collection::vec(0usize..4, 1..8), b in proptest::collection::vec(0usize..4, 1..8)) {
            let v = nw_similarity(&a, &b).unwrap();
            prop_assert_eq!(v, lcs_brute(&a, &b) as f64 / a.len().max(b.len()) as f64);
            prop_assert_eq!(v, nw_similarity(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn levenshtein_matches_brute_and_triangle(a in proptest::collection::vec(0usize..3, 0..7), b in proptest::collection::vec(0usize..3, 0..7), c in proptest::collection::vec(0usize..3, 0..7)) {
            prop_assert_eq!(levenshtein(&a, &b), lev_brute(&a, &b));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn relabeling_preserves_nw(a in proptest::collection::vec(0usize..5, 1..8), b in proptest::collection::vec(0usize..5, 1..8), shift in 1usize..100) {
            let relabel = |v: &[usize]| v.iter().map(|x| (4 - x) * 7 + shift).collect::<Vec<_>>();
            prop_assert_eq!(nw_similarity(&a, &b).unwrap(), nw_similarity(&relabel(&a), &relabel(&b)).unwrap());
        }

        #[test]
        fn multimatch_in_unit_range(pts in proptest::collection::vec((0.0..99.0f64, 0.0..99.0f64), 4..12)) {
            let f = Frame::new(100, 100).unwrap();
            let half = pts.len() / 2;
            let p = sp(&pts[..half], f);
            let q = sp(&pts[half..], f);
            let s = multimatch(&p, &q, f).unwrap();
            for v in [s.shape, s.direction, s.length, s.position, s.average] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
