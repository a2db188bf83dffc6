//! Domain types shared across the crate.
//!
//! Coordinates are continuous pixel units with the origin at the top-left
//! corner, `x` growing rightward and `y` downward.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("frame {width}x{height} has a zero side")));
        }
        Ok(Frame { width, height })
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// Pixel holding `p`: coordinates rounded half away from zero, clamped to the frame.
    pub fn pixel_of(&self, p: Point) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.round().max(0.0) as usize).min(n - 1);
        (clamp(p.x, self.width), clamp(p.y, self.height))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// A `width × height` grid of finite reals stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("map {width}x{height} has a zero side")));
        }
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("map contains a non-finite value".into()));
        }
        Ok(GrayMap { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn at(&self, p: Point) -> f64 {
        let (x, y) = self.frame().pixel_of(p);
        self.get(x, y)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn is_unit_range(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn is_normalized_prob(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && (self.values.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_same_dims(&self, other: &GrayMap) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "maps differ in size: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Fixation locations pooled over observers; order carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    points: Vec<Point>,
    frame: Frame,
}

impl FixationSet {
    /// Builds a set that may be empty; operations that need fixations check for it.
    pub fn new(points: Vec<Point>, frame: Frame) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !frame.contains(**p)) {
            return Err(Error::Invalid(format!("fixation ({}, {}) lies outside frame {frame}", p.x, p.y)));
        }
        Ok(FixationSet { points, frame })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn union<'a>(sets: impl IntoIterator<Item = &'a FixationSet>, frame: Frame) -> Result<Self> {
        let mut points = Vec::new();
        for set in sets {
            let sx = frame.width as f64 / set.frame.width as f64;
            let sy = frame.height as f64 / set.frame.height as f64;
            let (wmax, hmax) = ((frame.width as f64).next_down(), (frame.height as f64).next_down());
            points.extend(set.points.iter().map(|p| Point::new((p.x * sx).min(wmax), (p.y * sy).min(hmax))));
        }
        FixationSet::new(points, frame)
    }
}

/// Ordered fixations produced while viewing one image. Always holds at least one fixation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    fixations: Vec<Point>,
    frame: Frame,
}

impl Scanpath {
    pub fn new(fixations: Vec<Point>, frame: Frame) -> Result<Self> {
        if fixations.is_empty() {
            return Err(Error::Empty("scanpath"));
        }
        if let Some(p) = fixations.iter().find(|p| !frame.contains(**p)) {
            return Err(Error::Invalid(format!("fixation ({}, {}) lies outside frame {frame}", p.x, p.y)));
        }
        Ok(Scanpath { fixations, frame })
    }

    pub fn fixations(&self) -> &[Point] {
        &self.fixations
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_fixation_set(&self) -> FixationSet {
        FixationSet { points: self.fixations.clone(), frame: self.frame }
    }
}

/// Normalized opinion score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingSample {
    score: f64,
}

impl RatingSample {
    pub fn new(score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Invalid(format!("rating {score} outside [0, 1]")));
        }
        Ok(RatingSample { score })
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Min-max normalizes raw opinion scores into `[0, 1]`.
    pub fn normalize_all(raw: &[f64]) -> Result<Vec<RatingSample>> {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if raw.is_empty() {
            return Err(Error::Empty("rating list"));
        }
        if !(hi > lo) {
            return Err(Error::ZeroVariance("rating list"));
        }
        raw.iter().map(|&r| RatingSample::new((r - lo) / (hi - lo))).collect()
    }
}

/// RGB image with unit-range channels, stored row-major as `[r, g, b]` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("image {width}x{height} has a zero side")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "image {width}x{height} needs {} channel values, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("image channel outside [0, 1]".into()));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn from_gray(gray: &GrayMap) -> Result<Self> {
        let data = gray.values().iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(gray.width(), gray.height(), data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Rec. 601 luma.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2])
            .collect()
    }

    /// Zero-pads on the right and bottom up to `size × size`.
    pub fn pad_to_square(&self, size: usize) -> Result<Self> {
        if self.width > size || self.height > size {
            return Err(Error::Dimension(format!(
                "image {}x{} exceeds model resolution {size}",
                self.width, self.height
            )));
        }
        let mut data = vec![0.0; size * size * 3];
        for y in 0..self.height {
            let src = &self.data[y * self.width * 3..(y + 1) * self.width * 3];
            data[y * size * 3..y * size * 3 + self.width * 3].copy_from_slice(src);
        }
        Self::new(size, size, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputType {
    #[serde(rename = "natural image")]
    NaturalImage,
    #[serde(rename = "webpage")]
    Webpage,
    #[serde(rename = "graphic design")]
    GraphicDesign,
    #[serde(rename = "mobile user interface")]
    MobileUserInterface,
}

impl InputType {
    pub const ALL: [InputType; 4] = [
        InputType::NaturalImage,
        InputType::Webpage,
        InputType::GraphicDesign,
        InputType::MobileUserInterface,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InputType::NaturalImage => "natural image",
            InputType::Webpage => "webpage",
            InputType::GraphicDesign => "graphic design",
            InputType::MobileUserInterface => "mobile user interface",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown input type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutputType {
    #[serde(rename = "saliency heatmap")]
    SaliencyHeatmap,
    #[serde(rename = "importance heatmap")]
    ImportanceHeatmap,
    #[serde(rename = "aesthetics score")]
    AestheticsScore,
    #[serde(rename = "scanpath")]
    Scanpath,
}

impl OutputType {
    pub const ALL: [OutputType; 4] = [
        OutputType::SaliencyHeatmap,
        OutputType::ImportanceHeatmap,
        OutputType::AestheticsScore,
        OutputType::Scanpath,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OutputType::SaliencyHeatmap => "saliency heatmap",
            OutputType::ImportanceHeatmap => "importance heatmap",
            OutputType::AestheticsScore => "aesthetics score",
            OutputType::Scanpath => "scanpath",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown output type `{s}`")))
    }

    pub fn is_heatmap(&self) -> bool {
        matches!(self, OutputType::SaliencyHeatmap | OutputType::ImportanceHeatmap)
    }
}

const INPUT_MARKER: &str = "INPUT_TYPE:";
const OUTPUT_MARKER: &str = "OUTPUT_TYPE:";
const QUERY_MARKER: &str = "QUERY:";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptSpec {
    input_type: InputType,
    output_type: OutputType,
    query: Option<String>,
}

impl PromptSpec {
    pub fn new(input_type: InputType, output_type: OutputType) -> Self {
        PromptSpec { input_type, output_type, query: None }
    }

    pub fn with_query(input_type: InputType, output_type: OutputType, query: impl Into<String>) -> Result<Self> {
        let query = query.into();
        if query.contains(['\n', '\r']) {
            return Err(Error::Invalid("prompt query contains a line break".into()));
        }
        Ok(PromptSpec { input_type, output_type, query: Some(query) })
    }

    pub fn input_type(&self) -> InputType {
        self.input_type
    }

    pub fn output_type(&self) -> OutputType {
        self.output_type
    }

    pub fn query(&self) -> Option<&str> {
        self.query.as_deref()
    }

    /// `INPUT_TYPE: <i> OUTPUT_TYPE: <o>`, followed by ` QUERY:<q>` when a query is present.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{INPUT_MARKER} {} {OUTPUT_MARKER} {}",
            self.input_type.as_str(),
            self.output_type.as_str()
        );
        if let Some(q) = &self.query {
            s.push(' ');
            s.push_str(QUERY_MARKER);
            s.push_str(q);
        }
        s
    }

    /// Inverse of [`PromptSpec::render`].
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("malformed prompt `{s}`"));
        let rest = s.strip_prefix(INPUT_MARKER).and_then(|r| r.strip_prefix(' ')).ok_or_else(bad)?;
        let out_at = rest.find(&format!(" {OUTPUT_MARKER} ")).ok_or_else(bad)?;
        let input_type = InputType::parse(&rest[..out_at])?;
        let rest = &rest[out_at + OUTPUT_MARKER.len() + 2..];
        let (output, query) = match rest.find(&format!(" {QUERY_MARKER}")) {
            Some(q) => (&rest[..q], Some(&rest[q + QUERY_MARKER.len() + 1..])),
            None => (rest, None),
        };
        let output_type = OutputType::parse(output)?;
        match query {
            Some(q) => PromptSpec::with_query(input_type, output_type, q),
            None => Ok(PromptSpec::new(input_type, output_type)),
        }
    }
}

impl fmt::Display for PromptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn render_prompt(spec: &PromptSpec) -> String {
    spec.render()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Heatmap(GrayMap),
    Scanpath(Scanpath),
    Rating(RatingSample),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub prompt: PromptSpec,
    pub target: Target,
}

impl Sample {
    pub fn new(image: RgbImage, prompt: PromptSpec, target: Target) -> Result<Self> {
        let consistent = match (&target, prompt.output_type()) {
            (Target::Heatmap(map), o) if o.is_heatmap() => {
                if map.frame() != image.frame() {
                    return Err(Error::Dimension(format!(
                        "heatmap {} does not match image {}",
                        map.frame(),
                        image.frame()
                    )));
                }
                map.is_unit_range()
            }
            (Target::Scanpath(path), OutputType::Scanpath) => path.frame() == image.frame(),
            (Target::Rating(_), OutputType::AestheticsScore) => true,
            _ => false,
        };
        if !consistent {
            return Err(Error::Invalid(format!(
                "target does not fit the `{}` prompt",
                prompt.output_type().as_str()
            )));
        }
        Ok(Sample { image, prompt, target })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prompt_with_query_matches_printed_example() {
        let spec = PromptSpec::with_query(InputType::NaturalImage, OutputType::Scanpath, "searching a bowl").unwrap();
        assert_eq!(
            render_prompt(&spec),
            "INPUT_TYPE: natural image OUTPUT_TYPE: scanpath QUERY:searching a bowl"
        );
    }

    #[test]
    fn prompt_without_query() {
        let spec = PromptSpec::new(InputType::Webpage, OutputType::SaliencyHeatmap);
        assert_eq!(spec.render(), "INPUT_TYPE: webpage OUTPUT_TYPE: saliency heatmap");
        let spec = PromptSpec::new(InputType::GraphicDesign, OutputType::ImportanceHeatmap);
        assert_eq!(spec.render(), "INPUT_TYPE: graphic design OUTPUT_TYPE: importance heatmap");
    }

    #[test]
    fn query_rejects_newline() {
        assert!(PromptSpec::with_query(InputType::Webpage, OutputType::Scanpath, "a\nb").is_err());
    }

    #[test]
    fn scanpath_rejects_empty_and_out_of_frame() {
        let frame = Frame::new(10, 10).unwrap();
        assert!(matches!(Scanpath::new(vec![], frame), Err(Error::Empty(_))));
        assert!(Scanpath::new(vec![Point::new(10.0, 1.0)], frame).is_err());
        assert!(Scanpath::new(vec![Point::new(9.99, 0.0)], frame).is_ok());
    }

    #[test]
    fn pixel_rounding_is_half_away_and_clamped() {
        let frame = Frame::new(4, 4).unwrap();
        assert_eq!(frame.pixel_of(Point::new(0.5, 1.49)), (1, 1));
        assert_eq!(frame.pixel_of(Point::new(3.7, 2.5)), (3, 3));
    }

    #[test]
    fn sample_target_must_match_prompt() {
        let image = RgbImage::new(2, 2, vec![0.0; 12]).unwrap();
        let rating = Target::Rating(RatingSample::new(0.5).unwrap());
        let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::Scanpath);
        assert!(Sample::new(image.clone(), prompt, rating.clone()).is_err());
        let prompt = PromptSpec::new(InputType::NaturalImage, OutputType::AestheticsScore);
        assert!(Sample::new(image, prompt, rating).is_ok());
    }

    #[test]
    fn rating_normalization() {
        let r = RatingSample::normalize_all(&[2.0, 4.0, 3.0]).unwrap();
        let s: Vec<f64> = r.iter().map(|r| r.score()).collect();
        assert_eq!(s, vec![0.0, 1.0, 0.5]);
    }

    fn prompt_strategy() -> impl Strategy<Value = PromptSpec> {
        (0..4usize, 0..4usize, proptest::option::of("[a-zA-Z0-9 :_]{0,24}")).prop_map(|(i, o, q)| {
            let (i, o) = (InputType::ALL[i], OutputType::ALL[o]);
            match q {
                Some(q) => PromptSpec::with_query(i, o, q).unwrap(),
                None => PromptSpec::new(i, o),
            }
        })
    }

    proptest! {
        #[test]
        fn prompt_parse_inverts_render(spec in prompt_strategy()) {
            prop_assert_eq!(PromptSpec::parse(&spec.render()).unwrap(), spec);
        }

        #[test]
        fn prompt_render_is_injective(a in prompt_strategy(), b in prompt_strategy()) {
            prop_assert_eq!(a.render() == b.render(), a == b);
        }
    }
}
