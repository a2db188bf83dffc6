//! Conversion between continuous scanpaths and decoder token strings.
//!
//! A frame is split into 1000 equal bins per axis. A target string looks like
//! `<extra_id_01> x1 y1 and x2 y2 and ... xN yN <extra_id_02>`, which is
//! `3N + 1` tokens counting both sentinels.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{Frame, Point, Scanpath};

pub const BINS: u16 = 1000;
pub const START: &str = "<extra_id_01>";
pub const END: &str = "<extra_id_02>";
pub const SEPARATOR: &str = "and";
/// Sentinels, separator and the integers `0..=999`.
pub const VOCAB_SIZE: usize = 3 + BINS as usize;

/// An atomic decoder token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Start,
    End,
    Sep,
    Num(u16),
}

impl Token {
    pub fn id(self) -> usize {
        match self {
            Token::Start => 0,
            Token::End => 1,
            Token::Sep => 2,
            Token::Num(n) => 3 + n as usize,
        }
    }

    pub fn from_id(id: usize) -> Option<Token> {
        match id {
            0 => Some(Token::Start),
            1 => Some(Token::End),
            2 => Some(Token::Sep),
            n if n < VOCAB_SIZE => Some(Token::Num((n - 3) as u16)),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Start => f.write_str(START),
            Token::End => f.write_str(END),
            Token::Sep => f.write_str(SEPARATOR),
            Token::Num(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            START => Ok(Token::Start),
            END => Ok(Token::End),
            SEPARATOR => Ok(Token::Sep),
            _ => parse_bin(s).map(Token::Num).ok_or_else(|| Error::UnknownToken(s.to_string())),
        }
    }
}

fn parse_bin(s: &str) -> Option<u16> {
    if s.is_empty() || s.len() > 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<u16>().ok().filter(|&n| n < BINS)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedScanpath {
    bins: Vec<(u16, u16)>,
}

impl BinnedScanpath {
    pub fn new(bins: Vec<(u16, u16)>) -> Result<Self> {
        if bins.iter().any(|&(x, y)| x >= BINS || y >= BINS) {
            return Err(Error::Invalid(format!("bin index beyond {}", BINS - 1)));
        }
        Ok(BinnedScanpath { bins })
    }

    pub fn bins(&self) -> &[(u16, u16)] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenString {
    tokens: Vec<Token>,
}

impl TokenString {
    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        TokenString { tokens }
    }

    /// Parses a strictly formatted, space-separated token string.
    pub fn parse(s: &str) -> Result<Self> {
        let tokens = s.split_whitespace().map(Token::from_str).collect::<Result<_>>()?;
        Ok(TokenString { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn ids(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.id()).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for TokenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn bin_of(v: f64, extent: usize) -> u16 {
    let b = (v / extent as f64 * BINS as f64).floor();
    b.clamp(0.0, (BINS - 1) as f64) as u16
}

fn bin_center(b: u16, extent: usize) -> f64 {
    (b as f64 + 0.5) * extent as f64 / BINS as f64
}

/// Index of the equal-width bin containing each coordinate.
pub fn quantize(path: &Scanpath) -> Result<BinnedScanpath> {
    let frame = path.frame();
    if frame.width == 0 || frame.height == 0 {
        return Err(Error::Dimension(format!("cannot bin a {frame} frame")));
    }
    let bins = path
        .fixations()
        .iter()
        .map(|p| (bin_of(p.x, frame.width), bin_of(p.y, frame.height)))
        .collect();
    Ok(BinnedScanpath { bins })
}

/// Maps bins back to their centers in `frame`.
pub fn dequantize(binned: &BinnedScanpath, frame: Frame) -> Vec<Point> {
    binned
        .bins
        .iter()
        .map(|&(x, y)| Point::new(bin_center(x, frame.width), bin_center(y, frame.height)))
        .collect()
}

pub fn encode_target(binned: &BinnedScanpath) -> Result<TokenString> {
    if binned.is_empty() {
        return Err(Error::Empty("scanpath target"));
    }
    let mut tokens = Vec::with_capacity(3 * binned.len() + 1);
    tokens.push(Token::Start);
    for (i, &(x, y)) in binned.bins.iter().enumerate() {
        if i > 0 {
            tokens.push(Token::Sep);
        }
        tokens.push(Token::Num(x));
        tokens.push(Token::Num(y));
    }
    tokens.push(Token::End);
    Ok(TokenString { tokens })
}

pub fn encode_scanpath(path: &Scanpath) -> Result<TokenString> {
    encode_target(&quantize(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Valid(Scanpath),
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub outcome: Outcome,
    pub fixations_recovered: usize,
}

impl DecodeResult {
    fn invalid() -> Self {
        DecodeResult { outcome: Outcome::Invalid, fixations_recovered: 0 }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self.outcome, Outcome::Valid(_))
    }

    pub fn scanpath(&self) -> Option<&Scanpath> {
        match &self.outcome {
            Outcome::Valid(p) => Some(p),
            Outcome::Invalid => None,
        }
    }
}

/// Reads fixations out of arbitrary model output without ever failing.
///
/// The text between the sentinels (or the whole string on the side of a
/// missing sentinel) is split on `and`; pairs of in-range integers are
/// accepted from the start until the first segment that is not exactly such
/// a pair.
pub fn decode_robust(s: &str, frame: Frame) -> DecodeResult {
    if frame.width == 0 || frame.height == 0 {
        return DecodeResult::invalid();
    }
    let (from, region_start) = match s.find(START) {
        Some(i) => (i + START.len(), i + START.len()),
        None => (0, 0),
    };
    let region = match s[from..].find(END) {
        Some(j) => &s[region_start..from + j],
        None => &s[region_start..],
    };

    let mut bins = Vec::new();
    let mut segment: Vec<&str> = Vec::with_capacity(2);
    let mut words = region.split_whitespace().peekable();
    while words.peek().is_some() {
        segment.clear();
        for w in words.by_ref() {
            if w == SEPARATOR {
                break;
            }
            segment.push(w);
        }
        let pair = match segment.as_slice() {
            [x, y] => parse_bin(x).zip(parse_bin(y)),
            _ => None,
        };
        match pair {
            Some(bin) => bins.push(bin),
            None => break,
        }
    }

    if bins.is_empty() {
        return DecodeResult::invalid();
    }
    let n = bins.len();
    let points = dequantize(&BinnedScanpath { bins }, frame);
    match Scanpath::new(points, frame) {
        Ok(path) => DecodeResult { outcome: Outcome::Valid(path), fixations_recovered: n },
        Err(_) => DecodeResult::invalid(),
    }
}

/// Fraction of decodes that produced a valid scanpath; zero for an empty batch.
pub fn valid_rate(results: &[DecodeResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.is_valid()).count() as f64 / results.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(w: usize, h: usize) -> Frame {
        Frame::new(w, h).unwrap()
    }

    fn path(points: &[(f64, f64)], f: Frame) -> Scanpath {
        Scanpath::new(points.iter().map(|&p| p.into()).collect(), f).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let f = frame(1000, 1000);
        assert_eq!(quantize(&path(&[(500.0, 250.0)], f)).unwrap().bins(), &[(500, 250)]);
        assert_eq!(quantize(&path(&[(999.999, 0.0)], f)).unwrap().bins(), &[(999, 0)]);
        let f = frame(640, 480);
        assert_eq!(quantize(&path(&[(320.0, 240.0)], f)).unwrap().bins(), &[(500, 500)]);
    }

    #[test]
    fn dequantize_examples() {
        let b = BinnedScanpath::new(vec![(500, 250), (0, 999)]).unwrap();
        let p = dequantize(&b, frame(1000, 1000));
        assert_eq!(p, vec![Point::new(500.5, 250.5), Point::new(0.5, 999.5)]);
        let b = BinnedScanpath::new(vec![(500, 500)]).unwrap();
        let p = dequantize(&b, frame(640, 480))[0];
        assert!((p.x - 320.32).abs() < 1e-9 && (p.y - 240.24).abs() < 1e-9);
    }

    #[test]
    fn encode_examples() {
        let one = BinnedScanpath::new(vec![(12, 34)]).unwrap();
        assert_eq!(encode_target(&one).unwrap().to_string(), "<extra_id_01> 12 34 <extra_id_02>");
        let two = BinnedScanpath::new(vec![(12, 34), (56, 78)]).unwrap();
        assert_eq!(
            encode_target(&two).unwrap().to_string(),
            "<extra_id_01> 12 34 and 56 78 <extra_id_02>"
        );
        let three = BinnedScanpath::new(vec![(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(encode_target(&three).unwrap().len(), 3 * 3 + 1);
        assert!(encode_target(&BinnedScanpath::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn decode_examples() {
        let f = frame(1000, 1000);
        let r = decode_robust("<extra_id_01> 12 34 and 56 78 <extra_id_02>", f);
        assert_eq!(r.fixations_recovered, 2);
        assert_eq!(r.scanpath().unwrap().fixations(), &[Point::new(12.5, 34.5), Point::new(56.5, 78.5)]);

        let r = decode_robust("<extra_id_01> 12 34 and foo 78 <extra_id_02>", f);
        assert_eq!(r.fixations_recovered, 1);

        let r = decode_robust("garbage with no numbers", f);
        assert_eq!(r, DecodeResult { outcome: Outcome::Invalid, fixations_recovered: 0 });
    }

    #[test]
    fn decode_handles_missing_sentinels() {
        let f = frame(1000, 1000);
        assert_eq!(decode_robust("1 2 and 3 4 <extra_id_02> 5 6", f).fixations_recovered, 2);
        assert_eq!(decode_robust("junk <extra_id_01> 1 2 and 3", f).fixations_recovered, 1);
        assert_eq!(decode_robust("7 8", f).fixations_recovered, 1);
        assert_eq!(decode_robust("1000 2", f).fixations_recovered, 0);
        assert_eq!(decode_robust("1 2 3 and 4 5", f).fixations_recovered, 0);
        assert_eq!(decode_robust("+1 2", f).fixations_recovered, 0);
        assert_eq!(decode_robust("", f).fixations_recovered, 0);
    }

    #[test]
    fn token_ids_round_trip() {
        for id in 0..VOCAB_SIZE {
            assert_eq!(Token::from_id(id).unwrap().id(), id);
        }
        assert_eq!(Token::from_id(VOCAB_SIZE), None);
    }

    #[test]
    fn valid_rate_counts() {
        let f = frame(10, 10);
        let rs = vec![decode_robust("1 2", f), decode_robust("x", f)];
        assert_eq!(valid_rate(&rs), 0.5);
    }

    fn scanpath_strategy() -> impl Strategy<Value = Scanpath> {
        (1usize..2000, 1usize..2000).prop_flat_map(|(w, h)| {
            proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..=20).prop_map(move |pts| {
                let f = Frame::new(w, h).unwrap();
                let pts = pts.into_iter().map(|(a, b)| Point::new(a * w as f64, b * h as f64)).collect();
                Scanpath::new(pts, f).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_within_half_bin(p in scanpath_strategy()) {
            let f = p.frame();
            let s = encode_scanpath(&p).unwrap().to_string();
            let r = decode_robust(&s, f);
            let q = r.scanpath().unwrap();
            prop_assert_eq!(q.len(), p.len());
            for (a, b) in p.fixations().iter().zip(q.fixations()) {
                prop_assert!((a.x - b.x).abs() <= f.width as f64 / 2000.0 + 1e-9);
                prop_assert!((a.y - b.y).abs() <= f.height as f64 / 2000.0 + 1e-9);
            }
        }

        #[test]
        fn truncated_prefix_keeps_complete_pairs(p in scanpath_strategy(), cut in 1usize..20) {
            let tokens = encode_scanpath(&p).unwrap();
            let k = cut.min(p.len());
            // start sentinel + k pairs + (k - 1) separators
            let prefix = TokenString::from_tokens(tokens.tokens()[..3 * k].to_vec());
            let r = decode_robust(&prefix.to_string(), p.frame());
            prop_assert_eq!(r.fixations_recovered, k);
        }

        #[test]
        fn decode_is_total(s in any::<Vec<u8>>()) {
            let text = String::from_utf8_lossy(&s);
            let r = decode_robust(&text, Frame::new(100, 100).unwrap());
            prop_assert_eq!(r.is_valid(), r.fixations_recovered > 0);
        }
    }
}
