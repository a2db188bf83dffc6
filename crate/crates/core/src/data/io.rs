//! Text grids, binary PPM/PGM rasters, scanpath JSON lines, rating CSV and
//! the training-sample manifest.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetHandle;
use crate::error::{Error, Result};
use crate::metrics::scanpath::SegmentationMap;
use crate::types::{Frame, GrayMap, InputType, OutputType, Point, PromptSpec, RatingSample, RgbImage, Sample, Scanpath, Target};

pub const GRID_MAGIC: &str = "UARGRID";

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Float(GrayMap),
    Int(SegmentationMap),
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn grid_to_string(grid: &Grid) -> String {
    let mut s = String::new();
    let (w, h, kind) = match grid {
        Grid::Float(m) => (m.width(), m.height(), "float"),
        Grid::Int(m) => (m.width(), m.height(), "int"),
    };
    s.push_str(&format!("{GRID_MAGIC} {w} {h} {kind}\n"));
    for y in 0..h {
        let row: Vec<String> = (0..w)
            .map(|x| match grid {
                Grid::Float(m) => format!("{:.16e}", m.get(x, y)),
                Grid::Int(m) => m.labels()[y * w + x].to_string(),
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    write_text(path, &grid_to_string(grid))
}

pub fn write_map_grid(path: &Path, map: &GrayMap) -> Result<()> {
    write_grid(path, &Grid::Float(map.clone()))
}

/// 1-based column of the `index`-th whitespace-separated field of `line`.
fn field_column(line: &str, index: usize) -> usize {
    let mut seen = 0;
    let mut in_field = false;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            in_field = false;
        } else if !in_field {
            if seen == index {
                return i + 1;
            }
            seen += 1;
            in_field = true;
        }
    }
    line.len() + 1
}

pub fn parse_grid(text: &str, path: &Path) -> Result<Grid> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(path, 1, 1, "empty grid file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&GRID_MAGIC) {
        return Err(Error::parse(path, 1, 1, format!("expected `{GRID_MAGIC}`")));
    }
    let dim = |i: usize, what: &str| -> Result<usize> {
        let f = fields.get(i).ok_or_else(|| Error::parse(path, 1, header.len() + 1, format!("missing {what}")))?;
        f.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(path, 1, field_column(header, i), format!("{what} `{f}` is not a positive integer")))
    };
    let width = dim(1, "width")?;
    let height = dim(2, "height")?;
    let is_int = match fields.get(3) {
        Some(&"float") => false,
        Some(&"int") => true,
        Some(other) => {
            return Err(Error::parse(path, 1, field_column(header, 3), format!("value kind `{other}` is neither float nor int")))
        }
        None => return Err(Error::parse(path, 1, header.len() + 1, "missing value kind")),
    };
    if fields.len() > 4 {
        return Err(Error::parse(path, 1, field_column(header, 4), "unexpected trailing header field"));
    }
    let mut floats = Vec::new();
    let mut ints = Vec::new();
    for row in 0..height {
        let line_no = row + 2;
        let line = lines.next().ok_or_else(|| Error::parse(path, line_no, 1, format!("expected {height} rows")))?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != width {
            return Err(Error::parse(path, line_no, 1, format!("expected {width} values, found {}", values.len())));
        }
        for (i, v) in values.iter().enumerate() {
            let bad = |kind: &str| Error::parse(path, line_no, field_column(line, i), format!("`{v}` is not {kind}"));
            if is_int {
                ints.push(v.parse::<u32>().map_err(|_| bad("a non-negative integer"))?);
            } else {
                let f = v.parse::<f64>().map_err(|_| bad("a number"))?;
                if !f.is_finite() {
                    return Err(bad("finite"));
                }
                floats.push(f);
            }
        }
    }
    if let Some((i, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(path, height + 2 + i, 1, "unexpected data after the last row"));
    }
    Ok(if is_int {
        Grid::Int(SegmentationMap::new(width, height, ints)?)
    } else {
        Grid::Float(GrayMap::new(width, height, floats)?)
    })
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    parse_grid(&fs::read_to_string(path)?, path)
}

/// Float maps load directly; integer grids are accepted as maps too.
pub fn read_map(path: &Path) -> Result<GrayMap> {
    if is_pgm(path)? {
        return read_pgm(path);
    }
    match read_grid(path)? {
        Grid::Float(m) => Ok(m),
        Grid::Int(s) => GrayMap::new(s.width(), s.height(), s.labels().iter().map(|&v| v as f64).collect()),
    }
}

pub fn read_segmentation(path: &Path) -> Result<SegmentationMap> {
    match read_grid(path)? {
        Grid::Int(s) => Ok(s),
        Grid::Float(_) => Err(Error::Invalid(format!("{} holds float values, expected int labels", path.display()))),
    }
}

fn is_pgm(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 2];
    let mut f = fs::File::open(path)?;
    use std::io::Read;
    Ok(f.read(&mut magic)? == 2 && &magic == b"P5")
}

/// Header fields of a binary Netpbm file and the offset of its pixel data.
fn netpbm_header(bytes: &[u8], magic: &[u8; 2], path: &Path) -> Result<(usize, usize, usize, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::parse(path, 1, 1, format!("expected `{}` header", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let line = bytes[..start].iter().filter(|&&b| b == b'\n').count() + 1;
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v: &usize| v > 0)
            .ok_or_else(|| Error::parse(path, line, start + 1, "malformed header value"))?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(path, 1, pos + 1, "header must end in whitespace"));
    }
    Ok((fields[0], fields[1], fields[2], pos + 1))
}

/// Binary PPM (P6) with 8-bit channels.
pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v * 255.0).round() as u8));
    fs::write(path, out)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path)?;
    let (w, h, maxval, at) = netpbm_header(&bytes, b"P6", path)?;
    let wide = maxval > 255;
    let n = w * h * 3 * if wide { 2 } else { 1 };
    if bytes.len() < at + n {
        return Err(Error::Invalid(format!("{}: pixel data truncated", path.display())));
    }
    let px = &bytes[at..at + n];
    let data: Vec<f64> = if wide {
        px.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64).collect()
    } else {
        px.iter().map(|&b| b as f64 / maxval as f64).collect()
    };
    RgbImage::new(w, h, data.into_iter().map(|v| v.min(1.0)).collect())
}

/// Binary 16-bit PGM (P5); values must lie in [0, 1].
pub fn write_pgm(path: &Path, map: &GrayMap) -> Result<()> {
    if !map.is_unit_range() {
        return Err(Error::Invalid("PGM output requires values in [0, 1]".into()));
    }
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for v in map.values() {
        out.extend_from_slice(&((v * 65535.0).round() as u16).to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayMap> {
    let bytes = fs::read(path)?;
    let (w, h, maxval, at) = netpbm_header(&bytes, b"P5", path)?;
    let wide = maxval > 255;
    let n = w * h * if wide { 2 } else { 1 };
    if bytes.len() < at + n {
        return Err(Error::Invalid(format!("{}: pixel data truncated", path.display())));
    }
    let px = &bytes[at..at + n];
    let data: Vec<f64> = if wide {
        px.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64).collect()
    } else {
        px.iter().map(|&b| b as f64 / maxval as f64).collect()
    };
    GrayMap::new(w, h, data)
}

/// One line of a scanpath file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanpathRecord {
    frame: [usize; 2],
    fixations: Vec<[f64; 2]>,
    input_type: InputType,
    output_type: OutputType,
    query: Option<String>,
}

pub fn scanpaths_to_string(items: &[(Scanpath, PromptSpec)]) -> Result<String> {
    let mut s = String::new();
    for (path, prompt) in items {
        let rec = ScanpathRecord {
            frame: [path.frame().width, path.frame().height],
            fixations: path.fixations().iter().map(|p| [p.x, p.y]).collect(),
            input_type: prompt.input_type(),
            output_type: prompt.output_type(),
            query: prompt.query().map(str::to_string),
        };
        s.push_str(&serde_json::to_string(&rec)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_scanpaths(path: &Path, items: &[(Scanpath, PromptSpec)]) -> Result<()> {
    write_text(path, &scanpaths_to_string(items)?)
}

pub fn parse_scanpaths(text: &str, path: &Path) -> Result<Vec<(Scanpath, PromptSpec)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let rec: ScanpathRecord = serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e.column(), e.to_string()))?;
        let invalid = |e: Error| Error::parse(path, lineno, 1, e.to_string());
        let frame = Frame::new(rec.frame[0], rec.frame[1]).map_err(invalid)?;
        let points = rec.fixations.iter().map(|&[x, y]| Point::new(x, y)).collect();
        let scanpath = Scanpath::new(points, frame).map_err(invalid)?;
        let prompt = match rec.query {
            Some(q) => PromptSpec::with_query(rec.input_type, rec.output_type, q).map_err(invalid)?,
            None => PromptSpec::new(rec.input_type, rec.output_type),
        };
        out.push((scanpath, prompt));
    }
    Ok(out)
}

pub fn read_scanpaths(path: &Path) -> Result<Vec<(Scanpath, PromptSpec)>> {
    parse_scanpaths(&fs::read_to_string(path)?, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRow {
    pub id: String,
    pub predicted: f64,
    pub observed: f64,
}

/// CSV with the header `id,predicted,observed`.
pub fn read_rating_csv(path: &Path) -> Result<Vec<RatingRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "predicted", "observed"] {
        return Err(Error::parse(path, 1, 1, "header must be `id,predicted,observed`"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, i + 1, format!("`{}` is not a finite number", &rec[i])))
        };
        rows.push(RatingRow { id: rec[0].to_string(), predicted: num(1)?, observed: num(2)? });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::parse(path, line, 1, format!("{kind:?}")),
    }
}

pub fn write_rating_csv(path: &Path, rows: &[RatingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["id", "predicted", "observed"]).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([r.id.clone(), format!("{}", r.predicted), format!("{}", r.observed)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// One training sample in a `samples.jsonl` manifest; paths are relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRecord {
    image: PathBuf,
    prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heatmap: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scanpath: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

/// Loads a manifest and groups its samples into handles by prompt type pair,
/// in order of first appearance.
pub fn read_manifest(path: &Path) -> Result<Vec<DatasetHandle>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = fs::File::open(path)?;
    let mut groups: Vec<(InputType, OutputType, Vec<Sample>)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let at = |e: Error| Error::parse(path, lineno, 1, e.to_string());
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.column(), e.to_string()))?;
        let image = read_ppm(&dir.join(&rec.image)).map_err(at)?;
        let prompt = PromptSpec::parse(&rec.prompt).map_err(at)?;
        let target = match (rec.heatmap, rec.scanpath, rec.score) {
            (Some(h), None, None) => Target::Heatmap(read_map(&dir.join(h)).map_err(at)?),
            (None, Some(p), None) => {
                let pts = p.iter().map(|&[x, y]| Point::new(x, y)).collect();
                Target::Scanpath(Scanpath::new(pts, image.frame()).map_err(at)?)
            }
            (None, None, Some(s)) => Target::Rating(RatingSample::new(s).map_err(at)?),
            _ => return Err(Error::parse(path, lineno, 1, "exactly one of heatmap, scanpath, score is required")),
        };
        let sample = Sample::new(image, prompt.clone(), target).map_err(at)?;
        let key = (prompt.input_type(), prompt.output_type());
        match groups.iter_mut().find(|g| (g.0, g.1) == key) {
            Some(g) => g.2.push(sample),
            None => groups.push((key.0, key.1, vec![sample])),
        }
    }
    groups
        .into_iter()
        .map(|(i, o, samples)| DatasetHandle::new(format!("{} / {}", i.as_str(), o.as_str()), i, o, samples))
        .collect()
}

/// Writes every sample of `handles` as files under `dir` plus `dir/samples.jsonl`.
pub fn write_manifest(dir: &Path, handles: &[DatasetHandle]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join("samples.jsonl");
    let mut out = fs::File::create(&manifest)?;
    let mut k = 0;
    for h in handles {
        for s in h.samples() {
            let image = PathBuf::from(format!("{k:05}.ppm"));
            write_ppm(&dir.join(&image), &s.image)?;
            let mut rec = ManifestRecord { image, prompt: s.prompt.render(), heatmap: None, scanpath: None, score: None };
            match &s.target {
                Target::Heatmap(m) => {
                    let p = PathBuf::from(format!("{k:05}.grid"));
                    write_map_grid(&dir.join(&p), m)?;
                    rec.heatmap = Some(p);
                }
                Target::Scanpath(p) => rec.scanpath = Some(p.fixations().iter().map(|f| [f.x, f.y]).collect()),
                Target::Rating(r) => rec.score = Some(r.score()),
            }
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
            k += 1;
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn float_grid_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let map = GrayMap::from_fn(7, 5, |_, _| rng.random_range(-1e3..1e3)).unwrap();
        let back = parse_grid(&grid_to_string(&Grid::Float(map.clone())), Path::new("m")).unwrap();
        let Grid::Float(back) = back else { panic!() };
        let diff = map.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9);
    }

    #[test]
    fn int_grid_layout() {
        let seg = SegmentationMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let text = grid_to_string(&Grid::Int(seg.clone()));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_grid(&text, Path::new("s")).unwrap(), Grid::Int(seg));
    }

    #[test]
    fn malformed_header_names_line_and_column() {
        match parse_grid("UARGRID 4 x float\n", Path::new("g")).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (1, 11)),
            e => panic!("{e}"),
        }
        match parse_grid("UARGRID 2 1 int\n1 z\n", Path::new("g")).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 3)),
            e => panic!("{e}"),
        }
        assert!(parse_grid("GRID 1 1 int\n0\n", Path::new("g")).is_err());
    }

    #[test]
    fn raster_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(3, 2, (0..18).map(|i| i as f64 / 17.0).collect()).unwrap();
        let p = dir.path().join("a.ppm");
        write_ppm(&p, &img).unwrap();
        let back = read_ppm(&p).unwrap();
        assert!(img.data().iter().zip(back.data()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-12));

        let map = GrayMap::from_fn(4, 3, |x, y| (x + y) as f64 / 5.0).unwrap();
        let p = dir.path().join("m.pgm");
        write_pgm(&p, &map).unwrap();
        let back = read_map(&p).unwrap();
        assert!(map.values().iter().zip(back.values()).all(|(a, b)| (a - b).abs() <= 0.5 / 65535.0 + 1e-12));
    }

    #[test]
    fn scanpath_lines() {
        let f = Frame::new(100, 50).unwrap();
        let items = vec![
            (Scanpath::new(vec![Point::new(0.1, 0.2), Point::new(99.5, 49.999)], f).unwrap(), PromptSpec::new(InputType::Webpage, OutputType::Scanpath)),
            (
                Scanpath::new(vec![Point::new(1.0 / 3.0, 7.0)], f).unwrap(),
                PromptSpec::with_query(InputType::NaturalImage, OutputType::Scanpath, "a cup").unwrap(),
            ),
        ];
        let text = scanpaths_to_string(&items).unwrap();
        assert_eq!(parse_scanpaths(&text, Path::new("s")).unwrap(), items);

        let empty = r#"{"frame":[10,10],"fixations":[],"input_type":"webpage","output_type":"scanpath","query":null}"#;
        assert!(parse_scanpaths(empty, Path::new("s")).is_err());
        let outside = r#"{"frame":[10,10],"fixations":[[10.0,1.0]],"input_type":"webpage","output_type":"scanpath","query":null}"#;
        assert!(parse_scanpaths(outside, Path::new("s")).is_err());
    }

    #[test]
    fn rating_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![
            RatingRow { id: "a".into(), predicted: 0.25, observed: 0.5 },
            RatingRow { id: "b".into(), predicted: 1.0 / 3.0, observed: 0.75 },
        ];
        write_rating_csv(&p, &rows).unwrap();
        assert_eq!(read_rating_csv(&p).unwrap(), rows);
        fs::write(&p, "id,pred,obs\na,1,2\n").unwrap();
        assert!(read_rating_csv(&p).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let handles = vec![
            super::super::synth::gen_rating_task_sized(1, 2, 8).unwrap(),
            super::super::synth::gen_scanpath_task_sized(2, 2, 32).unwrap(),
        ];
        let manifest = write_manifest(dir.path(), &handles).unwrap();
        let back = read_manifest(&manifest).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].len(), 2);
        assert_eq!(back[1].samples()[0].target, handles[1].samples()[0].target);
    }
}
