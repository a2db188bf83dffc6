//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export wraps a plain function returning `Result<_, String>` so the
//! logic is testable off the browser.

use serde_json::json;
use uniar::codec::{decode_robust, encode_scanpath};
use uniar::metrics::{evaluate_scanpath, fixations_to_map, ScanpathEvalInput, ScanpathScores};
use uniar::{FixationSet, Frame, Point, Scanpath};
use wasm_bindgen::prelude::*;

fn points(xs: &[f64], ys: &[f64]) -> Result<Vec<Point>, String> {
    if xs.len() != ys.len() {
        return Err(format!("{} x coordinates for {} y coordinates", xs.len(), ys.len()));
    }
    Ok(xs.iter().zip(ys).map(|(&x, &y)| Point::new(x, y)).collect())
}

fn frame(width: usize, height: usize) -> Result<Frame, String> {
    Frame::new(width, height).map_err(|e| e.to_string())
}

/// Blurred fixation map, row-major, peak 1.
pub fn fixation_map(width: usize, height: usize, xs: &[f64], ys: &[f64], sigma: f64) -> Result<Vec<f64>, String> {
    let set = FixationSet::new(points(xs, ys)?, frame(width, height)?).map_err(|e| e.to_string())?;
    Ok(fixations_to_map(&set, sigma).map_err(|e| e.to_string())?.into_values())
}

pub fn encode(width: usize, height: usize, xs: &[f64], ys: &[f64]) -> Result<String, String> {
    let path = Scanpath::new(points(xs, ys)?, frame(width, height)?).map_err(|e| e.to_string())?;
    Ok(encode_scanpath(&path).map_err(|e| e.to_string())?.to_string())
}

/// `{"valid":bool,"fixations":[[x,y],..]}`; never fails on the token text.
pub fn decode(width: usize, height: usize, tokens: &str) -> Result<String, String> {
    let r = decode_robust(tokens, frame(width, height)?);
    let pts: Vec<[f64; 2]> = r.scanpath().map(|p| p.fixations().iter().map(|q| [q.x, q.y]).collect()).unwrap_or_default();
    Ok(json!({ "valid": r.is_valid(), "fixations": pts }).to_string())
}

/// Scores path A against reference path B as a JSON object keyed by metric
/// name; metrics that need more fixations are `null`.
pub fn compare(width: usize, height: usize, ax: &[f64], ay: &[f64], bx: &[f64], by: &[f64]) -> Result<String, String> {
    let f = frame(width, height)?;
    let a = Scanpath::new(points(ax, ay)?, f).map_err(|e| e.to_string())?;
    let b = Scanpath::new(points(bx, by)?, f).map_err(|e| e.to_string())?;
    let s = evaluate_scanpath(ScanpathEvalInput { pred: &a, gt: &b, segmentation: None, bandwidth: None }).map_err(|e| e.to_string())?;
    let obj: serde_json::Map<String, serde_json::Value> =
        ScanpathScores::NAMES.iter().zip(s.as_array()).map(|(n, v)| (n.to_string(), json!(v))).collect();
    Ok(serde_json::Value::Object(obj).to_string())
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = fixationMap)]
pub fn fixation_map_js(width: usize, height: usize, xs: &[f64], ys: &[f64], sigma: f64) -> Result<Vec<f64>, JsError> {
    fixation_map(width, height, xs, ys, sigma).map_err(js)
}

#[wasm_bindgen(js_name = encodeScanpath)]
pub fn encode_js(width: usize, height: usize, xs: &[f64], ys: &[f64]) -> Result<String, JsError> {
    encode(width, height, xs, ys).map_err(js)
}

#[wasm_bindgen(js_name = decodeTokens)]
pub fn decode_js(width: usize, height: usize, tokens: &str) -> Result<String, JsError> {
    decode(width, height, tokens).map_err(js)
}

#[wasm_bindgen(js_name = compareScanpaths)]
pub fn compare_js(width: usize, height: usize, ax: &[f64], ay: &[f64], bx: &[f64], by: &[f64]) -> Result<String, JsError> {
    compare(width, height, ax, ay, bx, by).map_err(js)
}
