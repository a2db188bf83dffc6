//! Fixation-order overlays: the image upscaled, saccades as lines, fixations
//! as numbered discs.

use uniar::{Result, RgbImage, Scanpath};

/// 3×5 digit glyphs, one row per entry, most significant bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const LINE: [f64; 3] = [1.0, 0.85, 0.0];
const DISC: [f64; 3] = [0.85, 0.1, 0.1];
const RIM: [f64; 3] = [0.0, 0.0, 0.0];
const TEXT: [f64; 3] = [1.0, 1.0, 1.0];
const RADIUS: i64 = 8;
const MIN_SIDE: usize = 256;

struct Canvas {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [f64; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            let i = (y as usize * self.w + x as usize) * 3;
            self.data[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64)) {
        let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let (x, y) = ((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1)] {
                self.put(x + dx, y + dy, LINE);
            }
        }
    }

    fn disc(&mut self, cx: i64, cy: i64) {
        for dy in -RADIUS..=RADIUS {
            for dx in -RADIUS..=RADIUS {
                let d2 = dx * dx + dy * dy;
                if d2 <= RADIUS * RADIUS {
                    let c = if d2 > (RADIUS - 1) * (RADIUS - 1) { RIM } else { DISC };
                    self.put(cx + dx, cy + dy, c);
                }
            }
        }
    }

    /// Centred decimal label; single digits are drawn at double size.
    fn label(&mut self, cx: i64, cy: i64, n: usize) {
        let digits: Vec<usize> = n.to_string().bytes().map(|b| (b - b'0') as usize).collect();
        let scale: i64 = if digits.len() == 1 { 2 } else { 1 };
        let width = digits.len() as i64 * 4 * scale - scale;
        let (x0, y0) = (cx - width / 2, cy - 5 * scale / 2);
        for (k, &d) in digits.iter().enumerate() {
            for (row, bits) in DIGITS[d].iter().enumerate() {
                for col in 0..3 {
                    if bits & (0b100 >> col) != 0 {
                        for sy in 0..scale {
                            for sx in 0..scale {
                                let x = x0 + (k as i64 * 4 + col) * scale + sx;
                                self.put(x, y0 + row as i64 * scale + sy, TEXT);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Integer upscale factor that brings the longer side to at least 256 pixels.
pub fn overlay_scale(image: &RgbImage) -> usize {
    MIN_SIDE.div_ceil(image.width().max(image.height())).max(1)
}

/// Renders `path` over `image`, numbering fixations from 1.
pub fn render_overlay(image: &RgbImage, path: &Scanpath) -> Result<RgbImage> {
    let s = overlay_scale(image);
    let (w, h) = (image.width() * s, image.height() * s);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            // dim the background so the markers stand out
            data.extend(image.pixel(x / s, y / s).map(|v| 0.6 * v));
        }
    }
    let mut canvas = Canvas { w, h, data };
    // fixation coordinates are continuous, pixel (i, j) covers [i, i+1)
    let centres: Vec<(f64, f64)> = path.fixations().iter().map(|p| (p.x * s as f64, p.y * s as f64)).collect();
    for pair in centres.windows(2) {
        canvas.line(pair[0], pair[1]);
    }
    for (i, &(x, y)) in centres.iter().enumerate() {
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        canvas.disc(cx, cy);
        canvas.label(cx, cy, i + 1);
    }
    RgbImage::new(w, h, canvas.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uniar::Point;

    #[test]
    fn discs_are_numbered_and_lines_join_them() {
        let img = RgbImage::new(32, 32, vec![0.5; 32 * 32 * 3]).unwrap();
        let path = Scanpath::new(vec![Point::new(4.0, 4.0), Point::new(28.0, 4.0), Point::new(16.0, 28.0)], img.frame()).unwrap();
        let out = render_overlay(&img, &path).unwrap();
        assert_eq!((out.width(), out.height()), (256, 256));
        assert_eq!(out.pixel(128, 32), LINE);
        assert_eq!(out.pixel(32 + RADIUS as usize, 32), RIM);
        assert_eq!(out.pixel(28, 36), DISC);
        let text = (0..256 * 256).filter(|&i| out.pixel(i % 256, i / 256) == TEXT).count();
        // "1" (8 lit cells), "2" and "3" (11 each), each cell 2x2
        assert_eq!(text, (8 + 11 + 11) * 4);
        assert_eq!(out.pixel(200, 200), [0.3; 3]);
    }

    #[test]
    fn large_images_are_not_scaled() {
        let img = RgbImage::new(300, 10, vec![0.0; 300 * 10 * 3]).unwrap();
        assert_eq!(overlay_scale(&img), 1);
    }
}
