//! Supersampled stroke rasterizer.
//!
//! A glyph is its skeleton after font styling (corner rounding, serifs,
//! aspect, slant), mapped to pixels by the latent scale, rotation and
//! translation. Strokes are capsules of the font's width drawn on a 4x
//! supersampled grid and box-filtered down, then tinted and noised.

use rand::Rng;

use crate::rng;

use super::font::{font_style, FontStyle};
use super::latent::LatentSpec;
use super::skeleton::{is_closed, skeleton, Point};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
const SUPERSAMPLE: usize = 4;
/// Side of the skeleton's unit square in pixels at scale 1.
const GLYPH_BOX: f64 = 24.0;
const SERIF_HALF_LEN: f64 = 1.2;

/// 32x32x1 grayscale image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f32>,
}

impl Image {
    pub const SHAPE: [usize; 3] = [IMAGE_SIDE, IMAGE_SIDE, 1];

    pub fn from_pixels(pixels: Vec<f32>) -> Option<Image> {
        (pixels.len() == IMAGE_LEN && pixels.iter().all(|p| (0.0..=1.0).contains(p)))
            .then_some(Image { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    /// Mean absolute per-pixel difference.
    pub fn l1_distance(&self, other: &Image) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| f64::from((a - b).abs()))
            .sum::<f64>()
            / IMAGE_LEN as f64
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Chaikin corner cutting; `q` is the cut ratio in `(0, 0.5]`.
fn chaikin(pts: &[Point], q: f64, iterations: usize) -> Vec<Point> {
    let closed = is_closed(pts);
    let mut cur = pts.to_vec();
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(cur.len() * 2);
        if !closed {
            next.push(cur[0]);
        }
        for w in cur.windows(2) {
            next.push(lerp(w[0], w[1], q));
            next.push(lerp(w[0], w[1], 1.0 - q));
        }
        if closed {
            let first = next[0];
            next.push(first);
        } else {
            next.push(*cur.last().expect("non-empty stroke"));
        }
        cur = next;
    }
    cur
}

fn width_units(font: &FontStyle) -> f64 {
    font.stroke_width * IMAGE_SIDE as f64 / GLYPH_BOX
}

/// Styled strokes centred on the origin in skeleton units (`y` down).
fn styled_strokes(char_id: usize, font: &FontStyle) -> Vec<Vec<Point>> {
    let sk = skeleton(char_id).expect("char_id validated");
    let mut strokes: Vec<Vec<Point>> = sk
        .strokes
        .iter()
        .map(|s| {
            if font.roundness > 0.0 && s.len() > 2 {
                chaikin(s, 0.3 * font.roundness, 3)
            } else {
                s.clone()
            }
        })
        .collect();
    if font.serif {
        let half = SERIF_HALF_LEN * width_units(font);
        let mut serifs = Vec::new();
        for s in sk.strokes.iter().filter(|s| !is_closed(s)) {
            for (end, next) in [(s[0], s[1]), (s[s.len() - 1], s[s.len() - 2])] {
                let d = [end[0] - next[0], end[1] - next[1]];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let perp = [-d[1] / n * half, d[0] / n * half];
                serifs.push(vec![
                    [end[0] - perp[0], end[1] - perp[1]],
                    [end[0] + perp[0], end[1] + perp[1]],
                ]);
            }
        }
        strokes.extend(serifs);
    }
    let shear = font.slant.tan();
    for p in strokes.iter_mut().flatten() {
        let u = (p[0] - 0.5) * font.aspect;
        let v = p[1] - 0.5;
        *p = [u - shear * v, v];
    }
    strokes
}

/// Map styled skeleton units to pixel offsets from the image centre.
fn to_pixels(p: Point, scale: f64, rotation: f64) -> Point {
    let (s, c) = rotation.sin_cos();
    let k = GLYPH_BOX * scale;
    [k * (c * p[0] - s * p[1]), k * (s * p[0] + c * p[1])]
}

/// Half-extent `[x, y]` in pixels of the glyph (stroke width included) around
/// its centre for the given scale and rotation.
pub fn glyph_extent(char_id: usize, font_id: usize, scale: f64, rotation: f64) -> [f64; 2] {
    let font = font_style(font_id).expect("font_id validated");
    let half_w = 0.5 * font.stroke_width * IMAGE_SIDE as f64 * scale;
    let mut ext = [0.0f64; 2];
    for p in styled_strokes(char_id, &font).into_iter().flatten() {
        let q = to_pixels(p, scale, rotation);
        ext[0] = ext[0].max(q[0].abs());
        ext[1] = ext[1].max(q[1].abs());
    }
    [ext[0] + half_w, ext[1] + half_w]
}

/// Fraction of each pixel covered by the glyph, before tinting and noise.
pub fn coverage(spec: &LatentSpec) -> Vec<f64> {
    let font = font_style(spec.font_id).expect("font_id validated");
    let side = IMAGE_SIDE * SUPERSAMPLE;
    let mut hit = vec![false; side * side];
    let centre = [
        IMAGE_SIDE as f64 / 2.0 + spec.translate[0] * IMAGE_SIDE as f64,
        IMAGE_SIDE as f64 / 2.0 + spec.translate[1] * IMAGE_SIDE as f64,
    ];
    let radius = 0.5 * font.stroke_width * IMAGE_SIDE as f64 * spec.scale;
    let sub = 1.0 / SUPERSAMPLE as f64;
    for stroke in styled_strokes(spec.char_id, &font) {
        let pts: Vec<Point> = stroke
            .iter()
            .map(|&p| {
                let q = to_pixels(p, spec.scale, spec.rotation);
                [q[0] + centre[0], q[1] + centre[1]]
            })
            .collect();
        let segments: Vec<(Point, Point)> = if pts.len() == 1 {
            vec![(pts[0], pts[0])]
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for (a, b) in segments {
            let lo = |i: usize| ((a[i].min(b[i]) - radius) * SUPERSAMPLE as f64).floor().max(0.0) as usize;
            let hi = |i: usize| {
                (((a[i].max(b[i]) + radius) * SUPERSAMPLE as f64).ceil() as usize).min(side)
            };
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            for sy in lo(1)..hi(1) {
                let y = (sy as f64 + 0.5) * sub;
                for sx in lo(0)..hi(0) {
                    let x = (sx as f64 + 0.5) * sub;
                    let t = if len2 > 0.0 {
                        (((x - a[0]) * d[0] + (y - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (px, py) = (a[0] + t * d[0] - x, a[1] + t * d[1] - y);
                    if px * px + py * py <= radius * radius {
                        hit[sy * side + sx] = true;
                    }
                }
            }
        }
    }
    let mut cov = vec![0.0; IMAGE_LEN];
    let norm = (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for (i, c) in cov.iter_mut().enumerate() {
        let (py, px) = (i / IMAGE_SIDE, i % IMAGE_SIDE);
        let mut n = 0;
        for sy in 0..SUPERSAMPLE {
            let row = (py * SUPERSAMPLE + sy) * side + px * SUPERSAMPLE;
            n += hit[row..row + SUPERSAMPLE].iter().filter(|h| **h).count();
        }
        *c = n as f64 / norm;
    }
    cov
}

/// Render a latent description into a 32x32 grayscale image.
pub fn render(spec: &LatentSpec) -> Image {
    let cov = coverage(spec);
    let mut noise = rng::stream(spec.noise_seed);
    let (fg, bg) = (spec.fg_intensity, spec.bg_intensity);
    let pixels = cov
        .into_iter()
        .map(|c| {
            let mut v = bg + c * (fg - bg);
            if spec.noise_amp > 0.0 {
                v += noise.random_range(-spec.noise_amp..=spec.noise_amp);
            }
            v.clamp(0.0, 1.0) as f32
        })
        .collect();
    Image { pixels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphgen::latent::{sample_latents, NuisanceRanges};

    fn base(char_id: usize, font_id: usize) -> LatentSpec {
        LatentSpec {
            char_id,
            font_id,
            translate: [0.0, 0.0],
            scale: 0.85,
            rotation: 0.0,
            fg_intensity: 1.0,
            bg_intensity: 0.0,
            noise_seed: 1,
            noise_amp: 0.0,
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let mut s = rng::stream(5);
        for c in 0..10 {
            let spec = sample_latents(&mut s, c, (c * 3) % 10, &NuisanceRanges::default()).unwrap();
            let a = render(&spec);
            let b = render(&spec);
            assert_eq!(a, b);
            assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            assert_eq!(a.pixels().len(), 32 * 32);
        }
    }

    #[test]
    fn clean_render_spans_bg_to_fg() {
        let img = render(&base(3, 4));
        let min = img.pixels().iter().copied().fold(f32::INFINITY, f32::min);
        let max = img.pixels().iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
        // fringe values are multiples of 1/16 coverage
        for p in img.pixels() {
            let k = p * 16.0;
            assert!((k - k.round()).abs() < 1e-5);
        }
    }

    #[test]
    fn ink_fraction_within_bounds_for_all_cells() {
        let mut s = rng::stream(9);
        for c in 0..10 {
            for f in 0..10 {
                for _ in 0..10 {
                    let spec = sample_latents(&mut s, c, f, &NuisanceRanges::default()).unwrap();
                    let img = render(&spec);
                    let (fg, bg) = (spec.fg_intensity as f32, spec.bg_intensity as f32);
                    let ink = img
                        .pixels()
                        .iter()
                        .filter(|&&p| (p - fg).abs() < (p - bg).abs())
                        .count() as f64
                        / IMAGE_LEN as f64;
                    assert!((0.05..=0.8).contains(&ink), "char {c} font {f}: ink {ink}");
                }
            }
        }
    }

    #[test]
    fn characters_are_pixel_distinct() {
        // Minimum over all 45 pairs, per font, of the mean L1 distance.
        let mut min_d = f64::INFINITY;
        for f in 0..10 {
            let imgs: Vec<Image> = (0..10).map(|c| render(&base(c, f))).collect();
            for i in 0..10 {
                for j in i + 1..10 {
                    min_d = min_d.min(imgs[i].l1_distance(&imgs[j]));
                }
            }
        }
        assert!(min_d >= 0.02, "min pairwise L1 {min_d}");
    }

    #[test]
    fn fonts_change_every_glyph() {
        for c in 0..10 {
            let imgs: Vec<Image> = (0..10).map(|f| render(&base(c, f))).collect();
            for i in 0..10 {
                for j in i + 1..10 {
                    assert!(imgs[i].l1_distance(&imgs[j]) > 0.0, "char {c} fonts {i},{j}");
                }
            }
        }
    }

    #[test]
    fn nearest_centroid_separates_characters() {
        // 100 clean renders (10 per char); leave-one-out nearest centroid.
        let mut s = rng::stream(17);
        let ranges = NuisanceRanges::clean();
        let mut data: Vec<(usize, Image)> = Vec::new();
        for c in 0..10 {
            for f in 0..10 {
                let spec = sample_latents(&mut s, c, f, &ranges).unwrap();
                data.push((c, render(&spec)));
            }
        }
        let mut sums = vec![vec![0.0f64; IMAGE_LEN]; 10];
        for (c, img) in &data {
            for (acc, p) in sums[*c].iter_mut().zip(img.pixels()) {
                *acc += f64::from(*p);
            }
        }
        let mut correct = 0;
        for (c, img) in &data {
            let mut best = (f64::INFINITY, 0);
            for (k, sum) in sums.iter().enumerate() {
                let n = if k == *c { 9.0 } else { 10.0 };
                let d: f64 = sum
                    .iter()
                    .zip(img.pixels())
                    .map(|(s, p)| {
                        let own = if k == *c { f64::from(*p) } else { 0.0 };
                        ((s - own) / n - f64::from(*p)).powi(2)
                    })
                    .sum();
                if d < best.0 {
                    best = (d, k);
                }
            }
            correct += usize::from(best.1 == *c);
        }
        assert!(correct >= 90, "nearest-centroid accuracy {correct}/100");
    }
}
