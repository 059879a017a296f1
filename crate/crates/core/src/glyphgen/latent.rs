use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::font::{font_style, NUM_FONTS};
use super::render::{glyph_extent, IMAGE_SIDE};
use super::skeleton::NUM_CHARS;

/// Complete generative description of one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub char_id: usize,
    pub font_id: usize,
    /// Offset of the glyph centre from the image centre, as a fraction of the image side.
    pub translate: [f64; 2],
    pub scale: f64,
    pub rotation: f64,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub noise_seed: u64,
    pub noise_amp: f64,
}

/// Sampling ranges of the nuisance factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NuisanceRanges {
    pub scale: [f64; 2],
    /// Rotation is drawn from `[-rotation, rotation]`.
    pub rotation: f64,
    /// Largest translation per axis as a fraction of the image side,
    /// further limited so the glyph stays inside the image.
    pub translate: f64,
    pub noise_amp: [f64; 2],
    pub fg: [f64; 2],
    pub bg: [f64; 2],
}

impl Default for NuisanceRanges {
    fn default() -> Self {
        NuisanceRanges {
            scale: [0.75, 1.0],
            rotation: 0.15,
            translate: 0.08,
            noise_amp: [0.0, 0.1],
            fg: [0.7, 1.0],
            bg: [0.0, 0.3],
        }
    }
}

impl NuisanceRanges {
    /// Noise-free, centred, unrotated, full-contrast renders.
    pub fn clean() -> Self {
        NuisanceRanges {
            scale: [0.85, 0.85],
            rotation: 0.0,
            translate: 0.0,
            noise_amp: [0.0, 0.0],
            fg: [1.0, 1.0],
            bg: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1];
        let within = |r: [f64; 2], lo: f64, hi: f64| ordered(r) && r[0] >= lo && r[1] <= hi;
        if !within(self.scale, 0.6, 1.0)
            || !within(self.noise_amp, 0.0, 0.1)
            || !within(self.fg, 0.0, 1.0)
            || !within(self.bg, 0.0, 1.0)
            || !(0.0..=0.5).contains(&self.translate)
            || !(0.0..=std::f64::consts::FRAC_PI_4).contains(&self.rotation)
        {
            return Err(Error::domain(format!("nuisance ranges out of bounds: {self:?}")));
        }
        if self.fg[0] - self.bg[1] < 0.3 && self.bg[0] - self.fg[1] < 0.3 {
            return Err(Error::domain("fg/bg ranges cannot guarantee 0.3 contrast"));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

pub(crate) fn check_ids(char_id: usize, font_id: usize) -> Result<()> {
    if char_id >= NUM_CHARS {
        return Err(Error::domain(format!("char_id {char_id} outside [0, {NUM_CHARS})")));
    }
    if font_id >= NUM_FONTS {
        return Err(Error::domain(format!("font_id {font_id} outside [0, {NUM_FONTS})")));
    }
    Ok(())
}

/// Margin kept between the glyph's bounding box and the image border, in pixels.
const BORDER: f64 = 0.5;

/// Draw the nuisance factors of one image of `(char_id, font_id)`.
pub fn sample_latents<R: Rng>(
    rng: &mut R,
    char_id: usize,
    font_id: usize,
    ranges: &NuisanceRanges,
) -> Result<LatentSpec> {
    check_ids(char_id, font_id)?;
    let half = IMAGE_SIDE as f64 / 2.0;
    let mut scale = uniform(rng, ranges.scale);
    let rotation = if ranges.rotation > 0.0 {
        rng.random_range(-ranges.rotation..ranges.rotation)
    } else {
        0.0
    };
    // The extent is linear in scale, so one rescale lands exactly on the limit.
    let ext = glyph_extent(char_id, font_id, scale, rotation);
    let widest = ext[0].max(ext[1]);
    if widest > half - BORDER {
        scale *= (half - BORDER) / widest;
    }
    if scale < 0.6 {
        return Err(Error::domain(format!(
            "glyph ({char_id}, {font_id}) cannot fit at scale >= 0.6"
        )));
    }
    let ext = glyph_extent(char_id, font_id, scale, rotation);
    let mut translate = [0.0; 2];
    for (axis, t) in translate.iter_mut().enumerate() {
        let room = ((half - BORDER - ext[axis]).max(0.0)).min(ranges.translate * IMAGE_SIDE as f64);
        if room > 0.0 {
            *t = rng.random_range(-room..room) / IMAGE_SIDE as f64;
        }
    }
    let fg_intensity = uniform(rng, ranges.fg);
    let bg_intensity = uniform(rng, ranges.bg);
    let noise_seed = rng.random::<u64>();
    let noise_amp = uniform(rng, ranges.noise_amp);
    let spec = LatentSpec {
        char_id,
        font_id,
        translate,
        scale,
        rotation,
        fg_intensity,
        bg_intensity,
        noise_seed,
        noise_amp,
    };
    spec.validate()?;
    Ok(spec)
}

impl LatentSpec {
    pub fn validate(&self) -> Result<()> {
        check_ids(self.char_id, self.font_id)?;
        let unit = 0.0..=1.0;
        if !(0.6..=1.0).contains(&self.scale)
            || !unit.contains(&self.fg_intensity)
            || !unit.contains(&self.bg_intensity)
            || !(0.0..=0.1).contains(&self.noise_amp)
        {
            return Err(Error::domain(format!("latent out of range: {self:?}")));
        }
        if (self.fg_intensity - self.bg_intensity).abs() < 0.3 - 1e-12 {
            return Err(Error::domain("fg/bg contrast below 0.3"));
        }
        let half = IMAGE_SIDE as f64 / 2.0;
        let ext = glyph_extent(self.char_id, self.font_id, self.scale, self.rotation);
        for axis in 0..2 {
            if self.translate[axis].abs() * IMAGE_SIDE as f64 + ext[axis] > half + 1e-9 {
                return Err(Error::domain("glyph bounding box leaves the image"));
            }
        }
        debug_assert!(font_style(self.font_id).is_some());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn same_stream_reproduces() {
        let r = NuisanceRanges::default();
        let a = sample_latents(&mut rng::stream(7), 0, 0, &r).unwrap();
        let b = sample_latents(&mut rng::stream(7), 0, 0, &r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_changes_nuisance() {
        let r = NuisanceRanges::default();
        let a = sample_latents(&mut rng::stream(7), 0, 0, &r).unwrap();
        let b = sample_latents(&mut rng::stream(8), 0, 0, &r).unwrap();
        assert!(
            a.translate != b.translate
                || a.scale != b.scale
                || a.rotation != b.rotation
                || a.noise_seed != b.noise_seed
        );
        let mut s = rng::stream(7);
        let c = sample_latents(&mut s, 0, 0, &r).unwrap();
        let d = sample_latents(&mut s, 0, 0, &r).unwrap();
        assert_ne!(c, d);
    }

    #[test]
    fn out_of_range_ids() {
        let r = NuisanceRanges::default();
        assert!(matches!(sample_latents(&mut rng::stream(1), 10, 0, &r), Err(Error::Domain(_))));
        assert!(matches!(sample_latents(&mut rng::stream(1), 0, 10, &r), Err(Error::Domain(_))));
    }

    #[test]
    fn every_cell_satisfies_invariants() {
        let r = NuisanceRanges::default();
        let mut s = rng::stream(3);
        for c in 0..10 {
            for f in 0..10 {
                for _ in 0..30 {
                    let l = sample_latents(&mut s, c, f, &r).unwrap();
                    assert!(l.validate().is_ok());
                    assert!((l.fg_intensity - l.bg_intensity).abs() >= 0.3);
                }
            }
        }
    }

    #[test]
    fn ranges_are_checked() {
        assert!(NuisanceRanges::default().validate().is_ok());
        assert!(NuisanceRanges::clean().validate().is_ok());
        let bad = NuisanceRanges {
            scale: [0.5, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let low_contrast = NuisanceRanges {
            fg: [0.4, 0.6],
            bg: [0.3, 0.5],
            ..Default::default()
        };
        assert!(low_contrast.validate().is_err());
    }
}
