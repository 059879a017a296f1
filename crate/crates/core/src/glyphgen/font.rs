//! Parametric font styles.

use serde::{Deserialize, Serialize};

pub const NUM_FONTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FontStyle {
    pub font_id: usize,
    /// Stroke width as a fraction of the image width (at glyph scale 1).
    pub stroke_width: f64,
    /// Horizontal shear angle in radians; positive leans the top to the right.
    pub slant: f64,
    /// Corner smoothing in `[0, 1]`.
    pub roundness: f64,
    /// Perpendicular bars at free stroke ends.
    pub serif: bool,
    /// Horizontal scale factor.
    pub aspect: f64,
}

impl FontStyle {
    /// Number of fields in which two styles differ.
    pub fn differing_fields(&self, other: &FontStyle) -> usize {
        [
            self.stroke_width != other.stroke_width,
            self.slant != other.slant,
            self.roundness != other.roundness,
            self.serif != other.serif,
            self.aspect != other.aspect,
        ]
        .iter()
        .filter(|d| **d)
        .count()
    }
}

// (stroke_width, slant, roundness, serif, aspect)
const TABLE: [(f64, f64, f64, bool, f64); NUM_FONTS] = [
    (0.08, 0.0, 0.0, false, 1.0),
    (0.115, 0.0, 1.0, false, 1.0),
    (0.08, 0.22, 0.0, true, 1.0),
    (0.115, 0.22, 1.0, true, 0.8),
    (0.155, 0.0, 0.5, true, 1.0),
    (0.08, -0.2, 0.5, false, 1.2),
    (0.155, 0.22, 0.0, false, 0.8),
    (0.115, -0.2, 0.0, true, 1.2),
    (0.08, 0.0, 1.0, true, 0.8),
    (0.155, -0.2, 1.0, false, 1.0),
];

pub fn font_style(font_id: usize) -> Option<FontStyle> {
    TABLE.get(font_id).map(|&(stroke_width, slant, roundness, serif, aspect)| FontStyle {
        font_id,
        stroke_width,
        slant,
        roundness,
        serif,
        aspect,
    })
}

pub fn all_font_styles() -> Vec<FontStyle> {
    (0..NUM_FONTS).filter_map(font_style).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_distinct_styles_within_bounds() {
        let all = all_font_styles();
        assert_eq!(all.len(), 10);
        assert!(font_style(10).is_none());
        for (i, a) in all.iter().enumerate() {
            assert_eq!(a.font_id, i);
            assert!(a.stroke_width > 0.0 && a.stroke_width <= 0.25);
            assert!(a.slant.abs() <= 0.35);
            assert!((0.0..=1.0).contains(&a.roundness));
            assert!((0.7..=1.3).contains(&a.aspect));
            for b in &all[i + 1..] {
                assert!(a.differing_fields(b) >= 2, "fonts {} and {}", a.font_id, b.font_id);
            }
        }
    }
}
