//! Stroke skeletons for the ten glyph characters.

pub const NUM_CHARS: usize = 10;

/// Characters drawn by the skeletons, indexed by `char_id`.
pub const CHARSET: [char; NUM_CHARS] = ['A', 'C', 'E', 'H', 'K', 'M', 'O', 'S', 'T', 'Z'];

pub type Point = [f64; 2];

/// Polylines in the unit square, `y` pointing down.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSkeleton {
    pub char_id: usize,
    pub strokes: Vec<Vec<Point>>,
}

impl GlyphSkeleton {
    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Vec::len).sum()
    }
}

/// A stroke whose first and last points coincide has no free ends.
pub fn is_closed(stroke: &[Point]) -> bool {
    stroke.len() > 2 && stroke.first() == stroke.last()
}

fn strokes_of(char_id: usize) -> Vec<Vec<Point>> {
    let s = |pts: &[(f64, f64)]| pts.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>();
    match char_id {
        // A
        0 => vec![
            s(&[(0.1, 0.9), (0.5, 0.1), (0.9, 0.9)]),
            s(&[(0.27, 0.6), (0.73, 0.6)]),
        ],
        // C
        1 => vec![s(&[
            (0.85, 0.22),
            (0.62, 0.1),
            (0.35, 0.12),
            (0.15, 0.32),
            (0.12, 0.55),
            (0.25, 0.8),
            (0.5, 0.9),
            (0.72, 0.88),
            (0.87, 0.76),
        ])],
        // E
        2 => vec![
            s(&[(0.85, 0.1), (0.15, 0.1), (0.15, 0.9), (0.85, 0.9)]),
            s(&[(0.15, 0.5), (0.7, 0.5)]),
        ],
        // H
        3 => vec![
            s(&[(0.15, 0.1), (0.15, 0.9)]),
            s(&[(0.85, 0.1), (0.85, 0.9)]),
            s(&[(0.15, 0.5), (0.85, 0.5)]),
        ],
        // K
        4 => vec![
            s(&[(0.18, 0.1), (0.18, 0.9)]),
            s(&[(0.85, 0.1), (0.18, 0.58)]),
            s(&[(0.4, 0.43), (0.85, 0.9)]),
        ],
        // M
        5 => vec![s(&[(0.1, 0.9), (0.15, 0.1), (0.5, 0.62), (0.85, 0.1), (0.9, 0.9)])],
        // O
        6 => vec![s(&[
            (0.5, 0.1),
            (0.8, 0.2),
            (0.9, 0.5),
            (0.8, 0.8),
            (0.5, 0.9),
            (0.2, 0.8),
            (0.1, 0.5),
            (0.2, 0.2),
            (0.5, 0.1),
        ])],
        // S
        7 => vec![s(&[
            (0.85, 0.2),
            (0.6, 0.1),
            (0.32, 0.1),
            (0.15, 0.25),
            (0.2, 0.42),
            (0.5, 0.5),
            (0.8, 0.58),
            (0.85, 0.76),
            (0.68, 0.9),
            (0.38, 0.9),
            (0.13, 0.8),
        ])],
        // T
        8 => vec![s(&[(0.1, 0.1), (0.9, 0.1)]), s(&[(0.5, 0.1), (0.5, 0.9)])],
        // Z
        9 => vec![s(&[(0.15, 0.1), (0.85, 0.1), (0.15, 0.9), (0.85, 0.9)])],
        _ => unreachable!("char_id checked by caller"),
    }
}

pub fn skeleton(char_id: usize) -> Option<GlyphSkeleton> {
    (char_id < NUM_CHARS).then(|| GlyphSkeleton {
        char_id,
        strokes: strokes_of(char_id),
    })
}

pub fn all_skeletons() -> Vec<GlyphSkeleton> {
    (0..NUM_CHARS).filter_map(skeleton).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_valid_skeletons() {
        let all = all_skeletons();
        assert_eq!(all.len(), 10);
        assert!(skeleton(10).is_none());
        for (i, sk) in all.iter().enumerate() {
            assert_eq!(sk.char_id, i);
            assert!(sk.strokes.len() >= 2 || sk.point_count() >= 4, "char {i} degenerate");
            for p in sk.strokes.iter().flatten() {
                assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            }
        }
    }
}
