//! Labelled glyph datasets and their on-disk container.
//!
//! Container layout (little-endian):
//! ```text
//! b"CLOOD1"  u32 count  u16 height  u16 width  u16 channels
//! f32 pixels[count * height * width * channels]
//! (u8 char_id, u8 font_id)[count]
//! ```
//! A JSON manifest next to the container records counts, seed, config hash
//! and the container's content hash.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::sha256_hex;
use crate::ndnet::{Scalar, Tensor};
use crate::rng;

use super::font::NUM_FONTS;
use super::latent::{check_ids, sample_latents, NuisanceRanges};
use super::render::{render, IMAGE_LEN, IMAGE_SIDE};
use super::skeleton::NUM_CHARS;

pub const MAGIC: &[u8; 6] = b"CLOOD1";
const HEADER_LEN: usize = 6 + 4 + 2 * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellCount {
    pub char_id: usize,
    pub font_id: usize,
    pub count: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Images per (char, font) cell over the full 10x10 grid.
    pub per_cell: i64,
    /// Explicit cells; replaces the full grid when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellCount>>,
    pub nuisance: NuisanceRanges,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            per_cell: 100,
            cells: None,
            nuisance: NuisanceRanges::default(),
        }
    }
}

impl DatasetConfig {
    pub fn uniform(per_cell: i64) -> Self {
        DatasetConfig {
            per_cell,
            ..Default::default()
        }
    }

    pub fn single_cell(char_id: usize, font_id: usize, count: i64) -> Self {
        DatasetConfig {
            cells: Some(vec![CellCount {
                char_id,
                font_id,
                count,
            }]),
            ..Default::default()
        }
    }

    /// Cells to render, in order, validated.
    pub fn resolve_cells(&self) -> Result<Vec<(usize, usize, usize)>> {
        let cells: Vec<CellCount> = match &self.cells {
            Some(c) => c.clone(),
            None => (0..NUM_CHARS)
                .flat_map(|c| {
                    (0..NUM_FONTS).map(move |f| CellCount {
                        char_id: c,
                        font_id: f,
                        count: self.per_cell,
                    })
                })
                .collect(),
        };
        if cells.is_empty() {
            return Err(Error::domain("dataset config selects no cells"));
        }
        let mut seen = std::collections::BTreeSet::new();
        cells
            .iter()
            .map(|c| {
                check_ids(c.char_id, c.font_id)?;
                if c.count <= 0 {
                    return Err(Error::domain(format!(
                        "cell ({}, {}) has non-positive count {}",
                        c.char_id, c.font_id, c.count
                    )));
                }
                if !seen.insert((c.char_id, c.font_id)) {
                    return Err(Error::domain(format!(
                        "cell ({}, {}) listed twice",
                        c.char_id, c.font_id
                    )));
                }
                Ok((c.char_id, c.font_id, c.count as usize))
            })
            .collect()
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Rendered examples with both labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphDataset {
    pixels: Vec<f32>,
    chars: Vec<u8>,
    fonts: Vec<u8>,
}

/// Seed of the k-th image of a cell; independent of cell order in the config.
pub fn image_seed(seed: u64, char_id: usize, font_id: usize, k: usize) -> u64 {
    let cell = rng::derive_indexed(seed, "cell", (char_id * NUM_FONTS + font_id) as u64);
    rng::derive_indexed(cell, "image", k as u64)
}

/// Render every requested example; cells in config order, images in index order.
pub fn render_dataset(config: &DatasetConfig, seed: u64) -> Result<GlyphDataset> {
    config.nuisance.validate()?;
    let cells = config.resolve_cells()?;
    let total: usize = cells.iter().map(|c| c.2).sum();
    let mut ds = GlyphDataset {
        pixels: Vec::with_capacity(total * IMAGE_LEN),
        chars: Vec::with_capacity(total),
        fonts: Vec::with_capacity(total),
    };
    for (c, f, n) in cells {
        for k in 0..n {
            let mut r = rng::stream(image_seed(seed, c, f, k));
            let spec = sample_latents(&mut r, c, f, &config.nuisance)?;
            ds.pixels.extend_from_slice(render(&spec).pixels());
            ds.chars.push(c as u8);
            ds.fonts.push(f as u8);
        }
    }
    Ok(ds)
}

impl GlyphDataset {
    pub fn from_parts(pixels: Vec<f32>, chars: Vec<u8>, fonts: Vec<u8>) -> Result<Self> {
        if pixels.len() != chars.len() * IMAGE_LEN || chars.len() != fonts.len() {
            return Err(Error::format("dataset", "pixel/label lengths disagree"));
        }
        if chars.iter().any(|&c| c as usize >= NUM_CHARS) || fonts.iter().any(|&f| f as usize >= NUM_FONTS) {
            return Err(Error::format("dataset", "label out of range"));
        }
        Ok(GlyphDataset { pixels, chars, fonts })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]
    }

    pub fn char_id(&self, i: usize) -> usize {
        self.chars[i] as usize
    }

    pub fn font_id(&self, i: usize) -> usize {
        self.fonts[i] as usize
    }

    /// Batch tensor `(n, 32, 32, 1)` of the given examples.
    pub fn batch<F: Scalar>(&self, idx: &[usize]) -> Tensor<F> {
        let mut data = Vec::with_capacity(idx.len() * IMAGE_LEN);
        for &i in idx {
            data.extend(self.image(i).iter().map(|&p| F::lit(f64::from(p))));
        }
        Tensor::from_vec(&[idx.len(), IMAGE_SIDE, IMAGE_SIDE, 1], data).expect("batch shape")
    }

    /// Number of examples in each (char, font) cell.
    pub fn cell_counts(&self) -> [[usize; NUM_FONTS]; NUM_CHARS] {
        let mut out = [[0; NUM_FONTS]; NUM_CHARS];
        for (c, f) in self.chars.iter().zip(&self.fonts) {
            out[*c as usize][*f as usize] += 1;
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.pixels.len() * 4 + self.len() * 2);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for d in [IMAGE_SIDE, IMAGE_SIDE, 1] {
            out.extend_from_slice(&(d as u16).to_le_bytes());
        }
        for p in &self.pixels {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for (c, f) in self.chars.iter().zip(&self.fonts) {
            out.push(*c);
            out.push(*f);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
            return Err(Error::format("dataset container", "missing CLOOD1 magic"));
        }
        let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let dims: Vec<usize> = (0..3)
            .map(|i| u16::from_le_bytes(bytes[10 + 2 * i..12 + 2 * i].try_into().expect("2 bytes")) as usize)
            .collect();
        if dims != [IMAGE_SIDE, IMAGE_SIDE, 1] {
            return Err(Error::format("dataset container", format!("unsupported image shape {dims:?}")));
        }
        let pix_end = HEADER_LEN + n * IMAGE_LEN * 4;
        if bytes.len() != pix_end + 2 * n {
            return Err(Error::format("dataset container", "length does not match header"));
        }
        let pixels = bytes[HEADER_LEN..pix_end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let labels = &bytes[pix_end..];
        let chars = labels.iter().step_by(2).copied().collect();
        let fonts = labels.iter().skip(1).step_by(2).copied().collect();
        GlyphDataset::from_parts(pixels, chars, fonts)
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub count: usize,
    pub seed: u64,
    pub config_hash: String,
    pub content_hash: String,
    pub config: DatasetConfig,
    /// `cell_counts[char][font]`
    pub cell_counts: Vec<Vec<usize>>,
}

impl DatasetManifest {
    pub fn describe(ds: &GlyphDataset, config: &DatasetConfig, seed: u64) -> Self {
        DatasetManifest {
            count: ds.len(),
            seed,
            config_hash: config.hash(),
            content_hash: ds.content_hash(),
            config: config.clone(),
            cell_counts: ds.cell_counts().iter().map(|r| r.to_vec()).collect(),
        }
    }
}

/// Write `<stem>.bin` and `<stem>.json` into `dir`; returns the manifest.
pub fn write_container(
    dir: &Path,
    stem: &str,
    ds: &GlyphDataset,
    config: &DatasetConfig,
    seed: u64,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(format!("{stem}.bin"));
    let bytes = ds.to_bytes();
    std::fs::write(&bin, &bytes).map_err(|e| Error::io(&bin, e))?;
    let manifest = DatasetManifest::describe(ds, config, seed);
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&json, e))?;
    Ok(manifest)
}

pub fn read_container(path: &Path) -> Result<GlyphDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    GlyphDataset::from_bytes(&bytes)
}

/// Grayscale PNG tiling the given examples `columns` per row.
pub fn export_png(path: &Path, ds: &GlyphDataset, idx: &[usize], columns: usize) -> Result<()> {
    let columns = columns.max(1);
    let rows = idx.len().div_ceil(columns).max(1);
    let (w, h) = (columns * (IMAGE_SIDE + 1) + 1, rows * (IMAGE_SIDE + 1) + 1);
    let mut canvas = vec![128u8; w * h];
    for (k, &i) in idx.iter().enumerate() {
        let (ox, oy) = (1 + (k % columns) * (IMAGE_SIDE + 1), 1 + (k / columns) * (IMAGE_SIDE + 1));
        for (p, v) in ds.image(i).iter().enumerate() {
            let (y, x) = (p / IMAGE_SIDE, p % IMAGE_SIDE);
            canvas[(oy + y) * w + ox + x] = (v * 255.0).round() as u8;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let io_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(io_err)?;
    writer.write_image_data(&canvas).map_err(io_err)?;
    writer.finish().map_err(io_err)?;
    Ok(())
}
