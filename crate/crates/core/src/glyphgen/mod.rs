//! Procedural glyph images with fully controlled latent factors.

pub mod dataset;
pub mod font;
pub mod latent;
pub mod render;
pub mod skeleton;

pub use dataset::{
    export_png, read_container, render_dataset, write_container, CellCount, DatasetConfig,
    DatasetManifest, GlyphDataset,
};
pub use font::{all_font_styles, font_style, FontStyle, NUM_FONTS};
pub use latent::{sample_latents, LatentSpec, NuisanceRanges};
pub use render::{render, Image, IMAGE_LEN, IMAGE_SIDE};
pub use skeleton::{all_skeletons, skeleton, GlyphSkeleton, CHARSET, NUM_CHARS};
