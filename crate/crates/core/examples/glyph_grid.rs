//! Writes `grid.png` and `grid_clean.png` (one glyph per font x char cell,
//! with and without nuisance) into the directory given as the first argument.

use std::path::PathBuf;

use clood_core::glyphgen::{export_png, render_dataset, DatasetConfig, NuisanceRanges};

fn main() -> clood_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let mut cfg = DatasetConfig::uniform(2);
    let idx: Vec<usize> = (0..100).map(|i| i * 2).collect();
    let ds = render_dataset(&cfg, 1)?;
    export_png(&out.join("grid.png"), &ds, &idx, 10)?;
    cfg.nuisance = NuisanceRanges::clean();
    let ds = render_dataset(&cfg, 1)?;
    export_png(&out.join("grid_clean.png"), &ds, &idx, 10)?;
    Ok(())
}
