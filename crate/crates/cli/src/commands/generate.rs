use anyhow::Result;
use clood_core::glyphgen::{export_png, render_dataset, write_container, NUM_CHARS, NUM_FONTS};

use crate::layout::ensure_dir;
use crate::Context;

pub fn run(ctx: &Context) -> Result<()> {
    let section = &ctx.config.dataset;
    let cfg = section.generator_config();
    let cells = cfg.resolve_cells()?;
    let total: usize = cells.iter().map(|c| c.2).sum();
    let dir = ctx.layout.dataset_dir();
    if ctx.dry_run {
        println!("would render {total} images in {} cells (seed {}) into {}", cells.len(), section.seed, dir.display());
        return Ok(());
    }
    ensure_dir(&dir)?;
    log::info!("rendering {total} images");
    let ds = render_dataset(&cfg, section.seed)?;
    let manifest = write_container(&dir, "glyphs", &ds, &cfg, section.seed)?;

    let mut first = vec![None; NUM_CHARS * NUM_FONTS];
    for i in 0..ds.len() {
        first[ds.char_id(i) * NUM_FONTS + ds.font_id(i)].get_or_insert(i);
    }
    let samples: Vec<usize> = first.into_iter().flatten().collect();
    export_png(&dir.join("samples.png"), &ds, &samples, NUM_FONTS)?;

    println!("dataset: {} images, content hash {}, written to {}", manifest.count, manifest.content_hash, dir.display());
    Ok(())
}
