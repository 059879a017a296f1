pub mod generate;
pub mod probe;
pub mod report;
pub mod train;

use std::path::Path;

use anyhow::{bail, Context as _, Result};
use clood_core::glyphgen::{read_container, DatasetManifest, GlyphDataset};

use crate::Context;

/// The generated dataset, after checking it matches the current config.
pub fn load_dataset(ctx: &Context) -> Result<(GlyphDataset, DatasetManifest)> {
    let manifest_path = ctx.layout.dataset_manifest();
    if !manifest_path.exists() {
        bail!("no dataset at {}; run `clood generate` first", manifest_path.display());
    }
    let manifest: DatasetManifest = serde_json::from_str(
        &std::fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
    )
    .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let want = ctx.config.dataset.generator_config();
    if manifest.config_hash != want.hash() || manifest.seed != ctx.config.dataset.seed {
        bail!(
            "dataset at {} was generated from a different dataset config or seed; rerun `clood generate`",
            manifest_path.display()
        );
    }
    let ds = read_container(&ctx.layout.dataset_bin())?;
    if ds.content_hash() != manifest.content_hash {
        bail!("dataset container {} does not match its manifest hash", ctx.layout.dataset_bin().display());
    }
    Ok((ds, manifest))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
