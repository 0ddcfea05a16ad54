//! `geneblend pool --count N --out pool.json`
//!
//! Writes a synthetic landscape pool and renders each source's thumbnail
//! next to it, ready for `serve`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use geneblend_core::generator::DEFAULT_IMAGE_SIDE;
use geneblend_core::{RenderParams, SourcePool, PROCEDURAL_BACKEND_ID};

use crate::{emit, write_atomic, CmdResult, Failure, Global};

pub fn run(global: &Global, count: usize, path: &Path, out: &mut dyn Write) -> CmdResult {
    if count == 0 {
        return Err(Failure::invalid("--count must be at least 1"));
    }
    let pool = SourcePool::synthetic(count, global.latent_dim, global.seed.unwrap_or(0));
    let registry = global.registry(global.latent_dim)?;
    let side = global.image_size_or(DEFAULT_IMAGE_SIDE);
    let params = RenderParams::square(side, PROCEDURAL_BACKEND_ID);
    let base = path.parent().unwrap_or(Path::new(""));
    pool.iter().collect::<Vec<_>>().par_iter().try_for_each(|source| {
        let png = registry
            .generate(&source.gene(), &params)
            .and_then(|img| Ok(img.encode_png()?))
            .map_err(Failure::failed)?;
        let rel = source.thumbnail.as_deref().expect("synthetic sources have thumbnails");
        write_atomic(&base.join(rel), &png).map_err(Failure::failed)
    })?;

    pool.save(path)
        .map_err(|e| Failure::failed(format!("writing {}: {e}", path.display())))?;
    emit(
        out,
        &json!({ "pool": path, "sources": pool.len(), "latent_dim": pool.latent_dim() }),
    )
}
