//! `geneblend golden write|check`
//!
//! Each case is a PNG plus a JSON sidecar holding the gene, the render
//! parameters and the procedural backend seed, so `check` needs neither the
//! pool nor the blend code that produced the gene.
//!
//! `check` compares PNG bytes. `--pixels` compares decoded pixels instead,
//! for platforms whose deflate output differs while the image does not.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use geneblend_core::latent::{crossover, mutate, random_latent, truncate, BlendMode};
use geneblend_core::{
    Gene, Generator, Image, ProceduralBackend, RenderParams, SessionError, SourcePool, PROCEDURAL_BACKEND_ID,
};

use crate::{emit, write_atomic, CmdResult, Failure, Global, EXIT_MISMATCH};

pub const DEFAULT_DIR: &str = "golden";
pub const DEFAULT_SIDE: u32 = 64;
const POOL_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub name: String,
    pub note: String,
    pub backend_seed: u64,
    pub params: RenderParams,
    pub gene: Gene,
}

impl Sidecar {
    pub fn render(&self, backend_seed: u64) -> Result<Vec<u8>, Failure> {
        let backend = ProceduralBackend::new(backend_seed, self.gene.dim());
        backend
            .generate(&self.gene, &self.params)
            .and_then(|img| Ok(img.encode_png()?))
            .map_err(|e| Failure::failed(format!("{}: {e}", self.name)))
    }
}

struct Case {
    name: &'static str,
    note: &'static str,
    backend_seed: u64,
    size: (u32, u32),
    gene: Gene,
    truncation: f64,
}

fn blended(engine: &geneblend_core::Engine, weights: &[f64], mode: BlendMode, t: f64) -> Result<Gene, SessionError> {
    let ids: Vec<String> = engine.pool().ids().take(weights.len()).map(str::to_string).collect();
    engine.resolve_gene(&ids, &geneblend_core::BlendSpec::new(weights.to_vec(), mode, t))
}

/// The built-in golden set at latent dimension `dim`, images `side` square
/// unless a case pins its own size.
pub fn cases(dim: usize, side: u32) -> Result<Vec<Sidecar>, Failure> {
    use BlendMode::{Linear, Spherical};
    let pool = std::sync::Arc::new(SourcePool::synthetic(6, dim, POOL_SEED));
    let engine = geneblend_core::Engine::new(
        pool.clone(),
        geneblend_core::BackendRegistry::new().with(std::sync::Arc::new(ProceduralBackend::new(0, dim))),
    )
    .map_err(Failure::failed)?;
    let b = |w: &[f64], m, t| blended(&engine, w, m, t).map_err(Failure::failed);
    let src = |i: usize| pool.iter().nth(i).expect("six sources").gene();
    let sq = (side, side);

    let bred = mutate(&crossover(&src(0), &src(1), 5).map_err(Failure::failed)?, 0.3, 6).map_err(Failure::failed)?;
    let list = vec![
        Case {
            name: "source-0",
            note: "pool source 0, unblended",
            backend_seed: 0,
            size: sq,
            gene: src(0),
            truncation: 100.0,
        },
        Case {
            name: "source-3-seed7",
            note: "pool source 3, backend seed 7",
            backend_seed: 7,
            size: sq,
            gene: src(3),
            truncation: 100.0,
        },
        Case {
            name: "linear-uniform",
            note: "all six equal, linear, t=1",
            backend_seed: 0,
            size: sq,
            gene: b(&[1.0; 6], Linear, 1.0)?,
            truncation: 1.0,
        },
        Case {
            name: "linear-3to1-t0.5",
            note: "linear 3:1 of sources 0 and 1, t=0.5",
            backend_seed: 0,
            size: sq,
            gene: b(&[3.0, 1.0, 0.0, 0.0, 0.0, 0.0], Linear, 0.5)?,
            truncation: 0.5,
        },
        Case {
            name: "spherical-pair",
            note: "slerp midpoint of sources 0 and 1, t=2",
            backend_seed: 0,
            size: sq,
            gene: b(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0], Spherical, 2.0)?,
            truncation: 2.0,
        },
        Case {
            name: "spherical-ramp-seed7",
            note: "spherical ramp over six sources, t=1.5",
            backend_seed: 7,
            size: sq,
            gene: b(&[0.2, 0.4, 0.6, 0.8, 1.0, 1.2], Spherical, 1.5)?,
            truncation: 1.5,
        },
        Case {
            name: "spherical-skew-seed1234",
            note: "spherical 1:5 of sources 0 and 5, t=0.25",
            backend_seed: 1234,
            size: sq,
            gene: b(&[1.0, 0.0, 0.0, 0.0, 0.0, 5.0], Spherical, 0.25)?,
            truncation: 0.25,
        },
        Case {
            name: "linear-middle-seed1234",
            note: "linear over sources 2-4, t=3",
            backend_seed: 1234,
            size: sq,
            gene: b(&[0.0, 0.0, 1.0, 1.0, 1.0, 0.0], Linear, 3.0)?,
            truncation: 3.0,
        },
        Case {
            name: "random-99",
            note: "random latent seed 99 truncated at 1",
            backend_seed: 0,
            size: sq,
            gene: Gene::unconditional(truncate(&random_latent(99, dim), 1.0).map_err(Failure::failed)?),
            truncation: 1.0,
        },
        Case {
            name: "bred-seed7",
            note: "crossover(0, 1, seed 5) then mutation sigma 0.3 seed 6",
            backend_seed: 7,
            size: sq,
            gene: bred,
            truncation: 100.0,
        },
        Case {
            name: "random-7-t0.5-seed1234",
            note: "random latent seed 7 truncated at 0.5",
            backend_seed: 1234,
            size: sq,
            gene: Gene::unconditional(truncate(&random_latent(7, dim), 0.5).map_err(Failure::failed)?),
            truncation: 0.5,
        },
        Case {
            name: "wide-t0.1-seed99",
            note: "uniform linear, t=0.1, 96x48",
            backend_seed: 99,
            size: (96, 48),
            gene: b(&[1.0; 6], Linear, 0.1)?,
            truncation: 0.1,
        },
    ];
    Ok(list
        .into_iter()
        .map(|c| Sidecar {
            name: c.name.to_string(),
            note: c.note.to_string(),
            backend_seed: c.backend_seed,
            params: RenderParams::new(c.size.0, c.size.1, PROCEDURAL_BACKEND_ID).with_truncation(c.truncation),
            gene: c.gene,
        })
        .collect())
}

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.png")), dir.join(format!("{name}.json")))
}

pub fn write(global: &Global, dir: &Path, out: &mut dyn Write) -> CmdResult {
    for case in cases(global.latent_dim, global.image_size_or(DEFAULT_SIDE))? {
        let mut case = case;
        if let Some(seed) = global.backend_seed {
            case.backend_seed = seed;
        }
        let png = case.render(case.backend_seed)?;
        let (png_path, json_path) = paths(dir, &case.name);
        let mut sidecar = serde_json::to_vec_pretty(&case).map_err(Failure::failed)?;
        sidecar.push(b'\n');
        write_atomic(&png_path, &png).map_err(Failure::failed)?;
        write_atomic(&json_path, &sidecar).map_err(Failure::failed)?;
        emit(out, &json!({ "file": png_path, "status": "written" }))?;
    }
    Ok(())
}

/// Sidecars in `dir`, sorted by file name.
pub fn load(dir: &Path) -> Result<Vec<Sidecar>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::invalid(format!("no golden sidecars in {}", dir.display())));
    }
    files
        .iter()
        .map(|p| {
            let text = std::fs::read(p).map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?;
            serde_json::from_slice(&text).map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))
        })
        .collect()
}

pub fn check(global: &Global, dir: &Path, pixels: bool, out: &mut dyn Write) -> CmdResult {
    let mut mismatched = Vec::new();
    for case in load(dir)? {
        let (png_path, _) = paths(dir, &case.name);
        let fresh = case.render(global.backend_seed.unwrap_or(case.backend_seed))?;
        let status = match std::fs::read(&png_path) {
            Err(_) => "missing",
            Ok(stored) if pixels => match (Image::decode_png(&stored), Image::decode_png(&fresh)) {
                (Ok(a), Ok(b)) if a == b => "ok",
                _ => "mismatch",
            },
            Ok(stored) if stored == fresh => "ok",
            Ok(_) => "mismatch",
        };
        if status != "ok" {
            eprintln!("geneblend: golden {status}: {}", png_path.display());
            mismatched.push(png_path.display().to_string());
        }
        emit(out, &json!({ "file": png_path, "status": status }))?;
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_MISMATCH,
            anyhow::anyhow!("{} golden file(s) differ: {}", mismatched.len(), mismatched.join(", ")),
        ))
    }
}
