//! `geneblend blend JOB_FILE`
//!
//! ```json
//! { "pool": "pool.json", "backend": "procedural", "latent_dim": 128,
//!   "jobs": [ { "source_ids": ["a", "b"], "weights": [1, 3],
//!               "mode": "linear", "truncation": 1.0, "out_path": "out/ab.png" } ] }
//! ```
//!
//! Relative `pool` and `out_path` values resolve against the job file's
//! directory. Every job is validated and its gene resolved before anything
//! renders.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use geneblend_core::latent::BlendMode;
use geneblend_core::{BlendSpec, Engine, Gene, SourcePool};

use crate::{emit, write_atomic, CmdResult, Failure, Global, EXIT_FAILED};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub pool: PathBuf,
    pub backend: String,
    pub latent_dim: usize,
    pub jobs: Vec<Job>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub source_ids: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub mode: BlendMode,
    pub truncation: f64,
    pub out_path: PathBuf,
}

/// A job that passed validation.
#[derive(Debug, Clone)]
pub struct Planned {
    pub out_path: PathBuf,
    pub gene: Gene,
    pub truncation: f64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

/// Parses and validates a job file, resolving every gene.
pub fn plan(global: &Global, job_file: &Path) -> Result<(Engine, String, Vec<Planned>), Failure> {
    let text = std::fs::read_to_string(job_file)
        .map_err(|e| Failure::invalid(format!("reading {}: {e}", job_file.display())))?;
    let file: JobFile =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", job_file.display())))?;
    let base = job_file.parent().unwrap_or(Path::new("."));
    let pool = SourcePool::load(resolve(base, &file.pool), file.latent_dim).map_err(Failure::invalid)?;
    let engine = Engine::new(Arc::new(pool), global.registry(file.latent_dim)?).map_err(Failure::invalid)?;
    engine.backends().get(&file.backend).map_err(Failure::invalid)?;

    let mut seen = HashSet::new();
    let mut planned = Vec::with_capacity(file.jobs.len());
    for (i, job) in file.jobs.into_iter().enumerate() {
        let fail = |e: &dyn std::fmt::Display| Failure::invalid(format!("job {i}: {e}"));
        if job.out_path.as_os_str().is_empty() {
            return Err(fail(&"out_path is empty"));
        }
        let out_path = resolve(base, &job.out_path);
        if !seen.insert(out_path.clone()) {
            return Err(fail(&format!("out_path {} repeats an earlier job", out_path.display())));
        }
        let spec = BlendSpec::new(job.weights, job.mode, job.truncation);
        let gene = engine.resolve_gene(&job.source_ids, &spec).map_err(|e| fail(&e))?;
        planned.push(Planned {
            out_path,
            gene,
            truncation: job.truncation,
        });
    }
    Ok((engine, file.backend, planned))
}

pub fn run(global: &Global, job_file: &Path, out: &mut dyn Write) -> CmdResult {
    let (engine, backend, jobs) = plan(global, job_file)?;
    let side = global.image_size_or(geneblend_core::generator::DEFAULT_IMAGE_SIDE);
    let results: Vec<Result<String, String>> = jobs
        .par_iter()
        .map(|job| {
            let r = engine
                .render(&job.gene, &backend, side, side, Some(job.truncation))
                .map_err(|e| e.to_string())?;
            write_atomic(&job.out_path, &r.png).map_err(|e| format!("writing {}: {e}", job.out_path.display()))?;
            Ok(r.gene_digest.to_string())
        })
        .collect();

    let mut failures = 0;
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(digest) => emit(out, &json!({ "out_path": job.out_path, "gene_digest": digest }))?,
            Err(e) => {
                failures += 1;
                eprintln!("geneblend: {}: {e}", job.out_path.display());
            }
        }
    }
    if failures > 0 {
        return Err(Failure::new(
            EXIT_FAILED,
            anyhow::anyhow!("{failures} of {} jobs failed", jobs.len()),
        ));
    }
    Ok(())
}
