//! `geneblend evolve CONFIG --out DIR`
//!
//! Scripted breeding. The script lists, per generation, the indices a
//! participant would have kept. Survivors carry over in script order; the
//! rest of the population is refilled with children. For each child the
//! master stream yields, in order: parent A index, parent B index (both into
//! the survivor list), crossover seed, mutation seed.
//!
//! Generation 0 is `population` random latents, each seeded by one draw of
//! the master stream. The log covers generations `0..=generations`; the final
//! generation's images are written to `DIR/final/`.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use geneblend_core::latent::{crossover, mutate, random_latent};
use geneblend_core::rng::Stream;
use geneblend_core::{Gene, GeneDigest, ImageDigest, RenderParams};

use crate::{emit, write_atomic, CmdResult, Failure, Global};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub latent_dim: Option<usize>,
    pub selection_script: Vec<Vec<usize>>,
}

fn default_sigma() -> f64 {
    0.1
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population == 0 {
            return Err("population must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if self.latent_dim == Some(0) {
            return Err("latent_dim must be at least 1".into());
        }
        if self.selection_script.len() != self.generations {
            return Err(format!(
                "selection_script has {} entries, expected one per generation ({})",
                self.selection_script.len(),
                self.generations
            ));
        }
        for (g, picks) in self.selection_script.iter().enumerate() {
            if picks.is_empty() || picks.len() > self.population {
                return Err(format!(
                    "generation {}: {} survivors, need 1..={}",
                    g + 1,
                    picks.len(),
                    self.population
                ));
            }
            let mut seen = HashSet::new();
            for &i in picks {
                if i >= self.population {
                    return Err(format!("generation {}: index {i} out of range", g + 1));
                }
                if !seen.insert(i) {
                    return Err(format!("generation {}: index {i} picked twice", g + 1));
                }
            }
        }
        Ok(())
    }
}

/// How an individual came to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub parents: Vec<usize>,
    pub crossover_seed: Option<u64>,
    pub mutation_seed: Option<u64>,
}

/// One line of the lineage log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub generation: usize,
    pub index: usize,
    pub parents: Vec<usize>,
    pub crossover_seed: Option<u64>,
    pub mutation_seed: Option<u64>,
    pub gene_digest: GeneDigest,
    pub image_digest: ImageDigest,
}

/// Every generation's genes and origins, without rendering.
pub fn simulate(cfg: &EvolveConfig, latent_dim: usize) -> Result<Vec<Vec<(Gene, Origin)>>, String> {
    cfg.validate()?;
    let mut master = Stream::new(cfg.seed);
    let founders = (0..cfg.population)
        .map(|_| {
            let gene = Gene::unconditional(random_latent(master.next_u64(), latent_dim));
            (
                gene,
                Origin {
                    parents: vec![],
                    crossover_seed: None,
                    mutation_seed: None,
                },
            )
        })
        .collect();
    let mut generations: Vec<Vec<(Gene, Origin)>> = vec![founders];
    for survivors in &cfg.selection_script {
        let prev = generations.last().expect("founders exist");
        let mut next: Vec<(Gene, Origin)> = survivors
            .iter()
            .map(|&i| {
                (
                    prev[i].0.clone(),
                    Origin {
                        parents: vec![i],
                        crossover_seed: None,
                        mutation_seed: None,
                    },
                )
            })
            .collect();
        while next.len() < cfg.population {
            let a = survivors[master.next_index(survivors.len())];
            let b = survivors[master.next_index(survivors.len())];
            let cs = master.next_u64();
            let ms = master.next_u64();
            let child = crossover(&prev[a].0, &prev[b].0, cs)
                .and_then(|c| mutate(&c, cfg.sigma, ms))
                .map_err(|e| e.to_string())?;
            next.push((
                child,
                Origin {
                    parents: vec![a, b],
                    crossover_seed: Some(cs),
                    mutation_seed: Some(ms),
                },
            ));
        }
        generations.push(next);
    }
    Ok(generations)
}

pub fn load_config(path: &Path) -> Result<EvolveConfig, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

pub fn run(global: &Global, config: &Path, dir: &Path, out: &mut dyn Write) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    let dim = cfg.latent_dim.unwrap_or(global.latent_dim);
    let generations = simulate(&cfg, dim).map_err(Failure::invalid)?;
    let registry = global.registry(dim)?;
    let side = global.image_size_or(geneblend_core::generator::DEFAULT_IMAGE_SIDE);
    let params = RenderParams::square(side, global.backend.clone());

    let mut log = String::new();
    let mut last_pngs = Vec::new();
    for (g, population) in generations.iter().enumerate() {
        let pngs: Vec<Vec<u8>> = population
            .par_iter()
            .map(|(gene, _)| {
                registry
                    .generate(gene, &params)
                    .map_err(Failure::failed)?
                    .encode_png()
                    .map_err(Failure::failed)
            })
            .collect::<Result<_, _>>()?;
        for (index, ((gene, origin), png)) in population.iter().zip(&pngs).enumerate() {
            let rec = LineageRecord {
                generation: g,
                index,
                parents: origin.parents.clone(),
                crossover_seed: origin.crossover_seed,
                mutation_seed: origin.mutation_seed,
                gene_digest: gene.digest(),
                image_digest: ImageDigest::of(png),
            };
            log.push_str(&serde_json::to_string(&rec).map_err(Failure::failed)?);
            log.push('\n');
        }
        last_pngs = pngs;
    }

    let lineage = dir.join("lineage.jsonl");
    write_atomic(&lineage, log.as_bytes()).map_err(Failure::failed)?;
    let last = generations.last().expect("founders exist");
    for (index, ((gene, _), png)) in last.iter().zip(&last_pngs).enumerate() {
        let path = dir.join("final").join(format!("{index:03}.png"));
        write_atomic(&path, png).map_err(Failure::failed)?;
        emit(
            out,
            &json!({
                "generation": generations.len() - 1,
                "index": index,
                "out_path": path,
                "gene_digest": gene.digest(),
                "image_digest": ImageDigest::of(png),
            }),
        )?;
    }
    emit(out, &json!({ "lineage": lineage, "records": log.lines().count() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(population: usize, script: Vec<Vec<usize>>, sigma: f64) -> EvolveConfig {
        EvolveConfig {
            population,
            generations: script.len(),
            seed: 3,
            sigma,
            latent_dim: None,
            selection_script: script,
        }
    }

    #[test]
    fn script_validation() {
        assert!(cfg(4, vec![vec![0, 1]], 0.1).validate().is_ok());
        assert!(cfg(0, vec![], 0.1).validate().is_err());
        assert!(cfg(4, vec![vec![]], 0.1).validate().is_err());
        assert!(cfg(4, vec![vec![4]], 0.1).validate().is_err());
        assert!(cfg(4, vec![vec![1, 1]], 0.1).validate().is_err());
        assert!(cfg(2, vec![vec![0, 1, 0]], 0.1).validate().is_err());
        assert!(cfg(4, vec![vec![0]], -1.0).validate().is_err());
        let mut c = cfg(4, vec![vec![0]], 0.1);
        c.generations = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_individual_with_zero_sigma_is_fixed() {
        let c = cfg(1, vec![vec![0]; 5], 0.0);
        let gens = simulate(&c, 8).unwrap();
        assert_eq!(gens.len(), 6);
        for g in &gens {
            assert_eq!(g[0].0, gens[0][0].0);
        }
    }

    #[test]
    fn children_come_from_survivors() {
        let c = cfg(6, vec![vec![4, 1], vec![0, 5, 2]], 0.0);
        let gens = simulate(&c, 16).unwrap();
        for (g, picks) in c.selection_script.iter().enumerate() {
            let (prev, next) = (&gens[g], &gens[g + 1]);
            for (k, &i) in picks.iter().enumerate() {
                assert_eq!(next[k].0, prev[i].0);
            }
            for (child, origin) in &next[picks.len()..] {
                assert_eq!(origin.parents.len(), 2);
                let (a, b) = (&prev[origin.parents[0]].0, &prev[origin.parents[1]].0);
                for (j, &x) in child.latent.as_slice().iter().enumerate() {
                    assert!(x == a.latent.as_slice()[j] || x == b.latent.as_slice()[j]);
                }
            }
        }
    }

    #[test]
    fn replays() {
        let c = cfg(5, vec![vec![2, 3], vec![1]], 0.2);
        assert_eq!(simulate(&c, 8).unwrap(), simulate(&c, 8).unwrap());
    }
}
