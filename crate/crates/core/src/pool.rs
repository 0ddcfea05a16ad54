//! The curated, read-only pool of source genes.
//!
//! Loaded from `pool.json`, an array of
//! `{ "id", "label", "latent": [...], "class_mix": {...} | null, "thumbnail" }`
//! with thumbnail paths relative to the pool file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::{nullable_mixture, ClassMixture, Gene, LatentVector};
use crate::rng::Stream;

/// Scene categories accepted in class mixtures under the landscape policy.
pub const LANDSCAPE_CATEGORIES: &[&str] = &[
    "alp",
    "cliff",
    "coral_reef",
    "geyser",
    "lakeside",
    "promontory",
    "sandbar",
    "seashore",
    "valley",
    "volcano",
];

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("reading pool {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing pool {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("duplicate source id {0:?}")]
    DuplicateId(String),
    #[error("source {id:?} has latent dimension {found}, deployment uses {expected}")]
    Dimension { id: String, expected: usize, found: usize },
    #[error("source {id:?} uses category {category:?}, which the pool policy does not allow")]
    DisallowedCategory { id: String, category: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CategoryPolicy {
    /// Class mixtures may only name [`LANDSCAPE_CATEGORIES`].
    #[default]
    Landscape,
    Any,
}

impl CategoryPolicy {
    fn allows(self, category: &str) -> bool {
        match self {
            CategoryPolicy::Landscape => LANDSCAPE_CATEGORIES.contains(&category),
            CategoryPolicy::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceGene {
    pub id: String,
    pub label: String,
    pub latent: LatentVector,
    #[serde(default, with = "nullable_mixture")]
    pub class_mix: ClassMixture,
    #[serde(default)]
    pub thumbnail: Option<String>,
}

impl SourceGene {
    pub fn gene(&self) -> Gene {
        Gene::new(self.latent.clone(), self.class_mix.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SourcePool {
    entries: BTreeMap<String, SourceGene>,
    latent_dim: usize,
    base_dir: Option<PathBuf>,
}

impl SourcePool {
    pub fn new(sources: Vec<SourceGene>, latent_dim: usize, policy: CategoryPolicy) -> Result<Self, PoolError> {
        let mut entries = BTreeMap::new();
        for s in sources {
            if s.latent.dim() != latent_dim {
                return Err(PoolError::Dimension {
                    id: s.id,
                    expected: latent_dim,
                    found: s.latent.dim(),
                });
            }
            if let Some((category, _)) = s.class_mix.iter().find(|(c, _)| !policy.allows(c)) {
                return Err(PoolError::DisallowedCategory {
                    category: category.to_string(),
                    id: s.id,
                });
            }
            if entries.contains_key(&s.id) {
                return Err(PoolError::DuplicateId(s.id));
            }
            entries.insert(s.id.clone(), s);
        }
        Ok(Self {
            entries,
            latent_dim,
            base_dir: None,
        })
    }

    pub fn load(path: impl AsRef<Path>, latent_dim: usize) -> Result<Self, PoolError> {
        Self::load_with_policy(path, latent_dim, CategoryPolicy::default())
    }

    pub fn load_with_policy(
        path: impl AsRef<Path>,
        latent_dim: usize,
        policy: CategoryPolicy,
    ) -> Result<Self, PoolError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PoolError::Io {
            path: path.to_owned(),
            source,
        })?;
        let sources: Vec<SourceGene> = serde_json::from_str(&text).map_err(|source| PoolError::Parse {
            path: path.to_owned(),
            source,
        })?;
        let mut pool = Self::new(sources, latent_dim, policy)?;
        pool.base_dir = path.parent().map(Path::to_owned);
        Ok(pool)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let sources: Vec<&SourceGene> = self.entries.values().collect();
        let json = serde_json::to_string_pretty(&sources).map_err(std::io::Error::other)?;
        fs::write(path, json + "\n")
    }

    /// `count` random sources with landscape categories, for demos and tests.
    /// Ids are `src-00`, `src-01`, ...; each latent is seeded from `seed`.
    pub fn synthetic(count: usize, latent_dim: usize, seed: u64) -> Self {
        let mut stream = Stream::new(seed);
        let sources = (0..count)
            .map(|i| {
                let category = LANDSCAPE_CATEGORIES[i % LANDSCAPE_CATEGORIES.len()];
                let id = format!("src-{i:02}");
                SourceGene {
                    label: format!("{} {}", category.replace('_', " "), i),
                    latent: crate::latent::random_latent(stream.next_u64(), latent_dim),
                    class_mix: ClassMixture::single(category),
                    thumbnail: Some(format!("thumbs/{id}.png")),
                    id,
                }
            })
            .collect();
        Self::new(sources, latent_dim, CategoryPolicy::Landscape).expect("synthetic pool is valid")
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SourceGene> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    /// Sources in id order.
    pub fn iter(&self) -> impl Iterator<Item = &SourceGene> {
        self.entries.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Filesystem path of a source thumbnail, when the pool came from a file.
    pub fn thumbnail_path(&self, id: &str) -> Option<PathBuf> {
        let rel = self.entries.get(id)?.thumbnail.as_deref()?;
        let rel = Path::new(rel);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return None;
        }
        Some(self.base_dir.as_ref()?.join(rel))
    }
}
