//! The blending session: a prompt, N swappable source slots, previews, and
//! tagged saves.
//!
//! [`Engine`] holds the shared, immutable pieces (pool, backends, render size).
//! A [`Session`] is plain data; callers serialize operations on one session.

use std::collections::VecDeque;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gallery::{Artifact, GalleryStore, Lineage, StoreError, Tag};
use crate::generator::{BackendRegistry, GenerateError, RenderParams, DEFAULT_IMAGE_SIDE};
use crate::image::{Image, ImageDigest, ImageError};
use crate::latent::{self, BlendSpec, Gene, GeneDigest, LatentError};
use crate::pool::SourcePool;
use crate::rng::Stream;

pub const DEFAULT_SLOT_COUNT: usize = 6;
pub const HISTORY_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("a prompt is required")]
    PromptRequired,
    #[error("pool has {have} sources, sessions need {need}")]
    PoolTooSmall { need: usize, have: usize },
    #[error("unknown source {0:?}")]
    UnknownSource(String),
    #[error("expected {expected} source ids, got {found}")]
    WrongSlotCount { expected: usize, found: usize },
    #[error("slot index {index} out of range for {slots} slots")]
    BadSlotIndex { index: usize, slots: usize },
    #[error("engine misconfigured: {0}")]
    Config(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSlot {
    pub slot_index: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub spec: BlendSpec,
    pub gene_digest: GeneDigest,
}

/// Audit record of a swap. `previous == source_id` marks a no-op swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub slot_index: usize,
    pub previous: String,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub prompt: String,
    pub backend_id: String,
    pub created_at: DateTime<Utc>,
    pub slots: Vec<SourceSlot>,
    pub history: VecDeque<HistoryEntry>,
    pub swaps: VecDeque<SwapEvent>,
}

impl Session {
    pub fn source_ids(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.source_id.clone()).collect()
    }

    fn record(&mut self, entry: HistoryEntry) {
        if self.history.len() == HISTORY_CAP {
            self.history.pop_front();
        }
        self.history.push_back(entry);
    }

    fn record_swap(&mut self, event: SwapEvent) {
        if self.swaps.len() == HISTORY_CAP {
            self.swaps.pop_front();
        }
        self.swaps.push_back(event);
    }
}

/// Result of resolving and rendering a blend.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub gene: Gene,
    pub gene_digest: GeneDigest,
    pub image: Image,
    pub png: Vec<u8>,
    pub image_digest: ImageDigest,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pool: Arc<SourcePool>,
    backends: BackendRegistry,
    slot_count: usize,
    width: u32,
    height: u32,
}

impl Engine {
    /// Every backend must accept the pool's latent dimension.
    pub fn new(pool: Arc<SourcePool>, backends: BackendRegistry) -> Result<Self, SessionError> {
        for id in backends.ids() {
            let dim = backends.get(id)?.descriptor().latent_dim;
            if dim != pool.latent_dim() {
                return Err(SessionError::Config(format!(
                    "backend {id:?} expects latent dimension {dim}, pool has {}",
                    pool.latent_dim()
                )));
            }
        }
        Ok(Self {
            pool,
            backends,
            slot_count: DEFAULT_SLOT_COUNT,
            width: DEFAULT_IMAGE_SIDE,
            height: DEFAULT_IMAGE_SIDE,
        })
    }

    pub fn with_slot_count(mut self, n: usize) -> Self {
        assert!(n > 0, "slot count must be positive");
        self.slot_count = n;
        self
    }

    pub fn with_image_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn pool(&self) -> &SourcePool {
        &self.pool
    }

    pub fn backends(&self) -> &BackendRegistry {
        &self.backends
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// New session. Without explicit ids, `N` distinct sources are drawn by a
    /// partial Fisher-Yates shuffle of the id-sorted pool (stream seeded with
    /// `seed`), then placed in id order.
    pub fn create_session(
        &self,
        prompt: &str,
        backend_id: &str,
        initial_source_ids: Option<Vec<String>>,
        seed: u64,
    ) -> Result<Session, SessionError> {
        let prompt = prompt.trim();
        if prompt.is_empty() {
            return Err(SessionError::PromptRequired);
        }
        self.backends.get(backend_id)?;
        let n = self.slot_count;
        let ids = match initial_source_ids {
            Some(ids) => {
                if ids.len() != n {
                    return Err(SessionError::WrongSlotCount {
                        expected: n,
                        found: ids.len(),
                    });
                }
                if let Some(bad) = ids.iter().find(|id| !self.pool.contains(id)) {
                    return Err(SessionError::UnknownSource(bad.clone()));
                }
                ids
            }
            None => {
                if self.pool.len() < n {
                    return Err(SessionError::PoolTooSmall {
                        need: n,
                        have: self.pool.len(),
                    });
                }
                let mut all: Vec<&str> = self.pool.ids().collect();
                let mut stream = Stream::new(seed);
                for i in 0..n {
                    let j = i + stream.next_index(all.len() - i);
                    all.swap(i, j);
                }
                let mut chosen: Vec<String> = all[..n].iter().map(|s| s.to_string()).collect();
                chosen.sort();
                chosen
            }
        };
        Ok(Session {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            prompt: prompt.to_string(),
            backend_id: backend_id.to_string(),
            created_at: Utc::now(),
            slots: ids
                .into_iter()
                .enumerate()
                .map(|(slot_index, source_id)| SourceSlot { slot_index, source_id })
                .collect(),
            history: VecDeque::new(),
            swaps: VecDeque::new(),
        })
    }

    /// Replaces one slot's source. Duplicates across slots are allowed.
    pub fn swap_source(
        &self,
        session: &mut Session,
        slot_index: usize,
        new_source_id: &str,
    ) -> Result<(), SessionError> {
        let slots = session.slots.len();
        if slot_index >= slots {
            return Err(SessionError::BadSlotIndex {
                index: slot_index,
                slots,
            });
        }
        if !self.pool.contains(new_source_id) {
            return Err(SessionError::UnknownSource(new_source_id.to_string()));
        }
        let slot = &mut session.slots[slot_index];
        let previous = std::mem::replace(&mut slot.source_id, new_source_id.to_string());
        session.record_swap(SwapEvent {
            slot_index,
            previous,
            source_id: new_source_id.to_string(),
        });
        Ok(())
    }

    /// `truncate(blend(genes, normalize(weights)), t)` over the given sources.
    pub fn resolve_gene(&self, source_ids: &[String], spec: &BlendSpec) -> Result<Gene, SessionError> {
        let weights = spec.validate(source_ids.len())?;
        let genes = source_ids
            .iter()
            .map(|id| {
                self.pool
                    .get(id)
                    .map(|s| s.gene())
                    .ok_or_else(|| SessionError::UnknownSource(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let blended = latent::blend(&genes, &weights, spec.mode)?;
        Ok(Gene::new(
            latent::truncate(&blended.latent, spec.truncation)?,
            blended.class_mix,
        ))
    }

    pub fn render(
        &self,
        gene: &Gene,
        backend_id: &str,
        width: u32,
        height: u32,
        truncation: Option<f64>,
    ) -> Result<Rendered, SessionError> {
        let mut params = RenderParams::new(width, height, backend_id);
        params.truncation = truncation;
        let image = self.backends.generate(gene, &params)?;
        let png = image.encode_png()?;
        Ok(Rendered {
            gene_digest: gene.digest(),
            gene: gene.clone(),
            image_digest: ImageDigest::of(&png),
            image,
            png,
        })
    }

    fn resolve_and_render(&self, session: &Session, spec: &BlendSpec) -> Result<Rendered, SessionError> {
        if spec.weights.len() != session.slots.len() {
            return Err(LatentError::WeightCountMismatch {
                genes: session.slots.len(),
                weights: spec.weights.len(),
            }
            .into());
        }
        let gene = self.resolve_gene(&session.source_ids(), spec)?;
        self.render(
            &gene,
            &session.backend_id,
            self.width,
            self.height,
            Some(spec.truncation),
        )
    }

    /// Renders the current blend and appends it to the session history.
    pub fn preview(&self, session: &mut Session, spec: &BlendSpec) -> Result<Rendered, SessionError> {
        let rendered = self.resolve_and_render(session, spec)?;
        session.record(HistoryEntry {
            spec: spec.clone(),
            gene_digest: rendered.gene_digest.clone(),
        });
        Ok(rendered)
    }

    /// Recomputes the blend exactly as [`preview`](Self::preview) does and
    /// stores it with full lineage.
    pub fn save_artifact(
        &self,
        session: &Session,
        spec: &BlendSpec,
        tag: Tag,
        consent: bool,
        store: &GalleryStore,
    ) -> Result<(Artifact, Rendered), SessionError> {
        let (artifact, rendered) = self.prepare_artifact(session, spec, tag, consent)?;
        store.put(&artifact, &rendered.png)?;
        Ok((artifact, rendered))
    }

    /// The record [`save_artifact`](Self::save_artifact) would store, unsaved.
    pub fn prepare_artifact(
        &self,
        session: &Session,
        spec: &BlendSpec,
        tag: Tag,
        consent: bool,
    ) -> Result<(Artifact, Rendered), SessionError> {
        let rendered = self.resolve_and_render(session, spec)?;
        let artifact = Artifact {
            artifact_id: Artifact::new_id(),
            gene: rendered.gene.clone(),
            tag,
            lineage: Lineage {
                source_ids: session.source_ids(),
                raw_weights: spec.weights.clone(),
                mode: spec.mode,
                truncation: spec.truncation,
                backend_id: session.backend_id.clone(),
                width: self.width,
                height: self.height,
            },
            prompt: session.prompt.clone(),
            consent,
            created_at: Utc::now(),
            image_digest: rendered.image_digest.clone(),
            participant_id: None,
        };
        Ok((artifact, rendered))
    }

    /// Re-renders an artifact from nothing but its lineage.
    pub fn rerender(&self, artifact: &Artifact) -> Result<Rendered, SessionError> {
        let l = &artifact.lineage;
        let gene = self.resolve_gene(&l.source_ids, &l.spec())?;
        self.render(&gene, &l.backend_id, l.width, l.height, Some(l.truncation))
    }
}
