//! Image generation backends.
//!
//! Every backend maps a [`Gene`] to an RGB [`Image`] through the [`Generator`]
//! trait. [`ProceduralBackend`] is the deterministic reference renderer;
//! [`RemoteBackend`] forwards genes to an external neural generator over HTTP.

mod procedural;
mod remote;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, ImageError};
use crate::latent::Gene;

pub use procedural::{Feature, ProceduralBackend, PROCEDURAL_BACKEND_ID};
pub use remote::{RemoteBackend, RemoteRequest, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT};

pub const MIN_IMAGE_SIDE: u32 = 16;
pub const MAX_IMAGE_SIDE: u32 = 4096;
pub const DEFAULT_IMAGE_SIDE: u32 = 256;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("latent dimension mismatch: backend expects {expected}, gene has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("image size {width}x{height} outside [{MIN_IMAGE_SIDE}, {MAX_IMAGE_SIDE}]")]
    InvalidSize { width: u32, height: u32 },
    #[error("coordinates ({u}, {v}) outside the unit square")]
    OutOfDomain { u: f64, v: f64 },
    #[error("channel {0} out of range")]
    BadChannel(usize),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend rejected request ({status}): {message}")]
    BackendRejected { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Output size plus the backend to render with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub width: u32,
    pub height: u32,
    pub backend_id: String,
    /// Forwarded to remote backends; the procedural backend ignores it
    /// because truncation has already been applied to the gene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

impl RenderParams {
    pub fn new(width: u32, height: u32, backend_id: impl Into<String>) -> Self {
        Self {
            width,
            height,
            backend_id: backend_id.into(),
            truncation: None,
        }
    }

    pub fn square(side: u32, backend_id: impl Into<String>) -> Self {
        Self::new(side, side, backend_id)
    }

    pub fn with_truncation(mut self, t: f64) -> Self {
        self.truncation = Some(t);
        self
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        let ok = |s: u32| (MIN_IMAGE_SIDE..=MAX_IMAGE_SIDE).contains(&s);
        if ok(self.width) && ok(self.height) {
            Ok(())
        } else {
            Err(GenerateError::InvalidSize {
                width: self.width,
                height: self.height,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Procedural,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    pub latent_dim: usize,
    pub supports_class_mix: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl BackendDescriptor {
    pub fn validate(&self) -> Result<(), String> {
        if self.latent_dim == 0 {
            return Err("latent_dim must be at least 1".into());
        }
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return Err(format!("remote backend {:?} has no endpoint", self.backend_id));
        }
        Ok(())
    }
}

pub trait Generator: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn generate(&self, gene: &Gene, params: &RenderParams) -> Result<Image, GenerateError>;

    fn check_gene(&self, gene: &Gene) -> Result<(), GenerateError> {
        let expected = self.descriptor().latent_dim;
        if gene.dim() != expected {
            return Err(GenerateError::DimensionMismatch {
                expected,
                found: gene.dim(),
            });
        }
        Ok(())
    }
}

/// Backends addressable by id.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn Generator>>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, backend: Arc<dyn Generator>) -> Self {
        self.insert(backend);
        self
    }

    pub fn insert(&mut self, backend: Arc<dyn Generator>) {
        self.backends.insert(backend.descriptor().backend_id.clone(), backend);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Generator>, GenerateError> {
        self.backends
            .get(id)
            .cloned()
            .ok_or_else(|| GenerateError::UnknownBackend(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }

    /// Renders with the backend named in `params`.
    pub fn generate(&self, gene: &Gene, params: &RenderParams) -> Result<Image, GenerateError> {
        self.get(&params.backend_id)?.generate(gene, params)
    }
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}
