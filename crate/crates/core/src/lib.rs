//! Weighted blending and breeding of latent "genes", a deterministic
//! reference renderer, the six-slot blending session, and a consent-aware
//! gallery store.

pub mod gallery;
pub mod generator;
pub mod image;
pub mod latent;
pub mod pool;
pub mod rng;
pub mod session;

pub use gallery::{Artifact, GalleryStore, Lineage, ListFilter, Page, StoreError, Tag};
pub use generator::{
    BackendDescriptor, BackendKind, BackendRegistry, GenerateError, Generator, ProceduralBackend, RemoteBackend,
    RenderParams, PROCEDURAL_BACKEND_ID,
};
pub use image::{Image, ImageDigest, ImageError};
pub use latent::{BlendMode, BlendSpec, ClassMixture, Gene, GeneDigest, LatentError, LatentVector, DEFAULT_LATENT_DIM};
pub use pool::{CategoryPolicy, PoolError, SourceGene, SourcePool};
pub use session::{Engine, Rendered, Session, SessionError, SourceSlot};
