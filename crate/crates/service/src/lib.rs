//! HTTP API over the blending engine and the gallery store.
//!
//! Build an [`AppState`], hand it to [`router`], or let [`serve`] do both from
//! a [`ServeConfig`].

use std::collections::{HashMap, VecDeque};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use anyhow::{bail, Context};
use axum::body::Bytes;
use geneblend_core::generator::DEFAULT_IMAGE_SIDE;
use geneblend_core::{
    BackendDescriptor, BackendKind, BackendRegistry, Engine, GalleryStore, ProceduralBackend, RemoteBackend, Session,
    SourcePool, DEFAULT_LATENT_DIM, PROCEDURAL_BACKEND_ID,
};

mod error;
mod routes;

pub use error::ApiError;
pub use routes::router;

/// Sessions kept in memory before the oldest are dropped.
pub const MAX_SESSIONS: usize = 10_000;
/// Rendered previews kept for `GET /images/{digest}`.
pub const PREVIEW_CACHE_SIZE: usize = 512;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub pool: PathBuf,
    pub store: PathBuf,
    /// Default backend for new sessions.
    pub backend: String,
    /// When set, `backend` names a remote generator at this URL.
    pub endpoint: Option<String>,
    pub remote_class_mix: bool,
    pub backend_seed: u64,
    pub host: IpAddr,
    pub port: u16,
    pub latent_dim: usize,
    pub image_size: u32,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            pool: PathBuf::from("pool.json"),
            store: PathBuf::from("store"),
            backend: PROCEDURAL_BACKEND_ID.to_string(),
            endpoint: None,
            remote_class_mix: false,
            backend_seed: 0,
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            latent_dim: DEFAULT_LATENT_DIM,
            image_size: DEFAULT_IMAGE_SIDE,
        }
    }
}

pub struct AppState {
    engine: Arc<Engine>,
    store: Arc<GalleryStore>,
    default_backend: String,
    sessions: Mutex<Sessions>,
    previews: Mutex<Fifo>,
    thumbnails: Mutex<HashMap<String, Bytes>>,
}

impl AppState {
    pub fn new(engine: Engine, store: GalleryStore, default_backend: impl Into<String>) -> anyhow::Result<Self> {
        let default_backend = default_backend.into();
        engine
            .backends()
            .get(&default_backend)
            .with_context(|| format!("default backend {default_backend:?} is not registered"))?;
        Ok(Self {
            engine: Arc::new(engine),
            store: Arc::new(store),
            default_backend,
            sessions: Mutex::new(Sessions::default()),
            previews: Mutex::new(Fifo::new(PREVIEW_CACHE_SIZE)),
            thumbnails: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_config(config: &ServeConfig) -> anyhow::Result<Self> {
        let pool = SourcePool::load(&config.pool, config.latent_dim)
            .with_context(|| format!("loading pool {}", config.pool.display()))?;
        let mut backends =
            BackendRegistry::new().with(Arc::new(ProceduralBackend::new(config.backend_seed, config.latent_dim)));
        match &config.endpoint {
            Some(endpoint) => {
                if config.backend == PROCEDURAL_BACKEND_ID {
                    bail!("--endpoint needs a backend id other than {PROCEDURAL_BACKEND_ID:?}");
                }
                backends.insert(Arc::new(RemoteBackend::new(BackendDescriptor {
                    backend_id: config.backend.clone(),
                    kind: BackendKind::Remote,
                    latent_dim: config.latent_dim,
                    supports_class_mix: config.remote_class_mix,
                    endpoint: Some(endpoint.clone()),
                })?));
            }
            None if config.backend != PROCEDURAL_BACKEND_ID => {
                bail!("backend {:?} needs --endpoint", config.backend)
            }
            None => {}
        }
        let engine = Engine::new(Arc::new(pool), backends)?.with_image_size(config.image_size, config.image_size);
        let store =
            GalleryStore::open(&config.store).with_context(|| format!("opening store {}", config.store.display()))?;
        Self::new(engine, store, config.backend.clone())
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store(&self) -> &GalleryStore {
        &self.store
    }

    fn sessions(&self) -> MutexGuard<'_, Sessions> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn previews(&self) -> MutexGuard<'_, Fifo> {
        self.previews.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Session table. Each session sits behind its own fair async mutex, so
/// operations on one session apply in arrival order while different
/// sessions run in parallel.
#[derive(Default)]
struct Sessions {
    map: HashMap<String, Arc<tokio::sync::Mutex<Session>>>,
    order: VecDeque<String>,
}

impl Sessions {
    fn insert(&mut self, session: Session) -> Arc<tokio::sync::Mutex<Session>> {
        if self.order.len() >= MAX_SESSIONS {
            if let Some(old) = self.order.pop_front() {
                self.map.remove(&old);
            }
        }
        let id = session.session_id.clone();
        let cell = Arc::new(tokio::sync::Mutex::new(session));
        self.order.push_back(id.clone());
        self.map.insert(id, cell.clone());
        cell
    }

    fn get(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        self.map.get(id).cloned()
    }
}

/// Bounded digest -> PNG map, oldest entry evicted first.
struct Fifo {
    cap: usize,
    map: HashMap<String, Bytes>,
    order: VecDeque<String>,
}

impl Fifo {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            map: HashMap::new(),
            order: VecDeque::new(),
        }
    }

    fn insert(&mut self, key: String, value: Bytes) {
        if self.map.contains_key(&key) {
            return;
        }
        if self.order.len() >= self.cap {
            if let Some(old) = self.order.pop_front() {
                self.map.remove(&old);
            }
        }
        self.order.push_back(key.clone());
        self.map.insert(key, value);
    }

    fn get(&self, key: &str) -> Option<Bytes> {
        self.map.get(key).cloned()
    }

    fn remove(&mut self, key: &str) {
        if self.map.remove(key).is_some() {
            self.order.retain(|k| k != key);
        }
    }
}

/// Runs the service until SIGINT or SIGTERM, letting in-flight requests
/// finish.
pub async fn serve(config: ServeConfig) -> anyhow::Result<()> {
    let state = tokio::task::spawn_blocking({
        let config = config.clone();
        move || AppState::from_config(&config)
    })
    .await??;
    let addr = SocketAddr::new(config.host, config.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(
        %addr,
        backend = %config.backend,
        sources = state.engine.pool().len(),
        artifacts = state.store.len(),
        "listening"
    );
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    tracing::info!("shut down");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
