//! `geneblend` command-line driver.
//!
//! Machine output goes to stdout as JSON lines; diagnostics go to stderr.
//!
//! | exit | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | golden mismatch |
//! | 2 | invalid input (job file, config, script) |
//! | 3 | render or storage failure |

use std::fmt;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use geneblend_core::{
    BackendDescriptor, BackendKind, BackendRegistry, GalleryStore, ProceduralBackend, RemoteBackend,
    DEFAULT_LATENT_DIM, PROCEDURAL_BACKEND_ID,
};

pub mod blend;
pub mod evolve;
pub mod golden;
pub mod pool;

pub const EXIT_OK: u8 = 0;
pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "geneblend", version, about = "Blend, breed and render latent genes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed; overrides the seed of an evolve config and seeds `pool`.
    #[arg(long, global = true, env = "GENEBLEND_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_LATENT_DIM, env = "GENEBLEND_LATENT_DIM")]
    pub latent_dim: usize,
    /// Output side length in pixels [default: 256, or 64 for goldens].
    #[arg(long, global = true, env = "GENEBLEND_IMAGE_SIZE")]
    pub image_size: Option<u32>,
    #[arg(long, global = true, default_value = PROCEDURAL_BACKEND_ID, env = "GENEBLEND_BACKEND")]
    pub backend: String,
    /// Seed of the procedural renderer's feature bank.
    #[arg(long, global = true, env = "GENEBLEND_BACKEND_SEED")]
    pub backend_seed: Option<u64>,
    /// URL of a remote generator; registers `--backend` as remote.
    #[arg(long, global = true, env = "GENEBLEND_ENDPOINT")]
    pub endpoint: Option<String>,
}

impl Global {
    pub fn image_size_or(&self, default: u32) -> u32 {
        self.image_size.unwrap_or(default)
    }

    /// The procedural backend plus, with `--endpoint`, the remote one.
    pub fn registry(&self, latent_dim: usize) -> Result<BackendRegistry, Failure> {
        let mut reg = BackendRegistry::new().with(Arc::new(ProceduralBackend::new(
            self.backend_seed.unwrap_or(0),
            latent_dim,
        )));
        if let Some(endpoint) = &self.endpoint {
            if self.backend == PROCEDURAL_BACKEND_ID {
                return Err(Failure::invalid(format!(
                    "--endpoint needs a --backend id other than {PROCEDURAL_BACKEND_ID:?}"
                )));
            }
            let remote = RemoteBackend::new(BackendDescriptor {
                backend_id: self.backend.clone(),
                kind: BackendKind::Remote,
                latent_dim,
                supports_class_mix: false,
                endpoint: Some(endpoint.clone()),
            })
            .map_err(Failure::invalid)?;
            reg.insert(Arc::new(remote));
        }
        Ok(reg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render every job of a blend job file.
    Blend { job_file: PathBuf },
    /// Run a scripted evolution and write its lineage log and final images.
    Evolve {
        config: PathBuf,
        #[arg(long, default_value = "evolve-out")]
        out: PathBuf,
    },
    /// Regenerate or verify the golden image set.
    Golden {
        #[command(subcommand)]
        mode: GoldenMode,
    },
    /// Export consented gallery artifacts as a bundle.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        dest: PathBuf,
    },
    /// Write a synthetic source pool with rendered thumbnails.
    Pool {
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value = "pool.json")]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum GoldenMode {
    Write {
        #[arg(long, default_value = golden::DEFAULT_DIR)]
        dir: PathBuf,
    },
    Check {
        #[arg(long, default_value = golden::DEFAULT_DIR)]
        dir: PathBuf,
        /// Compare decoded pixels instead of PNG bytes.
        #[arg(long)]
        pixels: bool,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "pool.json", env = "GENEBLEND_POOL")]
    pub pool: PathBuf,
    #[arg(long, default_value = "store", env = "GENEBLEND_STORE")]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1", env = "GENEBLEND_HOST")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080, env = "GENEBLEND_PORT")]
    pub port: u16,
    /// Send class mixtures to the remote backend.
    #[arg(long)]
    pub class_mix: bool,
}

/// A command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn invalid(error: impl fmt::Display) -> Self {
        Self::new(EXIT_INVALID, anyhow::anyhow!("{error}"))
    }

    pub fn failed(error: impl fmt::Display) -> Self {
        Self::new(EXIT_FAILED, anyhow::anyhow!("{error}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult = Result<(), Failure>;

/// Runs a parsed command line, writing machine output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Blend { job_file } => blend::run(&cli.global, &job_file, out),
        Command::Evolve { config, out: dir } => evolve::run(&cli.global, &config, &dir, out),
        Command::Golden { mode } => match mode {
            GoldenMode::Write { dir } => golden::write(&cli.global, &dir, out),
            GoldenMode::Check { dir, pixels } => golden::check(&cli.global, &dir, pixels, out),
        },
        Command::Export { store, dest } => export(&store, &dest, out),
        Command::Pool { count, out: path } => pool::run(&cli.global, count, &path, out),
        Command::Serve(args) => serve(&cli.global, args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("geneblend: {f}");
            f.code
        }
    }
}

pub(crate) fn emit(out: &mut dyn Write, value: &serde_json::Value) -> CmdResult {
    writeln!(out, "{value}").map_err(Failure::failed)
}

/// Writes `bytes` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn export(store: &Path, dest: &Path, out: &mut dyn Write) -> CmdResult {
    let store = GalleryStore::open(store).map_err(Failure::failed)?;
    let count = store.export_bundle(dest).map_err(Failure::failed)?;
    emit(
        out,
        &serde_json::json!({
            "manifest": dest.join("bundle.json"),
            "count": count,
        }),
    )
}

fn serve(global: &Global, args: ServeArgs) -> CmdResult {
    let config = geneblend_service::ServeConfig {
        pool: args.pool,
        store: args.store,
        backend: global.backend.clone(),
        endpoint: global.endpoint.clone(),
        remote_class_mix: args.class_mix,
        backend_seed: global.backend_seed.unwrap_or(0),
        host: args.host,
        port: args.port,
        latent_dim: global.latent_dim,
        image_size: global.image_size_or(geneblend_core::generator::DEFAULT_IMAGE_SIDE),
    };
    let rt = tokio::runtime::Runtime::new().map_err(Failure::failed)?;
    rt.block_on(geneblend_service::serve(config))
        .map_err(|e| Failure::new(EXIT_FAILED, e))
}
