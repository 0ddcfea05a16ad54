use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = geneblend_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    ExitCode::from(geneblend_cli::run(cli, &mut stdout))
}
