use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use qflow_server::{router, AppState, ServerConfig};

#[derive(Parser)]
#[command(name = "qflow-server", version, about = "HTTP session service for qflow")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value = ".qflow-sessions")]
    sessions_dir: PathBuf,
    /// Config used when a create request names none.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Include raw model replies in served events.
    #[arg(long)]
    expose_raw: bool,
    #[arg(long, default_value_t = 0)]
    step_delay_ms: u64,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("QFLOW_LOG"))
        .init();
    let args = Args::parse();
    std::fs::create_dir_all(&args.sessions_dir)?;
    let config = ServerConfig {
        sessions_dir: args.sessions_dir,
        default_config: args.config,
        expose_raw: args.expose_raw,
        step_delay: Duration::from_millis(args.step_delay_ms),
    };
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    tracing::info!(addr = %args.bind, "listening");
    axum::serve(listener, router(AppState::new(config))).await
}
