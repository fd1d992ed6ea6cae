use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use log::error;

use flexgui_core::clock::SystemClock;
use flexgui_core::server::{self, ServerConfig, DEFAULT_MAX_BODY};
use flexgui_core::{build_gateway, AppConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

/// AMF remoting server for the flexgui workbench.
#[derive(Debug, Parser)]
#[command(name = "flexgui-server", version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "./data")]
    data_dir: PathBuf,
    /// CSV with header id,name,category,description; replaces the records table
    #[arg(long)]
    seed_file: Option<PathBuf>,
    /// Directory served at /
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "info")]
    log_level: LogLevel,
    /// Routes file (target=operation per line); defaults to <data-dir>/routes.conf
    #[arg(long)]
    routes: Option<PathBuf>,
    /// Interface to bind
    #[arg(long, default_value = "0.0.0.0")]
    host: String,
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::new()
        .filter_level(args.log_level.into())
        .format_timestamp_millis()
        .init();
    let mut config = AppConfig::new(&args.data_dir);
    config.seed_file = args.seed_file;
    config.routes_file = args.routes;
    let gateway = match build_gateway(&config, Arc::new(SystemClock)) {
        Ok(g) => g,
        Err(e) => {
            error!("startup failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server_config = ServerConfig {
        listen: format!("{}:{}", args.host, args.port),
        static_dir: args.static_dir,
        workers: std::thread::available_parallelism().map_or(4, |n| n.get().clamp(4, 32)),
        max_body: DEFAULT_MAX_BODY,
    };
    match server::start(gateway, server_config) {
        Ok(handle) => {
            handle.join();
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
