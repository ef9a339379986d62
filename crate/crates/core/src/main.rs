use std::path::PathBuf;
use std::process::ExitCode;

use canvas_blend::backend::{BackendKind, Engine};
use canvas_blend::config::Config;
use canvas_blend::pipeline::Renderer;
use canvas_blend::scene::{self, SceneSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "canvas-blend", version, about = "Spatial-layout attribute transfer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file (also read from CANVAS_BLEND_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the backend: synthetic | real
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// -v info, -vv debug, -vvv trace
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene file to a PNG and a JSON report
    Render {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overwrite existing outputs
        #[arg(long)]
        force: bool,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);

    let mut config = match Config::load(cli.common.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(scene::exit::VALIDATION as u8);
        }
    };

    match cli.command {
        Command::Render { spec, out, force } => {
            let kind = match cli.common.backend {
                Some(k) => k,
                None => match SceneSpec::from_file(&spec) {
                    Ok(s) => s.backend,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(e.exit_code() as u8);
                    }
                },
            };
            let engine = match Engine::load(kind, &config.real, config.masks.feather_px) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(scene::exit::BACKEND as u8);
                }
            };
            let renderer = Renderer::new(engine, &config.layer_groups);
            match scene::cli_render(&spec, &out, &renderer, force) {
                Ok(report) => {
                    tracing::info!(contributions = report.contributions.len(), "rendered");
                    println!("{}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Serve {
            port,
            host,
            data_dir,
            workers,
        } => {
            if let Some(k) = cli.common.backend {
                config.backend = k;
            }
            if let Some(p) = port {
                config.service.port = p;
            }
            if let Some(h) = host {
                config.service.host = h;
            }
            if let Some(d) = data_dir {
                config.service.data_dir = d;
            }
            if workers.is_some() {
                config.service.workers = workers;
            }
            let engine = match Engine::load(config.backend, &config.real, config.masks.feather_px) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(scene::exit::BACKEND as u8);
                }
            };
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            match runtime.block_on(canvas_blend::api::serve(&config, engine)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(scene::exit::IO as u8)
                }
            }
        }
    }
}
