use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use featlab_cli::run::{load_script, run};
use featlab_cli::{api, SessionConfig};

/// Runs a scripted feature-engineering session, or serves the HTTP API.
#[derive(Debug, Parser)]
#[command(name = "featlab", version)]
struct Args {
    /// Session config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Action script (JSON array). Without one only the baseline is evaluated.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Report directory.
    #[arg(long, default_value = "featlab-out")]
    out: PathBuf,
    /// Overrides the config's rng seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Serve the HTTP API on this address instead of running a script.
    #[arg(long, value_name = "ADDR:PORT")]
    serve: Option<String>,
}

const EXIT_ACTION_FAILED: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEATLAB_LOG", "info")).init();
    let args = Args::parse();
    match real_main(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(args: Args) -> anyhow::Result<ExitCode> {
    if let Some(addr) = args.serve {
        let app = api::AppState::new();
        if let Some(path) = &args.config {
            let cfg = SessionConfig::load(path)?;
            let state = featlab_core::SessionState::open(cfg.source(), cfg.settings(args.seed)?)?;
            let id = app.insert_session(state);
            log::info!("opened session {id} from {}", path.display());
        }
        let rt = tokio::runtime::Runtime::new()?;
        rt.block_on(api::serve(&addr, app))?;
        return Ok(ExitCode::SUCCESS);
    }

    let config_path = args.config.context("--config is required unless --serve is given")?;
    let cfg = SessionConfig::load(&config_path)?;
    let actions = match &args.script {
        Some(p) => load_script(p)?,
        None => Vec::new(),
    };
    let outcome = run(&cfg, cfg.settings(args.seed)?, &actions, &args.out)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    let best = outcome.state.best();
    println!(
        "{} action(s) applied; {} active feature(s); best entry {} (combined score {:.6})",
        outcome.state.log().len(),
        outcome.state.dataset().active_names().len(),
        best.ordinal,
        best.combined_score
    );
    if let Some(f) = outcome.failure {
        eprintln!("action {} failed: {}", f.index, f.error);
        return Ok(ExitCode::from(EXIT_ACTION_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}
