//! `topomap` — drive the pipeline from raw observation streams (or the
//! built-in synthetic scene) to segments, fingerprints, distance matrices,
//! discrimination scores and a planar embedding.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "topomap",
    version,
    about = "WiFi RSSI likelihood fingerprints, statistical distances and \
             topological indoor mapping",
    after_help = "Without --wifi the commands run on the built-in synthetic \
                  scene, so `topomap evaluate` works out of the box. \
                  Artifacts land in <out-dir>/run-<config-hash>/."
)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: config::OverrideFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split time into stationary/moving intervals and cut WiFi segments
    Segment,
    /// Estimate per-AP likelihood fingerprints for every segment
    Fingerprint {
        /// Segments CSV (default: run-directory segments.csv, else derived)
        #[arg(long, value_name = "FILE")]
        segments: Option<PathBuf>,
    },
    /// Pairwise distance matrix between segment fingerprints
    Distances {
        /// Fingerprints JSONL (default: run directory, else derived)
        #[arg(long, value_name = "FILE")]
        fingerprints: Option<PathBuf>,
    },
    /// ROC/AUC discrimination and floor-plan correlations
    Evaluate {
        /// Matrix binary; the sidecar is looked up as *.meta.json
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
    },
    /// Classical MDS layout of the distance matrix (CSV + SVG)
    Embed {
        /// Matrix binary; the sidecar is looked up as *.meta.json
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
    },
    /// Write the synthetic scene to disk (wifi, accel, truth, labels)
    Simulate,
    /// Estimator × measure × norm × invisibility comparison (84 rows)
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Segment => "segment",
            Command::Fingerprint { .. } => "fingerprint",
            Command::Distances { .. } => "distances",
            Command::Evaluate { .. } => "evaluate",
            Command::Embed { .. } => "embed",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit 0; anything else is
            // a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        let code = e.exit_code();
        let payload = serde_json::json!({
            "error": {
                "category": e.category(),
                "message": e.to_string(),
                "exit_code": code,
            }
        });
        eprintln!("{payload}");
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> topomap::Result<()> {
    let mut cfg = config::load_config(cli.config.as_deref())?;
    cli.flags.apply(&mut cfg);
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| topomap::Error::Config(format!("cannot size worker pool: {e}")))?;
    }

    let mut ctx = artifacts::RunContext::new(cfg)?;
    let mut cache = commands::SourceCache::default();
    let name = cli.command.name();
    let dir = ctx.dir.clone();
    match &cli.command {
        Command::Segment => commands::segment(&mut ctx, &mut cache)?,
        Command::Fingerprint { segments } => {
            commands::fingerprint(&mut ctx, &mut cache, segments.as_deref())?
        }
        Command::Distances { fingerprints } => {
            commands::distances(&mut ctx, &mut cache, fingerprints.as_deref())?
        }
        Command::Evaluate { matrix } => {
            commands::evaluate(&mut ctx, &mut cache, matrix.as_deref())?
        }
        Command::Embed { matrix } => commands::embed(&mut ctx, &mut cache, matrix.as_deref())?,
        Command::Simulate => commands::simulate(&mut ctx)?,
        Command::Sweep => commands::sweep(&mut ctx, &mut cache)?,
    }
    ctx.finish(name)?;
    println!("{}", dir.display());
    Ok(())
}
