//! `hes`: runs one experiment and writes its results plus a manifest.
//!
//! Exit status is 0 when every check passes, 1 when a check fails, and 2 on a
//! usage, configuration or computation error (in which case no file is left
//! behind).

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Outcome, Subcommand};
use config::ExperimentConfig;

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "hes",
    version,
    about = "Hessian ascent laboratory for mixed spherical spin glasses"
)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML file with one table per subcommand; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed` (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, env = "HES_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, String> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(format!("cannot write {}: {e}", path.display()));
        }
        written.push(path);
    }
    Ok(written)
}

fn execute(cli: &Cli) -> Result<bool, String> {
    let text = match &cli.config {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?
        }
        None => String::new(),
    };
    let cfg = ExperimentConfig::parse(&text)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let workers = match cli.workers {
        Some(0) => return Err("--workers must be at least 1".into()),
        Some(w) => w,
        None => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| format!("cannot start {workers} workers: {e}"))?;

    let start = Instant::now();
    let Outcome {
        result,
        csv,
        checks,
        config,
    } = commands::run(cli.subcommand, &cfg, seed)?;
    let wall = start.elapsed().as_secs_f64();

    let sub = cli.subcommand.name();
    let stem = format!("{sub}_seed{seed}");
    let effective = json!({ "subcommand": sub, "seed": seed, "section": config });
    let hash = Sha256::digest(serde_json::to_vec(&effective).expect("config serializes"));
    let hash: String = hash.iter().map(|b| format!("{b:02x}")).collect();

    let mut files = vec![(format!("{stem}.json"), pretty(&result))];
    if let Some(csv) = csv {
        files.push((format!("{stem}.csv"), csv));
    }
    let passed = checks.iter().all(|c| c.passed);
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "library": "hes-core",
        "library_version": hes_core::VERSION,
        "subcommand": sub,
        "seed": seed,
        "config": effective,
        "config_hash": hash,
        "workers": workers,
        "wall_clock_seconds": wall,
        "checks": checks,
        "all_passed": passed,
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    files.push((format!("{stem}_manifest.json"), pretty(&manifest)));
    write_all(&cli.out, &files)?;

    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("wrote {} files to {}", files.len(), cli.out.display());
    Ok(passed)
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
