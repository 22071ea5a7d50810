mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::{json, Value};

use config::{ExperimentConfig, ExperimentKind};
use experiments::RunError;

const OUT_ENV: &str = "NIKISHIN_OUT_DIR";

/// Runs one Nikishin-system experiment described by a JSON config.
#[derive(Parser, Debug)]
#[command(name = "nikishin", version)]
struct Cli {
    #[arg(long, required_unless_present = "list_checks")]
    config: Option<PathBuf>,
    /// Output directory; falls back to the config, then $NIKISHIN_OUT_DIR, then ./nikishin-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides precision_bits from the config.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    list_checks: bool,
}

fn write_summary(dir: &Path, summary: &Value) {
    let _ = std::fs::create_dir_all(dir);
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    if let Err(e) = std::fs::write(dir.join("summary.json"), text + "\n") {
        eprintln!("cannot write summary: {e}");
    }
}

fn metadata() -> Value {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({ "unix_time": secs, "version": env!("CARGO_PKG_VERSION") })
}

fn fail(dir: Option<&Path>, code: u8, record: Value) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string(&record).expect("record serializes")
    );
    if let Some(d) = dir {
        write_summary(
            d,
            &json!({ "passed": false, "error": record, "metadata": metadata() }),
        );
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_checks {
        for kind in ExperimentKind::ALL {
            println!("{}: {}", kind.name(), kind.checks().join(", "));
        }
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("thread pool: {e}");
        }
    }
    let path = cli.config.expect("clap enforces --config");
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            let dir = cli.out.or(env_out);
            return fail(
                dir.as_deref(),
                2,
                json!({ "kind": "config_read", "message": e.to_string() }),
            );
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            let dir = cli.out.or(env_out);
            return fail(
                dir.as_deref(),
                2,
                json!({ "kind": "parse", "message": e.message, "byte_offset": e.byte_offset }),
            );
        }
    };
    if let Some(p) = cli.precision {
        cfg.precision_bits = p;
    }
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .or(env_out)
        .unwrap_or_else(|| PathBuf::from("nikishin-out"));
    let hash = cfg.hash();
    match experiments::run(&cfg, &out) {
        Ok(report) => {
            let passed = report.passed();
            let summary = json!({
                "config_hash": hash,
                "kind": cfg.kind.name(),
                "precision_bits": cfg.precision_bits,
                "passed": passed,
                "failing": report.failing(),
                "checks": report.checks,
                "metrics": report.metrics,
                "metadata": metadata(),
            });
            write_summary(&out, &summary);
            if passed {
                println!("{}: all checks passed ({})", cfg.kind.name(), out.display());
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}: failing checks: {}",
                    cfg.kind.name(),
                    report.failing().join(", ")
                );
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(m)) => fail(
            Some(&out),
            2,
            json!({ "kind": "config", "message": m, "config_hash": hash }),
        ),
        Err(RunError::Numeric(e)) => fail(
            Some(&out),
            3,
            json!({ "kind": "numeric", "message": e.to_string(), "config_hash": hash }),
        ),
        Err(RunError::Io(e)) => fail(
            Some(&out),
            3,
            json!({ "kind": "io", "message": e.to_string(), "config_hash": hash }),
        ),
    }
}
