use std::path::PathBuf;
use std::process::ExitCode;

use banmod::audit::{check_universal, check_universal_colimit, demo, run_audit, AuditReport, CONSTRUCTIONS, DEMOS, SCHEMA_VERSION};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

mod instance;

use instance::{Built, Loaded};

#[derive(Parser)]
#[command(name = "banmod", version, about = "Audits limits and colimits of Banach L0-modules over finite measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized universal-property audit of one construction.
    Audit {
        #[arg(long)]
        construction: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Finite truncation of one of the counterexamples.
    Demo {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 8)]
        levels: usize,
    },
    /// Validate a JSON instance and audit the (co)limit it requests.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad flags or unreadable input.
    #[error("{0}")]
    Usage(String),
    /// Well-formed input whose invariants do not hold.
    #[error("{0}")]
    Semantic(String),
}

/// A report plus whether it counts as a pass.
struct Outcome {
    report: Value,
    passed: bool,
    summary: Vec<String>,
}

fn validate(trials: usize, tol: f64) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    Ok(())
}

fn audit_summary(r: &AuditReport) -> Vec<String> {
    let mut lines = vec![format!(
        "{}: {} over {} trials, max residual {:.3e}, uniqueness {}, {} ms",
        r.construction,
        r.verdict,
        r.trials,
        r.max_residual,
        if r.uniqueness_certified { "certified" } else { "not certified" },
        r.wall_time_ms
    )];
    for f in r.failures.iter().take(5) {
        let atom = f.atom.as_deref().map(|a| format!(" atom {a}")).unwrap_or_default();
        lines.push(format!("  trial {}: {}{atom}: {}", f.trial, f.check, f.detail));
    }
    lines
}

fn cmd_audit(construction: &str, trials: usize, seed: u64, tol: f64) -> Result<Outcome, Failure> {
    validate(trials, tol)?;
    if !CONSTRUCTIONS.contains(&construction) {
        return Err(Failure::Usage(format!("unknown construction {construction}; expected one of {}", CONSTRUCTIONS.join(", "))));
    }
    let r = run_audit(construction, trials, seed, tol, None).map_err(|e| Failure::Semantic(e.to_string()))?;
    Ok(Outcome { report: r.to_json(), passed: r.passed, summary: audit_summary(&r) })
}

fn cmd_demo(name: &str, levels: usize) -> Result<Outcome, Failure> {
    if !DEMOS.contains(&name) {
        return Err(Failure::Usage(format!("unknown demo {name}; expected one of {}", DEMOS.join(", "))));
    }
    if levels == 0 {
        return Err(Failure::Usage("--levels must be at least 1".into()));
    }
    let r = demo(name, levels).map_err(|e| Failure::Usage(e.to_string()))?;
    let shown: Vec<String> = r.values.iter().map(|v| format!("{v}")).collect();
    let summary = vec![format!("{} ({}): [{}], {}", r.example, r.quantity, shown.join(", "), r.verdict)];
    Ok(Outcome { report: r.to_json(), passed: true, summary })
}

fn cmd_check(input: &PathBuf, trials: usize, seed: u64, tol: f64) -> Result<Outcome, Failure> {
    validate(trials, tol)?;
    let text = std::fs::read_to_string(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
    let mut loaded = Loaded::new(instance::parse(&text)?)?;
    let checks = loaded.check_morphisms(tol)?;
    let mut summary = Vec::new();
    for c in checks.iter().filter(|c| !c.report.ok) {
        let atom = c.report.atom.as_deref().unwrap_or("?");
        let norm = c.report.atom.as_ref().and_then(|_| c.report.norms.iter().cloned().find(|n| !(*n <= 1.0 + tol)));
        summary.push(format!("morphism {} is not a contraction on atom {atom} (norm {:.6})", c.name, norm.unwrap_or(f64::NAN)));
    }
    let construction = loaded.instance.construction.clone();
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "construction": construction,
        "morphisms": checks,
    });
    if !summary.is_empty() {
        report["passed"] = json!(false);
        return Ok(Outcome { report, passed: false, summary });
    }
    let audit = match loaded.build()? {
        Built::Limit(d, cone) => check_universal(&d, &cone, trials, seed, tol),
        Built::Colimit(d, cocone) => check_universal_colimit(&d, &cocone, trials, seed, tol),
    };
    summary.extend(audit_summary(&audit));
    report["passed"] = json!(audit.passed);
    report["audit"] = audit.to_json();
    Ok(Outcome { report, passed: audit.passed, summary })
}

fn emit(cli: &Cli, o: &Outcome) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(&o.report).map_err(|e| Failure::Semantic(e.to_string()))?;
    text.push('\n');
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if !cli.quiet {
        for line in &o.summary {
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Audit { construction, trials, seed, tol } => cmd_audit(construction, *trials, *seed, *tol),
        Command::Demo { name, levels } => cmd_demo(name, *levels),
        Command::Check { input, trials, seed, tol } => cmd_check(input, *trials, *seed, *tol),
    };
    match outcome.and_then(|o| emit(&cli, &o).map(|_| o.passed)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Failure::Usage(_) => 2,
                Failure::Semantic(_) => 1,
            })
        }
    }
}
