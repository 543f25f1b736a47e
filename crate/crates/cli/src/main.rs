use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use mfg_cli::artifacts::emit_artifacts;
use mfg_cli::config::{QuadRuleKind, RunConfig};
use mfg_cli::pipeline::run_pipeline;
use mfg_cli::preset::{print_table, run_reproduction_preset};

/// Solver for a mean-field game of irreversible capacity expansion: Picard
/// iteration on the boundary integral equation nested in a Monte Carlo
/// mean-field learning loop, with diagnostics and CSV artifacts.
#[derive(Parser, Debug)]
#[command(name = "mfg", version, about)]
struct Cli {
    /// JSON configuration file; omitted keys use the benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for artifacts (overrides the config value).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master RNG seed (overrides config and MFG_SEED).
    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo paths per mean-field update.
    #[arg(long)]
    mc_paths: Option<usize>,

    /// Convergence tolerance for both iteration levels.
    #[arg(long)]
    eta: Option<f64>,

    /// Run a named preset; `paper` reproduces the benchmark experiment and
    /// exits nonzero if any headline bound fails.
    #[arg(long)]
    preset: Option<String>,

    /// Cross-check the constant-drift boundary against the backward-induction
    /// solver on three capacity slices.
    #[arg(long)]
    oracle_check: bool,

    /// Emit every Picard iterate as its own surface CSV.
    #[arg(long)]
    dump_iterations: bool,

    /// Apply the post-hoc isotonic projection to each converged boundary.
    #[arg(long)]
    isotonic_projection: bool,

    /// Paths in the Skorokhod diagnostic batch.
    #[arg(long)]
    diag_paths: Option<usize>,

    /// Time steps of the refined diagnostic grid.
    #[arg(long)]
    diag_steps: Option<usize>,

    /// Quadrature weights for the boundary kernels.
    #[arg(long, value_parser = parse_rule)]
    quad_rule: Option<QuadRuleKind>,
}

fn parse_rule(s: &str) -> Result<QuadRuleKind, String> {
    match s {
        "trapezoid" => Ok(QuadRuleKind::Trapezoid),
        "rectangle" => Ok(QuadRuleKind::Rectangle),
        other => Err(format!(
            "unknown quadrature rule `{other}` (expected `trapezoid` or `rectangle`)"
        )),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    // Environment overrides the file; flags override everything.
    if let Ok(seed) = std::env::var("MFG_SEED") {
        cfg.seed = seed
            .parse()
            .with_context(|| format!("MFG_SEED must be an integer, got `{seed}`"))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.mc_paths {
        cfg.mc_paths = n;
    }
    if let Some(eta) = cli.eta {
        cfg.eta = eta;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if cli.oracle_check {
        cfg.oracle_check = true;
    }
    if cli.dump_iterations {
        cfg.dump_iterations = true;
    }
    if cli.isotonic_projection {
        cfg.isotonic_projection = true;
    }
    if let Some(n) = cli.diag_paths {
        cfg.diag_paths = n;
    }
    if let Some(n) = cli.diag_steps {
        cfg.diag_steps = n;
    }
    if let Some(rule) = cli.quad_rule {
        cfg.quad_rule = rule;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = resolve_config(&cli)?;
    let out_dir = PathBuf::from(&cfg.out_dir);

    if let Some(name) = &cli.preset {
        if name != "paper" {
            bail!("unknown preset `{name}` (available: paper)");
        }
        let outcome = run_reproduction_preset(cfg, &out_dir)?;
        print_table(&outcome);
        println!("artifacts: {}", out_dir.display());
        return Ok(outcome.pass);
    }

    let output = run_pipeline(&cfg)?;
    let manifest = emit_artifacts(&output, &out_dir)?;
    println!(
        "run finished: {} game iterations (converged: {}), residual sup-norm {:.4e}, \
         2-norm {:.4e}, {} artifacts in {}",
        output.run.iterations.len(),
        output.run.converged,
        output.diagnostics.residual.norm_inf,
        output.diagnostics.residual.norm_2,
        manifest.files.len(),
        out_dir.display()
    );
    for check in &output.oracle {
        println!(
            "oracle slice y={}: max deviation {:.4e} (tolerance {:.4e}) {}",
            check.y,
            check.max_deviation,
            check.tolerance,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(output.oracle.iter().all(|c| c.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
