use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use faulty_tree::harness::{
    generate, parse, run_trace, AdversaryKind, GenKind, GenParams, RunConfig,
};
use faulty_tree::resilient_tree::Profile;

/// Replays or generates an operation trace against the resilient tree
/// and checks every answer with the fault-free oracle.
#[derive(Parser, Debug)]
#[command(name = "faulty-tree", version)]
struct Cli {
    /// Trace file to replay ("-" for stdin).
    #[arg(long, conflicts_with = "generate")]
    trace: Option<PathBuf>,
    /// Generate a trace instead: chain, caterpillar, random-attach, star-of-paths, figure2.
    #[arg(long)]
    generate: Option<GenKind>,
    /// Vertices for --generate.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, scripted, random, targeted-flags, adaptive-path.
    #[arg(long)]
    adversary: Option<AdversaryKind>,
    /// Corruption budget, at most delta.
    #[arg(long)]
    budget: Option<usize>,
    /// Per-access corruption probability for random strategies.
    #[arg(long)]
    rate: Option<f64>,
    /// Classify answers against the oracle; `--check-oracle false` skips it.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    check_oracle: bool,
    /// Write the JSON run report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    safe_words: Option<usize>,
    /// wide or packed record layout.
    #[arg(long)]
    profile: Option<Profile>,
    /// Dump the generated trace and exit.
    #[arg(long)]
    emit_trace: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let trace = match (&cli.trace, cli.generate) {
        (Some(path), _) => {
            let text = if path.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin())
            } else {
                std::fs::read_to_string(path)
            };
            let text = match text {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match parse(&text) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
        }
        (None, Some(kind)) => {
            let delta = cli.delta.unwrap_or(2);
            generate(&GenParams::new(kind, cli.n, delta, cli.seed.unwrap_or(0)))
        }
        (None, None) => {
            eprintln!("error: one of --trace or --generate is required");
            return ExitCode::from(2);
        }
    };
    if cli.emit_trace {
        print!("{trace}");
        return ExitCode::SUCCESS;
    }

    let mut cfg = RunConfig::from_meta(&trace.meta);
    if let Some(d) = cli.delta {
        cfg.delta = d;
        if trace.meta.budget.is_none() {
            cfg.budget = d;
        }
    }
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.adversary = cli.adversary.unwrap_or(cfg.adversary);
    cfg.budget = cli.budget.unwrap_or(cfg.budget);
    cfg.rate = cli.rate.unwrap_or(cfg.rate);
    cfg.safe_words = cli.safe_words.unwrap_or(cfg.safe_words);
    cfg.profile = cli.profile.unwrap_or(cfg.profile);
    cfg.check_oracle = cli.check_oracle;
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    let report = match run_trace(&trace, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for line in &report.output {
        println!("{line}");
    }
    if let Some(path) = &cli.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = std::fs::write(path, json) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    let v = &report.verdicts;
    eprintln!(
        "vertices={} blacks={} corruptions={} matched={} exempt={} violations={} bound_violations={}",
        report.vertices,
        report.black_count,
        report.corruptions.len(),
        v.matched,
        v.exempt_mismatch,
        v.violations,
        report.black_bound_violations
    );
    for viol in &report.violations {
        eprintln!(
            "violation line {}: {} got {} want {}",
            viol.line, viol.query, viol.got, viol.want
        );
    }
    if report.clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
