use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gated_linucb::env::EnvSpec;
use gated_linucb::runner::presets::{all_presets, default_llm};
use gated_linucb::runner::{report, run_sweep, write_summary_csv, Aggregate, RunConfig, SweepReport};
use gated_linucb::scorer::ScorerSpec;

#[derive(Parser)]
#[command(name = "gated-linucb", version, about = "LinUCB with weighted LLM pseudo-observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config for `n_sims` seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_sims: Option<u64>,
        /// Replays a prediction log instead of calling the configured scorer.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run several configs over a shared seed list.
    Sweep {
        /// Config files, or directories of `*.json` configs.
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        /// `1,2,3`, `0..20` or `1..=20`. Defaults to each config's own seeds.
        // Full path keeps clap from treating this as a multi-value arg.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<std::vec::Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Recompute checkpoint means and standard errors from round logs.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<u64>>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the five standard configs for an environment.
    Presets {
        /// JSON file holding an environment spec.
        #[arg(long)]
        environment: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let num = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("bad seed '{v}': {e}"));
    if let Some((a, b)) = s.split_once("..=") {
        return Ok((num(a)?..=num(b)?).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        return Ok((num(a)?..num(b)?).collect());
    }
    s.split(',').map(num).collect()
}

fn config_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn print_table(aggregates: &[Aggregate]) {
    println!("{:<24} {:>6} {:>4} {:>12} {:>10} {:>6}", "config", "t", "n", "mean", "stderr", "failed");
    for a in aggregates {
        println!(
            "{:<24} {:>6} {:>4} {:>12.3} {:>10.3} {:>6}",
            a.config, a.t, a.n, a.mean, a.stderr, a.failed
        );
    }
}

fn finish(report: &SweepReport) -> ExitCode {
    print_table(&report.aggregates);
    let mut failed = false;
    for c in report.failures() {
        failed = true;
        eprintln!("error: {} seed {}: {}", c.config, c.seed, c.summary.as_ref().unwrap_err());
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            n_sims,
            replay,
            threads,
        } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_sims {
                cfg.n_sims = n;
            }
            if let Some(path) = replay {
                if cfg.n_sims != 1 {
                    return Err("--replay needs a single episode (n_sims = 1)".into());
                }
                cfg.scorer = Some(ScorerSpec::Replay { path });
            }
            let rep = run_sweep(&[cfg], None, &out, threads).map_err(|e| e.to_string())?;
            Ok(finish(&rep))
        }
        Command::Sweep {
            configs,
            seeds,
            out,
            threads,
        } => {
            let cfgs = config_paths(&configs)?
                .iter()
                .map(|p| RunConfig::load(p).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            if cfgs.is_empty() {
                return Err("no configs found".into());
            }
            let rep = run_sweep(&cfgs, seeds.as_deref(), &out, threads).map_err(|e| e.to_string())?;
            Ok(finish(&rep))
        }
        Command::Report { runs, checkpoints, out } => {
            let aggs = report(&runs, checkpoints.as_deref()).map_err(|e| e.to_string())?;
            if aggs.is_empty() {
                return Err(format!("no runs found under {}", runs.display()));
            }
            print_table(&aggs);
            if let Some(path) = out {
                write_summary_csv(&path, &aggs).map_err(|e| e.to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets {
            environment,
            out,
            endpoint,
            model,
        } => {
            let text = std::fs::read_to_string(&environment).map_err(|e| format!("{}: {e}", environment.display()))?;
            let env: EnvSpec = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", environment.display()))?;
            let mut llm = default_llm();
            if let Some(e) = endpoint {
                llm.endpoint = e;
            }
            if let Some(m) = model {
                llm.model = m;
            }
            std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            for cfg in all_presets(&env, &llm) {
                let path = out.join(format!("{}.json", cfg.name));
                write_json(&path, &cfg)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_json(path: &Path, cfg: &RunConfig) -> Result<(), String> {
    let text = serde_json::to_string_pretty(cfg).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
