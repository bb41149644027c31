use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{read_rounds_csv, summarize, write_rounds_csv, RunSummary};
use super::{run_episode, EpisodeSettings, RunConfig, RunError};
use crate::env::LoadedData;
use crate::scorer::{PredictionLog, PredictionSink, Scorer};

/// Runs one seeded episode. With `out_dir` set, writes `rounds.csv`,
/// `summary.json` and, when a scorer is configured, `predictions.jsonl`.
pub fn run_seed(config: &RunConfig, data: &LoadedData, seed: u64, out_dir: Option<&Path>) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let mut env = data.instantiate(seed)?;
    let mut scorer = config.scorer.as_ref().map(|s| s.build(seed)).transpose()?;
    let settings = EpisodeSettings::from(config);

    let mut log = match (out_dir, scorer.is_some()) {
        (Some(dir), true) => {
            fs::create_dir_all(dir).map_err(RunError::io(dir))?;
            let path = dir.join("predictions.jsonl");
            Some(PredictionLog::create(&path).map_err(RunError::io(path))?)
        }
        _ => None,
    };
    let episode = run_episode(
        &settings,
        &mut *env,
        scorer.as_deref_mut().map(|s| s as &mut dyn Scorer),
        log.as_mut().map(|l| l as &mut dyn PredictionSink),
    )?;
    let mut summary = episode.summary(&config.name, env.name(), seed, &config.checkpoints, config.regret_kind)?;
    summary.elapsed_ms = Some(start.elapsed().as_millis() as u64);

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(RunError::io(dir))?;
        if let Some(mut l) = log {
            l.flush().map_err(RunError::io(dir.join("predictions.jsonl")))?;
        }
        write_rounds_csv(&dir.join("rounds.csv"), &episode.records)?;
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary)?;
        fs::write(&path, text + "\n").map_err(RunError::io(path))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub config: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub summary: Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: String,
    pub t: u64,
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean; 0 with fewer than two runs.
    pub stderr: f64,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.summary.is_err())
    }
}

/// Runs every config on every seed. Output goes to `out/<name>/seed_<s>/`
/// plus `out/summary.csv`. A failing cell is reported and does not stop the
/// others. LLM-backed cells run one at a time; the rest run on `threads`
/// workers (all cores when `None`).
pub fn run_sweep(
    configs: &[RunConfig],
    seeds: Option<&[u64]>,
    out: &Path,
    threads: Option<usize>,
) -> Result<SweepReport, RunError> {
    let mut names = HashSet::new();
    for c in configs {
        c.validate()?;
        if !names.insert(c.name.as_str()) {
            return Err(RunError::Config(format!("duplicate config name '{}'", c.name)));
        }
    }
    fs::create_dir_all(out).map_err(RunError::io(out))?;

    let data: Vec<Result<LoadedData, String>> = configs
        .iter()
        .map(|c| LoadedData::load(&c.environment).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let s = seeds.map_or_else(|| c.seeds(), <[u64]>::to_vec);
            s.into_iter().map(move |seed| (i, seed))
        })
        .collect();

    let run = |&(i, seed): &(usize, u64)| -> CellResult {
        let cfg = &configs[i];
        let dir = out.join(&cfg.name).join(format!("seed_{seed}"));
        let summary = match &data[i] {
            Ok(d) => run_seed(cfg, d, seed, Some(&dir)).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        CellResult {
            config: cfg.name.clone(),
            seed,
            dir,
            summary,
        }
    };

    let is_llm = |i: usize| configs[i].scorer.as_ref().is_some_and(|s| s.is_llm());
    let (serial, parallel): (Vec<_>, Vec<_>) = jobs.iter().enumerate().partition(|(_, (i, _))| is_llm(*i));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Config(e.to_string()))?;
    let mut results: Vec<(usize, CellResult)> =
        pool.install(|| parallel.par_iter().map(|(k, job)| (*k, run(job))).collect());
    results.extend(serial.iter().map(|(k, job)| (*k, run(job))));
    results.sort_by_key(|(k, _)| *k);
    let cells: Vec<CellResult> = results.into_iter().map(|(_, c)| c).collect();

    let aggregates = aggregate(&cells);
    write_summary_csv(&out.join("summary.csv"), &aggregates)?;
    Ok(SweepReport { cells, aggregates })
}

/// Mean and standard error of cumulative regret per config and checkpoint.
/// Configs keep their first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    let mut order: Vec<&str> = Vec::new();
    for c in cells {
        if !order.contains(&c.config.as_str()) {
            order.push(&c.config);
        }
    }
    let mut out = Vec::new();
    for name in order {
        let group: Vec<&CellResult> = cells.iter().filter(|c| c.config == name).collect();
        let failed = group.iter().filter(|c| c.summary.is_err()).count();
        let ok: Vec<&RunSummary> = group.iter().filter_map(|c| c.summary.as_ref().ok()).collect();
        let ts: BTreeSet<u64> = ok.iter().flat_map(|s| s.checkpoints.iter().map(|c| c.t)).collect();
        for t in ts {
            let vals: Vec<f64> = ok.iter().filter_map(|s| s.checkpoint(t)).collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            out.push(Aggregate {
                config: name.to_string(),
                t,
                n,
                mean,
                stderr,
                failed,
            });
        }
    }
    out
}

pub fn write_summary_csv(path: &Path, aggregates: &[Aggregate]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for a in aggregates {
        w.serialize(a)?;
    }
    w.flush().map_err(RunError::io(path))?;
    Ok(())
}

fn find_summaries(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(RunError::io(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(RunError::io(dir))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_summaries(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "summary.json") {
            found.push(p);
        }
    }
    Ok(())
}

/// Recomputes checkpoint aggregates from the round logs under `runs`.
/// Each run directory needs `summary.json` (for name, seed and regret
/// column) next to its `rounds.csv`. `checkpoints` replaces the ones stored
/// in the summaries.
pub fn report(runs: &Path, checkpoints: Option<&[u64]>) -> Result<Vec<Aggregate>, RunError> {
    let mut paths = Vec::new();
    find_summaries(runs, &mut paths)?;
    let mut by_name: BTreeMap<String, Vec<CellResult>> = BTreeMap::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(RunError::io(&p))?;
        let stored: RunSummary = serde_json::from_str(&text)?;
        let dir = p.parent().unwrap_or(runs).to_path_buf();
        let records = read_rounds_csv(&dir.join("rounds.csv"))?;
        let ts: Vec<u64> = match checkpoints {
            Some(c) => c.to_vec(),
            None => stored.checkpoints.iter().map(|c| c.t).collect(),
        };
        let summary = summarize(
            &stored.name,
            &stored.environment,
            stored.seed,
            &records,
            &ts,
            stored.regret_kind,
        )
        .map_err(|e| e.to_string());
        by_name.entry(stored.name.clone()).or_default().push(CellResult {
            config: stored.name,
            seed: stored.seed,
            dir,
            summary,
        });
    }
    let cells: Vec<CellResult> = by_name.into_values().flatten().collect();
    Ok(aggregate(&cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, SyntheticConfig};
    use crate::runner::{read_rounds_csv, Checkpoint};
    use crate::schedule::ScheduleSpec;
    use crate::scorer::{Bias, ScorerSpec};

    fn cfg(name: &str) -> RunConfig {
        let mut c = RunConfig::new(name, EnvSpec::Synthetic(SyntheticConfig::new(3, 3, 0.5)));
        c.horizon = 40;
        c.checkpoints = vec![10, 40];
        c
    }

    #[test]
    fn aggregate_mean_and_stderr() {
        let mk = |seed, v| CellResult {
            config: "a".into(),
            seed,
            dir: PathBuf::new(),
            summary: Ok(RunSummary {
                name: "a".into(),
                environment: "e".into(),
                seed,
                rounds: 1,
                regret_kind: crate::env::RegretKind::Expected,
                checkpoints: vec![Checkpoint { t: 1, cum_regret: v, cum_regret_realized: v, cum_regret_expected: v }],
                final_cum_regret: v,
                total_tokens_in: 0,
                total_tokens_out: 0,
                mean_weight: 0.0,
                final_ema_error: 0.0,
                scorer_ok_rounds: 0,
                scorer_unavailable_rounds: 0,
                n_real: vec![],
                n_pseudo: vec![],
                elapsed_ms: None,
            }),
        };
        let mut cells = vec![mk(1, 1.0), mk(2, 2.0), mk(3, 6.0)];
        cells.push(CellResult { config: "a".into(), seed: 4, dir: PathBuf::new(), summary: Err("x".into()) });
        let a = aggregate(&cells);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].n, 3);
        assert_eq!(a[0].failed, 1);
        assert!((a[0].mean - 3.0).abs() < 1e-12);
        // sample sd = sqrt(7), stderr = sqrt(7/3)
        assert!((a[0].stderr - (7.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sweep_writes_layout_and_report_agrees() {
        let mut gated = cfg("gated");
        gated.scorer = Some(ScorerSpec::Oracle { bias: Bias::Uniform(0.2), noise_sigma: 0.1 });
        gated.schedule = ScheduleSpec::CalibrationGated { base_weight: 0.3, eta: 10.0 };
        let configs = vec![cfg("plain"), gated];
        let dir = tempfile::tempdir().unwrap();
        let rep = run_sweep(&configs, Some(&[1, 2, 3]), dir.path(), Some(2)).unwrap();
        assert_eq!(rep.cells.len(), 6);
        assert_eq!(rep.failures().count(), 0);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("gated/seed_2/predictions.jsonl").exists());
        assert!(!dir.path().join("plain/seed_2/predictions.jsonl").exists());
        let rows = read_rounds_csv(&dir.path().join("plain/seed_1/rounds.csv")).unwrap();
        assert_eq!(rows.len(), 40);

        let again = report(dir.path(), None).unwrap();
        let mut expected = rep.aggregates.clone();
        expected.sort_by(|a, b| a.config.cmp(&b.config).then(a.t.cmp(&b.t)));
        assert_eq!(again, expected);
    }

    #[test]
    fn failing_cell_does_not_abort() {
        let mut broken = cfg("broken");
        broken.environment = EnvSpec::Mushroom(crate::env::MushroomConfig {
            data_path: "/nonexistent/agaricus.data".into(),
            rewards: Default::default(),
        });
        let dir = tempfile::tempdir().unwrap();
        let rep = run_sweep(&[broken, cfg("fine")], Some(&[5]), dir.path(), None).unwrap();
        assert_eq!(rep.failures().count(), 1);
        assert!(rep.cells[1].summary.is_ok());
    }

    #[test]
    fn parallel_matches_serial_bytes() {
        let configs = vec![cfg("p")];
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_sweep(&configs, Some(&[7, 8, 9]), a.path(), Some(1)).unwrap();
        run_sweep(&configs, Some(&[7, 8, 9]), b.path(), Some(3)).unwrap();
        for s in [7, 8, 9] {
            let rel = format!("p/seed_{s}/rounds.csv");
            assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap());
        }
    }
}
