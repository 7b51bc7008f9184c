//! Experiment execution: fan seeded trials out across threads, aggregate
//! deterministically, and assemble the report files.
//!
//! Trial `i` of scheme `k` uses the substream derived from
//! `(scheme_seed_k, i)` where `scheme_seed_k` is itself derived from
//! `(master_seed, k)`; results are collected in trial order and merged
//! sequentially, so the output does not depend on the number of worker
//! threads.

use crate::config::{ExperimentConfig, Kind};
use crate::report::{
    ancestry_csv, coupled_csv, queue_csv, trials_csv, AncestryLevelSummary, AncestrySection,
    CoupledSection, FluidSection, Meta, QueueSchemeSummary, QueueSection, Report,
};
use crate::CliError;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use twochoice::prelude::*;

/// Everything a run produces, before touching the filesystem.
pub struct ExperimentArtifacts {
    pub report: Report,
    /// File name -> content; `report.json` plus kind-specific CSVs.
    pub files: BTreeMap<String, String>,
    /// Human-readable summary printed after a run.
    pub summary: String,
}

/// Execute an experiment on `threads` worker threads (0 = one per core).
pub fn execute(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentArtifacts, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::runtime(format!("cannot build thread pool: {e}")))?;
    pool.install(|| execute_inner(cfg))
}

fn execute_inner(cfg: &ExperimentConfig) -> Result<ExperimentArtifacts, CliError> {
    let meta = Meta {
        artifact: "twochoice",
        version: env!("CARGO_PKG_VERSION"),
        generator_id: GENERATOR_ID,
        master_seed: cfg.master_seed,
        kind: cfg.kind.tag().to_string(),
        preset: cfg.preset.clone(),
        config: cfg.raw.clone(),
    };
    match cfg.kind {
        Kind::Balls | Kind::Compare => run_balls(cfg, meta),
        Kind::Queue => run_queue(cfg, meta),
        Kind::Fluid => run_fluid(cfg, meta),
        Kind::Coupled => run_coupled_kind(cfg, meta),
        Kind::Ancestry => run_ancestry(cfg, meta),
    }
}

/// Substream seed for one scheme's trials.
fn scheme_seed(master_seed: u64, scheme_idx: usize) -> u64 {
    RandomStream::derive(master_seed, scheme_idx as u64).seed()
}

fn run_scheme_trials(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    scheme_idx: usize,
) -> Result<(Vec<TrialRow>, TrialAggregate), CliError> {
    let chooser = ChooserConfig::new(scheme, cfg.n, cfg.d)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let tie_break = if scheme.is_dleft() {
        TieBreak::Leftmost
    } else {
        cfg.tie_break
    };
    let meta = TrialMeta {
        scheme,
        n: cfg.n,
        m: cfg.m,
        d: cfg.d,
        tie_break,
    };
    let seed = scheme_seed(cfg.master_seed, scheme_idx);
    let policy = PlacementPolicy::new(tie_break);
    let rows: Result<Vec<TrialRow>, twochoice::Error> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = RandomStream::derive(seed, trial);
            let state = run_trial(cfg.n as usize, cfg.m, &chooser, policy, &mut stream)?;
            Ok(TrialRow::from_load_state(trial, stream.seed(), meta, &state))
        })
        .collect();
    let rows = rows.map_err(|e| CliError::runtime(e.to_string()))?;
    let agg = TrialAggregate::aggregate(&rows).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok((rows, agg))
}

fn run_balls(cfg: &ExperimentConfig, meta: Meta) -> Result<ExperimentArtifacts, CliError> {
    let mut report = Report::new(meta);
    let mut files = BTreeMap::new();
    let mut aggregates = Vec::new();
    for (idx, &scheme) in cfg.schemes.iter().enumerate() {
        let (rows, agg) = run_scheme_trials(cfg, scheme, idx)?;
        files.insert(format!("trials_{scheme}.csv"), trials_csv(&rows));
        report.push_aggregate(&agg);
        aggregates.push(agg);
    }

    let fluid = if cfg.include_fluid {
        let t_end = cfg.m as f64 / cfg.n as f64;
        let opts = FluidOptions {
            truncation: cfg.truncation,
            step: cfg.step,
            ..FluidOptions::default()
        };
        let traj = integrate_bins(cfg.d, t_end, &opts)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        let section = FluidSection::from_trajectory(&traj, None);
        files.insert("fluid.csv".to_string(), section.to_csv());
        report.fluid = Some(section);
        Some(traj)
    } else {
        None
    };

    let mut summary = String::new();
    if aggregates.len() == 2 {
        let cmp = compare(&aggregates[0], &aggregates[1], fluid.as_ref())
            .map_err(|e| CliError::runtime(e.to_string()))?;
        summary = crate::report::comparison_text(&cmp, report.fluid.as_ref());
        files.insert("comparison.csv".to_string(), comparison_csv(&cmp));
        report.comparison = Some(cmp);
    } else if let Some(agg) = aggregates.first() {
        summary.push_str(&format!("load {:>12}\n", agg.meta().scheme));
        for stats in agg.load_stats() {
            summary.push_str(&format!("{:>4} {:>12.5}\n", stats.load, stats.mean_fraction));
        }
    }

    files.insert("report.json".to_string(), report.to_json());
    Ok(ExperimentArtifacts {
        report,
        files,
        summary,
    })
}

fn comparison_csv(cmp: &ComparisonReport) -> String {
    let mut out = format!(
        "load,fraction_{},fraction_{},abs_diff\n",
        cmp.scheme_a, cmp.scheme_b
    );
    for line in &cmp.per_load {
        out.push_str(&format!(
            "{},{},{},{}\n",
            line.load, line.fraction_a, line.fraction_b, line.abs_diff
        ));
    }
    out.push_str(&format!(
        "tail_level,tail_{},tail_{},abs_diff,fluid\n",
        cmp.scheme_a, cmp.scheme_b
    ));
    for line in &cmp.tail {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            line.level,
            line.tail_a,
            line.tail_b,
            line.abs_diff,
            line.fluid.map(|x| x.to_string()).unwrap_or_default()
        ));
    }
    out
}

fn run_queue(cfg: &ExperimentConfig, meta: Meta) -> Result<ExperimentArtifacts, CliError> {
    let lambda = cfg.lambda.expect("validated");
    let mut report = Report::new(meta);
    let mut files = BTreeMap::new();
    let mut csv_rows = Vec::new();
    let mut per_scheme = Vec::new();
    let mut summary = format!(
        "queue: lambda = {lambda}, d = {}, n = {}, horizon = {}, burn-in = {}\n",
        cfg.d, cfg.n, cfg.horizon, cfg.burn_in
    );

    for (idx, &scheme) in cfg.schemes.iter().enumerate() {
        let sim_cfg = QueueSimConfig {
            n: cfg.n as usize,
            lambda,
            d: cfg.d,
            scheme,
            horizon: cfg.horizon,
            burn_in: cfg.burn_in,
            tie_break: cfg.tie_break,
        };
        let seed = scheme_seed(cfg.master_seed, idx);
        let results: Result<Vec<(u64, QueueSimResult)>, twochoice::Error> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let mut stream = RandomStream::derive(seed, trial);
                let res = simulate_queues(&sim_cfg, &mut stream)?;
                Ok((stream.seed(), res))
            })
            .collect();
        let results = results.map_err(|e| CliError::runtime(e.to_string()))?;

        let seeds = results.len() as u64;
        let mean_over_seeds =
            results.iter().map(|(_, r)| r.mean_sojourn).sum::<f64>() / seeds as f64;
        let var = if seeds > 1 {
            results
                .iter()
                .map(|(_, r)| (r.mean_sojourn - mean_over_seeds).powi(2))
                .sum::<f64>()
                / (seeds - 1) as f64
        } else {
            0.0
        };
        let jobs: u64 = results.iter().map(|(_, r)| r.jobs_counted).sum();
        let mut tails = vec![0.0; twochoice::queuesim::TAIL_LEVELS];
        for (_, r) in &results {
            for (i, t) in r.tail_fractions.iter().enumerate() {
                tails[i] += t / seeds as f64;
            }
        }
        summary.push_str(&format!(
            "{scheme:>16}: mean sojourn {mean_over_seeds:.5} (std across seeds {:.5}, {seeds} seeds)\n",
            var.sqrt()
        ));
        per_scheme.push(QueueSchemeSummary {
            scheme: scheme.tag().to_string(),
            seeds,
            mean_sojourn: mean_over_seeds,
            sojourn_std_across_seeds: var.sqrt(),
            jobs_counted: jobs,
            tail_fractions: tails,
        });
        for (trial, (seed, res)) in results.iter().enumerate() {
            csv_rows.push((scheme, *seed, sim_cfg, trial as u64, res.clone()));
        }
    }

    let eq = equilibrium_sojourn(cfg.d, lambda, 1e-12)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    summary.push_str(&format!("{:>16}: mean sojourn {eq:.5}\n", "fixed point"));
    report.queue = Some(QueueSection {
        lambda,
        horizon: cfg.horizon,
        burn_in: cfg.burn_in,
        equilibrium_sojourn: eq,
        equilibrium_tails: (1..=4).map(|i| equilibrium_tail(cfg.d, lambda, i)).collect(),
        per_scheme,
    });

    let rows_ref: Vec<(Scheme, u64, &QueueSimConfig, &QueueSimResult)> = csv_rows
        .iter()
        .map(|(s, seed, cfg, _, res)| (*s, *seed, cfg, res))
        .collect();
    files.insert("queue_trials.csv".to_string(), queue_csv(&rows_ref));
    files.insert("report.json".to_string(), report.to_json());
    Ok(ExperimentArtifacts {
        report,
        files,
        summary,
    })
}

fn run_fluid(cfg: &ExperimentConfig, meta: Meta) -> Result<ExperimentArtifacts, CliError> {
    let opts = FluidOptions {
        truncation: cfg.truncation,
        step: cfg.step,
        ..FluidOptions::default()
    };
    let traj = match cfg.lambda {
        Some(lambda) => integrate_queues(cfg.d, lambda, cfg.t_end, &opts, None),
        None => integrate_bins(cfg.d, cfg.t_end, &opts),
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;
    let section = FluidSection::from_trajectory(&traj, cfg.lambda);

    let mut summary = format!("fluid tails at t = {} (d = {}):\n", cfg.t_end, cfg.d);
    for (i, x) in section.tails.iter().enumerate().take(8) {
        summary.push_str(&format!(">={i:>2} {x:>12.5}\n"));
    }

    let mut report = Report::new(meta);
    let mut files = BTreeMap::new();
    files.insert("fluid.csv".to_string(), section.to_csv());
    report.fluid = Some(section);
    files.insert("report.json".to_string(), report.to_json());
    Ok(ExperimentArtifacts {
        report,
        files,
        summary,
    })
}

fn run_coupled_kind(cfg: &ExperimentConfig, meta: Meta) -> Result<ExperimentArtifacts, CliError> {
    let results: Result<Vec<(u64, CoupledRun)>, twochoice::Error> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = RandomStream::derive(cfg.master_seed, trial);
            let run = run_coupled(cfg.n as usize, cfg.m, cfg.d, &mut stream)?;
            Ok((stream.seed(), run))
        })
        .collect();
    let results = results.map_err(|e| CliError::runtime(e.to_string()))?;

    let steps_total: u64 = results.iter().map(|(_, r)| r.verdicts.len() as u64).sum();
    let violations: u64 = results.iter().map(|(_, r)| r.violations).sum();
    let rows: Vec<(u64, u64, u64, u64, Option<u64>)> = results
        .iter()
        .enumerate()
        .map(|(trial, (seed, r))| {
            (
                trial as u64,
                *seed,
                r.verdicts.len() as u64,
                r.violations,
                r.first_violation,
            )
        })
        .collect();

    let summary = format!(
        "coupled runs: n = {}, m = {}, d = {}, {} seeds\nmajorization_violations = {violations} over {steps_total} steps\n",
        cfg.n, cfg.m, cfg.d, cfg.trials
    );
    let mut report = Report::new(meta);
    report.coupled = Some(CoupledSection {
        n: cfg.n,
        m: cfg.m,
        d: cfg.d,
        seeds: cfg.trials,
        steps_total,
        majorization_violations: violations,
    });
    let mut files = BTreeMap::new();
    files.insert("coupled_trials.csv".to_string(), coupled_csv(&rows));
    files.insert("report.json".to_string(), report.to_json());
    Ok(ExperimentArtifacts {
        report,
        files,
        summary,
    })
}

fn run_ancestry(cfg: &ExperimentConfig, meta: Meta) -> Result<ExperimentArtifacts, CliError> {
    let scheme = cfg.ancestry_scheme();
    let tie_break = if scheme.is_dleft() {
        TieBreak::Leftmost
    } else {
        cfg.tie_break
    };
    let policy = PlacementPolicy::new(tie_break);
    let mut rows = Vec::new();
    let mut levels = Vec::new();

    for (level_idx, &n) in cfg.n_list.iter().enumerate() {
        let m = (cfg.t_end * n as f64).round() as u64;
        let chooser = ChooserConfig::new(scheme, n, cfg.d)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        let seed = scheme_seed(cfg.master_seed, level_idx);
        let results: Result<Vec<(u64, u32, f64)>, twochoice::Error> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let mut stream = RandomStream::derive(seed, trial);
                let out =
                    run_trial_with(n as usize, m, &chooser, policy, true, &mut stream)?;
                let sizes = out.ancestry_sizes()?;
                let max = sizes.iter().copied().max().unwrap_or(0);
                let mean = sizes.iter().map(|&s| f64::from(s)).sum::<f64>() / sizes.len() as f64;
                Ok((stream.seed(), max, mean))
            })
            .collect();
        let results = results.map_err(|e| CliError::runtime(e.to_string()))?;

        let mut maxima: Vec<u32> = results.iter().map(|&(_, max, _)| max).collect();
        maxima.sort_unstable();
        let median_max = median_of_sorted(&maxima);
        let mean_size =
            results.iter().map(|&(_, _, mean)| mean).sum::<f64>() / results.len() as f64;
        for (trial, &(seed, max, mean)) in results.iter().enumerate() {
            rows.push((n, seed, trial as u64, max, mean));
        }
        levels.push(AncestryLevelSummary {
            n,
            m,
            seeds: cfg.trials,
            median_max_size: median_max,
            mean_size,
        });
    }

    let (ratio, slope) = ancestry_growth(&levels);
    let mut summary = format!("ancestry sizes ({scheme}, d = {}):\n", cfg.d);
    for level in &levels {
        summary.push_str(&format!(
            "n = {:>8}: median max size {:>8.1}, mean size {:>8.2}\n",
            level.n, level.median_max_size, level.mean_size
        ));
    }
    if let Some(r) = ratio {
        summary.push_str(&format!("max-size ratio (largest/smallest n) = {r:.3}\n"));
    }
    if let Some(s) = slope {
        summary.push_str(&format!("fitted slope of median max size vs ln n = {s:.2}\n"));
    }

    let mut report = Report::new(meta);
    report.ancestry = Some(AncestrySection {
        scheme: scheme.tag().to_string(),
        d: cfg.d,
        levels,
        max_size_ratio: ratio,
        fitted_log_slope: slope,
    });
    let mut files = BTreeMap::new();
    files.insert("ancestry_trials.csv".to_string(), ancestry_csv(&rows));
    files.insert("report.json".to_string(), report.to_json());
    Ok(ExperimentArtifacts {
        report,
        files,
        summary,
    })
}

fn median_of_sorted(sorted: &[u32]) -> f64 {
    let len = sorted.len();
    if len == 0 {
        return f64::NAN;
    }
    if len % 2 == 1 {
        f64::from(sorted[len / 2])
    } else {
        f64::from(sorted[len / 2 - 1] + sorted[len / 2]) / 2.0
    }
}

/// Growth diagnostics: ratio of median max sizes between the extreme bin
/// counts and the least-squares slope against ln n.
fn ancestry_growth(levels: &[AncestryLevelSummary]) -> (Option<f64>, Option<f64>) {
    if levels.len() < 2 {
        return (None, None);
    }
    let first = levels.first().expect("nonempty");
    let last = levels.last().expect("nonempty");
    let ratio = last.median_max_size / first.median_max_size;
    let xs: Vec<f64> = levels.iter().map(|l| (l.n as f64).ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.median_max_size).collect();
    let k = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / k;
    let mean_y = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    (Some(ratio), Some(sxy / sxx))
}

/// Write the artifact files under `dir`, creating it if needed. Returns the
/// paths written, report first.
pub fn write_artifacts(
    artifacts: &ExperimentArtifacts,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create `{}`: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for (name, content) in &artifacts.files {
        let path = dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CliError::runtime(format!("cannot write `{}`: {e}", path.display())))?;
        paths.push(path);
    }
    paths.sort_by_key(|p| p.file_name().map(|n| n != "report.json").unwrap_or(true));
    Ok(paths)
}
