//! Report assembly: one self-describing JSON report per run plus
//! machine-readable CSV files. Everything is rendered deterministically so
//! the same config and seed produce byte-identical files at any
//! parallelism level.

use serde::Serialize;
use std::collections::BTreeMap;
use twochoice::prelude::*;
use twochoice::stats::LoadStats;

/// Header embedded in every report; enough to re-run the experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub artifact: &'static str,
    pub version: &'static str,
    pub generator_id: &'static str,
    pub master_seed: u64,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// The fully resolved configuration this run used.
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerLoadEntry {
    pub scheme: String,
    #[serde(flatten)]
    pub stats: LoadStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEntry {
    pub scheme: String,
    pub level: u32,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxLoadEntry {
    pub scheme: String,
    pub max_load: u32,
    pub fraction_of_trials: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueueSchemeSummary {
    pub scheme: String,
    pub seeds: u64,
    /// Mean over seeds of the per-run mean sojourn.
    pub mean_sojourn: f64,
    /// Sample standard deviation of the per-run means across seeds.
    pub sojourn_std_across_seeds: f64,
    pub jobs_counted: u64,
    /// Mean over seeds of the time-averaged tail fractions s_1..s_4.
    pub tail_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueueSection {
    pub lambda: f64,
    pub horizon: f64,
    pub burn_in: f64,
    /// Little's-law sojourn at the fluid fixed point.
    pub equilibrium_sojourn: f64,
    /// Fixed-point tails lambda^((d^i - 1)/(d - 1)) for i = 1..=4.
    pub equilibrium_tails: Vec<f64>,
    pub per_scheme: Vec<QueueSchemeSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluidSection {
    pub d: usize,
    pub t_end: f64,
    pub truncation: usize,
    pub step: f64,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Final tail fractions x_0 ..= x_K.
    pub tails: Vec<f64>,
    /// sum_{i >= 1} x_i at the end (mean load per bin).
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledSection {
    pub n: u64,
    pub m: u64,
    pub d: usize,
    pub seeds: u64,
    pub steps_total: u64,
    pub majorization_violations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AncestryLevelSummary {
    pub n: u64,
    pub m: u64,
    pub seeds: u64,
    /// Median over seeds of the per-seed maximum ancestry size.
    pub median_max_size: f64,
    pub mean_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AncestrySection {
    pub scheme: String,
    pub d: usize,
    pub levels: Vec<AncestryLevelSummary>,
    /// median_max_size(largest n) / median_max_size(smallest n).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_size_ratio: Option<f64>,
    /// Least-squares slope of median max size against ln n.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_log_slope: Option<f64>,
}

/// The JSON report written by every run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub meta: Meta,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_load: Vec<PerLoadEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tail: Vec<TailEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub max_load_hist: Vec<MaxLoadEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queue: Option<QueueSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupled: Option<CoupledSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ancestry: Option<AncestrySection>,
}

impl Report {
    pub fn new(meta: Meta) -> Self {
        Report {
            meta,
            per_load: Vec::new(),
            tail: Vec::new(),
            max_load_hist: Vec::new(),
            comparison: None,
            fluid: None,
            queue: None,
            coupled: None,
            ancestry: None,
        }
    }

    /// Append the per-load / tail / max-load sections of one aggregate.
    pub fn push_aggregate(&mut self, agg: &TrialAggregate) {
        let scheme = agg.meta().scheme.tag().to_string();
        for stats in agg.load_stats() {
            self.per_load.push(PerLoadEntry {
                scheme: scheme.clone(),
                stats,
            });
        }
        for (level, fraction) in agg.tail_stats() {
            self.tail.push(TailEntry {
                scheme: scheme.clone(),
                level,
                fraction,
            });
        }
        for (max_load, fraction_of_trials) in agg.max_load_stats() {
            self.max_load_hist.push(MaxLoadEntry {
                scheme: scheme.clone(),
                max_load,
                fraction_of_trials,
            });
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

impl FluidSection {
    pub fn from_trajectory(traj: &FluidTrajectory, lambda: Option<f64>) -> Self {
        FluidSection {
            d: traj.d,
            t_end: traj.t_end(),
            truncation: traj.truncation,
            step: traj.step,
            method: "rk4",
            lambda,
            tails: traj.final_state().to_vec(),
            mass: traj.mass(),
        }
    }

    /// CSV with a `# {json}` metadata header line followed by
    /// `level,tail_fraction` rows.
    pub fn to_csv(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            d: usize,
            t_end: f64,
            truncation: usize,
            step: f64,
            method: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            lambda: Option<f64>,
        }
        let header = serde_json::to_string(&Header {
            d: self.d,
            t_end: self.t_end,
            truncation: self.truncation,
            step: self.step,
            method: self.method,
            lambda: self.lambda,
        })
        .expect("fluid header serializes");
        let mut out = format!("# {header}\nlevel,tail_fraction\n");
        for (i, x) in self.tails.iter().enumerate() {
            out.push_str(&format!("{i},{x}\n"));
        }
        out
    }
}

/// Trial rows as one CSV document.
pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from(TrialRow::csv_header());
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Queue rows as one CSV document.
pub fn queue_csv(rows: &[(Scheme, u64, &QueueSimConfig, &QueueSimResult)]) -> String {
    let mut out = String::from(
        "scheme,n,lambda,d,seed,horizon,burn_in,mean_sojourn,jobs_counted,s1,s2,s3,s4\n",
    );
    for (scheme, seed, cfg, res) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            scheme,
            cfg.n,
            cfg.lambda,
            cfg.d,
            seed,
            cfg.horizon,
            cfg.burn_in,
            res.mean_sojourn,
            res.jobs_counted,
            res.tail_fractions[0],
            res.tail_fractions[1],
            res.tail_fractions[2],
            res.tail_fractions[3],
        ));
    }
    out
}

/// Per-seed coupled-run rows.
pub fn coupled_csv(rows: &[(u64, u64, u64, u64, Option<u64>)]) -> String {
    let mut out = String::from("trial_id,seed,steps,violations,first_violation\n");
    for &(trial, seed, steps, violations, first) in rows {
        out.push_str(&format!(
            "{trial},{seed},{steps},{violations},{}\n",
            first.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}

/// Per-seed ancestry rows.
pub fn ancestry_csv(rows: &[(u64, u64, u64, u32, f64)]) -> String {
    let mut out = String::from("n,seed,trial_id,max_size,mean_size\n");
    for &(n, seed, trial, max, mean) in rows {
        out.push_str(&format!("{n},{seed},{trial},{max},{mean}\n"));
    }
    out
}

/// Human-readable two-scheme table mirroring the paper's layout, fractions
/// at five decimal places.
pub fn comparison_text(cmp: &ComparisonReport, fluid: Option<&FluidSection>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "load {:>12} {:>12} {:>10}\n",
        cmp.scheme_a, cmp.scheme_b, "abs diff"
    ));
    for line in &cmp.per_load {
        out.push_str(&format!(
            "{:>4} {:>12.5} {:>12.5} {:>10.1e}\n",
            line.load, line.fraction_a, line.fraction_b, line.abs_diff
        ));
    }
    out.push('\n');
    match fluid {
        Some(_) => out.push_str(&format!(
            "tail {:>12} {:>12} {:>12} {:>10}\n",
            "fluid", cmp.scheme_a, cmp.scheme_b, "abs diff"
        )),
        None => out.push_str(&format!(
            "tail {:>12} {:>12} {:>10}\n",
            cmp.scheme_a, cmp.scheme_b, "abs diff"
        )),
    }
    for line in &cmp.tail {
        match line.fluid {
            Some(x) => out.push_str(&format!(
                ">={:>2} {:>12.5} {:>12.5} {:>12.5} {:>10.1e}\n",
                line.level, x, line.tail_a, line.tail_b, line.abs_diff
            )),
            None => out.push_str(&format!(
                ">={:>2} {:>12.5} {:>12.5} {:>10.1e}\n",
                line.level, line.tail_a, line.tail_b, line.abs_diff
            )),
        }
    }
    out
}
