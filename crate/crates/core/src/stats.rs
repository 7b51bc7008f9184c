//! Aggregation of raw trial outputs into the reported quantities:
//! per-load count statistics, load and tail fractions, and the max-load
//! distribution across trials.
//!
//! Aggregates keep exact integer sums internally, so merging partial
//! aggregates is associative and order-independent; means, standard
//! deviations and fractions are derived on demand. The standard deviation
//! uses the sample (trials - 1) divisor.

use crate::allocator::{LoadState, TieBreak};
use crate::choosers::Scheme;
use crate::error::{Error, Result};
use crate::fluid::FluidTrajectory;
use serde::Serialize;
use std::collections::BTreeMap;

/// Shared parameters of the trials feeding one aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialMeta {
    pub scheme: Scheme,
    pub n: u64,
    pub m: u64,
    pub d: usize,
    pub tie_break: TieBreak,
}

/// One trial's summary: the histogram of bin loads.
#[derive(Debug, Clone)]
pub struct TrialRow {
    pub trial_id: u64,
    pub seed: u64,
    pub meta: TrialMeta,
    /// `counts[i]` = number of bins with load exactly `i`, through the
    /// observed maximum.
    pub counts: Vec<u64>,
}

impl TrialRow {
    pub fn from_load_state(trial_id: u64, seed: u64, meta: TrialMeta, state: &LoadState) -> Self {
        debug_assert_eq!(state.n() as u64, meta.n);
        debug_assert_eq!(state.balls_placed(), meta.m);
        TrialRow {
            trial_id,
            seed,
            meta,
            counts: state.load_counts(),
        }
    }

    pub fn max_load(&self) -> u32 {
        self.counts.len() as u32 - 1
    }

    /// CSV header for trial rows (loads are ragged to the observed max).
    pub fn csv_header() -> &'static str {
        "trial_id,scheme,n,m,d,tie_break,seed,max_load,counts..."
    }

    pub fn to_csv(&self) -> String {
        let mut line = format!(
            "{},{},{},{},{},{},{},{}",
            self.trial_id,
            self.meta.scheme,
            self.meta.n,
            self.meta.m,
            self.meta.d,
            self.meta.tie_break,
            self.seed,
            self.max_load()
        );
        for c in &self.counts {
            line.push(',');
            line.push_str(&c.to_string());
        }
        line
    }
}

/// Exact per-load accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct LoadAccum {
    sum: u64,
    sum_sq: u64,
    max: u64,
    min_seen: u64,
    /// Trials in which this load appeared with a nonzero count entry.
    seen: u64,
}

/// Cross-trial aggregate for one configuration.
#[derive(Debug, Clone)]
pub struct TrialAggregate {
    meta: TrialMeta,
    trials: u64,
    per_load: BTreeMap<u32, LoadAccum>,
    max_load_hist: BTreeMap<u32, u64>,
}

/// Finalized per-load statistics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LoadStats {
    pub load: u32,
    pub min: u64,
    pub mean: f64,
    pub max: u64,
    pub std: f64,
    pub mean_fraction: f64,
}

impl TrialAggregate {
    /// Aggregate trial rows; all rows must share (scheme, n, m, d,
    /// tie_break) and the result is independent of row order.
    pub fn aggregate(rows: &[TrialRow]) -> Result<TrialAggregate> {
        let first = rows
            .first()
            .ok_or_else(|| Error::domain("cannot aggregate an empty set of trials"))?;
        let mut agg = TrialAggregate {
            meta: first.meta,
            trials: 0,
            per_load: BTreeMap::new(),
            max_load_hist: BTreeMap::new(),
        };
        for row in rows {
            agg.push(row)?;
        }
        Ok(agg)
    }

    fn push(&mut self, row: &TrialRow) -> Result<()> {
        if row.meta != self.meta {
            return Err(Error::domain(format!(
                "mixed trial configurations: expected {:?}, got {:?}",
                self.meta, row.meta
            )));
        }
        self.trials += 1;
        for (load, &count) in row.counts.iter().enumerate() {
            let acc = self.per_load.entry(load as u32).or_default();
            acc.sum += count;
            acc.sum_sq += count * count;
            acc.max = acc.max.max(count);
            acc.min_seen = if acc.seen == 0 { count } else { acc.min_seen.min(count) };
            acc.seen += 1;
        }
        *self.max_load_hist.entry(row.max_load()).or_insert(0) += 1;
        Ok(())
    }

    /// Merge another aggregate into this one; exact for counts because the
    /// internal state is integer sums.
    pub fn merge(&mut self, other: &TrialAggregate) -> Result<()> {
        if other.meta != self.meta {
            return Err(Error::domain("cannot merge aggregates of different configurations"));
        }
        self.trials += other.trials;
        for (&load, acc) in &other.per_load {
            let mine = self.per_load.entry(load).or_default();
            mine.sum += acc.sum;
            mine.sum_sq += acc.sum_sq;
            mine.max = mine.max.max(acc.max);
            mine.min_seen = if mine.seen == 0 {
                acc.min_seen
            } else if acc.seen == 0 {
                mine.min_seen
            } else {
                mine.min_seen.min(acc.min_seen)
            };
            mine.seen += acc.seen;
        }
        for (&ml, &count) in &other.max_load_hist {
            *self.max_load_hist.entry(ml).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn meta(&self) -> TrialMeta {
        self.meta
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn max_observed_load(&self) -> u32 {
        self.per_load.keys().next_back().copied().unwrap_or(0)
    }

    /// Mean count of bins with load exactly `load`. Trials that never
    /// reached the load contribute zero counts.
    pub fn mean_count(&self, load: u32) -> f64 {
        match self.per_load.get(&load) {
            Some(acc) => acc.sum as f64 / self.trials as f64,
            None => 0.0,
        }
    }

    /// Mean fraction of bins with load exactly `load`.
    pub fn fraction(&self, load: u32) -> f64 {
        self.mean_count(load) / self.meta.n as f64
    }

    /// Mean fraction of bins with load at least `i`.
    pub fn tail_fraction(&self, i: u32) -> f64 {
        self.per_load
            .range(i..)
            .map(|(_, acc)| acc.sum as f64)
            .sum::<f64>()
            / (self.trials as f64 * self.meta.n as f64)
    }

    /// Sample standard deviation of the count at `load` across trials.
    pub fn std(&self, load: u32) -> f64 {
        if self.trials < 2 {
            return 0.0;
        }
        let acc = match self.per_load.get(&load) {
            Some(acc) => acc,
            None => return 0.0,
        };
        let t = self.trials as f64;
        let mean = acc.sum as f64 / t;
        // Zero-count trials contribute 0 to the raw sum of squares.
        let var = (acc.sum_sq as f64 - t * mean * mean) / (t - 1.0);
        var.max(0.0).sqrt()
    }

    /// Fraction of trials whose maximum load equals `value`.
    pub fn max_load_fraction(&self, value: u32) -> f64 {
        self.max_load_hist
            .get(&value)
            .map(|&c| c as f64 / self.trials as f64)
            .unwrap_or(0.0)
    }

    /// Finalized per-load stats for every observed load.
    pub fn load_stats(&self) -> Vec<LoadStats> {
        self.per_load
            .iter()
            .map(|(&load, acc)| LoadStats {
                load,
                min: if acc.seen < self.trials { 0 } else { acc.min_seen },
                mean: acc.sum as f64 / self.trials as f64,
                max: acc.max,
                std: self.std(load),
                mean_fraction: self.fraction(load),
            })
            .collect()
    }

    /// Tail fractions for i = 0 ..= max observed load.
    pub fn tail_stats(&self) -> Vec<(u32, f64)> {
        (0..=self.max_observed_load())
            .map(|i| (i, self.tail_fraction(i)))
            .collect()
    }

    /// Max-load histogram as (value, fraction of trials).
    pub fn max_load_stats(&self) -> Vec<(u32, f64)> {
        self.max_load_hist
            .iter()
            .map(|(&v, &c)| (v, c as f64 / self.trials as f64))
            .collect()
    }
}

/// Per-load comparison line between two aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct LoadComparison {
    pub load: u32,
    pub fraction_a: f64,
    pub fraction_b: f64,
    pub abs_diff: f64,
}

/// Per-tail comparison line, optionally against a fluid reference.
#[derive(Debug, Clone, Serialize)]
pub struct TailComparison {
    pub level: u32,
    pub tail_a: f64,
    pub tail_b: f64,
    pub abs_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid_diff_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid_diff_b: Option<f64>,
}

/// Comparison of two aggregates sharing (n, m, d).
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scheme_a: Scheme,
    pub scheme_b: Scheme,
    pub per_load: Vec<LoadComparison>,
    pub tail: Vec<TailComparison>,
    pub max_fraction_diff: f64,
    pub max_tail_diff: f64,
}

/// Compare two aggregates per load and per tail level, optionally against
/// the final state of a fluid trajectory.
pub fn compare(
    a: &TrialAggregate,
    b: &TrialAggregate,
    reference: Option<&FluidTrajectory>,
) -> Result<ComparisonReport> {
    let (ma, mb) = (a.meta(), b.meta());
    if (ma.n, ma.m, ma.d) != (mb.n, mb.m, mb.d) {
        return Err(Error::domain(format!(
            "aggregates have mismatched shapes: (n, m, d) = ({}, {}, {}) vs ({}, {}, {})",
            ma.n, ma.m, ma.d, mb.n, mb.m, mb.d
        )));
    }
    if let Some(traj) = reference {
        if traj.d != ma.d {
            return Err(Error::domain(format!(
                "fluid reference is for d = {} but the aggregates have d = {}",
                traj.d, ma.d
            )));
        }
    }
    let top = a.max_observed_load().max(b.max_observed_load());
    let mut per_load = Vec::with_capacity(top as usize + 1);
    let mut max_fraction_diff = 0.0f64;
    for load in 0..=top {
        let fa = a.fraction(load);
        let fb = b.fraction(load);
        let diff = (fa - fb).abs();
        max_fraction_diff = max_fraction_diff.max(diff);
        per_load.push(LoadComparison {
            load,
            fraction_a: fa,
            fraction_b: fb,
            abs_diff: diff,
        });
    }
    let mut tail = Vec::with_capacity(top as usize + 1);
    let mut max_tail_diff = 0.0f64;
    for level in 0..=top {
        let ta = a.tail_fraction(level);
        let tb = b.tail_fraction(level);
        let diff = (ta - tb).abs();
        max_tail_diff = max_tail_diff.max(diff);
        let fluid = reference.map(|traj| traj.tail(level as usize));
        tail.push(TailComparison {
            level,
            tail_a: ta,
            tail_b: tb,
            abs_diff: diff,
            fluid,
            fluid_diff_a: fluid.map(|x| (ta - x).abs()),
            fluid_diff_b: fluid.map(|x| (tb - x).abs()),
        });
    }
    Ok(ComparisonReport {
        scheme_a: ma.scheme,
        scheme_b: mb.scheme,
        per_load,
        tail,
        max_fraction_diff,
        max_tail_diff,
    })
}
