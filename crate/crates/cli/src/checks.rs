//! Evaluation of a preset's `expect.*` lines against a finished report,
//! for the `--check` flag.

use crate::config::{Expectation, Quantity};
use crate::report::Report;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn line(&self) -> String {
        match self.actual {
            Some(actual) => format!(
                "{} {:<28} expected {} +- {}, got {}",
                if self.pass { "PASS" } else { "FAIL" },
                self.name,
                self.expected,
                self.tolerance,
                actual
            ),
            None => format!("FAIL {:<28} expected {}, not present in report", self.name, self.expected),
        }
    }
}

fn lookup(report: &Report, exp: &Expectation) -> Option<f64> {
    let scheme = exp.scheme.map(|s| s.tag().to_string());
    // For count-derived quantities, a load level absent from the report is
    // an exact observed zero, as long as the scheme itself was run.
    match exp.quantity {
        Quantity::Fraction => report
            .per_load
            .iter()
            .find(|e| Some(&e.scheme) == scheme.as_ref() && Some(e.stats.load) == exp.index)
            .map(|e| e.stats.mean_fraction)
            .or_else(|| {
                report
                    .per_load
                    .iter()
                    .any(|e| Some(&e.scheme) == scheme.as_ref())
                    .then_some(0.0)
            }),
        Quantity::Tail => report
            .tail
            .iter()
            .find(|e| Some(&e.scheme) == scheme.as_ref() && Some(e.level) == exp.index)
            .map(|e| e.fraction)
            .or_else(|| {
                report
                    .tail
                    .iter()
                    .any(|e| Some(&e.scheme) == scheme.as_ref())
                    .then_some(0.0)
            }),
        Quantity::MaxLoadFraction => report
            .max_load_hist
            .iter()
            .find(|e| Some(&e.scheme) == scheme.as_ref() && Some(e.max_load) == exp.index)
            .map(|e| e.fraction_of_trials)
            .or_else(|| {
                report
                    .max_load_hist
                    .iter()
                    .any(|e| Some(&e.scheme) == scheme.as_ref())
                    .then_some(0.0)
            }),
        Quantity::MeanSojourn => report.queue.as_ref().and_then(|q| {
            q.per_scheme
                .iter()
                .find(|s| Some(&s.scheme) == scheme.as_ref())
                .map(|s| s.mean_sojourn)
        }),
        Quantity::FluidTail => report
            .fluid
            .as_ref()
            .and_then(|f| exp.index.and_then(|i| f.tails.get(i as usize)))
            .copied(),
    }
}

/// Evaluate every expectation; `paper_scale` selects the tighter tolerance.
pub fn evaluate(report: &Report, expectations: &[Expectation], paper_scale: bool) -> Vec<CheckResult> {
    expectations
        .iter()
        .map(|exp| {
            let tolerance = if paper_scale {
                exp.paper_tolerance
            } else {
                exp.desk_tolerance
            };
            let actual = lookup(report, exp);
            let pass = actual
                .map(|a| (a - exp.value).abs() <= tolerance)
                .unwrap_or(false);
            CheckResult {
                name: exp.name(),
                expected: exp.value,
                actual,
                tolerance,
                pass,
            }
        })
        .collect()
}
