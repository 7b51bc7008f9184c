//! Coupled-run harness for the majorization comparison.
//!
//! Process X places each ball in the less loaded of 2 distinct uniform
//! choices. Process Y gets `d` double-hash choices coupled to X's: when X
//! draws the bins at positions `a` and `b` of its sorted load order, Y's
//! choices sit at positions `a, b, 2b - a, 3b - 2a, ...` (mod n) of its own
//! sorted order, i.e. successive positions separated by the gap `b - a`.
//! For prime `n` every nonzero gap is coprime to `n`, so the positions are
//! distinct.
//!
//! Loads are exchangeable across bins, so each process is represented
//! directly by its sorted (non-increasing) load vector; placing into the
//! bin at sorted position `p` increments the leftmost entry equal to the
//! load at `p`, which keeps the vector sorted. After every step the run
//! records whether X's vector still majorizes Y's (equal totals plus
//! prefix-sum dominance).

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::util::is_prime;

/// Outcome of a coupled run.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    /// Majorization verdict after each of the `m` steps.
    pub verdicts: Vec<bool>,
    /// Number of false verdicts.
    pub violations: u64,
    /// First step (0-based) whose verdict was false, if any.
    pub first_violation: Option<u64>,
    /// Final sorted load vector of the 2-choice process.
    pub final_two_choice: Vec<u32>,
    /// Final sorted load vector of the coupled double-hash process.
    pub final_double_hash: Vec<u32>,
}

/// `x` majorizes `y`: equal totals and dominating prefix sums, both vectors
/// sorted non-increasing.
pub fn majorizes(x: &[u32], y: &[u32]) -> bool {
    debug_assert_eq!(x.len(), y.len());
    let mut px = 0u64;
    let mut py = 0u64;
    for (&a, &b) in x.iter().zip(y) {
        px += u64::from(a);
        py += u64::from(b);
        if px < py {
            return false;
        }
    }
    px == py
}

/// Increment the load at sorted position `pos`, preserving non-increasing
/// order by bumping the leftmost entry with the same value.
fn increment_sorted(loads: &mut [u32], pos: usize) {
    let v = loads[pos];
    let first = loads.partition_point(|&x| x > v);
    loads[first] += 1;
}

/// Run the coupled pair for `m` balls over `n` (prime) bins, with Y using
/// `d >= 2` choices, and record a majorization verdict per step.
pub fn run_coupled(n: usize, m: u64, d: usize, stream: &mut RandomStream) -> Result<CoupledRun> {
    if !is_prime(n as u64) {
        return Err(Error::domain(format!(
            "coupled runs need a prime bin count so any position gap is a valid stride (n = {n})"
        )));
    }
    if d < 2 || d > n {
        return Err(Error::domain(format!(
            "coupled runs need 2 <= d <= n (d = {d}, n = {n})"
        )));
    }

    let mut two_choice = vec![0u32; n];
    let mut double_hash = vec![0u32; n];
    let mut verdicts = Vec::with_capacity(m as usize);
    let mut violations = 0u64;
    let mut first_violation = None;

    for step in 0..m {
        let pair = stream.sample_distinct(n as u64, 2)?;
        let (a, b) = (pair[0] as usize, pair[1] as usize);

        // X: the less loaded of positions a and b is the deeper one.
        increment_sorted(&mut two_choice, a.max(b));

        // Y: positions a + k * gap (mod n); the least loaded choice is the
        // deepest position reached.
        let gap = (b + n - a) % n;
        let mut pos = a;
        let mut deepest = a;
        for _ in 1..d {
            pos += gap;
            if pos >= n {
                pos -= n;
            }
            deepest = deepest.max(pos);
        }
        increment_sorted(&mut double_hash, deepest);

        let ok = majorizes(&two_choice, &double_hash);
        if !ok {
            violations += 1;
            first_violation.get_or_insert(step);
        }
        verdicts.push(ok);
    }

    Ok(CoupledRun {
        verdicts,
        violations,
        first_violation,
        final_two_choice: two_choice,
        final_double_hash: double_hash,
    })
}
