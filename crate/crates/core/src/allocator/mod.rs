//! The discrete sequential process: place `m` balls into `n` bins, each in
//! the least loaded of its `d` choices.

mod ancestry;
mod coupling;

pub use ancestry::{AncestryLog, AncestryRecord};
pub use coupling::{run_coupled, CoupledRun};

use crate::choosers::{draw_choices, ChoiceSet, ChooserConfig, Scheme};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Tie-breaking rule among equally loaded choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniform among the distinct least-loaded bins.
    Random,
    /// Earliest choice position wins; mandatory for d-left schemes.
    Leftmost,
}

impl TieBreak {
    pub fn tag(self) -> &'static str {
        match self {
            TieBreak::Random => "random",
            TieBreak::Leftmost => "leftmost",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TieBreak::Random),
            "leftmost" => Ok(TieBreak::Leftmost),
            _ => Err(Error::domain(format!(
                "unknown tie_break `{s}` (expected random or leftmost)"
            ))),
        }
    }

    /// The rule each scheme was analyzed with: leftmost for d-left,
    /// random otherwise.
    pub fn default_for(scheme: Scheme) -> TieBreak {
        if scheme.is_dleft() {
            TieBreak::Leftmost
        } else {
            TieBreak::Random
        }
    }
}

impl std::fmt::Display for TieBreak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Placement policy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementPolicy {
    pub tie_break: TieBreak,
}

impl PlacementPolicy {
    pub fn new(tie_break: TieBreak) -> Self {
        PlacementPolicy { tie_break }
    }
}

/// Per-bin load counts for one trial. Insertions only: `sum(loads)` always
/// equals `balls_placed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadState {
    loads: Vec<u32>,
    balls_placed: u64,
}

impl LoadState {
    pub fn new(n: usize) -> Self {
        LoadState {
            loads: vec![0; n],
            balls_placed: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn balls_placed(&self) -> u64 {
        self.balls_placed
    }

    pub fn max_load(&self) -> u32 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    /// Histogram: `counts[i]` is the number of bins with load exactly `i`,
    /// up to the observed maximum.
    pub fn load_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.max_load() as usize + 1];
        for &l in &self.loads {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Place one ball into the least loaded of its choices and return the bin.
///
/// Under `Leftmost` the earliest choice position among the minima wins;
/// under `Random` a uniform pick among the distinct tied bins wins.
pub fn place_ball(
    state: &mut LoadState,
    choices: &ChoiceSet,
    policy: PlacementPolicy,
    stream: &mut RandomStream,
) -> usize {
    debug_assert!(!choices.bins.is_empty());
    let loads = &state.loads;
    let mut best = choices.bins[0];
    let mut best_load = loads[best as usize];
    let mut tied = false;
    for &b in &choices.bins[1..] {
        let l = loads[b as usize];
        if l < best_load {
            best = b;
            best_load = l;
            tied = false;
        } else if l == best_load && b != best {
            tied = true;
        }
    }
    let winner = if tied && policy.tie_break == TieBreak::Random {
        let mut minima: SmallVec<[u32; 8]> = SmallVec::new();
        for &b in &choices.bins {
            if loads[b as usize] == best_load && !minima.contains(&b) {
                minima.push(b);
            }
        }
        if minima.len() == 1 {
            minima[0]
        } else {
            minima[stream.index_below(minima.len())]
        }
    } else {
        best
    };
    state.loads[winner as usize] += 1;
    state.balls_placed += 1;
    winner as usize
}

/// Run one trial: `m` balls into `n` bins under the configured scheme.
pub fn run_trial(
    n: usize,
    m: u64,
    cfg: &ChooserConfig,
    policy: PlacementPolicy,
    stream: &mut RandomStream,
) -> Result<LoadState> {
    Ok(run_trial_with(n, m, cfg, policy, false, stream)?.state)
}

/// Trial output, optionally carrying the ancestry log.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub state: LoadState,
    pub ancestry: Option<AncestryLog>,
}

impl TrialOutput {
    /// Per-bin ancestry-list sizes (in distinct bins).
    ///
    /// Errors with a state error when the trial ran without tracking.
    pub fn ancestry_sizes(&self) -> Result<Vec<u32>> {
        self.ancestry
            .as_ref()
            .map(AncestryLog::bin_sizes)
            .ok_or_else(|| Error::state("ancestry tracking was not enabled for this trial"))
    }
}

/// Run one trial, recording each ball's choices when `track_ancestry` is set.
pub fn run_trial_with(
    n: usize,
    m: u64,
    cfg: &ChooserConfig,
    policy: PlacementPolicy,
    track_ancestry: bool,
    stream: &mut RandomStream,
) -> Result<TrialOutput> {
    if cfg.n != n as u64 {
        return Err(Error::domain(format!(
            "chooser config is for n = {} but the trial has n = {n}",
            cfg.n
        )));
    }
    if cfg.scheme.is_dleft() && policy.tie_break != TieBreak::Leftmost {
        return Err(Error::domain(
            "d-left schemes require leftmost tie-breaking".to_string(),
        ));
    }
    let mut state = LoadState::new(n);
    let mut log = track_ancestry.then(|| AncestryLog::new(n, m as usize));
    for ball in 0..m {
        let choices = draw_choices(stream, cfg)?;
        if let Some(log) = log.as_mut() {
            log.record(ball, &choices);
        }
        place_ball(&mut state, &choices, policy, stream);
    }
    Ok(TrialOutput {
        state,
        ancestry: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    fn choice_set(bins: &[u32]) -> ChoiceSet {
        ChoiceSet {
            bins: SmallVec::from_slice(bins),
            scheme: Scheme::RandomDistinct,
        }
    }

    #[test]
    fn unique_minimum_wins() {
        let mut state = LoadState::new(3);
        state.loads = vec![2, 0, 1];
        state.balls_placed = 3;
        let mut stream = RandomStream::new(1);
        let bin = place_ball(
            &mut state,
            &choice_set(&[0, 1, 2]),
            PlacementPolicy::new(TieBreak::Random),
            &mut stream,
        );
        assert_eq!(bin, 1);
        assert_eq!(state.loads(), &[2, 1, 1]);
    }

    #[test]
    fn leftmost_breaks_ties_to_the_earliest_choice() {
        let mut state = LoadState::new(4);
        state.loads = vec![1, 1, 0, 0];
        state.balls_placed = 2;
        let mut stream = RandomStream::new(1);
        let bin = place_ball(
            &mut state,
            &choice_set(&[2, 3]),
            PlacementPolicy::new(TieBreak::Leftmost),
            &mut stream,
        );
        assert_eq!(bin, 2);
    }

    #[test]
    fn random_tie_break_is_close_to_fair() {
        // 10,000 two-way ties: each side expected 5,000, sigma = 50.
        let mut stream = RandomStream::new(31337);
        let mut zero_wins = 0u32;
        for _ in 0..10_000 {
            let mut state = LoadState::new(2);
            state.loads = vec![1, 1];
            state.balls_placed = 2;
            if place_ball(
                &mut state,
                &choice_set(&[0, 1]),
                PlacementPolicy::new(TieBreak::Random),
                &mut stream,
            ) == 0
            {
                zero_wins += 1;
            }
        }
        assert!(
            (zero_wins as i64 - 5000).abs() <= 250,
            "bin 0 won {zero_wins} of 10000 ties"
        );
    }

    #[test]
    fn duplicate_choices_do_not_bias_tie_breaks() {
        // With-replacement choices [0, 1, 0] on tied loads: the duplicated
        // bin must not get extra weight.
        let mut stream = RandomStream::new(7);
        let mut zero_wins = 0u32;
        for _ in 0..10_000 {
            let mut state = LoadState::new(2);
            state.loads = vec![3, 3];
            state.balls_placed = 6;
            let choices = ChoiceSet {
                bins: smallvec![0, 1, 0],
                scheme: Scheme::RandomWithReplacement,
            };
            if place_ball(
                &mut state,
                &choices,
                PlacementPolicy::new(TieBreak::Random),
                &mut stream,
            ) == 0
            {
                zero_wins += 1;
            }
        }
        assert!(
            (zero_wins as i64 - 5000).abs() <= 250,
            "duplicated bin won {zero_wins} of 10000 ties"
        );
    }

    #[test]
    fn zero_balls_leaves_empty_bins() {
        let cfg = ChooserConfig::new(Scheme::RandomDistinct, 4, 2).unwrap();
        let mut stream = RandomStream::new(5);
        let state = run_trial(4, 0, &cfg, PlacementPolicy::new(TieBreak::Random), &mut stream)
            .unwrap();
        assert_eq!(state.loads(), &[0, 0, 0, 0]);
        assert_eq!(state.balls_placed(), 0);
    }

    #[test]
    fn forced_placement_single_bin() {
        let cfg = ChooserConfig::new(Scheme::DoubleHash, 1, 1).unwrap();
        let mut stream = RandomStream::new(5);
        let state = run_trial(1, 5, &cfg, PlacementPolicy::new(TieBreak::Random), &mut stream)
            .unwrap();
        assert_eq!(state.loads(), &[5]);
    }

    #[test]
    fn trial_conserves_balls_and_has_monotone_tails() {
        for scheme in Scheme::ALL {
            let cfg = ChooserConfig::new(scheme, 64, 4).unwrap();
            let policy = PlacementPolicy::new(TieBreak::default_for(scheme));
            let mut stream = RandomStream::new(123);
            let state = run_trial(64, 300, &cfg, policy, &mut stream).unwrap();
            assert_eq!(
                state.loads().iter().map(|&l| u64::from(l)).sum::<u64>(),
                300,
                "{scheme}"
            );
            let counts = state.load_counts();
            let mut tail: Vec<u64> = counts.clone();
            for i in (0..tail.len() - 1).rev() {
                tail[i] += tail[i + 1];
            }
            assert!(tail.windows(2).all(|w| w[0] >= w[1]), "{scheme}");
        }
    }

    #[test]
    fn trial_is_deterministic_in_the_seed() {
        let cfg = ChooserConfig::new(Scheme::DoubleHash, 128, 3).unwrap();
        let policy = PlacementPolicy::new(TieBreak::Random);
        let a = run_trial(128, 1000, &cfg, policy, &mut RandomStream::new(9)).unwrap();
        let b = run_trial(128, 1000, &cfg, policy, &mut RandomStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dleft_requires_leftmost() {
        let cfg = ChooserConfig::new(Scheme::DleftRandom, 12, 3).unwrap();
        let mut stream = RandomStream::new(5);
        let res = run_trial(12, 10, &cfg, PlacementPolicy::new(TieBreak::Random), &mut stream);
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn mismatched_n_is_rejected() {
        let cfg = ChooserConfig::new(Scheme::RandomDistinct, 8, 2).unwrap();
        let mut stream = RandomStream::new(5);
        let res = run_trial(16, 10, &cfg, PlacementPolicy::new(TieBreak::Random), &mut stream);
        assert!(res.is_err());
    }

    #[test]
    fn ancestry_sizes_require_tracking() {
        let cfg = ChooserConfig::new(Scheme::RandomDistinct, 8, 2).unwrap();
        let mut stream = RandomStream::new(5);
        let out = run_trial_with(
            8,
            10,
            &cfg,
            PlacementPolicy::new(TieBreak::Random),
            false,
            &mut stream,
        )
        .unwrap();
        assert!(matches!(out.ancestry_sizes(), Err(Error::State(_))));
    }
}
