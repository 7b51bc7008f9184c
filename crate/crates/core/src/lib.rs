//! Multiple-choice balanced allocation toolkit.
//!
//! Simulates placing balls into bins where each ball goes to the least
//! loaded of `d` candidate bins, with the candidates produced either by
//! fully random hashing or by an offset/stride (double hashing) rule, plus
//! the d-left and queueing variants. Alongside the simulators it provides
//! the fluid-limit differential equations for both processes and two
//! proof-derived diagnostics: a coupled-run majorization checker and an
//! ancestry-list size tracker.
//!
//! Everything is deterministic given a master seed; see [`rng`] for the
//! substream discipline.

pub mod allocator;
pub mod choosers;
pub mod error;
pub mod fluid;
pub mod queuesim;
pub mod rng;
pub mod stats;
mod util;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::allocator::{
        place_ball, run_coupled, run_trial, run_trial_with, AncestryLog, CoupledRun, LoadState,
        PlacementPolicy, TieBreak, TrialOutput,
    };
    pub use crate::choosers::{
        double_hash_choices, draw_choices, ChoiceSet, ChooserConfig, NClass, Scheme,
    };
    pub use crate::fluid::{
        equilibrium_sojourn, equilibrium_tail, integrate_bins, integrate_queues, FluidOptions,
        FluidTrajectory,
    };
    pub use crate::queuesim::{simulate_queues, QueueSimConfig, QueueSimResult};
    pub use crate::rng::{RandomStream, GENERATOR_ID};
    pub use crate::stats::{compare, ComparisonReport, TrialAggregate, TrialMeta, TrialRow};
}
