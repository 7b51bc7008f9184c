//! Event-driven simulation of the supermarket model: jobs arrive as a
//! Poisson process of rate `lambda * n`, each picks `d` queues under the
//! configured scheme and joins the shortest (ties uniform at random), and
//! every queue serves FIFO with exponential mean-1 service times.
//!
//! Service times are drawn at service start; by memorylessness this is
//! equivalent to drawing at arrival and keeps the bookkeeping to one
//! pending departure per busy queue. The event schedule is ordered by
//! `(time, sequence number)` so simultaneous events (float-possible, if
//! measure zero) resolve deterministically.

use crate::allocator::TieBreak;
use crate::choosers::{draw_choices, ChooserConfig, Scheme};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use serde::Serialize;
use smallvec::SmallVec;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// Number of queue-length tail levels reported (`s_1 ..= s_4`).
pub const TAIL_LEVELS: usize = 4;

/// Configuration of one queueing run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QueueSimConfig {
    pub n: usize,
    /// Arrival intensity per queue, in (0, 1).
    pub lambda: f64,
    pub d: usize,
    pub scheme: Scheme,
    /// Total simulated seconds.
    pub horizon: f64,
    /// Seconds excluded from statistics at the start of the run.
    pub burn_in: f64,
    pub tie_break: TieBreak,
}

impl QueueSimConfig {
    pub fn new(n: usize, lambda: f64, d: usize, scheme: Scheme, horizon: f64, burn_in: f64) -> Self {
        QueueSimConfig {
            n,
            lambda,
            d,
            scheme,
            horizon,
            burn_in,
            tie_break: TieBreak::Random,
        }
    }

    fn validate(&self) -> Result<ChooserConfig> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::domain(format!(
                "arrival intensity must lie in (0, 1) (got {})",
                self.lambda
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain("horizon must be positive and finite"));
        }
        if !(0.0..self.horizon).contains(&self.burn_in) {
            return Err(Error::domain(format!(
                "burn_in must lie in [0, horizon) (burn_in = {}, horizon = {})",
                self.burn_in, self.horizon
            )));
        }
        ChooserConfig::new(self.scheme, self.n as u64, self.d)
    }
}

/// Aggregate results of one run.
#[derive(Debug, Clone, Serialize)]
pub struct QueueSimResult {
    /// Average time in system over jobs that arrived at or after the
    /// burn-in and completed by the horizon.
    pub mean_sojourn: f64,
    /// Number of jobs in that average.
    pub jobs_counted: u64,
    pub arrivals: u64,
    pub departures: u64,
    pub in_system_at_horizon: u64,
    /// Time-averaged fraction of queues with length >= i for
    /// i = 1..=TAIL_LEVELS, measured over [burn_in, horizon].
    pub tail_fractions: [f64; TAIL_LEVELS],
    /// Time-averaged number of jobs in the whole system over each tenth of
    /// the horizon; a stability diagnostic.
    pub jobs_by_decile: [f64; 10],
}

/// Pending departure of the job in service at one queue.
#[derive(Debug, Clone, Copy)]
struct Departure {
    time: f64,
    seq: u64,
    queue: u32,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Departure {}
impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the earliest event.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Time-weighted accumulators over the measurement window.
struct WindowStats {
    burn_in: f64,
    horizon: f64,
    decile_len: f64,
    tail_counts: [u64; TAIL_LEVELS],
    tail_acc: [f64; TAIL_LEVELS],
    jobs_in_system: u64,
    decile_acc: [f64; 10],
}

impl WindowStats {
    fn new(burn_in: f64, horizon: f64) -> Self {
        WindowStats {
            burn_in,
            horizon,
            decile_len: horizon / 10.0,
            tail_counts: [0; TAIL_LEVELS],
            tail_acc: [0.0; TAIL_LEVELS],
            jobs_in_system: 0,
            decile_acc: [0.0; 10],
        }
    }

    /// Advance the accumulators from `from` to `to` with the current counts.
    #[inline]
    fn advance(&mut self, from: f64, to: f64) {
        let lo = from.max(self.burn_in);
        let hi = to.min(self.horizon);
        if hi > lo {
            let dt = hi - lo;
            for i in 0..TAIL_LEVELS {
                self.tail_acc[i] += self.tail_counts[i] as f64 * dt;
            }
        }
        // Deciles cover the whole horizon, not just the window.
        let mut lo = from;
        let hi = to.min(self.horizon);
        while lo < hi {
            let idx = ((lo / self.decile_len) as usize).min(9);
            let edge = ((idx + 1) as f64 * self.decile_len).min(hi);
            self.decile_acc[idx] += self.jobs_in_system as f64 * (edge - lo);
            lo = edge;
        }
    }

    #[inline]
    fn on_length_change(&mut self, old_len: u32, new_len: u32) {
        if new_len > old_len {
            self.jobs_in_system += 1;
            if new_len as usize <= TAIL_LEVELS {
                self.tail_counts[new_len as usize - 1] += 1;
            }
        } else {
            self.jobs_in_system -= 1;
            if old_len as usize <= TAIL_LEVELS {
                self.tail_counts[old_len as usize - 1] -= 1;
            }
        }
    }
}

/// Run the supermarket-model simulation and report sojourn and tail
/// statistics.
pub fn simulate_queues(cfg: &QueueSimConfig, stream: &mut RandomStream) -> Result<QueueSimResult> {
    let chooser_cfg = cfg.validate()?;
    let n = cfg.n;
    let arrival_scale = 1.0 / (cfg.lambda * n as f64);

    let mut lengths = vec![0u32; n];
    let mut waiting: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
    let mut departures_heap: BinaryHeap<Departure> = BinaryHeap::with_capacity(n + 1);
    let mut seq = 0u64;
    let mut stats = WindowStats::new(cfg.burn_in, cfg.horizon);

    let mut clock = 0.0f64;
    let mut next_arrival = stream.exp_unit() * arrival_scale;
    let mut arrivals = 0u64;
    let mut departures = 0u64;
    let mut sojourn_sum = 0.0f64;
    let mut jobs_counted = 0u64;

    loop {
        let next_departure = departures_heap.peek().copied();
        let take_arrival = match next_departure {
            Some(dep) => next_arrival <= dep.time,
            None => true,
        };
        let event_time = if take_arrival {
            next_arrival
        } else {
            next_departure.expect("departure exists").time
        };
        if event_time > cfg.horizon {
            stats.advance(clock, cfg.horizon);
            break;
        }
        stats.advance(clock, event_time);
        clock = event_time;

        if take_arrival {
            arrivals += 1;
            let choices = draw_choices(stream, &chooser_cfg)?;
            let q = select_shortest(&lengths, &choices.bins, cfg.tie_break, stream);
            let old = lengths[q];
            lengths[q] = old + 1;
            stats.on_length_change(old, old + 1);
            waiting[q].push_back(clock);
            if old == 0 {
                // Idle queue: the job enters service immediately.
                seq += 1;
                departures_heap.push(Departure {
                    time: clock + stream.exp_unit(),
                    seq,
                    queue: q as u32,
                });
            }
            next_arrival = clock + stream.exp_unit() * arrival_scale;
        } else {
            let dep = departures_heap.pop().expect("peeked departure");
            departures += 1;
            let q = dep.queue as usize;
            let old = lengths[q];
            lengths[q] = old - 1;
            stats.on_length_change(old, old - 1);
            let arrived = waiting[q].pop_front().expect("departing job was queued");
            if arrived >= cfg.burn_in {
                sojourn_sum += clock - arrived;
                jobs_counted += 1;
            }
            if lengths[q] > 0 {
                seq += 1;
                departures_heap.push(Departure {
                    time: clock + stream.exp_unit(),
                    seq,
                    queue: q as u32,
                });
            }
        }
    }

    let in_system: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
    debug_assert_eq!(arrivals, departures + in_system);

    let window = cfg.horizon - cfg.burn_in;
    let mut tail_fractions = [0.0; TAIL_LEVELS];
    for i in 0..TAIL_LEVELS {
        tail_fractions[i] = stats.tail_acc[i] / (window * n as f64);
    }
    let mut jobs_by_decile = [0.0; 10];
    for i in 0..10 {
        jobs_by_decile[i] = stats.decile_acc[i] / stats.decile_len;
    }

    Ok(QueueSimResult {
        mean_sojourn: if jobs_counted > 0 {
            sojourn_sum / jobs_counted as f64
        } else {
            f64::NAN
        },
        jobs_counted,
        arrivals,
        departures,
        in_system_at_horizon: in_system,
        tail_fractions,
        jobs_by_decile,
    })
}

/// Index of the shortest queue among the choices.
#[inline]
fn select_shortest(
    lengths: &[u32],
    choices: &[u32],
    tie_break: TieBreak,
    stream: &mut RandomStream,
) -> usize {
    let mut best = choices[0];
    let mut best_len = lengths[best as usize];
    let mut tied = false;
    for &q in &choices[1..] {
        let l = lengths[q as usize];
        if l < best_len {
            best = q;
            best_len = l;
            tied = false;
        } else if l == best_len && q != best {
            tied = true;
        }
    }
    if tied && tie_break == TieBreak::Random {
        let mut minima: SmallVec<[u32; 8]> = SmallVec::new();
        for &q in choices {
            if lengths[q as usize] == best_len && !minima.contains(&q) {
                minima.push(q);
            }
        }
        if minima.len() == 1 {
            minima[0] as usize
        } else {
            minima[stream.index_below(minima.len())] as usize
        }
    } else {
        best as usize
    }
}
