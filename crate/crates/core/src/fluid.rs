//! Fluid-limit differential equations for the allocation processes.
//!
//! For the discrete balls-and-bins system, `x_i(t)` is the fraction of bins
//! with load at least `i` after `t * n` balls, and the tail fractions obey
//!
//! ```text
//! dx_i/dt = x_{i-1}^d - x_i^d,     x_0 = 1,  x_i(0) = 0 for i >= 1.
//! ```
//!
//! For the supermarket queueing model, `s_i(t)` is the fraction of queues
//! with at least `i` jobs and
//!
//! ```text
//! ds_i/dt = lambda * (s_{i-1}^d - s_i^d) - (s_i - s_{i+1}),   s_0 = 1,
//! ```
//!
//! whose fixed point is `s_i = lambda^((d^i - 1) / (d - 1))`. Both systems
//! are truncated at level K and integrated with the classical 4th-order
//! Runge-Kutta method.

use crate::error::{Error, Result};
use serde::Serialize;

/// Integration parameters. The defaults resolve the systems used here to
/// well below the reported precision in milliseconds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluidOptions {
    /// Truncation level K: tail levels 0..=K are tracked.
    pub truncation: usize,
    /// Time step of the one-step method.
    pub step: f64,
    /// The final tail fraction at level K must stay below this floor, or
    /// the truncation is declared insufficient.
    pub floor: f64,
}

impl Default for FluidOptions {
    fn default() -> Self {
        FluidOptions {
            truncation: 16,
            step: 1e-3,
            floor: 1e-12,
        }
    }
}

impl FluidOptions {
    pub fn with_truncation(truncation: usize) -> Self {
        FluidOptions {
            truncation,
            ..FluidOptions::default()
        }
    }
}

/// A truncated trajectory of tail fractions `x_0 ..= x_K` on a time grid.
#[derive(Debug, Clone)]
pub struct FluidTrajectory {
    pub d: usize,
    pub truncation: usize,
    pub step: f64,
    pub times: Vec<f64>,
    /// One `K + 1` vector per grid point, `states[j][i]` = x_i(times[j]).
    pub states: Vec<Vec<f64>>,
}

impl FluidTrajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least t = 0")
    }

    /// Tail fractions at the final time.
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least t = 0")
    }

    /// `x_i` at the final time; levels beyond the truncation are 0.
    pub fn tail(&self, i: usize) -> f64 {
        self.final_state().get(i).copied().unwrap_or(0.0)
    }

    /// `sum_{i>=1} x_i` at the final time (the mean load per bin).
    pub fn mass(&self) -> f64 {
        self.final_state().iter().skip(1).sum()
    }
}

/// Derivative of the truncated balls-and-bins system.
fn bins_rhs(state: &[f64], d: i32, out: &mut [f64]) {
    out[0] = 0.0;
    let mut prev_pow = 1.0; // x_0^d
    for i in 1..state.len() {
        let cur_pow = state[i].powi(d);
        out[i] = prev_pow - cur_pow;
        prev_pow = cur_pow;
    }
}

/// Derivative of the truncated supermarket system, with `s_{K+1} = 0`.
fn queue_rhs(state: &[f64], d: i32, lambda: f64, out: &mut [f64]) {
    let k = state.len() - 1;
    out[0] = 0.0;
    let mut prev_pow = 1.0;
    for i in 1..=k {
        let cur_pow = state[i].powi(d);
        let next = if i < k { state[i + 1] } else { 0.0 };
        out[i] = lambda * (prev_pow - cur_pow) - (state[i] - next);
        prev_pow = cur_pow;
    }
}

/// One classical RK4 step of size `h` for `y' = f(y)` (autonomous).
fn rk4_step<F: Fn(&[f64], &mut [f64])>(
    f: &F,
    y: &mut [f64],
    h: f64,
    k1: &mut [f64],
    k2: &mut [f64],
    k3: &mut [f64],
    k4: &mut [f64],
    tmp: &mut [f64],
) {
    f(y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + h * k3[i];
    }
    f(tmp, k4);
    for i in 0..y.len() {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

const MONOTONE_SLACK: f64 = 1e-12;

fn integrate<F: Fn(&[f64], &mut [f64])>(
    f: F,
    d: usize,
    t_end: f64,
    opts: &FluidOptions,
    initial: Vec<f64>,
) -> Result<FluidTrajectory> {
    if t_end <= 0.0 || !t_end.is_finite() {
        return Err(Error::domain(format!("t_end must be positive (got {t_end})")));
    }
    if opts.step <= 0.0 || !opts.step.is_finite() {
        return Err(Error::domain(format!("step must be positive (got {})", opts.step)));
    }
    if opts.truncation == 0 {
        return Err(Error::domain("truncation level must be >= 1"));
    }
    let dim = opts.truncation + 1;
    debug_assert_eq!(initial.len(), dim);

    let steps = (t_end / opts.step).ceil() as usize;
    let mut y = initial;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(y.clone());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for s in 0..steps {
        let t_next = if s + 1 == steps {
            t_end
        } else {
            (s as f64 + 1.0) * opts.step
        };
        let h = t_next - times[s];
        rk4_step(&f, &mut y, h, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp);
        // The tails are monotone by construction; anything beyond rounding
        // noise means the integration went wrong.
        for i in 1..dim {
            if y[i] > y[i - 1] + MONOTONE_SLACK {
                return Err(Error::state(format!(
                    "monotone tail violation at t = {t_next}: x_{i} = {} > x_{} = {}",
                    y[i],
                    i - 1,
                    y[i - 1]
                )));
            }
            y[i] = y[i].clamp(0.0, 1.0);
        }
        times.push(t_next);
        states.push(y.clone());
    }

    let last = states.last().expect("at least the initial state");
    let tail_k = last[opts.truncation];
    if tail_k > opts.floor {
        return Err(Error::Truncation {
            level: opts.truncation,
            t_end,
            value: tail_k,
            floor: opts.floor,
        });
    }

    Ok(FluidTrajectory {
        d,
        truncation: opts.truncation,
        step: opts.step,
        times,
        states,
    })
}

/// Integrate the balls-and-bins tail fractions from the empty state to
/// `t_end` (i.e. `t_end * n` balls).
pub fn integrate_bins(d: usize, t_end: f64, opts: &FluidOptions) -> Result<FluidTrajectory> {
    if d < 1 {
        return Err(Error::domain("number of choices d must be >= 1"));
    }
    let mut initial = vec![0.0; opts.truncation + 1];
    initial[0] = 1.0;
    integrate(
        move |y, out| bins_rhs(y, d as i32, out),
        d,
        t_end,
        opts,
        initial,
    )
}

/// Integrate the supermarket-model tail fractions to `t_end`.
///
/// `initial` gives `s_1 ..= s_K` at time 0 (defaults to the empty system);
/// `s_0` is pinned to 1.
pub fn integrate_queues(
    d: usize,
    lambda: f64,
    t_end: f64,
    opts: &FluidOptions,
    initial: Option<&[f64]>,
) -> Result<FluidTrajectory> {
    if d < 1 {
        return Err(Error::domain("number of choices d must be >= 1"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!(
            "arrival intensity must lie in (0, 1) (got {lambda})"
        )));
    }
    let mut init = vec![0.0; opts.truncation + 1];
    init[0] = 1.0;
    if let Some(given) = initial {
        if given.len() > opts.truncation {
            return Err(Error::domain(format!(
                "initial condition has {} levels but truncation is {}",
                given.len(),
                opts.truncation
            )));
        }
        init[1..=given.len()].copy_from_slice(given);
    }
    integrate(
        move |y, out| queue_rhs(y, d as i32, lambda, out),
        d,
        t_end,
        opts,
        init,
    )
}

/// Equilibrium tail fraction `lambda^((d^i - 1) / (d - 1))` of the
/// supermarket model.
pub fn equilibrium_tail(d: usize, lambda: f64, i: usize) -> f64 {
    let exponent = (f64::powi(d as f64, i as i32) - 1.0) / (d as f64 - 1.0);
    lambda.powf(exponent)
}

/// Expected time in system at equilibrium, by Little's law applied to the
/// fixed point: `(sum_{i>=1} lambda^((d^i - 1)/(d - 1))) / lambda`, summed
/// until terms drop below `tolerance`.
pub fn equilibrium_sojourn(d: usize, lambda: f64, tolerance: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("equilibrium_sojourn needs d >= 2"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!(
            "arrival intensity must lie in (0, 1) (got {lambda})"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let mut sum = 0.0;
    let mut exponent = 1.0; // (d^i - 1) / (d - 1) at i = 1
    loop {
        let term = lambda.powf(exponent);
        if term < tolerance {
            break;
        }
        sum += term;
        exponent = exponent * d as f64 + 1.0;
    }
    Ok(sum / lambda)
}
