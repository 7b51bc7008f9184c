//! Cross-checks between the discrete simulators and the fluid-limit
//! equations: at n = 2^14 the finite-system tail fractions sit within a
//! few parts per thousand of the ODE solution, and the queueing tails sit
//! on the closed-form fixed point.

use twochoice::prelude::*;

#[test]
fn bin_tails_track_the_fluid_limit() {
    // d = 3, n = 2^14, double hashing, 50 trials: empirical tails within
    // 0.005 of x_i(1) for i = 1, 2.
    let n = 1usize << 14;
    let d = 3;
    let trials = 50u64;
    let cfg = ChooserConfig::new(Scheme::DoubleHash, n as u64, d).unwrap();
    let meta = TrialMeta {
        scheme: Scheme::DoubleHash,
        n: n as u64,
        m: n as u64,
        d,
        tie_break: TieBreak::Random,
    };
    let rows: Vec<TrialRow> = (0..trials)
        .map(|i| {
            let mut stream = RandomStream::derive(0xF1D0, i);
            let state = run_trial(
                n,
                n as u64,
                &cfg,
                PlacementPolicy::new(TieBreak::Random),
                &mut stream,
            )
            .unwrap();
            TrialRow::from_load_state(i, stream.seed(), meta, &state)
        })
        .collect();
    let agg = TrialAggregate::aggregate(&rows).unwrap();
    let traj = integrate_bins(d, 1.0, &FluidOptions::default()).unwrap();
    for level in 1..=2u32 {
        let sim = agg.tail_fraction(level);
        let ode = traj.tail(level as usize);
        assert!(
            (sim - ode).abs() < 0.005,
            "tail >= {level}: simulated {sim:.5} vs fluid {ode:.5}"
        );
    }
}

#[test]
fn queue_tails_sit_on_the_equilibrium_fixed_point() {
    // lambda = 0.9, d = 3: time-averaged s_i within 2% of
    // lambda^((d^i - 1)/(d - 1)) for i <= 3. The fixed point is also the
    // long-time limit of the queueing fluid equations.
    let cfg = QueueSimConfig::new(4096, 0.9, 3, Scheme::DoubleHash, 3000.0, 500.0);
    let res = simulate_queues(&cfg, &mut RandomStream::new(0x5EED)).unwrap();
    let traj = integrate_queues(3, 0.9, 400.0, &FluidOptions::default(), None).unwrap();
    for i in 1..=3usize {
        let fixed = equilibrium_tail(3, 0.9, i);
        let sim = res.tail_fractions[i - 1];
        assert!(
            (sim - fixed).abs() / fixed < 0.02,
            "s_{i}: simulated {sim:.5} vs fixed point {fixed:.5}"
        );
        // The integrated trajectory has converged to the same point.
        assert!(
            (traj.tail(i) - fixed).abs() < 1e-6,
            "s_{i}: ODE {:.7} vs fixed point {fixed:.7}",
            traj.tail(i)
        );
    }
}
