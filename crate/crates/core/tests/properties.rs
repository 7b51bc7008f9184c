//! Property tests for the core invariants.

use proptest::prelude::*;
use std::collections::BTreeSet;
use twochoice::prelude::*;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Literal evaluation of the ancestry definition as the least fixpoint of
/// "from (bin, t), every ball with time <= t choosing bin leads to its
/// other bins at the ball's time". Independent of the production
/// prefix-expansion traversal.
fn brute_ancestry_bins(records: &[(u64, Vec<u32>)], bin: u32, time_limit: u64) -> BTreeSet<u32> {
    let mut seen_states: BTreeSet<(u32, u64)> = BTreeSet::new();
    let mut bins = BTreeSet::new();
    let mut work = vec![(bin, time_limit)];
    while let Some((b, t)) = work.pop() {
        if !seen_states.insert((b, t)) {
            continue;
        }
        bins.insert(b);
        for &(time, ref choices) in records {
            if time > t || !choices.contains(&b) {
                continue;
            }
            for &other in choices {
                if other != b {
                    work.push((other, time));
                }
            }
        }
    }
    bins
}

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::RandomDistinct),
        Just(Scheme::DoubleHash),
        Just(Scheme::RandomWithReplacement),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ancestry_sizes_match_brute_force(
        seed in 0u64..1_000_000,
        n in 4usize..16,
        m in 0u64..24,
        d in 2usize..4,
        scheme in scheme_strategy(),
    ) {
        prop_assume!(d <= n);
        let cfg = ChooserConfig::new(scheme, n as u64, d).unwrap();
        let mut stream = RandomStream::new(seed);
        let out = run_trial_with(n, m, &cfg, PlacementPolicy::new(TieBreak::Random), true, &mut stream).unwrap();
        let sizes = out.ancestry_sizes().unwrap();

        let records: Vec<(u64, Vec<u32>)> = out
            .ancestry
            .as_ref()
            .unwrap()
            .records()
            .iter()
            .map(|r| (r.time_index, r.choices.bins.to_vec()))
            .collect();
        let end = m.max(1); // any time at or after the last ball
        for b in 0..n as u32 {
            let expected = brute_ancestry_bins(&records, b, end).len() as u32;
            prop_assert_eq!(sizes[b as usize], expected, "bin {}", b);
        }
    }

    #[test]
    fn trials_conserve_balls_with_monotone_tails(
        seed in 0u64..1_000_000,
        n in 1usize..128,
        m in 0u64..512,
        d in 1usize..5,
        scheme in scheme_strategy(),
    ) {
        prop_assume!(d <= n || !scheme.yields_distinct());
        let cfg = ChooserConfig::new(scheme, n as u64, d).unwrap();
        let mut stream = RandomStream::new(seed);
        let state = run_trial(n, m, &cfg, PlacementPolicy::new(TieBreak::Random), &mut stream).unwrap();
        prop_assert_eq!(state.loads().iter().map(|&l| u64::from(l)).sum::<u64>(), m);
        let counts = state.load_counts();
        // Tail counts (bins with load >= i) are non-increasing in i.
        let mut tail = counts.clone();
        for i in (0..tail.len().saturating_sub(1)).rev() {
            tail[i] += tail[i + 1];
        }
        prop_assert!(tail.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(tail[0], n as u64);
    }

    #[test]
    fn double_hash_probes_are_distinct_whenever_stride_is_coprime(
        offset in 0u64..64,
        stride in 1u64..64,
        n in 2u64..64,
        d in 1usize..8,
    ) {
        prop_assume!(offset < n && stride < n && d as u64 <= n);
        prop_assume!(gcd(stride, n) == 1);
        let c = double_hash_choices(offset, stride, d, n).unwrap();
        let set: BTreeSet<u32> = c.bins.iter().copied().collect();
        prop_assert_eq!(set.len(), d);
        prop_assert!(c.bins.iter().all(|&b| u64::from(b) < n));
    }

    #[test]
    fn aggregate_merge_matches_one_shot(
        seed in 0u64..1_000_000,
        trials in 2u64..24,
        split in 1u64..23,
        n in 4u64..32,
    ) {
        prop_assume!(split < trials);
        let meta = TrialMeta {
            scheme: Scheme::DoubleHash,
            n,
            m: n,
            d: 2,
            tie_break: TieBreak::Random,
        };
        let cfg = ChooserConfig::new(meta.scheme, n, meta.d).unwrap();
        let rows: Vec<TrialRow> = (0..trials)
            .map(|i| {
                let mut stream = RandomStream::derive(seed, i);
                let state = run_trial(
                    n as usize,
                    n,
                    &cfg,
                    PlacementPolicy::new(TieBreak::Random),
                    &mut stream,
                )
                .unwrap();
                TrialRow::from_load_state(i, stream.seed(), meta, &state)
            })
            .collect();
        let whole = TrialAggregate::aggregate(&rows).unwrap();
        let mut merged = TrialAggregate::aggregate(&rows[..split as usize]).unwrap();
        merged.merge(&TrialAggregate::aggregate(&rows[split as usize..]).unwrap()).unwrap();
        prop_assert_eq!(whole.trials(), merged.trials());
        for load in 0..=whole.max_observed_load() {
            prop_assert_eq!(whole.mean_count(load).to_bits(), merged.mean_count(load).to_bits());
            prop_assert_eq!(whole.std(load).to_bits(), merged.std(load).to_bits());
            prop_assert_eq!(whole.tail_fraction(load).to_bits(), merged.tail_fraction(load).to_bits());
        }
    }

    #[test]
    fn coupled_runs_never_violate_majorization(
        seed in 0u64..1_000_000,
        n in prop_oneof![Just(5usize), Just(7), Just(13), Just(31), Just(101)],
        d in 3usize..5,
        m in 1u64..200,
    ) {
        let run = run_coupled(n, m, d, &mut RandomStream::new(seed)).unwrap();
        prop_assert_eq!(run.violations, 0);
        prop_assert_eq!(run.first_violation, None);
    }
}
