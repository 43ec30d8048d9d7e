//! Randomized properties of the metrics, the risk, the optimizer and the
//! scenario file format.

use std::path::Path;

use proptest::prelude::*;
use trajsample::io::{read_scenarios, write_scenarios};
use trajsample::*;

fn coordinate() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn trajectory(horizon: usize) -> impl Strategy<Value = Trajectory> {
    prop::collection::vec([coordinate(), coordinate()], horizon).prop_map(|p| Trajectory::new(p).unwrap())
}

/// A mixture of 1..=3 models with 1..=4 proposals each, plus `count`
/// candidates of the same horizon.
fn mixture_and_candidates(count: usize) -> impl Strategy<Value = (ProposalMixture, CandidateSet)> {
    (1usize..=6).prop_flat_map(move |horizon| {
        let model = prop::collection::vec((0.05..1.0f64, trajectory(horizon)), 1..=4);
        (
            prop::collection::vec(model, 1..=3),
            prop::collection::vec(trajectory(horizon), count),
        )
            .prop_map(|(models, cands)| {
                let models = models
                    .into_iter()
                    .enumerate()
                    .map(|(m, props)| {
                        let props = props
                            .into_iter()
                            .map(|(w, t)| WeightedProposal::new(w, t).unwrap())
                            .collect();
                        ModelPrediction::new(format!("m{m}"), props).unwrap()
                    })
                    .collect();
                (build_mixture(models).unwrap(), CandidateSet::new(cands).unwrap())
            })
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ade_is_a_metric(a in trajectory(5), b in trajectory(5), c in trajectory(5)) {
        prop_assert_eq!(ade(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ade(&a, &b).unwrap(), ade(&b, &a).unwrap());
        prop_assert!(ade(&a, &c).unwrap() <= ade(&a, &b).unwrap() + ade(&b, &c).unwrap() + 1e-9);
        prop_assert!(fde(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn min_ade_k_does_not_increase_with_k(reference in trajectory(4), cands in prop::collection::vec(trajectory(4), 1..6)) {
        let set = CandidateSet::new(cands).unwrap();
        let values: Vec<f64> = (1..=set.len()).map(|k| min_ade_k(&reference, &set, k).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn risk_ignores_the_order_of_the_scored_candidates((mix, set) in mixture_and_candidates(3)) {
        let mut rows = set.trajectories().to_vec();
        rows.reverse();
        let reversed = CandidateSet::new(rows).unwrap();
        for loss in [LossSpec::min_ade(3), LossSpec::min_fde(3)] {
            prop_assert!(close(risk(&mix, &set, loss).unwrap(), risk(&mix, &reversed, loss).unwrap()));
        }
    }

    #[test]
    fn risk_is_translation_invariant((mix, set) in mixture_and_candidates(2), dx in coordinate(), dy in coordinate()) {
        let moved_mix = mix.translated([dx, dy]);
        let moved_set = CandidateSet::new(set.trajectories().iter().map(|t| t.translated([dx, dy])).collect()).unwrap();
        let loss = LossSpec::min_ade(2);
        let (a, b) = (risk(&mix, &set, loss).unwrap(), risk(&moved_mix, &moved_set, loss).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs() + 100.0), "{} vs {}", a, b);
    }

    #[test]
    fn risk_lies_between_best_and_worst_proposal_distance((mix, set) in mixture_and_candidates(1)) {
        let c = &set.trajectories()[0];
        let d: Vec<f64> = (0..mix.len()).map(|i| ade(mix.trajectory(i), c).unwrap()).collect();
        let r = risk(&mix, &set, LossSpec::min_ade(1)).unwrap();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        prop_assert!(lo - 1e-9 <= r && r <= hi + 1e-9);
    }

    #[test]
    fn scaling_a_models_weights_leaves_the_mixture_unchanged((mix, _) in mixture_and_candidates(1), scale in 0.01..100.0f64) {
        let scaled = mix
            .models()
            .iter()
            .map(|m| {
                let props = m
                    .proposals()
                    .iter()
                    .map(|p| WeightedProposal::new(p.weight() * scale, p.trajectory().clone()).unwrap())
                    .collect();
                ModelPrediction::new(m.model_id(), props).unwrap()
            })
            .collect();
        let scaled = build_mixture(scaled).unwrap();
        for (a, b) in mix.effective_weights().iter().zip(scaled.effective_weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((mix.effective_weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn subgradient_is_finite_and_zero_outside_the_prefix((mix, set) in mixture_and_candidates(3)) {
        let g = risk_subgradient(&mix, &set, LossSpec::min_ade(2)).unwrap();
        prop_assert!(g.iter().flatten().flatten().all(|v| v.is_finite()));
        prop_assert!(g[2].iter().all(|p| *p == [0.0, 0.0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizer_never_ends_above_its_start((mix, _) in mixture_and_candidates(1), seed in any::<u64>(), count in 1usize..=3) {
        let count = count.min(mix.len());
        let config = OptimizerConfig { seed, steps: 32, ..Default::default() };
        for loss in [LossSpec::min_ade(count), LossSpec::min_fde(count)] {
            let (set, trace) = optimize(&mix, count, loss, &config).unwrap();
            prop_assert!(trace.final_risk <= trace.initial_risk() + 1e-12);
            prop_assert!(close(trace.final_risk, risk(&mix, &set, loss).unwrap()));
        }
    }

    #[test]
    fn scenario_files_round_trip_exactly((mix, set) in mixture_and_candidates(1), with_truth in any::<bool>()) {
        let truth = with_truth.then(|| set.trajectories()[0].clone());
        let scenario = Scenario::new("s", mix, truth).unwrap();
        let mut buf = Vec::new();
        write_scenarios(&mut buf, std::slice::from_ref(&scenario)).unwrap();
        let back = read_scenarios(buf.as_slice(), Path::new("mem")).unwrap();
        prop_assert_eq!(&back[0], &scenario);
        let mut again = Vec::new();
        write_scenarios(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
    }
}
