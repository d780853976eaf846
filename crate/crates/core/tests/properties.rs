use plrank::data::{parse_xmlc_reader, write_xmlc, Dataset, SparseSample};
use plrank::losses::{pl_lb_loss, pl_partition_loss};
use plrank::metrics::{ndcg_at_k, precision_at_k, ps_precision_at_k, PropensityWeights};
use plrank::numeric::logsumexp;
use plrank::pl::{
    item_ids, log_likelihood_exact, log_prob_full_ranking, rng_from_seed, sample_pl, FullRanking,
    PartitionedPreference,
};
use plrank::verify::{random_instance, InstanceSpec};
use plrank::{IntegrationConfig, Integrator};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (PartitionedPreference, Vec<f64>)> {
    any::<u64>().prop_map(|seed| random_instance(&mut rng_from_seed(seed), &InstanceSpec::default()))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    /// Shifts keep the logits inside the clipping band.
    #[test]
    fn likelihood_is_shift_invariant((pref, w) in instance(), c in -6.0f64..6.0) {
        let integ = Integrator::new(IntegrationConfig::default().with_intervals(2000)).unwrap();
        let shifted: Vec<f64> = w.iter().map(|x| x + c).collect();
        let a = log_likelihood_exact(&pref, &w).unwrap();
        let b = log_likelihood_exact(&pref, &shifted).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        let qa = integ.log_likelihood(&pref, &w).unwrap();
        let qb = integ.log_likelihood(&pref, &shifted).unwrap();
        prop_assert!((qa - qb).abs() < 1e-9);
    }

    #[test]
    fn gradient_sums_to_zero_and_bound_holds((pref, w) in instance()) {
        let integ = Integrator::new(IntegrationConfig::default().with_intervals(1000)).unwrap();
        let full = pl_partition_loss(&pref, &w, &integ).unwrap();
        let lb = pl_lb_loss(&pref, &w).unwrap();
        prop_assert!(full.grad.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(lb.grad.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(lb.value >= full.value - 1e-4);
    }

    #[test]
    fn full_ranking_probabilities_sum_to_one(w in prop::collection::vec(-4.0f64..4.0, 1..=6)) {
        let logs: Vec<f64> = permutations(w.len())
            .into_iter()
            .map(|p| log_prob_full_ranking(&FullRanking::new(item_ids(p)).unwrap(), &w).unwrap())
            .collect();
        prop_assert!((logsumexp(&logs)).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_monotone_rescaling(
        scores in prop::collection::vec(-5.0f64..5.0, 12),
        relevant in prop::collection::btree_set(0u32..12, 1..5),
        k in 1usize..12,
    ) {
        let relevant: Vec<u32> = relevant.into_iter().collect();
        let moved: Vec<f64> = scores.iter().map(|s| (0.5 * s).exp() * 3.0 - 1.0).collect();
        prop_assert_eq!(precision_at_k(&scores, &relevant, k), precision_at_k(&moved, &relevant, k));
        prop_assert_eq!(ndcg_at_k(&scores, &relevant, k), ndcg_at_k(&moved, &relevant, k));
        let unit = PropensityWeights::uniform(12);
        prop_assert_eq!(ps_precision_at_k(&scores, &relevant, k, &unit).0, precision_at_k(&scores, &relevant, k));
        let hits = precision_at_k(&scores, &relevant, k) * k as f64;
        if (hits - relevant.len() as f64).abs() < 1e-9 {
            prop_assert!(precision_at_k(&scores, &relevant, k + 1) <= precision_at_k(&scores, &relevant, k));
        }
    }

    #[test]
    fn parser_round_trip_is_exact(ds in dataset()) {
        let mut buf = Vec::new();
        write_xmlc(&ds, &mut buf).unwrap();
        let back = parse_xmlc_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &ds);
        let mut again = Vec::new();
        write_xmlc(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..30, 1usize..30).prop_flat_map(|(d, n)| {
        let sample = (
            prop::collection::btree_map(0..d as u32, -1e6f64..1e6, 0..6),
            prop::collection::btree_set(0..n as u32, 0..4),
        )
            .prop_map(|(f, l)| SparseSample {
                features: f.into_iter().collect(),
                labels: l.into_iter().collect(),
            });
        prop::collection::vec(sample, 0..12)
            .prop_map(move |samples| Dataset::new(samples, d, n).unwrap())
    })
}

#[test]
fn sampled_winners_follow_the_softmax() {
    let w = [1.0, 0.0, -0.5, 0.3];
    let z: f64 = w.iter().map(|x: &f64| x.exp()).sum();
    let mut rng = rng_from_seed(42);
    let draws = 40_000;
    let mut first = [0usize; 4];
    for _ in 0..draws {
        first[sample_pl(&w, &mut rng).order()[0].index()] += 1;
    }
    for i in 0..4 {
        let p = w[i].exp() / z;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = first[i] as f64 / draws as f64;
        assert!((freq - p).abs() < 5.0 * sd, "item {i}: {freq} vs {p}");
    }
}

#[test]
fn monte_carlo_agrees_with_the_exact_likelihood() {
    let w = [0.8, -0.2, 0.4, 0.0, -1.0];
    let pref = PartitionedPreference::new(
        5,
        vec![item_ids([0, 2]), item_ids([3]), item_ids([1, 4])],
    )
    .unwrap();
    let exact = log_likelihood_exact(&pref, &w).unwrap().exp();
    let block = pref.block_of_items();
    let mut rng = rng_from_seed(7);
    let draws = 40_000;
    let hits = (0..draws)
        .filter(|_| {
            let r = sample_pl(&w, &mut rng);
            r.order().windows(2).all(|p| block[p[0].index()] <= block[p[1].index()])
        })
        .count();
    let freq = hits as f64 / draws as f64;
    let sd = (exact * (1.0 - exact) / draws as f64).sqrt();
    assert!((freq - exact).abs() < 5.0 * sd, "{freq} vs {exact}");
}
