use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asyncnet::harness::ExperimentConfig;
use asyncnet::moments::{MomentSet, SecondMomentMode};
use asyncnet::network::{BernoulliAsyncModel, Topology};
use asyncnet::sim::sample_fusion_vector;
use asyncnet::theory::{AgentDataProfile, TheoryReport};

fn exact() -> SecondMomentMode {
    SecondMomentMode::Exact { threshold: 20 }
}

/// Connected graph: a random spanning tree plus extra edges.
fn topology_strategy() -> impl Strategy<Value = Topology> {
    (3usize..8)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|k| 0..k).collect();
            (Just(n), parents, prop::collection::vec((0..n, 0..n), 0..n))
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            Topology::from_edges(n, &edges).unwrap()
        })
}

fn model_strategy() -> impl Strategy<Value = BernoulliAsyncModel> {
    (topology_strategy(), any::<u64>()).prop_map(|(topology, seed)| {
        use rand::Rng;
        let n = topology.n_agents();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..=1.0)).collect();
        let etas = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.2..=1.0));
        BernoulliAsyncModel::new(topology, q, vec![0.01; n], |l, k| etas[(l, k)]).unwrap()
    })
}

fn column_sums(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.sum()).collect()
}

fn on_simplex(v: &DVector<f64>, tol: f64) -> bool {
    v.iter().all(|&x| x >= -tol) && (v.sum() - 1.0).abs() < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn realizations_are_left_stochastic_on_the_graph(model in model_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = model.topology();
        for _ in 0..10 {
            let a = model.sample_realization(&mut rng).matrix;
            for s in column_sums(&a) {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
            for l in 0..a.nrows() {
                for k in 0..a.ncols() {
                    prop_assert!(a[(l, k)] >= 0.0);
                    if l != k && !topo.contains(l, k) {
                        prop_assert_eq!(a[(l, k)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn perron_vectors_match_their_matrices(model in model_strategy()) {
        let ms = MomentSet::compute(&model, exact()).unwrap();
        prop_assert!(on_simplex(&ms.p_bar, 1e-12));
        prop_assert!(ms.p_bar.iter().all(|&x| x > 0.0));
        let residual = (&ms.a_bar * &ms.p_bar - &ms.p_bar).amax();
        prop_assert!(residual < 1e-10);
        // 𝟙ᵀ P_p 𝟙 = 1 and P_p is symmetric.
        prop_assert!((ms.p_p.sum() - 1.0).abs() < 1e-9);
        prop_assert!((&ms.p_p - ms.p_p.transpose()).amax() < 1e-12);
        // Row sums of C_p vanish.
        for r in ms.c_p.row_iter() {
            prop_assert!(r.sum().abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_vectors_stay_on_the_simplex(model in model_strategy(), seed in any::<u64>(), t in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = sample_fusion_vector(&model, t, &mut rng);
        prop_assert!(on_simplex(&phi, 1e-12));
    }

    #[test]
    fn msd_is_linear_in_step_size(model in model_strategy(), scale in 0.1f64..4.0) {
        let n = model.n_agents();
        let profiles: Vec<_> = (0..n).map(|k| AgentDataProfile::white(2, 1.0 + 0.1 * k as f64, 0.01)).collect();
        let ms = MomentSet::compute(&model, exact()).unwrap();
        let base = TheoryReport::compute(&model, &ms, &profiles, 0.0).unwrap().msd_linear;
        let scaled_model = model.with_mu(0.01 * scale);
        let scaled = TheoryReport::compute(&scaled_model, &ms, &profiles, 0.0).unwrap().msd_linear;
        for (a, b) in [
            (base.dist_sync, scaled.dist_sync),
            (base.dist_async, scaled.dist_async),
            (base.cent_sync, scaled.cent_sync),
            (base.cent_async, scaled.cent_async),
        ] {
            prop_assert!((b / a - scale).abs() < 1e-9 * scale);
        }
        prop_assert!(base.dist_async >= base.dist_sync * (1.0 - 1e-12));
    }

    #[test]
    fn config_round_trips_through_json(
        n in 3usize..12,
        mu in 1e-4f64..0.05,
        q in 0.05f64..=1.0,
        eta in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        let text = format!(
            r#"{{"topology": {{"kind": "ring", "n": {n}}}, "m": 3, "mu": {mu}, "q": {q}, "eta": {eta}, "seed": {seed}}}"#
        );
        let config = ExperimentConfig::from_json_str(&text).unwrap();
        let again = ExperimentConfig::from_json_str(&config.to_json_string()).unwrap();
        prop_assert_eq!(config.to_json_string(), again.to_json_string());
        let a = config.materialize().unwrap();
        let b = again.materialize().unwrap();
        prop_assert_eq!(a.truth.w_o, b.truth.w_o);
        prop_assert_eq!(a.model.q(), b.model.q());
    }
}
