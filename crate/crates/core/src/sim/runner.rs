use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::curves::{average_curves, LearningCurve};
use super::data::{IterationData, ScenarioTruth};
use super::strategy::{StrategyKind, StrategyState};
use super::DIVERGENCE_LIMIT;
use crate::error::{Error, Result};
use crate::moments::{mean_matrix, perron, PERRON_MAX_ITER, PERRON_TOL};
use crate::network::BernoulliAsyncModel;
use crate::rng::{Purpose, TrialSeed};

/// Everything a trial needs: the asynchronous model, the data model and the
/// Perron vector `p̄` of `Ā` used by the synchronous centralized strategy.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: BernoulliAsyncModel,
    pub truth: ScenarioTruth,
    pub p_bar: DVector<f64>,
}

impl Scenario {
    pub fn new(model: BernoulliAsyncModel, truth: ScenarioTruth) -> Result<Self> {
        let p_bar = perron(&mean_matrix(&model), PERRON_TOL, PERRON_MAX_ITER)?.vector;
        Self::with_p_bar(model, truth, p_bar)
    }

    pub fn with_p_bar(model: BernoulliAsyncModel, truth: ScenarioTruth, p_bar: DVector<f64>) -> Result<Self> {
        if truth.n_agents() != model.n_agents() || p_bar.len() != model.n_agents() {
            return Err(Error::validation(
                "profiles",
                format!(
                    "{} data profiles and {} Perron entries for {} agents",
                    truth.n_agents(),
                    p_bar.len(),
                    model.n_agents()
                ),
            ));
        }
        Ok(Self { model, truth, p_bar })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialWeights {
    #[default]
    Zero,
    Truth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSettings {
    pub n_iters: usize,
    /// Products per fusion vector.
    pub fusion_t: usize,
    /// Reuse a per-trial pool of this many fusion vectors instead of drawing
    /// a fresh one every iteration.
    pub fusion_pool: Option<usize>,
    pub initial: InitialWeights,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            n_iters: 6000,
            fusion_t: 100,
            fusion_pool: None,
            initial: InitialWeights::Zero,
        }
    }
}

/// Called after every iteration with `(strategy, iteration, weights)`.
/// Distributed strategies pass the stacked `N·M` vector.
pub type WeightHook<'a> = dyn FnMut(StrategyKind, usize, &[Complex64]) + 'a;

/// Per-strategy MSD curves of one trial, iterations `1..=n`.
pub type TrialCurves = BTreeMap<StrategyKind, Vec<f64>>;

/// Runs one trial with every strategy in `kinds` in lockstep on one data stream.
pub fn run_trial(
    scenario: &Scenario,
    kinds: &[StrategyKind],
    settings: &SimulationSettings,
    seed: TrialSeed,
    mut hook: Option<&mut WeightHook<'_>>,
) -> Result<TrialCurves> {
    let model = &scenario.model;
    let truth = &scenario.truth;
    let m = truth.dim();
    let w0 = match settings.initial {
        InitialWeights::Zero => vec![Complex64::new(0.0, 0.0); m],
        InitialWeights::Truth => truth.w_o.clone(),
    };
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let mut states: Vec<StrategyState> = kinds
        .iter()
        .map(|&k| {
            StrategyState::new(
                k,
                model,
                scenario.p_bar.as_slice(),
                m,
                &w0,
                seed,
                settings.fusion_t,
                settings.fusion_pool,
            )
        })
        .collect();
    let mut curves: Vec<Vec<f64>> = vec![Vec::with_capacity(settings.n_iters); states.len()];
    let mut data = IterationData::new(model.n_agents(), m);
    let mut rng = seed.stream(Purpose::Data);
    for i in 1..=settings.n_iters {
        data.fill(truth, &mut rng);
        for (state, curve) in states.iter_mut().zip(curves.iter_mut()) {
            state.step(model, &data);
            let msd = state.msd(&truth.w_o);
            if !msd.is_finite() || msd > DIVERGENCE_LIMIT {
                return Err(Error::NumericalDivergence {
                    strategy: state.kind.name().to_string(),
                    iteration: i,
                });
            }
            curve.push(msd);
            if let Some(h) = hook.as_deref_mut() {
                h(state.kind, i, &state.w);
            }
        }
    }
    Ok(kinds.into_iter().zip(curves).collect())
}

pub fn run_strategy(
    kind: StrategyKind,
    scenario: &Scenario,
    settings: &SimulationSettings,
    seed: TrialSeed,
    hook: Option<&mut WeightHook<'_>>,
) -> Result<Vec<f64>> {
    let mut curves = run_trial(scenario, &[kind], settings, seed, hook)?;
    Ok(curves.remove(&kind).expect("requested strategy"))
}

pub fn run_diffusion_async(scenario: &Scenario, settings: &SimulationSettings, seed: TrialSeed) -> Result<Vec<f64>> {
    run_strategy(StrategyKind::DistAsync, scenario, settings, seed, None)
}

pub fn run_diffusion_sync(scenario: &Scenario, settings: &SimulationSettings, seed: TrialSeed) -> Result<Vec<f64>> {
    run_strategy(StrategyKind::DistSync, scenario, settings, seed, None)
}

pub fn run_centralized_async(scenario: &Scenario, settings: &SimulationSettings, seed: TrialSeed) -> Result<Vec<f64>> {
    run_strategy(StrategyKind::CentAsync, scenario, settings, seed, None)
}

pub fn run_centralized_sync(scenario: &Scenario, settings: &SimulationSettings, seed: TrialSeed) -> Result<Vec<f64>> {
    run_strategy(StrategyKind::CentSync, scenario, settings, seed, None)
}

fn thread_override() -> Option<usize> {
    std::env::var("ASYNCNET_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

/// Runs `n_trials` independent trials in parallel and averages them per
/// strategy. Results do not depend on the thread count.
pub fn run_trials(
    scenario: &Scenario,
    kinds: &[StrategyKind],
    settings: &SimulationSettings,
    base_seed: u64,
    n_trials: usize,
) -> Result<BTreeMap<StrategyKind, LearningCurve>> {
    if n_trials == 0 {
        return Err(Error::validation("trials", "at least one trial is required"));
    }
    let work = || -> Vec<Result<TrialCurves>> {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|t| run_trial(scenario, kinds, settings, TrialSeed::new(base_seed, t), None))
            .collect()
    };
    let results = match thread_override() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation("ASYNCNET_THREADS", e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut per_kind: BTreeMap<StrategyKind, Vec<Vec<f64>>> = BTreeMap::new();
    for r in results {
        for (kind, curve) in r? {
            per_kind.entry(kind).or_default().push(curve);
        }
    }
    per_kind
        .into_iter()
        .map(|(kind, runs)| Ok((kind, average_curves(kind, runs)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Topology;
    use crate::sim::steady_state;
    use crate::theory::AgentDataProfile;

    fn scenario(model: BernoulliAsyncModel, m: usize, su2: f64, sx2: f64) -> Scenario {
        let n = model.n_agents();
        let w_o = (0..m)
            .map(|j| Complex64::new(0.5 - 0.2 * j as f64, 0.1 * j as f64))
            .collect();
        let truth = ScenarioTruth::new(w_o, vec![AgentDataProfile::white(m, su2, sx2); n], false).unwrap();
        Scenario::new(model, truth).unwrap()
    }

    fn settings(n_iters: usize) -> SimulationSettings {
        SimulationSettings {
            n_iters,
            fusion_t: 50,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_point_without_noise() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(6).unwrap(), 0.6, 0.05, 0.7).unwrap();
        let sc = scenario(model, 2, 1.0, 1e-300);
        let s = SimulationSettings {
            initial: InitialWeights::Truth,
            ..settings(100)
        };
        let curves = run_trial(&sc, &StrategyKind::ALL, &s, TrialSeed::new(1, 0), None).unwrap();
        for (kind, c) in curves {
            let worst = c.iter().cloned().fold(0.0, f64::max);
            assert!(worst < 1e-20, "{kind}: {worst:e}");
        }
    }

    #[test]
    fn zero_step_size_freezes_weights() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(5).unwrap(), 0.5, 0.0, 0.5).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let w_o_norm: f64 = sc.truth.w_o.iter().map(|x| x.norm_sqr()).sum();
        let curves = run_trial(&sc, &StrategyKind::ALL, &settings(50), TrialSeed::new(2, 0), None).unwrap();
        for c in curves.values() {
            assert!(c.iter().all(|&v| v == w_o_norm));
        }
    }

    #[test]
    fn degenerate_model_gives_identical_diffusion_trajectories() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(7).unwrap(), 1.0, 0.02, 1.0).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let kinds = [StrategyKind::DistAsync, StrategyKind::DistSync];
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut hook = |k: StrategyKind, _: usize, w: &[Complex64]| match k {
            StrategyKind::DistAsync => a.push(w.to_vec()),
            _ => b.push(w.to_vec()),
        };
        run_trial(&sc, &kinds, &settings(300), TrialSeed::new(3, 0), Some(&mut hook)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_agent_strategies_coincide() {
        let model = BernoulliAsyncModel::uniform(Topology::full(1).unwrap(), 1.0, 0.01, 1.0).unwrap();
        let sc = scenario(model, 3, 1.0, 0.01);
        let c = run_trial(&sc, &StrategyKind::ALL, &settings(400), TrialSeed::new(4, 0), None).unwrap();
        let first = &c[&StrategyKind::DistAsync];
        for v in c.values() {
            assert_eq!(v, first);
        }
    }

    #[test]
    fn single_agent_lms_matches_small_step_prediction() {
        // (μ/2) M σ² for white regressors
        let (mu, m, sx2) = (0.01, 2, 0.01);
        let model = BernoulliAsyncModel::uniform(Topology::full(1).unwrap(), 1.0, mu, 1.0).unwrap();
        let sc = scenario(model, m, 1.0, sx2);
        let curves = run_trials(&sc, &[StrategyKind::CentSync], &settings(4000), 5, 40).unwrap();
        let ss = steady_state(&curves[&StrategyKind::CentSync], 0.25).unwrap();
        let expected = mu / 2.0 * m as f64 * sx2;
        assert!(
            (ss.msd_db - crate::linalg::db(expected)).abs() < 0.5,
            "{} vs {}",
            ss.msd_linear,
            expected
        );
    }

    #[test]
    fn trial_results_are_reproducible_and_seed_dependent() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(5).unwrap(), 0.5, 0.02, 0.6).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let a = run_trials(&sc, &StrategyKind::ALL, &settings(200), 9, 4).unwrap();
        let b = run_trials(&sc, &StrategyKind::ALL, &settings(200), 9, 4).unwrap();
        let c = run_trials(&sc, &StrategyKind::ALL, &settings(200), 10, 4).unwrap();
        for k in StrategyKind::ALL {
            assert_eq!(a[&k].msd, b[&k].msd);
            assert_ne!(a[&k].msd, c[&k].msd);
        }
    }

    #[test]
    fn enabling_strategies_does_not_perturb_others() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(5).unwrap(), 0.5, 0.02, 0.6).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let all = run_trial(&sc, &StrategyKind::ALL, &settings(200), TrialSeed::new(11, 2), None).unwrap();
        for k in StrategyKind::ALL {
            let alone = run_strategy(k, &sc, &settings(200), TrialSeed::new(11, 2), None).unwrap();
            assert_eq!(alone, all[&k]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(4).unwrap(), 1.0, 5.0, 1.0).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let err = run_diffusion_sync(&sc, &settings(2000), TrialSeed::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::NumericalDivergence { .. }));
    }

    #[test]
    fn fusion_pool_runs() {
        let model = BernoulliAsyncModel::uniform(Topology::ring(5).unwrap(), 0.5, 0.02, 0.6).unwrap();
        let sc = scenario(model, 2, 1.0, 0.01);
        let s = SimulationSettings {
            fusion_pool: Some(16),
            ..settings(500)
        };
        let c = run_centralized_async(&sc, &s, TrialSeed::new(1, 0)).unwrap();
        assert!(c[499] < c[0]);
    }
}
