use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::data::IterationData;
use super::fusion::FusionSampler;
use crate::network::{BernoulliAsyncModel, SparseCombination};
use crate::rng::{Purpose, SimRng, TrialSeed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    DistAsync,
    DistSync,
    CentAsync,
    CentSync,
}

impl StrategyKind {
    /// Column order of the learning-curve CSV.
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::DistAsync,
        StrategyKind::DistSync,
        StrategyKind::CentAsync,
        StrategyKind::CentSync,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::DistAsync => "dist_async",
            StrategyKind::DistSync => "dist_sync",
            StrategyKind::CentAsync => "cent_async",
            StrategyKind::CentSync => "cent_sync",
        }
    }

    pub fn is_distributed(self) -> bool {
        matches!(self, StrategyKind::DistAsync | StrategyKind::DistSync)
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `out = w + μ u* (d − u w)`.
fn adapt(w: &[Complex64], u: &[Complex64], d: Complex64, step: f64, out: &mut [Complex64]) {
    let e = d - u.iter().zip(w).map(|(a, b)| a * b).sum::<Complex64>();
    let g = e * step;
    for ((o, wj), uj) in out.iter_mut().zip(w).zip(u) {
        *o = wj + g * uj.conj();
    }
}

/// `Σ_k c_k u_k* (d_k − u_k w)` accumulated into `grad`.
fn aggregate_gradient(w: &[Complex64], data: &IterationData, coef: &[f64], grad: &mut [Complex64]) {
    grad.iter_mut().for_each(|g| *g = zero());
    for (k, &c) in coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let u = data.regressor(k);
        let e = data.d[k] - u.iter().zip(w).map(|(a, b)| a * b).sum::<Complex64>();
        let g = e * c;
        for (acc, uj) in grad.iter_mut().zip(u) {
            *acc += g * uj.conj();
        }
    }
}

pub(crate) enum Fusion {
    Fresh(FusionSampler),
    Pool { vectors: Vec<Vec<f64>>, next: usize },
}

pub(crate) enum Engine {
    DistAsync {
        psi: Vec<Complex64>,
        comb: SparseCombination,
        steps: Vec<f64>,
        rng_comb: SimRng,
        rng_step: SimRng,
    },
    DistSync {
        psi: Vec<Complex64>,
        comb: SparseCombination,
        steps: Vec<f64>,
    },
    CentAsync {
        grad: Vec<Complex64>,
        pi: Vec<f64>,
        steps: Vec<f64>,
        coef: Vec<f64>,
        fusion: Fusion,
        rng_fusion: SimRng,
        rng_step: SimRng,
    },
    CentSync {
        grad: Vec<Complex64>,
        coef: Vec<f64>,
    },
}

/// One strategy's state inside a trial.
pub(crate) struct StrategyState {
    pub kind: StrategyKind,
    /// Stacked `w_k` for distributed strategies, a single `w` otherwise.
    pub w: Vec<Complex64>,
    m: usize,
    engine: Engine,
}

impl StrategyState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: StrategyKind,
        model: &BernoulliAsyncModel,
        p_bar: &[f64],
        m: usize,
        w0: &[Complex64],
        seed: TrialSeed,
        fusion_t: usize,
        fusion_pool: Option<usize>,
    ) -> Self {
        let n = model.n_agents();
        let mu_bar = model.mean_step_sizes();
        let (w, engine) = match kind {
            StrategyKind::DistAsync => (
                w0.repeat(n),
                Engine::DistAsync {
                    psi: vec![zero(); n * m],
                    comb: SparseCombination::new(n),
                    steps: vec![0.0; n],
                    rng_comb: seed.stream(Purpose::Combination),
                    rng_step: seed.stream(Purpose::StepSize),
                },
            ),
            StrategyKind::DistSync => (
                w0.repeat(n),
                Engine::DistSync {
                    psi: vec![zero(); n * m],
                    comb: model.mean_combination(),
                    steps: mu_bar,
                },
            ),
            StrategyKind::CentAsync => {
                let mut rng_fusion = seed.stream(Purpose::Fusion);
                let fusion = match fusion_pool {
                    Some(size) => {
                        let mut sampler = FusionSampler::new(n, fusion_t);
                        let vectors = (0..size.max(1))
                            .map(|_| {
                                let mut v = vec![0.0; n];
                                sampler.sample_into(model, &mut rng_fusion, &mut v);
                                v
                            })
                            .collect();
                        Fusion::Pool { vectors, next: 0 }
                    }
                    None => Fusion::Fresh(FusionSampler::new(n, fusion_t)),
                };
                (
                    w0.to_vec(),
                    Engine::CentAsync {
                        grad: vec![zero(); m],
                        pi: vec![0.0; n],
                        steps: vec![0.0; n],
                        coef: vec![0.0; n],
                        fusion,
                        rng_fusion,
                        rng_step: seed.stream(Purpose::CentralStepSize),
                    },
                )
            }
            StrategyKind::CentSync => (
                w0.to_vec(),
                Engine::CentSync {
                    grad: vec![zero(); m],
                    coef: p_bar.iter().zip(&mu_bar).map(|(p, u)| p * u).collect(),
                },
            ),
        };
        Self { kind, w, m, engine }
    }

    pub fn step(&mut self, model: &BernoulliAsyncModel, data: &IterationData) {
        let m = self.m;
        match &mut self.engine {
            Engine::DistAsync {
                psi,
                comb,
                steps,
                rng_comb,
                rng_step,
            } => {
                model.sample_step_sizes_into(rng_step, steps);
                for (k, &s) in steps.iter().enumerate() {
                    let r = k * m..(k + 1) * m;
                    adapt(&self.w[r.clone()], data.regressor(k), data.d[k], s, &mut psi[r]);
                }
                model.sample_combination_into(rng_comb, comb);
                comb.combine(psi, m, &mut self.w);
            }
            Engine::DistSync { psi, comb, steps } => {
                for (k, &s) in steps.iter().enumerate() {
                    let r = k * m..(k + 1) * m;
                    adapt(&self.w[r.clone()], data.regressor(k), data.d[k], s, &mut psi[r]);
                }
                comb.combine(psi, m, &mut self.w);
            }
            Engine::CentAsync {
                grad,
                pi,
                steps,
                coef,
                fusion,
                rng_fusion,
                rng_step,
            } => {
                match fusion {
                    Fusion::Fresh(sampler) => sampler.sample_into(model, rng_fusion, pi),
                    Fusion::Pool { vectors, next } => {
                        pi.copy_from_slice(&vectors[*next]);
                        *next = (*next + 1) % vectors.len();
                    }
                }
                model.sample_step_sizes_into(rng_step, steps);
                for ((c, p), s) in coef.iter_mut().zip(pi.iter()).zip(steps.iter()) {
                    *c = p * s;
                }
                aggregate_gradient(&self.w, data, coef, grad);
                for (wj, g) in self.w.iter_mut().zip(grad.iter()) {
                    *wj += g;
                }
            }
            Engine::CentSync { grad, coef } => {
                aggregate_gradient(&self.w, data, coef, grad);
                for (wj, g) in self.w.iter_mut().zip(grad.iter()) {
                    *wj += g;
                }
            }
        }
    }

    /// Network MSD: average over agents for distributed strategies.
    pub fn msd(&self, w_o: &[Complex64]) -> f64 {
        let m = self.m;
        let blocks = self.w.len() / m;
        let total: f64 = self
            .w
            .chunks(m)
            .map(|wk| wk.iter().zip(w_o).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>())
            .sum();
        total / blocks as f64
    }
}
