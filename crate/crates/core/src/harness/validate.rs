//! Property suites over random models, shared by `asyncnet validate` and the
//! acceptance tests.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::compare::{run_compare, LemmaCheck};
use super::presets::preset;
use crate::error::Result;
use crate::linalg::{self, max_abs_vec};
use crate::moments::{MomentSet, SecondMomentMode, PSD_FLOOR};
use crate::network::{BernoulliAsyncModel, Topology};
use crate::rng::{stream, Purpose, SimRng};
use crate::sim::FusionSampler;
use crate::theory::{
    build_h, build_r_async, build_r_sync, estimate_full_f_mc, msd_general, msd_lms_async, msd_lms_sync,
    step_size_moments, AgentDataProfile, TheoryReport,
};

const Q_CHOICES: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

/// A random connected model with `N ∈ [n_min, n_max]`, `η ~ U(0.4, 0.8)`,
/// `q` from {0.3, 0.5, 0.7, 0.9}, white regressors and random noise levels.
pub fn random_model(
    seed: u64,
    index: u64,
    n_min: usize,
    n_max: usize,
    m: usize,
    mu: f64,
) -> Result<(BernoulliAsyncModel, Vec<AgentDataProfile>)> {
    let mut rng = stream(seed, index, Purpose::Config);
    let n = rng.gen_range(n_min..=n_max);
    let radius = rng.gen_range(0.45..0.8);
    let topology = Topology::random_geometric(n, radius, rng.gen(), 1000)?;
    let q: Vec<f64> = (0..n).map(|_| Q_CHOICES[rng.gen_range(0..4)]).collect();
    let mut etas = Vec::new();
    for k in 0..n {
        for &l in topology.neighborhood(k) {
            if l != k {
                etas.push(((l, k), rng.gen_range(0.4..0.8)));
            }
        }
    }
    let profiles = (0..n)
        .map(|_| AgentDataProfile::white(m, rng.gen_range(0.5..2.0), rng.gen_range(1e-3..1e-1)))
        .collect();
    let lookup = |l: usize, k: usize| etas.iter().find(|(key, _)| *key == (l, k)).map_or(1.0, |e| e.1);
    let model = BernoulliAsyncModel::new(topology, q, vec![mu; n], lookup)?;
    Ok((model, profiles))
}

fn exact() -> SecondMomentMode {
    SecondMomentMode::Exact { threshold: 20 }
}

/// `C_p` PSD with zero row sums, Perron residuals and positivity over random models.
pub fn moment_suite(models: usize, seed: u64) -> Result<Vec<LemmaCheck>> {
    let mut worst_eig = f64::INFINITY;
    let mut worst_rows: f64 = 0.0;
    let mut worst_asym: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut worst_joint: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    for i in 0..models as u64 {
        let (model, _) = random_model(seed, i, 3, 12, 1, 0.01)?;
        let ms = MomentSet::compute(&model, exact())?;
        let (eig, rows) = ms.c_p_diagnostics();
        worst_eig = worst_eig.min(eig);
        worst_rows = worst_rows.max(rows);
        worst_asym = worst_asym.max(linalg::max_abs(&(&ms.c_p - ms.c_p.transpose())));
        // residuals recomputed from the returned vectors
        worst_mean = worst_mean.max(max_abs_vec(&(&ms.a_bar * &ms.p_bar - &ms.p_bar)));
        let p = ms.p();
        let sp = linalg::vec_of(&ms.second.apply(&ms.p_p));
        worst_joint = worst_joint.max(max_abs_vec(&(sp - &p)));
        min_entry = min_entry.min(ms.p_bar.min()).min(p.min());
    }
    Ok(vec![
        LemmaCheck::at_least("c_p_min_eigenvalue", worst_eig, PSD_FLOOR),
        LemmaCheck::at_most("c_p_row_sums", worst_rows, 1e-9),
        LemmaCheck::at_most("c_p_symmetry", worst_asym, 1e-12),
        LemmaCheck::at_most("perron_residual_mean", worst_mean, 1e-10),
        LemmaCheck::at_most("perron_residual_joint", worst_joint, 1e-10),
        LemmaCheck::above("perron_positivity", min_entry, 0.0),
    ])
}

/// Empirical first and second moments of the fusion vector against `p̄` and `p`.
pub fn fusion_suite(samples: usize, t: usize, seed: u64) -> Result<Vec<LemmaCheck>> {
    let model = BernoulliAsyncModel::uniform(Topology::ring(5)?, 1.0, 0.01, 0.6)?;
    let ms = MomentSet::compute(&model, exact())?;
    let n = model.n_agents();
    let mut sampler = FusionSampler::new(n, t);
    let mut rng: SimRng = stream(seed, 0, Purpose::Fusion);
    let mut phi = vec![0.0; n];
    let mut mean = DVector::zeros(n);
    let mut outer = DVector::zeros(n * n);
    for _ in 0..samples {
        sampler.sample_into(&model, &mut rng, &mut phi);
        for j in 0..n {
            mean[j] += phi[j];
            for i in 0..n {
                outer[i + n * j] += phi[i] * phi[j];
            }
        }
    }
    mean /= samples as f64;
    outer /= samples as f64;
    Ok(vec![
        LemmaCheck::at_most("fusion_mean_vs_p_bar", max_abs_vec(&(mean - &ms.p_bar)), 5e-3),
        LemmaCheck::at_most("fusion_second_moment_vs_p", max_abs_vec(&(outer - ms.p())), 1e-2),
    ])
}

/// Largest relative disagreement between the general MSD expression and the
/// LMS closed forms over random configurations.
pub fn closed_form_suite(configs: usize, seed: u64) -> Result<LemmaCheck> {
    let mut worst: f64 = 0.0;
    for i in 0..configs as u64 {
        let mu = stream(seed, i, Purpose::Estimator).gen_range(1e-3..1e-2);
        let (model, profiles) = random_model(seed, i, 3, 10, 2, mu)?;
        let ms = MomentSet::compute(&model, exact())?;
        let steps = step_size_moments(&model);
        let h = build_h(&ms.p_bar, &steps, &profiles)?;
        let general_async = msd_general(&h, &build_r_async(&ms.p_p, &steps, &profiles)?)?;
        let general_sync = msd_general(&h, &build_r_sync(&ms.p_bar, &steps, &profiles)?)?;
        let lms_async = msd_lms_async(&ms.p_bar, &ms.p_p, &model, &profiles)?;
        let lms_sync = msd_lms_sync(&ms.p_bar, &model, &profiles)?;
        worst = worst
            .max((general_async - lms_async).abs() / lms_async)
            .max((general_sync - lms_sync).abs() / lms_sync);
    }
    Ok(LemmaCheck::at_most("closed_form_cross_check", worst, 1e-12))
}

/// Smallest relative async-minus-sync MSD gap over random models with some `q_k < 1`.
pub fn ordering_suite(models: usize, seed: u64) -> Result<LemmaCheck> {
    let mut smallest = f64::INFINITY;
    for i in 0..models as u64 {
        let (model, profiles) = random_model(seed, i, 3, 10, 2, 0.005)?;
        let ms = MomentSet::compute(&model, exact())?;
        let t = TheoryReport::compute(&model, &ms, &profiles, 0.0)?;
        let m = t.msd_linear;
        smallest = smallest.min((m.dist_async - m.dist_sync) / m.dist_sync);
    }
    Ok(LemmaCheck::above("async_above_sync_theory", smallest, 0.0))
}

/// Monte Carlo spectral radius of the full network operator against `ρ(F_async)`.
/// Measured as `|ρ̂ − ρ| / (1 − ρ)`.
pub fn full_operator_check(samples: usize, seed: u64) -> Result<LemmaCheck> {
    let topology = Topology::ring(4)?;
    let model = BernoulliAsyncModel::new(topology, vec![0.5, 0.7, 0.9, 0.6], vec![0.002; 4], |_, _| 0.6)?;
    let profiles: Vec<_> = [1.0, 1.5, 0.8, 1.2]
        .iter()
        .map(|&s| AgentDataProfile::white(1, s, 0.01))
        .collect();
    let ms = MomentSet::compute(&model, exact())?;
    let t = TheoryReport::compute(&model, &ms, &profiles, 0.0)?;
    let est = estimate_full_f_mc(&model, &profiles, samples, seed)?;
    let rho = t.rho_ms_async;
    Ok(LemmaCheck::at_most(
        "full_operator_rate",
        (est.rho_hat - rho).abs() / (1.0 - rho),
        0.1,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub quick: bool,
    pub checks: Vec<LemmaCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every suite. The full mode adds the desk-scale comparison.
pub fn run_validation(quick: bool) -> Result<ValidationReport> {
    let seed = 20_130_901;
    let mut checks = Vec::new();
    let (models, fusion_samples, configs, full_f) = if quick {
        (20, 20_000, 5, 2_000)
    } else {
        (100, 200_000, 20, 10_000)
    };
    checks.extend(moment_suite(models, seed)?);
    let mut fusion = fusion_suite(fusion_samples, 100, seed)?;
    if quick {
        // fewer samples: widen by the √10 loss in precision
        for c in &mut fusion {
            let upper = c.upper.unwrap() * 10f64.sqrt();
            *c = LemmaCheck::at_most(c.name.clone(), c.measured, upper);
        }
    }
    checks.extend(fusion);
    checks.push(closed_form_suite(configs, seed)?);
    checks.push(ordering_suite(configs, seed)?);
    checks.push(full_operator_check(full_f, seed)?);
    let mut config = preset("desk")?;
    if quick {
        config.simulation.trials = 10;
        config.simulation.iterations = 2000;
        config.simulation.fusion_pool = Some(256);
        config.mu_sweep.clear();
    }
    let comparison = run_compare(&config)?;
    let r = comparison.report;
    if let Some(e) = r.error {
        checks.push(LemmaCheck {
            name: format!("desk_simulation ({e})"),
            passed: false,
            measured: f64::NAN,
            lower: None,
            upper: None,
        });
    }
    for mut c in r.lemma_checks {
        if quick && c.name.starts_with("theory_vs_simulation") || quick && c.name.starts_with("dist_cent_simulated") {
            continue;
        }
        c.name = format!("desk_{}", c.name);
        checks.push(c);
    }
    Ok(ValidationReport { quick, checks })
}
