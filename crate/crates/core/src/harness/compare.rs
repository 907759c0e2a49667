use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig, FrozenParameters};
use crate::error::{Error, Result};
use crate::linalg::{self, db};
use crate::moments::{MomentSet, PSD_FLOOR};
use crate::sim::{run_trials, steady_state, LearningCurve, Scenario, SteadyStateEstimate, StrategyKind};
use crate::theory::{build_f_async, build_f_sync, step_size_moments, MsdSet, TheoryReport};

/// Gates applied by [`run_compare`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub theory_vs_simulation_db: f64,
    pub matching_db: f64,
    pub ordering_db: f64,
    pub matching_theory_relative: f64,
    pub psd_floor: f64,
    pub row_sum: f64,
    pub perron_residual: f64,
    pub fusion_sum: f64,
    pub rate_gap_fraction: f64,
    pub rate_slope: [f64; 2],
    /// Simulated MSD ratio over a sweep, divided by the step-size ratio.
    pub sweep_ratio: [f64; 2],
    pub sweep_theory_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            theory_vs_simulation_db: 1.0,
            matching_db: 0.5,
            ordering_db: 0.2,
            matching_theory_relative: 1e-12,
            psd_floor: PSD_FLOOR,
            row_sum: 1e-9,
            perron_residual: 1e-10,
            fusion_sum: 1e-10,
            rate_gap_fraction: 0.05,
            rate_slope: [1.5, 2.5],
            sweep_ratio: [0.75, 1.25],
            sweep_theory_relative: 1e-9,
        }
    }
}

/// A named pass/fail record with the measured value and its bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl LemmaCheck {
    pub fn within(name: impl Into<String>, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = measured.is_finite() && lower.is_none_or(|l| measured >= l) && upper.is_none_or(|u| measured <= u);
        Self {
            name: name.into(),
            passed,
            measured,
            lower,
            upper,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, upper: f64) -> Self {
        Self::within(name, measured, None, Some(upper))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, lower: f64) -> Self {
        Self::within(name, measured, Some(lower), None)
    }

    /// Strict lower bound, recorded as `lower`.
    pub fn above(name: impl Into<String>, measured: f64, lower: f64) -> Self {
        let mut c = Self::at_least(name, measured, lower);
        c.passed &= measured > lower;
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSummary {
    pub p_bar: Vec<f64>,
    pub residual_mean: f64,
    pub residual_joint: f64,
    pub symmetry_deviation: f64,
    pub c_p_min_eigenvalue: f64,
    pub c_p_row_sum_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_moment_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub iterations: usize,
    pub theory_db: MsdSet,
    pub simulated: BTreeMap<StrategyKind, SteadyStateEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub mu: f64,
    pub rho_sync: f64,
    pub rho_async: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub parameters: FrozenParameters,
    pub moments: MomentSummary,
    pub theory: TheoryReport,
    /// Closed-form LMS predictions when the step-size is common, general ones otherwise.
    pub predicted_db: MsdSet,
    pub simulated: BTreeMap<StrategyKind, SteadyStateEstimate>,
    /// Prediction minus simulation, dB.
    pub deltas_db: BTreeMap<StrategyKind, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mu_sweep: Vec<SweepPoint>,
    pub rate_sweep: Vec<RatePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_slope: Option<f64>,
    pub tolerances: Tolerances,
    pub lemma_checks: Vec<LemmaCheck>,
    /// Set when a simulation diverged; the report is then partial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ComparisonReport {
    pub fn all_passed(&self) -> bool {
        self.error.is_none() && self.lemma_checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&LemmaCheck> {
        self.lemma_checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&LemmaCheck> {
        self.lemma_checks.iter().filter(|c| !c.passed).collect()
    }
}

pub struct Comparison {
    pub report: ComparisonReport,
    pub curves: BTreeMap<StrategyKind, LearningCurve>,
    pub moments: MomentSet,
}

fn prediction(theory: &TheoryReport) -> MsdSet {
    match theory.msd_lms {
        Some(lms) => MsdSet {
            dist_sync: lms.sync,
            dist_async: lms.r#async,
            cent_sync: lms.sync,
            cent_async: lms.r#async,
        },
        None => theory.msd_linear,
    }
}

fn pick(set: &MsdSet, kind: StrategyKind) -> f64 {
    match kind {
        StrategyKind::DistAsync => set.dist_async,
        StrategyKind::DistSync => set.dist_sync,
        StrategyKind::CentAsync => set.cent_async,
        StrategyKind::CentSync => set.cent_sync,
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Theory, moments and every check that needs no simulation.
pub struct Analysis {
    pub experiment: Experiment,
    pub moments: MomentSet,
    pub theory: TheoryReport,
    pub summary: MomentSummary,
    pub rate_sweep: Vec<RatePoint>,
    pub rate_slope: Option<f64>,
    pub checks: Vec<LemmaCheck>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `ρ(F_sync)` and `ρ(F_async)` at step-size `mu`.
pub fn rate_point(experiment: &Experiment, moments: &MomentSet, mu: f64) -> Result<RatePoint> {
    let model = experiment.model.with_mu(mu);
    let steps = step_size_moments(&model);
    let profiles = &experiment.truth.profiles;
    let rho_sync = linalg::symmetric_spectral_radius(&build_f_sync(&moments.p_bar, &steps, profiles)?);
    let rho_async = linalg::symmetric_spectral_radius(&build_f_async(&moments.p_p, &steps, profiles)?);
    Ok(RatePoint {
        mu,
        rho_sync,
        rho_async,
        gap: rho_async - rho_sync,
    })
}

pub fn analyze(config: &ExperimentConfig) -> Result<Analysis> {
    let tol = Tolerances::default();
    let experiment = config.materialize()?;
    let model = &experiment.model;
    let moments = MomentSet::compute(model, config.second_moment_mode())?;
    let theory = TheoryReport::compute(model, &moments, &experiment.truth.profiles, config.alpha)?;
    let (c_min, c_rows) = moments.c_p_diagnostics();
    let summary = MomentSummary {
        p_bar: moments.p_bar.iter().copied().collect(),
        residual_mean: moments.residual_mean,
        residual_joint: moments.residual_joint,
        symmetry_deviation: moments.symmetry_deviation,
        c_p_min_eigenvalue: c_min,
        c_p_row_sum_inf: c_rows,
        second_moment_samples: moments.second.monte_carlo_samples(),
    };

    let mut checks = Vec::new();
    let fusion = moments.fusion()?;
    let ones = DVector::repeat(moments.n_agents(), 1.0);
    let pi_sum = (fusion.pi_bar.sum() - 1.0).abs();
    let second_rows = linalg::max_abs_vec(&(fusion.second_moment() * &ones - &fusion.pi_bar));
    checks.push(LemmaCheck::at_most(
        "fusion_moment_sums",
        pi_sum.max(second_rows),
        tol.fusion_sum,
    ));
    checks.push(LemmaCheck::at_least("c_p_psd", c_min, tol.psd_floor));
    checks.push(LemmaCheck::at_most("c_p_row_sums", c_rows, tol.row_sum));
    checks.push(LemmaCheck::at_most(
        "perron_residual_mean",
        moments.residual_mean,
        tol.perron_residual,
    ));
    checks.push(LemmaCheck::at_most(
        "perron_residual_joint",
        moments.residual_joint,
        tol.perron_residual,
    ));
    let min_p = moments
        .p_p
        .iter()
        .chain(moments.p_bar.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    checks.push(LemmaCheck::above("perron_positivity", min_p, 0.0));

    let m = &theory.msd_linear;
    checks.push(LemmaCheck::at_most(
        "dist_cent_theory_match_async",
        relative_gap(m.dist_async, m.cent_async),
        tol.matching_theory_relative,
    ));
    checks.push(LemmaCheck::at_most(
        "dist_cent_theory_match_sync",
        relative_gap(m.dist_sync, m.cent_sync),
        tol.matching_theory_relative,
    ));
    let gap = (m.dist_async - m.dist_sync) / m.dist_sync;
    if model.is_deterministic() {
        checks.push(LemmaCheck::at_most("async_sync_gap_deterministic", gap.abs(), 1e-12));
    } else {
        checks.push(LemmaCheck::above("async_above_sync_theory", gap, 0.0));
    }
    if let Some(lms) = theory.msd_lms {
        checks.push(LemmaCheck::at_most(
            "closed_form_async",
            relative_gap(lms.r#async, m.dist_async),
            tol.matching_theory_relative,
        ));
        checks.push(LemmaCheck::at_most(
            "closed_form_sync",
            relative_gap(lms.sync, m.dist_sync),
            tol.matching_theory_relative,
        ));
    }

    let rate_gap = theory.rho_ms_async - theory.rho_ms_sync;
    checks.push(LemmaCheck::within(
        "rate_gap",
        rate_gap,
        Some(0.0),
        Some(tol.rate_gap_fraction * (1.0 - theory.rho_ms_sync)),
    ));
    let rate_sweep = config
        .rate_mu_sweep
        .iter()
        .map(|&mu| rate_point(&experiment, &moments, mu))
        .collect::<Result<Vec<_>>>()?;
    let rate_slope = if model.is_deterministic() {
        None
    } else {
        let xs: Vec<f64> = rate_sweep.iter().map(|r| r.mu).collect();
        let ys: Vec<f64> = rate_sweep.iter().map(|r| r.gap).collect();
        let slope = log_log_slope(&xs, &ys);
        if rate_sweep.len() >= 2 {
            checks.push(LemmaCheck::within(
                "rate_gap_slope",
                slope.unwrap_or(f64::NAN),
                Some(tol.rate_slope[0]),
                Some(tol.rate_slope[1]),
            ));
        }
        slope
    };

    Ok(Analysis {
        experiment,
        moments,
        theory,
        summary,
        rate_sweep,
        rate_slope,
        checks,
    })
}

fn sweep_strategies(config: &ExperimentConfig) -> Vec<StrategyKind> {
    let enabled = config.strategies.enabled();
    let dist: Vec<_> = enabled.iter().copied().filter(|k| k.is_distributed()).collect();
    if dist.is_empty() {
        enabled
    } else {
        dist
    }
}

fn simulate(
    scenario: &Scenario,
    config: &ExperimentConfig,
    kinds: &[StrategyKind],
    n_iters: usize,
) -> Result<(
    BTreeMap<StrategyKind, LearningCurve>,
    BTreeMap<StrategyKind, SteadyStateEstimate>,
)> {
    let mut settings = config.simulation_settings();
    settings.n_iters = n_iters;
    let curves = run_trials(scenario, kinds, &settings, config.seed, config.simulation.trials)?;
    let steady = curves
        .iter()
        .map(|(k, c)| Ok((*k, steady_state(c, config.simulation.tail_fraction)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((curves, steady))
}

/// Moments, theory, simulation of the enabled strategies and the property checks.
/// A diverging simulation yields a partial report with `error` set.
pub fn run_compare(config: &ExperimentConfig) -> Result<Comparison> {
    let tol = Tolerances::default();
    let Analysis {
        experiment,
        moments,
        theory,
        summary,
        rate_sweep,
        rate_slope,
        mut checks,
    } = analyze(config)?;
    let predicted = prediction(&theory);
    let scenario = Scenario::with_p_bar(
        experiment.model.clone(),
        experiment.truth.clone(),
        moments.p_bar.clone(),
    )?;
    let kinds = config.strategies.enabled();

    let mut error = None;
    let mut curves = BTreeMap::new();
    let mut simulated = BTreeMap::new();
    match simulate(&scenario, config, &kinds, config.simulation.iterations) {
        Ok((c, s)) => {
            curves = c;
            simulated = s;
        }
        Err(e @ Error::NumericalDivergence { .. }) => error = Some(e.to_string()),
        Err(e) => return Err(e),
    }

    let deltas_db: BTreeMap<StrategyKind, f64> = simulated
        .iter()
        .map(|(k, s)| (*k, db(pick(&predicted, *k)) - s.msd_db))
        .collect();
    for (k, d) in &deltas_db {
        checks.push(LemmaCheck::at_most(
            format!("theory_vs_simulation_{k}"),
            d.abs(),
            tol.theory_vs_simulation_db,
        ));
    }
    let pair = |a: StrategyKind, b: StrategyKind| Some((simulated.get(&a)?.msd_db, simulated.get(&b)?.msd_db));
    if let Some((a, b)) = pair(StrategyKind::DistAsync, StrategyKind::CentAsync) {
        checks.push(LemmaCheck::at_most(
            "dist_cent_simulated_match_async",
            (a - b).abs(),
            tol.matching_db,
        ));
    }
    if let Some((a, b)) = pair(StrategyKind::DistSync, StrategyKind::CentSync) {
        checks.push(LemmaCheck::at_most(
            "dist_cent_simulated_match_sync",
            (a - b).abs(),
            tol.matching_db,
        ));
    }
    if let Some((a, s)) = pair(StrategyKind::DistAsync, StrategyKind::DistSync) {
        checks.push(LemmaCheck::at_least(
            "async_above_sync_simulated_dist",
            a - s,
            -tol.ordering_db,
        ));
    }
    if let Some((a, s)) = pair(StrategyKind::CentAsync, StrategyKind::CentSync) {
        checks.push(LemmaCheck::at_least(
            "async_above_sync_simulated_cent",
            a - s,
            -tol.ordering_db,
        ));
    }

    let mut mu_sweep = Vec::new();
    if error.is_none() && !config.mu_sweep.is_empty() {
        let sweep_kinds = sweep_strategies(config);
        let mut mus = config.mu_sweep.clone();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        for mu in mus {
            let model = experiment.model.with_mu(mu);
            let point_theory = TheoryReport::compute(&model, &moments, &experiment.truth.profiles, config.alpha)?;
            let iterations = ((config.simulation.iterations as f64) * config.mu / mu)
                .round()
                .max(1.0) as usize;
            let simulated_point = if mu == config.mu {
                sweep_kinds
                    .iter()
                    .filter_map(|k| Some((*k, simulated.get(k)?.clone())))
                    .collect()
            } else {
                let sc = Scenario::with_p_bar(model, experiment.truth.clone(), moments.p_bar.clone())?;
                match simulate(&sc, config, &sweep_kinds, iterations) {
                    Ok((_, s)) => s,
                    Err(e @ Error::NumericalDivergence { .. }) => {
                        error = Some(e.to_string());
                        break;
                    }
                    Err(e) => return Err(e),
                }
            };
            mu_sweep.push(SweepPoint {
                mu,
                iterations,
                theory_db: prediction(&point_theory).to_db(),
                simulated: simulated_point,
            });
        }
        if error.is_none() && mu_sweep.len() >= 2 {
            push_sweep_checks(&mut checks, &mu_sweep, &tol);
        }
    }

    let report = ComparisonReport {
        config: config.clone(),
        parameters: experiment.parameters.clone(),
        moments: summary,
        predicted_db: predicted.to_db(),
        theory,
        simulated,
        deltas_db,
        mu_sweep,
        rate_sweep,
        rate_slope,
        tolerances: tol,
        lemma_checks: checks,
        error,
    };
    Ok(Comparison {
        report,
        curves,
        moments,
    })
}

fn lin(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

fn push_sweep_checks(checks: &mut Vec<LemmaCheck>, sweep: &[SweepPoint], tol: &Tolerances) {
    let (lo, hi) = (&sweep[0], &sweep[sweep.len() - 1]);
    let factor = hi.mu / lo.mu;
    let ratio = |a: f64, b: f64| a / b / factor;
    let t_async = ratio(lin(hi.theory_db.dist_async), lin(lo.theory_db.dist_async));
    let t_gap = ratio(
        lin(hi.theory_db.dist_async) - lin(hi.theory_db.dist_sync),
        lin(lo.theory_db.dist_async) - lin(lo.theory_db.dist_sync),
    );
    checks.push(LemmaCheck::at_most(
        "theory_msd_scaling",
        (t_async - 1.0).abs(),
        tol.sweep_theory_relative,
    ));
    if t_gap.is_finite() {
        checks.push(LemmaCheck::at_most(
            "theory_gap_scaling",
            (t_gap - 1.0).abs(),
            tol.sweep_theory_relative,
        ));
    }
    let [a, b] = tol.sweep_ratio;
    for (kind, s_hi) in &hi.simulated {
        if let Some(s_lo) = lo.simulated.get(kind) {
            checks.push(LemmaCheck::within(
                format!("simulated_msd_scaling_{kind}"),
                ratio(s_hi.msd_linear, s_lo.msd_linear),
                Some(a),
                Some(b),
            ));
        }
    }
    for (async_kind, sync_kind, label) in [
        (StrategyKind::DistAsync, StrategyKind::DistSync, "dist"),
        (StrategyKind::CentAsync, StrategyKind::CentSync, "cent"),
    ] {
        let gap =
            |p: &SweepPoint| Some(p.simulated.get(&async_kind)?.msd_linear - p.simulated.get(&sync_kind)?.msd_linear);
        if let (Some(g_hi), Some(g_lo)) = (gap(hi), gap(lo)) {
            checks.push(LemmaCheck::within(
                format!("simulated_gap_scaling_{label}"),
                ratio(g_hi, g_lo),
                Some(a),
                Some(b),
            ));
        }
    }
}
