use serde::{Deserialize, Serialize};

use super::strategy::StrategyKind;
use crate::error::{Error, Result};
use crate::linalg::db;

/// Minimum tail window.
const MIN_TAIL: usize = 200;
/// Below this the steady-state estimate is refused.
const MIN_USABLE_TAIL: usize = 50;

/// Trial-averaged MSD curve of one strategy. The per-trial curves are kept
/// for steady-state error bars.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: StrategyKind,
    pub n_trials: usize,
    /// Mean MSD at iterations `1..=n`, linear scale.
    pub msd: Vec<f64>,
    #[serde(skip)]
    runs: Vec<Vec<f64>>,
}

impl LearningCurve {
    pub fn n_iters(&self) -> usize {
        self.msd.len()
    }

    pub fn msd_db(&self) -> Vec<f64> {
        self.msd.iter().map(|&v| db(v)).collect()
    }

    pub fn runs(&self) -> &[Vec<f64>] {
        &self.runs
    }
}

/// Averages per-trial curves in trial order.
pub fn average_curves(strategy: StrategyKind, runs: Vec<Vec<f64>>) -> Result<LearningCurve> {
    let first = runs
        .first()
        .ok_or_else(|| Error::validation("trials", "at least one trial is required"))?;
    let n = first.len();
    if runs.iter().any(|r| r.len() != n) {
        return Err(Error::validation("trials", "trial curves have different lengths"));
    }
    let mut msd = vec![0.0; n];
    for r in &runs {
        for (acc, v) in msd.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let t = runs.len() as f64;
    msd.iter_mut().for_each(|v| *v /= t);
    Ok(LearningCurve {
        strategy,
        n_trials: runs.len(),
        msd,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateEstimate {
    pub msd_linear: f64,
    pub msd_db: f64,
    /// Standard error across trials of the per-trial tail means.
    pub stderr_linear: f64,
    pub stderr_db: f64,
    pub tail_window: usize,
    pub n_trials: usize,
}

/// `min(n, max(⌈f·n⌉, 200))`.
pub fn tail_window(n_iters: usize, tail_fraction: f64) -> usize {
    let w = (tail_fraction * n_iters as f64).ceil() as usize;
    w.max(MIN_TAIL).min(n_iters)
}

pub fn steady_state(curve: &LearningCurve, tail_fraction: f64) -> Result<SteadyStateEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::validation("tail_fraction", "must lie in (0, 1]"));
    }
    let n = curve.n_iters();
    let window = tail_window(n, tail_fraction);
    if window < MIN_USABLE_TAIL {
        return Err(Error::InsufficientIterations { window });
    }
    let tail_mean = |r: &[f64]| r[n - window..].iter().sum::<f64>() / window as f64;
    let msd_linear = tail_mean(&curve.msd);
    let per_trial: Vec<f64> = curve.runs.iter().map(|r| tail_mean(r)).collect();
    let t = per_trial.len();
    let stderr_linear = if t > 1 {
        let mean = per_trial.iter().sum::<f64>() / t as f64;
        let var = per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        (var / t as f64).sqrt()
    } else {
        0.0
    };
    Ok(SteadyStateEstimate {
        msd_linear,
        msd_db: db(msd_linear),
        stderr_linear,
        stderr_db: 10.0 / std::f64::consts::LN_10 * stderr_linear / msd_linear,
        tail_window: window,
        n_trials: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_rules() {
        assert_eq!(tail_window(6000, 0.1), 600);
        assert_eq!(tail_window(1000, 0.1), 200);
        assert_eq!(tail_window(120, 0.1), 120);
        assert_eq!(tail_window(30, 0.1), 30);
    }

    #[test]
    fn constant_curves() {
        let c = average_curves(StrategyKind::CentSync, vec![vec![1e-3; 1000], vec![3e-3; 1000]]).unwrap();
        let s = steady_state(&c, 0.1).unwrap();
        assert!((s.msd_linear - 2e-3).abs() < 1e-15);
        assert!((s.msd_db - db(2e-3)).abs() < 1e-12);
        assert!((s.stderr_linear - 1e-3).abs() < 1e-15);
        assert_eq!(s.tail_window, 200);
    }

    #[test]
    fn short_runs_are_refused() {
        let c = average_curves(StrategyKind::DistSync, vec![vec![1.0; 30]]).unwrap();
        assert!(matches!(
            steady_state(&c, 0.1),
            Err(Error::InsufficientIterations { window: 30 })
        ));
        assert!(steady_state(&c, 0.0).is_err());
        assert!(average_curves(StrategyKind::DistSync, vec![]).is_err());
    }
}
