use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mean_matrix;
use crate::error::{Error, Result};
use crate::linalg::rows;
use crate::network::{BernoulliAsyncModel, Link};
use crate::rng::{stream, Purpose};

pub const DEFAULT_ENUMERATION_THRESHOLD: usize = 20;
pub const DEFAULT_MC_SAMPLES: usize = 200_000;

/// How the same-column joint moments of `A_i` are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SecondMomentMode {
    /// Enumerate the `2^deg` link patterns of each column; fails beyond `threshold` links.
    Exact { threshold: usize },
    /// Estimate each column covariance from `samples` draws.
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact where the column is small enough, Monte Carlo otherwise.
    Auto {
        threshold: usize,
        samples: usize,
        seed: u64,
    },
}

impl Default for SecondMomentMode {
    fn default() -> Self {
        SecondMomentMode::Auto {
            threshold: DEFAULT_ENUMERATION_THRESHOLD,
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

/// Covariance of column `k` of `A_i`, restricted to its support `𝒩_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnCovariance {
    pub support: Vec<usize>,
    #[serde(with = "rows")]
    pub cov: DMatrix<f64>,
    /// Draws used when estimated, `None` when enumerated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// `S = E(A_i ⊗ A_i) = Ā ⊗ Ā + C_A` in factored form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    #[serde(with = "rows")]
    pub mean: DMatrix<f64>,
    pub columns: Vec<ColumnCovariance>,
}

impl SecondMoment {
    pub fn n_agents(&self) -> usize {
        self.mean.nrows()
    }

    /// `unvec(S vec(X)) = Ā X Āᵀ + Σ_k X_kk C_k`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.mean * x * self.mean.transpose();
        for (k, col) in self.columns.iter().enumerate() {
            let xkk = x[(k, k)];
            if xkk == 0.0 {
                continue;
            }
            for (a, &i) in col.support.iter().enumerate() {
                for (b, &j) in col.support.iter().enumerate() {
                    out[(i, j)] += xkk * col.cov[(a, b)];
                }
            }
        }
        out
    }

    /// `E[a_ik a_jm]`.
    pub fn entry(&self, i: usize, k: usize, j: usize, m: usize) -> f64 {
        let base = self.mean[(i, k)] * self.mean[(j, m)];
        if k != m {
            return base;
        }
        let col = &self.columns[k];
        match (col.support.binary_search(&i), col.support.binary_search(&j)) {
            (Ok(a), Ok(b)) => base + col.cov[(a, b)],
            _ => base,
        }
    }

    /// Dense `N²×N²` matrix, indexed by column-major `vec` positions.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let mut s = self.mean.kronecker(&self.mean);
        for (k, col) in self.columns.iter().enumerate() {
            for (a, &i) in col.support.iter().enumerate() {
                for (b, &j) in col.support.iter().enumerate() {
                    s[(i + n * j, k + n * k)] += col.cov[(a, b)];
                }
            }
        }
        s
    }

    /// Dense Kronecker covariance `C_A = S − Ā ⊗ Ā`.
    pub fn kronecker_covariance(&self) -> DMatrix<f64> {
        self.to_dense() - self.mean.kronecker(&self.mean)
    }

    /// Total number of Monte Carlo draws, if any column was estimated.
    pub fn monte_carlo_samples(&self) -> Option<usize> {
        let total: usize = self.columns.iter().filter_map(|c| c.samples).sum();
        (total > 0).then_some(total)
    }
}

pub fn second_moment(model: &BernoulliAsyncModel, mode: SecondMomentMode) -> Result<SecondMoment> {
    let n = model.n_agents();
    let mut columns = Vec::with_capacity(n);
    for k in 0..n {
        let support = model.topology().neighborhood(k).to_vec();
        let links = model.incoming(k);
        let col = match mode {
            SecondMomentMode::Exact { threshold } => {
                if links.len() > threshold {
                    return Err(Error::EnumerationOverflow {
                        column: k,
                        degree: links.len(),
                        threshold,
                    });
                }
                enumerate_column(k, support, links)
            }
            SecondMomentMode::MonteCarlo { samples, seed } => sample_column(k, support, links, samples, seed),
            SecondMomentMode::Auto {
                threshold,
                samples,
                seed,
            } => {
                if links.len() > threshold {
                    sample_column(k, support, links, samples, seed)
                } else {
                    enumerate_column(k, support, links)
                }
            }
        };
        columns.push(col);
    }
    Ok(SecondMoment {
        mean: mean_matrix(model),
        columns,
    })
}

/// Position of each link source and of `k` itself inside the support.
fn support_slots(k: usize, support: &[usize], links: &[Link]) -> (usize, Vec<usize>) {
    let pos = |x: usize| support.binary_search(&x).expect("link outside neighborhood");
    (pos(k), links.iter().map(|l| pos(l.from)).collect())
}

fn enumerate_column(k: usize, support: Vec<usize>, links: &[Link]) -> ColumnCovariance {
    let s = support.len();
    let (diag_slot, slots) = support_slots(k, &support, links);
    let mut mean = vec![0.0; s];
    let mut second = DMatrix::zeros(s, s);
    let mut a = vec![0.0; s];
    for pattern in 0u64..(1u64 << links.len()) {
        let mut prob = 1.0;
        let mut off = 0.0;
        a.iter_mut().for_each(|v| *v = 0.0);
        for (bit, (link, &slot)) in links.iter().zip(&slots).enumerate() {
            if pattern >> bit & 1 == 1 {
                prob *= link.eta;
                off += link.weight;
                a[slot] = link.weight;
            } else {
                prob *= 1.0 - link.eta;
            }
        }
        if prob == 0.0 {
            continue;
        }
        a[diag_slot] = 1.0 - off;
        for i in 0..s {
            if a[i] == 0.0 {
                continue;
            }
            mean[i] += prob * a[i];
            for j in 0..s {
                second[(i, j)] += prob * a[i] * a[j];
            }
        }
    }
    let mut cov = second;
    for i in 0..s {
        for j in 0..s {
            cov[(i, j)] -= mean[i] * mean[j];
        }
    }
    ColumnCovariance {
        support,
        cov,
        samples: None,
    }
}

fn sample_column(k: usize, support: Vec<usize>, links: &[Link], samples: usize, seed: u64) -> ColumnCovariance {
    let s = support.len();
    let (diag_slot, slots) = support_slots(k, &support, links);
    let mut rng = stream(seed, k as u64, Purpose::Estimator);
    let mut sum = vec![0.0; s];
    let mut second = DMatrix::zeros(s, s);
    let mut a = vec![0.0; s];
    for _ in 0..samples {
        a.iter_mut().for_each(|v| *v = 0.0);
        let mut off = 0.0;
        for (link, &slot) in links.iter().zip(&slots) {
            if rng.gen::<f64>() < link.eta {
                off += link.weight;
                a[slot] = link.weight;
            }
        }
        a[diag_slot] = 1.0 - off;
        for i in 0..s {
            sum[i] += a[i];
            for j in 0..s {
                second[(i, j)] += a[i] * a[j];
            }
        }
    }
    let count = samples.max(1) as f64;
    let mut cov = second / count;
    for i in 0..s {
        for j in 0..s {
            cov[(i, j)] -= (sum[i] / count) * (sum[j] / count);
        }
    }
    ColumnCovariance {
        support,
        cov,
        samples: Some(samples),
    }
}
