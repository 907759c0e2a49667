use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::Topology;
use crate::error::{Error, Result};

/// Nominal off-diagonal combination weights `a_ℓk = 1/|𝒩_k|`, stored per
/// column. Diagonal weights are not stored; they are the per-realization
/// residual that keeps each column summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NominalWeights {
    pub columns: Vec<Vec<(usize, f64)>>,
}

pub fn nominal_weights(topology: &Topology) -> NominalWeights {
    let columns = (0..topology.n_agents())
        .map(|k| {
            let w = 1.0 / topology.degree(k) as f64;
            topology
                .neighborhood(k)
                .iter()
                .filter(|&&l| l != k)
                .map(|&l| (l, w))
                .collect()
        })
        .collect();
    NominalWeights { columns }
}

/// A directed link `from → k` as seen from the receiving column `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Link {
    pub from: usize,
    /// Activation probability `η_ℓk`.
    pub eta: f64,
    /// Nominal weight `a_ℓk`.
    pub weight: f64,
}

/// Bernoulli asynchronous model: agent `k` updates with probability `q_k`
/// (step `μ_k`, else 0) and each directed link `ℓ → k` is active with
/// probability `η_ℓk`, all independently and independently over time.
#[derive(Clone, Debug, Serialize)]
pub struct BernoulliAsyncModel {
    topology: Topology,
    q: Vec<f64>,
    mu: Vec<f64>,
    incoming: Vec<Vec<Link>>,
}

fn in_unit_interval(v: f64) -> bool {
    v > 0.0 && v <= 1.0
}

impl BernoulliAsyncModel {
    /// Builds a model; `eta(ℓ, k)` is queried for every directed link `ℓ → k`, `ℓ ≠ k`.
    pub fn new(topology: Topology, q: Vec<f64>, mu: Vec<f64>, eta: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = topology.n_agents();
        if q.len() != n || mu.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} update probabilities and step-sizes, got {} and {}",
                q.len(),
                mu.len()
            )));
        }
        if let Some((k, v)) = q.iter().enumerate().find(|(_, v)| !in_unit_interval(**v)) {
            return Err(Error::InvalidModel(format!("q[{k}] = {v} is outside (0, 1]")));
        }
        if let Some((k, v)) = mu.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidModel(format!(
                "mu[{k}] = {v} must be a finite nonnegative number"
            )));
        }
        let nominal = nominal_weights(&topology);
        let mut incoming = Vec::with_capacity(n);
        for (k, col) in nominal.columns.iter().enumerate() {
            let mut links = Vec::with_capacity(col.len());
            for &(l, weight) in col {
                let e = eta(l, k);
                if !in_unit_interval(e) {
                    return Err(Error::InvalidModel(format!("eta[{l} -> {k}] = {e} is outside (0, 1]")));
                }
                links.push(Link {
                    from: l,
                    eta: e,
                    weight,
                });
            }
            incoming.push(links);
        }
        Ok(Self {
            topology,
            q,
            mu,
            incoming,
        })
    }

    /// Same `q`, `μ` and `η` for every agent and link.
    pub fn uniform(topology: Topology, q: f64, mu: f64, eta: f64) -> Result<Self> {
        let n = topology.n_agents();
        Self::new(topology, vec![q; n], vec![mu; n], |_, _| eta)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn n_agents(&self) -> usize {
        self.topology.n_agents()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Nominal step-sizes `μ_k`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// The common step-size if all agents share one.
    pub fn uniform_mu(&self) -> Option<f64> {
        let first = *self.mu.first()?;
        self.mu.iter().all(|&m| m == first).then_some(first)
    }

    /// Copy of the model with every nominal step-size replaced by `mu`.
    pub fn with_mu(&self, mu: f64) -> Self {
        Self {
            mu: vec![mu; self.n_agents()],
            ..self.clone()
        }
    }

    /// Links into column `k`, sorted by source agent.
    pub fn incoming(&self, k: usize) -> &[Link] {
        &self.incoming[k]
    }

    pub fn eta(&self, l: usize, k: usize) -> Option<f64> {
        self.incoming[k].iter().find(|link| link.from == l).map(|link| link.eta)
    }

    /// True when every `q_k` and `η_ℓk` equals one.
    pub fn is_deterministic(&self) -> bool {
        self.q.iter().all(|&q| q == 1.0) && self.incoming.iter().flatten().all(|link| link.eta == 1.0)
    }

    /// Draws link activations column by column into `out`.
    pub fn sample_combination_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut SparseCombination) {
        debug_assert_eq!(out.diag.len(), self.n_agents());
        for (k, links) in self.incoming.iter().enumerate() {
            let col = &mut out.columns[k];
            col.clear();
            let mut off = 0.0;
            for link in links {
                if rng.gen::<f64>() < link.eta {
                    off += link.weight;
                    col.push((link.from, link.weight));
                }
            }
            out.diag[k] = 1.0 - off;
        }
    }

    /// Draws `μ_k(i) ∈ {0, μ_k}` for every agent.
    pub fn sample_step_sizes_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((s, &q), &mu) in out.iter_mut().zip(&self.q).zip(&self.mu) {
            *s = if rng.gen::<f64>() < q { mu } else { 0.0 };
        }
    }

    /// One realization `(A_i, μ(i))`: links first, then step-sizes, from the same stream.
    pub fn sample_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> CombinationRealization {
        let mut comb = SparseCombination::new(self.n_agents());
        self.sample_combination_into(rng, &mut comb);
        let mut step_sizes = vec![0.0; self.n_agents()];
        self.sample_step_sizes_into(rng, &mut step_sizes);
        CombinationRealization {
            matrix: comb.to_dense(),
            step_sizes,
        }
    }

    /// The mean combination matrix `Ā` in sparse column form.
    pub fn mean_combination(&self) -> SparseCombination {
        let mut out = SparseCombination::new(self.n_agents());
        for (k, links) in self.incoming.iter().enumerate() {
            let mut off = 0.0;
            for link in links {
                let a = link.eta * link.weight;
                off += a;
                out.columns[k].push((link.from, a));
            }
            out.diag[k] = 1.0 - off;
        }
        out
    }

    /// Mean step-sizes `μ̄_k = q_k μ_k`.
    pub fn mean_step_sizes(&self) -> Vec<f64> {
        self.q.iter().zip(&self.mu).map(|(q, m)| q * m).collect()
    }
}

/// A dense realization of the random combination matrix and step-sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinationRealization {
    /// Left-stochastic `A_i`; column `k` holds the weights used by agent `k`.
    pub matrix: DMatrix<f64>,
    pub step_sizes: Vec<f64>,
}

/// Left-stochastic matrix stored as its diagonal plus nonzero off-diagonal
/// entries per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCombination {
    pub columns: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
}

impl SparseCombination {
    pub fn new(n: usize) -> Self {
        Self {
            columns: vec![Vec::new(); n],
            diag: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diag[k];
            for &(l, a) in &self.columns[k] {
                m[(l, k)] = a;
            }
        }
        m
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (d, xi)) in out.iter_mut().zip(self.diag.iter().zip(x)) {
            *o = d * xi;
        }
        for (k, col) in self.columns.iter().enumerate() {
            for &(l, a) in col {
                out[l] += a * x[k];
            }
        }
    }

    /// Combination step on stacked length-`m` blocks: `w_k = Σ_ℓ a_ℓk ψ_ℓ`.
    pub fn combine(&self, psi: &[Complex64], m: usize, w: &mut [Complex64]) {
        for k in 0..self.n() {
            let d = self.diag[k];
            let dst = &mut w[k * m..(k + 1) * m];
            for (o, p) in dst.iter_mut().zip(&psi[k * m..(k + 1) * m]) {
                *o = p * d;
            }
            for &(l, a) in &self.columns[k] {
                for (o, p) in dst.iter_mut().zip(&psi[l * m..(l + 1) * m]) {
                    *o += p * a;
                }
            }
        }
    }
}
