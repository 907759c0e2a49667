//! Moments of the random combination matrix.
//!
//! `Ā = E A_i`, `S = E(A_i ⊗ A_i)`, the Perron vectors `p̄` of `Ā` and
//! `p = vec(P_p)` of `S`, and the fusion moments `(π̄, C_π)` a centralized
//! solution must carry to match the distributed network.
//!
//! Columns of `A_i` are independent, so `S = Ā ⊗ Ā + C_A` where `C_A` only
//! couples entries of the same column. `S` is kept in that factored form and
//! applied as `X ↦ Ā X Āᵀ + Σ_k X_kk C_k` on `vec(X)`.

mod perron;
mod second;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use perron::{is_primitive, joint_perron, perron, JointPerron, PerronVector};
pub use second::{
    second_moment, ColumnCovariance, SecondMoment, SecondMomentMode, DEFAULT_ENUMERATION_THRESHOLD, DEFAULT_MC_SAMPLES,
};

use crate::error::{Error, Result};
use crate::linalg::{self, flat, rows};
use crate::network::BernoulliAsyncModel;

pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 2_000_000;
/// Entries of a Perron vector below this are treated as zero.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
pub const PSD_FLOOR: f64 = -1e-9;
pub const ROW_SUM_TOL: f64 = 1e-10;

/// `Ā`: `ā_ℓk = η_ℓk/|𝒩_k|` off the diagonal, `ā_kk` the residual.
pub fn mean_matrix(model: &BernoulliAsyncModel) -> DMatrix<f64> {
    model.mean_combination().to_dense()
}

/// Matched moments of the random fusion vector `π_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionMoments {
    #[serde(with = "flat")]
    pub pi_bar: DVector<f64>,
    #[serde(with = "rows")]
    pub c_pi: DMatrix<f64>,
}

impl FusionMoments {
    /// `E(π πᵀ) = C_π + π̄ π̄ᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.c_pi + &self.pi_bar * self.pi_bar.transpose()
    }
}

/// `π̄ = p̄`, `C_π = P_p − p̄ p̄ᵀ`, checked to be a valid covariance with zero row sums.
pub fn fusion_moments(p_bar: &DVector<f64>, p_p: &DMatrix<f64>) -> Result<FusionMoments> {
    let n = p_bar.len();
    if p_p.shape() != (n, n) {
        return Err(Error::MatchingViolated(format!(
            "P_p is {:?}, expected {n}x{n}",
            p_p.shape()
        )));
    }
    let c_pi = p_p - p_bar * p_bar.transpose();
    let row_sums = linalg::max_abs_vec(&(&c_pi * DVector::repeat(n, 1.0)));
    if row_sums > ROW_SUM_TOL {
        return Err(Error::MatchingViolated(format!(
            "C_pi row sums reach {row_sums:e} (tolerance {ROW_SUM_TOL:e})"
        )));
    }
    let min_eig = linalg::min_symmetric_eigenvalue(&c_pi);
    if min_eig < PSD_FLOOR {
        return Err(Error::MatchingViolated(format!(
            "C_pi has eigenvalue {min_eig:e} below {PSD_FLOOR:e}"
        )));
    }
    if let Some(v) = p_bar.iter().find(|v| **v < POSITIVITY_FLOOR) {
        return Err(Error::MatchingViolated(format!("pi_bar has entry {v:e}")));
    }
    Ok(FusionMoments {
        pi_bar: p_bar.clone(),
        c_pi,
    })
}

/// Everything the predictors need from the combination process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentSet {
    #[serde(with = "rows")]
    pub a_bar: DMatrix<f64>,
    /// `S` in factored form.
    pub second: SecondMoment,
    #[serde(with = "flat")]
    pub p_bar: DVector<f64>,
    /// `P_p = unvec(p)`, symmetrized.
    #[serde(with = "rows")]
    pub p_p: DMatrix<f64>,
    /// `C_p = P_p − p̄ p̄ᵀ`.
    #[serde(with = "rows")]
    pub c_p: DMatrix<f64>,
    pub residual_mean: f64,
    pub residual_joint: f64,
    /// `‖P_p − P_pᵀ‖∞` before symmetrization.
    pub symmetry_deviation: f64,
}

impl MomentSet {
    pub fn compute(model: &BernoulliAsyncModel, mode: SecondMomentMode) -> Result<Self> {
        let a_bar = mean_matrix(model);
        let mean = perron(&a_bar, PERRON_TOL, PERRON_MAX_ITER)?;
        let second = second_moment(model, mode)?;
        let joint = joint_perron(&second, PERRON_TOL, PERRON_MAX_ITER)?;
        let c_p = &joint.p_p - &mean.vector * mean.vector.transpose();
        Ok(Self {
            a_bar,
            second,
            p_bar: mean.vector,
            p_p: joint.p_p,
            c_p,
            residual_mean: mean.residual,
            residual_joint: joint.residual,
            symmetry_deviation: joint.symmetry_deviation,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.p_bar.len()
    }

    /// `p = vec(P_p)`.
    pub fn p(&self) -> DVector<f64> {
        linalg::vec_of(&self.p_p)
    }

    pub fn fusion(&self) -> Result<FusionMoments> {
        fusion_moments(&self.p_bar, &self.p_p)
    }

    /// Minimum eigenvalue of `C_p` and `‖C_p 𝟙‖∞`.
    pub fn c_p_diagnostics(&self) -> (f64, f64) {
        let n = self.n_agents();
        let ones = DVector::repeat(n, 1.0);
        (
            linalg::min_symmetric_eigenvalue(&self.c_p),
            linalg::max_abs_vec(&(&self.c_p * ones)),
        )
    }
}
