//! Closed-form rate and steady-state predictors.
//!
//! Per agent, the Hessian and gradient-noise covariance of the MSE cost are
//! `H_k = diag{R_u,k, R_u,kᵀ}` and `R_k = σ²_ξ,k H_k`. With the Perron
//! moments of the combination process they give
//!
//! * `H = Σ_k p̄_k μ̄_k H_k`, the mean-rate matrix (`ρ₀ = 1 − λ_min(H)`),
//! * `R_sync = Σ_k p̄_k² μ̄_k² R_k` and `R_async = Σ_k p_kk (μ̄_k² + c_μ,kk) R_k`,
//! * `F_sync`, `F_async`, whose spectral radii are the mean-square rates,
//! * the steady-state MSD `¼ Tr(H⁻¹ R)`.
//!
//! The centralized solution with matched fusion moments uses the same
//! builders with `(π̄, C_π + π̄π̄ᵀ)` in place of `(p̄, P_p)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, rows};
use crate::moments::MomentSet;
use crate::network::BernoulliAsyncModel;
use crate::rng::{stream, Purpose};

/// Second-order statistics of one agent's streaming data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentDataProfile {
    /// Regressor covariance `R_u,k` (real symmetric positive-definite).
    #[serde(with = "rows")]
    pub r_u: DMatrix<f64>,
    /// Noise variance `σ²_ξ,k`.
    pub sigma_xi2: f64,
}

impl AgentDataProfile {
    /// `R_u = σ_u² I_M`.
    pub fn white(m: usize, sigma_u2: f64, sigma_xi2: f64) -> Self {
        Self {
            r_u: DMatrix::identity(m, m) * sigma_u2,
            sigma_xi2,
        }
    }

    pub fn dim(&self) -> usize {
        self.r_u.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.r_u.nrows();
        if m == 0 || self.r_u.ncols() != m {
            return Err(Error::validation(
                "r_u",
                format!("must be square, got {:?}", self.r_u.shape()),
            ));
        }
        if linalg::max_abs(&(&self.r_u - self.r_u.transpose())) > 1e-12 * linalg::max_abs(&self.r_u) {
            return Err(Error::validation("r_u", "must be symmetric"));
        }
        let min = linalg::min_symmetric_eigenvalue(&self.r_u);
        if !(min > 0.0) {
            return Err(Error::validation(
                "r_u",
                format!("must be positive-definite (min eigenvalue {min:e})"),
            ));
        }
        if !(self.sigma_xi2 > 0.0 && self.sigma_xi2.is_finite()) {
            return Err(Error::validation(
                "sigma_xi2",
                format!("must be positive, got {}", self.sigma_xi2),
            ));
        }
        Ok(())
    }

    /// `H_k = diag{R_u, R_uᵀ}`.
    pub fn hessian(&self) -> DMatrix<f64> {
        linalg::augment(&self.r_u)
    }

    /// `R_k = σ²_ξ diag{R_u, R_uᵀ}`.
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        self.hessian() * self.sigma_xi2
    }

    fn extreme_eigenvalues(&self) -> (f64, f64) {
        let ev = linalg::symmetric_eigenvalues(&self.r_u);
        (ev[0], ev[ev.len() - 1])
    }
}

fn check_profiles(n: usize, profiles: &[AgentDataProfile]) -> Result<usize> {
    if profiles.len() != n {
        return Err(Error::validation(
            "profiles",
            format!("expected {n} agent profiles, got {}", profiles.len()),
        ));
    }
    let m = profiles[0].dim();
    for p in profiles {
        p.validate()?;
        if p.dim() != m {
            return Err(Error::validation(
                "r_u",
                "all agents must share the parameter dimension",
            ));
        }
    }
    Ok(m)
}

/// Moments of the Bernoulli step-sizes `μ_k(i) ∈ {0, μ_k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSizeMoments {
    /// `μ̄_k = q_k μ_k`
    pub mu_bar: Vec<f64>,
    /// `μ̄_k^(2) = q_k μ_k²`
    pub mu2_bar: Vec<f64>,
    /// `μ̄_k^(4) = q_k μ_k⁴`
    pub mu4_bar: Vec<f64>,
    /// `c_μ,kk = q_k (1 − q_k) μ_k²`; cross terms vanish.
    pub c_mu_diag: Vec<f64>,
}

impl StepSizeMoments {
    pub fn n_agents(&self) -> usize {
        self.mu_bar.len()
    }

    /// `ν = max_k √(μ̄_k^(4)) / μ̄_k`.
    pub fn nu(&self) -> f64 {
        self.mu4_bar
            .iter()
            .zip(&self.mu_bar)
            .filter(|(_, m1)| **m1 > 0.0)
            .map(|(m4, m1)| m4.sqrt() / m1)
            .fold(0.0, f64::max)
    }

    /// `E μ_k(i)² = μ̄_k² + c_μ,kk`.
    fn second_moment(&self, k: usize) -> f64 {
        self.mu_bar[k] * self.mu_bar[k] + self.c_mu_diag[k]
    }
}

pub fn step_size_moments(model: &BernoulliAsyncModel) -> StepSizeMoments {
    let (q, mu) = (model.q(), model.mu());
    StepSizeMoments {
        mu_bar: q.iter().zip(mu).map(|(q, m)| q * m).collect(),
        mu2_bar: q.iter().zip(mu).map(|(q, m)| q * m * m).collect(),
        mu4_bar: q.iter().zip(mu).map(|(q, m)| q * m.powi(4)).collect(),
        c_mu_diag: q.iter().zip(mu).map(|(q, m)| q * (1.0 - q) * m * m).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub ms_stable: bool,
    pub fourth_stable: bool,
    pub nu: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Mean-square and fourth-order step-size conditions, per agent.
pub fn stability_check(moments: &StepSizeMoments, profiles: &[AgentDataProfile], alpha: f64) -> StabilityReport {
    let mut ms_stable = true;
    let mut fourth_stable = true;
    for (k, profile) in profiles.iter().enumerate() {
        let m1 = moments.mu_bar[k];
        if m1 <= 0.0 {
            continue;
        }
        let (lmin, lmax) = profile.extreme_eigenvalues();
        ms_stable &= moments.mu2_bar[k] / m1 < lmin / (lmax * lmax + alpha);
        fourth_stable &= moments.mu4_bar[k].sqrt() / m1 < lmin / (3.0 * lmax * lmax + 4.0 * alpha);
    }
    let warning = (alpha == 0.0).then(|| {
        "alpha = 0: the gradient-noise constant is unknown, stability conditions are necessary only".to_string()
    });
    StabilityReport {
        ms_stable,
        fourth_stable,
        nu: moments.nu(),
        alpha,
        warning,
    }
}

/// `H = Σ_k w_k μ̄_k H_k` with `w = p̄` (or `π̄` for the centralized solution).
pub fn build_h(
    weights: &DVector<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
) -> Result<DMatrix<f64>> {
    let m = check_profiles(weights.len(), profiles)?;
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    for (k, profile) in profiles.iter().enumerate() {
        h += profile.hessian() * (weights[k] * moments.mu_bar[k]);
    }
    let min = linalg::min_symmetric_eigenvalue(&h);
    if !(min > 0.0) {
        return Err(Error::SingularH(min));
    }
    Ok(h)
}

/// `R_sync = Σ_k p̄_k² μ̄_k² R_k`.
pub fn build_r_sync(
    p_bar: &DVector<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
) -> Result<DMatrix<f64>> {
    let m = check_profiles(p_bar.len(), profiles)?;
    let mut r = DMatrix::zeros(2 * m, 2 * m);
    for (k, profile) in profiles.iter().enumerate() {
        let c = p_bar[k] * p_bar[k] * moments.mu_bar[k] * moments.mu_bar[k];
        r += profile.noise_covariance() * c;
    }
    Ok(r)
}

/// `R_async = Σ_k p_kk (μ̄_k² + c_μ,kk) R_k`, with `p_kk` the diagonal of `P_p`
/// (or of `C_π + π̄π̄ᵀ`).
pub fn build_r_async(
    p_p: &DMatrix<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
) -> Result<DMatrix<f64>> {
    let m = check_profiles(p_p.nrows(), profiles)?;
    let mut r = DMatrix::zeros(2 * m, 2 * m);
    for (k, profile) in profiles.iter().enumerate() {
        r += profile.noise_covariance() * (p_p[(k, k)] * moments.second_moment(k));
    }
    Ok(r)
}

fn mean_d(moments: &StepSizeMoments, profiles: &[AgentDataProfile]) -> Vec<DMatrix<f64>> {
    profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let h = p.hessian();
            DMatrix::identity(h.nrows(), h.ncols()) - h * moments.mu_bar[k]
        })
        .collect()
}

/// `F_sync = Σ_ℓ Σ_k p̄_ℓ p̄_k (D̄_ℓᵀ ⊗ D̄_k)` with `D̄_k = I − μ̄_k H_k`.
pub fn build_f_sync(
    p_bar: &DVector<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
) -> Result<DMatrix<f64>> {
    let outer = p_bar * p_bar.transpose();
    build_f(&outer, moments, profiles, false)
}

/// `F_async = Σ_ℓ Σ_k p_ℓk (D̄_ℓᵀ ⊗ D̄_k + c_μ,ℓk H_ℓᵀ ⊗ H_k)`.
pub fn build_f_async(
    p_p: &DMatrix<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
) -> Result<DMatrix<f64>> {
    build_f(p_p, moments, profiles, true)
}

fn build_f(
    weights: &DMatrix<f64>,
    moments: &StepSizeMoments,
    profiles: &[AgentDataProfile],
    with_step_covariance: bool,
) -> Result<DMatrix<f64>> {
    let n = weights.nrows();
    let m = check_profiles(n, profiles)?;
    let d = mean_d(moments, profiles);
    let dim = 4 * m * m;
    let mut f = DMatrix::zeros(dim, dim);
    for l in 0..n {
        let dl_t = d[l].transpose();
        for k in 0..n {
            let w = weights[(l, k)];
            if w != 0.0 {
                f += dl_t.kronecker(&d[k]) * w;
            }
        }
        if with_step_covariance && moments.c_mu_diag[l] != 0.0 {
            let h = profiles[l].hessian();
            f += h.transpose().kronecker(&h) * (weights[(l, l)] * moments.c_mu_diag[l]);
        }
    }
    Ok(f)
}

/// `¼ Tr(H⁻¹ R)`.
pub fn msd_general(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularH(linalg::min_symmetric_eigenvalue(h)))?;
    Ok(0.25 * chol.solve(r).trace())
}

fn uniform_mu(model: &BernoulliAsyncModel) -> Result<f64> {
    model
        .uniform_mu()
        .ok_or_else(|| Error::InvalidModel("the LMS closed forms need a common step-size across agents".into()))
}

/// `(μ/2) Tr[(Σ_k p̄_k q_k R_u,k)⁻¹ (Σ_k c_k R_u,k)]`.
fn lms_closed_form(
    mu: f64,
    p_bar: &DVector<f64>,
    model: &BernoulliAsyncModel,
    profiles: &[AgentDataProfile],
    numerator_weight: impl Fn(usize) -> f64,
) -> Result<f64> {
    let m = check_profiles(model.n_agents(), profiles)?;
    let mut denom = DMatrix::zeros(m, m);
    let mut numer = DMatrix::zeros(m, m);
    for (k, profile) in profiles.iter().enumerate() {
        denom += &profile.r_u * (p_bar[k] * model.q()[k]);
        numer += &profile.r_u * numerator_weight(k);
    }
    let lu = denom.lu();
    let solved = lu.solve(&numer).ok_or(Error::SingularAggregateCovariance)?;
    Ok(0.5 * mu * solved.trace())
}

/// Asynchronous network MSD for LMS with a common step-size.
pub fn msd_lms_async(
    p_bar: &DVector<f64>,
    p_p: &DMatrix<f64>,
    model: &BernoulliAsyncModel,
    profiles: &[AgentDataProfile],
) -> Result<f64> {
    let mu = uniform_mu(model)?;
    lms_closed_form(mu, p_bar, model, profiles, |k| {
        p_p[(k, k)] * model.q()[k] * profiles[k].sigma_xi2
    })
}

/// Synchronous network MSD for LMS with a common step-size.
pub fn msd_lms_sync(p_bar: &DVector<f64>, model: &BernoulliAsyncModel, profiles: &[AgentDataProfile]) -> Result<f64> {
    let mu = uniform_mu(model)?;
    lms_closed_form(mu, p_bar, model, profiles, |k| {
        let q = model.q()[k];
        p_bar[k] * p_bar[k] * q * q * profiles[k].sigma_xi2
    })
}

/// The four steady-state MSD predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdSet {
    pub dist_sync: f64,
    pub dist_async: f64,
    pub cent_sync: f64,
    pub cent_async: f64,
}

impl MsdSet {
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dist_sync: f(self.dist_sync),
            dist_async: f(self.dist_async),
            cent_sync: f(self.cent_sync),
            cent_async: f(self.cent_async),
        }
    }

    pub fn to_db(&self) -> Self {
        self.map(linalg::db)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryReport {
    pub nu: f64,
    /// `ρ₀ = 1 − λ_min(H)`.
    pub rho_mean: f64,
    pub rho_ms_sync: f64,
    pub rho_ms_async: f64,
    pub msd_db: MsdSet,
    pub msd_linear: MsdSet,
    /// Closed forms for LMS with a common step-size, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msd_lms: Option<LmsClosedForm>,
    pub stability: StabilityReport,
    /// `ρ(F) ≥ 1` for either operator.
    pub unstable_operator: bool,
    #[serde(skip)]
    pub h: DMatrix<f64>,
    #[serde(skip)]
    pub r_sync: DMatrix<f64>,
    #[serde(skip)]
    pub r_async: DMatrix<f64>,
    #[serde(skip)]
    pub f_sync: DMatrix<f64>,
    #[serde(skip)]
    pub f_async: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LmsClosedForm {
    pub sync: f64,
    pub r#async: f64,
}

impl TheoryReport {
    pub fn compute(
        model: &BernoulliAsyncModel,
        moments: &MomentSet,
        profiles: &[AgentDataProfile],
        alpha: f64,
    ) -> Result<Self> {
        let steps = step_size_moments(model);
        let stability = stability_check(&steps, profiles, alpha);

        let h = build_h(&moments.p_bar, &steps, profiles)?;
        let r_sync = build_r_sync(&moments.p_bar, &steps, profiles)?;
        let r_async = build_r_async(&moments.p_p, &steps, profiles)?;
        let f_sync = build_f_sync(&moments.p_bar, &steps, profiles)?;
        let f_async = build_f_async(&moments.p_p, &steps, profiles)?;

        let fusion = moments.fusion()?;
        let h_c = build_h(&fusion.pi_bar, &steps, profiles)?;
        let r_c_sync = build_r_sync(&fusion.pi_bar, &steps, profiles)?;
        let r_c_async = build_r_async(&fusion.second_moment(), &steps, profiles)?;

        let msd_linear = MsdSet {
            dist_sync: msd_general(&h, &r_sync)?,
            dist_async: msd_general(&h, &r_async)?,
            cent_sync: msd_general(&h_c, &r_c_sync)?,
            cent_async: msd_general(&h_c, &r_c_async)?,
        };
        let msd_lms = match model.uniform_mu() {
            Some(_) => Some(LmsClosedForm {
                sync: msd_lms_sync(&moments.p_bar, model, profiles)?,
                r#async: msd_lms_async(&moments.p_bar, &moments.p_p, model, profiles)?,
            }),
            None => None,
        };
        let rho_ms_sync = linalg::symmetric_spectral_radius(&f_sync);
        let rho_ms_async = linalg::symmetric_spectral_radius(&f_async);
        Ok(Self {
            nu: steps.nu(),
            rho_mean: 1.0 - linalg::min_symmetric_eigenvalue(&h),
            rho_ms_sync,
            rho_ms_async,
            msd_db: msd_linear.to_db(),
            msd_linear,
            msd_lms,
            stability,
            unstable_operator: rho_ms_sync >= 1.0 || rho_ms_async >= 1.0,
            h,
            r_sync,
            r_async,
            f_sync,
            f_async,
        })
    }
}

/// Largest network dimension `N·2M` accepted by [`estimate_full_f_mc`].
pub const FULL_F_DIM_LIMIT: usize = 64;
const FULL_F_BATCHES: usize = 20;
const FULL_F_BOOTSTRAP: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct FullFEstimate {
    pub rho_hat: f64,
    /// Bootstrap standard error over batch means.
    pub stderr: f64,
    pub samples: usize,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

/// Realized long-term error operator `𝓑 = 𝓐ᵀ(I − 𝓜𝓗)`; block `(k, ℓ)` is
/// `a_ℓk (I − μ_ℓ H_ℓ)`.
fn network_operator(a: &DMatrix<f64>, step_sizes: &[f64], hessians: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = a.nrows();
    let b = hessians[0].nrows();
    let mut op = DMatrix::zeros(n * b, n * b);
    for l in 0..n {
        let local = DMatrix::identity(b, b) - &hessians[l] * step_sizes[l];
        for k in 0..n {
            let w = a[(l, k)];
            if w != 0.0 {
                op.view_mut((k * b, l * b), (b, b)).copy_from(&(&local * w));
            }
        }
    }
    op
}

/// Monte Carlo estimate of `𝓕 = E(𝓑ᵀ ⊗ 𝓑*)` and its spectral radius.
pub fn estimate_full_f_mc(
    model: &BernoulliAsyncModel,
    profiles: &[AgentDataProfile],
    samples: usize,
    seed: u64,
) -> Result<FullFEstimate> {
    let m = check_profiles(model.n_agents(), profiles)?;
    let dim = model.n_agents() * 2 * m;
    if dim > FULL_F_DIM_LIMIT {
        return Err(Error::DimensionGuard {
            dim,
            limit: FULL_F_DIM_LIMIT,
        });
    }
    if samples < 1000 {
        return Err(Error::validation(
            "samples",
            format!("need at least 1000, got {samples}"),
        ));
    }
    let hessians: Vec<_> = profiles.iter().map(AgentDataProfile::hessian).collect();
    let mut rng = stream(seed, 0, Purpose::Estimator);
    let batch_len = samples / FULL_F_BATCHES;
    let mut batches = Vec::with_capacity(FULL_F_BATCHES);
    let mut total = DMatrix::zeros(dim * dim, dim * dim);
    for b in 0..FULL_F_BATCHES {
        let len = if b + 1 == FULL_F_BATCHES {
            samples - batch_len * (FULL_F_BATCHES - 1)
        } else {
            batch_len
        };
        let mut acc = DMatrix::zeros(dim * dim, dim * dim);
        for _ in 0..len {
            let r = model.sample_realization(&mut rng);
            let op_t = network_operator(&r.matrix, &r.step_sizes, &hessians).transpose();
            // real data: 𝓑* = 𝓑ᵀ
            acc += op_t.kronecker(&op_t);
        }
        total += &acc;
        batches.push(acc / len as f64);
    }
    let matrix = total / samples as f64;
    let rho_hat = linalg::spectral_radius(&matrix);

    let mut boot_rng = stream(seed, 1, Purpose::Estimator);
    let mut stats = Vec::with_capacity(FULL_F_BOOTSTRAP);
    for _ in 0..FULL_F_BOOTSTRAP {
        let mut acc = DMatrix::zeros(dim * dim, dim * dim);
        for _ in 0..FULL_F_BATCHES {
            acc += &batches[boot_rng.gen_range(0..FULL_F_BATCHES)];
        }
        stats.push(linalg::spectral_radius(&(acc / FULL_F_BATCHES as f64)));
    }
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok(FullFEstimate {
        rho_hat,
        stderr: var.sqrt(),
        samples,
        matrix,
    })
}
