use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::theory::AgentDataProfile;

/// The shared parameter `w^o` and the per-agent data statistics.
#[derive(Clone, Debug)]
pub struct ScenarioTruth {
    pub w_o: Vec<Complex64>,
    pub profiles: Vec<AgentDataProfile>,
    /// Real Gaussian regressors and noise instead of circular complex ones.
    pub real_data: bool,
    samplers: Vec<AgentSampler>,
}

impl ScenarioTruth {
    pub fn new(w_o: Vec<Complex64>, profiles: Vec<AgentDataProfile>, real_data: bool) -> Result<Self> {
        if w_o.is_empty() {
            return Err(Error::validation("w_o", "parameter dimension must be at least 1"));
        }
        let samplers = profiles
            .iter()
            .map(|p| {
                if p.dim() != w_o.len() {
                    return Err(Error::validation(
                        "r_u",
                        format!("regressor dimension {} does not match w_o ({})", p.dim(), w_o.len()),
                    ));
                }
                AgentSampler::new(p, real_data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            w_o,
            profiles,
            real_data,
            samplers,
        })
    }

    pub fn dim(&self) -> usize {
        self.w_o.len()
    }

    pub fn n_agents(&self) -> usize {
        self.profiles.len()
    }

    pub fn sampler(&self, k: usize) -> &AgentSampler {
        &self.samplers[k]
    }
}

/// Draws `(u, d)` for one agent: `u = z Lᵀ` with `L Lᵀ = R_u`, `d = u w^o + ξ`.
#[derive(Clone, Debug)]
pub struct AgentSampler {
    chol: DMatrix<f64>,
    noise_std: f64,
    real: bool,
}

impl AgentSampler {
    pub fn new(profile: &AgentDataProfile, real: bool) -> Result<Self> {
        profile.validate()?;
        let chol = profile
            .r_u
            .clone()
            .cholesky()
            .ok_or_else(|| Error::validation("r_u", "Cholesky factorization failed"))?
            .unpack();
        Ok(Self {
            chol,
            noise_std: profile.sigma_xi2.sqrt(),
            real,
        })
    }

    /// Unit-variance scalar: circular complex (real and imaginary parts of
    /// variance ½) or real.
    fn unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        if self.real {
            Complex64::new(rng.sample(StandardNormal), 0.0)
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    }

    /// Fills `u` (length `M`) and returns `d`.
    pub fn sample_into<R: Rng + ?Sized>(&self, w_o: &[Complex64], rng: &mut R, u: &mut [Complex64]) -> Complex64 {
        let m = u.len();
        let mut z = [Complex64::new(0.0, 0.0); 16];
        let mut z_heap;
        let z: &mut [Complex64] = if m <= 16 {
            &mut z[..m]
        } else {
            z_heap = vec![Complex64::new(0.0, 0.0); m];
            &mut z_heap
        };
        for zi in z.iter_mut() {
            *zi = self.unit(rng);
        }
        for (j, uj) in u.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, zc) in z.iter().enumerate().take(j + 1) {
                acc += zc * self.chol[(j, c)];
            }
            *uj = acc;
        }
        let clean: Complex64 = u.iter().zip(w_o).map(|(a, b)| a * b).sum();
        clean + self.unit(rng) * self.noise_std
    }
}

/// One draw `(u, d)` for a single agent.
pub fn generate_sample<R: Rng + ?Sized>(
    profile: &AgentDataProfile,
    w_o: &[Complex64],
    real: bool,
    rng: &mut R,
) -> Result<(Vec<Complex64>, Complex64)> {
    let sampler = AgentSampler::new(profile, real)?;
    let mut u = vec![Complex64::new(0.0, 0.0); w_o.len()];
    let d = sampler.sample_into(w_o, rng, &mut u);
    Ok((u, d))
}

/// Regressors and observations of every agent at one iteration.
#[derive(Clone, Debug)]
pub struct IterationData {
    /// Stacked rows `u_k`, length `N·M`.
    pub u: Vec<Complex64>,
    pub d: Vec<Complex64>,
    m: usize,
}

impl IterationData {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); n * m],
            d: vec![Complex64::new(0.0, 0.0); n],
            m,
        }
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, truth: &ScenarioTruth, rng: &mut R) {
        let m = self.m;
        for k in 0..self.d.len() {
            self.d[k] = truth
                .sampler(k)
                .sample_into(&truth.w_o, rng, &mut self.u[k * m..(k + 1) * m]);
        }
    }

    pub fn regressor(&self, k: usize) -> &[Complex64] {
        &self.u[k * self.m..(k + 1) * self.m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use nalgebra::DVector;

    fn w_o() -> Vec<Complex64> {
        vec![Complex64::new(0.6, -0.2), Complex64::new(-0.3, 0.7)]
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let p = AgentDataProfile {
            r_u: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
            sigma_xi2: 1e-300,
        };
        let mut rng = stream(1, 0, Purpose::Data);
        let (u, d) = generate_sample(&p, &w_o(), false, &mut rng).unwrap();
        let clean: Complex64 = u.iter().zip(&w_o()).map(|(a, b)| a * b).sum();
        assert!((d - clean).norm() < 1e-140);
    }

    #[test]
    fn empirical_regressor_covariance_and_noise_power() {
        let r_u = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let p = AgentDataProfile {
            r_u: r_u.clone(),
            sigma_xi2: 0.05,
        };
        let sampler = AgentSampler::new(&p, false).unwrap();
        let mut rng = stream(2, 0, Purpose::Data);
        let draws = 100_000;
        let mut cov = nalgebra::DMatrix::<Complex64>::zeros(2, 2);
        let mut noise = 0.0;
        let mut u = [Complex64::new(0.0, 0.0); 2];
        for _ in 0..draws {
            let d = sampler.sample_into(&w_o(), &mut rng, &mut u);
            for i in 0..2 {
                for j in 0..2 {
                    cov[(i, j)] += u[i].conj() * u[j];
                }
            }
            let clean: Complex64 = u.iter().zip(&w_o()).map(|(a, b)| a * b).sum();
            noise += (d - clean).norm_sqr();
        }
        for i in 0..2 {
            for j in 0..2 {
                let c = cov[(i, j)] / draws as f64;
                assert!((c - Complex64::new(r_u[(i, j)], 0.0)).norm() < 0.02, "{i}{j}: {c}");
            }
        }
        let noise = noise / draws as f64;
        assert!((noise / 0.05 - 1.0).abs() < 0.05, "{noise}");
    }

    #[test]
    fn real_mode_has_no_imaginary_part() {
        let p = AgentDataProfile::white(3, 1.5, 0.01);
        let w = vec![Complex64::new(1.0, 0.0); 3];
        let mut rng = stream(3, 0, Purpose::Data);
        let (u, d) = generate_sample(&p, &w, true, &mut rng).unwrap();
        assert!(u.iter().all(|x| x.im == 0.0) && d.im == 0.0);
    }
}
