use nalgebra::DVector;
use rand::Rng;

use crate::network::{BernoulliAsyncModel, SparseCombination};

/// Draws fusion vectors `φ = (1/N)(A'_1 ⋯ A'_t) 𝟙` from independent
/// realizations of the combination matrix. `E φ = p̄` and `E(φ ⊗ φ) → p`
/// as `t` grows.
#[derive(Clone, Debug)]
pub struct FusionSampler {
    t: usize,
    comb: SparseCombination,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FusionSampler {
    pub fn new(n: usize, t: usize) -> Self {
        Self {
            t,
            comb: SparseCombination::new(n),
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&mut self, model: &BernoulliAsyncModel, rng: &mut R, out: &mut [f64]) {
        let n = self.x.len();
        self.x.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        for _ in 0..self.t {
            model.sample_combination_into(rng, &mut self.comb);
            self.comb.apply(&self.x, &mut self.y);
            std::mem::swap(&mut self.x, &mut self.y);
        }
        out.copy_from_slice(&self.x);
    }
}

pub fn sample_fusion_vector<R: Rng + ?Sized>(model: &BernoulliAsyncModel, t: usize, rng: &mut R) -> DVector<f64> {
    let n = model.n_agents();
    let mut sampler = FusionSampler::new(n, t);
    let mut out = vec![0.0; n];
    sampler.sample_into(model, rng, &mut out);
    DVector::from_vec(out)
}
