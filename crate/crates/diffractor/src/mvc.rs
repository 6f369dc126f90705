//! Multivariate-calibrated baseline: add noise with density proportional to
//! `exp(-eps * ||z||)` directly in embedding space, then remap to the
//! nearest vocabulary word by exhaustive scan.
//!
//! This is the high-dimensional mechanism whose per-word cost the list
//! approach removes; it exists here purely as the speed/memory comparator,
//! so the nearest-neighbor remap deliberately stays a full O(V*d) scan.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::embedding::{euclidean_sq_mixed, EmbeddingModel};
use crate::error::{Error, Result};

pub struct MvcMechanism<'a> {
    model: &'a EmbeddingModel,
    epsilon: f64,
    norm_dist: Gamma<f64>,
}

impl<'a> MvcMechanism<'a> {
    pub fn new(model: &'a EmbeddingModel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(vec![format!(
                "epsilon: must be a positive finite real, got {epsilon}"
            )]));
        }
        let norm_dist = Gamma::new(model.dim() as f64, 1.0 / epsilon)
            .map_err(|e| Error::Contract(format!("invalid gamma parameters: {e}")))?;
        Ok(MvcMechanism { model, epsilon, norm_dist })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn model(&self) -> &EmbeddingModel {
        self.model
    }

    /// Noise vector: uniform direction on the d-sphere scaled by a
    /// Gamma(d, 1/eps) norm, which is exactly the `exp(-eps*||z||)` density.
    pub fn sample_noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        let d = self.model.dim();
        let mut z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mut norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        while norm == 0.0 {
            for x in &mut z {
                *x = StandardNormal.sample(rng);
            }
            norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        let r = self.norm_dist.sample(rng);
        for x in &mut z {
            *x *= r / norm;
        }
        z
    }

    /// Perturb a vocabulary word: embed, add noise, remap to the nearest
    /// vocabulary word (ties to the smallest vocabulary index).
    pub fn perturb(&self, word: &str, rng: &mut impl Rng) -> Result<&str> {
        let idx = self
            .model
            .index_of(word)
            .ok_or_else(|| Error::Membership(word.into()))?;
        let noise = self.sample_noise(rng);
        let base = self.model.vector(idx);
        let noisy: Vec<f64> = base.iter().zip(&noise).map(|(v, z)| *v as f64 + z).collect();
        let mut best = (f64::INFINITY, usize::MAX);
        for cand in 0..self.model.len() {
            let d2 = euclidean_sq_mixed(&noisy, self.model.vector(cand));
            if (d2, cand) < best {
                best = (d2, cand);
            }
        }
        Ok(self.model.word(best.1))
    }
}
