//! Index-level noise mechanisms.
//!
//! Both mechanisms perturb a list index inside `[0, V-1]`:
//!
//! * the truncated two-sided geometric mechanism adds integer noise with
//!   `P[X = x] = ((e^eps - 1)/(e^eps + 1)) * e^(-eps*|x|)` and clamps the
//!   result into range;
//! * the one-dimensional truncated exponential mechanism scores candidates
//!   within a threshold `gamma` by negative index distance, reserves one
//!   bucket for everything beyond the threshold, and selects by Gumbel-max.
//!
//! Each sampler has a closed-form companion (`*_exact_pmf`) that computes the
//! exact output distribution; the privacy-ratio tests run against those, not
//! against simulation.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Gumbel};

use crate::error::{Error, Result};

/// Default TEM tail-mass parameter.
pub const DEFAULT_BETA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Geometric,
    Tem1D,
}

impl MechanismKind {
    pub fn tag(&self) -> &'static str {
        match self {
            MechanismKind::Geometric => "geometric",
            MechanismKind::Tem1D => "tem",
        }
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geometric" | "geo" | "1-d_g" => Ok(MechanismKind::Geometric),
            "tem" | "tem1d" | "1-d_t" => Ok(MechanismKind::Tem1D),
            other => Err(Error::Config(vec![format!(
                "mechanism: unknown kind {other:?} (expected geometric|tem)"
            )])),
        }
    }
}

/// Mechanism kind plus its parameters and the master RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    pub epsilon: f64,
    pub beta: f64,
    pub rng_seed: u64,
}

impl MechanismConfig {
    pub fn geometric(epsilon: f64, rng_seed: u64) -> Result<Self> {
        let cfg = MechanismConfig { kind: MechanismKind::Geometric, epsilon, beta: DEFAULT_BETA, rng_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tem(epsilon: f64, beta: f64, rng_seed: u64) -> Result<Self> {
        let cfg = MechanismConfig { kind: MechanismKind::Tem1D, epsilon, beta, rng_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bad.push(format!("epsilon: must be a positive finite real, got {}", self.epsilon));
        }
        if self.kind == MechanismKind::Tem1D && !(self.beta > 0.0 && self.beta < 0.5) {
            bad.push(format!("beta: must lie in (0, 0.5), got {}", self.beta));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Perturb a list index inside a vocabulary of size `v`.
    pub fn perturb_index(&self, index: usize, v: usize, rng: &mut impl Rng) -> Result<usize> {
        match self.kind {
            MechanismKind::Geometric => perturb_index_geometric(index, self.epsilon, v, rng),
            MechanismKind::Tem1D => perturb_index_tem(index, self.epsilon, self.beta, v, rng),
        }
    }

    /// Exact output distribution of [`Self::perturb_index`].
    pub fn exact_pmf(&self, index: usize, v: usize) -> Result<Vec<f64>> {
        check_index(index, v)?;
        Ok(match self.kind {
            MechanismKind::Geometric => geometric_exact_pmf(index, self.epsilon, v),
            MechanismKind::Tem1D => tem_exact_pmf(index, self.epsilon, self.beta, v),
        })
    }
}

fn check_index(index: usize, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Contract("vocabulary size must be at least 1".into()));
    }
    if index >= v {
        return Err(Error::Contract(format!(
            "index {index} out of range for vocabulary of {v}"
        )));
    }
    Ok(())
}

/// Draw from the two-sided geometric distribution
/// `P[X = x] = ((e^eps - 1)/(e^eps + 1)) * e^(-eps*|x|)`, sampled as the
/// difference of two i.i.d. geometric variables with success probability
/// `1 - e^(-eps)`. The difference construction reproduces the target
/// distribution exactly; no inverse-CDF truncation is involved.
pub fn sample_two_sided_geometric(epsilon: f64, rng: &mut impl Rng) -> i64 {
    assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive");
    let p = 1.0 - (-epsilon).exp();
    if p >= 1.0 {
        // e^-eps underflows against 1.0; the distribution is a point mass.
        return 0;
    }
    let geo = Geometric::new(p).expect("p in (0,1)");
    let a = geo.sample(rng) as i64;
    let b = geo.sample(rng) as i64;
    a - b
}

/// Clamp a noisy index into `[0, v-1]`.
pub fn truncate_index(x: i64, v: usize) -> usize {
    x.clamp(0, v as i64 - 1) as usize
}

/// Truncated geometric mechanism: add two-sided geometric noise to `index`
/// and clamp into the index range. The clamp is post-processing, so the
/// privacy bound of the additive mechanism carries over; boundary indices
/// accumulate the tail mass.
pub fn perturb_index_geometric(
    index: usize,
    epsilon: f64,
    v: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    check_index(index, v)?;
    let noise = sample_two_sided_geometric(epsilon, rng);
    Ok(truncate_index(index as i64 + noise, v))
}

/// Exact output distribution of the truncated geometric mechanism, from the
/// closed form of the noise PMF and its geometric tail sums.
pub fn geometric_exact_pmf(index: usize, epsilon: f64, v: usize) -> Vec<f64> {
    assert!(index < v, "index out of range");
    if v == 1 {
        return vec![1.0];
    }
    let q = (-epsilon).exp();
    let c = (1.0 - q) / (1.0 + q);
    // Sum over x >= m of c*q^x for m >= 1; by symmetry also P[x <= -m].
    let tail = |m: usize| c * q.powi(m as i32) / (1.0 - q);
    let mut pmf = vec![0.0; v];
    for (j, slot) in pmf.iter_mut().enumerate() {
        let d = index.abs_diff(j);
        // Mass clamped onto 0 is P[x <= -index]; onto V-1 is P[x >= V-1-index].
        *slot = if j == 0 {
            if index == 0 {
                c + tail(1)
            } else {
                tail(index)
            }
        } else if j == v - 1 {
            if index == v - 1 {
                c + tail(1)
            } else {
                tail(v - 1 - index)
            }
        } else {
            c * q.powi(d as i32)
        };
    }
    pmf
}

/// TEM truncation threshold `gamma = (2/eps) * ln((1-beta)(V-1)/beta)`,
/// clamped to be non-negative.
pub fn tem_gamma(epsilon: f64, beta: f64, v: usize) -> f64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(beta > 0.0 && beta < 0.5, "beta must lie in (0, 0.5)");
    if v <= 1 {
        return 0.0;
    }
    let g = (2.0 / epsilon) * ((1.0 - beta) * (v as f64 - 1.0) / beta).ln();
    g.max(0.0)
}

/// Candidate window `[lo, hi]` = indices within `gamma` of `index`. Both the
/// sampler and the exact PMF use this one computation.
fn tem_window(index: usize, gamma: f64, v: usize) -> (usize, usize) {
    let lo = (index as f64 - gamma).ceil().max(0.0) as usize;
    let hi = ((index as f64 + gamma).floor() as usize).min(v - 1);
    (lo, hi)
}

/// One-dimensional truncated exponential mechanism. Candidates within
/// `gamma` of the input index are scored by negative index distance; if any
/// indices fall outside the window they are represented by one tail bucket
/// with score `-gamma + (2/eps)*ln(#outside)`. Gumbel noise of scale
/// `2/eps` is added to every score and the argmax wins; a tail win releases
/// a uniformly random outside index.
pub fn perturb_index_tem(
    index: usize,
    epsilon: f64,
    beta: f64,
    v: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    check_index(index, v)?;
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Contract(format!("beta must lie in (0, 0.5), got {beta}")));
    }
    if v == 1 {
        return Ok(0);
    }
    let gamma = tem_gamma(epsilon, beta, v);
    let (lo, hi) = tem_window(index, gamma, v);
    let outside = v - (hi - lo + 1);
    let gumbel = Gumbel::new(0.0, 2.0 / epsilon).expect("valid scale");

    let mut best_score = f64::NEG_INFINITY;
    let mut best: Option<usize> = None; // None = tail bucket
    for j in lo..=hi {
        let score = -(index.abs_diff(j) as f64) + gumbel.sample(rng);
        if score > best_score {
            best_score = score;
            best = Some(j);
        }
    }
    if outside > 0 {
        let score = -gamma + (2.0 / epsilon) * (outside as f64).ln() + gumbel.sample(rng);
        if score > best_score {
            best = None;
        }
    }
    Ok(match best {
        Some(j) => j,
        None => {
            // Uniform over [0, lo) ∪ (hi, v-1].
            let k = rng.random_range(0..outside);
            if k < lo {
                k
            } else {
                hi + 1 + (k - lo)
            }
        }
    })
}

/// Exact output distribution of the 1-D TEM via the Gumbel-max/softmax
/// identity: selection probabilities are proportional to
/// `exp(score * eps/2)`, and the tail bucket's mass spreads uniformly over
/// the outside indices.
pub fn tem_exact_pmf(index: usize, epsilon: f64, beta: f64, v: usize) -> Vec<f64> {
    assert!(index < v, "index out of range");
    assert!(beta > 0.0 && beta < 0.5, "beta must lie in (0, 0.5)");
    if v == 1 {
        return vec![1.0];
    }
    let gamma = tem_gamma(epsilon, beta, v);
    let (lo, hi) = tem_window(index, gamma, v);
    let outside = v - (hi - lo + 1);
    let half_eps = epsilon / 2.0;

    let mut weights = vec![0.0; v];
    let mut z = 0.0;
    for (j, w) in weights.iter_mut().enumerate() {
        if j >= lo && j <= hi {
            *w = (-half_eps * index.abs_diff(j) as f64).exp();
        } else {
            // exp(eps/2 * (-gamma + (2/eps) ln outside)) / outside
            *w = (-half_eps * gamma).exp();
        }
        z += *w;
    }
    debug_assert!(outside == 0 || z > 0.0);
    for w in &mut weights {
        *w /= z;
    }
    weights
}
