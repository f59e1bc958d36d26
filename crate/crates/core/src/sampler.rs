//! Random ranked states in `nabla_K` for sup-norm estimates.
//!
//! Pure Dirichlet draws rarely visit near-uniform or very concentrated
//! states, where the generator gaps peak, so the default sampler mixes
//! three families.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::oracle::{stick_breaking, StickBreakingConfig};
use crate::params::Params;
use crate::rng::{self, SimRng};
use crate::simplex::{sort_descending, RankedState};

pub trait RankedStateSampler {
    /// A ranked state with `k` coordinates summing to one.
    fn draw(&mut self, k: usize) -> RankedState;
}

/// Normalizes nonnegative weights with positive total and ranks them.
fn ranked_from_weights(weights: &[f64]) -> RankedState {
    let total: f64 = weights.iter().sum();
    let freqs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    RankedState::from_sorted_unchecked(sort_descending(&freqs))
}

/// Ranked uniform-Dirichlet draw on `Delta_K`.
pub fn dirichlet_ranked<R: Rng + ?Sized>(k: usize, rng: &mut R) -> RankedState {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    ranked_from_weights(&w)
}

/// First `k` GEM sticks, renormalized and ranked.
pub fn gem_ranked<R: Rng + ?Sized>(params: &Params, k: usize, rng: &mut R) -> RankedState {
    let cfg = StickBreakingConfig {
        residual_tol: 0.0,
        max_sticks: k,
        max_residual: None,
    };
    match stick_breaking(params, &cfg, rng) {
        Ok(draw) => {
            let mut w = draw.weights;
            w.resize(k, 0.0);
            ranked_from_weights(&w)
        }
        Err(_) => dirichlet_ranked(k, rng),
    }
}

/// Uniform on the first `n` of `k` coordinates.
pub fn uniform_on(n: usize, k: usize) -> RankedState {
    let n = n.clamp(1, k);
    let mut freqs = vec![1.0 / n as f64; n];
    freqs.resize(k, 0.0);
    RankedState::from_sorted_unchecked(freqs)
}

/// `z_i` proportional to `exp(-lambda i)`.
pub fn geometric_profile(lambda: f64, k: usize) -> RankedState {
    let w: Vec<f64> = (0..k).map(|i| (-lambda * i as f64).exp()).collect();
    ranked_from_weights(&w)
}

/// Mixture of GEM(theta, alpha) truncations, uniform-Dirichlet draws and
/// low-entropy profiles (uniform on a log-uniform number of coordinates,
/// geometric decay with a log-uniform rate).
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    params: Params,
    rng: SimRng,
}

impl MixtureSampler {
    pub fn new(params: Params, seed: u64) -> Self {
        Self {
            params,
            rng: rng::stream(seed, 0),
        }
    }

    pub fn with_stream(params: Params, seed: u64, stream: u64) -> Self {
        Self {
            params,
            rng: rng::stream(seed, stream),
        }
    }
}

impl RankedStateSampler for MixtureSampler {
    fn draw(&mut self, k: usize) -> RankedState {
        let ln_k = (k as f64).ln();
        let family: f64 = self.rng.random();
        if family < 0.35 {
            gem_ranked(&self.params, k, &mut self.rng)
        } else if family < 0.7 {
            dirichlet_ranked(k, &mut self.rng)
        } else if family < 0.85 {
            let u: f64 = self.rng.random();
            uniform_on((u * ln_k).exp().round() as usize, k)
        } else {
            let u: f64 = self.rng.random();
            geometric_profile(2.0 * (-u * ln_k).exp(), k)
        }
    }
}

/// Uniform-Dirichlet draws only.
#[derive(Debug, Clone)]
pub struct DirichletSampler {
    rng: SimRng,
}

impl DirichletSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, 0),
        }
    }
}

impl RankedStateSampler for DirichletSampler {
    fn draw(&mut self, k: usize) -> RankedState {
        dirichlet_ranked(k, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(z: &RankedState, k: usize) {
        assert_eq!(z.k(), k);
        assert!(z.freqs().windows(2).all(|w| w[0] >= w[1]));
        assert!(z.freqs().iter().all(|&v| v >= 0.0));
        assert!((z.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_draws_are_ranked_states() {
        let mut s = MixtureSampler::new(Params::general(0.1, 0.9).unwrap(), 4);
        for k in [2, 3, 17, 512] {
            for _ in 0..200 {
                check(&s.draw(k), k);
            }
        }
    }

    #[test]
    fn profiles() {
        let u = uniform_on(3, 5);
        assert_eq!(u.freqs(), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
        check(&uniform_on(0, 4), 4);
        check(&uniform_on(9, 4), 4);
        check(&geometric_profile(0.5, 10), 10);
        check(&geometric_profile(800.0, 10), 10);
    }

    #[test]
    fn same_seed_same_draws() {
        let p = Params::general(1.0, 0.3).unwrap();
        let mut a = MixtureSampler::new(p, 9);
        let mut b = MixtureSampler::new(p, 9);
        for _ in 0..50 {
            assert_eq!(a.draw(8), b.draw(8));
        }
    }
}
