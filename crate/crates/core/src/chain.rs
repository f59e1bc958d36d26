//! The discrete-time Wright-Fisher chain on the lattice simplex: migration,
//! mutation, then multinomial resampling of N offspring.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analysis::batch_means;
use crate::error::{Error, Result};
use crate::kernel::{migration_step, mutation_step, KernelConfig};
use crate::rng;
use crate::simplex::{DiscreteSimplexState, SimplexState};

/// Cell probabilities above `-PROB_CLAMP` are treated as rounding noise.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    kernel: KernelConfig,
    seed: u64,
    steps: u64,
    burn_in: u64,
    thin: u64,
}

impl ChainConfig {
    /// Uses the default burn-in of `10 N` steps and thinning `K`.
    pub fn new(kernel: KernelConfig, seed: u64, steps: u64) -> Result<Self> {
        Self::with_schedule(kernel, seed, steps, 10 * kernel.n(), kernel.k() as u64)
    }

    pub fn with_schedule(
        kernel: KernelConfig,
        seed: u64,
        steps: u64,
        burn_in: u64,
        thin: u64,
    ) -> Result<Self> {
        if thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        if burn_in > steps {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({burn_in}) exceeds steps ({steps})"
            )));
        }
        Ok(Self {
            kernel,
            seed,
            steps,
            burn_in,
            thin,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn thin(&self) -> u64 {
        self.thin
    }

    fn records(&self, step: u64) -> bool {
        step >= self.burn_in && (step - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Retained states of one chain run with their step indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub steps: Vec<u64>,
    pub states: Vec<DiscreteSimplexState>,
}

impl ChainPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Draws `Multinomial(n, probs)` by sequential conditional binomials.
///
/// Probabilities in `(-1e-12, 0)` are clamped to zero and the vector
/// renormalized; anything more negative is a [`Error::Numerical`].
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut clean = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < -PROB_CLAMP {
            return Err(Error::Numerical(format!("cell probability {i} is {p}")));
        }
        clean.push(p.max(0.0));
    }
    let total: f64 = clean.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("cell probabilities have zero total".into()));
    }
    let mut counts = vec![0u64; clean.len()];
    let mut left_n = n;
    let mut left_mass = total;
    let last = clean.len() - 1;
    for (i, &p) in clean.iter().enumerate() {
        if left_n == 0 {
            break;
        }
        if i == last || p >= left_mass {
            counts[i] = left_n;
            break;
        }
        let cond = (p / left_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left_n, cond)
            .map_err(|e| Error::Numerical(format!("binomial({left_n}, {cond}): {e}")))?
            .sample(rng);
        counts[i] = draw;
        left_n -= draw;
        left_mass -= p;
    }
    Ok(counts)
}

/// One generation: frequencies `counts / N`, migration, mutation, then
/// multinomial resampling with cell probabilities `z**`.
pub fn chain_step<R: Rng + ?Sized>(
    state: &DiscreteSimplexState,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<DiscreteSimplexState> {
    let kernel = &cfg.kernel;
    if state.n() != kernel.n() {
        return Err(Error::InvalidState(format!(
            "state has N = {}, chain configured for N = {}",
            state.n(),
            kernel.n()
        )));
    }
    let z = state.to_simplex();
    let zss = mutation_step(&migration_step(&z, kernel)?, kernel)?;
    let counts = sample_multinomial(kernel.n(), zss.freqs(), rng)?;
    DiscreteSimplexState::with_population(counts, kernel.n())
}

/// Runs replicate 0 of the chain.
pub fn run_chain(init: &DiscreteSimplexState, cfg: &ChainConfig) -> Result<ChainPath> {
    run_chain_replicate(init, cfg, 0)
}

/// Runs replicate `replicate`, drawing from the stream `(seed, replicate)`.
pub fn run_chain_replicate(
    init: &DiscreteSimplexState,
    cfg: &ChainConfig,
    replicate: u64,
) -> Result<ChainPath> {
    let mut path = ChainPath {
        steps: Vec::new(),
        states: Vec::new(),
    };
    simulate_chain(init, cfg, replicate, |step, state| {
        path.steps.push(step);
        path.states.push(state.clone());
    })?;
    Ok(path)
}

/// Runs the chain and hands every retained state to `visit`; returns the
/// final state.
pub fn simulate_chain<F>(
    init: &DiscreteSimplexState,
    cfg: &ChainConfig,
    replicate: u64,
    mut visit: F,
) -> Result<DiscreteSimplexState>
where
    F: FnMut(u64, &DiscreteSimplexState),
{
    if init.k() != cfg.kernel.k() {
        return Err(Error::InvalidState(format!(
            "initial state has K = {}, chain configured for K = {}",
            init.k(),
            cfg.kernel.k()
        )));
    }
    let mut rng = rng::stream(cfg.seed, replicate);
    let mut state = init.clone();
    if cfg.records(0) {
        visit(0, &state);
    }
    for step in 1..=cfg.steps {
        state = chain_step(&state, cfg, &mut rng)?;
        if cfg.records(step) {
            visit(step, &state);
        }
    }
    Ok(state)
}

/// Mean of `f` over the retained states with a batch-means standard error.
pub fn ergodic_average<F>(path: &ChainPath, f: F) -> Result<(f64, f64)>
where
    F: Fn(&SimplexState) -> f64,
{
    if path.len() < crate::analysis::MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "ergodic average needs at least {} retained states, got {}",
            crate::analysis::MIN_SAMPLES,
            path.len()
        )));
    }
    let values: Vec<f64> = path.states.iter().map(|s| f(&s.to_simplex())).collect();
    batch_means(&values)
}
