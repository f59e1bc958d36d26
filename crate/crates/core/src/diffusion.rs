//! Time stepping for the K-allele diffusion with drift `b(z)` and
//! covariance `a_ij(z) = z_i (delta_ij - z_j)`.
//!
//! The drift splits as `b_i = (beta_i - delta_i z_i) / 2` with immigration
//! `beta_i = mu/(K-1) + alpha p_i sum_j z_j r_j >= 0` and removal rate
//! `delta_i = mu K/(K-1) + alpha r_i`. The default scheme freezes `beta` and
//! `delta` over a step, moves every coordinate by the exact transition of
//! `dY = (beta - delta Y)/2 dt + sqrt(Y) dW` (a noncentral chi-square
//! draw), then renormalizes. Normalizing independent coordinates turns the
//! covariance `diag(z) dt` into `a(z) dt`, and the coordinates never leave
//! `[0, 1]`. The Euler-Maruyama scheme with clamp-and-renormalize
//! projection is kept for comparison; its clamping inflates coordinates
//! near zero, a bias of order `sqrt(dt)` per near-boundary coordinate.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{drift_from_freqs, MigrationTerms};
use crate::params::Params;
use crate::rng;
use crate::simplex::{rho_k, RankedState, SimplexState};

/// Largest admissible `sigma sigma^T - a` entry.
pub const FACTOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact per-coordinate transition with frozen coefficients, then
    /// renormalization.
    #[default]
    NormalizedCir,
    /// Euler-Maruyama, then clamp negative coordinates to zero and
    /// renormalize.
    EulerProject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    params: Params,
    k: usize,
    dt: f64,
    t_end: f64,
    seed: u64,
    scheme: Scheme,
}

/// Stability cap `0.1 / (1 + theta + alpha K)` on the time step.
pub fn max_dt(params: &Params, k: usize) -> f64 {
    0.1 / (1.0 + params.theta() + params.alpha() * k as f64)
}

/// `min(1e-3, max_dt)`.
pub fn default_dt(params: &Params, k: usize) -> f64 {
    1e-3f64.min(max_dt(params, k))
}

impl DiffusionConfig {
    pub fn new(params: Params, k: usize, dt: f64, t_end: f64, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("K >= 2 required, got {k}")));
        }
        let cap = max_dt(&params, k);
        if !(dt > 0.0 && dt <= cap) {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} must lie in (0, 0.1/(1 + theta + alpha K)] = (0, {cap}]"
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_end must be finite and >= 0, got {t_end}")));
        }
        Ok(Self {
            params,
            k,
            dt,
            t_end,
            seed,
            scheme: Scheme::default(),
        })
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn with_default_dt(params: Params, k: usize, t_end: f64, seed: u64) -> Result<Self> {
        Self::new(params, k, default_dt(&params, k), t_end, seed)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `ceil(t_end / dt)`, ignoring float noise in the ratio.
    pub fn steps(&self) -> u64 {
        let ratio = self.t_end / self.dt;
        (ratio - 1e-9 * ratio.max(1.0)).ceil().max(0.0) as u64
    }
}

/// `a_ij(z) = z_i (delta_ij - z_j)`.
pub fn diffusion_coeff(z: &SimplexState) -> DMatrix<f64> {
    let x = z.freqs();
    let k = x.len();
    DMatrix::from_fn(k, k, |i, j| x[i] * (if i == j { 1.0 } else { 0.0 } - x[j]))
}

/// `sigma(z) = diag(sqrt z) - z sqrt(z)^T`, which satisfies
/// `sigma sigma^T = a(z)` whenever `sum z = 1`.
pub fn noise_factor(z: &SimplexState) -> DMatrix<f64> {
    let x = z.freqs();
    let k = x.len();
    DMatrix::from_fn(k, k, |i, j| {
        let s = x[j].sqrt();
        if i == j {
            s - x[i] * s
        } else {
            -x[i] * s
        }
    })
}

/// `sigma(z) xi` without forming the matrix.
fn apply_noise(x: &[f64], xi: &[f64], out: &mut [f64]) {
    let roots: f64 = x.iter().zip(xi).map(|(z, e)| z.sqrt() * e).sum();
    for ((o, &z), &e) in out.iter_mut().zip(x).zip(xi) {
        *o = z.sqrt() * e - z * roots;
    }
}

/// `sigma sigma^T - a = (sum z - 1) z z^T`; its largest entry.
fn factor_residual(x: &[f64]) -> f64 {
    let total: f64 = x.iter().sum();
    let top = x.iter().cloned().fold(0.0, f64::max);
    top * top * (total - 1.0).abs()
}

/// One step of the configured scheme.
pub fn diffusion_step<R: Rng + ?Sized>(z: &SimplexState, cfg: &DiffusionConfig, rng: &mut R) -> Result<SimplexState> {
    if z.k() != cfg.k {
        return Err(Error::InvalidState(format!(
            "state has K = {}, diffusion configured for K = {}",
            z.k(),
            cfg.k
        )));
    }
    let mut out = z.freqs().to_vec();
    let mut scratch = Scratch::new(cfg.k);
    step_in_place(&mut out, cfg, rng, &mut scratch)?;
    SimplexState::new(out)
}

struct Scratch {
    xi: Vec<f64>,
    noise: Vec<f64>,
}

impl Scratch {
    fn new(k: usize) -> Self {
        Self {
            xi: vec![0.0; k],
            noise: vec![0.0; k],
        }
    }
}

fn step_in_place<R: Rng + ?Sized>(x: &mut [f64], cfg: &DiffusionConfig, rng: &mut R, s: &mut Scratch) -> Result<()> {
    match cfg.scheme {
        Scheme::NormalizedCir => cir_step(x, cfg, rng),
        Scheme::EulerProject => euler_step(x, cfg, rng, s),
    }
}

fn normalize(x: &mut [f64], total: f64) -> Result<()> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!("projection failed: total mass {total}")));
    }
    for v in x.iter_mut() {
        *v /= total;
    }
    Ok(())
}

/// Exact draw of `Y(dt)` for `dY = (beta - delta Y)/2 dt + sqrt(Y) dW`,
/// `Y(0) = y`: `Y(dt) = 2c Gamma(beta + P)` with
/// `P ~ Poisson(y e^{-delta dt/2} / (2c))` and
/// `c = (1 - e^{-delta dt/2}) / (2 delta)`.
fn cir_transition<R: Rng + ?Sized>(y: f64, beta: f64, delta: f64, dt: f64, rng: &mut R) -> Result<f64> {
    let kappa = 0.5 * delta;
    let c = if kappa > 0.0 {
        -(-kappa * dt).exp_m1() / (4.0 * kappa)
    } else {
        0.25 * dt
    };
    let rate = y * (-kappa * dt).exp() / (2.0 * c);
    let jumps = if rate > 0.0 {
        Poisson::new(rate)
            .map_err(|e| Error::Numerical(format!("Poisson({rate}): {e}")))?
            .sample(rng)
    } else {
        0.0
    };
    let shape = beta + jumps;
    if shape <= 0.0 {
        return Ok(0.0);
    }
    let g: f64 = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Numerical(format!("Gamma({shape}): {e}")))?
        .sample(rng);
    Ok(2.0 * c * g)
}

fn cir_step<R: Rng + ?Sized>(x: &mut [f64], cfg: &DiffusionConfig, rng: &mut R) -> Result<()> {
    let k = x.len();
    let km1 = (k - 1) as f64;
    let mu = cfg.params.mutation_intensity();
    let alpha = cfg.params.alpha();
    let terms = MigrationTerms::new(x, cfg.params.regime());
    let mut total = 0.0;
    for (i, v) in x.iter_mut().enumerate() {
        let beta = mu / km1 + alpha * terms.p(i) * terms.outflow;
        let delta = mu * (1.0 + 1.0 / km1) + alpha * terms.r[i];
        *v = cir_transition(*v, beta, delta, cfg.dt, rng)?;
        total += *v;
    }
    normalize(x, total)
}

fn euler_step<R: Rng + ?Sized>(x: &mut [f64], cfg: &DiffusionConfig, rng: &mut R, s: &mut Scratch) -> Result<()> {
    let residual = factor_residual(x);
    if residual > FACTOR_TOL {
        return Err(Error::Numerical(format!(
            "noise factor residual {residual:e} exceeds {FACTOR_TOL:e}"
        )));
    }
    let drift = drift_from_freqs(x, &cfg.params);
    for e in s.xi.iter_mut() {
        *e = rng.sample(StandardNormal);
    }
    apply_noise(x, &s.xi, &mut s.noise);
    let root_dt = cfg.dt.sqrt();
    let mut total = 0.0;
    for ((xi, b), n) in x.iter_mut().zip(&drift).zip(&s.noise) {
        let y = (*xi + b * cfg.dt + root_dt * n).max(0.0);
        *xi = y;
        total += y;
    }
    normalize(x, total)
}

/// Runs replicate 0 and returns the `ceil(t_end/dt) + 1` states.
pub fn run_diffusion(init: &SimplexState, cfg: &DiffusionConfig) -> Result<Vec<SimplexState>> {
    run_diffusion_replicate(init, cfg, 0)
}

pub fn run_diffusion_replicate(init: &SimplexState, cfg: &DiffusionConfig, replicate: u64) -> Result<Vec<SimplexState>> {
    let mut path = Vec::with_capacity(cfg.steps() as usize + 1);
    simulate_diffusion(init, cfg, replicate, |_, x| {
        path.push(SimplexState::new(x.to_vec()));
    })?;
    path.into_iter().collect()
}

/// Integrates replicate `replicate` and hands every state, with its step
/// index, to `visit`. Returns the final state.
pub fn simulate_diffusion<F>(init: &SimplexState, cfg: &DiffusionConfig, replicate: u64, mut visit: F) -> Result<SimplexState>
where
    F: FnMut(u64, &[f64]),
{
    if init.k() != cfg.k {
        return Err(Error::InvalidState(format!(
            "initial state has K = {}, diffusion configured for K = {}",
            init.k(),
            cfg.k
        )));
    }
    let mut rng = rng::stream(cfg.seed, replicate);
    let mut scratch = Scratch::new(cfg.k);
    let mut x = init.freqs().to_vec();
    visit(0, &x);
    for step in 1..=cfg.steps() {
        step_in_place(&mut x, cfg, &mut rng, &mut scratch)?;
        visit(step, &x);
    }
    SimplexState::new(x)
}

/// `rho_K` applied pathwise.
pub fn ranked_path(path: &[SimplexState]) -> Vec<RankedState> {
    path.iter().map(rho_k).collect()
}

/// Burn-in `20 / (1 + theta)` time units.
pub fn default_burn_in(params: &Params) -> f64 {
    20.0 / (1.0 + params.theta())
}

/// Ranked states of one long path: after `burn_in` time units, one state
/// every `spacing` time units until `samples` are collected. The path runs
/// with `cfg.dt` and `cfg.seed`; `cfg.t_end` is ignored.
pub fn stationary_ranked_sample(
    init: &SimplexState,
    cfg: &DiffusionConfig,
    replicate: u64,
    burn_in: f64,
    spacing: f64,
    samples: usize,
) -> Result<Vec<RankedState>> {
    if !(spacing > 0.0 && burn_in >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need spacing > 0 and burn_in >= 0, got {spacing} and {burn_in}"
        )));
    }
    let burn_steps = (burn_in / cfg.dt).ceil() as u64;
    let every = ((spacing / cfg.dt).round() as u64).max(1);
    let total = burn_steps + every * samples.saturating_sub(1) as u64;
    let long = DiffusionConfig {
        t_end: total as f64 * cfg.dt,
        ..*cfg
    };
    let mut out = Vec::with_capacity(samples);
    simulate_diffusion(init, &long, replicate, |step, x| {
        if step >= burn_steps && (step - burn_steps).is_multiple_of(every) && out.len() < samples {
            out.push(RankedState::from_sorted_unchecked(crate::simplex::sort_descending(x)));
        }
    })?;
    Ok(out)
}
