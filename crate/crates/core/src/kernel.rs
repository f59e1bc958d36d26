//! Deterministic part of one Wright-Fisher generation: state-dependent
//! migration `z -> z*`, uniform mutation `z* -> z**`, and the drift `b(z)`
//! that the two maps produce at order `1/N`.
//!
//! Emigration weights `r` decrease in the allele frequency, so common
//! alleles leave less often; mainland frequencies `p` reverse the order of
//! `z`, so rare alleles immigrate more often.

use crate::error::{Error, Result};
use crate::params::{Params, Regime};
use crate::simplex::SimplexState;

/// Below this argument the migration weights are summed as a geometric
/// series instead of the closed-form ratio.
const SERIES_CUTOFF: f64 = 1.0 / (1u64 << 40) as f64;

/// `(1 - u)^k` for `u` in `[0, 1]`.
pub fn pow_one_minus(u: f64, k: usize) -> f64 {
    if u < 0.5 {
        (k as f64 * (-u).ln_1p()).exp()
    } else {
        (1.0 - u).powi(k as i32)
    }
}

/// `1 - (1 - u)^k`, accurate when `k u` is small.
fn one_minus_pow(u: f64, k: usize) -> f64 {
    if u < 0.5 {
        -(k as f64 * (-u).ln_1p()).exp_m1()
    } else {
        1.0 - (1.0 - u).powi(k as i32)
    }
}

/// `sum_{j=0}^{k-1} (1 - u)^j` for tiny `u`; the loop stops as soon as the
/// ratio rounds to one, where every remaining term equals one.
fn geometric_sum(u: f64, k: usize) -> f64 {
    let ratio = 1.0 - u;
    if ratio == 1.0 {
        return k as f64;
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..k {
        sum += term;
        term *= ratio;
    }
    sum
}

fn check_weight_args(u: f64, k: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("migration weight argument {u} outside [0, 1]")));
    }
    if k < 2 {
        return Err(Error::Domain(format!("K >= 2 required, got {k}")));
    }
    Ok(())
}

/// Emigration weight of the general regime,
/// `r(u) = (1-u)[1-(1-u)^K]/u` with `r(0) = K`.
///
/// Equals `sum_{k=1}^K (1-u)^k`, the mean number of failures before the
/// first success in `K` Bernoulli(`u`) trials, censored at `K`.
pub fn r_weight(u: f64, k: usize) -> Result<f64> {
    check_weight_args(u, k)?;
    Ok(r_weight_unchecked(u, k))
}

/// Emigration weight of the `theta >= 0` regime,
/// `r_bar(u) = [1-(1-u)^K]/u` with `r_bar(0) = K`.
pub fn r_weight_bar(u: f64, k: usize) -> Result<f64> {
    check_weight_args(u, k)?;
    Ok(r_weight_bar_unchecked(u, k))
}

fn r_weight_unchecked(u: f64, k: usize) -> f64 {
    if u == 0.0 {
        k as f64
    } else if u < SERIES_CUTOFF {
        (1.0 - u) * geometric_sum(u, k)
    } else {
        (1.0 - u) * one_minus_pow(u, k) / u
    }
}

fn r_weight_bar_unchecked(u: f64, k: usize) -> f64 {
    if u == 0.0 {
        k as f64
    } else if u < SERIES_CUTOFF {
        geometric_sum(u, k)
    } else {
        one_minus_pow(u, k) / u
    }
}

/// The regime's emigration weight.
pub fn migration_weight(u: f64, k: usize, regime: Regime) -> Result<f64> {
    check_weight_args(u, k)?;
    Ok(weight_unchecked(u, k, regime))
}

#[inline]
fn weight_unchecked(u: f64, k: usize, regime: Regime) -> f64 {
    match regime {
        Regime::General => r_weight_unchecked(u, k),
        Regime::ThetaNonneg => r_weight_bar_unchecked(u, k),
    }
}

/// Per-state quantities shared by the migration map, the drift and the
/// finite-K generator.
#[derive(Debug, Clone)]
pub struct MigrationTerms {
    /// `r_i(z)` (or `r_bar_i(z)`).
    pub r: Vec<f64>,
    /// `(1 - z_i)^K`.
    pub no_success: Vec<f64>,
    /// `sum_l (1 - z_l)^K`.
    pub no_success_total: f64,
    /// `sum_j z_j r_j(z)`.
    pub outflow: f64,
}

impl MigrationTerms {
    /// `freqs` must lie in `[0, 1]`; `K` is the number of coordinates.
    pub fn new(freqs: &[f64], regime: Regime) -> Self {
        let k = freqs.len();
        let r: Vec<f64> = freqs.iter().map(|&z| weight_unchecked(z, k, regime)).collect();
        let no_success: Vec<f64> = freqs.iter().map(|&z| pow_one_minus(z, k)).collect();
        let no_success_total = no_success.iter().sum();
        let outflow = freqs.iter().zip(&r).map(|(z, r)| z * r).sum();
        Self {
            r,
            no_success,
            no_success_total,
            outflow,
        }
    }

    /// Mainland frequency `p_i(z)`.
    #[inline]
    pub fn p(&self, i: usize) -> f64 {
        self.no_success[i] / self.no_success_total
    }

    /// `S(z) = sum_j z_j r_j(z) / sum_l (1 - z_l)^K`.
    pub fn outflow_ratio(&self) -> f64 {
        self.outflow / self.no_success_total
    }
}

/// Mainland allele frequencies `p_i(z) = (1-z_i)^K / sum_l (1-z_l)^K`.
pub fn mainland_freqs(z: &SimplexState) -> Vec<f64> {
    let k = z.k();
    let w: Vec<f64> = z.freqs().iter().map(|&zi| pow_one_minus(zi, k)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|wi| wi / total).collect()
}

/// `S(z)`, the ratio bounded by `2 e^2` on the ranked simplex.
pub fn outflow_ratio(freqs: &[f64], regime: Regime) -> f64 {
    MigrationTerms::new(freqs, regime).outflow_ratio()
}

/// Smallest population size for which every cell probability of the
/// chain stays nonnegative: `max(ceil(alpha K / 2), ceil(mu / 2), 1) + 1`
/// with `mu` the regime's mutation intensity.
pub fn minimum_population(params: &Params, k: usize) -> u64 {
    let migration = (params.alpha() * k as f64 / 2.0).ceil() as u64;
    let mutation = (params.mutation_intensity() / 2.0).ceil() as u64;
    migration.max(mutation).max(1) + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    params: Params,
    k: usize,
    n: u64,
}

impl KernelConfig {
    pub fn new(params: Params, k: usize, n: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("K >= 2 required, got {k}")));
        }
        let min = minimum_population(&params, k);
        if n < min {
            return Err(Error::InvalidPopulationSize { n, min });
        }
        Ok(Self { params, k, n })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Per-pair mutation probability `u = mu / (2 N (K - 1))`.
    pub fn mutation_rate(&self) -> f64 {
        self.params.mutation_intensity() / (2.0 * self.n as f64 * (self.k - 1) as f64)
    }

    fn check_state(&self, z: &SimplexState) -> Result<()> {
        if z.k() != self.k {
            return Err(Error::InvalidState(format!(
                "state has K = {}, kernel configured for K = {}",
                z.k(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Migration in the gametic pool:
/// `z*_i = z_i + p_i(z) m(z) - z_i m_i(z)` with `m_i = alpha r_i / (2N)`
/// and `m(z) = sum_j z_j m_j(z)`.
pub fn migration_step(z: &SimplexState, cfg: &KernelConfig) -> Result<SimplexState> {
    cfg.check_state(z)?;
    let alpha = cfg.params.alpha();
    if alpha == 0.0 {
        return Ok(z.clone());
    }
    let scale = alpha / (2.0 * cfg.n as f64);
    let terms = MigrationTerms::new(z.freqs(), cfg.params.regime());
    let overall = scale * terms.outflow;
    let zstar: Vec<f64> = z
        .freqs()
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let emigration = scale * terms.r[i];
            zi * (1.0 - emigration) + terms.p(i) * overall
        })
        .collect();
    SimplexState::new(zstar)
}

/// Uniform mutation `z**_i = z*_i (1 - (K-1) u) + (1 - z*_i) u`.
pub fn mutation_step(zstar: &SimplexState, cfg: &KernelConfig) -> Result<SimplexState> {
    cfg.check_state(zstar)?;
    let u = cfg.mutation_rate();
    let out_rate = (cfg.k - 1) as f64 * u;
    if out_rate >= 1.0 {
        return Err(Error::InvalidPopulationSize {
            n: cfg.n,
            min: minimum_population(&cfg.params, cfg.k),
        });
    }
    if u == 0.0 {
        return Ok(zstar.clone());
    }
    let zss: Vec<f64> = zstar
        .freqs()
        .iter()
        .map(|&z| z * (1.0 - out_rate) + (1.0 - z) * u)
        .collect();
    SimplexState::new(zss)
}

/// Drift coefficients of the K-allele diffusion,
/// `b_i = 1/2 [ mu (1-z_i)/(K-1) - mu z_i + alpha p_i sum_j z_j r_j - alpha z_i r_i ]`.
pub fn drift_b(z: &SimplexState, params: &Params) -> Vec<f64> {
    drift_from_freqs(z.freqs(), params)
}

pub(crate) fn drift_from_freqs(freqs: &[f64], params: &Params) -> Vec<f64> {
    let k = freqs.len();
    let terms = MigrationTerms::new(freqs, params.regime());
    drift_with_terms(freqs, params, &terms, k)
}

pub(crate) fn drift_with_terms(
    freqs: &[f64],
    params: &Params,
    terms: &MigrationTerms,
    k: usize,
) -> Vec<f64> {
    let mu = params.mutation_intensity();
    let alpha = params.alpha();
    let km1 = (k - 1) as f64;
    freqs
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            0.5 * (mu * (1.0 - zi) / km1 - mu * zi + alpha * terms.p(i) * terms.outflow
                - alpha * zi * terms.r[i])
        })
        .collect()
}

/// A candidate emigration/mainland family for the generalized-migration
/// conditions: `r(u, K)` and `p(z) -> (p_1, ..., p_K)`.
pub trait MigrationFamily {
    fn r(&self, u: f64, k: usize) -> f64;
    fn p(&self, freqs: &[f64]) -> Vec<f64>;
}

/// The two built-in families.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinFamily(pub Regime);

impl MigrationFamily for BuiltinFamily {
    fn r(&self, u: f64, k: usize) -> f64 {
        weight_unchecked(u, k, self.0)
    }

    fn p(&self, freqs: &[f64]) -> Vec<f64> {
        let k = freqs.len();
        let w: Vec<f64> = freqs.iter().map(|&z| pow_one_minus(z, k)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Finite-K values of the quantities appearing in the generalized
/// migration conditions. Sup-type entries are maxima over the supplied
/// ranked states (lower bounds of the true suprema).
#[derive(Debug, Clone, PartialEq)]
pub struct RemarkReport {
    pub k: usize,
    pub epsilon: f64,
    /// `sup_z sum_j z_j r_j sum_i p_i z_i`, required `O(1)`.
    pub outflow_mainland: f64,
    /// `min_u [1 - u - u r(u)]`, required `>= 0`.
    pub min_retention: f64,
    /// `sup_u [1 - u - u r(u)] u`, required `o(1)`.
    pub retention_moment: f64,
    /// `sup_z sum_j z_j r_j p_1 z_1`, required `o(1)`.
    pub top_inflow: f64,
    /// `sup_z sum_i [1 - z_i - z_i r(z_i)] z_i^{1+eps}`, required `o(1)`.
    pub retention_eps: f64,
    /// `sup_z sum_j z_j r_j sum_i p_i z_i^{1+eps}`, required `o(1)`.
    pub inflow_eps: f64,
}

impl RemarkReport {
    /// Nonnegativity holds and every bounded/vanishing quantity is below
    /// `budget` at this K.
    pub fn within(&self, budget: f64) -> bool {
        self.min_retention >= -1e-12
            && [
                self.outflow_mainland,
                self.retention_moment,
                self.top_inflow,
                self.retention_eps,
                self.inflow_eps,
            ]
            .iter()
            .all(|&v| v.is_finite() && v <= budget)
    }
}

/// Evaluates the generalized-migration conditions for `family` at one K.
///
/// `states` are ranked states with `K` coordinates; `grid` points in
/// `[0, 1]` are used for the one-dimensional conditions on `r`.
pub fn satisfies_remark_conditions<F: MigrationFamily>(
    family: &F,
    k: usize,
    states: &[Vec<f64>],
    epsilon: f64,
    grid: usize,
) -> Result<RemarkReport> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if grid < 2 || states.is_empty() {
        return Err(Error::InsufficientData("need a grid of >= 2 points and at least one state".into()));
    }
    let mut min_retention = f64::INFINITY;
    let mut retention_moment = 0.0f64;
    for g in 0..=grid {
        let u = g as f64 / grid as f64;
        let keep = 1.0 - u - u * family.r(u, k);
        min_retention = min_retention.min(keep);
        retention_moment = retention_moment.max(keep * u);
    }
    let mut report = RemarkReport {
        k,
        epsilon,
        outflow_mainland: 0.0,
        min_retention,
        retention_moment,
        top_inflow: 0.0,
        retention_eps: 0.0,
        inflow_eps: 0.0,
    };
    for z in states {
        if z.len() != k {
            return Err(Error::InvalidState(format!(
                "state has {} coordinates, expected {k}",
                z.len()
            )));
        }
        let p = family.p(z);
        let r: Vec<f64> = z.iter().map(|&u| family.r(u, k)).collect();
        let outflow: f64 = z.iter().zip(&r).map(|(a, b)| a * b).sum();
        let mainland_mean: f64 = p.iter().zip(z).map(|(pi, zi)| pi * zi).sum();
        let mainland_eps: f64 = p.iter().zip(z).map(|(pi, zi)| pi * zi.powf(1.0 + epsilon)).sum();
        let retention: f64 = z
            .iter()
            .zip(&r)
            .map(|(&zi, &ri)| (1.0 - zi - zi * ri) * zi.powf(1.0 + epsilon))
            .sum();
        report.outflow_mainland = report.outflow_mainland.max(outflow * mainland_mean);
        report.top_inflow = report.top_inflow.max(outflow * p[0] * z[0]);
        report.retention_eps = report.retention_eps.max(retention);
        report.inflow_eps = report.inflow_eps.max(outflow * mainland_eps);
    }
    Ok(report)
}
