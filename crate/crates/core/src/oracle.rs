//! Ground truth for the stationary law: a stick-breaking sampler for the
//! ranked frequencies of PD(theta, alpha) and the closed-form moments of
//! `phi_m` under it.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::simplex::sort_descending;

/// Truncation rule for the stick-breaking loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickBreakingConfig {
    /// Stop once the unassigned mass drops below this.
    pub residual_tol: f64,
    /// Hard cap on the number of sticks.
    pub max_sticks: usize,
    /// Fail with [`Error::NonTermination`] if the residual at the cap is
    /// still above this; `None` accepts any residual and reports it as tail
    /// mass.
    pub max_residual: Option<f64>,
}

impl Default for StickBreakingConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            max_sticks: 1_000_000,
            max_residual: Some(1e-6),
        }
    }
}

impl StickBreakingConfig {
    /// Cheap truncation for estimating `phi_m` moments: the unassigned mass
    /// `R` contributes at most `R^2` to any `phi_m`, `m >= 2`.
    pub fn for_moments() -> Self {
        Self {
            residual_tol: 1e-6,
            max_sticks: 4096,
            max_residual: None,
        }
    }
}

/// One stick-breaking draw: the sticks in size-biased order plus the
/// unassigned remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct StickDraw {
    pub weights: Vec<f64>,
    pub residual: f64,
}

impl StickDraw {
    /// `sum_i W_i^m` over the drawn sticks (the residual is not an atom).
    pub fn power_sum(&self, m: f64) -> f64 {
        self.weights.iter().filter(|&&w| w > 0.0).map(|&w| (m * w.ln()).exp()).sum()
    }
}

/// Top-J ranked atoms of one draw and the mass outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdSample {
    pub ranked_freqs: Vec<f64>,
    pub tail_mass: f64,
    pub j: usize,
}

impl PdSample {
    /// Keeps the `j` largest sticks; everything else, including the
    /// unassigned residual, goes to `tail_mass`.
    pub fn from_draw(draw: &StickDraw, j: usize) -> Self {
        let mut w = draw.weights.clone();
        let keep = j.min(w.len());
        if keep < w.len() {
            w.select_nth_unstable_by(keep, |a, b| b.total_cmp(a));
        }
        let mut tail = draw.residual + w[keep..].iter().sum::<f64>();
        w.truncate(keep);
        let mut w = sort_descending(&w);
        w.resize(j, 0.0);
        if tail < 0.0 {
            tail = 0.0;
        }
        Self {
            ranked_freqs: w,
            tail_mass: tail,
            j,
        }
    }
}

impl AsRef<[f64]> for PdSample {
    fn as_ref(&self) -> &[f64] {
        &self.ranked_freqs
    }
}

/// Draws sticks `W_i = V_i prod_{l<i} (1 - V_l)` with
/// `V_i ~ Beta(1 - alpha, theta + i alpha)`.
pub fn stick_breaking<R: Rng + ?Sized>(
    params: &Params,
    cfg: &StickBreakingConfig,
    rng: &mut R,
) -> Result<StickDraw> {
    let a = 1.0 - params.alpha();
    let mut weights = Vec::new();
    let mut residual = 1.0f64;
    let mut i = 1usize;
    while residual >= cfg.residual_tol && weights.len() < cfg.max_sticks {
        let b = params.theta() + i as f64 * params.alpha();
        let v = if b <= 0.0 {
            1.0
        } else {
            Beta::new(a, b)
                .map_err(|e| Error::Numerical(format!("Beta({a}, {b}): {e}")))?
                .sample(rng)
        };
        weights.push(v * residual);
        residual *= 1.0 - v;
        i += 1;
    }
    if let Some(limit) = cfg.max_residual {
        if residual > limit {
            return Err(Error::NonTermination {
                residual,
                sticks: weights.len(),
            });
        }
    }
    Ok(StickDraw { weights, residual })
}

/// One PD(theta, alpha) draw truncated to its top `j` atoms, using the
/// default truncation (residual below `1e-12` or `10^6` sticks).
pub fn sample_pd<R: Rng + ?Sized>(params: &Params, j: usize, rng: &mut R) -> Result<PdSample> {
    sample_pd_with(params, j, &StickBreakingConfig::default(), rng)
}

pub fn sample_pd_with<R: Rng + ?Sized>(
    params: &Params,
    j: usize,
    cfg: &StickBreakingConfig,
    rng: &mut R,
) -> Result<PdSample> {
    if j == 0 {
        return Err(Error::Domain("J >= 1 required".into()));
    }
    let draw = stick_breaking(params, cfg, rng)?;
    Ok(PdSample::from_draw(&draw, j))
}

/// `E[phi_m] = prod_{k=2}^m (k - 1 - alpha) / (k - 1 + theta)` under
/// PD(theta, alpha).
pub fn stationary_moment(m: u32, params: &Params) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("stationary moments need m >= 2, got {m}")));
    }
    let (theta, alpha) = (params.theta(), params.alpha());
    Ok((2..=m)
        .map(|k| {
            let k = f64::from(k);
            (k - 1.0 - alpha) / (k - 1.0 + theta)
        })
        .product())
}

/// Monte Carlo `E[phi_m]` for each `m` from `draws` stick-breaking draws.
/// Returns `(mean, stderr)` per exponent.
pub fn moment_estimates<R: Rng + ?Sized>(
    params: &Params,
    ms: &[u32],
    draws: usize,
    cfg: &StickBreakingConfig,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let mut values = vec![Vec::with_capacity(draws); ms.len()];
    for _ in 0..draws {
        let draw = stick_breaking(params, cfg, rng)?;
        for (acc, &m) in values.iter_mut().zip(ms) {
            acc.push(draw.power_sum(f64::from(m)));
        }
    }
    values.iter().map(|v| crate::analysis::iid_mean(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    #[test]
    fn moment_examples() {
        let p = Params::general(1.0, 0.3).unwrap();
        assert_relative_eq!(stationary_moment(2, &p).unwrap(), 0.35, epsilon = 1e-15);
        assert_relative_eq!(stationary_moment(3, &p).unwrap(), 0.35 * 1.7 / 3.0, epsilon = 1e-15);
        for theta in [0.5, 1.0, 4.0] {
            let p = Params::general(theta, 0.0).unwrap();
            assert_relative_eq!(stationary_moment(2, &p).unwrap(), 1.0 / (1.0 + theta), epsilon = 1e-15);
        }
        assert!(stationary_moment(1, &p).is_err());
    }

    #[test]
    fn moment_root_of_expected_generator() {
        // E[B phi_m] = C(m,2)(E phi_{m-1} - E phi_m) - m/2 (theta E phi_m + alpha E phi_{m-1}) = 0.
        let p = Params::general(0.7, 0.45).unwrap();
        let mut prev = 1.0;
        for m in 2..8u32 {
            let cur = stationary_moment(m, &p).unwrap();
            let mf = f64::from(m);
            let b = mf * (mf - 1.0) / 2.0 * (prev - cur) - mf / 2.0 * (p.theta() * cur + p.alpha() * prev);
            assert!(b.abs() < 1e-14, "m = {m}: {b}");
            prev = cur;
        }
    }

    #[test]
    fn strictly_decreasing_in_m_theta_alpha() {
        let grid = [(0.5, 0.0), (1.0, 0.3), (2.0, 0.7), (0.1, 0.9)];
        for &(t, a) in &grid {
            let p = Params::general(t, a).unwrap();
            let pt = Params::general(t + 0.1, a).unwrap();
            let pa = Params::general(t, (a + 0.05).min(0.95)).unwrap();
            for m in 2..=6 {
                let e = stationary_moment(m, &p).unwrap();
                assert!(stationary_moment(m + 1, &p).unwrap() < e);
                assert!(stationary_moment(m, &pt).unwrap() < e);
                assert!(stationary_moment(m, &pa).unwrap() < e);
            }
        }
    }

    #[test]
    fn sample_sums_to_one_and_tail_shrinks_in_j() {
        let p = Params::general(1.0, 0.3).unwrap();
        let mut r = rng::stream(3, 0);
        let draw = stick_breaking(&p, &StickBreakingConfig::default(), &mut r).unwrap();
        assert!(draw.residual < 1e-12);
        let mut last = f64::INFINITY;
        for j in [1, 2, 5, 10, 40, 200] {
            let s = PdSample::from_draw(&draw, j);
            assert_eq!(s.ranked_freqs.len(), j);
            assert!(s.ranked_freqs.windows(2).all(|w| w[0] >= w[1]));
            let total: f64 = s.ranked_freqs.iter().sum::<f64>() + s.tail_mass;
            assert!((total - 1.0).abs() < 1e-10);
            assert!(s.tail_mass <= last);
            last = s.tail_mass;
        }
    }

    #[test]
    fn strict_default_fails_when_residual_decays_slowly() {
        let p = Params::general(0.1, 0.9).unwrap();
        let cfg = StickBreakingConfig {
            max_sticks: 1000,
            ..StickBreakingConfig::default()
        };
        let err = stick_breaking(&p, &cfg, &mut rng::stream(1, 0)).unwrap_err();
        assert!(matches!(err, Error::NonTermination { .. }));
    }

    #[test]
    fn degenerate_zero_parameters_give_single_atom() {
        let p = Params::new(0.0, 0.0, crate::params::Regime::ThetaNonneg).unwrap();
        let s = sample_pd(&p, 3, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(s.ranked_freqs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn largest_atom_of_one_parameter_law() {
        // With alpha = 0, theta = 1 the mean largest atom is the
        // Golomb-Dickman constant.
        let p = Params::general(1.0, 0.0).unwrap();
        let mut r = rng::stream(11, 0);
        let tops: Vec<f64> = (0..20_000)
            .map(|_| sample_pd(&p, 1, &mut r).unwrap().ranked_freqs[0])
            .collect();
        let (mean, se) = crate::analysis::iid_mean(&tops).unwrap();
        assert!((mean - 0.624_329_988_5).abs() < 4.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn homozygosity_matches_moment() {
        let p = Params::general(1.0, 0.3).unwrap();
        let est = moment_estimates(&p, &[2, 3], 20_000, &StickBreakingConfig::for_moments(), &mut rng::stream(5, 0))
            .unwrap();
        for ((mean, se), m) in est.into_iter().zip([2, 3]) {
            let exact = stationary_moment(m, &p).unwrap();
            assert!((mean - exact).abs() < 4.0 * se, "m = {m}: {mean} vs {exact}");
        }
    }
}
