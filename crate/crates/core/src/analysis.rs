//! Statistics for the comparison experiments: batch-means errors for
//! autocorrelated samples, two-sample distances, log-log rate regression,
//! and the stationary moment pipeline for the chain.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::chain::{ergodic_average, run_chain, ChainConfig};
use crate::error::{Error, Result};
use crate::generators::phi;
use crate::oracle::stationary_moment;
use crate::simplex::DiscreteSimplexState;

/// Minimum number of observations accepted by [`batch_means`].
pub const MIN_SAMPLES: usize = 16;

/// Sample mean with a batch-means standard error using `ceil(sqrt(n))`
/// contiguous batches of (nearly) equal size.
pub fn batch_means(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "batch means needs at least {MIN_SAMPLES} values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let batches = (n as f64).sqrt().ceil() as usize;
    let batch_avgs: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * n / batches;
            let hi = (b + 1) * n / batches;
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let grand = batch_avgs.iter().sum::<f64>() / batches as f64;
    let var = batch_avgs.iter().map(|a| (a - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((mean, (var / batches as f64).sqrt()))
}

/// Mean and standard error for independent draws.
pub fn iid_mean(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 values, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub m: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub z_score: f64,
}

impl MomentReport {
    pub fn new(m: u32, estimate: f64, stderr: f64, analytic: f64) -> Self {
        let z_score = if stderr > 0.0 {
            (estimate - analytic) / stderr
        } else if estimate == analytic {
            0.0
        } else {
            f64::INFINITY.copysign(estimate - analytic)
        };
        Self {
            m,
            estimate,
            stderr,
            analytic,
            z_score,
        }
    }

    /// `|estimate - analytic| <= n_se * stderr + allowance`.
    pub fn within(&self, n_se: f64, allowance: f64) -> bool {
        (self.estimate - self.analytic).abs() <= n_se * self.stderr + allowance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Ks,
    MeanAbsDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub statistic: Statistic,
    pub value: f64,
    pub n1: usize,
    pub n2: usize,
    pub pass_threshold: f64,
}

impl CompareReport {
    pub fn passes(&self) -> bool {
        self.value <= self.pass_threshold
    }
}

/// Runs the chain and compares ergodic means of `phi_m` against the
/// stationary moments of the limiting law.
pub fn stationary_compare_chain(
    init: &DiscreteSimplexState,
    cfg: &ChainConfig,
    m_list: &[u32],
) -> Result<Vec<MomentReport>> {
    let path = run_chain(init, cfg)?;
    m_list
        .iter()
        .map(|&m| {
            let exponent = f64::from(m);
            let (estimate, stderr) =
                ergodic_average(&path, |z| phi(z.freqs(), exponent).expect("m >= 2"))?;
            let analytic = stationary_moment(m, cfg.kernel().params())?;
            Ok(MomentReport::new(m, estimate, stderr, analytic))
        })
        .collect()
}

/// Mean absolute difference between the per-coordinate means of the top
/// `top_j` ranked coordinates of two samples. Missing coordinates count as
/// zero.
pub fn ranked_top_compare<A, B>(
    sample1: &[A],
    sample2: &[B],
    top_j: usize,
    pass_threshold: f64,
) -> Result<CompareReport>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if sample1.is_empty() || sample2.is_empty() || top_j == 0 {
        return Err(Error::InsufficientData(
            "ranked comparison needs two nonempty samples and top_j >= 1".into(),
        ));
    }
    let m1 = top_means(sample1, top_j);
    let m2 = top_means(sample2, top_j);
    let value = m1.iter().zip(&m2).map(|(a, b)| (a - b).abs()).sum::<f64>() / top_j as f64;
    Ok(CompareReport {
        statistic: Statistic::MeanAbsDiff,
        value,
        n1: sample1.len(),
        n2: sample2.len(),
        pass_threshold,
    })
}

/// Per-coordinate means of the top `top_j` ranked coordinates.
pub fn top_means<A: AsRef<[f64]>>(sample: &[A], top_j: usize) -> Vec<f64> {
    let mut sums = vec![0.0; top_j];
    for s in sample {
        for (acc, v) in sums.iter_mut().zip(s.as_ref()) {
            *acc += v;
        }
    }
    sums.iter().map(|s| s / sample.len() as f64).collect()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F1(x) - F2(x)|`.
pub fn ks_distance(sample1: &[f64], sample2: &[f64]) -> Result<f64> {
    if sample1.is_empty() || sample2.is_empty() {
        return Err(Error::InsufficientData("KS distance needs two nonempty samples".into()));
    }
    if sample1.iter().chain(sample2).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS distance is undefined for NaN values".into()));
    }
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        v
    };
    let (a, b) = (sorted(sample1), sorted(sample2));
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value `c * sqrt((n1 + n2) / (n1 n2))`
/// (`c = 1.63` for the 1% level).
pub fn ks_critical_value(n1: usize, n2: usize, c: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    c * ((a + b) / (a * b)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log y` on `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "log-log fit needs at least 3 points, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| v.is_nan() || **v <= 0.0 || v.is_infinite()) {
        return Err(Error::Domain(format!("log-log fit needs positive finite inputs, got {v}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LogLogFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn batch_means_of_constant() {
        let (m, se) = batch_means(&[2.5; 100]).unwrap();
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
        assert!(matches!(batch_means(&[1.0; 15]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn batch_means_stderr_scales_like_inverse_sqrt_n() {
        let mut rng = crate::rng::stream(11, 0);
        let draws: Vec<f64> = (0..2_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let (_, se_half) = batch_means(&draws[..1_000_000]).unwrap();
        let (_, se_full) = batch_means(&draws).unwrap();
        let ratio = se_full / se_half;
        assert!((0.6..=0.85).contains(&ratio), "ratio {ratio}");
        assert_relative_eq!(se_full, 1.0 / (2e6f64).sqrt(), max_relative = 0.1);
    }

    #[test]
    fn moment_report_z_score() {
        let r = MomentReport::new(2, 0.36, 0.005, 0.35);
        assert_relative_eq!(r.z_score, 2.0, max_relative = 1e-12);
        assert!(r.within(4.0, 0.0));
        assert!(!r.within(1.0, 0.0));
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [0.1, 0.4, 0.2, 0.9];
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap(), 1.0);
        assert!(ks_distance(&[], &a).is_err());
    }

    #[test]
    fn ks_matches_brute_force() {
        let mut rng = crate::rng::stream(5, 0);
        let a: Vec<f64> = (0..57).map(|_| (rng.random::<f64>() * 10.0).floor()).collect();
        let b: Vec<f64> = (0..31).map(|_| (rng.random::<f64>() * 12.0).floor()).collect();
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = a
            .iter()
            .chain(&b)
            .map(|&x| (cdf(&a, x) - cdf(&b, x)).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(ks_distance(&a, &b).unwrap(), brute, max_relative = 1e-15);
    }

    #[test]
    fn ks_same_law_below_critical_value() {
        let mut rng = crate::rng::stream(6, 0);
        let a: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_distance(&a, &b).unwrap() < ks_critical_value(10_000, 10_000, 1.63));
    }

    #[test]
    fn loglog_exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powf(-0.5)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.r2, 1.0, max_relative = 1e-12);
        let flat = loglog_fit(&x, &[3.0; 5]).unwrap();
        assert_eq!(flat.slope, 0.0);
    }

    #[test]
    fn loglog_noisy_power_law() {
        let mut rng = crate::rng::stream(8, 0);
        let x: Vec<f64> = (0..12).map(|i| 2f64.powi(i + 2)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 3.0 * v.powf(-0.5) * (1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((-0.55..=-0.45).contains(&fit.slope));
    }

    #[test]
    fn loglog_errors() {
        assert!(matches!(loglog_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData(_))));
        assert!(matches!(loglog_fit(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn ranked_top_compare_identical_is_zero() {
        let s = vec![vec![0.6, 0.3, 0.1], vec![0.5, 0.5, 0.0]];
        let r = ranked_top_compare(&s, &s, 3, 0.01).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.passes());
        let empty: Vec<Vec<f64>> = vec![];
        assert!(ranked_top_compare(&s, &empty, 3, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_transform_invariant(
            a in prop::collection::vec(-5.0f64..5.0, 1..60),
            b in prop::collection::vec(-5.0f64..5.0, 1..60),
        ) {
            let d = ks_distance(&a, &b).unwrap();
            prop_assert_eq!(d, ks_distance(&b, &a).unwrap());
            let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
            prop_assert!((d - ks_distance(&ta, &tb).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
