use wfpd::analysis::{batch_means, iid_mean, ks_critical_value, ks_distance};
use wfpd::diffusion::{
    default_burn_in, diffusion_coeff, diffusion_step, simulate_diffusion, stationary_ranked_sample, DiffusionConfig,
};
use wfpd::generators::{mass_deficit_statistic, phi};
use wfpd::kernel::drift_b;
use wfpd::rng::stream;
use wfpd::{rho_k, Params, RankedState, SimplexState};

fn params() -> Params {
    Params::general(1.0, 0.3).unwrap()
}

#[test]
fn one_step_moments_match_coefficients() {
    let z = SimplexState::new(vec![0.5, 0.3, 0.2]).unwrap();
    let dt = 1e-3;
    let cfg = DiffusionConfig::new(params(), 3, dt, dt, 1).unwrap();
    let b = drift_b(&z, &params());
    let a = diffusion_coeff(&z);
    let draws = 1_000_000;
    let mut rng = stream(31, 0);
    let steps: Vec<[f64; 3]> = (0..draws)
        .map(|_| {
            let next = diffusion_step(&z, &cfg, &mut rng).unwrap();
            let f = next.freqs();
            [f[0] - 0.5, f[1] - 0.3, f[2] - 0.2]
        })
        .collect();
    for i in 0..3 {
        let (mean, se) = iid_mean(&steps.iter().map(|d| d[i]).collect::<Vec<_>>()).unwrap();
        assert!((mean - b[i] * dt).abs() < 4.0 * se, "mean {i}: {mean} vs {}", b[i] * dt);
        for j in 0..3 {
            let prod: Vec<f64> = steps.iter().map(|d| d[i] * d[j]).collect();
            let (m2, se2) = iid_mean(&prod).unwrap();
            // Second moment minus the squared drift, which is O(dt^2).
            let cov = m2 - b[i] * b[j] * dt * dt;
            assert!((cov - a[(i, j)] * dt).abs() < 4.0 * se2, "cov {i}{j}: {} vs {}", cov / dt, a[(i, j)]);
        }
    }
}

#[test]
fn stationary_homozygosity_at_k50() {
    let p = params();
    let cfg = DiffusionConfig::with_default_dt(p, 50, 0.0, 5).unwrap();
    let init = SimplexState::uniform(50).unwrap();
    let sample = stationary_ranked_sample(&init, &cfg, 0, default_burn_in(&p), 0.1, 4000).unwrap();
    let values: Vec<f64> = sample.iter().map(|r| phi(r.freqs(), 2.0).unwrap()).collect();
    let (mean, se) = batch_means(&values).unwrap();
    assert!((mean - 0.35).abs() <= 4.0 * se + 0.03, "{mean} +- {se}");
}

fn mean_phi3_at_one(k: usize, reps: u64) -> (f64, f64) {
    let cfg = DiffusionConfig::with_default_dt(params(), k, 1.0, 9).unwrap();
    let init = SimplexState::uniform(k).unwrap();
    let values: Vec<f64> = (0..reps)
        .map(|r| phi(simulate_diffusion(&init, &cfg, r, |_, _| {}).unwrap().freqs(), 3.0).unwrap())
        .collect();
    iid_mean(&values).unwrap()
}

#[test]
fn phi3_at_fixed_time_self_converges_in_k() {
    let ks = [10, 30, 100, 300];
    let means: Vec<(f64, f64)> = ks.iter().map(|&k| mean_phi3_at_one(k, 4000)).collect();
    // (difference, its standard error) between neighbouring K.
    let diffs: Vec<(f64, f64)> = means.windows(2).map(|w| (w[1].0 - w[0].0, w[0].1.hypot(w[1].1))).collect();
    let (d0, s0) = diffs[0];
    assert!(d0.abs() > 3.0 * s0, "first step unresolved: {means:?}");
    for &(d, s) in &diffs[1..] {
        assert!(d * d0.signum() > -3.0 * s, "significant reversal: {means:?}");
    }
    for w in diffs.windows(2) {
        let ((a, sa), (b, sb)) = (w[0], w[1]);
        assert!(1.5 * b.abs() - a.abs() <= 3.0 * (1.5 * sb).hypot(sa), "differences {diffs:?} from {means:?}");
    }
}

#[test]
fn ranked_law_is_exchangeable() {
    let cfg = DiffusionConfig::with_default_dt(params(), 3, 0.5, 13).unwrap();
    let a = SimplexState::new(vec![0.6, 0.3, 0.1]).unwrap();
    let b = a.permuted(&[2, 0, 1]).unwrap();
    let reps = 10_000u64;
    let run = |init: &SimplexState, offset: u64| -> Vec<f64> {
        (0..reps)
            .map(|r| {
                let end = simulate_diffusion(init, &cfg, offset + r, |_, _| {}).unwrap();
                phi(rho_k(&end).freqs(), 2.0).unwrap()
            })
            .collect()
    };
    let d = ks_distance(&run(&a, 0), &run(&b, reps)).unwrap();
    assert!(d < ks_critical_value(reps as usize, reps as usize, 1.63), "KS = {d}");
}

#[test]
fn truncated_export_loses_mass() {
    let p = params();
    let k = 1000;
    let cfg = DiffusionConfig::with_default_dt(p, k, 0.0, 17).unwrap();
    let init = SimplexState::uniform(k).unwrap();
    let spacing = 0.05;
    let path = stationary_ranked_sample(&init, &cfg, 0, default_burn_in(&p), spacing, 200).unwrap();
    assert!(mass_deficit_statistic(&path, spacing).unwrap().abs() < 1e-9);
    let deficits: Vec<f64> = [5, 10, 20, 40]
        .iter()
        .map(|&j| {
            let cut: Vec<RankedState> = path.iter().map(|r| r.truncated(j)).collect();
            mass_deficit_statistic(&cut, spacing).unwrap()
        })
        .collect();
    assert!(deficits[0] > 0.0);
    assert!(deficits.windows(2).all(|w| w[1] < w[0]), "{deficits:?}");
}

#[test]
fn constant_uniform_path_deficit() {
    let k = 50;
    let j = 10;
    let dt = 0.01;
    let state = rho_k(&SimplexState::uniform(k).unwrap()).truncated(j);
    let path = vec![state; 101];
    let t_end = 100.0 * dt;
    let got = mass_deficit_statistic(&path, dt).unwrap();
    assert!((got - (1.0 - j as f64 / k as f64) * t_end).abs() < 1e-12, "{got}");
}
