use wfpd::generators::{
    apply_a_k_terms, b_phi_m, b_phi_product, bk_phi_m, bk_phi_product, phi, power_sum, uniform_bound, Callback,
    PhiProduct,
};
use wfpd::rng::stream;
use wfpd::sampler::{dirichlet_ranked, MixtureSampler, RankedStateSampler};
use wfpd::simplex::sort_descending;
use wfpd::{Params, RankedState};

fn params() -> Params {
    Params::general(1.0, 0.3).unwrap()
}

#[test]
fn square_of_phi2_expands_by_product_rule() {
    let p = params();
    let sq = PhiProduct::new(vec![2.0, 2.0]).unwrap();
    let mut s = MixtureSampler::new(p, 1);
    for i in 0..100 {
        let z = s.draw(3 + i % 40);
        let x = z.freqs();
        let phi2 = phi(x, 2.0).unwrap();
        let expected = 2.0 * phi2 * b_phi_m(x, 2.0, &p).unwrap() + 4.0 * (power_sum(x, 3.0) - phi2 * phi2);
        // Direct expansion of B(phi_2^2) in power sums.
        let direct = 2.0 * phi2 * (1.0 - p.alpha() - (1.0 + p.theta()) * phi2)
            + 4.0 * (power_sum(x, 3.0) - phi2 * phi2);
        let got = b_phi_product(x, &sq, &p);
        for want in [expected, direct] {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn finite_difference_a_k_on_product() {
    let p = params();
    let h = 1e-4;
    let prod = PhiProduct::new(vec![2.0, 3.0]).unwrap();
    let mut rng = stream(7, 0);
    let mut used = 0;
    let mut worst = 0.0f64;
    while used < 100 {
        let k = 3 + used % 5;
        let z = dirichlet_ranked(k, &mut rng);
        let f = z.freqs();
        if f.windows(2).any(|w| w[0] - w[1] < 10.0 * h) || f[k - 1] < 10.0 * h {
            continue;
        }
        used += 1;
        let g = |x: &[f64]| prod.value(&sort_descending(x));
        let fd = apply_a_k_terms(&Callback::FiniteDifference { f: &g, h }, &z.to_simplex().unwrap(), &p);
        let exact = bk_phi_product(&z, &prod, &p).unwrap();
        worst = worst.max((fd.total() - exact).abs() / fd.magnitude());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn zero_padded_states_converge_to_limit() {
    let p = params();
    let mut rng = stream(9, 0);
    for i in 0..20 {
        let base = dirichlet_ranked(2 + i % 12, &mut rng);
        for m in [2.5, 3.0, 4.0] {
            let limit = b_phi_m(base.freqs(), m, &p).unwrap();
            for e in [6, 8, 10, 12, 14] {
                let k = 1usize << e;
                let padded: RankedState = base.padded(k);
                let gap = (bk_phi_m(&padded, m, &p).unwrap() - limit).abs();
                let allowed = 1e-2 * p.alpha() + 10.0 * (p.theta() + p.alpha()) / k as f64;
                assert!(gap < allowed, "state {i}, m = {m}, K = {k}: gap {gap} > {allowed}");
            }
        }
    }
}

#[test]
fn finite_generators_are_uniformly_bounded() {
    for p in [params(), Params::general(0.1, 0.9).unwrap(), Params::general(-0.2, 0.5).unwrap()] {
        let mut s = MixtureSampler::new(p, 2);
        for m in [2.0, 2.5, 3.0, 5.0] {
            let c = uniform_bound(m, &p);
            let mut sup = 0.0f64;
            for k in [2, 4, 16, 128, 1024] {
                for _ in 0..300 {
                    sup = sup.max(bk_phi_m(&s.draw(k), m, &p).unwrap().abs());
                }
            }
            assert!(sup <= c, "m = {m}: sup {sup} > {c}");
        }
    }
}
