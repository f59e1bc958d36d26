//! Test functions `phi_m(z) = sum_i z_i^m` and the three generators acting
//! on them: `A_K` on smooth functions of `Delta_K`, the finite-K ranked
//! generator `B_K` on the algebra generated by the `phi_m`, and the limit
//! generator `B` on the same algebra over the closed Kingman simplex.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::loglog_fit;
use crate::error::{Error, Result};
use crate::kernel::{drift_from_freqs, MigrationTerms};
use crate::params::{Params, Regime};
use crate::sampler::{uniform_on, RankedStateSampler};
use crate::simplex::{RankedState, SimplexState, SIMPLEX_TOL};

/// `2 e^2`, the bound on `S(z)` over ranked states.
pub const FACT2_BOUND: f64 = 2.0 * E * E;

/// Tolerance for `lhs >= rhs` in the a-priori inequality.
pub const APRIORI_SLACK: f64 = 1e-10;

/// `u^s` for `u >= 0`, with `0^s = 0` for `s > 0` and `0^0 = 1`.
#[inline]
fn pow0(u: f64, s: f64) -> f64 {
    if u > 0.0 {
        (s * u.ln()).exp()
    } else if s == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `sum_i z_i^s` over the positive coordinates.
pub fn power_sum(freqs: &[f64], s: f64) -> f64 {
    freqs.iter().filter(|&&z| z > 0.0).map(|&z| (s * z.ln()).exp()).sum()
}

fn check_exponent(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 2.0) {
        return Err(Error::Domain(format!("phi_m needs a finite m >= 2, got {m}")));
    }
    Ok(())
}

/// `phi_m(z) = sum_i z_i^m` for real `m >= 2`. The constant `phi_1 = 1` is
/// not covered here.
pub fn phi(freqs: &[f64], m: f64) -> Result<f64> {
    check_exponent(m)?;
    Ok(power_sum(freqs, m))
}

/// `phi_{m-1}` as it enters the generators: the constant one when `m = 2`,
/// the power sum otherwise.
fn phi_below(freqs: &[f64], m: f64) -> f64 {
    if m == 2.0 {
        1.0
    } else {
        power_sum(freqs, m - 1.0)
    }
}

fn binom2(m: f64) -> f64 {
    m * (m - 1.0) / 2.0
}

/// A product `phi_{m_1} ... phi_{m_l}`; the empty product is the constant one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhiProduct {
    exponents: Vec<f64>,
}

impl PhiProduct {
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        for &m in &exponents {
            check_exponent(m)?;
        }
        Ok(Self { exponents })
    }

    pub fn one() -> Self {
        Self::default()
    }

    pub fn single(m: f64) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn value(&self, freqs: &[f64]) -> f64 {
        self.exponents.iter().map(|&m| power_sum(freqs, m)).product()
    }

    fn gradient(&self, freqs: &[f64]) -> DVector<f64> {
        let values: Vec<f64> = self.exponents.iter().map(|&m| power_sum(freqs, m)).collect();
        let mut grad = DVector::zeros(freqs.len());
        for (a, &m) in self.exponents.iter().enumerate() {
            let others = product_except(&values, &[a]);
            for (g, &z) in grad.iter_mut().zip(freqs) {
                *g += others * m * pow0(z, m - 1.0);
            }
        }
        grad
    }

    fn hessian(&self, freqs: &[f64]) -> DMatrix<f64> {
        let k = freqs.len();
        let values: Vec<f64> = self.exponents.iter().map(|&m| power_sum(freqs, m)).collect();
        let mut h = DMatrix::zeros(k, k);
        for (a, &m) in self.exponents.iter().enumerate() {
            let others = product_except(&values, &[a]);
            for (i, &z) in freqs.iter().enumerate() {
                h[(i, i)] += others * m * (m - 1.0) * pow0(z, m - 2.0);
            }
            for (b, &n) in self.exponents.iter().enumerate() {
                if a == b {
                    continue;
                }
                let rest = product_except(&values, &[a, b]);
                for i in 0..k {
                    let gi = m * pow0(freqs[i], m - 1.0);
                    for j in 0..k {
                        h[(i, j)] += rest * gi * n * pow0(freqs[j], n - 1.0);
                    }
                }
            }
        }
        h
    }
}

fn product_except(values: &[f64], skip: &[usize]) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, v)| v)
        .product()
}

/// A finite linear combination of [`PhiProduct`]s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhiPolynomial {
    pub terms: Vec<(f64, PhiProduct)>,
}

impl PhiPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plus(mut self, coef: f64, product: PhiProduct) -> Self {
        self.terms.push((coef, product));
        self
    }

    pub fn value(&self, freqs: &[f64]) -> f64 {
        self.terms.iter().map(|(c, p)| c * p.value(freqs)).sum()
    }
}

/// Carre du champ of two power sums,
/// `<grad phi_m, a grad phi_n> = m n (phi_{m+n-1} - phi_m phi_n)`.
pub fn carre_du_champ(freqs: &[f64], m: f64, n: f64) -> f64 {
    m * n * (power_sum(freqs, m + n - 1.0) - power_sum(freqs, m) * power_sum(freqs, n))
}

/// Generator of a product through the product rule
/// `G(phi psi) = psi G phi + phi G psi + Gamma(phi, psi)`, peeling one
/// factor at a time. `single` evaluates the generator on one factor.
fn product_rule<F>(freqs: &[f64], exponents: &[f64], single: &mut F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let Some((&m, rest)) = exponents.split_first() else {
        return (1.0, 0.0);
    };
    let (rest_value, rest_gen) = product_rule(freqs, rest, single);
    let phi_m = power_sum(freqs, m);
    let rest_values: Vec<f64> = rest.iter().map(|&n| power_sum(freqs, n)).collect();
    let gamma: f64 = rest
        .iter()
        .enumerate()
        .map(|(l, &n)| carre_du_champ(freqs, m, n) * product_except(&rest_values, &[l]))
        .sum();
    let value = phi_m * rest_value;
    let generator = rest_value * single(m) + phi_m * rest_gen + gamma;
    (value, generator)
}

/// `B phi_m = C(m,2)(phi_{m-1} - phi_m) - (m/2)(theta phi_m + alpha phi_{m-1})`
/// with `phi_1 = 1`. At `m = 2` this is `1 - alpha - (1 + theta) phi_2`.
///
/// `freqs` may be any truncated point of the closed Kingman simplex. Off
/// the unit-mass face, `phi_{m-1}` for `m > 2` differs from the constant
/// used at `m = 2`.
pub fn b_phi_m(freqs: &[f64], m: f64, params: &Params) -> Result<f64> {
    check_exponent(m)?;
    Ok(b_phi_m_unchecked(freqs, m, params))
}

fn b_phi_m_unchecked(freqs: &[f64], m: f64, params: &Params) -> f64 {
    let below = phi_below(freqs, m);
    let at = power_sum(freqs, m);
    binom2(m) * (below - at) - m / 2.0 * (params.theta() * at + params.alpha() * below)
}

/// `B` on a product of power sums.
pub fn b_phi_product(freqs: &[f64], product: &PhiProduct, params: &Params) -> f64 {
    product_rule(freqs, &product.exponents, &mut |m| b_phi_m_unchecked(freqs, m, params)).1
}

pub fn b_polynomial(freqs: &[f64], poly: &PhiPolynomial, params: &Params) -> f64 {
    poly.terms.iter().map(|(c, p)| c * b_phi_product(freqs, p, params)).sum()
}

fn check_unit_mass(z: &RankedState) -> Result<()> {
    let tol = SIMPLEX_TOL.max(4.0 * f64::EPSILON * z.k() as f64);
    let mass = z.mass();
    if (mass - 1.0).abs() > tol {
        return Err(Error::Domain(format!(
            "the finite-K generator needs a ranked state of unit mass, got mass {mass}"
        )));
    }
    if z.k() < 2 {
        return Err(Error::Domain("the finite-K generator needs K >= 2".into()));
    }
    Ok(())
}

/// A ranked unit-mass state with the quantities every `B_K phi_m`
/// evaluation shares: `log z_i`, `(1 - z_i)^K` and `S(z)`.
#[derive(Debug, Clone)]
pub struct PreparedState<'a> {
    freqs: &'a [f64],
    ln: Vec<f64>,
    no_success: Vec<f64>,
    outflow_ratio: f64,
    regime: Regime,
}

/// `B_K phi_m` and `B phi_m` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorPair {
    pub finite: f64,
    pub limit: f64,
}

impl GeneratorPair {
    pub fn gap(&self) -> f64 {
        (self.finite - self.limit).abs()
    }
}

impl<'a> PreparedState<'a> {
    /// `K` is the number of coordinates of `z`.
    pub fn new(z: &'a RankedState, regime: Regime) -> Result<Self> {
        check_unit_mass(z)?;
        let freqs = z.freqs();
        let ln = freqs
            .iter()
            .map(|&u| if u > 0.0 { u.ln() } else { f64::NEG_INFINITY })
            .collect();
        let terms = MigrationTerms::new(freqs, regime);
        let outflow_ratio = terms.outflow_ratio();
        let no_success = terms.no_success;
        Ok(Self {
            freqs,
            ln,
            no_success,
            outflow_ratio,
            regime,
        })
    }

    pub fn k(&self) -> usize {
        self.freqs.len()
    }

    /// `S(z)` (or its `r_bar` analogue).
    pub fn outflow_ratio(&self) -> f64 {
        self.outflow_ratio
    }

    pub fn power_sum(&self, s: f64) -> f64 {
        self.ln.iter().filter(|l| l.is_finite()).map(|&l| (s * l).exp()).sum()
    }

    fn check_regime(&self, params: &Params) -> Result<()> {
        if params.regime() != self.regime {
            return Err(Error::InvalidParams(format!(
                "state prepared for regime {:?}, parameters are {:?}",
                self.regime,
                params.regime()
            )));
        }
        Ok(())
    }

    /// Both generators on `phi_m` from one pass over the coordinates.
    pub fn generators(&self, m: f64, params: &Params) -> Result<GeneratorPair> {
        check_exponent(m)?;
        self.check_regime(params)?;
        let k = self.k() as f64;
        let (theta, alpha) = (params.theta(), params.alpha());
        let s = self.outflow_ratio;
        let mut below = 0.0;
        let mut at = 0.0;
        let mut migration = 0.0;
        for ((&l, &z), &w) in self.ln.iter().zip(self.freqs).zip(&self.no_success) {
            if !l.is_finite() {
                continue;
            }
            let zb = ((m - 1.0) * l).exp();
            below += zb;
            at += zb * z;
            let retained = match self.regime {
                Regime::General => 1.0 - z,
                Regime::ThetaNonneg => 1.0,
            };
            migration += w * zb * (retained + s);
        }
        let limit_below = if m == 2.0 { 1.0 } else { below };
        let limit = binom2(m) * (limit_below - at) - m / 2.0 * (theta * at + alpha * limit_below);
        let finite = binom2(m) * (below - at)
            + m / 2.0 * params.mutation_intensity() / (k - 1.0) * (below - at)
            - m / 2.0 * (theta * at + alpha * below)
            + m / 2.0 * alpha * migration;
        Ok(GeneratorPair { finite, limit })
    }

    pub fn bk_phi_m(&self, m: f64, params: &Params) -> Result<f64> {
        Ok(self.generators(m, params)?.finite)
    }
}

/// `B_K phi_m` at a ranked unit-mass state, `K` the number of coordinates:
///
/// `C(m,2)(phi_{m-1} - phi_m) + (m/2) mu/(K-1) (phi_{m-1} - phi_m)
///  - (m/2)(theta phi_m + alpha phi_{m-1})
///  + (m/2) alpha sum_i (1-z_i)^K z_i^{m-1} (c_i + S(z))`
///
/// where `mu = theta + alpha`, `c_i = 1 - z_i` in the general regime and
/// `mu = theta`, `c_i = 1`, `S` built from `r_bar` when `theta >= 0` is
/// enforced.
pub fn bk_phi_m(z: &RankedState, m: f64, params: &Params) -> Result<f64> {
    PreparedState::new(z, params.regime())?.bk_phi_m(m, params)
}

/// `B_K` on a product of power sums.
pub fn bk_phi_product(z: &RankedState, product: &PhiProduct, params: &Params) -> Result<f64> {
    let prepared = PreparedState::new(z, params.regime())?;
    let mut err = None;
    let value = product_rule(z.freqs(), &product.exponents, &mut |m| {
        prepared.bk_phi_m(m, params).unwrap_or_else(|e| {
            err = Some(e);
            f64::NAN
        })
    })
    .1;
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

pub fn bk_polynomial(z: &RankedState, poly: &PhiPolynomial, params: &Params) -> Result<f64> {
    poly.terms
        .iter()
        .map(|(c, p)| Ok(c * bk_phi_product(z, p, params)?))
        .sum()
}

/// A function on `R^K` with analytic first and second derivatives.
pub trait SmoothFunction {
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64]) -> DVector<f64>;
    fn hessian(&self, z: &[f64]) -> DMatrix<f64>;
}

impl SmoothFunction for PhiProduct {
    fn value(&self, z: &[f64]) -> f64 {
        PhiProduct::value(self, z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        PhiProduct::gradient(self, z)
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        PhiProduct::hessian(self, z)
    }
}

impl SmoothFunction for PhiPolynomial {
    fn value(&self, z: &[f64]) -> f64 {
        PhiPolynomial::value(self, z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        self.terms
            .iter()
            .fold(DVector::zeros(z.len()), |acc, (c, p)| acc + p.gradient(z) * *c)
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        self.terms
            .iter()
            .fold(DMatrix::zeros(z.len(), z.len()), |acc, (c, p)| acc + p.hessian(z) * *c)
    }
}

/// How `A_K` obtains derivatives of its argument.
pub enum Callback<'a> {
    Analytic(&'a dyn SmoothFunction),
    /// Central differences with step `h` along the directions
    /// `e_i - z` (second order) and `b(z)` (first order), all of which stay
    /// on the hyperplane `sum z_i = 1`.
    FiniteDifference { f: &'a dyn Fn(&[f64]) -> f64, h: f64 },
}

/// The two parts of `A_K f(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AkTerms {
    /// `1/2 sum_ij a_ij d_ij f`.
    pub second_order: f64,
    /// `sum_i b_i d_i f`.
    pub first_order: f64,
}

impl AkTerms {
    pub fn total(&self) -> f64 {
        self.second_order + self.first_order
    }

    /// `|second_order| + |first_order|`, the natural scale for relative
    /// errors of the total.
    pub fn magnitude(&self) -> f64 {
        self.second_order.abs() + self.first_order.abs()
    }
}

/// `A_K f(z) = 1/2 sum_ij a_ij(z) d_ij f(z) + sum_i b_i(z) d_i f(z)`.
pub fn apply_a_k(f: &Callback<'_>, z: &SimplexState, params: &Params) -> f64 {
    apply_a_k_terms(f, z, params).total()
}

pub fn apply_a_k_terms(f: &Callback<'_>, z: &SimplexState, params: &Params) -> AkTerms {
    let x = z.freqs();
    let b = drift_from_freqs(x, params);
    match f {
        Callback::Analytic(g) => {
            let grad = g.gradient(x);
            let hess = g.hessian(x);
            let zv = DVector::from_column_slice(x);
            let diag: f64 = x.iter().enumerate().map(|(i, &zi)| zi * hess[(i, i)]).sum();
            let quad = zv.dot(&(&hess * &zv));
            AkTerms {
                second_order: 0.5 * (diag - quad),
                first_order: b.iter().zip(grad.iter()).map(|(bi, gi)| bi * gi).sum(),
            }
        }
        Callback::FiniteDifference { f, h } => {
            // a(z) = sum_i z_i (e_i - z)(e_i - z)^T on the simplex, so the
            // trace term is a weighted sum of second directional derivatives.
            let h = *h;
            let f0 = f(x);
            let shifted = |dir: &[f64], t: f64| -> Vec<f64> {
                x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect()
            };
            let mut second = 0.0;
            let mut dir = vec![0.0; x.len()];
            for (i, &zi) in x.iter().enumerate() {
                if zi == 0.0 {
                    continue;
                }
                for (j, d) in dir.iter_mut().enumerate() {
                    *d = if i == j { 1.0 - x[j] } else { -x[j] };
                }
                let plus = f(&shifted(&dir, h));
                let minus = f(&shifted(&dir, -h));
                second += zi * (plus - 2.0 * f0 + minus) / (h * h);
            }
            let first = (f(&shifted(&b, h)) - f(&shifted(&b, -h))) / (2.0 * h);
            AkTerms {
                second_order: 0.5 * second,
                first_order: first,
            }
        }
    }
}

/// The explicit bound on `sup |B_K phi_m - B phi_m|` over ranked states:
/// `(m/2)(theta+alpha)/(K-1) + (m/2) alpha (1 + 2e^2) K ((m-1)/(K+m-1))^{m-1}`.
pub fn gap_bound(m: f64, k: usize, params: &Params) -> f64 {
    let kf = k as f64;
    let c = m - 1.0;
    m / 2.0 * (params.theta() + params.alpha()) / (kf - 1.0)
        + m / 2.0 * params.alpha() * (1.0 + FACT2_BOUND) * kf * (c / (kf + c)).powf(c)
}

/// `sup_{K >= 2} K ((m-1)/(K+m-1))^{m-1}`.
fn sup_over_k_of_power_term(m: f64) -> f64 {
    let c = m - 1.0;
    let g = |k: f64| k * (c / (k + c)).powf(c);
    if c <= 1.0 {
        // Increasing in K with limit c^c = 1 at c = 1.
        return 1.0_f64.max(g(2.0));
    }
    let peak = (c / (c - 1.0)).ceil().max(2.0);
    let upper = peak as usize + 1;
    (2..=upper).map(|k| g(k as f64)).fold(0.0, f64::max)
}

/// Constant bounding `|B_K phi_m|` uniformly in `K` on ranked states:
/// `C(m,2) + m (|theta| + alpha) + (m/2) alpha (1 + 2e^2) sup_K K ((m-1)/(K+m-1))^{m-1}`.
pub fn uniform_bound(m: f64, params: &Params) -> f64 {
    let drift = params.theta().abs() + params.alpha();
    binom2(m) + m * drift + m / 2.0 * params.alpha() * (1.0 + FACT2_BOUND) * sup_over_k_of_power_term(m)
}

/// Largest `|B_K phi_m - B phi_m|` over the `K`-uniform state, the vertex
/// and `n` states from `sampler`; a lower bound on the sup-norm gap.
pub fn sup_gap<S: RankedStateSampler + ?Sized>(
    m: f64,
    k: usize,
    params: &Params,
    sampler: &mut S,
    n: usize,
) -> Result<f64> {
    check_exponent(m)?;
    if k < 2 {
        return Err(Error::Domain(format!("K >= 2 required, got {k}")));
    }
    let anchors = [uniform_on(k, k), uniform_on(1, k)];
    let mut best = 0.0f64;
    for z in anchors.iter().cloned().chain((0..n).map(|_| sampler.draw(k))) {
        let gap = PreparedState::new(&z, params.regime())?.generators(m, params)?.gap();
        best = best.max(gap);
    }
    Ok(best)
}

/// Per-K sup-gap estimates and their log-log decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub m: f64,
    pub k_values: Vec<usize>,
    pub sup_gaps: Vec<f64>,
    pub bounds: Vec<f64>,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub fit_r2: f64,
    pub sample_size: usize,
}

impl GapReport {
    /// Every measured gap is within the explicit bound.
    pub fn within_bounds(&self) -> bool {
        self.sup_gaps.iter().zip(&self.bounds).all(|(g, b)| g <= b)
    }

    /// The gap shows no decay in `K` (`|slope| < 0.1`).
    pub fn non_vanishing(&self) -> bool {
        self.fit_slope.abs() < 0.1
    }
}

/// Sup-gap estimates over `k_values` and the least-squares slope of
/// `log gap` against `log K`. Needs at least four distinct K values.
pub fn fit_gap_rate<S: RankedStateSampler + ?Sized>(
    m: f64,
    k_values: &[usize],
    params: &Params,
    sampler: &mut S,
    n: usize,
) -> Result<GapReport> {
    let mut distinct = k_values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "a gap-rate fit needs at least 4 distinct K values, got {}",
            distinct.len()
        )));
    }
    let sup_gaps = k_values
        .iter()
        .map(|&k| sup_gap(m, k, params, sampler, n))
        .collect::<Result<Vec<_>>>()?;
    let bounds = k_values.iter().map(|&k| gap_bound(m, k, params)).collect();
    let xs: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    let fit = loglog_fit(&xs, &sup_gaps)?;
    Ok(GapReport {
        m,
        k_values: k_values.to_vec(),
        sup_gaps,
        bounds,
        fit_slope: fit.slope,
        fit_intercept: fit.intercept,
        fit_r2: fit.r2,
        sample_size: n,
    })
}

/// Both sides of the a-priori inequality for `B_K(phi_2 - phi_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// For `2 < m < 3`:
/// `B_K(phi_2 - phi_m) >= 1 - alpha - (m(m-1-alpha)/2) phi_{m-1}
///  - [(1+theta) phi_2 - (m(m-1+theta)/2) phi_m]
///  - [3(theta+alpha)/(2(K-1)) + alpha(1+2e^2)/(2(K+1))]`.
pub fn apriori_inequality_check(z: &RankedState, m: f64, params: &Params) -> Result<AprioriCheck> {
    let prepared = PreparedState::new(z, params.regime())?;
    apriori_prepared(&prepared, m, params)
}

pub fn apriori_prepared(z: &PreparedState<'_>, m: f64, params: &Params) -> Result<AprioriCheck> {
    if !(m > 2.0 && m < 3.0) {
        return Err(Error::Domain(format!("the a-priori inequality needs 2 < m < 3, got {m}")));
    }
    let (theta, alpha) = (params.theta(), params.alpha());
    let k = z.k() as f64;
    let lhs = z.bk_phi_m(2.0, params)? - z.bk_phi_m(m, params)?;
    let phi2 = z.power_sum(2.0);
    let phi_m = z.power_sum(m);
    let phi_below = z.power_sum(m - 1.0);
    let rhs = 1.0
        - alpha
        - m * (m - 1.0 - alpha) / 2.0 * phi_below
        - ((1.0 + theta) * phi2 - m * (m - 1.0 + theta) / 2.0 * phi_m)
        - (3.0 * (theta + alpha) / (2.0 * (k - 1.0)) + alpha * (1.0 + FACT2_BOUND) / (2.0 * (k + 1.0)));
    Ok(AprioriCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - APRIORI_SLACK,
    })
}

/// Trapezoidal `int (1 - sum_i z_i(t)) dt` along a ranked path sampled
/// every `dt`.
pub fn mass_deficit_statistic(path: &[RankedState], dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let deficits: Vec<f64> = path.iter().map(RankedState::mass_deficit).collect();
    Ok(deficits.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum())
}
