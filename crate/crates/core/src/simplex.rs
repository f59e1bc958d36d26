//! Points of the probability simplex, its lattice version, and ranked
//! (Kingman-simplex) states together with the ranking map.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `|sum - 1|` separating float noise from logic errors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the K-simplex: `K >= 2` nonnegative frequencies summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexState {
    freqs: Vec<f64>,
}

impl SimplexState {
    /// Validates and, when the sum is off by less than [`SIMPLEX_TOL`],
    /// renormalizes.
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.len() < 2 {
            return Err(Error::InvalidState(format!(
                "a simplex state needs K >= 2 coordinates, got {}",
                freqs.len()
            )));
        }
        check_coordinates(&freqs)?;
        let sum: f64 = freqs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidState(format!(
                "frequencies sum to {sum}, deviation {:e} exceeds {SIMPLEX_TOL:e}",
                (sum - 1.0).abs()
            )));
        }
        Ok(Self::renormalized(freqs, sum))
    }

    /// Normalizes an arbitrary nonnegative weight vector with positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidState(format!(
                "a simplex state needs K >= 2 coordinates, got {}",
                weights.len()
            )));
        }
        check_coordinates(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::InvalidState(format!(
                "weights must have a positive finite total, got {sum}"
            )));
        }
        Ok(Self::renormalized(weights, sum))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidState(format!("K >= 2 required, got {k}")));
        }
        Ok(Self {
            freqs: vec![1.0 / k as f64; k],
        })
    }

    /// The vertex putting all mass on coordinate `i`.
    pub fn vertex(k: usize, i: usize) -> Result<Self> {
        if k < 2 || i >= k {
            return Err(Error::InvalidState(format!(
                "vertex {i} is not a coordinate of a K = {k} simplex"
            )));
        }
        let mut freqs = vec![0.0; k];
        freqs[i] = 1.0;
        Ok(Self { freqs })
    }

    fn renormalized(mut freqs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            freqs.iter_mut().for_each(|z| *z /= sum);
        }
        Self { freqs }
    }

    pub fn k(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn into_freqs(self) -> Vec<f64> {
        self.freqs
    }

    /// Applies a coordinate permutation: output coordinate `i` is input
    /// coordinate `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidState(format!(
                "not a permutation of 0..{k}: {perm:?}"
            )));
        }
        Ok(Self {
            freqs: perm.iter().map(|&j| self.freqs[j]).collect(),
        })
    }
}

impl TryFrom<Vec<f64>> for SimplexState {
    type Error = Error;

    fn try_from(freqs: Vec<f64>) -> Result<Self> {
        SimplexState::new(freqs)
    }
}

impl From<SimplexState> for Vec<f64> {
    fn from(z: SimplexState) -> Self {
        z.freqs
    }
}

impl AsRef<[f64]> for SimplexState {
    fn as_ref(&self) -> &[f64] {
        &self.freqs
    }
}

fn check_coordinates(freqs: &[f64]) -> Result<()> {
    if let Some((i, z)) = freqs
        .iter()
        .enumerate()
        .find(|(_, z)| !z.is_finite() || **z < 0.0)
    {
        return Err(Error::InvalidState(format!(
            "coordinate {i} is {z}; frequencies must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// A lattice point of the simplex: allele counts in a population of size N.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteSimplexState {
    counts: Vec<u64>,
    n: u64,
}

impl DiscreteSimplexState {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidState(format!(
                "a discrete state needs K >= 2 counts, got {}",
                counts.len()
            )));
        }
        let n = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidState("count total overflows u64".into()))?;
        if n == 0 {
            return Err(Error::InvalidState("population size must be positive".into()));
        }
        Ok(Self { counts, n })
    }

    /// Checks the counts against an expected population size.
    pub fn with_population(counts: Vec<u64>, n: u64) -> Result<Self> {
        let state = Self::new(counts)?;
        if state.n != n {
            return Err(Error::InvalidState(format!(
                "counts sum to {}, expected N = {n}",
                state.n
            )));
        }
        Ok(state)
    }

    /// Rounds a continuous state to counts summing to `n` exactly
    /// (largest-remainder rounding).
    pub fn from_frequencies(z: &SimplexState, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidState("population size must be positive".into()));
        }
        let scaled: Vec<f64> = z.freqs().iter().map(|&f| f * n as f64).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|&s| s.floor() as u64).collect();
        let assigned: u64 = counts.iter().sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.partial_cmp(&ra).unwrap_or(Ordering::Equal)
        });
        for &i in order.iter().take((n.saturating_sub(assigned)) as usize) {
            counts[i] += 1;
        }
        Self::with_population(counts, n)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn to_simplex(&self) -> SimplexState {
        let n = self.n as f64;
        SimplexState {
            freqs: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }
}

/// A truncated point of the closed Kingman simplex: nonincreasing,
/// nonnegative, total mass at most one. The infinite tail of zeros is
/// implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RankedState {
    freqs: Vec<f64>,
}

impl RankedState {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidState("a ranked state needs at least one coordinate".into()));
        }
        check_coordinates(&freqs)?;
        if let Some(i) = freqs.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidState(format!(
                "ranked coordinates increase at index {}: {} < {}",
                i + 1,
                freqs[i],
                freqs[i + 1]
            )));
        }
        let mass: f64 = freqs.iter().sum();
        if mass > 1.0 + SIMPLEX_TOL {
            return Err(Error::InvalidState(format!(
                "ranked mass {mass} exceeds 1 + {SIMPLEX_TOL:e}"
            )));
        }
        Ok(Self { freqs })
    }

    pub fn k(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn into_freqs(self) -> Vec<f64> {
        self.freqs
    }

    pub fn mass(&self) -> f64 {
        self.freqs.iter().sum()
    }

    /// `1 - sum z_i`, positive only off the unit-mass face.
    pub fn mass_deficit(&self) -> f64 {
        1.0 - self.mass()
    }

    /// Keeps the top `j` coordinates.
    pub fn truncated(&self, j: usize) -> Self {
        let j = j.clamp(1, self.k());
        Self {
            freqs: self.freqs[..j].to_vec(),
        }
    }

    /// Pads with zeros up to `k` coordinates (no-op if already that long).
    pub fn padded(&self, k: usize) -> Self {
        let mut freqs = self.freqs.clone();
        if k > freqs.len() {
            freqs.resize(k, 0.0);
        }
        Self { freqs }
    }

    /// Embeds back into the simplex; requires unit mass and K >= 2.
    pub fn to_simplex(&self) -> Result<SimplexState> {
        SimplexState::new(self.freqs.clone())
    }

    pub(crate) fn from_sorted_unchecked(freqs: Vec<f64>) -> Self {
        debug_assert!(freqs.windows(2).all(|w| w[0] >= w[1]));
        Self { freqs }
    }
}

impl TryFrom<Vec<f64>> for RankedState {
    type Error = Error;

    fn try_from(freqs: Vec<f64>) -> Result<Self> {
        RankedState::new(freqs)
    }
}

impl From<RankedState> for Vec<f64> {
    fn from(z: RankedState) -> Self {
        z.freqs
    }
}

impl AsRef<[f64]> for RankedState {
    fn as_ref(&self) -> &[f64] {
        &self.freqs
    }
}

/// Descending order statistics of a simplex point.
///
/// Ties keep their original index order (stable sort), so the map is
/// deterministic.
pub fn rho_k(z: &SimplexState) -> RankedState {
    RankedState {
        freqs: sort_descending(z.freqs()),
    }
}

/// Values in nonincreasing order (stable among ties); the ranking map on
/// raw vectors that need not sum to one.
pub fn sort_descending(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    sorted
}
