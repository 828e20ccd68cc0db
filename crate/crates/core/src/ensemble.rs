//! Degree distributions and their conversion from a q-ary Tanner graph to
//! the graph of its binary image.
//!
//! A random nonzero label contributes a `p×p` block whose rows (and columns)
//! have Hamming weight `w` with probability `a_w = C(p, w) / (q - 1)`. A
//! degree-`i` check node therefore gives rise to `p` binary checks whose
//! degree is distributed as the coefficients `b_{j,i}` of
//! `(a_1 x + … + a_p x^p)^i`; the same holds column-wise for variable nodes.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Edge-perspective degree distribution: degree `d` maps to the fraction of
/// edges attached to degree-`d` nodes (the coefficient of `x^(d-1)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<usize, f64>", into = "BTreeMap<usize, f64>")]
pub struct DegreeDistribution {
    coeffs: BTreeMap<usize, f64>,
}

impl TryFrom<BTreeMap<usize, f64>> for DegreeDistribution {
    type Error = Error;

    fn try_from(coeffs: BTreeMap<usize, f64>) -> Result<Self> {
        DegreeDistribution::new(coeffs)
    }
}

impl From<DegreeDistribution> for BTreeMap<usize, f64> {
    fn from(d: DegreeDistribution) -> Self {
        d.coeffs
    }
}

impl DegreeDistribution {
    /// Validates nonnegative weights on degrees ≥ 1 summing to one.
    pub fn new(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (d, w) in coeffs {
            if d == 0 {
                return Err(Error::InvalidDistribution("degree 0".into()));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} for degree {d}"
                )));
            }
            *map.entry(d).or_insert(0.0) += w;
        }
        let sum: f64 = map.values().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(DegreeDistribution { coeffs: map })
    }

    /// Scales nonnegative weights so that they sum to one.
    pub fn normalized(coeffs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let pairs: Vec<(usize, f64)> = coeffs.into_iter().collect();
        let sum: f64 = pairs.iter().map(|&(_, w)| w).sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidDistribution(format!("total weight {sum}")));
        }
        let mut map = BTreeMap::new();
        for (d, w) in pairs {
            if d == 0 || !(w >= 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} for degree {d}"
                )));
            }
            *map.entry(d).or_insert(0.0) += w / sum;
        }
        Ok(DegreeDistribution { coeffs: map })
    }

    /// Every edge on a degree-`d` node.
    pub fn regular(d: usize) -> Self {
        DegreeDistribution {
            coeffs: BTreeMap::from([(d, 1.0)]),
        }
    }

    /// Fraction of edges on degree-`d` nodes (zero outside the support).
    pub fn get(&self, d: usize) -> f64 {
        self.coeffs.get(&d).copied().unwrap_or(0.0)
    }

    /// Iterates `(degree, weight)` in increasing degree, including explicit zeros.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().map(|(&d, &w)| (d, w))
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    /// Smallest degree with positive weight.
    pub fn min_degree(&self) -> usize {
        self.iter().find(|&(_, w)| w > 0.0).map_or(0, |(d, _)| d)
    }

    /// Largest degree with positive weight.
    pub fn max_degree(&self) -> usize {
        self.iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(d, _)| d)
            .last()
            .unwrap_or(0)
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.values().sum()
    }

    /// `Σ_d w_d / d`, the inverse of the average node degree.
    pub fn inverse_mean_degree(&self) -> f64 {
        self.iter().map(|(d, w)| w / d as f64).sum()
    }

    /// Average node degree (node perspective).
    pub fn mean_node_degree(&self) -> f64 {
        1.0 / self.inverse_mean_degree()
    }

    /// `Σ_d w_d x^(d-1)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.iter().map(|(d, w)| w * x.powi(d as i32 - 1)).sum()
    }

    /// Node-perspective fractions `(w_d / d) / Σ (w_d / d)`.
    pub fn node_fractions(&self) -> Vec<(usize, f64)> {
        let inv = self.inverse_mean_degree();
        self.iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(d, w)| (d, (w / d as f64) / inv))
            .collect()
    }

    /// L∞ distance over the union of supports.
    pub fn linf_distance(&self, other: &DegreeDistribution) -> f64 {
        self.degrees()
            .chain(other.degrees())
            .map(|d| (self.get(d) - other.get(d)).abs())
            .fold(0.0, f64::max)
    }

    /// Fails unless every degree with positive weight is at least 2.
    pub fn require_min_degree(&self, min: usize) -> Result<()> {
        match self.iter().find(|&(d, w)| w > 0.0 && d < min) {
            Some((d, _)) => Err(Error::InvalidDistribution(format!(
                "degree {d} below minimum {min}"
            ))),
            None => Ok(()),
        }
    }

    /// Wraps coefficients without validation.
    pub(crate) fn with_weights(coeffs: BTreeMap<usize, f64>) -> Self {
        DegreeDistribution { coeffs }
    }
}

/// Row-weight distribution of a random matrix label.
#[derive(Clone, Debug, PartialEq)]
pub struct RowWeightProfile {
    p: u32,
    counts: Vec<u64>,
    a: Vec<f64>,
    d_m: f64,
}

impl RowWeightProfile {
    /// Profile from integer multiplicities, `counts[w-1]` rows of weight `w`.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::Config("empty row-weight profile".into()));
        }
        let a: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let d_m = a
            .iter()
            .enumerate()
            .map(|(i, &ai)| (i + 1) as f64 * ai)
            .sum();
        Ok(RowWeightProfile {
            p: counts.len() as u32,
            counts,
            a,
            d_m,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// `a_w` for `w = 1..=p` (index `w - 1`).
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Average row weight.
    pub fn d_m(&self) -> f64 {
        self.d_m
    }
}

/// Profile of uniformly random nonzero labels: `a_w = C(p, w) / (2^p - 1)`.
pub fn uniform_label_profile(p: u32) -> RowWeightProfile {
    assert!((1..=crate::gfield::MAX_DEGREE).contains(&p));
    let counts = (1..=p).map(|w| binomial(p, w)).collect();
    RowWeightProfile::from_counts(counts).expect("nonempty profile")
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * u64::from(n - i) / u64::from(i + 1))
}

/// Exact coefficients of `(Σ_w counts_w x^w)^i` together with the common
/// denominator `(Σ_w counts_w)^i`.
fn expand_exact(profile: &RowWeightProfile, i: usize) -> (Vec<BigUint>, BigUint) {
    let base: Vec<BigUint> = std::iter::once(BigUint::zero())
        .chain(profile.counts.iter().map(|&c| BigUint::from(c)))
        .collect();
    let mut acc = vec![BigUint::one()];
    for _ in 0..i {
        let mut next = vec![BigUint::zero(); acc.len() + base.len() - 1];
        for (x, cx) in acc.iter().enumerate() {
            if cx.is_zero() {
                continue;
            }
            for (y, cy) in base.iter().enumerate() {
                if !cy.is_zero() {
                    next[x + y] += cx * cy;
                }
            }
        }
        acc = next;
    }
    let total: u64 = profile.counts.iter().sum();
    (acc, BigUint::from(total).pow(i as u32))
}

/// `b_{j,i}`: probability that a binary check inside a degree-`i` check
/// node has degree `j`. Keys span `i..=p·i` and the values sum to one.
pub fn expand_weight_polynomial(profile: &RowWeightProfile, i: usize) -> BTreeMap<usize, f64> {
    let (coeffs, denom) = expand_exact(profile, i);
    let denom = BigInt::from(denom);
    coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(j, c)| {
            let r = BigRational::new(BigInt::from(c), denom.clone());
            (j, r.to_f64().unwrap_or(0.0))
        })
        .collect()
}

/// Caches `b_{j,i}` for repeated conversions against one profile.
#[derive(Clone, Debug)]
pub struct BinaryDegreeConverter {
    profile: RowWeightProfile,
    expansions: Vec<Vec<(usize, f64)>>,
}

impl BinaryDegreeConverter {
    pub fn new(profile: RowWeightProfile) -> Self {
        BinaryDegreeConverter {
            profile,
            expansions: Vec::new(),
        }
    }

    /// Precomputes expansions up to `max_degree`.
    pub fn with_max_degree(profile: RowWeightProfile, max_degree: usize) -> Self {
        let mut conv = Self::new(profile);
        conv.ensure(max_degree);
        conv
    }

    pub fn profile(&self) -> &RowWeightProfile {
        &self.profile
    }

    fn ensure(&mut self, max_degree: usize) {
        while self.expansions.len() <= max_degree {
            let i = self.expansions.len();
            self.expansions
                .push(expand_weight_polynomial(&self.profile, i).into_iter().collect());
        }
    }

    fn expansion(&self, i: usize) -> Option<&[(usize, f64)]> {
        self.expansions.get(i).map(|v| v.as_slice())
    }

    /// Binary-image distribution `ŵ_j ∝ Σ_i b_{j,i} · j · w_i / i`.
    pub fn convert(&mut self, dist: &DegreeDistribution) -> DegreeDistribution {
        self.ensure(dist.max_degree());
        self.convert_cached(dist)
            .expect("expansions cover the distribution")
    }

    /// As [`convert`](Self::convert) without extending the cache; `None` when
    /// `dist` has a degree beyond the precomputed range.
    pub fn convert_cached(&self, dist: &DegreeDistribution) -> Option<DegreeDistribution> {
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in dist.iter().filter(|&(_, w)| w > 0.0) {
            for &(j, b) in self.expansion(i)? {
                *out.entry(j).or_insert(0.0) += b * j as f64 * w / i as f64;
            }
        }
        let total: f64 = out.values().sum();
        for v in out.values_mut() {
            *v /= total;
        }
        Some(DegreeDistribution::with_weights(out))
    }
}

/// Converts a q-ary distribution (variable or check side) to the binary image.
pub fn convert_distribution(
    dist: &DegreeDistribution,
    profile: &RowWeightProfile,
) -> DegreeDistribution {
    BinaryDegreeConverter::new(profile.clone()).convert(dist)
}

/// Design rate `1 - (Σ ρ_i / i) / (Σ λ_i / i)`.
pub fn design_rate(lambda: &DegreeDistribution, rho: &DegreeDistribution) -> Result<f64> {
    let lv = lambda.inverse_mean_degree();
    if !(lv > 0.0) {
        return Err(Error::InvalidDistribution(
            "variable distribution has no mass".into(),
        ));
    }
    Ok(1.0 - rho.inverse_mean_degree() / lv)
}
