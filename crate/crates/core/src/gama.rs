//! The GAMA per-position importance statistic.
//!
//! For positions `t = 1..=N`:
//!
//! ```text
//! M(t) = |median(D_t,ref) − median(D_t,trained)| / w(t)
//! w(t) = (var(D_t,ref) + var(D_t,trained)) / Σ_i (var(D_i,ref) + var(D_i,trained))
//! ```
//!
//! Variances are population variances; `w(t)` is floored at `epsilon`.

use serde::{Deserialize, Serialize};

use crate::attribution::IgDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamaProfile {
    values: Vec<f64>,
    epsilon_used: Vec<bool>,
}

impl GamaProfile {
    pub fn new(values: Vec<f64>, epsilon_used: Vec<bool>) -> Result<Self> {
        if values.len() != epsilon_used.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: epsilon_used.len(),
            });
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("GAMA values must be ≥ 0".into()));
        }
        Ok(Self {
            values,
            epsilon_used,
        })
    }

    /// Profile from values alone, no flooring flags.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![false; n])
    }

    /// `M(t)` for 1-based `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epsilon_used(&self) -> &[bool] {
        &self.epsilon_used
    }

    /// Number of positions, N.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Median of an already sorted slice; midpoint of the central pair for even sizes.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn gama_profile(
    reference: &IgDistribution,
    trained: &IgDistribution,
    epsilon: f64,
) -> Result<GamaProfile> {
    if reference.len() != trained.len() {
        return Err(Error::DistributionMismatch(format!(
            "reference has {} positions, trained has {}",
            reference.len(),
            trained.len()
        )));
    }
    if let Some(t) = reference
        .iter()
        .zip(trained.iter())
        .position(|(a, b)| a.is_empty() || b.is_empty())
    {
        return Err(Error::DistributionMismatch(format!(
            "empty distribution at position {}",
            t + 1
        )));
    }
    let n = reference.len();
    let gaps: Vec<f64> = reference
        .iter()
        .zip(trained.iter())
        .map(|(a, b)| (median(a) - median(b)).abs())
        .collect();
    let spreads: Vec<f64> = reference
        .iter()
        .zip(trained.iter())
        .map(|(a, b)| variance(a) + variance(b))
        .collect();
    let total: f64 = spreads.iter().sum();
    if total == 0.0 {
        return GamaProfile::new(vec![0.0; n], vec![true; n]);
    }
    let mut values = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for (gap, spread) in gaps.into_iter().zip(spreads) {
        let w = spread / total;
        let floored = w < epsilon;
        values.push(gap / if floored { epsilon } else { w });
        flags.push(floored);
    }
    GamaProfile::new(values, flags)
}

/// Positions (1-based) sorted by descending `M`, ties by ascending position;
/// first `k`.
pub fn argmax_positions(profile: &GamaProfile, k: usize) -> Result<Vec<usize>> {
    let n = profile.len();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange {
            what: "k",
            index: k,
            limit: n,
        });
    }
    Ok(ranking(profile).into_iter().take(k).collect())
}

/// Full descending ranking of positions.
pub fn ranking(profile: &GamaProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=profile.len()).collect();
    order.sort_by(|&a, &b| {
        profile
            .at(b)
            .total_cmp(&profile.at(a))
            .then_with(|| a.cmp(&b))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(v: Vec<Vec<f64>>) -> IgDistribution {
        IgDistribution::new(v).unwrap()
    }

    #[test]
    fn worked_example() {
        let r = dist(vec![vec![0.0, 2.0], vec![0.0, 2.0]]);
        let t = dist(vec![vec![4.0, 6.0], vec![0.0, 2.0]]);
        let m = gama_profile(&r, &t, DEFAULT_EPSILON).unwrap();
        assert_eq!(m.values(), &[8.0, 0.0]);
        assert_eq!(m.epsilon_used(), &[false, false]);
    }

    #[test]
    fn identical_distributions_give_zero() {
        let d = dist(vec![vec![1.0, 5.0, -2.0], vec![3.0], vec![0.5, 0.25]]);
        let m = gama_profile(&d, &d, DEFAULT_EPSILON).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_variance_everywhere_flags_all() {
        let a = dist(vec![vec![1.0, 1.0], vec![2.0]]);
        let b = dist(vec![vec![3.0], vec![2.0, 2.0]]);
        let m = gama_profile(&a, &b, DEFAULT_EPSILON).unwrap();
        assert_eq!(m.values(), &[0.0, 0.0]);
        assert_eq!(m.epsilon_used(), &[true, true]);
    }

    #[test]
    fn zero_variance_at_one_position_is_floored() {
        let a = dist(vec![vec![1.0, 1.0], vec![0.0, 2.0]]);
        let b = dist(vec![vec![3.0, 3.0], vec![0.0, 2.0]]);
        let m = gama_profile(&a, &b, 1e-6).unwrap();
        assert_eq!(m.epsilon_used(), &[true, false]);
        assert_eq!(m.at(1), 2.0 / 1e-6);
        assert_eq!(m.at(2), 0.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = dist(vec![vec![1.0], vec![2.0]]);
        let b = dist(vec![vec![1.0]]);
        assert!(matches!(
            gama_profile(&a, &b, DEFAULT_EPSILON),
            Err(Error::DistributionMismatch(_))
        ));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(variance(&[0.0, 2.0]), 1.0);
    }

    #[test]
    fn argmax_ties_and_ranges() {
        let p = GamaProfile::from_values(vec![0.0, 5.0, 1.0, 5.0]).unwrap();
        assert_eq!(argmax_positions(&p, 2).unwrap(), vec![2, 4]);
        let mut all = argmax_positions(&p, 4).unwrap();
        all.sort();
        assert_eq!(all, vec![1, 2, 3, 4]);
        assert!(argmax_positions(&p, 0).is_err());
        assert!(argmax_positions(&p, 5).is_err());
        let mono = GamaProfile::from_values((1..=6).map(|t| t as f64).collect()).unwrap();
        assert_eq!(argmax_positions(&mono, 3).unwrap(), vec![6, 5, 4]);
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..12), n)
    }

    proptest! {
        #[test]
        fn symmetric_in_models(a in arb_dist(5), b in arb_dist(5)) {
            let (a, b) = (dist(a), dist(b));
            let m1 = gama_profile(&a, &b, DEFAULT_EPSILON).unwrap();
            let m2 = gama_profile(&b, &a, DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(m1, m2);
        }

        #[test]
        fn permutation_equivariant(a in arb_dist(4), b in arb_dist(4), rot in 0usize..4) {
            let order: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
            let (a, b) = (dist(a), dist(b));
            let m = gama_profile(&a, &b, DEFAULT_EPSILON).unwrap();
            let mp = gama_profile(&a.permuted(&order), &b.permuted(&order), DEFAULT_EPSILON).unwrap();
            for (i, &src) in order.iter().enumerate() {
                prop_assert!((mp.values()[i] - m.values()[src]).abs() <= 1e-9 * m.values()[src].max(1.0));
            }
        }

        #[test]
        fn homogeneous_of_degree_one(a in arb_dist(4), b in arb_dist(4), c in 0.1f64..20.0) {
            let (a, b) = (dist(a), dist(b));
            let m = gama_profile(&a, &b, DEFAULT_EPSILON).unwrap();
            prop_assume!(m.epsilon_used().iter().all(|f| !f));
            let ms = gama_profile(&a.map_values(|v| v * c), &b.map_values(|v| v * c), DEFAULT_EPSILON).unwrap();
            for (x, y) in m.values().iter().zip(ms.values()) {
                prop_assert!((y - c * x).abs() <= 1e-9 * (c * x).max(1e-12));
            }
        }

        #[test]
        fn non_negative(a in arb_dist(6), b in arb_dist(6)) {
            let m = gama_profile(&dist(a), &dist(b), DEFAULT_EPSILON).unwrap();
            prop_assert!(m.values().iter().all(|&v| v >= 0.0));
            prop_assert_eq!(m.len(), 6);
        }
    }
}
