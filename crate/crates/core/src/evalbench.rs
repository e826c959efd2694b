//! Retrieval metrics for GAMA profiles against ground-truth motifs, random
//! baselines, grouped summaries, and rank correlation with bootstrap intervals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::AffinityRecord;
use crate::error::{Error, Result};
use crate::gama::{argmax_positions, ranking, GamaProfile};
use crate::synthgen::{DatasetCondition, Logic, PositionGroup};

/// Monte-Carlo baseline FNR reported for the published grid. Our own estimate
/// for the same grid is the analytic `1 − m/L` average; the two are not
/// reconciled.
pub const PUBLISHED_BASELINE_FNR: f64 = 0.93;

pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 1000;

fn check_motif(profile: &GamaProfile, motif: &[usize]) -> Result<()> {
    if motif.is_empty() {
        return Err(Error::Config("motif must be non-empty".into()));
    }
    if let Some(&position) = motif.iter().find(|&&p| p == 0 || p > profile.len()) {
        return Err(Error::MotifOutOfDomain {
            position,
            len: profile.len(),
        });
    }
    Ok(())
}

/// `1 − |top_k ∩ motif| / |motif|`; `k` defaults to the motif size.
pub fn false_negative_rate(profile: &GamaProfile, motif: &[usize], k: Option<usize>) -> Result<f64> {
    check_motif(profile, motif)?;
    let k = k.unwrap_or(motif.len());
    let top: BTreeSet<usize> = argmax_positions(profile, k)?.into_iter().collect();
    let hits = motif.iter().filter(|p| top.contains(p)).count();
    Ok(1.0 - hits as f64 / motif.len() as f64)
}

/// Smallest `k` whose top-k positions contain the whole motif.
pub fn top_k_until_full(profile: &GamaProfile, motif: &[usize]) -> Result<usize> {
    check_motif(profile, motif)?;
    let order = ranking(profile);
    let deepest = motif
        .iter()
        .map(|p| order.iter().position(|q| q == p).expect("in domain"))
        .max()
        .expect("non-empty");
    Ok(deepest + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub condition: String,
    pub logic: Logic,
    pub positions: Vec<usize>,
    pub ratio_tenths: u32,
    pub position_group: PositionGroup,
    /// Number of signal sequences the model was trained with.
    pub sample_size: usize,
    pub fnr: f64,
    pub top_k_full: usize,
    pub k_used: usize,
}

impl RetrievalResult {
    pub fn noise_ratio(&self) -> f64 {
        self.ratio_tenths as f64 / 10.0
    }
}

pub fn evaluate(cond: &DatasetCondition, profile: &GamaProfile) -> Result<RetrievalResult> {
    let motif = cond.motif.positions();
    Ok(RetrievalResult {
        condition: cond.name(),
        logic: cond.motif.logic(),
        positions: motif.to_vec(),
        ratio_tenths: cond.ratio_tenths,
        position_group: cond.motif.position_group(cond.sequence_length),
        sample_size: cond.signal_count,
        fnr: false_negative_rate(profile, motif, None)?,
        top_k_full: top_k_until_full(profile, motif)?,
        k_used: motif.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    pub motif_size: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Hypergeometric expectation `1 − k·m / (L·m) = 1 − m/L` at `k = m`.
    pub analytic: f64,
}

/// Per-motif-size Monte-Carlo estimates of the FNR obtained by picking `k = m`
/// positions uniformly at random from `1..=seq_len`.
pub fn random_baseline_detail(
    seq_len: usize,
    motif_sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<BaselineEstimate>> {
    if trials == 0 {
        return Err(Error::Config("trials must be ≥ 1".into()));
    }
    if motif_sizes.is_empty() {
        return Err(Error::Config("need at least one motif size".into()));
    }
    if let Some(&m) = motif_sizes.iter().find(|&&m| m == 0 || m > seq_len) {
        return Err(Error::Config(format!(
            "motif size {m} not in 1..={seq_len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    motif_sizes
        .iter()
        .map(|&m| {
            // Motif fixed at the first m positions; only the overlap count matters.
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let hits = sample_indices(&mut rng, seq_len, m)
                    .iter()
                    .filter(|&i| i < m)
                    .count();
                let fnr = 1.0 - hits as f64 / m as f64;
                sum += fnr;
                sum_sq += fnr * fnr;
            }
            let n = trials as f64;
            let mean = sum / n;
            let var = if trials > 1 {
                (sum_sq - n * mean * mean).max(0.0) / (n - 1.0)
            } else {
                0.0
            };
            Ok(BaselineEstimate {
                motif_size: m,
                mean,
                stderr: (var / n).sqrt(),
                analytic: 1.0 - m as f64 / seq_len as f64,
            })
        })
        .collect()
}

/// Mean Monte-Carlo baseline FNR over trials and motif sizes.
pub fn random_baseline_fnr(seq_len: usize, motif_sizes: &[usize], trials: usize, seed: u64) -> Result<f64> {
    let est = random_baseline_detail(seq_len, motif_sizes, trials, seed)?;
    Ok(est.iter().map(|e| e.mean).sum::<f64>() / est.len() as f64)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// 5th percentile of the bootstrap distribution (one-sided 95% lower bound).
    pub ci_low: f64,
    /// 95th percentile of the bootstrap distribution.
    pub ci_high: f64,
    /// Fraction of usable resamples with `rho ≤ 0`.
    pub p_one_sided: f64,
    pub n_bootstrap: usize,
    /// Resamples skipped because one side was constant.
    pub n_skipped: usize,
    pub seed: u64,
}

/// Resample index pairs with replacement `n` times and recompute Spearman.
pub fn bootstrap_correlation(x: &[f64], y: &[f64], n: usize, seed: u64) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: x.len(),
        });
    }
    if n == 0 {
        return Err(Error::Config("bootstrap needs ≥ 1 resample".into()));
    }
    let rho = spearman(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = x.len();
    let mut rhos = Vec::with_capacity(n);
    let mut skipped = 0;
    let mut xs = vec![0.0; len];
    let mut ys = vec![0.0; len];
    for _ in 0..n {
        for i in 0..len {
            let j = rng.gen_range(0..len);
            xs[i] = x[j];
            ys[i] = y[j];
        }
        match spearman(&xs, &ys) {
            Ok(r) => rhos.push(r),
            Err(Error::ConstantInput) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if rhos.is_empty() {
        return Err(Error::ConstantInput);
    }
    rhos.sort_by(f64::total_cmp);
    let non_positive = rhos.iter().filter(|&&r| r <= 0.0).count();
    Ok(CorrelationResult {
        rho,
        ci_low: quantile_sorted(&rhos, 0.05),
        ci_high: quantile_sorted(&rhos, 0.95),
        p_one_sided: non_positive as f64 / rhos.len() as f64,
        n_bootstrap: n,
        n_skipped: skipped,
        seed,
    })
}

/// Mean per-position energy across records.
pub fn positional_energy_profile(records: &[AffinityRecord]) -> Result<Vec<f64>> {
    let first = records.first().ok_or(Error::EmptyDataset)?;
    let len = first.per_position_energies.len();
    let mut sums = vec![0.0; len];
    for (index, r) in records.iter().enumerate() {
        if r.per_position_energies.len() != len {
            return Err(Error::MixedLengths {
                expected: len,
                found: r.per_position_energies.len(),
                index,
            });
        }
        for (s, e) in sums.iter_mut().zip(&r.per_position_energies) {
            *s += e;
        }
    }
    Ok(sums.into_iter().map(|s| s / records.len() as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Logic,
    PositionGroup,
    MotifLength,
    NoiseRatio,
    SampleSize,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logic" => Ok(GroupBy::Logic),
            "position_group" => Ok(GroupBy::PositionGroup),
            "motif_length" => Ok(GroupBy::MotifLength),
            "noise_ratio" => Ok(GroupBy::NoiseRatio),
            "sample_size" => Ok(GroupBy::SampleSize),
            _ => Err(Error::Config(format!("unknown group key {s:?}"))),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Logic => "logic",
            GroupBy::PositionGroup => "position_group",
            GroupBy::MotifLength => "motif_length",
            GroupBy::NoiseRatio => "noise_ratio",
            GroupBy::SampleSize => "sample_size",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum GroupValue {
    Logic(Logic),
    Placement(PositionGroup),
    Count(usize),
    /// Ratios sort high to low.
    Ratio(std::cmp::Reverse<u32>),
}

impl GroupValue {
    fn of(r: &RetrievalResult, by: GroupBy) -> Self {
        match by {
            GroupBy::Logic => GroupValue::Logic(r.logic),
            GroupBy::PositionGroup => GroupValue::Placement(r.position_group),
            GroupBy::MotifLength => GroupValue::Count(r.positions.len()),
            GroupBy::NoiseRatio => GroupValue::Ratio(std::cmp::Reverse(r.ratio_tenths)),
            GroupBy::SampleSize => GroupValue::Count(r.sample_size),
        }
    }

    fn label(&self) -> String {
        match self {
            GroupValue::Logic(l) => l.to_string(),
            GroupValue::Placement(g) => format!("{g:?}").to_lowercase(),
            GroupValue::Count(n) => n.to_string(),
            GroupValue::Ratio(r) => format!("{:.1}", r.0 as f64 / 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub mean_fnr: f64,
    pub mean_top_k_full: f64,
}

pub fn aggregate(results: &[RetrievalResult], group_by: GroupBy) -> Result<Vec<GroupSummary>> {
    if results.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: BTreeMap<GroupValue, (usize, f64, f64)> = BTreeMap::new();
    for r in results {
        let e = groups.entry(GroupValue::of(r, group_by)).or_default();
        e.0 += 1;
        e.1 += r.fnr;
        e.2 += r.top_k_full as f64;
    }
    Ok(groups
        .into_iter()
        .map(|(k, (n, fnr, topk))| GroupSummary {
            group: k.label(),
            count: n,
            mean_fnr: fnr / n as f64,
            mean_top_k_full: topk / n as f64,
        })
        .collect())
}

/// Sum over positions of the Shannon entropy (nats) of each frequency column.
pub fn dataset_entropy(freq: &Array2<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (column, col) in freq.columns().into_iter().enumerate() {
        if (col.sum() - 1.0).abs() > 1e-9 || col.iter().any(|&p| p < 0.0) {
            return Err(Error::Config(format!(
                "frequency column {column} is not a probability distribution"
            )));
        }
        total -= col
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::TokenSequence;
    use proptest::prelude::*;

    fn profile_ranking(order: &[usize]) -> GamaProfile {
        // First entry of `order` gets the highest value.
        let n = order.len();
        let mut v = vec![0.0; n];
        for (rank, &p) in order.iter().enumerate() {
            v[p - 1] = (n - rank) as f64;
        }
        GamaProfile::from_values(v).unwrap()
    }

    #[test]
    fn fnr_examples() {
        let perfect = profile_ranking(&[2, 4, 1, 3, 5, 6, 7]);
        assert_eq!(false_negative_rate(&perfect, &[2, 4], None).unwrap(), 0.0);
        let half = profile_ranking(&[2, 7, 4, 1, 3, 5, 6]);
        assert_eq!(false_negative_rate(&half, &[2, 4], None).unwrap(), 0.5);
        assert_eq!(false_negative_rate(&half, &[2, 4], Some(3)).unwrap(), 0.0);
        assert!(matches!(
            false_negative_rate(&half, &[2, 9], None),
            Err(Error::MotifOutOfDomain { position: 9, .. })
        ));
        assert!(false_negative_rate(&half, &[], None).is_err());
    }

    #[test]
    fn top_k_examples() {
        let p = profile_ranking(&[2, 7, 4, 1, 3, 5, 6]);
        assert_eq!(top_k_until_full(&p, &[2, 4]).unwrap(), 3);
        let perfect = profile_ranking(&[2, 4, 1, 3, 5, 6, 7]);
        assert_eq!(top_k_until_full(&perfect, &[2, 4]).unwrap(), 2);
        let worst = profile_ranking(&[1, 3, 5, 6, 7, 2, 4]);
        assert_eq!(top_k_until_full(&worst, &[2, 4]).unwrap(), 7);
        assert!(top_k_until_full(&worst, &[8]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 6.0, 8.0, 100.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(
            spearman(&x, &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            spearman(&x, &[1.0; 5]),
            Err(Error::ConstantInput)
        ));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn bootstrap_on_perfect_correlation() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 3.0 + 1.0).collect();
        let r = bootstrap_correlation(&x, &y, 500, 1).unwrap();
        assert_eq!(r.rho, 1.0);
        assert!(r.ci_low > 0.0);
        assert_eq!(r.p_one_sided, 0.0);
        assert!(r.ci_low <= r.rho && r.rho <= r.ci_high);
        assert!(bootstrap_correlation(&x[..2], &y[..2], 10, 0).is_err());
    }

    #[test]
    fn bootstrap_counts_constant_resamples() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0];
        let r = bootstrap_correlation(&x, &y, 200, 4).unwrap();
        assert!(r.n_skipped > 0);
        assert_eq!(r.n_bootstrap, 200);
    }

    #[test]
    fn baseline_errors_and_analytic_mean() {
        assert!(random_baseline_fnr(16, &[17], 10, 0).is_err());
        assert!(random_baseline_fnr(16, &[2], 0, 0).is_err());
        let sizes = [2, 2, 2, 3, 3, 3, 4, 4, 4];
        let analytic: f64 = sizes.iter().map(|&m| 1.0 - m as f64 / 16.0).sum::<f64>() / 9.0;
        assert_eq!(analytic, 0.8125);
        let est = random_baseline_fnr(16, &sizes, 20_000, 3).unwrap();
        assert!((est - 0.8125).abs() < 0.01, "{est}");
        let a = random_baseline_fnr(16, &[2], 100, 9).unwrap();
        assert_eq!(a, random_baseline_fnr(16, &[2], 100, 9).unwrap());
    }

    #[test]
    fn energy_profile_examples() {
        let s: TokenSequence = "ACD".parse().unwrap();
        let r = |e: Vec<f64>| AffinityRecord {
            sequence: s.clone(),
            total_energy: e.iter().sum(),
            per_position_energies: e,
        };
        assert_eq!(
            positional_energy_profile(&[r(vec![1.0, -2.0, 3.0])]).unwrap(),
            vec![1.0, -2.0, 3.0]
        );
        assert_eq!(
            positional_energy_profile(&[r(vec![1.0, -2.0, 3.0]), r(vec![-1.0, 2.0, -3.0])]).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
        assert!(positional_energy_profile(&[r(vec![1.0, 2.0, 3.0]), r(vec![1.0])]).is_err());
        assert!(positional_energy_profile(&[]).is_err());
    }

    fn result(logic: Logic, positions: Vec<usize>, tenths: u32, fnr: f64, topk: usize) -> RetrievalResult {
        RetrievalResult {
            condition: format!("{logic}_{positions:?}_{tenths}"),
            logic,
            position_group: if positions[0] < 6 { PositionGroup::Front } else { PositionGroup::End },
            k_used: positions.len(),
            positions,
            ratio_tenths: tenths,
            sample_size: 10_000,
            fnr,
            top_k_full: topk,
        }
    }

    #[test]
    fn aggregation() {
        let rs = vec![
            result(Logic::And, vec![2, 4], 10, 0.0, 2),
            result(Logic::Or, vec![2, 4], 10, 0.5, 4),
            result(Logic::Or, vec![13, 15], 5, 1.0, 10),
        ];
        let by_logic = aggregate(&rs, GroupBy::Logic).unwrap();
        assert_eq!(by_logic.len(), 2);
        assert_eq!(by_logic[0].group, "AND");
        assert_eq!(by_logic[0].mean_fnr, 0.0);
        assert_eq!(by_logic[1].mean_fnr, 0.75);
        assert_eq!(by_logic[1].mean_top_k_full, 7.0);
        let by_ratio = aggregate(&rs, GroupBy::NoiseRatio).unwrap();
        assert_eq!(by_ratio[0].group, "1.0");
        let doubled: Vec<_> = rs.iter().chain(&rs).cloned().collect();
        let d = aggregate(&doubled, GroupBy::Logic).unwrap();
        assert_eq!(d[1].mean_fnr, 0.75);
        assert_eq!(d[1].count, 4);
        assert!("colour".parse::<GroupBy>().is_err());
        assert!(aggregate(&[], GroupBy::Logic).is_err());
    }

    #[test]
    fn entropy_bounds() {
        let mut det = Array2::zeros((22, 16));
        for c in 0..16 {
            det[[c % 20, c]] = 1.0;
        }
        assert_eq!(dataset_entropy(&det).unwrap(), 0.0);
        let mut uni = Array2::zeros((22, 16));
        uni.slice_mut(ndarray::s![0..20, ..]).fill(0.05);
        let h = dataset_entropy(&uni).unwrap();
        assert!((h - 16.0 * 20f64.ln()).abs() < 1e-12);
        let bad = Array2::from_elem((22, 2), 0.5);
        assert!(dataset_entropy(&bad).is_err());
    }

    proptest! {
        #[test]
        fn fnr_invariant_under_monotone_transform(vals in prop::collection::vec(0.0f64..10.0, 8), a in 0.1f64..5.0, b in 0.0f64..3.0) {
            let p = GamaProfile::from_values(vals.clone()).unwrap();
            let q = GamaProfile::from_values(vals.iter().map(|v| a * v.powi(3) + b).collect()).unwrap();
            for motif in [vec![1, 2], vec![3, 5, 8], vec![2, 3, 4, 5]] {
                prop_assert_eq!(false_negative_rate(&p, &motif, None).unwrap(), false_negative_rate(&q, &motif, None).unwrap());
                prop_assert_eq!(top_k_until_full(&p, &motif).unwrap(), top_k_until_full(&q, &motif).unwrap());
            }
        }

        #[test]
        fn top_k_at_least_motif_size(vals in prop::collection::vec(0.0f64..10.0, 10), motif in prop::sample::subsequence((1usize..=10).collect::<Vec<_>>(), 1..5)) {
            let p = GamaProfile::from_values(vals).unwrap();
            let k = top_k_until_full(&p, &motif).unwrap();
            prop_assert!(k >= motif.len());
            let fnr = false_negative_rate(&p, &motif, None).unwrap();
            prop_assert_eq!(k == motif.len(), fnr == 0.0);
        }

        #[test]
        fn spearman_self_and_negation(vals in prop::collection::vec(-100.0f64..100.0, 2..40)) {
            let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
            if let Ok(r) = spearman(&vals, &vals) {
                prop_assert!((r - 1.0).abs() < 1e-12);
                prop_assert!((spearman(&vals, &neg).unwrap() + 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn aggregate_means_within_member_range(fnrs in prop::collection::vec(0.0f64..1.0, 1..20)) {
            let rs: Vec<_> = fnrs.iter().enumerate().map(|(i, &f)| result(Logic::ALL[i % 3], vec![2, 4], 10, f, 2)).collect();
            for g in aggregate(&rs, GroupBy::Logic).unwrap() {
                let members: Vec<f64> = rs.iter().filter(|r| r.logic.to_string() == g.group).map(|r| r.fnr).collect();
                let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(g.mean_fnr >= lo - 1e-12 && g.mean_fnr <= hi + 1e-12);
            }
        }
    }
}
