//! Precision@k, nDCG@k and their propensity-scored variants.
//!
//! Items are ranked by descending score with ties broken by ascending id, so
//! every metric is deterministic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_KS: [usize; 4] = [1, 3, 5, 10];
pub const DEFAULT_PROPENSITY_A: f64 = 0.55;
pub const DEFAULT_PROPENSITY_B: f64 = 1.5;

/// Indices of the `k` best scores, best first.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 2) as f64).log2()
}

pub fn precision_at_k(scores: &[f64], relevant: &[u32], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = top_k(scores, k)
        .into_iter()
        .filter(|&i| relevant.contains(&(i as u32)))
        .count();
    hits as f64 / k as f64
}

pub fn ndcg_at_k(scores: &[f64], relevant: &[u32], k: usize) -> f64 {
    let ideal: f64 = (0..k.min(relevant.len())).map(discount).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = top_k(scores, k)
        .into_iter()
        .enumerate()
        .filter(|(_, i)| relevant.contains(&(*i as u32)))
        .map(|(r, _)| discount(r))
        .sum();
    dcg / ideal
}

/// Per-label propensities `p_l = 1 / (1 + C (n_l + B)^-A)` with
/// `C = (ln n - 1)(B + 1)^A`, clamped to `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityWeights {
    pub values: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl PropensityWeights {
    pub fn uniform(n_labels: usize) -> Self {
        Self {
            values: vec![1.0; n_labels],
            a: 0.0,
            b: 0.0,
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidConfig("propensities must lie in (0, 1]".into()));
        }
        Ok(Self { values, a: 0.0, b: 0.0 })
    }

    fn inverse(&self, label: u32) -> f64 {
        1.0 / self.values[label as usize]
    }
}

pub fn propensity(n: usize, n_l: usize, a: f64, b: f64) -> f64 {
    let c = ((n as f64).ln() - 1.0) * (b + 1.0).powf(a);
    let p = 1.0 / (1.0 + c * (-a * (n_l as f64 + b).ln()).exp());
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn estimate_propensities_from_counts(counts: &[usize], n: usize, a: f64, b: f64) -> PropensityWeights {
    PropensityWeights {
        values: counts.iter().map(|&c| propensity(n, c, a, b)).collect(),
        a,
        b,
    }
}

pub fn estimate_propensities(train: &Dataset, a: f64, b: f64) -> PropensityWeights {
    estimate_propensities_from_counts(train.label_counts(), train.len(), a, b)
}

/// `(sum_{l in topk and relevant} 1/p_l / k, same over the ideal ranking)`.
pub fn ps_precision_at_k(
    scores: &[f64],
    relevant: &[u32],
    k: usize,
    prop: &PropensityWeights,
) -> (f64, f64) {
    if k == 0 {
        return (0.0, 0.0);
    }
    let raw: f64 = top_k(scores, k)
        .into_iter()
        .filter(|&i| relevant.contains(&(i as u32)))
        .map(|i| prop.inverse(i as u32))
        .sum();
    let ideal: f64 = ideal_gains(relevant, prop).into_iter().take(k).sum();
    (raw / k as f64, ideal / k as f64)
}

/// Discounted counterpart of [`ps_precision_at_k`].
pub fn ps_ndcg_at_k(
    scores: &[f64],
    relevant: &[u32],
    k: usize,
    prop: &PropensityWeights,
) -> (f64, f64) {
    let raw: f64 = top_k(scores, k)
        .into_iter()
        .enumerate()
        .filter(|(_, i)| relevant.contains(&(*i as u32)))
        .map(|(r, i)| prop.inverse(i as u32) * discount(r))
        .sum();
    let ideal: f64 = ideal_gains(relevant, prop)
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, g)| g * discount(r))
        .sum();
    (raw, ideal)
}

fn ideal_gains(relevant: &[u32], prop: &PropensityWeights) -> Vec<f64> {
    let mut gains: Vec<f64> = relevant.iter().map(|&l| prop.inverse(l)).collect();
    gains.sort_unstable_by(|a, b| b.total_cmp(a));
    gains
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub k: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn get(&self, metric: &str, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.k == k)
            .map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,k,value\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.metric, r.k, r.value));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::MalformedLine {
                line: n + 1,
                msg: format!("expected `metric,k,value`, got `{line}`"),
            };
            let mut parts = line.split(',');
            let (Some(metric), Some(k), Some(value), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            rows.push(MetricRow {
                metric: metric.to_string(),
                k: k.parse().map_err(|_| bad())?,
                value: value.parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { rows })
    }
}

#[derive(Default, Clone, Copy)]
struct SampleMetrics {
    p: f64,
    ndcg: f64,
    psp: (f64, f64),
    psndcg: (f64, f64),
}

/// Corpus metrics: P@k and nDCG@k are averaged per sample; the
/// propensity-scored ones are a ratio of sums against the ideal ranking.
/// Samples without labels count as zero.
pub fn evaluate_rankings(
    scores: &[Vec<f64>],
    relevant: &[Vec<u32>],
    prop: &PropensityWeights,
    ks: &[usize],
) -> MetricReport {
    assert_eq!(scores.len(), relevant.len(), "one score vector per sample");
    let n = scores.len().max(1) as f64;
    let mut report = MetricReport::default();
    let per_k: Vec<Vec<SampleMetrics>> = ks
        .iter()
        .map(|&k| {
            scores
                .par_iter()
                .zip(relevant.par_iter())
                .map(|(s, r)| SampleMetrics {
                    p: precision_at_k(s, r, k),
                    ndcg: ndcg_at_k(s, r, k),
                    psp: ps_precision_at_k(s, r, k, prop),
                    psndcg: ps_ndcg_at_k(s, r, k, prop),
                })
                .collect()
        })
        .collect();
    let families: [(&str, fn(&[SampleMetrics], f64) -> f64); 4] = [
        ("P", |v, n| v.iter().map(|m| m.p).sum::<f64>() / n),
        ("nDCG", |v, n| v.iter().map(|m| m.ndcg).sum::<f64>() / n),
        ("PSP", |v, _| {
            let (a, b) = v.iter().fold((0.0, 0.0), |acc, m| (acc.0 + m.psp.0, acc.1 + m.psp.1));
            if b > 0.0 { a / b } else { 0.0 }
        }),
        ("PSnDCG", |v, _| {
            let (a, b) = v
                .iter()
                .fold((0.0, 0.0), |acc, m| (acc.0 + m.psndcg.0, acc.1 + m.psndcg.1));
            if b > 0.0 { a / b } else { 0.0 }
        }),
    ];
    for (name, agg) in families {
        for (k, values) in ks.iter().zip(&per_k) {
            report.rows.push(MetricRow {
                metric: name.to_string(),
                k: *k,
                value: agg(values, n),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_id() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 0.5], 3), vec![1, 2, 0]);
        assert_eq!(top_k(&[0.0; 4], 2), vec![0, 1]);
        assert!(top_k(&[1.0], 0).is_empty());
    }

    #[test]
    fn precision_examples() {
        let s = [0.9, 0.8, 0.1, 0.0];
        assert_eq!(precision_at_k(&s, &[0, 1], 2), 1.0);
        assert_eq!(precision_at_k(&s, &[2, 3], 2), 0.0);
        // ranking 1, 5, 2, ...
        let s = [0.0, 0.9, 0.7, 0.1, 0.2, 0.8];
        assert!((precision_at_k(&s, &[1, 2], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ndcg_examples() {
        let s = [0.9, 0.8, 0.1];
        assert_eq!(ndcg_at_k(&s, &[0, 1], 2), 1.0);
        assert_eq!(ndcg_at_k(&s, &[2], 2), 0.0);
        assert!((ndcg_at_k(&s, &[1], 2) - 0.630_929_753_571_457_5).abs() < 1e-15);
    }

    #[test]
    fn propensity_examples() {
        let p = propensity(100, 10, 0.55, 1.5);
        assert!((p - 0.391_017_310_604_025_5).abs() < 1e-12);
        assert_eq!(propensity(100, 7, 0.55, 1.5), propensity(100, 7, 0.55, 1.5));
        assert!(propensity(100, 1 << 40, 0.55, 1.5) > 0.999);
        let w = estimate_propensities_from_counts(&[0, 1, 5, 50], 100, 0.55, 1.5);
        assert!(w.values.windows(2).all(|x| x[0] <= x[1]));
    }

    #[test]
    fn propensity_scored_examples() {
        let unit = PropensityWeights::uniform(4);
        let s = [0.2, 0.9, 0.1, 0.5];
        for k in 1..=4 {
            let (raw, _) = ps_precision_at_k(&s, &[1, 2], k, &unit);
            assert_eq!(raw, precision_at_k(&s, &[1, 2], k));
            let (raw, ideal) = ps_ndcg_at_k(&s, &[1, 2], k, &unit);
            assert!((raw / ideal - ndcg_at_k(&s, &[1, 2], k)).abs() < 1e-15);
        }
        let rare = PropensityWeights::from_values(vec![1.0, 0.01, 1.0, 1.0]).unwrap();
        let (raw, ideal) = ps_precision_at_k(&s, &[1], 1, &rare);
        assert_eq!(raw, ideal);

        let two = PropensityWeights::from_values(vec![1.0, 0.5]).unwrap();
        let (raw, ideal) = ps_precision_at_k(&[0.9, 0.1], &[0, 1], 1, &two);
        assert!((raw / ideal - 0.5).abs() < 1e-15);
        let (raw, ideal) = ps_ndcg_at_k(&[0.9, 0.1], &[0, 1], 2, &two);
        assert!((raw / ideal - 0.859_718_699_852_197_2).abs() < 1e-15);
        let (raw, _) = ps_ndcg_at_k(&[0.9, 0.1, 0.5], &[1], 1, &two_three());
        assert_eq!(raw, 0.0);
    }

    fn two_three() -> PropensityWeights {
        PropensityWeights::from_values(vec![1.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn corpus_report_and_csv() {
        let scores = vec![vec![0.9, 0.1, 0.0], vec![0.1, 0.9, 0.0], vec![0.3, 0.2, 0.1]];
        let relevant = vec![vec![0], vec![0], vec![]];
        let r = evaluate_rankings(&scores, &relevant, &PropensityWeights::uniform(3), &[1, 3]);
        assert!((r.get("P", 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.get("PSP", 1).unwrap() - 0.5).abs() < 1e-15);
        let back = MetricReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
    }
}
