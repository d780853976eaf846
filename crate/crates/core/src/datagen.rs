//! Synthetic partitioned preferences drawn from a known PL model, plus a small
//! labelled XMLC-style corpus for end-to-end smoke runs.

use std::borrow::Cow;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SparseSample};
use crate::error::{Error, Result};
use crate::models::{SparseFeatures, TrainingSet};
use crate::numeric::softmax;
use crate::pl::{derived_rng, mix_seed, rng_from_seed, sample_pl, FullRanking, ItemId, PartitionedPreference};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_items: usize,
    pub n_samples: usize,
    pub partitions: usize,
    pub cap: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_items: 100,
            n_samples: 1000,
            partitions: 4,
            cap: 500,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.partitions < 2 || self.n_items < self.partitions {
            return Err(Error::InvalidConfig(format!(
                "need n_items >= partitions >= 2, got {} items and {} partitions",
                self.n_items, self.partitions
            )));
        }
        if self.cap < self.partitions - 1 {
            return Err(Error::InvalidConfig(format!(
                "cap {} leaves no room for {} cut points",
                self.cap,
                self.partitions - 1
            )));
        }
        Ok(())
    }

    /// Largest cut position.
    pub fn cut_range(&self) -> usize {
        self.cap.min(self.n_items - 1)
    }
}

/// `softmax(q)` with `q_i ~ U(0, ln N)`.
pub fn ground_truth_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let hi = (n as f64).ln();
    let q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * hi).collect();
    softmax(&q)
}

/// One synthetic observation: the latent full ranking and its partition view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSample {
    pub ranking: FullRanking,
    pub pref: PartitionedPreference,
}

impl SimSample {
    /// Ordered items of the upper blocks.
    pub fn top_order(&self) -> &[ItemId] {
        let k = self.pref.n_items() - self.pref.partition(self.pref.n_partitions() - 1).len();
        &self.ranking.order()[..k]
    }
}

/// Samples a ranking from `p` and cuts it at `M - 1` distinct positions drawn
/// uniformly from `1..=min(cap, N - 1)`.
pub fn generate_partitioned_sample<R: Rng + ?Sized>(
    p: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SimSample> {
    cfg.validate()?;
    if p.len() != cfg.n_items {
        return Err(Error::InvalidConfig(format!(
            "simplex has {} entries for {} items",
            p.len(),
            cfg.n_items
        )));
    }
    let logp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let ranking = sample_pl(&logp, rng);
    let mut cuts: Vec<usize> = sample_indices(rng, cfg.cut_range(), cfg.partitions - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let order = ranking.order();
    let mut blocks = Vec::with_capacity(cfg.partitions);
    let mut start = 0;
    for &c in cuts.iter().chain(std::iter::once(&cfg.n_items)) {
        blocks.push(order[start..c].to_vec());
        start = c;
    }
    let pref = PartitionedPreference::new(cfg.n_items, blocks)?;
    Ok(SimSample { ranking, pref })
}

/// A generated corpus with its ground truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimDataset {
    pub config: SimConfig,
    pub truth: Vec<f64>,
    pub samples: Vec<SimSample>,
}

impl SimDataset {
    /// Ground truth from stream 0 of the seed, sample `i` from its own stream.
    pub fn generate(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let truth = ground_truth_simplex(cfg.n_items, &mut rng_from_seed(mix_seed(cfg.seed, 0)));
        let sample_seed = mix_seed(cfg.seed, 1);
        let samples = (0..cfg.n_samples)
            .into_par_iter()
            .map(|i| generate_partitioned_sample(&truth, cfg, &mut derived_rng(sample_seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: cfg.clone(),
            truth,
            samples,
        })
    }

    /// XMLC view: labels are `S_1`; items of the upper blocks carry their
    /// one-based block index as a feature value.
    pub fn to_xmlc(&self) -> Result<Dataset> {
        let n = self.config.n_items;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let m_top = s.pref.n_partitions() - 1;
                let mut features: Vec<(u32, f64)> = s.pref.partitions()[..m_top]
                    .iter()
                    .enumerate()
                    .flat_map(|(m, part)| part.iter().map(move |id| (id.0, (m + 1) as f64)))
                    .collect();
                features.sort_unstable_by_key(|f| f.0);
                let mut labels: Vec<u32> = s.pref.partition(0).iter().map(|id| id.0).collect();
                labels.sort_unstable();
                SparseSample { features, labels }
            })
            .collect();
        Dataset::new(samples, n, n)
    }
}

impl TrainingSet for SimDataset {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn features(&self, _i: usize) -> &SparseFeatures {
        &[]
    }

    fn preference(&self, i: usize) -> Result<Cow<'_, PartitionedPreference>> {
        Ok(Cow::Borrowed(&self.samples[i].pref))
    }

    fn top_order(&self, i: usize) -> Option<&[ItemId]> {
        Some(self.samples[i].top_order())
    }
}

/// Mean over items of `(softmax(theta)_i - p_i)^2`.
pub fn mse_vs_truth(theta: &[f64], p: &[f64]) -> f64 {
    let q = softmax(theta);
    q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

/// Labelled sparse corpus where each label owns a few prototype features.
///
/// Every sample draws 1 to 3 labels; its features are noisy copies of the
/// labels' prototypes plus a couple of background features.
pub fn synthetic_xmlc(
    n_samples: usize,
    n_features: usize,
    n_labels: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_features < 4 || n_labels < 4 {
        return Err(Error::InvalidConfig("need at least 4 features and 4 labels".into()));
    }
    let mut rng = rng_from_seed(mix_seed(seed, 7));
    let prototypes: Vec<Vec<u32>> = (0..n_labels)
        .map(|_| {
            let mut f: Vec<u32> = sample_indices(&mut rng, n_features, 3)
                .into_iter()
                .map(|x| x as u32)
                .collect();
            f.sort_unstable();
            f
        })
        .collect();
    let samples = (0..n_samples)
        .map(|_| {
            let k = rng.gen_range(1..=3usize);
            let mut labels: Vec<u32> = sample_indices(&mut rng, n_labels, k)
                .into_iter()
                .map(|x| x as u32)
                .collect();
            labels.sort_unstable();
            let mut dense = vec![0.0f64; n_features];
            for &l in &labels {
                for &f in &prototypes[l as usize] {
                    dense[f as usize] += rng.gen_range(0.5..1.5);
                }
            }
            for _ in 0..2 {
                dense[rng.gen_range(0..n_features)] += rng.gen_range(0.1..0.5);
            }
            let features = dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(f, &v)| (f as u32, (v * 1000.0).round() / 1000.0))
                .collect();
            SparseSample { features, labels }
        })
        .collect();
    Dataset::new(samples, n_features, n_labels)
}
