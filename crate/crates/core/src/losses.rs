//! Ranking objectives with analytic gradients, all expressed as quantities to minimise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, logsumexp, logsumexp_indexed, sigmoid, softplus};
use crate::pl::{ItemId, PartitionedPreference};
use crate::quadrature::{GradientBuffer, Integrator};

/// Pair sets up to this size are enumerated; larger ones are sampled.
pub const MAX_ENUMERATED_PAIRS: usize = 100_000;
pub const DEFAULT_PAIR_BUDGET: usize = 1_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LossValueAndGrad {
    pub value: f64,
    pub grad: GradientBuffer,
}

impl LossValueAndGrad {
    fn zero(n: usize) -> Self {
        Self {
            value: 0.0,
            grad: GradientBuffer::zeros(n),
        }
    }

    fn checked(self) -> Result<Self> {
        if !self.value.is_finite() || !self.grad.is_finite() {
            return Err(Error::NonFinite(format!("loss value {}", self.value)));
        }
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    PlPartition,
    PlLb,
    AttRank,
    RankNet,
    RankSvm,
    /// PL likelihood of the fully ordered top items; needs the full ranking.
    PlTopK,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::PlPartition,
        LossKind::PlLb,
        LossKind::AttRank,
        LossKind::RankNet,
        LossKind::RankSvm,
        LossKind::PlTopK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::PlPartition => "pl-partition",
            LossKind::PlLb => "pl-lb",
            LossKind::AttRank => "attrank",
            LossKind::RankNet => "ranknet",
            LossKind::RankSvm => "ranksvm",
            LossKind::PlTopK => "pl-topk",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown loss `{s}`")))
    }
}

/// `-log P(S_1 > ... > S_M)` by quadrature.
pub fn pl_partition_loss(
    pref: &PartitionedPreference,
    w: &[f64],
    integ: &Integrator,
) -> Result<LossValueAndGrad> {
    let mut grad = GradientBuffer::zeros(w.len());
    let ll = integ.log_likelihood_and_grad(pref, w, &mut grad)?;
    grad.iter_mut().for_each(|g| *g = -*g);
    LossValueAndGrad { value: -ll, grad }.checked()
}

/// Negated log of `prod_m n_m! prod_{i in S_m} softmax_i(w over R_m)`, for `m < M`.
pub fn pl_lb_loss(pref: &PartitionedPreference, w: &[f64]) -> Result<LossValueAndGrad> {
    check_len(w, pref.n_items())?;
    let mut out = LossValueAndGrad::zero(w.len());
    let suffix = pref.suffix_logsumexp(w);
    for m in 0..pref.n_partitions() - 1 {
        let part = pref.partition(m);
        let n_m = part.len();
        let lse = suffix[m];
        let mut ll = ln_factorial(n_m);
        for id in part {
            ll += w[id.index()] - lse;
            out.grad[id.index()] -= 1.0;
        }
        out.value -= ll;
        for id in pref.rest_from(m) {
            let k = id.index();
            out.grad[k] += n_m as f64 * (w[k] - lse).exp();
        }
    }
    out.checked()
}

/// Cross-entropy between `softmax(w)` and the uniform distribution over `relevant`.
pub fn attrank_loss(relevant: &[ItemId], w: &[f64]) -> Result<LossValueAndGrad> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    let weight = 1.0 / relevant.len() as f64;
    let targets: Vec<(ItemId, f64)> = relevant.iter().map(|&id| (id, weight)).collect();
    attrank_loss_weighted(&targets, w)
}

/// Cross-entropy against an arbitrary target distribution given as `(item, mass)`.
pub fn attrank_loss_weighted(targets: &[(ItemId, f64)], w: &[f64]) -> Result<LossValueAndGrad> {
    let total: f64 = targets.iter().map(|t| t.1).sum();
    if targets.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyRelevantSet);
    }
    for &(id, _) in targets {
        check_index(id, w.len())?;
    }
    let lse = logsumexp(w);
    let mut grad: Vec<f64> = w.iter().map(|&x| (x - lse).exp()).collect();
    let mut value = 0.0;
    for &(id, mass) in targets {
        let p = mass / total;
        value -= p * (w[id.index()] - lse);
        grad[id.index()] -= p;
    }
    LossValueAndGrad {
        value,
        grad: GradientBuffer::from_vec(grad),
    }
    .checked()
}

/// AttRank target for a partitioned preference: block `m` (one-based) gets
/// weight proportional to `M - m`, shared uniformly among its items.
pub fn attrank_targets(pref: &PartitionedPreference) -> Vec<(ItemId, f64)> {
    let m_total = pref.n_partitions();
    pref.partitions()[..m_total - 1]
        .iter()
        .enumerate()
        .flat_map(|(m, part)| {
            let weight = (m_total - 1 - m) as f64;
            part.iter().map(move |&id| (id, weight))
        })
        .collect()
}

/// Mean logistic loss `log(1 + exp(-(w_i - w_j)))` over `(winner, loser)` pairs.
pub fn ranknet_loss(pairs: &[(ItemId, ItemId)], w: &[f64]) -> Result<LossValueAndGrad> {
    pairwise_loss(pairs, w, |d| (softplus(-d), -sigmoid(-d)))
}

/// Mean hinge loss `max(0, margin - (w_i - w_j))`; the subgradient at the kink is 0.
pub fn ranksvm_loss(pairs: &[(ItemId, ItemId)], w: &[f64], margin: f64) -> Result<LossValueAndGrad> {
    pairwise_loss(pairs, w, |d| {
        let slack = margin - d;
        if slack > 0.0 {
            (slack, -1.0)
        } else {
            (0.0, 0.0)
        }
    })
}

/// `f(d)` returns the loss and its derivative with respect to `d = w_i - w_j`.
fn pairwise_loss<F>(pairs: &[(ItemId, ItemId)], w: &[f64], f: F) -> Result<LossValueAndGrad>
where
    F: Fn(f64) -> (f64, f64),
{
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut out = LossValueAndGrad::zero(w.len());
    for &(i, j) in pairs {
        check_index(i, w.len())?;
        check_index(j, w.len())?;
        let (v, dv) = f(w[i.index()] - w[j.index()]);
        out.value += v * scale;
        out.grad[i.index()] += dv * scale;
        out.grad[j.index()] -= dv * scale;
    }
    out.checked()
}

/// Number of `(i, j)` pairs with `i` in a strictly higher block than `j`.
pub fn cross_partition_pair_count(pref: &PartitionedPreference) -> usize {
    let sizes = pref.sizes();
    let mut below = 0usize;
    let mut total = 0usize;
    for &n in sizes.iter().rev() {
        total += n * below;
        below += n;
    }
    total
}

/// All cross-block pairs when there are at most [`MAX_ENUMERATED_PAIRS`],
/// otherwise `budget` pairs drawn uniformly with replacement.
pub fn cross_partition_pairs<R: Rng + ?Sized>(
    pref: &PartitionedPreference,
    budget: usize,
    rng: &mut R,
) -> Vec<(ItemId, ItemId)> {
    let total = cross_partition_pair_count(pref);
    let parts = pref.partitions();
    if total <= MAX_ENUMERATED_PAIRS {
        let mut pairs = Vec::with_capacity(total);
        for (m, part) in parts.iter().enumerate() {
            for &i in part {
                pairs.extend(pref.rest_from(m + 1).map(|j| (i, j)));
            }
        }
        return pairs;
    }
    let block_counts: Vec<usize> = (0..parts.len())
        .map(|m| parts[m].len() * parts[m + 1..].iter().map(Vec::len).sum::<usize>())
        .collect();
    let below: Vec<Vec<ItemId>> = (0..parts.len()).map(|m| pref.rest_from(m + 1).collect()).collect();
    (0..budget)
        .map(|_| {
            let mut pick = rng.gen_range(0..total);
            let m = block_counts
                .iter()
                .position(|&c| {
                    if pick < c {
                        true
                    } else {
                        pick -= c;
                        false
                    }
                })
                .expect("pick is below the total count");
            let i = parts[m][rng.gen_range(0..parts[m].len())];
            let j = below[m][rng.gen_range(0..below[m].len())];
            (i, j)
        })
        .collect()
}

/// `-sum_j [w_{i_j} - logsumexp(w over items not yet placed)]` for the ordered
/// top items `top`; all remaining items form the unordered tail.
pub fn pl_topk_loss(top: &[ItemId], w: &[f64]) -> Result<LossValueAndGrad> {
    let n = w.len();
    let k = top.len();
    let mut out = LossValueAndGrad::zero(n);
    if k == 0 {
        return Ok(out);
    }
    let mut position = vec![k; n];
    for (j, &id) in top.iter().enumerate() {
        check_index(id, n)?;
        if position[id.index()] != k {
            return Err(Error::InvalidRanking(format!("item {} is repeated", id.index())));
        }
        position[id.index()] = j;
    }
    let tail = logsumexp_indexed(w, (0..n).filter(|&i| position[i] == k));
    let mut lse = vec![0.0; k];
    let mut acc = tail;
    for j in (0..k).rev() {
        acc = logsumexp(&[acc, w[top[j].index()]]);
        lse[j] = acc;
    }
    for (j, &id) in top.iter().enumerate() {
        out.value -= w[id.index()] - lse[j];
        out.grad[id.index()] -= 1.0;
    }
    // An item placed at step p is in the pool for steps 0..=p (tail items: all k),
    // so its gradient is exp(w) times the running sum of exp(-lse_j).
    let mut log_cum = vec![0.0; k];
    let mut acc = f64::NEG_INFINITY;
    for j in 0..k {
        acc = logsumexp(&[acc, -lse[j]]);
        log_cum[j] = acc;
    }
    for (i, &x) in w.iter().enumerate() {
        out.grad[i] += (x + log_cum[position[i].min(k - 1)]).exp();
    }
    out.checked()
}

/// Settings shared by every loss evaluation.
#[derive(Clone, Debug)]
pub struct LossContext {
    pub integrator: Integrator,
    pub pair_budget: usize,
    pub margin: f64,
}

impl LossContext {
    pub fn new(integrator: Integrator) -> Self {
        Self {
            integrator,
            pair_budget: DEFAULT_PAIR_BUDGET,
            margin: 1.0,
        }
    }
}

/// Evaluates `kind` on one preference. `top_order` is the full ranking of the
/// upper blocks, required only by [`LossKind::PlTopK`].
pub fn evaluate_loss<R: Rng + ?Sized>(
    kind: LossKind,
    pref: &PartitionedPreference,
    top_order: Option<&[ItemId]>,
    w: &[f64],
    ctx: &LossContext,
    rng: &mut R,
) -> Result<LossValueAndGrad> {
    if pref.n_partitions() == 1 {
        check_len(w, pref.n_items())?;
        return Ok(LossValueAndGrad::zero(w.len()));
    }
    match kind {
        LossKind::PlPartition => pl_partition_loss(pref, w, &ctx.integrator),
        LossKind::PlLb => pl_lb_loss(pref, w),
        LossKind::AttRank => attrank_loss_weighted(&attrank_targets(pref), w),
        LossKind::RankNet => ranknet_loss(&cross_partition_pairs(pref, ctx.pair_budget, rng), w),
        LossKind::RankSvm => ranksvm_loss(
            &cross_partition_pairs(pref, ctx.pair_budget, rng),
            w,
            ctx.margin,
        ),
        LossKind::PlTopK => {
            let order = top_order.ok_or_else(|| {
                Error::InvalidConfig("pl-topk needs the full ranking of the top items".into())
            })?;
            pl_topk_loss(order, w)
        }
    }
}

fn check_len(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DegenerateInput(format!(
            "score vector has length {}, expected {n}",
            w.len()
        )));
    }
    Ok(())
}

fn check_index(id: ItemId, n: usize) -> Result<()> {
    if id.index() >= n {
        return Err(Error::IndexOutOfRange {
            index: id.index(),
            bound: n,
            line: None,
        });
    }
    Ok(())
}
