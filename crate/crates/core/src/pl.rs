//! Core Plackett-Luce types, the exact enumeration oracle and the Gumbel sampler.

use std::ops::Deref;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{logsumexp, logsumexp_indexed};

/// Largest block the exact oracle will enumerate (8! = 40320 orderings).
pub const ENUMERATION_CAP: usize = 8;

/// Random source used everywhere a seed is accepted.
pub type PlRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> PlRng {
    PlRng::seed_from_u64(seed)
}

/// Independent stream `stream` under the same seed.
pub fn derived_rng(seed: u64, stream: u64) -> PlRng {
    let mut rng = PlRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser of `seed + salt`; decorrelates seeds derived from one base seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ItemId {
    fn from(i: usize) -> Self {
        ItemId(i as u32)
    }
}

pub fn item_ids<I: IntoIterator<Item = usize>>(ids: I) -> Vec<ItemId> {
    ids.into_iter().map(ItemId::from).collect()
}

/// Dense utility (logit) vector over the item universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityScores {
    values: Vec<f64>,
}

impl UtilityScores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("utility score {i} is {}", values[i])));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for UtilityScores {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Ordered disjoint blocks `S_1 > S_2 > ... > S_M` covering every item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionedPreference {
    n_items: usize,
    partitions: Vec<Vec<ItemId>>,
}

impl PartitionedPreference {
    pub fn new(n_items: usize, partitions: Vec<Vec<ItemId>>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::InvalidPreference("no partitions".into()));
        }
        let mut seen = vec![false; n_items];
        let mut count = 0usize;
        for (m, part) in partitions.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::InvalidPreference(format!("partition {m} is empty")));
            }
            for &id in part {
                let i = id.index();
                if i >= n_items {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        bound: n_items,
                        line: None,
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidPreference(format!(
                        "item {i} appears more than once"
                    )));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != n_items {
            return Err(Error::InvalidPreference(format!(
                "partitions cover {count} of {n_items} items"
            )));
        }
        Ok(Self {
            n_items,
            partitions,
        })
    }

    /// Builds the preference from the upper blocks; the last block is the complement.
    pub fn from_top_blocks(n_items: usize, top: Vec<Vec<ItemId>>) -> Result<Self> {
        let mut used = vec![false; n_items];
        for &id in top.iter().flatten() {
            if id.index() < n_items {
                used[id.index()] = true;
            }
        }
        let rest: Vec<ItemId> = (0..n_items).filter(|&i| !used[i]).map(ItemId::from).collect();
        let mut partitions = top;
        partitions.push(rest);
        Self::new(n_items, partitions)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Vec<ItemId>] {
        &self.partitions
    }

    pub fn partition(&self, m: usize) -> &[ItemId] {
        &self.partitions[m]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.partitions.iter().map(Vec::len).collect()
    }

    /// Items in blocks `m..M` (zero-based), i.e. `R_{m+1}` in one-based notation.
    pub fn rest_from(&self, m: usize) -> impl Iterator<Item = ItemId> + Clone + '_ {
        self.partitions[m..].iter().flatten().copied()
    }

    /// Zero-based block index of every item.
    pub fn block_of_items(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_items];
        for (m, part) in self.partitions.iter().enumerate() {
            for &id in part {
                out[id.index()] = m;
            }
        }
        out
    }

    /// `logsumexp` of `w` over each suffix union of blocks; entry `m` covers blocks `m..M`.
    pub fn suffix_logsumexp(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.partitions.len() + 1];
        for m in (0..self.partitions.len()).rev() {
            let block = logsumexp_indexed(w, self.partitions[m].iter().map(|id| id.index()));
            out[m] = logsumexp(&[block, out[m + 1]]);
        }
        out
    }
}

/// A permutation of the item universe, best item first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullRanking {
    order: Vec<ItemId>,
}

impl FullRanking {
    pub fn new(order: Vec<ItemId>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &id in &order {
            let i = id.index();
            if i >= n || seen[i] {
                return Err(Error::InvalidRanking(format!(
                    "item {i} is repeated or out of range for length {n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[ItemId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

fn check_len(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DegenerateInput(format!(
            "score vector has length {}, expected {n}",
            w.len()
        )));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("utility score {i} is {}", w[i])));
    }
    Ok(())
}

/// Exact `log P(A > B)` given `lse_b = logsumexp(w over B)`.
///
/// Sums over every ordering of `A` by dynamic programming on the set of
/// still-unplaced items; `log f(S) = lse_{a in S}[w_a - lse(S u B) + log f(S \ a)]`.
fn log_block_prob_exact(a: &[f64], lse_b: f64, cap: usize) -> Result<f64> {
    let n = a.len();
    if n > cap {
        return Err(Error::PartitionTooLarge { size: n, cap });
    }
    let full = (1usize << n) - 1;
    let mut log_f = vec![f64::NEG_INFINITY; full + 1];
    log_f[0] = 0.0;
    let mut terms = Vec::with_capacity(n);
    for mask in 1..=full {
        let mut pool = vec![lse_b];
        pool.extend((0..n).filter(|j| mask & (1 << j) != 0).map(|j| a[j]));
        let denom = logsumexp(&pool);
        terms.clear();
        for j in (0..n).filter(|j| mask & (1 << j) != 0) {
            terms.push(a[j] - denom + log_f[mask & !(1 << j)]);
        }
        log_f[mask] = logsumexp(&terms);
    }
    Ok(log_f[full])
}

/// `sum_{m<M} log P(S_m > R_{m+1}; w)` by exhaustive enumeration.
pub fn log_likelihood_exact(pref: &PartitionedPreference, w: &[f64]) -> Result<f64> {
    log_likelihood_exact_with_cap(pref, w, ENUMERATION_CAP)
}

pub fn log_likelihood_exact_with_cap(
    pref: &PartitionedPreference,
    w: &[f64],
    cap: usize,
) -> Result<f64> {
    check_len(w, pref.n_items())?;
    let m_blocks = pref.n_partitions();
    if let Some((m, part)) = pref.partitions()[..m_blocks - 1]
        .iter()
        .enumerate()
        .find(|(_, p)| p.len() > cap)
    {
        return Err(Error::PartitionTooLarge {
            size: part.len(),
            cap,
        }
        .in_partition(m));
    }
    let suffix = pref.suffix_logsumexp(w);
    let mut total = 0.0;
    for m in 0..m_blocks - 1 {
        let a: Vec<f64> = pref.partition(m).iter().map(|id| w[id.index()]).collect();
        total += log_block_prob_exact(&a, suffix[m + 1], cap).map_err(|e| e.in_partition(m))?;
    }
    Ok(total)
}

/// `sum_j [w_{i_j} - logsumexp(w_{i_j}, ..., w_{i_N})]`.
pub fn log_prob_full_ranking(r: &FullRanking, w: &[f64]) -> Result<f64> {
    check_len(w, r.len())?;
    let mut tail = f64::NEG_INFINITY;
    let mut total = 0.0;
    for &id in r.order().iter().rev() {
        let wi = w[id.index()];
        tail = logsumexp(&[tail, wi]);
        total += wi - tail;
    }
    Ok(total)
}

/// Draws a ranking by sorting `w_i + Gumbel(0, 1)` in descending order.
pub fn sample_pl<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> FullRanking {
    let mut keyed: Vec<(f64, ItemId)> = w
        .iter()
        .enumerate()
        .map(|(i, &wi)| {
            let u: f64 = rng.sample(Open01);
            (wi - (-u.ln()).ln(), ItemId::from(i))
        })
        .collect();
    keyed.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    FullRanking {
        order: keyed.into_iter().map(|(_, id)| id).collect(),
    }
}

/// Exact `P(A > B)` for disjoint `A`, `B`, with `A u B` as the pool.
pub fn marginal_pref_prob_exact(a: &[ItemId], b: &[ItemId], w: &[f64]) -> Result<f64> {
    log_marginal_pref_prob_exact(a, b, w).map(f64::exp)
}

pub fn log_marginal_pref_prob_exact(a: &[ItemId], b: &[ItemId], w: &[f64]) -> Result<f64> {
    check_disjoint(a, b, w.len())?;
    let wa: Vec<f64> = a.iter().map(|id| w[id.index()]).collect();
    let lse_b = logsumexp_indexed(w, b.iter().map(|id| id.index()));
    log_block_prob_exact(&wa, lse_b, ENUMERATION_CAP)
}

pub(crate) fn check_disjoint(a: &[ItemId], b: &[ItemId], n: usize) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateInput("both blocks must be non-empty".into()));
    }
    let mut seen = vec![false; n];
    for &id in a.iter().chain(b) {
        let i = id.index();
        if i >= n {
            return Err(Error::IndexOutOfRange {
                index: i,
                bound: n,
                line: None,
            });
        }
        if seen[i] {
            return Err(Error::DegenerateInput(format!("item {i} is repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// `log P(a > b)` for two single items.
pub fn log_pair_prob(wa: f64, wb: f64) -> f64 {
    -crate::numeric::softplus(wb - wa)
}
