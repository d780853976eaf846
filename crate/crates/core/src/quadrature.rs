//! Partitioned-preference likelihood and gradient by one-dimensional quadrature.
//!
//! `P(A > B) = int_0^1 prod_{a in A} (1 - u^{r_a}) du` with `r_a = exp(w_a - w_B)`
//! and `w_B = logsumexp(w over B)`. Substituting `u = v^beta` gives
//!
//! ```text
//! P(A > B) = beta * int_0^1 v^(beta - 1) prod_a (1 - v^(beta r_a)) dv
//! ```
//!
//! which is evaluated with the composite midpoint rule on `v_t = (t - 1/2)/T`,
//! entirely in log space.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log1mexp, logsumexp, logsumexp_indexed};
use crate::pl::{check_disjoint, log_likelihood_exact, ItemId, PartitionedPreference};

pub const DEFAULT_INTERVALS: usize = 10_000;
pub const DEFAULT_LOGIT_CLIP: f64 = 10.0;

/// Below this value of `1 - v^alpha` the gradient kernel uses its limit.
const GUARD_BAND: f64 = 1e-12;

/// How the exponent `beta` of the change of variable is chosen per block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// `beta` follows the bulk of the integrand; see [`adaptive_beta`].
    Adaptive,
    /// `beta = exp(w_B + c)` for a fixed shift `c`.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub intervals: usize,
    pub centering: Centering,
    pub logit_clip: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_INTERVALS,
            centering: Centering::Adaptive,
            logit_clip: DEFAULT_LOGIT_CLIP,
        }
    }
}

impl IntegrationConfig {
    pub fn with_intervals(mut self, intervals: usize) -> Self {
        self.intervals = intervals;
        self
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.centering = Centering::Fixed(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals == 0 {
            return Err(Error::InvalidConfig("intervals must be at least 1".into()));
        }
        if !(self.logit_clip > 0.0) || !self.logit_clip.is_finite() {
            return Err(Error::InvalidConfig("logit_clip must be positive and finite".into()));
        }
        if let Centering::Fixed(c) = self.centering {
            if !c.is_finite() {
                return Err(Error::InvalidConfig("shift must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Gradient accumulator conformal with the utility vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GradientBuffer {
    values: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Deref for GradientBuffer {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for GradientBuffer {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Root of `sum_j r_j / (exp(r_j s) - 1) = 1` on `(0, n]`, the mode of the
/// integrand in `s = -ln u`.
fn integrand_mode(r: &[f64]) -> f64 {
    let excess = |s: f64| r.iter().map(|&rj| rj / (rj * s).exp_m1()).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = ((1e-20f64).ln(), (r.len() as f64).ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Exponent of the change of variable for a block with ratios `r_j = exp(w_j - w_B)`.
///
/// A single dominant item keeps the original variable; everything else is
/// stretched so that the bulk of the integrand sits away from both ends.
pub fn adaptive_beta(r: &[f64]) -> f64 {
    if r.len() == 1 && r[0] >= 1.0 {
        1.0
    } else {
        (0.5 * integrand_mode(r)).max(2.0)
    }
}

/// Midpoint-rule evaluator with node tables precomputed for one `T`.
#[derive(Clone, Debug)]
pub struct Integrator {
    cfg: IntegrationConfig,
    ln_v: Vec<f64>,
    ln_neg_ln_v: Vec<f64>,
    ln_h: f64,
}

impl Integrator {
    pub fn new(cfg: IntegrationConfig) -> Result<Self> {
        cfg.validate()?;
        let t = cfg.intervals;
        let h = 1.0 / t as f64;
        let ln_v: Vec<f64> = (0..t).map(|k| ((k as f64 + 0.5) * h).ln()).collect();
        let ln_neg_ln_v = ln_v.iter().map(|&l| (-l).ln()).collect();
        Ok(Self {
            cfg,
            ln_v,
            ln_neg_ln_v,
            ln_h: h.ln(),
        })
    }

    pub fn config(&self) -> &IntegrationConfig {
        &self.cfg
    }

    pub fn intervals(&self) -> usize {
        self.cfg.intervals
    }

    fn clip(&self, x: f64) -> f64 {
        x.clamp(-self.cfg.logit_clip, self.cfg.logit_clip)
    }

    fn beta(&self, wa: &[f64], lse_b: f64) -> f64 {
        match self.cfg.centering {
            Centering::Fixed(c) => (lse_b + c).exp(),
            Centering::Adaptive => {
                let r: Vec<f64> = wa.iter().map(|&x| (x - lse_b).exp()).collect();
                adaptive_beta(&r)
            }
        }
    }

    /// Log integrand at every node; optionally keeps `log(1 - v_t^alpha_j)` rows.
    fn log_integrand(
        &self,
        alphas: &[f64],
        beta: f64,
        mut rows: Option<&mut Vec<f64>>,
    ) -> Vec<f64> {
        let t = self.ln_v.len();
        let mut lf: Vec<f64> = self.ln_v.iter().map(|&l| (beta - 1.0) * l).collect();
        if let Some(rows) = rows.as_deref_mut() {
            rows.clear();
            rows.resize(alphas.len() * t, 0.0);
        }
        for (j, &alpha) in alphas.iter().enumerate() {
            match rows.as_deref_mut() {
                Some(rows) => {
                    let row = &mut rows[j * t..(j + 1) * t];
                    for ((acc, slot), &l) in lf.iter_mut().zip(row.iter_mut()).zip(&self.ln_v) {
                        let v = log1mexp(alpha * l);
                        *slot = v;
                        *acc += v;
                    }
                }
                None => {
                    for (acc, &l) in lf.iter_mut().zip(&self.ln_v) {
                        *acc += log1mexp(alpha * l);
                    }
                }
            }
        }
        lf
    }

    /// `log P(A > B)` from clipped logits of `A` and `logsumexp` over `B`.
    pub fn block_log_prob(&self, wa: &[f64], lse_b: f64) -> Result<f64> {
        let beta = self.beta(wa, lse_b);
        let alphas: Vec<f64> = wa.iter().map(|&x| beta * (x - lse_b).exp()).collect();
        let lf = self.log_integrand(&alphas, beta, None);
        let out = logsumexp(&lf) + self.ln_h + beta.ln();
        if out.is_finite() {
            Ok(out.min(0.0))
        } else {
            Err(Error::NonFinite(format!("block log-probability evaluated to {out}")))
        }
    }

    /// Like [`Self::block_log_prob`], also writing `d log P / d w_a` (through
    /// `r_a` only) into `coefs`.
    fn block_log_prob_with_coefs(
        &self,
        wa: &[f64],
        lse_b: f64,
        coefs: &mut Vec<f64>,
        rows: &mut Vec<f64>,
    ) -> Result<f64> {
        let t = self.ln_v.len();
        let beta = self.beta(wa, lse_b);
        let ln_beta = beta.ln();
        let alphas: Vec<f64> = wa.iter().map(|&x| beta * (x - lse_b).exp()).collect();
        let lf = self.log_integrand(&alphas, beta, Some(rows));
        let log_p_raw = logsumexp(&lf) + self.ln_h + ln_beta;
        if !log_p_raw.is_finite() {
            return Err(Error::NonFinite(format!(
                "block log-probability evaluated to {log_p_raw}"
            )));
        }

        coefs.clear();
        let mut terms = vec![0.0; t];
        for (i, &alpha) in alphas.iter().enumerate() {
            let ln_alpha = alpha.ln();
            let row = &rows[i * t..(i + 1) * t];
            for k in 0..t {
                let x = alpha * self.ln_v[k];
                terms[k] = if -x < GUARD_BAND {
                    lf[k] - ln_alpha
                } else {
                    lf[k] - row[k] + x + self.ln_neg_ln_v[k]
                };
            }
            let ln_integral = 2.0 * ln_beta + self.ln_h + logsumexp(&terms);
            let c = (ln_integral - log_p_raw + wa[i] - lse_b).exp();
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("gradient coefficient {i} is {c}")));
            }
            coefs.push(c);
        }
        Ok(log_p_raw.min(0.0))
    }

    /// `sum_{m<M} log P(S_m > R_{m+1})`.
    pub fn log_likelihood(&self, pref: &PartitionedPreference, w: &[f64]) -> Result<f64> {
        check_scores(pref, w)?;
        let wc: Vec<f64> = w.iter().map(|&x| self.clip(x)).collect();
        let suffix = pref.suffix_logsumexp(&wc);
        let mut total = 0.0;
        for m in 0..pref.n_partitions() - 1 {
            let wa: Vec<f64> = pref.partition(m).iter().map(|id| wc[id.index()]).collect();
            total += self
                .block_log_prob(&wa, suffix[m + 1])
                .map_err(|e| e.in_partition(m))?;
        }
        Ok(total)
    }

    /// Fused likelihood and gradient; the gradient is added into `out`.
    ///
    /// Coordinates whose logit lies outside the clip band receive no gradient.
    pub fn log_likelihood_and_grad(
        &self,
        pref: &PartitionedPreference,
        w: &[f64],
        out: &mut [f64],
    ) -> Result<f64> {
        check_scores(pref, w)?;
        if out.len() != w.len() {
            return Err(Error::DegenerateInput(format!(
                "gradient buffer has length {}, expected {}",
                out.len(),
                w.len()
            )));
        }
        let wc: Vec<f64> = w.iter().map(|&x| self.clip(x)).collect();
        let suffix = pref.suffix_logsumexp(&wc);
        let mut grad = vec![0.0; w.len()];
        let mut coefs = Vec::new();
        let mut rows = Vec::new();
        let mut total = 0.0;
        for m in 0..pref.n_partitions() - 1 {
            let part = pref.partition(m);
            let lse_b = suffix[m + 1];
            let wa: Vec<f64> = part.iter().map(|id| wc[id.index()]).collect();
            total += self
                .block_log_prob_with_coefs(&wa, lse_b, &mut coefs, &mut rows)
                .map_err(|e| e.in_partition(m))?;
            let mut coef_sum = 0.0;
            for (id, &c) in part.iter().zip(&coefs) {
                grad[id.index()] += c;
                coef_sum += c;
            }
            for id in pref.rest_from(m + 1) {
                let k = id.index();
                grad[k] -= coef_sum * (wc[k] - lse_b).exp();
            }
        }
        for ((o, g), &x) in out.iter_mut().zip(&grad).zip(w) {
            if x.abs() <= self.cfg.logit_clip {
                *o += g;
            }
        }
        Ok(total)
    }
}

fn check_scores(pref: &PartitionedPreference, w: &[f64]) -> Result<()> {
    if w.len() != pref.n_items() {
        return Err(Error::DegenerateInput(format!(
            "score vector has length {}, expected {}",
            w.len(),
            pref.n_items()
        )));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("utility score {i} is {}", w[i])));
    }
    Ok(())
}

/// `log P(A > B)` by quadrature.
pub fn block_marginal_integral(
    a: &[ItemId],
    b: &[ItemId],
    w: &[f64],
    cfg: &IntegrationConfig,
) -> Result<f64> {
    check_disjoint(a, b, w.len())?;
    let integ = Integrator::new(*cfg)?;
    let wc: Vec<f64> = w.iter().map(|&x| integ.clip(x)).collect();
    let wa: Vec<f64> = a.iter().map(|id| wc[id.index()]).collect();
    let lse_b = logsumexp_indexed(&wc, b.iter().map(|id| id.index()));
    integ.block_log_prob(&wa, lse_b)
}

pub fn log_likelihood_numeric(
    pref: &PartitionedPreference,
    w: &[f64],
    cfg: &IntegrationConfig,
) -> Result<f64> {
    Integrator::new(*cfg)?.log_likelihood(pref, w)
}

/// Adds `grad_w log P` into `out` and returns `log P`.
pub fn grad_log_likelihood_numeric(
    pref: &PartitionedPreference,
    w: &[f64],
    cfg: &IntegrationConfig,
    out: &mut GradientBuffer,
) -> Result<f64> {
    Integrator::new(*cfg)?.log_likelihood_and_grad(pref, w, out)
}

/// Constants of the interval-count bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub epsilon: f64,
    /// Upper bound `C > 2` on the centred block mass.
    pub c: f64,
    /// Lower bound `0 < C0 < 1` on the integrand exponents.
    pub c0: f64,
}

impl ErrorBudget {
    pub fn new(epsilon: f64, c: f64, c0: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if !(c > 2.0) || !c.is_finite() {
            return Err(Error::InvalidConfig("C must exceed 2".into()));
        }
        if !(c0 > 0.0 && c0 < 1.0) {
            return Err(Error::InvalidConfig("C0 must lie in (0, 1)".into()));
        }
        Ok(Self { epsilon, c, c0 })
    }
}

fn ceil_at_least_one(x: f64) -> u64 {
    (x.ceil() as u64).max(1)
}

/// Intervals sufficient for the likelihood: `ceil(C^2 (n+1) / (2 sqrt(3) eps))`.
pub fn recommended_intervals_likelihood(n_m: usize, budget: &ErrorBudget) -> u64 {
    let c = budget.c;
    ceil_at_least_one(c * c * (n_m as f64 + 1.0) / (2.0 * 3f64.sqrt() * budget.epsilon))
}

/// Intervals sufficient for the gradient: `ceil(sqrt(6) C^5.5 n^2 / (C0^2 eps))`.
pub fn recommended_intervals_gradient(n_m: usize, budget: &ErrorBudget) -> u64 {
    let n = n_m as f64;
    ceil_at_least_one(
        6f64.sqrt() * budget.c.powf(5.5) * n * n / (budget.c0 * budget.c0 * budget.epsilon),
    )
}

/// Absolute error of the quadrature likelihood against the exact oracle for each `T`.
pub fn convergence_probe(
    pref: &PartitionedPreference,
    w: &[f64],
    t_list: &[usize],
    centering: Centering,
) -> Result<Vec<(usize, f64)>> {
    let exact = log_likelihood_exact(pref, w)?;
    t_list
        .iter()
        .map(|&t| {
            let cfg = IntegrationConfig {
                intervals: t,
                centering,
                ..IntegrationConfig::default()
            };
            let approx = log_likelihood_numeric(pref, w, &cfg)?;
            Ok((t, (approx - exact).abs()))
        })
        .collect()
}

/// Errors at or below this level are treated as round-off and ignored by the slope fit.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Least-squares slope of `ln(error)` against `ln(T)` over the resolved points.
pub fn loglog_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > ROUNDOFF_FLOOR)
        .map(|&(t, e)| ((t as f64).ln(), e.ln()))
        .collect();
    loglog_fit(&pts)
}

pub(crate) fn loglog_fit(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
