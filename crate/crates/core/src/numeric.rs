//! Log-domain helpers shared by the likelihood, loss, and metric code.

use std::f64::consts::LN_2;

/// `log(sum(exp(xs)))` with the max-shift trick. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum = pairwise_sum_by(xs, |x| (x - max).exp());
    max + sum.ln()
}

/// Log-sum-exp over an index subset of `values`.
pub fn logsumexp_indexed<I>(values: &[f64], indices: I) -> f64
where
    I: IntoIterator<Item = usize> + Clone,
{
    let max = indices
        .clone()
        .into_iter()
        .map(|i| values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = indices.into_iter().map(|i| (values[i] - max).exp()).sum();
    max + sum.ln()
}

/// `log(1 - exp(x))` for `x <= 0`, accurate on both sides of `-ln 2`.
#[inline]
pub fn log1mexp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = logsumexp(xs);
    xs.iter().map(|&x| (x - lse).exp()).collect()
}

/// `ln(n!)` via the log-gamma function.
pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

/// Pairwise (cascade) summation of `f(x)` over `xs`, in a fixed order so the
/// result does not depend on thread scheduling.
pub fn pairwise_sum_by<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Copy,
{
    const BLOCK: usize = 128;
    if xs.len() <= BLOCK {
        return xs.iter().map(|&x| f(x)).sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}
