//! Randomised property checks shared by the `verify` command and the test suites.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::{pl_lb_loss, pl_partition_loss};
use crate::pl::{derived_rng, log_likelihood_exact, log_pair_prob, ItemId, PartitionedPreference};
use crate::quadrature::{
    block_marginal_integral, convergence_probe, loglog_slope, IntegrationConfig, Integrator,
};

/// Shape of the random instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub max_items: usize,
    pub max_top_block: usize,
    pub max_top_blocks: usize,
    pub logit_range: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            max_items: 8,
            max_top_block: 4,
            max_top_blocks: 3,
            logit_range: 3.0,
        }
    }
}

/// A random preference over 2..=`max_items` items with 1..=`max_top_blocks`
/// upper blocks of at most `max_top_block` items each, and uniform logits.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, spec: &InstanceSpec) -> (PartitionedPreference, Vec<f64>) {
    let n = rng.gen_range(2..=spec.max_items);
    let mut items: Vec<ItemId> = (0..n).map(ItemId::from).collect();
    items.shuffle(rng);
    let n_top = rng.gen_range(1..=spec.max_top_blocks);
    let mut blocks = Vec::new();
    let mut start = 0;
    for _ in 0..n_top {
        let remaining = n - start;
        if remaining < 2 {
            break;
        }
        let size = rng.gen_range(1..=spec.max_top_block.min(remaining - 1));
        blocks.push(items[start..start + size].to_vec());
        start += size;
    }
    blocks.push(items[start..].to_vec());
    let pref = PartitionedPreference::new(n, blocks).expect("blocks partition the items");
    let w = (0..n)
        .map(|_| rng.gen_range(-spec.logit_range..=spec.logit_range))
        .collect();
    (pref, w)
}

pub fn random_instances(seed: u64, count: usize, spec: &InstanceSpec) -> Vec<(PartitionedPreference, Vec<f64>)> {
    (0..count)
        .map(|i| random_instance(&mut derived_rng(seed, i as u64), spec))
        .collect()
}

/// Largest `|grad_i - central difference_i|` of the quadrature likelihood, and `|sum grad|`.
pub fn gradient_fd_error(
    pref: &PartitionedPreference,
    w: &[f64],
    integ: &Integrator,
    h: f64,
    sign: f64,
) -> Result<(f64, f64)> {
    let mut grad = vec![0.0; w.len()];
    integ.log_likelihood_and_grad(pref, w, &mut grad)?;
    let mut worst = 0.0f64;
    let mut wp = w.to_vec();
    for i in 0..w.len() {
        wp[i] = w[i] + h;
        let up = integ.log_likelihood(pref, &wp)?;
        wp[i] = w[i] - h;
        let down = integ.log_likelihood(pref, &wp)?;
        wp[i] = w[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((sign * grad[i] - fd).abs());
    }
    let sum: f64 = grad.iter().sum::<f64>() * sign;
    Ok((worst, sum.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst <= tolerance,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub probe_instances: usize,
    pub seed: u64,
    pub integration: IntegrationConfig,
    pub fd_step: f64,
    /// Negates the analytic gradient before comparison; used to prove the check can fail.
    pub flip_gradient_sign: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            probe_instances: 20,
            seed: 0,
            integration: IntegrationConfig::default(),
            fd_step: 1e-4,
            flip_gradient_sign: false,
        }
    }
}

pub const ORACLE_TOL: f64 = 1e-4;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const GRADIENT_SUM_TOL: f64 = 1e-6;
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const LOWER_BOUND_TOL: f64 = 1e-4;
pub const SLOPE_RANGE: (f64, f64) = (-2.5, -1.5);
pub const PROBE_INTERVALS: [usize; 5] = [100, 200, 400, 800, 1600];

pub fn check_oracle(cfg: &VerifyConfig, instances: &[(PartitionedPreference, Vec<f64>)]) -> Result<CheckResult> {
    let integ = Integrator::new(cfg.integration)?;
    let mut worst = 0.0f64;
    for (pref, w) in instances {
        let err = (integ.log_likelihood(pref, w)? - log_likelihood_exact(pref, w)?).abs();
        worst = worst.max(err);
    }
    Ok(CheckResult::at_most(
        "oracle-equivalence",
        worst,
        ORACLE_TOL,
        format!("{} instances, T={}", instances.len(), cfg.integration.intervals),
    ))
}

pub fn check_gradient(cfg: &VerifyConfig, instances: &[(PartitionedPreference, Vec<f64>)]) -> Result<[CheckResult; 2]> {
    let integ = Integrator::new(cfg.integration)?;
    let sign = if cfg.flip_gradient_sign { -1.0 } else { 1.0 };
    let (mut worst, mut worst_sum) = (0.0f64, 0.0f64);
    for (pref, w) in instances {
        let (e, s) = gradient_fd_error(pref, w, &integ, cfg.fd_step, sign)?;
        worst = worst.max(e);
        worst_sum = worst_sum.max(s);
    }
    Ok([
        CheckResult::at_most(
            "gradient-finite-difference",
            worst,
            GRADIENT_TOL,
            format!("{} instances, h={}", instances.len(), cfg.fd_step),
        ),
        CheckResult::at_most(
            "gradient-sum-zero",
            worst_sum,
            GRADIENT_SUM_TOL,
            "sum of gradient entries".into(),
        ),
    ])
}

/// Gaps `-8, -7.5, ..., 8`.
pub fn closed_form_gaps() -> Vec<f64> {
    (0..=32).map(|k| -8.0 + 0.5 * k as f64).collect()
}

pub fn check_closed_form(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut worst_gap = 0.0;
    for gap in closed_form_gaps() {
        let w = [0.5 * gap, -0.5 * gap];
        let v = block_marginal_integral(&[ItemId(0)], &[ItemId(1)], &w, &cfg.integration)?;
        let err = (v - log_pair_prob(w[0], w[1])).abs();
        if err > worst {
            worst = err;
            worst_gap = gap;
        }
    }
    Ok(CheckResult::at_most(
        "closed-form-two-item",
        worst,
        CLOSED_FORM_TOL,
        format!("worst gap {worst_gap}"),
    ))
}

/// Returns the check and every fitted slope.
pub fn check_convergence(
    cfg: &VerifyConfig,
    instances: &[(PartitionedPreference, Vec<f64>)],
) -> Result<(CheckResult, Vec<f64>)> {
    let mut slopes = Vec::new();
    let mut outside = 0usize;
    for (pref, w) in instances {
        let probe = convergence_probe(pref, w, &PROBE_INTERVALS, cfg.integration.centering)?;
        match loglog_slope(&probe) {
            Some(s) => {
                if !(SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s) {
                    outside += 1;
                }
                slopes.push(s);
            }
            None => outside += 1,
        }
    }
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        CheckResult::at_most(
            "convergence-order",
            outside as f64,
            0.0,
            format!("slopes in [{lo:.3}, {hi:.3}], {outside} outside [-2.5, -1.5]"),
        ),
        slopes,
    ))
}

pub fn check_lower_bound(cfg: &VerifyConfig, instances: &[(PartitionedPreference, Vec<f64>)]) -> Result<CheckResult> {
    let integ = Integrator::new(cfg.integration)?;
    let mut worst = f64::NEG_INFINITY;
    for (pref, w) in instances {
        let gap = pl_partition_loss(pref, w, &integ)?.value - pl_lb_loss(pref, w)?.value;
        worst = worst.max(gap);
    }
    Ok(CheckResult::at_most(
        "lower-bound-ordering",
        worst.max(0.0),
        LOWER_BOUND_TOL,
        format!("largest pl-partition minus pl-lb over {} instances", instances.len()),
    ))
}

/// Oracle, gradient, convergence and lower-bound checks.
pub fn run_verify(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let spec = InstanceSpec::default();
    let instances = random_instances(cfg.seed, cfg.instances, &spec);
    let probe = random_instances(cfg.seed.wrapping_add(1), cfg.probe_instances, &spec);
    let mut out = vec![check_oracle(cfg, &instances)?];
    out.extend(check_gradient(cfg, &instances)?);
    out.push(check_convergence(cfg, &probe)?.0);
    out.push(check_lower_bound(cfg, &instances)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_valid_and_reproducible() {
        let spec = InstanceSpec::default();
        let a = random_instances(3, 50, &spec);
        assert_eq!(a, random_instances(3, 50, &spec));
        for (p, w) in &a {
            assert!(p.n_items() <= 8 && p.n_partitions() >= 2);
            assert!(p.partitions()[..p.n_partitions() - 1].iter().all(|b| b.len() <= 4));
            assert!(w.iter().all(|x| x.abs() <= 3.0));
        }
    }

    #[test]
    fn flipped_gradient_is_caught() {
        let cfg = VerifyConfig {
            instances: 3,
            flip_gradient_sign: true,
            integration: IntegrationConfig::default().with_intervals(2000),
            ..VerifyConfig::default()
        };
        let inst = random_instances(0, 3, &InstanceSpec::default());
        let [fd, _] = check_gradient(&cfg, &inst).unwrap();
        assert!(!fd.passed);
    }
}
