//! Monte-Carlo estimators for exit and hitting functionals: survival
//! probabilities, exit-time moment generating functions, hitting-time Laplace
//! transforms, mean exit times and the jump-containment fraction.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::levy::ModelParams;
use crate::sampler::{norm, Process, Region, StepConfig, StoppedSample, Walker};

/// Weight below which a hitting path is abandoned: `e^{−λt} < 1e-17`.
pub const LAPLACE_CUTOFF: f64 = 1e-17;

/// Aggregated Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub truncated_fraction: f64,
    /// Bound on the contribution of truncated paths (0 when not available).
    pub tail_bound: f64,
    /// When set, `value` is only a lower bound.
    pub diverged: bool,
    /// Largest single weight exceeds 10% of the total weight.
    pub heavy_tail: bool,
}

impl Estimate {
    /// A value known without sampling.
    pub fn exact(value: f64, n: usize) -> Self {
        Self {
            value,
            stderr: 0.0,
            n,
            truncated_fraction: 0.0,
            tail_bound: 0.0,
            diverged: false,
            heavy_tail: false,
        }
    }

    /// Sample mean and standard error of per-path weights.
    pub fn from_weights(weights: &[f64], truncated: usize) -> Self {
        let n = weights.len();
        let (value, stderr) = mean_stderr(weights);
        let total: f64 = weights.iter().sum();
        let max = weights.iter().cloned().fold(0.0f64, f64::max);
        Self {
            value,
            stderr,
            n,
            truncated_fraction: truncated as f64 / n.max(1) as f64,
            tail_bound: 0.0,
            diverged: false,
            heavy_tail: total > 0.0 && max > 0.1 * total,
        }
    }

    /// `|self − other| / √(se₁² + se₂²)`; zero when both errors vanish and the values agree.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.stderr.hypot(other.stderr);
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub(crate) fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Path budget of an estimator: `n` paths over `streams` substreams of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McRun {
    pub n: usize,
    pub seed: u64,
    pub streams: usize,
}

impl McRun {
    pub fn new(n: usize, seed: u64, streams: usize) -> Result<Self> {
        if n < 2 {
            return Err(domain("need at least two paths"));
        }
        if streams == 0 {
            return Err(domain("streams must be at least 1"));
        }
        Ok(Self { n, seed, streams })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

fn check_inside(x: &[f64], r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(domain(format!("radius must be positive, got {r}")));
    }
    if norm(x) >= r {
        return Err(domain(format!("start point |x| = {} is not inside B_{r}", norm(x))));
    }
    Ok(())
}

/// Exit paths from `B_R` started at `x`.
pub fn exit_paths(
    process: &Process,
    r: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Vec<StoppedSample>> {
    Walker::new(*process, Region::ExitBall(r), *cfg)?.simulate(x, run.n, run.seed, run.streams)
}

/// `P^x(τ_R > t)` for several `t` from one set of shared paths.
pub fn survival_curve(samples: &[StoppedSample], ts: &[f64]) -> Vec<Estimate> {
    let n = samples.len();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    ts.iter()
        .map(|&t| {
            if t <= 0.0 {
                return Estimate::exact(1.0, n);
            }
            let alive = samples.iter().filter(|s| s.tau_hat > t || s.truncated).count();
            let p = alive as f64 / n as f64;
            Estimate {
                value: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
                n,
                truncated_fraction: truncated as f64 / n as f64,
                tail_bound: 0.0,
                diverged: false,
                heavy_tail: false,
            }
        })
        .collect()
}

/// `P^x(τ_R > t)`, the fraction of paths still inside `B_R` after time `t`.
pub fn estimate_survival(
    process: &Process,
    r: f64,
    x: &[f64],
    t: f64,
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Estimate> {
    check_inside(x, r)?;
    if !(t >= 0.0) || t > cfg.t_max {
        return Err(domain(format!("survival time {t} must lie in [0, t_max]")));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(1.0, run.n));
    }
    let samples = exit_paths(process, r, x, run, cfg)?;
    Ok(survival_curve(&samples, &[t])[0])
}

/// `E[e^{λτ}]` from stored exit paths.
///
/// Truncated paths enter with weight `e^{λ t_max}`, so the value is the
/// partial sum `E[e^{λ min(τ, t_max)}]`. `diverged` is set when `λ ≥ λ̂_R`, or
/// when truncated paths carry more than 10% of the total weight and the partial
/// sum still grows by more than 10% between `t_max/2` and `t_max`.
pub fn exit_mgf_from_samples(
    samples: &[StoppedSample],
    lambda: f64,
    lambda_r_hat: f64,
    t_max: f64,
) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return Err(domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = samples.len();
    if lambda == 0.0 {
        return Ok(Estimate::exact(1.0, n));
    }
    let weights: Vec<f64> = samples
        .iter()
        .map(|s| (lambda * s.tau_hat.min(t_max)).exp())
        .collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    let mut est = Estimate::from_weights(&weights, truncated);
    let total: f64 = weights.iter().sum();
    let tail_weight: f64 = samples
        .iter()
        .zip(&weights)
        .filter(|(s, _)| s.truncated)
        .map(|(_, w)| w)
        .sum();
    let half: f64 = samples
        .iter()
        .map(|s| (lambda * s.tau_hat.min(0.5 * t_max)).exp())
        .sum();
    let growing = tail_weight > 0.1 * total && total > 1.1 * half;
    if lambda >= lambda_r_hat || growing {
        est.diverged = true;
        est.tail_bound = f64::INFINITY;
    } else {
        let p_tail = est.truncated_fraction.max(3.0 / n as f64);
        est.tail_bound = lambda * p_tail * (lambda * t_max).exp() / (lambda_r_hat - lambda);
    }
    Ok(est)
}

/// `E^x[e^{λ τ_R}]` with the divergence monitor described in [`exit_mgf_from_samples`].
pub fn estimate_exit_mgf(
    process: &Process,
    r: f64,
    x: &[f64],
    lambda: f64,
    run: &McRun,
    cfg: &StepConfig,
    lambda_r_hat: f64,
) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return Err(domain(format!("lambda must be >= 0, got {lambda}")));
    }
    check_inside(x, r)?;
    if lambda == 0.0 {
        return Ok(Estimate::exact(1.0, run.n));
    }
    let samples = exit_paths(process, r, x, run, cfg)?;
    exit_mgf_from_samples(&samples, lambda, lambda_r_hat, cfg.t_max)
}

/// Horizon after which `e^{−λt}` drops below [`LAPLACE_CUTOFF`].
pub fn laplace_horizon(lambda: f64) -> f64 {
    -LAPLACE_CUTOFF.ln() / lambda
}

/// `E^x[e^{−λ T_R}]`, `T_R` the first hitting time of `B̄_R`.
///
/// Paths are abandoned once their weight would fall below `1e-17` or at
/// `t_max`; abandoned paths get weight 0 and their maximal possible
/// contribution is reported in `tail_bound`.
pub fn estimate_hitting_laplace(
    process: &Process,
    r: f64,
    x: &[f64],
    lambda: f64,
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Estimate> {
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be > 0, got {lambda}")));
    }
    if !(r > 0.0) {
        return Err(domain(format!("radius must be positive, got {r}")));
    }
    if norm(x) <= r {
        return Ok(Estimate::exact(1.0, run.n));
    }
    let horizon = cfg.t_max.min(laplace_horizon(lambda)).max(cfg.h);
    let cfg = cfg.with_t_max(horizon)?;
    let walker = Walker::new(*process, Region::HitBall(r), cfg)?;
    let samples = walker.simulate(x, run.n, run.seed, run.streams)?;
    Ok(hitting_laplace_from_samples(&samples, lambda, horizon))
}

pub fn hitting_laplace_from_samples(samples: &[StoppedSample], lambda: f64, horizon: f64) -> Estimate {
    let weights: Vec<f64> = samples
        .iter()
        .map(|s| if s.truncated { 0.0 } else { (-lambda * s.tau_hat).exp() })
        .collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    let mut est = Estimate::from_weights(&weights, truncated);
    est.tail_bound = (-lambda * horizon).exp() * est.truncated_fraction;
    est
}

/// `E^x[τ_R]` as the mean grid exit time.
pub fn estimate_mean_exit(
    process: &Process,
    r: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Estimate> {
    check_inside(x, r)?;
    let samples = exit_paths(process, r, x, run, cfg)?;
    let times: Vec<f64> = samples.iter().map(|s| s.tau_hat).collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    let mut est = Estimate::from_weights(&times, truncated);
    est.heavy_tail = false;
    Ok(est)
}

/// Containment factor `1 + 2^{1/α}` for exit jumps.
pub fn containment_factor(p: &ModelParams) -> f64 {
    1.0 + 2f64.powf(1.0 / p.alpha)
}

/// `E^x[e^{wτ}; R ≤ |X_τ| ≤ CR] / E^x[e^{wτ}]` over exit paths.
///
/// Truncated paths have no exit position and are left out of both sums. The
/// standard error is the delta-method error of the ratio.
pub fn exit_jump_containment(
    process: &Process,
    r: f64,
    x: &[f64],
    weight_exponent: f64,
    factor: f64,
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Estimate> {
    check_inside(x, r)?;
    if !(factor > 1.0) {
        return Err(domain(format!("containment factor must exceed 1, got {factor}")));
    }
    let samples = exit_paths(process, r, x, run, cfg)?;
    Ok(containment_from_samples(&samples, r, weight_exponent, factor))
}

pub fn containment_from_samples(samples: &[StoppedSample], r: f64, w: f64, factor: f64) -> Estimate {
    let n = samples.len();
    let exited: Vec<&StoppedSample> = samples.iter().filter(|s| !s.truncated).collect();
    let b: Vec<f64> = exited.iter().map(|s| (w * s.tau_hat).exp()).collect();
    let a: Vec<f64> = exited
        .iter()
        .zip(&b)
        .map(|(s, wt)| {
            let len = norm(&s.x_after);
            if len <= factor * r {
                *wt
            } else {
                0.0
            }
        })
        .collect();
    let k = b.len();
    let sum_b: f64 = b.iter().sum();
    let ratio = a.iter().sum::<f64>() / sum_b;
    let mean_b = sum_b / k as f64;
    let resid: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai - ratio * bi).collect();
    let (_, se_resid) = mean_stderr(&resid);
    Estimate {
        value: ratio,
        stderr: se_resid / mean_b,
        n,
        truncated_fraction: (n - k) as f64 / n as f64,
        tail_bound: 0.0,
        diverged: false,
        heavy_tail: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(n: usize, seed: u64) -> McRun {
        McRun::new(n, seed, 4).unwrap()
    }

    #[test]
    fn trivial_values() {
        let p = Process::Levy(ModelParams::new(1, 1.0, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 5.0).unwrap();
        let s = estimate_survival(&p, 1.0, &[0.0], 0.0, &run(10, 1), &cfg).unwrap();
        assert_eq!((s.value, s.stderr), (1.0, 0.0));
        let m = estimate_exit_mgf(&p, 1.0, &[0.0], 0.0, &run(10, 1), &cfg, 1.0).unwrap();
        assert_eq!((m.value, m.stderr), (1.0, 0.0));
        let h = estimate_hitting_laplace(&p, 1.0, &[0.5], 1.0, &run(10, 1), &cfg).unwrap();
        assert_eq!(h.value, 1.0);
        assert!(estimate_exit_mgf(&p, 1.0, &[0.0], -1.0, &run(10, 1), &cfg, 1.0).is_err());
        assert!(estimate_survival(&p, 1.0, &[1.5], 1.0, &run(10, 1), &cfg).is_err());
    }

    #[test]
    fn survival_non_increasing_on_shared_paths() {
        let p = Process::Levy(ModelParams::new(1, 1.0, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 3.0).unwrap();
        let paths = exit_paths(&p, 1.0, &[0.0], &run(4000, 5), &cfg).unwrap();
        let c = survival_curve(&paths, &[0.5, 1.0, 2.0]);
        assert!(c[0].value >= c[1].value && c[1].value >= c[2].value);
    }

    #[test]
    fn mgf_non_decreasing_in_lambda() {
        let p = Process::Levy(ModelParams::new(1, 1.5, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 10.0).unwrap();
        let paths = exit_paths(&p, 1.0, &[0.2], &run(2000, 6), &cfg).unwrap();
        let mut prev = 0.0;
        for i in 0..10 {
            let v = exit_mgf_from_samples(&paths, 0.1 * i as f64, 1.6, 10.0).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn mgf_flags_lambda_above_threshold() {
        let p = Process::Brownian { d: 1 };
        let cfg = StepConfig::new(1e-2, 5.0).unwrap();
        let e = estimate_exit_mgf(&p, 1.0, &[0.0], 1.5, &run(200, 2), &cfg, 1.2337).unwrap();
        assert!(e.diverged);
    }

    #[test]
    fn brownian_mean_exit_d2() {
        let p = Process::Brownian { d: 2 };
        let cfg = StepConfig::new(1e-3, 20.0).unwrap();
        let e = estimate_mean_exit(&p, 1.0, &[0.0, 0.0], &run(4000, 3), &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr + 0.02, "{e:?}");
    }

    #[test]
    fn containment_exhausts_with_large_factor() {
        let p = Process::Levy(ModelParams::new(1, 1.0, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 10.0).unwrap();
        let e = exit_jump_containment(&p, 1.0, &[0.0], 0.0, 1e3, &run(2000, 4), &cfg).unwrap();
        assert!(e.value > 0.99, "{e:?}");
    }

    #[test]
    fn ratio_stderr_zero_when_all_contained() {
        let s = StoppedSample {
            tau_hat: 0.5,
            x_before: vec![0.9],
            x_after: vec![1.1],
            occupation: 0.5,
            potential_integral: 0.0,
            truncated: false,
        };
        let e = containment_from_samples(&[s.clone(), s], 1.0, 0.3, 2.0);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }
}
