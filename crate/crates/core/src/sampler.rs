//! Increment samplers (stable, relativistic stable, Brownian) and a grid path
//! walker that stops on exit from or entry into a region.
//!
//! Jump processes are sampled by subordination: a Gaussian vector whose
//! per-coordinate variance is an independent draw of a one-sided stable
//! (or exponentially tilted stable) subordinator.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::distr::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::levy::ModelParams;

/// Lowest admissible acceptance probability `e^{−mt}` of the tilting scheme.
pub const ACCEPTANCE_FLOOR: f64 = 1e-3;

/// `−ζ(1/2)/√(2π)`: shift of a discretely monitored Brownian barrier.
pub const BARRIER_SHIFT: f64 = 0.582_597_157_939_010_6;

/// Root seed plus substream index of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Time grid of the walker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub h: f64,
    pub t_max: f64,
    pub record_occupation: bool,
    /// Shift Brownian barriers by `0.5826·√h` to offset discrete monitoring.
    pub brownian_correction: bool,
}

impl StepConfig {
    pub fn new(h: f64, t_max: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(domain(format!("time step must be positive, got {h}")));
        }
        if !(t_max >= h) || !t_max.is_finite() {
            return Err(domain(format!("t_max must be finite and >= h, got {t_max}")));
        }
        Ok(Self {
            h,
            t_max,
            record_occupation: true,
            brownian_correction: true,
        })
    }

    pub fn with_occupation(mut self, on: bool) -> Self {
        self.record_occupation = on;
        self
    }

    pub fn with_brownian_correction(mut self, on: bool) -> Self {
        self.brownian_correction = on;
        self
    }

    pub fn with_t_max(self, t_max: f64) -> Result<Self> {
        Self::new(self.h, t_max).map(|c| Self {
            t_max: c.t_max,
            ..self
        })
    }

    /// Number of grid steps up to the horizon.
    pub fn max_steps(&self) -> u64 {
        ((self.t_max / self.h).round() as u64).max(1)
    }
}

/// One simulated stopped path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedSample {
    /// Grid stopping time (`t_max` when truncated).
    pub tau_hat: f64,
    pub x_before: Vec<f64>,
    pub x_after: Vec<f64>,
    /// Left-endpoint time spent in the occupation set.
    pub occupation: f64,
    /// Left-endpoint integral of the attached radial potential (0 if none).
    pub potential_integral: f64,
    pub truncated: bool,
}

/// The process being simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Process {
    Levy(ModelParams),
    /// Brownian motion with generator `½Δ`.
    Brownian { d: u32 },
}

impl Process {
    pub fn dim(&self) -> u32 {
        match self {
            Process::Levy(p) => p.d,
            Process::Brownian { d } => *d,
        }
    }
}

impl From<ModelParams> for Process {
    fn from(p: ModelParams) -> Self {
        Process::Levy(p)
    }
}

/// Stopping rule of a walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Stop on the first grid time with `|X| ≥ R`.
    ExitBall(f64),
    /// Stop on the first grid time with `|X| ≤ R`.
    HitBall(f64),
    /// Exit from the level set `{v > γ} = B_{r_γ}` of a radial potential.
    ExitLevelSet(f64),
    /// Exit from `(0, ∞)` (first coordinate).
    ExitHalfLine,
}

impl Region {
    fn validate(&self) -> Result<()> {
        match *self {
            Region::ExitBall(r) | Region::HitBall(r) | Region::ExitLevelSet(r) => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(domain(format!("region radius must be positive, got {r}")));
                }
            }
            Region::ExitHalfLine => {}
        }
        Ok(())
    }

    /// Set whose occupation is recorded: the ball itself, or the half-line.
    fn occupies(&self, x: &[f64]) -> bool {
        match *self {
            Region::ExitBall(r) | Region::HitBall(r) | Region::ExitLevelSet(r) => {
                norm(x) <= r
            }
            Region::ExitHalfLine => x[0] > 0.0,
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Kanter's one-sided stable variable with Laplace transform `e^{−w^β}`.
#[derive(Debug, Clone, Copy)]
struct Kanter {
    beta: f64,
    a_sin_beta: f64,
    a_sin_u: f64,
    out_exp: f64,
}

impl Kanter {
    fn new(beta: f64) -> Self {
        let c = 1.0 - beta;
        Self {
            beta,
            a_sin_beta: beta / c,
            a_sin_u: 1.0 / c,
            out_exp: c / beta,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = PI * rng.sample::<f64, _>(OpenClosed01);
        let e: f64 = rng.sample(Exp1);
        let ln_a = self.a_sin_beta * (self.beta * u).sin().ln()
            + ((1.0 - self.beta) * u).sin().ln()
            - self.a_sin_u * u.sin().ln();
        (self.out_exp * (ln_a - e.ln())).exp()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(domain(format!("subordinator index must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// One draw `S_t` of the subordinator with `E e^{−w S_t} = e^{−t·scale·w^β}`.
pub fn stable_subordinator_sample<R: Rng + ?Sized>(
    beta: f64,
    t: f64,
    scale: f64,
    rng: &mut R,
) -> Result<f64> {
    check_beta(beta)?;
    check_positive("t", t)?;
    check_positive("scale", scale)?;
    Ok((t * scale).powf(1.0 / beta) * Kanter::new(beta).sample(rng))
}

fn check_acceptance(m: f64, t: f64) -> Result<()> {
    let acc = (-m * t).exp();
    if acc < ACCEPTANCE_FLOOR {
        return Err(Error::Config(format!(
            "tilting acceptance e^(-m t) = {acc:.3e} is below {ACCEPTANCE_FLOOR}; use a smaller time step"
        )));
    }
    Ok(())
}

/// Like [`relativistic_subordinator_sample`], also returning the number of proposals.
pub fn relativistic_subordinator_attempts<R: Rng + ?Sized>(
    alpha: f64,
    m: f64,
    t: f64,
    rng: &mut R,
) -> Result<(f64, u64)> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    check_positive("m", m)?;
    check_positive("t", t)?;
    check_acceptance(m, t)?;
    let beta = 0.5 * alpha;
    let kanter = Kanter::new(beta);
    let pre = (t * 2f64.powf(beta)).powf(1.0 / beta);
    let theta = 0.5 * m.powf(2.0 / alpha);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let s = pre * kanter.sample(rng);
        let u: f64 = rng.sample(OpenClosed01);
        if u <= (-theta * s).exp() {
            return Ok((s, attempts));
        }
    }
}

/// One draw with Laplace exponent `t·((2w + m^{2/α})^{α/2} − m)`, by tilting.
pub fn relativistic_subordinator_sample<R: Rng + ?Sized>(
    alpha: f64,
    m: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    relativistic_subordinator_attempts(alpha, m, t, rng).map(|(s, _)| s)
}

/// Isotropic α-stable increment over time `h`, `E e^{iu·X} = e^{−h|u|^α}`.
pub fn stable_increment<R: Rng + ?Sized>(p: &ModelParams, h: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !p.is_massless() {
        return Err(domain("stable_increment needs m = 0"));
    }
    let mut out = vec![0.0; p.d as usize];
    IncrementSampler::new(&Process::Levy(*p), h)?.fill(rng, &mut out);
    Ok(out)
}

/// Relativistic α-stable increment over time `h`.
pub fn relativistic_increment<R: Rng + ?Sized>(
    p: &ModelParams,
    h: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if p.is_massless() {
        return Err(domain("relativistic_increment needs m > 0"));
    }
    let mut out = vec![0.0; p.d as usize];
    IncrementSampler::new(&Process::Levy(*p), h)?.fill(rng, &mut out);
    Ok(out)
}

/// Brownian increment with per-coordinate variance `h`.
pub fn brownian_increment<R: Rng + ?Sized>(d: u32, h: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; d as usize];
    IncrementSampler::new(&Process::Brownian { d }, h)?.fill(rng, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Clock {
    Fixed(f64),
    Stable { kanter: Kanter, pre: f64 },
    Tilted { kanter: Kanter, pre: f64, theta: f64 },
}

/// Increment sampler for a fixed process and time step.
#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    clock: Clock,
}

impl IncrementSampler {
    pub fn new(process: &Process, h: f64) -> Result<Self> {
        check_positive("h", h)?;
        let clock = match process {
            Process::Brownian { d } => {
                if *d == 0 {
                    return Err(domain("dimension must be at least 1"));
                }
                Clock::Fixed(h)
            }
            Process::Levy(p) => {
                ModelParams::new(p.d, p.alpha, p.m)?;
                let beta = 0.5 * p.alpha;
                let kanter = Kanter::new(beta);
                let pre = (h * 2f64.powf(beta)).powf(1.0 / beta);
                if p.is_massless() {
                    Clock::Stable { kanter, pre }
                } else {
                    check_acceptance(p.m, h)?;
                    Clock::Tilted {
                        kanter,
                        pre,
                        theta: 0.5 * p.m.powf(2.0 / p.alpha),
                    }
                }
            }
        };
        Ok(Self { clock })
    }

    fn variance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.clock {
            Clock::Fixed(h) => h,
            Clock::Stable { kanter, pre } => pre * kanter.sample(rng),
            Clock::Tilted { kanter, pre, theta } => loop {
                let s = pre * kanter.sample(rng);
                let u: f64 = rng.sample(OpenClosed01);
                if u <= (-theta * s).exp() {
                    break s;
                }
            },
        }
    }

    /// Overwrite `out` with one increment.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let sd = self.variance(rng).sqrt();
        for v in out.iter_mut() {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Radial potential `r ↦ v(r)` integrated along the path.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reusable path simulator for one (process, region, grid) combination.
#[derive(Clone)]
pub struct Walker {
    process: Process,
    region: Region,
    cfg: StepConfig,
    stepper: IncrementSampler,
    potential: Option<RadialFn>,
    occupation_radius: Option<f64>,
    shift: f64,
}

impl std::fmt::Debug for Walker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Walker")
            .field("process", &self.process)
            .field("region", &self.region)
            .field("cfg", &self.cfg)
            .field("has_potential", &self.potential.is_some())
            .finish()
    }
}

impl Walker {
    pub fn new(process: Process, region: Region, cfg: StepConfig) -> Result<Self> {
        region.validate()?;
        if region == Region::ExitHalfLine && process.dim() != 1 {
            return Err(domain("half-line exit is one-dimensional"));
        }
        let stepper = IncrementSampler::new(&process, cfg.h)?;
        let shift = match process {
            Process::Brownian { .. } if cfg.brownian_correction => BARRIER_SHIFT * cfg.h.sqrt(),
            _ => 0.0,
        };
        Ok(Self {
            process,
            region,
            cfg,
            stepper,
            potential: None,
            occupation_radius: None,
            shift,
        })
    }

    /// Accumulate `∫ v(|X_s|) ds` along every path.
    pub fn with_potential(mut self, v: RadialFn) -> Self {
        self.potential = Some(v);
        self
    }

    /// Record occupation of `B_r` instead of the region's own set.
    pub fn with_occupation_ball(mut self, r: f64) -> Self {
        self.occupation_radius = Some(r);
        self
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn process(&self) -> &Process {
        &self.process
    }

    fn stopped(&self, x: &[f64]) -> bool {
        match self.region {
            Region::ExitBall(r) | Region::ExitLevelSet(r) => norm(x) >= r - self.shift,
            Region::HitBall(r) => norm(x) <= r + self.shift,
            Region::ExitHalfLine => x[0] <= self.shift,
        }
    }

    fn occupies(&self, x: &[f64]) -> bool {
        match self.occupation_radius {
            Some(r) => norm(x) <= r,
            None => self.region.occupies(x),
        }
    }

    /// Simulate one path from `x0` with the given generator.
    pub fn walk<R: Rng + ?Sized>(&self, x0: &[f64], rng: &mut R) -> Result<StoppedSample> {
        if x0.len() != self.process.dim() as usize {
            return Err(domain(format!(
                "start point has dimension {}, process has {}",
                x0.len(),
                self.process.dim()
            )));
        }
        let h = self.cfg.h;
        let mut x = x0.to_vec();
        if self.stopped(&x) {
            return Ok(StoppedSample {
                tau_hat: 0.0,
                x_before: x.clone(),
                x_after: x,
                occupation: 0.0,
                potential_integral: 0.0,
                truncated: false,
            });
        }
        let mut prev = x.clone();
        let mut inc = vec![0.0; x.len()];
        let mut occupation = 0.0;
        let mut potential_integral = 0.0;
        let max_steps = self.cfg.max_steps();
        for k in 1..=max_steps {
            if self.cfg.record_occupation && self.occupies(&x) {
                occupation += h;
            }
            if let Some(v) = &self.potential {
                potential_integral += h * v(norm(&x));
            }
            prev.copy_from_slice(&x);
            self.stepper.fill(rng, &mut inc);
            for (xi, di) in x.iter_mut().zip(&inc) {
                *xi += di;
            }
            if self.stopped(&x) {
                return Ok(StoppedSample {
                    tau_hat: k as f64 * h,
                    x_before: prev,
                    x_after: x,
                    occupation,
                    potential_integral,
                    truncated: false,
                });
            }
        }
        Ok(StoppedSample {
            tau_hat: self.cfg.t_max,
            x_before: prev,
            x_after: x,
            occupation: occupation.min(self.cfg.t_max),
            potential_integral,
            truncated: true,
        })
    }

    /// `n` paths split into `streams` fixed substreams of `seed`, run in parallel.
    ///
    /// The output order and content depend only on `(seed, streams, n)`, not on
    /// the size of the rayon pool executing it.
    pub fn simulate(
        &self,
        x0: &[f64],
        n: usize,
        seed: u64,
        streams: usize,
    ) -> Result<Vec<StoppedSample>> {
        if streams == 0 {
            return Err(domain("streams must be at least 1"));
        }
        let chunks: Vec<Vec<StoppedSample>> = (0..streams)
            .into_par_iter()
            .map(|k| {
                let lo = k * n / streams;
                let hi = (k + 1) * n / streams;
                let mut rng = SeedSpec::new(seed, k as u64).rng();
                (lo..hi).map(|_| self.walk(x0, &mut rng)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// Simulate a single stopped path.
pub fn walk_until(
    process: &Process,
    x0: &[f64],
    region: &Region,
    cfg: &StepConfig,
    seed: SeedSpec,
) -> Result<StoppedSample> {
    let walker = Walker::new(*process, *region, *cfg)?;
    walker.walk(x0, &mut seed.rng())
}

/// Simulate `n` stopped paths over `streams` deterministic substreams.
pub fn simulate(
    process: &Process,
    x0: &[f64],
    region: &Region,
    cfg: &StepConfig,
    n: usize,
    seed: u64,
    streams: usize,
) -> Result<Vec<StoppedSample>> {
    Walker::new(*process, *region, *cfg)?.simulate(x0, n, seed, streams)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn subordinator_laplace_transform() {
        let mut rng = SeedSpec::new(1, 0).rng();
        let w: Vec<f64> = (0..200_000)
            .map(|_| (-stable_subordinator_sample(0.5, 1.0, 2f64.sqrt(), &mut rng).unwrap()).exp())
            .collect();
        let (m, se) = mean_se(&w);
        assert!((m - (-(2f64.sqrt())).exp()).abs() < 4.0 * se);
    }

    #[test]
    fn subordinator_half_median() {
        let mut rng = SeedSpec::new(2, 0).rng();
        let mut s: Vec<f64> = (0..1_000_001)
            .map(|_| stable_subordinator_sample(0.5, 1.0, 1.0, &mut rng).unwrap())
            .collect();
        s.sort_by(f64::total_cmp);
        // Lévy law with scale 1/2: median 1/(2 q), q the median of a χ²₁ variable.
        let median = 1.0 / (2.0 * 0.454_936_423_119_572_4);
        assert!((s[500_000] / median - 1.0).abs() < 0.01);
    }

    #[test]
    fn subordinator_domain() {
        let mut rng = SeedSpec::new(0, 0).rng();
        assert!(stable_subordinator_sample(1.0, 1.0, 1.0, &mut rng).is_err());
        assert!(stable_subordinator_sample(0.5, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn relativistic_acceptance_floor() {
        let mut rng = SeedSpec::new(0, 0).rng();
        let r = relativistic_subordinator_sample(1.0, 10.0, 1.0, &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn relativistic_laplace_transform() {
        let mut rng = SeedSpec::new(3, 0).rng();
        let w: Vec<f64> = (0..200_000)
            .map(|_| (-2.0 * relativistic_subordinator_sample(1.0, 1.0, 0.1, &mut rng).unwrap()).exp())
            .collect();
        let (m, se) = mean_se(&w);
        let exact = (-0.1 * (5f64.sqrt() - 1.0)).exp();
        assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact} (se {se})");
    }

    #[test]
    fn brownian_increment_variance() {
        let mut rng = SeedSpec::new(4, 0).rng();
        let v: Vec<f64> = (0..100_000)
            .map(|_| brownian_increment(1, 0.25, &mut rng).unwrap()[0].powi(2))
            .collect();
        let (m, se) = mean_se(&v);
        assert!((m - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn seeds_are_reproducible() {
        let p = Process::Levy(ModelParams::new(2, 1.2, 0.5).unwrap());
        let cfg = StepConfig::new(1e-2, 5.0).unwrap();
        let a = walk_until(&p, &[0.1, 0.0], &Region::ExitBall(1.0), &cfg, SeedSpec::new(9, 3)).unwrap();
        let b = walk_until(&p, &[0.1, 0.0], &Region::ExitBall(1.0), &cfg, SeedSpec::new(9, 3)).unwrap();
        assert_eq!(a, b);
        let c = walk_until(&p, &[0.1, 0.0], &Region::ExitBall(1.0), &cfg, SeedSpec::new(9, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn start_outside_exit_region() {
        let p = Process::Levy(ModelParams::new(1, 1.0, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 1.0).unwrap();
        let s = walk_until(&p, &[2.0], &Region::ExitBall(1.0), &cfg, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(s.tau_hat, 0.0);
        assert_eq!(s.occupation, 0.0);
        assert!(!s.truncated);
    }

    #[test]
    fn exit_geometry_and_occupation() {
        let p = Process::Levy(ModelParams::new(2, 0.8, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 2.0).unwrap();
        let paths = simulate(&p, &[0.0, 0.0], &Region::ExitBall(1.0), &cfg, 500, 7, 4).unwrap();
        for s in &paths {
            assert!(s.occupation <= s.tau_hat + 1e-12);
            if s.truncated {
                assert_eq!(s.tau_hat, cfg.t_max);
            } else {
                assert!(norm(&s.x_before) < 1.0 && norm(&s.x_after) >= 1.0);
                // always inside before exit: occupation equals the stopping time
                assert!((s.occupation - s.tau_hat).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pooled_mean_independent_of_merge_order() {
        let p = Process::Levy(ModelParams::new(1, 1.5, 0.0).unwrap());
        let cfg = StepConfig::new(1e-2, 5.0).unwrap();
        let paths = simulate(&p, &[0.0], &Region::ExitBall(1.0), &cfg, 400, 11, 4).unwrap();
        let chunks: Vec<&[StoppedSample]> = paths.chunks(100).collect();
        let fwd: f64 = chunks.iter().flat_map(|c| c.iter()).map(|s| s.tau_hat).sum();
        let rev: f64 = chunks.iter().rev().flat_map(|c| c.iter()).map(|s| s.tau_hat).sum();
        assert!(((fwd - rev) / fwd).abs() < 1e-12);
    }

    #[test]
    fn truncation_sets_horizon() {
        let p = Process::Brownian { d: 1 };
        let cfg = StepConfig::new(1e-2, 0.05).unwrap();
        let s = walk_until(&p, &[0.0], &Region::ExitBall(100.0), &cfg, SeedSpec::new(1, 0)).unwrap();
        assert!(s.truncated);
        assert_eq!(s.tau_hat, 0.05);
        assert!((s.occupation - 0.05).abs() < 1e-12);
    }
}
