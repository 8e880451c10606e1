//! Verification suites. Each suite runs a fixed experiment and compares the
//! outcome against an oracle or a property band; the CSV it produces depends
//! only on the suite options.

use std::f64::consts::PI;

use clap::ValueEnum;
use serde::Serialize;

use fracwell::groundstate::{
    boundary_exponent, check_radial_symmetry, fk_ratio, gap_inequality_check, moment_bounds, moment_lambda_p,
    p_star, phi_at_a, ProfileBand, ProfileMeta, Side,
};
use fracwell::levy::{jump_density, sigma_density, tail_mass, total_sigma_mass, Interval, ModelParams};
use fracwell::oracles::{classical_groundstate_1d, dirichlet_eigenvalue, spectral_solve_1d, SpectralData};
use fracwell::potential::{RadialPotential, WellSpec};
use fracwell::sampler::{stable_subordinator_sample, IncrementSampler, Process, SeedSpec, StepConfig};
use fracwell::specfun::QuadratureSpec;
use fracwell::stopping::{
    estimate_exit_mgf, estimate_hitting_laplace, exit_mgf_from_samples, exit_paths, McRun,
};

use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Suite {
    BrownianE2e,
    SamplerLaws,
    IdentityDecomposition,
    SigmaMass,
    TailAsymptotic,
    MgfExponent,
    MgfDivergence,
    HittingComparability,
    Spectral,
    ProfileContainment,
    Moments,
    Symmetry,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::BrownianE2e,
        Suite::SamplerLaws,
        Suite::IdentityDecomposition,
        Suite::SigmaMass,
        Suite::TailAsymptotic,
        Suite::MgfExponent,
        Suite::MgfDivergence,
        Suite::HittingComparability,
        Suite::Spectral,
        Suite::ProfileContainment,
        Suite::Moments,
        Suite::Symmetry,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::BrownianE2e => "brownian-e2e",
            Suite::SamplerLaws => "sampler-laws",
            Suite::IdentityDecomposition => "identity-decomposition",
            Suite::SigmaMass => "sigma-mass",
            Suite::TailAsymptotic => "tail-asymptotic",
            Suite::MgfExponent => "mgf-exponent",
            Suite::MgfDivergence => "mgf-divergence",
            Suite::HittingComparability => "hitting-comparability",
            Suite::Spectral => "spectral",
            Suite::ProfileContainment => "profile-containment",
            Suite::Moments => "moments",
            Suite::Symmetry => "symmetry",
        }
    }
}

/// Seed, substream count and path-budget multiplier shared by all suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub streams: usize,
    /// Multiplies every Monte-Carlo path count (1 = the documented budget).
    pub scale: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            streams: 8,
            scale: 1.0,
        }
    }
}

impl SuiteOptions {
    fn paths(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(16)
    }

    fn run(&self, n: usize, offset: u64) -> fracwell::Result<McRun> {
        McRun::new(self.paths(n), self.seed.wrapping_add(offset), self.streams)
    }
}

/// One checked quantity: passes when `lower ≤ value ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(label: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            label: label.into(),
            value,
            lower,
            upper,
            pass: lower <= value && value <= upper,
        }
    }

    pub fn flag(label: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::within(label, v, 1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["suite", "check", "value", "lower", "upper", "pass"]);
        for c in &self.checks {
            t.push(vec![
                Cell::Text(self.suite.name().into()),
                Cell::Text(c.label.clone()),
                Cell::Float(c.value),
                Cell::Float(c.lower),
                Cell::Float(c.upper),
                Cell::Bool(c.pass),
            ]);
        }
        t
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> fracwell::Result<SuiteReport> {
    let checks = match suite {
        Suite::BrownianE2e => brownian_e2e(opts)?,
        Suite::SamplerLaws => sampler_laws(opts)?,
        Suite::IdentityDecomposition => identity_decomposition()?,
        Suite::SigmaMass => sigma_mass()?,
        Suite::TailAsymptotic => tail_asymptotic()?,
        Suite::MgfExponent => mgf_exponent(opts)?,
        Suite::MgfDivergence => mgf_divergence(opts)?,
        Suite::HittingComparability => hitting_comparability(opts)?,
        Suite::Spectral => spectral()?,
        Suite::ProfileContainment => profile_containment()?,
        Suite::Moments => moments()?,
        Suite::Symmetry => symmetry(opts)?,
    };
    Ok(SuiteReport { suite, checks })
}

fn tolerance(stderr: f64, want: f64, rel: f64) -> f64 {
    (3.0 * stderr).max(rel * want.abs())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

const WELL_HALF_WIDTH: f64 = 16.0;
const WELL_NODES: usize = 2048;

fn cauchy_like(alpha: f64) -> fracwell::Result<ModelParams> {
    ModelParams::new(1, alpha, 0.0)
}

fn well_solve(p: &ModelParams, well: &WellSpec) -> fracwell::Result<(SpectralData, f64)> {
    let sd = spectral_solve_1d(p, &RadialPotential::from(*well), WELL_HALF_WIDTH, WELL_NODES)?;
    let la = sd.lambda_r(well.a)?;
    Ok((sd, la))
}

fn brownian_e2e(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let well = WellSpec::new(1.0, 5.0)?;
    let g = classical_groundstate_1d(well.a, well.v)?;
    let l0 = -g.lambda0;
    let la = PI * PI / (8.0 * well.a * well.a);
    let process = Process::Brownian { d: 1 };
    let cfg = StepConfig::new(1e-3, 50.0)?;
    let k = (2.0 * (well.v - l0)).sqrt();
    let mut checks = vec![Check::within("gap v-|lambda0| < lambda_a", well.v - l0, f64::NEG_INFINITY, la)];
    for (i, x) in [0.0, 0.5, 0.9, 1.5, 2.5].into_iter().enumerate() {
        let run = opts.run(200_000, i as u64)?;
        let (_, est) = fk_ratio(&process, &well, l0, &[x], &run, &cfg, la)?;
        let want = if x <= well.a {
            (k * x).cos() / (k * well.a).cos()
        } else {
            (-(2.0 * l0).sqrt() * (x - well.a)).exp()
        };
        let tol = tolerance(est.stderr, want, 0.02);
        checks.push(Check::within(format!("x={x}"), est.value, want - tol, want + tol));
    }
    Ok(checks)
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn sampler_laws(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let n = opts.paths(1_000_000);
    let mut checks = Vec::new();
    let mut rng = SeedSpec::new(opts.seed, 0).rng();
    let draws: Vec<f64> = (0..n)
        .map(|_| stable_subordinator_sample(0.5, 1.0, 1.0, &mut rng))
        .collect::<fracwell::Result<_>>()?;
    for w in [0.25, 1.0, 4.0] {
        let vals: Vec<f64> = draws.iter().map(|s| (-w * s).exp()).collect();
        let (m, se) = mean_stderr(&vals);
        let want = (-w.sqrt()).exp();
        checks.push(Check::within(
            format!("subordinator beta=0.5 w={w}"),
            m,
            want - 4.0 * se,
            want + 4.0 * se,
        ));
    }
    let mut stream = 1;
    for alpha in [0.5, 1.0, 1.5] {
        for m in [0.0, 1.0] {
            let p = ModelParams::new(1, alpha, m)?;
            let h = 1.0;
            let sampler = IncrementSampler::new(&Process::Levy(p), h)?;
            let mut rng = SeedSpec::new(opts.seed, stream).rng();
            stream += 1;
            let mut buf = [0.0];
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    sampler.fill(&mut rng, &mut buf);
                    buf[0]
                })
                .collect();
            for u in [0.3, 1.0, 2.0] {
                let vals: Vec<f64> = xs.iter().map(|x| (u * x).cos()).collect();
                let (mean, se) = mean_stderr(&vals);
                let want = (-h * p.characteristic_exponent(u)).exp();
                checks.push(Check::within(
                    format!("increment alpha={alpha} m={m} u={u}"),
                    mean,
                    want - 4.0 * se,
                    want + 4.0 * se,
                ));
            }
        }
    }
    Ok(checks)
}

fn parameter_grid() -> fracwell::Result<Vec<ModelParams>> {
    let mut out = Vec::new();
    for d in 1..=3 {
        for alpha in [0.5, 1.0, 1.5] {
            for m in [0.5, 1.0, 2.0] {
                out.push(ModelParams::new(d, alpha, m)?);
            }
        }
    }
    Ok(out)
}

fn identity_decomposition() -> fracwell::Result<Vec<Check>> {
    let q = QuadratureSpec::default();
    let grid = log_grid(0.05, 50.0, 200);
    let mut checks = Vec::new();
    for p in parameter_grid()? {
        let p0 = ModelParams::new(p.d, p.alpha, 0.0)?;
        let mut worst = 0.0f64;
        for &r in &grid {
            let diff = jump_density(&p0, r)? - jump_density(&p, r)? - sigma_density(&p, r, &q)?;
            worst = worst.max(diff.abs());
        }
        checks.push(Check::within(
            format!("d={} alpha={} m={} max|j0-jm-sigma|", p.d, p.alpha, p.m),
            worst,
            0.0,
            1e-8,
        ));
    }
    Ok(checks)
}

fn sigma_mass() -> fracwell::Result<Vec<Check>> {
    let q = QuadratureSpec::default();
    parameter_grid()?
        .into_iter()
        .map(|p| {
            let rel = total_sigma_mass(&p, &q)? / p.m - 1.0;
            Ok(Check::within(
                format!("d={} alpha={} m={} relative error", p.d, p.alpha, p.m),
                rel.abs(),
                0.0,
                1e-4,
            ))
        })
        .collect()
}

fn tail_asymptotic() -> fracwell::Result<Vec<Check>> {
    let q = QuadratureSpec::default();
    let p = ModelParams::new(1, 1.0, 1.0)?;
    let vals: Vec<f64> = log_grid(1e-3, 1e-2, 11)
        .into_iter()
        .map(|r| Ok(r.powf(p.alpha) * tail_mass(&p, r, &q)?))
        .collect::<fracwell::Result<_>>()?;
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(vec![Check::within("max/min - 1 of r^alpha tail", hi / lo - 1.0, 0.0, 0.05)])
}

fn mgf_exponent(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let p = cauchy_like(1.0)?;
    let q = QuadratureSpec::default();
    let lr = dirichlet_eigenvalue(&p, 1.0, 1.0 / 64.0, &q)?;
    let lambda = 0.5 * lr;
    let cfg = StepConfig::new(1e-3, 50.0)?;
    let xs = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut checks = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let run = opts.run(100_000, 100 + i as u64)?;
        let est = estimate_exit_mgf(&Process::Levy(p), 1.0, &[x], lambda, &run, &cfg, lr)?;
        checks.push(Check::flag(format!("x={x} finite"), !est.diverged && est.value > 1.0));
        lx.push((1.0 - x).ln());
        ly.push((est.value - 1.0).ln());
    }
    checks.push(Check::within("slope of log(E-1)", slope(&lx, &ly), 0.4, 0.6));
    Ok(checks)
}

fn mgf_divergence(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let p = cauchy_like(1.0)?;
    let q = QuadratureSpec::default();
    let lr = dirichlet_eigenvalue(&p, 1.0, 1.0 / 64.0, &q)?;
    let lambda = 1.1 * lr;
    let t_max = 10.0;
    let cfg = StepConfig::new(2e-3, t_max)?;
    let run = opts.run(200_000, 200)?;
    let samples = exit_paths(&Process::Levy(p), 1.0, &[0.0], &run, &cfg)?;
    let full = exit_mgf_from_samples(&samples, lambda, lr, t_max)?;
    let half = exit_mgf_from_samples(&samples, lambda, lr, 0.5 * t_max)?;
    Ok(vec![
        Check::flag("diverged flag", full.diverged),
        Check::within("partial sum growth on t_max doubling", full.value / half.value, 2.0, f64::INFINITY),
    ])
}

fn hitting_comparability(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let cfg = StepConfig::new(2e-3, 20.0)?;
    let lambda = 0.5;
    let mut checks = Vec::new();
    let mut offset = 300;
    for (m, alpha) in [0.0, 1.0].into_iter().flat_map(|m| [0.5, 1.0, 1.5].map(|a| (m, a))) {
        let p = ModelParams::new(1, alpha, m)?;
        let mut ratios = Vec::new();
        for x in [1.2, 2.0, 3.0, 5.0] {
            let run = opts.run(4_000, offset)?;
            offset += 1;
            let est = estimate_hitting_laplace(&Process::Levy(p), 1.0, &[x], lambda, &run, &cfg)?;
            ratios.push(est.value / jump_density(&p, x)?);
        }
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::within(format!("m={m} alpha={alpha} max/min"), hi / lo, 1.0, 10.0));
    }
    Ok(checks)
}

fn spectral() -> fracwell::Result<Vec<Check>> {
    let q = QuadratureSpec::default();
    let well = WellSpec::new(1.0, 5.0)?;
    let mut checks = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        let p = cauchy_like(alpha)?;
        let scaled: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&r| Ok(dirichlet_eigenvalue(&p, r, r / 64.0, &q)? * r.powf(alpha)))
            .collect::<fracwell::Result<_>>()?;
        let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::within(format!("alpha={alpha} lambda_R R^alpha spread"), hi / lo - 1.0, 0.0, 0.02));
        let mut l0 = Vec::new();
        for n in [256, 512, 1024, 2048] {
            let sd = spectral_solve_1d(&p, &RadialPotential::from(well), WELL_HALF_WIDTH, n)?;
            let la = sd.lambda_r(well.a)?;
            checks.push(Check::flag(
                format!("alpha={alpha} N={n} gap inequality"),
                gap_inequality_check(&well, -sd.lambda0, la),
            ));
            l0.push(sd.lambda0);
        }
        let diffs: Vec<f64> = l0.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for (i, w) in diffs.windows(2).enumerate() {
            checks.push(Check::within(
                format!("alpha={alpha} Cauchy ratio {}", i + 1),
                w[0] / w[1],
                2.0,
                f64::INFINITY,
            ));
        }
    }
    Ok(checks)
}

fn profile_containment() -> fracwell::Result<Vec<Check>> {
    let well = WellSpec::new(1.0, 5.0)?;
    let p = cauchy_like(1.0)?;
    let (sd, la) = well_solve(&p, &well)?;
    let meta = ProfileMeta::new(p, well, -sd.lambda0, la)?;
    let pa = sd.phi_at(well.a);
    let refs: Vec<(f64, f64)> = (0..=10)
        .map(|i| 0.1 * i as f64)
        .chain([0.95, 0.99, 1.01, 1.05, 1.1, 1.2, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0])
        .map(|r| (r, sd.phi_at(r) / pa))
        .collect();
    let band = ProfileBand::fit(meta, &refs, 1.1)?;
    let mut outside = 0usize;
    let mut total = 0usize;
    for (r, f) in sd.r.iter().zip(&sd.phi).filter(|(r, _)| **r <= 5.0 * well.a) {
        total += 1;
        if !band.contains(*r, f / pa)? {
            outside += 1;
        }
    }
    let mut checks = vec![Check::within(
        format!("grid radii outside band (of {total})"),
        outside as f64,
        0.0,
        0.0,
    )];
    for (alpha, lo, hi) in [(1.0, 0.4, 0.6), (1.5, 0.65, 0.85)] {
        let p = cauchy_like(alpha)?;
        let (sd, _) = well_solve(&p, &well)?;
        let table: Vec<(f64, f64)> = sd
            .r
            .iter()
            .cloned()
            .zip(sd.phi.iter().cloned())
            .filter(|(r, _)| *r >= well.a - 0.2 && *r < well.a)
            .collect();
        let s = boundary_exponent(&table, well.a, sd.phi_at(well.a), Side::Inside)?;
        checks.push(Check::within(format!("alpha={alpha} inside boundary exponent"), s, lo, hi));
    }
    Ok(checks)
}

fn moments() -> fracwell::Result<Vec<Check>> {
    let q = QuadratureSpec::default();
    let well = WellSpec::new(1.0, 5.0)?;
    let mut checks = Vec::new();
    let ps = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0];
    for (m, alpha) in [0.0, 1.0].into_iter().flat_map(|m| [0.5, 1.0, 1.5].map(|a| (m, a))) {
        {
            let p = ModelParams::new(1, alpha, m)?;
            let (sd, la) = well_solve(&p, &well)?;
            let band = ProfileBand::with_slack(ProfileMeta::new(p, well, -sd.lambda0, la)?, 2.0)?;
            let phi = Interval::point(sd.phi_at(well.a));
            let mut exact = true;
            for &pe in &ps {
                let b = moment_lambda_p(&band, &phi, pe, &q)?;
                exact &= b.diverged == (pe >= p_star(&p));
            }
            checks.push(Check::flag(format!("m={m} alpha={alpha} divergence flag pattern"), exact));
        }
    }
    let p = cauchy_like(1.0)?;
    let (sd, la) = well_solve(&p, &well)?;
    let l0 = -sd.lambda0;
    let phi = phi_at_a(&p, &well, l0, la, 1.0, &q)?;
    let b = moment_bounds(&p, &well, l0, la, &phi, 1.0, 0.5, 5.0, &q)?;
    checks.push(Check::within("Lambda_1 spectral within bounds", sd.moment(1.0), b.lower, b.upper));
    Ok(checks)
}

/// Principal Dirichlet eigenvalue of the unit disk for the Cauchy process.
pub const CAUCHY_DISK_EIGENVALUE: f64 = 2.006_1;

fn symmetry(opts: &SuiteOptions) -> fracwell::Result<Vec<Check>> {
    let p = ModelParams::new(2, 1.0, 0.0)?;
    let well = WellSpec::new(1.0, 5.0)?;
    let l0 = 4.0;
    let cfg = StepConfig::new(1e-3, 50.0)?;
    let run = opts.run(20_000, 400)?;
    let rep = check_radial_symmetry(
        &Process::Levy(p),
        &well,
        l0,
        0.5 * well.a,
        8,
        &run,
        &cfg,
        CAUCHY_DISK_EIGENVALUE,
    )?;
    let mut checks: Vec<Check> = rep
        .points
        .iter()
        .zip(&rep.estimates)
        .enumerate()
        .map(|(i, (_, e))| Check::within(format!("point {i} estimate"), e.value, 1.0, f64::INFINITY))
        .collect();
    checks.push(Check::within("max pairwise z", rep.max_z, 0.0, 3.0));
    Ok(checks)
}
