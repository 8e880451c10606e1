//! Feynman-Kac reconstruction of the ground state of a well, closed-form
//! profile bands, normalization at the well edge, moments, boundary exponents,
//! symmetry checks and level-set bounds for decaying radial potentials.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, numerical, Error, Result};
use crate::levy::{jump_density_with, ln_massless_constant, Interval, ModelParams};
use crate::potential::{RadialPotential, WellSpec};
use crate::sampler::{norm, Process, Region, StepConfig, StoppedSample, Walker};
use crate::specfun::{beta_fn, integrate, integrate_to_infinity, unit_ball_volume, QuadratureSpec};
use crate::stopping::{
    estimate_exit_mgf, estimate_hitting_laplace, exit_mgf_from_samples, hitting_laplace_from_samples,
    laplace_horizon, Estimate, McRun,
};

fn hypothesis(msg: impl Into<String>) -> Error {
    Error::Hypothesis(msg.into())
}

/// `v − |λ₀| < λ_a`.
pub fn gap_inequality_check(well: &WellSpec, lambda0_abs: f64, lambda_a: f64) -> bool {
    well.v - lambda0_abs < lambda_a
}

fn check_lambda0(well: &WellSpec, lambda0_abs: f64) -> Result<()> {
    if !(lambda0_abs > 0.0 && lambda0_abs <= well.v) {
        return Err(domain(format!(
            "|lambda0| must lie in (0, v] = (0, {}], got {lambda0_abs}",
            well.v
        )));
    }
    Ok(())
}

/// Which side of the well boundary a point lies on. `|x| = a` is inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Inside,
    Outside,
}

impl Branch {
    pub fn of(r: f64, a: f64) -> Self {
        if r <= a {
            Branch::Inside
        } else {
            Branch::Outside
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Branch::Inside => "inside",
            Branch::Outside => "outside",
        }
    }
}

/// `E^x[e^{(v−|λ₀|)τ_a}]`, the ratio `φ₀(x)/φ₀(𝐚)` inside the well up to comparability.
pub fn fk_ratio_inside(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
    lambda_a_hat: f64,
) -> Result<Estimate> {
    check_lambda0(well, lambda0_abs)?;
    let exponent = well.v - lambda0_abs;
    if exponent >= lambda_a_hat {
        return Err(hypothesis(format!(
            "v - |lambda0| = {exponent} must stay below lambda_a = {lambda_a_hat}"
        )));
    }
    let r = norm(x);
    if r > well.a {
        return Err(domain(format!("|x| = {r} lies outside the well of radius {}", well.a)));
    }
    if r == well.a {
        return Ok(Estimate::exact(1.0, run.n));
    }
    estimate_exit_mgf(process, well.a, x, exponent, run, cfg, lambda_a_hat)
}

/// `E^x[e^{−|λ₀|T_a}]` outside the well.
pub fn fk_ratio_outside(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
) -> Result<Estimate> {
    if !(lambda0_abs > 0.0) {
        return Err(domain(format!("|lambda0| must be positive, got {lambda0_abs}")));
    }
    let r = norm(x);
    if r < well.a {
        return Err(domain(format!("|x| = {r} lies inside the well of radius {}", well.a)));
    }
    estimate_hitting_laplace(process, well.a, x, lambda0_abs, run, cfg)
}

/// Dispatch on the branch of `x`.
pub fn fk_ratio(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
    lambda_a_hat: f64,
) -> Result<(Branch, Estimate)> {
    match Branch::of(norm(x), well.a) {
        Branch::Inside => {
            fk_ratio_inside(process, well, lambda0_abs, x, run, cfg, lambda_a_hat).map(|e| (Branch::Inside, e))
        }
        Branch::Outside => {
            fk_ratio_outside(process, well, lambda0_abs, x, run, cfg).map(|e| (Branch::Outside, e))
        }
    }
}

/// Parameters of the closed-form profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub params: ModelParams,
    pub well: WellSpec,
    pub lambda0_abs: f64,
    pub lambda_a: f64,
}

impl ProfileMeta {
    pub fn new(params: ModelParams, well: WellSpec, lambda0_abs: f64, lambda_a: f64) -> Result<Self> {
        check_lambda0(&well, lambda0_abs)?;
        if !gap_inequality_check(&well, lambda0_abs, lambda_a) {
            return Err(domain(format!(
                "lambda_a = {lambda_a} must exceed v - |lambda0| = {}",
                well.v - lambda0_abs
            )));
        }
        Ok(Self {
            params,
            well,
            lambda0_abs,
            lambda_a,
        })
    }

    /// `κ = (v−|λ₀|)/(λ_a−v+|λ₀|)`.
    pub fn kappa(&self) -> f64 {
        let e = self.well.v - self.lambda0_abs;
        e / (self.lambda_a - e)
    }

    /// `λ_a/(λ_a−v+|λ₀|) = 1 + κ`.
    pub fn gap_factor(&self) -> f64 {
        self.lambda_a / (self.lambda_a - self.well.v + self.lambda0_abs)
    }
}

/// `1 + κ((a−r)/a)^{α/2}` for `r ≤ a`.
pub fn profile_inside(meta: &ProfileMeta, r: f64) -> Result<f64> {
    let a = meta.well.a;
    if !(r >= 0.0 && r <= a) {
        return Err(domain(format!("inside profile needs 0 <= r <= a, got {r}")));
    }
    Ok(1.0 + meta.kappa() * ((a - r) / a).powf(0.5 * meta.params.alpha))
}

/// `j_{m,α}(r)` for `r ≥ a`.
pub fn profile_outside(meta: &ProfileMeta, r: f64) -> Result<f64> {
    if !(r >= meta.well.a) {
        return Err(domain(format!("outside profile needs r >= a, got {r}")));
    }
    jump_density_with(&meta.params, r, &QuadratureSpec::default())
}

/// Continuous shape `r ↦ φ₀(r)/φ₀(𝐚)` implied by the profile: the inside
/// formula up to `a`, then `j(r)/j(a)`.
pub fn profile_shape(meta: &ProfileMeta, r: f64) -> Result<f64> {
    let r = r.abs();
    if r <= meta.well.a {
        profile_inside(meta, r)
    } else {
        Ok(profile_outside(meta, r)? / profile_outside(meta, meta.well.a)?)
    }
}

/// Envelope `e^{c ± w}·shape(r)` around the profile shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileBand {
    pub meta: ProfileMeta,
    /// Fitted log-constant `c`.
    pub log_center: f64,
    /// Log half-width `w ≥ 0`.
    pub log_half_width: f64,
}

impl ProfileBand {
    /// Band `[shape/slack, shape·slack]` with no fitted constant.
    pub fn with_slack(meta: ProfileMeta, slack: f64) -> Result<Self> {
        if !(slack >= 1.0) {
            return Err(domain(format!("slack must be >= 1, got {slack}")));
        }
        Ok(Self {
            meta,
            log_center: 0.0,
            log_half_width: slack.ln(),
        })
    }

    /// Fit the constant once on reference samples `(r, φ₀(r)/φ₀(𝐚))`.
    ///
    /// The center is the mean log residual; the half-width is the largest
    /// absolute deviation times `inflate`.
    pub fn fit(meta: ProfileMeta, samples: &[(f64, f64)], inflate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(domain("band fit needs at least one sample"));
        }
        if !(inflate >= 1.0) {
            return Err(domain(format!("inflation must be >= 1, got {inflate}")));
        }
        let mut res = Vec::with_capacity(samples.len());
        for &(r, y) in samples {
            if !(y > 0.0) {
                return Err(domain(format!("band fit needs positive values, got {y} at r = {r}")));
            }
            res.push(y.ln() - profile_shape(&meta, r)?.ln());
        }
        let c = res.iter().sum::<f64>() / res.len() as f64;
        let dev = res.iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
        Ok(Self {
            meta,
            log_center: c,
            log_half_width: dev * inflate,
        })
    }

    pub fn lower(&self, r: f64) -> Result<f64> {
        Ok((self.log_center - self.log_half_width).exp() * profile_shape(&self.meta, r)?)
    }

    pub fn upper(&self, r: f64) -> Result<f64> {
        Ok((self.log_center + self.log_half_width).exp() * profile_shape(&self.meta, r)?)
    }

    pub fn contains(&self, r: f64, y: f64) -> Result<bool> {
        Ok(self.lower(r)? <= y && y <= self.upper(r)?)
    }
}

/// `∫₁^∞ s^{d−1} j²(as) ds`.
fn outer_square_integral(p: &ModelParams, a: f64, q: &QuadratureSpec) -> Result<f64> {
    let d = p.d as f64;
    if p.is_massless() {
        let ln_a = ln_massless_constant(p);
        return Ok((2.0 * ln_a - 2.0 * (d + p.alpha) * a.ln()).exp() / (d + 2.0 * p.alpha));
    }
    let f = |s: f64| {
        let j = jump_density_with(p, a * s, q).unwrap_or(f64::NAN);
        s.powf(d - 1.0) * j * j
    };
    let v = integrate_to_infinity(f, 1.0, q)?;
    if !v.is_finite() {
        return Err(numerical("outer square integral did not converge"));
    }
    Ok(v)
}

/// Normalization band for `φ₀(𝐚)`:
/// `(a^d d ω_d (1/d + 2κB(d,1+α/2) + κ²B(d,1+α) + 𝓘))^{−1/2}`, widened by `slack`.
pub fn phi_at_a(
    p: &ModelParams,
    well: &WellSpec,
    lambda0_abs: f64,
    lambda_a: f64,
    slack: f64,
    q: &QuadratureSpec,
) -> Result<Interval> {
    let meta = ProfileMeta::new(*p, *well, lambda0_abs, lambda_a)?;
    if !(slack >= 1.0) {
        return Err(domain(format!("slack must be >= 1, got {slack}")));
    }
    let d = p.d as f64;
    let k = meta.kappa();
    let inner = 1.0 / d
        + 2.0 * k * beta_fn(d, 1.0 + 0.5 * p.alpha)?
        + k * k * beta_fn(d, 1.0 + p.alpha)?;
    let outer = outer_square_integral(p, well.a, q)?;
    let mass = well.a.powf(d) * d * unit_ball_volume(p.d) * (inner + outer);
    let central = mass.powf(-0.5);
    Interval::new(central / slack, central * slack)
}

/// `p_*`: `d + 2α` for `m = 0`, `+∞` for `m > 0`.
pub fn p_star(p: &ModelParams) -> f64 {
    if p.is_massless() {
        p.d as f64 + 2.0 * p.alpha
    } else {
        f64::INFINITY
    }
}

/// A `Λ_p` band; both ends are `+∞` when `diverged`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBand {
    pub p_exp: f64,
    pub lower: f64,
    pub upper: f64,
    pub diverged: bool,
}

impl MomentBand {
    fn divergent(p_exp: f64) -> Self {
        Self {
            p_exp,
            lower: f64::INFINITY,
            upper: f64::INFINITY,
            diverged: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `d ω_d ∫₀^L r^{d−1+p} shape(r)² dr` for the unscaled profile shape.
pub fn truncated_moment_integral(meta: &ProfileMeta, p_exp: f64, cutoff: f64, q: &QuadratureSpec) -> Result<f64> {
    let d = meta.params.d as f64;
    let a = meta.well.a;
    let sphere = d * unit_ball_volume(meta.params.d);
    let inner = integrate(
        |r| r.powf(d - 1.0 + p_exp) * profile_inside(meta, r).unwrap_or(f64::NAN).powi(2),
        0.0,
        a.min(cutoff),
        q,
    )?;
    if cutoff <= a {
        return Ok(sphere * inner);
    }
    let ja = profile_outside(meta, a)?;
    let g = |r: f64| {
        let s = jump_density_with(&meta.params, r, q).unwrap_or(f64::NAN) / ja;
        r.powf(d - 1.0 + p_exp) * s * s
    };
    // Geometric panels keep the power-law tail well resolved.
    let mut outer = 0.0;
    let mut lo = a;
    while lo < cutoff {
        let hi = (2.0 * lo).min(cutoff);
        outer += integrate(g, lo, hi, q)?;
        lo = hi;
    }
    Ok(sphere * (inner + outer))
}

/// `Λ_p = (∫|x|^p φ₀²)^{1/p}` over the band `φ₀ ∈ φ₀(𝐚)·[lower, upper]`.
pub fn moment_lambda_p(band: &ProfileBand, phi_a: &Interval, p_exp: f64, q: &QuadratureSpec) -> Result<MomentBand> {
    if !(p_exp > 0.0) {
        return Err(domain(format!("moment order must be positive, got {p_exp}")));
    }
    let meta = &band.meta;
    if p_exp >= p_star(&meta.params) {
        return Ok(MomentBand::divergent(p_exp));
    }
    let d = meta.params.d as f64;
    let a = meta.well.a;
    let sphere = d * unit_ball_volume(meta.params.d);
    let inner = integrate(
        |r| r.powf(d - 1.0 + p_exp) * profile_inside(meta, r).unwrap_or(f64::NAN).powi(2),
        0.0,
        a,
        q,
    )?;
    let ja = profile_outside(meta, a)?;
    let outer = if meta.params.is_massless() {
        // j = A r^{−d−α}: closed-form tail.
        a.powf(d + p_exp) / (d + 2.0 * meta.params.alpha - p_exp)
    } else {
        let g = |r: f64| {
            let s = jump_density_with(&meta.params, r, q).unwrap_or(f64::NAN) / ja;
            r.powf(d - 1.0 + p_exp) * s * s
        };
        integrate_to_infinity(g, a, q)?
    };
    let base = sphere * (inner + outer);
    let lo = phi_a.lo.powi(2) * (2.0 * (band.log_center - band.log_half_width)).exp() * base;
    let hi = phi_a.hi.powi(2) * (2.0 * (band.log_center + band.log_half_width)).exp() * base;
    Ok(MomentBand {
        p_exp,
        lower: lo.powf(1.0 / p_exp),
        upper: hi.powf(1.0 / p_exp),
        diverged: false,
    })
}

/// Two-sided `Λ_p` bounds from the explicit factors:
/// lower `φ₀(𝐚)^{2/p} G^{2/p} (∫_{B_a}|x|^p((a−|x|)/a)^α)^{1/p} / slack`,
/// upper `slack · φ₀(𝐚)^{2/p} G^{2/p} (∫_{B_a}|x|^p + ∫_{B_a^c}|x|^p j²)^{1/p}`,
/// with `G = λ_a/(λ_a−v+|λ₀|)`.
#[allow(clippy::too_many_arguments)]
pub fn moment_bounds(
    p: &ModelParams,
    well: &WellSpec,
    lambda0_abs: f64,
    lambda_a: f64,
    phi_a: &Interval,
    p_exp: f64,
    delta: f64,
    slack: f64,
    q: &QuadratureSpec,
) -> Result<MomentBand> {
    if !(p_exp > 0.0) {
        return Err(domain(format!("moment order must be positive, got {p_exp}")));
    }
    if !(delta > 0.0) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    if !(slack >= 1.0) {
        return Err(domain(format!("slack must be >= 1, got {slack}")));
    }
    let meta = ProfileMeta::new(*p, *well, lambda0_abs, lambda_a)
        .map_err(|_| domain("v - |lambda0| < lambda_a fails"))?;
    if !(well.v > lambda_a + delta) {
        return Err(domain(format!(
            "v > lambda_a + delta fails: {} <= {}",
            well.v,
            lambda_a + delta
        )));
    }
    if p_exp >= p_star(p) {
        return Ok(MomentBand::divergent(p_exp));
    }
    let d = p.d as f64;
    let a = well.a;
    let sphere = d * unit_ball_volume(p.d);
    let lower_int = sphere
        * integrate(
            |r| r.powf(d - 1.0 + p_exp) * ((a - r) / a).powf(p.alpha),
            0.0,
            a,
            q,
        )?;
    let ball = sphere * a.powf(d + p_exp) / (d + p_exp);
    let tail = if p.is_massless() {
        let ln_c = ln_massless_constant(p);
        sphere * (2.0 * ln_c).exp() * a.powf(p_exp - d - 2.0 * p.alpha) / (d + 2.0 * p.alpha - p_exp)
    } else {
        sphere
            * integrate_to_infinity(
                |r| r.powf(d - 1.0 + p_exp) * jump_density_with(p, r, q).unwrap_or(f64::NAN).powi(2),
                a,
                q,
            )?
    };
    let common = |phi: f64| (phi * phi * meta.gap_factor().powi(2)).powf(1.0 / p_exp);
    Ok(MomentBand {
        p_exp,
        lower: common(phi_a.lo) * lower_int.powf(1.0 / p_exp) / slack,
        upper: common(phi_a.hi) * (ball + tail).powf(1.0 / p_exp) * slack,
        diverged: false,
    })
}

/// Side of `a` used by [`boundary_exponent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Inside,
    Outside,
}

/// Least-squares slope of `ln|φ/φ(a) − 1|` against `ln||r| − a|` over the
/// samples `(r, φ(r))` on the requested side of `a`.
pub fn boundary_exponent(samples: &[(f64, f64)], a: f64, phi_a: f64, side: Side) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, _)| match side {
            Side::Inside => *r < a,
            Side::Outside => *r > a,
        })
        .map(|&(r, y)| ((r - a).abs().ln(), (y / phi_a - 1.0).abs().ln()))
        .collect();
    if pts.len() < 8 {
        return Err(domain(format!("boundary fit needs >= 8 points on the side, got {}", pts.len())));
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(numerical("degenerate boundary table: profile equals its boundary value"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(numerical("degenerate boundary table: radii coincide"));
    }
    Ok(sxy / sxx)
}

/// Estimates at a set of symmetric points and their largest pairwise z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub points: Vec<Vec<f64>>,
    pub estimates: Vec<Estimate>,
    pub max_z: f64,
    pub passed: bool,
}

impl SymmetryReport {
    fn from(points: Vec<Vec<f64>>, estimates: Vec<Estimate>) -> Self {
        let mut max_z = 0.0f64;
        for i in 0..estimates.len() {
            for j in i + 1..estimates.len() {
                max_z = max_z.max(estimates[i].z_score(&estimates[j]));
            }
        }
        Self {
            points,
            estimates,
            max_z,
            passed: max_z < 3.0,
        }
    }
}

fn symmetry_estimates(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    points: &[Vec<f64>],
    run: &McRun,
    cfg: &StepConfig,
    lambda_a_hat: f64,
) -> Result<Vec<Estimate>> {
    points
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let run = run.with_seed(run.seed.wrapping_add(j as u64));
            fk_ratio(process, well, lambda0_abs, x, &run, cfg, lambda_a_hat).map(|(_, e)| e)
        })
        .collect()
}

/// FK estimates at `k` equally rotated points of the circle of the given
/// radius in the first coordinate plane, each on its own seed.
#[allow(clippy::too_many_arguments)]
pub fn check_radial_symmetry(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    radius: f64,
    k_points: usize,
    run: &McRun,
    cfg: &StepConfig,
    lambda_a_hat: f64,
) -> Result<SymmetryReport> {
    let d = process.dim() as usize;
    if d < 2 {
        return Err(domain("radial symmetry check needs d >= 2"));
    }
    if !(radius >= 0.0) {
        return Err(domain(format!("radius must be non-negative, got {radius}")));
    }
    if k_points < 2 {
        return Ok(SymmetryReport::from(vec![], vec![]));
    }
    let points: Vec<Vec<f64>> = (0..k_points)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / k_points as f64;
            let mut x = vec![0.0; d];
            x[0] = radius * th.cos();
            x[1] = radius * th.sin();
            x
        })
        .collect();
    let est = symmetry_estimates(process, well, lambda0_abs, &points, run, cfg, lambda_a_hat)?;
    Ok(SymmetryReport::from(points, est))
}

/// FK estimates at `x` and its mirror image in the first coordinate.
pub fn check_reflection_symmetry(
    process: &Process,
    well: &WellSpec,
    lambda0_abs: f64,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
    lambda_a_hat: f64,
) -> Result<SymmetryReport> {
    if x.len() != process.dim() as usize {
        return Err(domain("point dimension does not match the process"));
    }
    let mut y = x.to_vec();
    y[0] = -y[0];
    let points = vec![x.to_vec(), y];
    let est = symmetry_estimates(process, well, lambda0_abs, &points, run, cfg, lambda_a_hat)?;
    Ok(SymmetryReport::from(points, est))
}

/// `r_γ = sup{r : v(r) > γ}`.
pub fn level_set_radius(pot: &RadialPotential, gamma: f64) -> Result<f64> {
    let peak = pot.peak();
    if !(gamma > 0.0 && gamma < peak) {
        return Err(domain(format!("gamma must lie in (0, v(0)) = (0, {peak}), got {gamma}")));
    }
    if let RadialPotential::Indicator(w) = pot {
        return Ok(w.a);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while pot.eval(hi) > gamma {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(numerical("level set is unbounded"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pot.eval(mid) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Levels of the decaying-potential bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLevels {
    /// Level for points inside `K_γ`.
    pub gamma: f64,
    /// Outer level, `γ₁ ≤ |λ₀|`.
    pub gamma1: f64,
    /// Reference level, `γ₂ ∈ (γ₀, v(0))`.
    pub gamma2: f64,
}

/// Level-set bounds at one point, each relative to `φ₀` on the level sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayingReport {
    pub branch: Branch,
    /// `r_γ` (inside) or `r_{γ₁}` (outside).
    pub r_level: f64,
    /// Inside: `E[e^{(γ−|λ₀|)τ}]`; outside: `E[e^{−|λ₀|T}]`.
    pub lower: Estimate,
    /// Inside: `E[e^{(v(0)−|λ₀|)τ}]`; outside: `E[e^{(γ₁−|λ₀|)T}]`.
    pub upper: Estimate,
    /// Inside only: full FK weight `E[e^{∫v(|X_s|)ds − |λ₀|τ}]`.
    pub full: Option<Estimate>,
    /// Multiplier of `upper`: 1 inside, `1 + (v(0)−|λ₀|)/(λ_{r_{γ₂}}−v(0)+|λ₀|)` outside.
    pub upper_factor: f64,
    /// `r_{γ₂}` for the outside branch.
    pub r_reference: Option<f64>,
}

fn full_weight(samples: &[StoppedSample], lambda0_abs: f64) -> Estimate {
    let w: Vec<f64> = samples
        .iter()
        .map(|s| (s.potential_integral - lambda0_abs * s.tau_hat).exp())
        .collect();
    let truncated = samples.iter().filter(|s| s.truncated).count();
    Estimate::from_weights(&w, truncated)
}

/// Level-set bounds for `V = −v(|x|)`.
///
/// `lambda_hat` maps a radius `R` to `λ̂_R`. Inside `K_γ` the three exit
/// functionals share one set of paths; outside `K_{γ₁}` two hitting transforms
/// are estimated on a common seed.
#[allow(clippy::too_many_arguments)]
pub fn decaying_bounds(
    process: &Process,
    pot: &RadialPotential,
    lambda0_abs: f64,
    levels: &DecayLevels,
    x: &[f64],
    run: &McRun,
    cfg: &StepConfig,
    lambda_hat: &dyn Fn(f64) -> Result<f64>,
) -> Result<DecayingReport> {
    let v0 = pot.peak();
    if !(lambda0_abs > 0.0 && lambda0_abs < v0) {
        return Err(domain(format!("|lambda0| must lie in (0, v(0)), got {lambda0_abs}")));
    }
    let r = norm(x);
    let r_gamma = level_set_radius(pot, levels.gamma)?;
    if r < r_gamma {
        let lam = lambda_hat(r_gamma)?;
        if v0 - lambda0_abs >= lam {
            return Err(hypothesis(format!(
                "v(0) - |lambda0| = {} must stay below lambda_r_gamma = {lam}",
                v0 - lambda0_abs
            )));
        }
        let pot_fn = pot.clone();
        let vfn: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |s| pot_fn.eval(s));
        let walker = Walker::new(*process, Region::ExitLevelSet(r_gamma), *cfg)?.with_potential(vfn);
        let samples = walker.simulate(x, run.n, run.seed, run.streams)?;
        let lower_rate = levels.gamma - lambda0_abs;
        let lower = if lower_rate >= 0.0 {
            exit_mgf_from_samples(&samples, lower_rate, lam, cfg.t_max)?
        } else {
            let w: Vec<f64> = samples.iter().map(|s| (lower_rate * s.tau_hat).exp()).collect();
            Estimate::from_weights(&w, samples.iter().filter(|s| s.truncated).count())
        };
        let upper = exit_mgf_from_samples(&samples, v0 - lambda0_abs, lam, cfg.t_max)?;
        return Ok(DecayingReport {
            branch: Branch::Inside,
            r_level: r_gamma,
            lower,
            upper,
            full: Some(full_weight(&samples, lambda0_abs)),
            upper_factor: 1.0,
            r_reference: None,
        });
    }
    if levels.gamma1 > lambda0_abs {
        return Err(hypothesis(format!(
            "gamma1 = {} must not exceed |lambda0| = {lambda0_abs}",
            levels.gamma1
        )));
    }
    if levels.gamma1 > levels.gamma2 {
        return Err(hypothesis("gamma1 <= gamma2 fails"));
    }
    let r1 = level_set_radius(pot, levels.gamma1)?;
    let r2 = level_set_radius(pot, levels.gamma2)?;
    let lam2 = lambda_hat(r2)?;
    if v0 - lambda0_abs >= lam2 {
        return Err(hypothesis(format!(
            "gamma2 = {} is not above gamma0: v(0) - |lambda0| = {} >= lambda_r_gamma2 = {lam2}",
            levels.gamma2,
            v0 - lambda0_abs
        )));
    }
    if r < r1 {
        return Err(domain(format!(
            "|x| = {r} lies strictly between r_gamma = {r_gamma} and r_gamma1 = {r1}"
        )));
    }
    let horizon = cfg.t_max.min(laplace_horizon(lambda0_abs)).max(cfg.h);
    let hcfg = cfg.with_t_max(horizon)?;
    let walker = Walker::new(*process, Region::HitBall(r1), hcfg)?;
    let samples = walker.simulate(x, run.n, run.seed, run.streams)?;
    let lower = hitting_laplace_from_samples(&samples, lambda0_abs, horizon);
    let upper = hitting_laplace_from_samples(&samples, lambda0_abs - levels.gamma1, horizon);
    Ok(DecayingReport {
        branch: Branch::Outside,
        r_level: r1,
        lower,
        upper,
        full: None,
        upper_factor: 1.0 + (v0 - lambda0_abs) / (lam2 - v0 + lambda0_abs),
        r_reference: Some(r2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::classical_groundstate_1d;
    use std::f64::consts::PI;

    fn cauchy() -> ModelParams {
        ModelParams::new(1, 1.0, 0.0).unwrap()
    }

    fn brownian_setup() -> (Process, WellSpec, f64, f64) {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let g = classical_groundstate_1d(1.0, 5.0).unwrap();
        (Process::Brownian { d: 1 }, well, -g.lambda0, PI * PI / 8.0)
    }

    #[test]
    fn boundary_point_is_exactly_one() {
        let (pr, well, l0, la) = brownian_setup();
        let run = McRun::new(100, 1, 1).unwrap();
        let cfg = StepConfig::new(1e-3, 10.0).unwrap();
        let e = fk_ratio_inside(&pr, &well, l0, &[1.0], &run, &cfg, la).unwrap();
        assert_eq!((e.value, e.stderr), (1.0, 0.0));
        let (b, e) = fk_ratio(&pr, &well, l0, &[-1.0], &run, &cfg, la).unwrap();
        assert_eq!(b, Branch::Inside);
        assert_eq!(e.value, 1.0);
        let o = fk_ratio_outside(&pr, &well, l0, &[1.0], &run, &cfg).unwrap();
        assert_eq!(o.value, 1.0);
    }

    #[test]
    fn brownian_inside_and_outside_match_closed_forms() {
        let (pr, well, l0, la) = brownian_setup();
        let run = McRun::new(20_000, 7, 4).unwrap();
        let cfg = StepConfig::new(1e-3, 50.0).unwrap();
        let k = (2.0 * (well.v - l0)).sqrt();
        let want = (k * 0.5).cos() / k.cos();
        let e = fk_ratio_inside(&pr, &well, l0, &[0.5], &run, &cfg, la).unwrap();
        assert!((e.value - want).abs() < (3.0 * e.stderr).max(0.02 * want), "{e:?} vs {want}");
        let want = (-(2.0 * l0).sqrt()).exp();
        let o = fk_ratio_outside(&pr, &well, l0, &[2.0], &run, &cfg).unwrap();
        assert!((o.value - want).abs() < (3.0 * o.stderr).max(0.02 * want), "{o:?} vs {want}");
    }

    #[test]
    fn inside_ratio_decreases_towards_the_edge() {
        let (pr, well, l0, la) = brownian_setup();
        let run = McRun::new(5_000, 3, 2).unwrap();
        let cfg = StepConfig::new(1e-3, 50.0).unwrap();
        let e0 = fk_ratio_inside(&pr, &well, l0, &[0.0], &run, &cfg, la).unwrap();
        let e8 = fk_ratio_inside(&pr, &well, l0, &[0.8], &run.with_seed(4), &cfg, la).unwrap();
        assert!(e0.value >= e8.value - 3.0 * e0.stderr.hypot(e8.stderr));
    }

    #[test]
    fn inside_ratio_rejects_supercritical_exponent() {
        let (pr, well, l0, _) = brownian_setup();
        let run = McRun::new(10, 1, 1).unwrap();
        let cfg = StepConfig::new(1e-3, 1.0).unwrap();
        let err = fk_ratio_inside(&pr, &well, l0, &[0.0], &run, &cfg, well.v - l0).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        assert!(fk_ratio_inside(&pr, &well, l0, &[1.5], &run, &cfg, 10.0).is_err());
    }

    #[test]
    fn profile_identities() {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let meta = ProfileMeta::new(cauchy(), well, 4.0, 1.2).unwrap();
        assert_eq!(profile_inside(&meta, 1.0).unwrap(), 1.0);
        let g = meta.lambda_a / (meta.lambda_a - well.v + meta.lambda0_abs);
        assert!((profile_inside(&meta, 0.0).unwrap() - g).abs() < 1e-14);
        assert_eq!(
            profile_outside(&meta, 2.0).unwrap(),
            crate::levy::jump_density(&cauchy(), 2.0).unwrap()
        );
        assert!((profile_shape(&meta, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(ProfileMeta::new(cauchy(), well, 4.0, 1.0).is_err());
        assert!(profile_inside(&meta, 1.5).is_err());
    }

    #[test]
    fn band_fit_contains_its_reference_points() {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let meta = ProfileMeta::new(cauchy(), well, 4.0, 1.2).unwrap();
        let refs: Vec<(f64, f64)> = [0.0, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, 0.3 * profile_shape(&meta, r).unwrap() * (1.0 + 0.1 * i as f64)))
            .collect();
        let band = ProfileBand::fit(meta, &refs, 1.1).unwrap();
        for &(r, y) in &refs {
            assert!(band.contains(r, y).unwrap());
            assert!(band.lower(r).unwrap() <= band.upper(r).unwrap());
        }
        assert!(!band.contains(0.5, 10.0).unwrap());
    }

    #[test]
    fn phi_at_a_degenerate_kappa() {
        let p = cauchy();
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let q = QuadratureSpec::default();
        let band = phi_at_a(&p, &well, 5.0, 1.2, 2.0, &q).unwrap();
        let a = crate::levy::jump_density(&p, 1.0).unwrap();
        let central = (2.0 * (1.0 + a * a / 3.0)).powf(-0.5);
        assert!((band.lo * 2.0 - central).abs() < 1e-12);
        assert!((band.hi / 2.0 - central).abs() < 1e-12);
        assert!((beta_fn(1.0, 1.5).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn massive_outer_integral_is_below_massless() {
        let q = QuadratureSpec::default();
        let m0 = outer_square_integral(&cauchy(), 1.0, &q).unwrap();
        let m1 = outer_square_integral(&ModelParams::new(1, 1.0, 1.0).unwrap(), 1.0, &q).unwrap();
        assert!(m1 > 0.0 && m1 < m0);
    }

    #[test]
    fn p_star_values() {
        assert_eq!(p_star(&ModelParams::new(1, 0.75, 0.0).unwrap()), 2.5);
        assert_eq!(p_star(&ModelParams::new(3, 1.0, 2.0).unwrap()), f64::INFINITY);
    }

    #[test]
    fn moment_bounds_scale_with_gap_factor() {
        let p = cauchy();
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let q = QuadratureSpec::default();
        let phi = Interval::new(0.2, 0.3).unwrap();
        // λ_a = 2: gap factor 1 at |λ₀| = 5, 2 at |λ₀| = 4.
        let b1 = moment_bounds(&p, &well, 5.0, 2.0, &phi, 1.5, 0.5, 1.0, &q).unwrap();
        let b2 = moment_bounds(&p, &well, 4.0, 2.0, &phi, 1.5, 0.5, 1.0, &q).unwrap();
        let f = 2f64.powf(2.0 / 1.5);
        assert!((b2.lower / b1.lower - f).abs() < 1e-12);
        assert!((b2.upper / b1.upper - f).abs() < 1e-12);
        assert!(b1.lower < b1.upper);
    }

    #[test]
    fn moment_bounds_hypotheses() {
        let p = cauchy();
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let q = QuadratureSpec::default();
        let phi = Interval::point(0.3);
        let e = moment_bounds(&p, &well, 4.0, 4.8, &phi, 1.0, 0.5, 1.0, &q).unwrap_err();
        assert!(e.to_string().contains("v > lambda_a + delta"));
        let e = moment_bounds(&p, &well, 1.0, 2.0, &phi, 1.0, 0.5, 1.0, &q).unwrap_err();
        assert!(e.to_string().contains("lambda_a"));
        let d = moment_bounds(&p, &well, 4.0, 2.0, &phi, 3.0, 0.5, 1.0, &q).unwrap();
        assert!(d.diverged && d.upper.is_infinite());
    }

    #[test]
    fn moment_band_divergence_flag() {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let q = QuadratureSpec::default();
        let band = ProfileBand::with_slack(ProfileMeta::new(cauchy(), well, 4.0, 1.2).unwrap(), 2.0).unwrap();
        let phi = Interval::point(0.3);
        assert!(moment_lambda_p(&band, &phi, 3.0, &q).unwrap().diverged);
        let b = moment_lambda_p(&band, &phi, 2.9, &q).unwrap();
        assert!(!b.diverged && b.lower < b.upper && b.upper.is_finite());
        let massive = ModelParams::new(1, 1.0, 1.0).unwrap();
        let band = ProfileBand::with_slack(ProfileMeta::new(massive, well, 4.0, 1.2).unwrap(), 2.0).unwrap();
        assert!(!moment_lambda_p(&band, &phi, 6.0, &q).unwrap().diverged);
    }

    #[test]
    fn critical_truncated_moment_grows_logarithmically() {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let meta = ProfileMeta::new(cauchy(), well, 4.0, 1.2).unwrap();
        let q = QuadratureSpec::default();
        let v: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&l| truncated_moment_integral(&meta, 3.0, l, &q).unwrap())
            .collect();
        // Tail integrand 2/r: each decade adds 2 ln 10.
        for w in v.windows(2) {
            assert!((w[1] - w[0] - 2.0 * 10f64.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_exponent_of_power_law() {
        let t: Vec<(f64, f64)> = (1..=12).map(|i| 1.0 - 0.015 * i as f64).map(|r| (r, 1.0 + (1.0 - r).sqrt())).collect();
        let s = boundary_exponent(&t, 1.0, 1.0, Side::Inside).unwrap();
        assert!((s - 0.5).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = t.iter().map(|&(r, _)| (r, 1.0)).collect();
        assert!(boundary_exponent(&flat, 1.0, 1.0, Side::Inside).is_err());
        assert!(boundary_exponent(&t, 1.0, 1.0, Side::Outside).is_err());
    }

    #[test]
    fn symmetry_degenerate_and_reflection() {
        let well = WellSpec::new(1.0, 5.0).unwrap();
        let pr = Process::Brownian { d: 2 };
        let run = McRun::new(2_000, 5, 2).unwrap();
        let cfg = StepConfig::new(1e-3, 20.0).unwrap();
        let r = check_radial_symmetry(&pr, &well, 4.0, 0.5, 1, &run, &cfg, 2.8).unwrap();
        assert!(r.passed && r.max_z == 0.0);
        let r = check_reflection_symmetry(&pr, &well, 4.0, &[0.3, 0.2], &run, &cfg, 2.8).unwrap();
        assert_eq!(r.points[1], vec![-0.3, 0.2]);
        assert!(r.passed, "{r:?}");
        assert!(check_radial_symmetry(&Process::Brownian { d: 1 }, &well, 4.0, 0.5, 4, &run, &cfg, 2.8).is_err());
    }

    #[test]
    fn level_sets() {
        let well = RadialPotential::from(WellSpec::new(1.5, 3.0).unwrap());
        assert_eq!(level_set_radius(&well, 1.0).unwrap(), 1.5);
        let e = RadialPotential::exponential(2.0, 1.0).unwrap();
        assert!((level_set_radius(&e, 2.0 * (-1f64).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!(level_set_radius(&e, 2.0).is_err());
        assert!(level_set_radius(&e, 0.0).is_err());
    }

    #[test]
    fn decaying_bounds_reduce_to_well_estimates() {
        let (pr, w, l0, la) = brownian_setup();
        let pot = RadialPotential::from(w);
        let run = McRun::new(3_000, 11, 2).unwrap();
        let cfg = StepConfig::new(1e-3, 50.0).unwrap();
        let levels = DecayLevels { gamma: 2.0, gamma1: 1.0, gamma2: 2.0 };
        let lam = |r: f64| Ok(PI * PI / (8.0 * r * r));
        let rep = decaying_bounds(&pr, &pot, l0, &levels, &[0.3], &run, &cfg, &lam).unwrap();
        let direct = fk_ratio_inside(&pr, &w, l0, &[0.3], &run, &cfg, la).unwrap();
        assert_eq!(rep.branch, Branch::Inside);
        assert!((rep.upper.value - direct.value).abs() <= 1e-12 * direct.value);
        let full = rep.full.unwrap();
        assert!((full.value - direct.value).abs() < 1e-9 * direct.value);
        assert!(rep.lower.value <= full.value);
    }

    #[test]
    fn decaying_bounds_thresholds() {
        let pr = Process::Levy(cauchy());
        let pot = RadialPotential::exponential(2.0, 1.0).unwrap();
        let run = McRun::new(10, 1, 1).unwrap();
        let cfg = StepConfig::new(1e-3, 1.0).unwrap();
        let lam = |r: f64| Ok(1.1577 / r);
        let levels = DecayLevels { gamma: 0.2, gamma1: 0.5, gamma2: 1.0 };
        let e = decaying_bounds(&pr, &pot, 0.6, &levels, &[0.0], &run, &cfg, &lam).unwrap_err();
        assert!(matches!(e, Error::Hypothesis(_)));
        let levels = DecayLevels { gamma: 1.5, gamma1: 0.7, gamma2: 1.5 };
        let e = decaying_bounds(&pr, &pot, 0.6, &levels, &[3.0], &run, &cfg, &lam).unwrap_err();
        assert!(e.to_string().contains("gamma1"));
        let levels = DecayLevels { gamma: 0.2, gamma1: 0.5, gamma2: 1.5 };
        assert!(decaying_bounds(&pr, &pot, 0.6, &levels, &[3.0], &run, &cfg, &lam).is_ok());
        assert!(decaying_bounds(&pr, &pot, 0.6, &DecayLevels { gamma: 3.0, ..levels }, &[0.0], &run, &cfg, &lam).is_err());
    }

    #[test]
    fn gap_inequality_examples() {
        let w = WellSpec::new(1.0, 5.0).unwrap();
        let g = classical_groundstate_1d(1.0, 5.0).unwrap();
        assert!(gap_inequality_check(&w, -g.lambda0, PI * PI / 8.0));
        assert!(gap_inequality_check(&w, 5.0, 0.1));
        assert!(!gap_inequality_check(&w, 4.0, 1.0 - 0.1));
    }
}
