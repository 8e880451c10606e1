//! Lévy jump densities of the isotropic stable (`m = 0`) and relativistic
//! stable (`m > 0`) processes, the decomposition `j₀ = jₘ + σₘ`, tail masses,
//! the half-line rate function and the recurrence classifier.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::{
    bessel_k, integrate, integrate_log_axis, integrate_to_infinity, ln_gamma, unit_ball_volume,
    QuadratureSpec,
};

/// Dimension, stability index and mass of the operator `(−Δ + m^{2/α})^{α/2} − m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub alpha: f64,
    pub m: f64,
}

impl ModelParams {
    pub fn new(d: u32, alpha: f64, m: f64) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension d must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(domain(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(m >= 0.0) || !m.is_finite() {
            return Err(domain(format!("mass must be finite and >= 0, got {m}")));
        }
        Ok(Self { d, alpha, m })
    }

    pub fn is_massless(&self) -> bool {
        self.m == 0.0
    }

    /// `(d + α)/2`, the Bessel order of the massive kernel.
    pub fn nu(&self) -> f64 {
        0.5 * (self.d as f64 + self.alpha)
    }

    /// `m^{1/α}`, the inverse length scale of the massive kernel.
    pub fn mass_scale(&self) -> f64 {
        self.m.powf(1.0 / self.alpha)
    }

    /// Characteristic exponent `Φ(|u|²) = (|u|² + m^{2/α})^{α/2} − m`.
    pub fn characteristic_exponent(&self, u_norm: f64) -> f64 {
        let u2 = u_norm * u_norm;
        if self.is_massless() {
            u2.powf(0.5 * self.alpha)
        } else {
            (u2 + self.m.powf(2.0 / self.alpha)).powf(0.5 * self.alpha) - self.m
        }
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.d, self.alpha, self.m).map(|_| ())
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(domain(format!("interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn scale(&self, factor: f64) -> Self {
        let (a, b) = (self.lo * factor, self.hi * factor);
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }
}

/// Outcome of the Chung-Fuchs classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recurrence {
    Recurrent,
    Transient,
}

/// ln of `2^α Γ((d+α)/2) / (π^{d/2} |Γ(−α/2)|)`, the massless constant.
pub fn ln_massless_constant(p: &ModelParams) -> f64 {
    let d = p.d as f64;
    // |Γ(−α/2)| = Γ(1 − α/2) / (α/2)
    p.alpha * LN_2 + ln_gamma(p.nu()).expect("nu > 0") - 0.5 * d * PI.ln()
        - ln_gamma(1.0 - 0.5 * p.alpha).expect("alpha < 2")
        + (0.5 * p.alpha).ln()
}

/// ln of `2^{(α−d)/2} α / (π^{d/2} Γ(1 − α/2))`, the massive prefactor.
fn ln_massive_prefactor(p: &ModelParams) -> f64 {
    let d = p.d as f64;
    0.5 * (p.alpha - d) * LN_2 + p.alpha.ln() - 0.5 * d * PI.ln()
        - ln_gamma(1.0 - 0.5 * p.alpha).expect("alpha < 2")
}

/// `lim_{z→0} z^ν K_ν(z) = 2^{ν−1} Γ(ν)`.
fn ln_bessel_limit(nu: f64) -> f64 {
    (nu - 1.0) * LN_2 + ln_gamma(nu).expect("nu > 0")
}

/// Radial jump density `j_{m,α}(r)`.
pub fn jump_density(p: &ModelParams, r: f64) -> Result<f64> {
    jump_density_with(p, r, &QuadratureSpec::default())
}

pub fn jump_density_with(p: &ModelParams, r: f64, q: &QuadratureSpec) -> Result<f64> {
    p.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(domain(format!("jump density needs r > 0, got {r}")));
    }
    let nu = p.nu();
    if p.is_massless() {
        return Ok((ln_massless_constant(p) - 2.0 * nu * r.ln()).exp());
    }
    let z = p.mass_scale() * r;
    let k = bessel_k(nu, z, q)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    // c0 · m^{ν/α} K_ν(z) / r^ν
    Ok((ln_massive_prefactor(p) + nu / p.alpha * p.m.ln() + k.ln() - nu * r.ln()).exp())
}

fn check_massive(p: &ModelParams, r: f64) -> Result<()> {
    p.validate()?;
    if !(p.m > 0.0) {
        return Err(domain("sigma density is defined for m > 0 only"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(domain(format!("sigma density needs r > 0, got {r}")));
    }
    Ok(())
}

/// `D(z) = ∫₀^z w^ν K_{ν−1}(w) dw`.
fn bessel_defect_integral(nu: f64, z: f64, q: &QuadratureSpec) -> Result<f64> {
    integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            w.powf(nu) * bessel_k(nu - 1.0, w, q).unwrap_or(f64::NAN)
        },
        0.0,
        z,
        q,
    )
}

/// `D(z) = 2^{ν−1}Γ(ν) − z^ν K_ν(z)`.
fn bessel_defect_difference(nu: f64, z: f64, q: &QuadratureSpec) -> Result<f64> {
    Ok(ln_bessel_limit(nu).exp() - z.powf(nu) * bessel_k(nu, z, q)?)
}

/// `σ_{m,α}(r)` from the Bessel difference `2^{ν−1}Γ(ν) − z^ν K_ν(z)`, `z = m^{1/α} r`.
pub fn sigma_density_difference(p: &ModelParams, r: f64, q: &QuadratureSpec) -> Result<f64> {
    check_massive(p, r)?;
    let nu = p.nu();
    let z = p.mass_scale() * r;
    let defect = bessel_defect_difference(nu, z, q)?;
    Ok((ln_massive_prefactor(p) - 2.0 * nu * r.ln()).exp() * defect)
}

/// `σ_{m,α}(r)` from the integral `∫₀^z w^ν K_{ν−1}(w) dw`.
pub fn sigma_density_integral(p: &ModelParams, r: f64, q: &QuadratureSpec) -> Result<f64> {
    check_massive(p, r)?;
    let nu = p.nu();
    let z = p.mass_scale() * r;
    let defect = bessel_defect_integral(nu, z, q)?;
    Ok((ln_massive_prefactor(p) - 2.0 * nu * r.ln()).exp() * defect)
}

/// `σ_{m,α}(r) = j_{0,α}(r) − j_{m,α}(r) ≥ 0`.
///
/// The difference form cancels catastrophically for small `m^{1/α} r`, so
/// below `z = 1` the integral form is used.
pub fn sigma_density(p: &ModelParams, r: f64, q: &QuadratureSpec) -> Result<f64> {
    check_massive(p, r)?;
    if p.mass_scale() * r < 1.0 {
        sigma_density_integral(p, r, q)
    } else {
        sigma_density_difference(p, r, q)
    }
}

/// `∫ σ_{m,α}(|x|) dx`; equals `m`.
pub fn total_sigma_mass(p: &ModelParams, q: &QuadratureSpec) -> Result<f64> {
    p.validate()?;
    if !(p.m > 0.0) {
        return Err(domain("total sigma mass is defined for m > 0 only"));
    }
    let nu = p.nu();
    let alpha = p.alpha;
    // In z = m^{1/α} r the mass is d ω_d c0 m ∫₀^∞ z^{−1−α} D(z) dz.
    // On [0, 1] swap the order of integration; on [1, ∞) use the difference form.
    let near = integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            w.powf(nu) * bessel_k(nu - 1.0, w, q).unwrap_or(f64::NAN) * (w.powf(-alpha) - 1.0)
                / alpha
        },
        0.0,
        1.0,
        q,
    )?;
    let far_bessel = integrate_to_infinity(
        |z| {
            if z > 745.0 {
                return 0.0;
            }
            z.powf(nu - 1.0 - alpha) * bessel_k(nu, z, q).unwrap_or(f64::NAN)
        },
        1.0,
        q,
    )?;
    let far = ln_bessel_limit(nu).exp() / alpha - far_bessel;
    let d = p.d as f64;
    Ok(d * unit_ball_volume(p.d) * ln_massive_prefactor(p).exp() * p.m * (near + far))
}

/// `ν_{m,α}(B_r^c)`, the Lévy measure of the complement of the ball of radius `r`.
pub fn tail_mass(p: &ModelParams, r: f64, q: &QuadratureSpec) -> Result<f64> {
    p.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(domain(format!("tail mass needs r > 0, got {r}")));
    }
    let d = p.d as f64;
    let sphere = d * unit_ball_volume(p.d);
    if p.is_massless() {
        return Ok(sphere * (ln_massless_constant(p) - p.alpha * r.ln()).exp() / p.alpha);
    }
    let nu = p.nu();
    let z0 = p.mass_scale() * r;
    let integrand = |z: f64| {
        if z > 745.0 {
            return 0.0;
        }
        z.powf(d - 1.0 - nu) * bessel_k(nu, z, q).unwrap_or(f64::NAN)
    };
    // Split where bessel_k switches to its large-argument series.
    let split = 35.0f64.max(z0);
    let inner = if z0 < split {
        integrate_log_axis(integrand, z0, split, q)?
    } else {
        0.0
    };
    let outer = integrate_to_infinity(integrand, split, q)?;
    Ok(sphere * ln_massive_prefactor(p).exp() * p.m * (inner + outer))
}

/// Chung-Fuchs classification of the process.
pub fn classify_recurrence(p: &ModelParams) -> Recurrence {
    let recurrent = if p.is_massless() {
        p.d == 1 && p.alpha >= 1.0
    } else {
        p.d <= 2
    };
    if recurrent {
        Recurrence::Recurrent
    } else {
        Recurrence::Transient
    }
}

/// Constants for the two-sided massive rate function on `[0, r0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c1: f64,
    pub c2: f64,
    pub r0: f64,
}

/// Rate-function band from given constants.
///
/// On `r ≤ r0` this is `[c1 r^{α/2}, c2 r^{α/2}]`. Beyond `r0` the lower end
/// is frozen (the function is increasing) and the upper end grows linearly
/// (concave with value 0 at the origin).
pub fn rate_function_with(p: &ModelParams, consts: &RateConstants, r: f64) -> Result<Interval> {
    if p.d != 1 {
        return Err(domain(format!("rate function is one-dimensional, got d = {}", p.d)));
    }
    if !(r >= 0.0) {
        return Err(domain(format!("rate function needs r >= 0, got {r}")));
    }
    let half = 0.5 * p.alpha;
    if r <= consts.r0 {
        let s = r.powf(half);
        Interval::new(consts.c1 * s, consts.c2 * s)
    } else {
        let s0 = consts.r0.powf(half);
        Interval::new(consts.c1 * s0, consts.c2 * s0 * r / consts.r0)
    }
}

/// Two-sided band for the half-line rate function `𝒱_{m,α}(r)` (d = 1).
///
/// Massless: the exact value `r^{α/2}`. Massive: constants calibrated once per
/// `(α, m)` by [`calibrate_rate_constants`] and cached.
pub fn rate_function(p: &ModelParams, r: f64) -> Result<Interval> {
    p.validate()?;
    if p.d != 1 {
        return Err(domain(format!("rate function is one-dimensional, got d = {}", p.d)));
    }
    if !(r >= 0.0) {
        return Err(domain(format!("rate function needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(Interval::point(0.0));
    }
    if p.is_massless() {
        return Ok(Interval::point(r.powf(0.5 * p.alpha)));
    }
    let consts = cached_rate_constants(p)?;
    rate_function_with(p, &consts, r)
}

type RateCache = RwLock<HashMap<(u64, u64), RateConstants>>;

fn rate_cache() -> &'static RateCache {
    static CACHE: OnceLock<RateCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

const RATE_CALIBRATION_SEED: u64 = 0x005e_ed0f_1e57;
const RATE_CALIBRATION_PATHS: usize = 4000;

fn cached_rate_constants(p: &ModelParams) -> Result<RateConstants> {
    let key = (p.alpha.to_bits(), p.m.to_bits());
    if let Some(c) = rate_cache()
        .read()
        .map_err(|_| Error::Numerical("rate cache poisoned".into()))?
        .get(&key)
    {
        return Ok(*c);
    }
    let consts = calibrate_rate_constants(p, RATE_CALIBRATION_PATHS, RATE_CALIBRATION_SEED)?;
    let mut w = rate_cache()
        .write()
        .map_err(|_| Error::Numerical("rate cache poisoned".into()))?;
    Ok(*w.entry(key).or_insert(consts))
}

/// Small-distance calibration of the massive rate constants.
///
/// With `r0 = m^{−1/α}` and horizon `t = 4 r0^α`, the half-line survival
/// probability `S(r, t)` is simulated for `r ∈ r0·{1/64, 1/16, 1/4, 1}` and
/// `c(r) = S(r, t) √t / r^{α/2}` recorded. The constants are the extreme
/// values of `c` padded by three standard errors.
pub fn calibrate_rate_constants(p: &ModelParams, n: usize, seed: u64) -> Result<RateConstants> {
    use crate::sampler::{simulate, Process, Region, StepConfig};
    p.validate()?;
    if p.d != 1 || !(p.m > 0.0) {
        return Err(domain("rate calibration needs d = 1 and m > 0"));
    }
    if n < 2 {
        return Err(domain("rate calibration needs at least two paths"));
    }
    let half = 0.5 * p.alpha;
    let r0 = 1.0 / p.mass_scale();
    let t = 4.0 * r0.powf(p.alpha);
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for (i, frac) in [1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0].into_iter().enumerate() {
        let r = r0 * frac;
        let h = (r.powf(p.alpha) / 20.0).min(t / 50.0);
        let cfg = StepConfig::new(h, t)?;
        let samples = simulate(
            &Process::Levy(*p),
            &[r],
            &Region::ExitHalfLine,
            &cfg,
            n,
            seed.wrapping_add(i as u64),
            8,
        )?;
        let alive = samples.iter().filter(|s| s.truncated).count() as f64;
        let nf = n as f64;
        let s = alive / nf;
        let se = (s * (1.0 - s) / nf).sqrt().max(1.0 / nf);
        let scale = t.sqrt() / r.powf(half);
        c1 = c1.min(((s - 3.0 * se) * scale).max(0.0));
        c2 = c2.max((s + 3.0 * se) * scale);
    }
    if !(c1 > 0.0) {
        return Err(Error::Numerical(
            "rate calibration produced a non-positive lower constant; increase paths".into(),
        ));
    }
    Ok(RateConstants { c1, c2, r0 })
}
