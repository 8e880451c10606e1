//! Special functions and adaptive quadrature.
//!
//! Everything here is self-contained: Gamma/Beta (Lanczos), the modified
//! Bessel function of the third kind through its integral representation,
//! and power series for `I` and `J`. The quadrature is a globally adaptive
//! Gauss-Kronrod (7, 15) scheme.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, numerical, Error, Result};

/// Tolerances for the adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
            return Err(domain("quadrature tolerances must be positive"));
        }
        if max_subdivisions == 0 {
            return Err(domain("max_subdivisions must be at least 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        })
    }

    /// Same tolerances with a different absolute floor.
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_subdivisions: 400,
        }
    }
}

// Kronrod nodes on [0, 1] (symmetric), QUADPACK ordering.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, q: &QuadratureSpec) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(domain("integrate needs finite limits"));
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, q).map(|v| -v);
    }
    let (value, error) = gauss_kronrod(&f, a, b);
    if !value.is_finite() {
        return Err(numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    loop {
        let (total, total_err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if total_err <= q.abs_tol.max(q.rel_tol * total.abs()) {
            return Ok(total);
        }
        if heap.len() >= q.max_subdivisions {
            return Err(numerical(format!(
                "quadrature on [{a}, {b}] did not converge in {} subdivisions (estimate {total}, error {total_err})",
                q.max_subdivisions
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(numerical(format!(
                "quadrature on [{a}, {b}] hit round-off near {mid} (error {total_err})"
            )));
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod(&f, lo, hi);
            if !value.is_finite() {
                return Err(numerical(format!("non-finite integrand on [{lo}, {hi}]")));
            }
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
    }
}

/// `∫_a^∞ f`, via the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, q: &QuadratureSpec) -> Result<f64> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        q,
    )
}

/// `∫_a^b f` for `0 < a < b`, integrated on the logarithmic axis.
pub fn integrate_log_axis<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(domain("log-axis quadrature needs positive limits"));
    }
    integrate(
        |s| {
            let x = s.exp();
            f(x) * x
        },
        a.ln(),
        b.ln(),
        q,
    )
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn lanczos_series(z: f64) -> f64 {
    LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (z + (i + 1) as f64))
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x), with reflection for `x < 1/2`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("gamma of non-finite argument {x}")));
    }
    if is_pole(x) {
        return Err(domain(format!("gamma has a pole at {x}")));
    }
    if x < 0.5 {
        return Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    if x < 140.0 {
        Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_series(z))
    } else {
        Ok(ln_gamma(x)?.exp())
    }
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("ln_gamma needs a positive finite argument, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(LN_SQRT_2PI + (z + 0.5) * t.ln() - t + lanczos_series(z).ln())
}

/// ln B(x, y); symmetric in its arguments bit for bit.
pub fn ln_beta(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(domain(format!("beta needs positive arguments, got ({x}, {y})")));
    }
    Ok(ln_gamma(x)? + ln_gamma(y)? - ln_gamma(x + y)?)
}

/// B(x, y) = Γ(x)Γ(y)/Γ(x+y), evaluated in the log domain.
pub fn beta_fn(x: f64, y: f64) -> Result<f64> {
    Ok(ln_beta(x, y)?.exp())
}

/// Argument above which `bessel_k` uses the Hankel asymptotic series.
pub const BESSEL_K_ASYMPTOTIC_FROM: f64 = 35.0;

/// K_ρ(z), the modified Bessel function of the third kind.
///
/// Uses `K_ρ(z) = ½ (z/2)^ρ ∫₀^∞ t^{-ρ-1} exp(-t - z²/(4t)) dt` on the
/// substituted axis `t = e^s`, with the peak of the exponent factored out.
/// For `z > 35` the large-argument expansion
/// `√(π/2z) e^{-z} Σ a_k(ρ)/z^k` is summed instead. `K_{-ρ} = K_ρ`.
pub fn bessel_k(rho: f64, z: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !rho.is_finite() {
        return Err(domain(format!("bessel_k needs z > 0, got z = {z}")));
    }
    let rho = rho.abs();
    if z > BESSEL_K_ASYMPTOTIC_FROM {
        if let Some(v) = bessel_k_asymptotic(rho, z) {
            return Ok(v);
        }
    }
    bessel_k_integral(rho, z, q)
}

fn bessel_k_asymptotic(rho: f64, z: f64) -> Option<f64> {
    let mu = 4.0 * rho * rho;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() > term.abs() {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some((PI / (2.0 * z)).sqrt() * (-z).exp() * sum);
        }
    }
    None
}

fn bessel_k_integral(rho: f64, z: f64, q: &QuadratureSpec) -> Result<f64> {
    let quarter_z2 = 0.25 * z * z;
    let phase = |s: f64| -rho * s - s.exp() - quarter_z2 * (-s).exp();
    // (−ρ + √(ρ² + z²))/2 without cancellation
    let t_peak = 0.5 * z * z / (rho + (rho * rho + z * z).sqrt());
    let s_peak = t_peak.ln();
    let peak = phase(s_peak);
    const DROP: f64 = 50.0;
    let mut lo = s_peak - 1.0;
    let mut steps = 0;
    while phase(lo) - peak > -DROP {
        lo -= 1.0;
        steps += 1;
        if steps > 100_000 {
            return Err(numerical("bessel_k: left integration limit not found"));
        }
    }
    let mut hi = s_peak + 1.0;
    while phase(hi) - peak > -DROP {
        hi += 1.0;
        steps += 1;
        if steps > 100_000 {
            return Err(numerical("bessel_k: right integration limit not found"));
        }
    }
    let scaled = integrate(|s| (phase(s) - peak).exp(), lo, hi, q)?;
    let ln_prefactor = -std::f64::consts::LN_2 + rho * (0.5 * z).ln() + peak;
    Ok(ln_prefactor.exp() * scaled)
}

/// Modified Bessel function of the first kind by power series.
///
/// Fails for `z > 700`, where `e^z` overflows; use [`bessel_i_scaled`] there.
pub fn bessel_i(rho: f64, z: f64) -> Result<f64> {
    if z > 700.0 {
        return Err(numerical(format!(
            "bessel_i overflows at z = {z}; use bessel_i_scaled (e^-z I) instead"
        )));
    }
    bessel_series(rho, z, 1.0)
}

/// Bessel function of the first kind by power series.
///
/// The alternating series loses digits quickly, so `z > 30` is refused.
pub fn bessel_j(rho: f64, z: f64) -> Result<f64> {
    if z > 30.0 {
        return Err(numerical(format!(
            "bessel_j power series loses precision at z = {z} (limit 30)"
        )));
    }
    bessel_series(rho, z, -1.0)
}

fn bessel_series(rho: f64, z: f64, sign: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !rho.is_finite() {
        return Err(domain(format!("bessel series needs z > 0, got z = {z}")));
    }
    if rho < 0.0 && rho == rho.floor() {
        // I_{-n} = I_n and J_{-n} = (-1)^n J_n.
        let n = -rho;
        let parity = if sign < 0.0 && (n as i64) % 2 == 1 { -1.0 } else { 1.0 };
        return Ok(parity * bessel_series(n, z, sign)?);
    }
    let half = 0.5 * z;
    let first = if rho + 1.0 > 0.0 {
        (rho * half.ln() - ln_gamma(rho + 1.0)?).exp()
    } else {
        half.powf(rho) / gamma_fn(rho + 1.0)?
    };
    let step = sign * half * half;
    let mut term = first;
    let mut sum = first;
    for k in 0..2000 {
        let kf = k as f64;
        term *= step / ((kf + 1.0) * (kf + 1.0 + rho));
        sum += term;
        if kf + 1.0 > half && term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(numerical(format!("bessel series did not converge at z = {z}")))
}

/// `e^{-z} I_ρ(z)` for `ρ ≥ 0`, summed in the log domain (no overflow).
pub fn bessel_i_scaled(rho: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !(rho >= 0.0) {
        return Err(domain(format!("bessel_i_scaled needs z > 0 and rho >= 0, got ({rho}, {z})")));
    }
    let ln_half = (0.5 * z).ln();
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let ln_term =
            (2.0 * kf + rho) * ln_half - ln_gamma(kf + 1.0)? - ln_gamma(kf + rho + 1.0)? - z;
        let term = ln_term.exp();
        sum += term;
        if kf > 0.5 * z && term <= 1e-17 * sum {
            return Ok(sum);
        }
        k += 1;
        if k > 1_000_000 {
            return Err(Error::Numerical(format!("bessel_i_scaled did not converge at z = {z}")));
        }
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: u32) -> f64 {
    let half_d = 0.5 * d as f64;
    (half_d * PI.ln() - ln_gamma(half_d + 1.0).expect("positive argument")).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_reference_values() {
        assert!(rel(gamma_fn(1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(-0.5).unwrap(), -2.0 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(10.0).unwrap(), 362_880.0) < 1e-13);
    }

    #[test]
    fn gamma_poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma_fn(x), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn gamma_recursion_on_grid() {
        for i in 0..100 {
            let x = 0.1 + (20.0 - 0.1) * i as f64 / 99.0;
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "x = {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn ln_gamma_large_argument() {
        // Stirling with three correction terms.
        let x: f64 = 500.0;
        let stirling = (x - 0.5) * x.ln() - x + LN_SQRT_2PI + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3));
        assert!((ln_gamma(x).unwrap() - stirling).abs() < 1e-10);
    }

    #[test]
    fn beta_reference_values() {
        assert!(rel(beta_fn(1.0, 1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(beta_fn(2.0, 3.0).unwrap(), 1.0 / 12.0) < 1e-13);
        assert!(rel(beta_fn(1.0, 1.5).unwrap(), 2.0 / 3.0) < 1e-13);
    }

    #[test]
    fn beta_matches_direct_quadrature() {
        // Independent route: ∫₀¹ t²(1−t)^½ dt by plain composite Simpson on a
        // substituted axis u = √(1−t) that removes the endpoint singularity.
        let n = 20_000;
        let h = 1.0 / n as f64;
        let g = |u: f64| {
            let t = 1.0 - u * u;
            t * t * u * 2.0 * u
        };
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(i as f64 * h);
        }
        let simpson = s * h / 3.0;
        assert!(rel(beta_fn(3.0, 1.5).unwrap(), simpson) < 1e-10);
    }

    #[test]
    fn bessel_k_half_integer_closed_form() {
        let q = QuadratureSpec::default();
        let v = bessel_k(0.5, 1.0, &q).unwrap();
        assert!((v - 0.461_068_504_447_894_4).abs() < 1e-12);
        for i in 0..60 {
            let z = 0.01 * (3000.0f64).powf(i as f64 / 59.0);
            let exact = (PI / (2.0 * z)).sqrt() * (-z).exp();
            let got = bessel_k(0.5, z, &q).unwrap();
            assert!(rel(got, exact) < 1e-10, "z = {z}: {got} vs {exact}");
        }
    }

    #[test]
    fn bessel_k_large_argument_band() {
        let q = QuadratureSpec::default();
        let z = 50.0;
        // first-order expansion, 1 + (4ρ² − 1)/(8z)
        let leading = (PI / (2.0 * z)).sqrt() * (-z).exp() * (1.0 + 8.0 / (8.0 * z));
        let ratio = bessel_k(1.5, z, &q).unwrap() / leading;
        assert!((0.99..=1.01).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bessel_k_matches_cosh_representation() {
        // Independent oracle: K_ρ(z) = ∫₀^∞ e^{-z cosh t} cosh(ρ t) dt, trapezoid rule
        // (spectrally accurate for this double-exponentially decaying integrand).
        let oracle = |rho: f64, z: f64| {
            let h = 1e-3;
            let mut s = 0.5 * (-z).exp();
            let mut t: f64 = h;
            loop {
                let v = (-z * t.cosh()).exp() * (rho * t).cosh();
                s += v;
                if v < 1e-300 || t > 50.0 {
                    break;
                }
                t += h;
            }
            s * h
        };
        let q = QuadratureSpec::default();
        let frozen = oracle(0.75, 2.0);
        assert!(rel(bessel_k(0.75, 2.0, &q).unwrap(), frozen) < 1e-10);
        for (rho, z) in [(0.0, 0.3), (1.0, 1.7), (2.25, 0.05), (1.25, 34.0), (0.25, 40.0)] {
            let got = bessel_k(rho, z, &q).unwrap();
            assert!(rel(got, oracle(rho, z)) < 1e-10, "rho {rho} z {z}");
        }
    }

    #[test]
    fn bessel_k_decreasing_in_z() {
        let q = QuadratureSpec::default();
        for rho in [0.0, 0.75, 1.5, 2.5] {
            let mut prev = f64::INFINITY;
            for i in 0..80 {
                let z = 0.01 * (6000.0f64).powf(i as f64 / 79.0);
                let v = bessel_k(rho, z, &q).unwrap();
                assert!(v < prev, "rho {rho}, z {z}");
                prev = v;
            }
        }
    }

    #[test]
    fn bessel_k_rejects_nonpositive_argument() {
        assert!(matches!(
            bessel_k(1.0, 0.0, &QuadratureSpec::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bessel_i_j_closed_forms() {
        let i_half = bessel_i(0.5, 1.0).unwrap();
        assert!((i_half - (2.0 / PI).sqrt() * 1.0f64.sinh()).abs() < 1e-14);
        assert!((i_half - 0.937_674_888_245_488_2).abs() < 1e-7);
        assert!(bessel_j(0.5, PI).unwrap().abs() < 1e-12);
        let z: f64 = 2.3;
        let j_half = (2.0 / (PI * z)).sqrt() * z.sin();
        assert!((bessel_j(0.5, z).unwrap() - j_half).abs() < 1e-14);
        let j_three_half = (2.0 / (PI * z)).sqrt() * (z.sin() / z - z.cos());
        assert!((bessel_j(1.5, z).unwrap() - j_three_half).abs() < 1e-14);
        assert!((bessel_j(-1.0, z).unwrap() + bessel_j(1.0, z).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn bessel_i0_series_oracle() {
        // Sixty terms (1/4)^k/(k!)², accumulated smallest-first.
        let mut terms = Vec::with_capacity(60);
        let mut fact = 1.0f64;
        for k in 0..60 {
            if k > 0 {
                fact *= k as f64;
            }
            terms.push(0.25f64.powi(k) / (fact * fact));
        }
        let oracle: f64 = terms.iter().rev().sum();
        assert!(rel(bessel_i(0.0, 1.0).unwrap(), oracle) < 1e-15);
    }

    #[test]
    fn bessel_i_overflow_is_reported() {
        assert!(matches!(bessel_i(1.0, 800.0), Err(Error::Numerical(_))));
        let scaled = bessel_i_scaled(0.5, 800.0).unwrap();
        // e^{-z} I_{1/2}(z) = (1 - e^{-2z}) / √(2πz)
        assert!(rel(scaled, 1.0 / (2.0 * PI * 800.0).sqrt()) < 1e-12);
    }

    #[test]
    fn quadrature_handles_semi_infinite_and_log_axes() {
        let q = QuadratureSpec::default();
        let v = integrate_to_infinity(|x| (-x).exp(), 1.0, &q).unwrap();
        assert!(rel(v, (-1.0f64).exp()) < 1e-12);
        let w = integrate_log_axis(|x| x.powf(-1.5), 1e-6, 1.0, &q).unwrap();
        assert!(rel(w, 2.0 * (1e3 - 1.0)) < 1e-12);
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let q = QuadratureSpec::new(1e-14, 1e-14, 4).unwrap();
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &q);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn unit_ball_volumes() {
        assert!(rel(unit_ball_volume(1), 2.0) < 1e-14);
        assert!(rel(unit_ball_volume(2), PI) < 1e-14);
        assert!(rel(unit_ball_volume(3), 4.0 * PI / 3.0) < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn beta_is_symmetric(x in 0.01f64..50.0, y in 0.01f64..50.0) {
            proptest::prop_assert_eq!(beta_fn(x, y).unwrap(), beta_fn(y, x).unwrap());
        }
    }
}
