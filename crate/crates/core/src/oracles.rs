//! Reference values: classical (Brownian) ground states of a well, Brownian
//! exit and hitting transforms, and a deterministic one-dimensional spectral
//! solver for the nonlocal operator plus a radial potential.
//!
//! The classical oracles use only Bessel/trigonometric closed forms; the
//! spectral solver only the jump kernels of [`crate::levy`]. Neither shares
//! code with the Monte-Carlo path.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, numerical, Error, Result};
use crate::levy::{
    jump_density_with, ln_massless_constant, sigma_density, tail_mass, ModelParams,
};
use crate::potential::RadialPotential;
use crate::specfun::{
    bessel_j, bessel_k, gamma_fn, integrate, integrate_to_infinity, unit_ball_volume,
    QuadratureSpec,
};

/// `π²/(8a²)`, principal Dirichlet eigenvalue of `−½Δ` on `(−a, a)`.
pub fn brownian_dirichlet_1d(a: f64) -> f64 {
    PI * PI / (8.0 * a * a)
}

/// `E^x[e^{uτ_a}] = cos(√(2u)x)/cos(√(2u)a)` for one-dimensional Brownian motion.
pub fn brownian_exit_mgf(a: f64, x: f64, u: f64) -> Result<f64> {
    if !(a > 0.0) || x.abs() > a {
        return Err(domain(format!("need |x| <= a with a > 0, got a = {a}, x = {x}")));
    }
    if !(u >= 0.0) {
        return Err(domain(format!("u must be >= 0, got {u}")));
    }
    let k = (2.0 * u).sqrt();
    if k * a >= 0.5 * PI {
        return Err(numerical(format!(
            "exit-time MGF diverges: sqrt(2u)·a = {} >= pi/2",
            k * a
        )));
    }
    Ok((k * x).cos() / (k * a).cos())
}

/// `E^b[e^{−uT_0}] = e^{−√(2u)|b|}` for one-dimensional Brownian motion.
pub fn brownian_hit_laplace(b: f64, u: f64) -> Result<f64> {
    if !(u >= 0.0) || !b.is_finite() {
        return Err(domain(format!("need u >= 0 and finite b, got u = {u}, b = {b}")));
    }
    Ok((-(2.0 * u).sqrt() * b.abs()).exp())
}

/// Ground state of `−½Δ − v·1_{(−a,a)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalGroundState {
    pub lambda0: f64,
    /// Outside amplitude: `φ₀(x) = A₀ e^{−√(2|λ₀|)|x|}` for `|x| ≥ a`.
    pub a0: f64,
    /// Inside amplitude: `φ₀(x) = B₀ cos(√(2(v−|λ₀|))x)` for `|x| ≤ a`.
    pub b0: f64,
    pub a: f64,
    pub v: f64,
}

impl ClassicalGroundState {
    pub fn k(&self) -> f64 {
        (2.0 * (self.v + self.lambda0)).sqrt()
    }

    pub fn kappa(&self) -> f64 {
        (-2.0 * self.lambda0).sqrt()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x <= self.a {
            self.b0 * (self.k() * x).cos()
        } else {
            self.a0 * (-self.kappa() * x).exp()
        }
    }

    /// Value and derivative mismatch at the well edge.
    pub fn matching_residuals(&self) -> (f64, f64) {
        let (k, kappa, a) = (self.k(), self.kappa(), self.a);
        let value = self.b0 * (k * a).cos() - self.a0 * (-kappa * a).exp();
        let slope = -self.b0 * k * (k * a).sin() + kappa * self.a0 * (-kappa * a).exp();
        (value, slope)
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `k tan(ka) = κ` on the ground branch `ka < π/2` and normalize.
pub fn classical_groundstate_1d(a: f64, v: f64) -> Result<ClassicalGroundState> {
    if !(a > 0.0) || !(v > 0.0) {
        return Err(domain(format!("need a > 0 and v > 0, got a = {a}, v = {v}")));
    }
    // E = |λ₀| ∈ (max(0, v − π²/(8a²)), v)
    let lo = (v - brownian_dirichlet_1d(a)).max(0.0);
    let f = |e: f64| {
        let k = (2.0 * (v - e)).sqrt();
        k * (k * a).tan() - (2.0 * e).sqrt()
    };
    let lo = lo + 1e-15 * v;
    let e = bisect(f, lo, v);
    let k = (2.0 * (v - e)).sqrt();
    let kappa = (2.0 * e).sqrt();
    let b0 = (kappa / (1.0 + a * kappa)).sqrt();
    let a0 = b0 * (a * kappa).exp() * (a * k).cos();
    Ok(ClassicalGroundState {
        lambda0: -e,
        a0,
        b0,
        a,
        v,
    })
}

/// Ground state of `−½Δ − v·1_{B_a}` in `d ≥ 3` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialClassical {
    pub d: u32,
    pub a: f64,
    pub v: f64,
    pub lambda0: f64,
    pub c_in: f64,
    pub c_out: f64,
}

impl RadialClassical {
    fn order(&self) -> f64 {
        0.5 * (self.d as f64 - 2.0)
    }

    pub fn k(&self) -> f64 {
        (2.0 * (self.v + self.lambda0)).sqrt()
    }

    pub fn kappa(&self) -> f64 {
        (-2.0 * self.lambda0).sqrt()
    }

    /// `(a/r)^ν J_ν(kr)` inside and `(a/r)^ν K_ν(κr)` outside, scaled.
    pub fn eval(&self, r: f64) -> Result<f64> {
        let nu = self.order();
        let r = r.abs();
        if r < self.a {
            Ok(self.c_in * inside_shape(nu, self.a, self.k(), r)?)
        } else {
            Ok(self.c_out
                * (self.a / r).powf(nu)
                * bessel_k(nu, self.kappa() * r, &QuadratureSpec::default())?)
        }
    }

    pub fn continuity_residual(&self) -> Result<f64> {
        let nu = self.order();
        let inside = self.c_in * inside_shape(nu, self.a, self.k(), self.a)?;
        let outside =
            self.c_out * bessel_k(nu, self.kappa() * self.a, &QuadratureSpec::default())?;
        Ok(inside - outside)
    }
}

fn inside_shape(nu: f64, a: f64, k: f64, r: f64) -> Result<f64> {
    if r < 1e-10 * a {
        // (a/r)^ν J_ν(kr) → a^ν (k/2)^ν / Γ(ν+1)
        return Ok(a.powf(nu) * (0.5 * k).powf(nu) / gamma_fn(nu + 1.0)?);
    }
    Ok((a / r).powf(nu) * bessel_j(nu, k * r)?)
}

fn first_bessel_zero(nu: f64) -> Result<f64> {
    let mut z = 0.05;
    let mut prev = bessel_j(nu, z)?;
    while z < 30.0 {
        let next = bessel_j(nu, z + 0.05)?;
        if next <= 0.0 && prev > 0.0 {
            return Ok(bisect(|t| bessel_j(nu, t).unwrap_or(f64::NAN), z, z + 0.05));
        }
        prev = next;
        z += 0.05;
    }
    Err(numerical(format!("no zero of J_{nu} below 30")))
}

/// Radial classical ground state, or `None` when the well does not bind.
pub fn classical_groundstate_radial(a: f64, v: f64, d: u32) -> Result<Option<RadialClassical>> {
    if !(a > 0.0) || !(v > 0.0) {
        return Err(domain(format!("need a > 0 and v > 0, got a = {a}, v = {v}")));
    }
    if d < 3 {
        return Err(domain("radial classical ground state needs d >= 3"));
    }
    let q = QuadratureSpec::default();
    let nu = 0.5 * (d as f64 - 2.0);
    let j1 = first_bessel_zero(nu)?;
    let inner = |e: f64| -> f64 {
        let k = (2.0 * (v - e)).sqrt();
        let ka = k * a;
        k * bessel_j(nu + 1.0, ka).unwrap_or(f64::NAN) / bessel_j(nu, ka).unwrap_or(f64::NAN)
    };
    let outer = |e: f64| -> f64 {
        let kappa = (2.0 * e).sqrt();
        let z = kappa * a;
        kappa * bessel_k(nu + 1.0, z, &q).unwrap_or(f64::NAN) / bessel_k(nu, z, &q).unwrap_or(f64::NAN)
    };
    let e_lo = v - j1 * j1 / (2.0 * a * a);
    let lo = if e_lo > 0.0 {
        e_lo + 1e-12 * v
    } else {
        // κ → 0: the outside log-derivative tends to (d − 2)/a.
        let at_zero = {
            let k = (2.0 * v).sqrt();
            k * bessel_j(nu + 1.0, k * a)? / bessel_j(nu, k * a)?
        };
        if at_zero <= 2.0 * nu / a {
            return Ok(None);
        }
        1e-14 * v
    };
    let e = bisect(|e| inner(e) - outer(e), lo, v * (1.0 - 1e-14));
    let mut state = RadialClassical {
        d,
        a,
        v,
        lambda0: -e,
        c_in: 1.0,
        c_out: 1.0,
    };
    let k = state.k();
    let kappa = state.kappa();
    state.c_out = bessel_j(nu, k * a)? / bessel_k(nu, kappa * a, &q)?;
    let sphere = d as f64 * unit_ball_volume(d);
    let dm1 = d as f64 - 1.0;
    let norm_in = integrate(
        |r| r.powf(dm1) * inside_shape(nu, a, k, r).unwrap_or(f64::NAN).powi(2),
        0.0,
        a,
        &q,
    )?;
    let c_out = state.c_out;
    let norm_out = integrate_to_infinity(
        |r| {
            let z = kappa * r;
            if z > 700.0 {
                return 0.0;
            }
            r.powf(dm1) * (c_out * (a / r).powf(nu) * bessel_k(nu, z, &q).unwrap_or(f64::NAN)).powi(2)
        },
        a,
        &q,
    )?;
    let scale = 1.0 / (sphere * (norm_in + norm_out)).sqrt();
    state.c_in = scale;
    state.c_out *= scale;
    Ok(Some(state))
}

/// How the massive kernel is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelRoute {
    /// Cell integrals of `j_{m,α}` itself.
    Direct,
    /// Closed-form massless cell integrals minus cell integrals of `σ_{m,α}`.
    MasslessMinusSigma,
}

/// Toeplitz symbol of the discretized operator on a uniform grid of spacing `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteKernel {
    pub h: f64,
    pub diag: f64,
    /// `off[k]` couples nodes `k` cells apart (`off[0]` is unused).
    pub off: Vec<f64>,
}

impl DiscreteKernel {
    fn entry(&self, k: usize) -> f64 {
        if k == 0 {
            self.diag
        } else {
            -self.off[k]
        }
    }

    /// Full `n × n` matrix on nodes `(i + ½)h`, killed outside.
    pub fn full_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        if n > self.off.len() {
            return Err(domain("kernel too short for the requested matrix"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| self.entry(i.abs_diff(j))))
    }

    /// Matrix restricted to even functions, on the `n` nodes `(i + ½)h`, `i ≥ 0`.
    pub fn even_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        if 2 * n > self.off.len() {
            return Err(domain("kernel too short for the requested matrix"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.entry(i.abs_diff(j)) + self.entry(i + j + 1)
        }))
    }

    fn minus(&self, other: &DiscreteKernel) -> DiscreteKernel {
        DiscreteKernel {
            h: self.h,
            diag: self.diag - other.diag,
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - b).collect(),
        }
    }
}

struct CellKernel<'a> {
    density: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    /// `∫₀^h (y/h)² j(y) dy`
    near: f64,
    /// `∫_{from}^∞ j`
    far: Box<dyn Fn(f64) -> Result<f64> + Send + Sync + 'a>,
}

fn assemble_cells(kernel: &CellKernel, h: f64, cells: usize, q: &QuadratureSpec) -> Result<DiscreteKernel> {
    // moments ∫₀¹ t^p j(h(k+t)) h dt, p = 0, 1, 2, of cells k = 1..cells−1
    let moments: Vec<[f64; 3]> = (1..cells)
        .into_par_iter()
        .map(|k| {
            let kf = k as f64;
            let f = |p: i32| {
                integrate(
                    |t| t.powi(p) * (kernel.density)(h * (kf + t)) * h,
                    0.0,
                    1.0,
                    q,
                )
            };
            Ok([f(0)?, f(1)?, f(2)?])
        })
        .collect::<Result<Vec<_>>>()?;
    let far = (kernel.far)(cells as f64 * h)?;
    let m = |k: usize, p: usize| moments[k - 1][p];
    let mut off = vec![0.0; cells];
    off[1] = kernel.near + m(1, 0) - m(1, 1);
    for k in 2..cells {
        off[k] = m(k - 1, 1) + (m(k, 0) - m(k, 1));
    }
    // Interpolation defect of the hat functions, restored on the nearest coupling.
    let defect: f64 = moments.iter().map(|c| c[1] - c[2]).sum::<f64>() + far / 6.0;
    let tail: f64 = moments.iter().map(|c| c[0]).sum::<f64>() + far;
    off[1] -= defect;
    let diag = 2.0 * kernel.near + 2.0 * tail - 2.0 * defect;
    Ok(DiscreteKernel { h, diag, off })
}

fn massless_cells<'a>(p: &'a ModelParams, h: f64) -> CellKernel<'a> {
    let amp = ln_massless_constant(p).exp();
    let alpha = p.alpha;
    CellKernel {
        density: Box::new(move |y| amp * y.powf(-1.0 - alpha)),
        near: amp * h.powf(-alpha) / (2.0 - alpha),
        far: Box::new(move |from| Ok(amp * from.powf(-alpha) / alpha)),
    }
}

fn check_one_dim(p: &ModelParams) -> Result<()> {
    if p.d != 1 {
        return Err(domain(format!("spectral solver is one-dimensional, got d = {}", p.d)));
    }
    Ok(())
}

/// Assemble the discretized operator with `cells` cell couplings.
pub fn assemble_kernel(
    p: &ModelParams,
    h: f64,
    cells: usize,
    route: KernelRoute,
    q: &QuadratureSpec,
) -> Result<DiscreteKernel> {
    check_one_dim(p)?;
    if !(h > 0.0) || cells < 2 {
        return Err(domain("kernel assembly needs h > 0 and at least two cells"));
    }
    if p.is_massless() {
        return assemble_cells(&massless_cells(p, h), h, cells, q);
    }
    match route {
        KernelRoute::Direct => {
            let density = move |y: f64| jump_density_with(p, y, q).unwrap_or(f64::NAN);
            let near = integrate(|y| (y / h).powi(2) * density(y), 0.0, h, q)?;
            let kernel = CellKernel {
                density: Box::new(density),
                near,
                far: Box::new(move |from| Ok(0.5 * tail_mass(p, from, q)?)),
            };
            assemble_cells(&kernel, h, cells, q)
        }
        KernelRoute::MasslessMinusSigma => {
            let p0 = ModelParams { m: 0.0, ..*p };
            let l0 = assemble_cells(&massless_cells(&p0, h), h, cells, q)?;
            let g = sigma_kernel(p, h, cells, q)?;
            Ok(l0.minus(&g))
        }
    }
}

/// The same discretization applied to the kernel `σ_{m,α}`.
pub fn sigma_kernel(p: &ModelParams, h: f64, cells: usize, q: &QuadratureSpec) -> Result<DiscreteKernel> {
    check_one_dim(p)?;
    let sigma = move |y: f64| sigma_density(p, y, q).unwrap_or(f64::NAN);
    let near = integrate(|y| (y / h).powi(2) * sigma(y), 0.0, h, q)?;
    let kernel = CellKernel {
        density: Box::new(sigma),
        near,
        far: Box::new(move |from| integrate_to_infinity(sigma, from, q)),
    };
    assemble_cells(&kernel, h, cells, q)
}

/// Largest entrywise gap between the direct massive matrix and `L₀ − G_m`.
pub fn decomposition_residual(p: &ModelParams, h: f64, n: usize, q: &QuadratureSpec) -> Result<f64> {
    let direct = assemble_kernel(p, h, n, KernelRoute::Direct, q)?.full_matrix(n)?;
    let split = assemble_kernel(p, h, n, KernelRoute::MasslessMinusSigma, q)?.full_matrix(n)?;
    Ok((direct - split).abs().max())
}

/// Lowest eigenpair of a symmetric matrix bounded below by `lower`, by
/// shifted inverse iteration with a Cholesky factorization.
pub fn lowest_eigenpair(b: &DMatrix<f64>, lower: f64) -> Result<(f64, DVector<f64>)> {
    let n = b.nrows();
    let solve = |shift: f64, start: DVector<f64>, tol: f64| -> Result<(f64, DVector<f64>)> {
        let shifted = b - DMatrix::identity(n, n) * shift;
        let chol = shifted
            .cholesky()
            .ok_or_else(|| numerical(format!("shift {shift} is not below the spectrum")))?;
        let mut x = start.normalize();
        let mut mu = x.dot(&(b * &x));
        for _ in 0..2000 {
            let y = chol.solve(&x);
            x = y.normalize();
            let next = x.dot(&(b * &x));
            if (next - mu).abs() <= tol * (1.0 + next.abs()) {
                return Ok((next, x));
            }
            mu = next;
        }
        Err(numerical("inverse iteration did not converge"))
    };
    let first_shift = lower - 1e-6 * (1.0 + lower.abs());
    let (mu, x) = solve(first_shift, DVector::from_element(n, 1.0), 1e-11)?;
    let refined_shift = mu - 1e-5 * (1.0 + mu.abs());
    match solve(refined_shift, x.clone(), 1e-15) {
        Ok(r) => Ok(r),
        Err(_) => Ok((mu, x)),
    }
}

/// Grid description carried by [`SpectralData`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
}

/// Ground-state data from [`spectral_solve_1d`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub params: ModelParams,
    pub lambda0: f64,
    /// Node radii `(i + ½)h`.
    pub r: Vec<f64>,
    /// `φ₀` at the nodes, positive, `∫_ℝ φ₀² = 1`.
    pub phi: Vec<f64>,
    pub grid: GridMeta,
    pub quad: QuadratureSpec,
}

impl SpectralData {
    /// Piecewise-linear interpolation of `φ₀(|x|)`; constant beyond the table ends.
    pub fn phi_at(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.r.len();
        if r <= self.r[0] {
            return self.phi[0];
        }
        if r >= self.r[n - 1] {
            return self.phi[n - 1];
        }
        let i = ((r / self.grid.h - 0.5).floor() as usize).min(n - 2);
        let t = (r - self.r[i]) / self.grid.h;
        self.phi[i] + t * (self.phi[i + 1] - self.phi[i])
    }

    /// `∫_ℝ φ₀²` by the node rule.
    pub fn norm(&self) -> f64 {
        2.0 * self.grid.h * self.phi.iter().map(|p| p * p).sum::<f64>()
    }

    /// `∫_ℝ |x|^p φ₀(x)² dx` by the node rule.
    pub fn moment(&self, p_exp: f64) -> f64 {
        2.0 * self.grid.h
            * self
                .r
                .iter()
                .zip(&self.phi)
                .map(|(r, f)| r.powf(p_exp) * f * f)
                .sum::<f64>()
    }

    /// Principal Dirichlet eigenvalue of `B_R` on this grid spacing, with one
    /// level of Richardson extrapolation.
    pub fn lambda_r(&self, radius: f64) -> Result<f64> {
        dirichlet_eigenvalue(&self.params, radius, self.grid.h, &self.quad)
    }
}

/// Lowest Dirichlet eigenvalue of `(−radius, radius)` on spacing `h`, no extrapolation.
pub fn dirichlet_eigenvalue_on_grid(p: &ModelParams, radius: f64, h: f64, q: &QuadratureSpec) -> Result<f64> {
    check_one_dim(p)?;
    if !(radius > 0.0) {
        return Err(domain(format!("radius must be positive, got {radius}")));
    }
    let n = ((radius / h).round() as usize).max(1);
    let kernel = assemble_kernel(p, h, 2 * n, KernelRoute::Direct, q)?;
    let (lambda, _) = lowest_eigenpair(&kernel.even_matrix(n)?, 0.0)?;
    Ok(lambda)
}

/// Dirichlet eigenvalue from spacings `h, h/2, h/4` with the observed order.
pub fn dirichlet_eigenvalue(p: &ModelParams, radius: f64, h: f64, q: &QuadratureSpec) -> Result<f64> {
    let l1 = dirichlet_eigenvalue_on_grid(p, radius, h, q)?;
    let l2 = dirichlet_eigenvalue_on_grid(p, radius, 0.5 * h, q)?;
    let l4 = dirichlet_eigenvalue_on_grid(p, radius, 0.25 * h, q)?;
    let ratio = (l1 - l2) / (l2 - l4);
    let order = if ratio.is_finite() && ratio > 1.0 {
        ratio.log2().clamp(0.25, 4.0)
    } else {
        1.0
    };
    Ok(l4 + (l4 - l2) / (2f64.powf(order) - 1.0))
}

/// Lowest eigenpair of `L_{m,α} − v(|x|)` on `[−L, L]` with `n` nodes.
///
/// Only even eigenfunctions are computed (the ground state of a radial
/// potential is even). The domain exterior acts as killing.
pub fn spectral_solve_1d(
    p: &ModelParams,
    potential: &RadialPotential,
    half_width: f64,
    n: usize,
) -> Result<SpectralData> {
    check_one_dim(p)?;
    if n < 256 || !n.is_multiple_of(2) {
        return Err(domain(format!("need an even node count n >= 256, got {n}")));
    }
    if let RadialPotential::Indicator(w) = potential {
        if half_width < 10.0 * w.a {
            return Err(domain(format!(
                "domain half-width {half_width} must be at least 10 well radii"
            )));
        }
    }
    let q = QuadratureSpec::default();
    let h = 2.0 * half_width / n as f64;
    let half = n / 2;
    let kernel = assemble_kernel(p, h, n, KernelRoute::Direct, &q)?;
    let mut b = kernel.even_matrix(half)?;
    let mut deepest = 0.0f64;
    for i in 0..half {
        let v = potential.cell_average(i as f64 * h, (i + 1) as f64 * h);
        deepest = deepest.max(v);
        b[(i, i)] -= v;
    }
    let (lambda0, vec) = lowest_eigenpair(&b, -deepest)?;
    if lambda0 >= 0.0 {
        return Err(Error::Numerical(format!(
            "no bound state: lowest eigenvalue {lambda0} is not negative"
        )));
    }
    let sign = if vec.sum() < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / (2.0 * h * vec.norm_squared()).sqrt();
    let phi: Vec<f64> = vec.iter().map(|x| x * scale).collect();
    let r: Vec<f64> = (0..half).map(|i| (i as f64 + 0.5) * h).collect();
    Ok(SpectralData {
        params: *p,
        lambda0,
        r,
        phi,
        grid: GridMeta {
            half_width,
            n,
            h,
        },
        quad: q,
    })
}
