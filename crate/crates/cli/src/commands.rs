//! Subcommand implementations.

use std::f64::consts::PI;

use serde_json::{json, Value};

use fracwell::groundstate::{
    fk_ratio, moment_bounds, phi_at_a, profile_shape, Branch, ProfileBand, ProfileMeta,
};
use fracwell::levy::{jump_density, sigma_density, tail_mass, ModelParams};
use fracwell::oracles::{
    classical_groundstate_1d, classical_groundstate_radial, dirichlet_eigenvalue, spectral_solve_1d,
};
use fracwell::potential::{RadialPotential, WellSpec};
use fracwell::sampler::{Process, Region, StepConfig, Walker};
use fracwell::specfun::QuadratureSpec;
use fracwell::stopping::{
    estimate_exit_mgf, estimate_hitting_laplace, estimate_survival, Estimate, McRun,
};

use crate::config::{Command, Groundstate, RunConfig};
use crate::error::CliError;
use crate::output::{write_text, Cell, Table};
use crate::plot::{Plot, Series, Style};
use crate::verify::{run_suite, Suite, SuiteOptions};

/// Output of a command: the table plus an optional figure.
pub struct Outcome {
    pub table: Table,
    pub plot: Option<Plot>,
    /// Set when an estimate diverged; the table is still written.
    pub diverged: Option<String>,
    /// Set when a verification check failed.
    pub failed: Option<String>,
}

impl Outcome {
    fn table(table: Table) -> Self {
        Self {
            table,
            plot: None,
            diverged: None,
            failed: None,
        }
    }

    fn with_plot(mut self, plot: Plot) -> Self {
        self.plot = Some(plot);
        self
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    let outcome = match cmd {
        Command::Density => density(cfg, default_grid(cfg, 1e-2, 1e2, 41))?,
        Command::Tailmass => density(cfg, default_grid(cfg, 1e-3, 1.0, 31))?,
        Command::Sample => sample(cfg)?,
        Command::Survival => survival(cfg)?,
        Command::ExitMgf => exit_mgf(cfg)?,
        Command::HitLaplace => hit_laplace(cfg)?,
        Command::Groundstate { which } => match which {
            Groundstate::Mc => groundstate_mc(cfg)?,
            Groundstate::Spectral => groundstate_spectral(cfg)?,
            Groundstate::Classical => groundstate_classical(cfg)?,
            Groundstate::Profile => groundstate_profile(cfg)?,
            Groundstate::Moments => groundstate_moments(cfg)?,
        },
        Command::Verify { suite } => verify(cfg, &[*suite])?,
        Command::Report => verify(cfg, &Suite::ALL)?,
    };
    let meta = serde_json::to_value(cfg).unwrap_or(Value::Null);
    write_text(&cfg.output.path, &outcome.table.render(cfg.output.format, meta))?;
    if let (Some(path), Some(plot)) = (&cfg.output.plot, &outcome.plot) {
        std::fs::write(path, plot.to_svg())?;
    }
    if let Some(msg) = outcome.failed {
        return Err(CliError::Verify(msg));
    }
    if let Some(msg) = outcome.diverged {
        return Err(CliError::Diverged(msg));
    }
    Ok(())
}

fn params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(cfg.model.d, cfg.model.alpha, cfg.model.m)?)
}

fn process(cfg: &RunConfig) -> Result<Process, CliError> {
    if cfg.model.brownian {
        if cfg.model.d == 0 {
            return Err(CliError::Usage("--d must be at least 1".into()));
        }
        Ok(Process::Brownian { d: cfg.model.d })
    } else {
        Ok(Process::Levy(params(cfg)?))
    }
}

fn well(cfg: &RunConfig) -> Result<WellSpec, CliError> {
    Ok(WellSpec::new(cfg.potential.a, cfg.potential.v)?)
}

fn run(cfg: &RunConfig) -> Result<McRun, CliError> {
    Ok(McRun::new(cfg.mc.n, cfg.mc.seed, cfg.mc.streams)?)
}

fn step(cfg: &RunConfig) -> Result<StepConfig, CliError> {
    Ok(StepConfig::new(cfg.mc.h, cfg.mc.t_max)?)
}

fn point(cfg: &RunConfig, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; cfg.model.d as usize];
    p[0] = x;
    p
}

fn require(v: Option<f64>, flag: &str, cmd: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag} for {cmd}")))
}

fn default_grid(cfg: &RunConfig, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    cfg.x.clone().unwrap_or_else(|| {
        (0..n)
            .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
            .collect()
    })
}

fn xs_or(cfg: &RunConfig, default: &[f64]) -> Vec<f64> {
    let a = cfg.potential.a;
    cfg.x.clone().unwrap_or_else(|| default.iter().map(|f| f * a).collect())
}

/// First zero `j_{d/2−1,1}` of the Bessel function for `d ≤ 3`.
fn brownian_ball_eigenvalue(d: u32, r: f64) -> Result<f64, CliError> {
    let zero = match d {
        1 => PI / 2.0,
        2 => 2.404_825_557_695_773,
        3 => PI,
        _ => {
            return Err(CliError::Usage(format!(
                "no built-in Dirichlet eigenvalue for d = {d}; pass --lambda-r"
            )))
        }
    };
    Ok(zero * zero / (2.0 * r * r))
}

/// `λ̂_R` for the ball of radius `r`: `--lambda-r` (given at radius `a`, rescaled
/// for scale-invariant processes), a closed form for Brownian motion, or the
/// one-dimensional spectral solve.
pub fn lambda_hat(cfg: &RunConfig, r: f64) -> Result<f64, CliError> {
    let a = cfg.potential.a;
    if let Some(l) = cfg.lambda_r {
        if r == a {
            return Ok(l);
        }
        if cfg.model.brownian {
            return Ok(l * (a / r).powi(2));
        }
        if cfg.model.m == 0.0 {
            return Ok(l * (a / r).powf(cfg.model.alpha));
        }
        return Err(CliError::Usage("--lambda-r applies only to the radius --a for m > 0".into()));
    }
    if cfg.model.brownian {
        return brownian_ball_eigenvalue(cfg.model.d, r);
    }
    let p = params(cfg)?;
    if p.d != 1 {
        return Err(CliError::Usage(format!(
            "no built-in Dirichlet eigenvalue for d = {}; pass --lambda-r",
            p.d
        )));
    }
    Ok(dirichlet_eigenvalue(&p, r, r / 64.0, &QuadratureSpec::default())?)
}

/// `(|λ₀|, λ_a)` from flags, the classical oracle or the spectral solve.
pub fn ground_energies(cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    let w = well(cfg)?;
    let la = lambda_hat(cfg, w.a)?;
    if let Some(l0) = cfg.lambda0 {
        return Ok((l0, la));
    }
    let d = cfg.model.d;
    if cfg.model.brownian {
        return match d {
            1 => Ok((-classical_groundstate_1d(w.a, w.v)?.lambda0, la)),
            3 => match classical_groundstate_radial(w.a, w.v, 3)? {
                Some(g) => Ok((-g.lambda0, la)),
                None => Err(CliError::Core(fracwell::Error::Numerical("the well has no bound state".into()))),
            },
            _ => Err(CliError::Usage(format!("no built-in ground state for d = {d}; pass --lambda0"))),
        };
    }
    if d != 1 {
        return Err(CliError::Usage(format!("no built-in ground state for d = {d}; pass --lambda0")));
    }
    let sd = spectral_solve_1d(&params(cfg)?, &RadialPotential::from(w), cfg.half_width, cfg.grid)?;
    Ok((-sd.lambda0, la))
}

fn estimate_row(x: f64, e: &Estimate) -> Vec<Cell> {
    vec![
        Cell::Float(x),
        Cell::Float(e.value),
        Cell::Float(e.stderr),
        Cell::Int(e.n as i64),
        Cell::Float(e.truncated_fraction),
        Cell::Float(e.tail_bound),
        Cell::Bool(e.diverged),
    ]
}

const ESTIMATE_COLUMNS: [&str; 7] = ["x", "value", "stderr", "n", "truncated_fraction", "tail_bound", "diverged"];

fn estimate_plot(title: &str, rows: &[(f64, Estimate)]) -> Plot {
    let mut plot = Plot::new(title, "x", "estimate");
    plot.add(Series::new("estimate", rows.iter().map(|(x, e)| (*x, e.value)).collect(), Style::Dots));
    plot.add(Series::new(
        "+2 stderr",
        rows.iter().map(|(x, e)| (*x, e.value + 2.0 * e.stderr)).collect(),
        Style::Dashed,
    ));
    plot.add(Series::new(
        "-2 stderr",
        rows.iter().map(|(x, e)| (*x, e.value - 2.0 * e.stderr)).collect(),
        Style::Dashed,
    ));
    plot
}

fn estimate_outcome(title: &str, rows: Vec<(f64, Estimate)>) -> Outcome {
    let mut table = Table::new(&ESTIMATE_COLUMNS);
    for (x, e) in &rows {
        table.push(estimate_row(*x, e));
    }
    let diverged: Vec<String> = rows.iter().filter(|(_, e)| e.diverged).map(|(x, _)| x.to_string()).collect();
    let plot = estimate_plot(title, &rows);
    let mut out = Outcome::table(table).with_plot(plot);
    if !diverged.is_empty() {
        out.diverged = Some(format!("estimate diverged at x = {}", diverged.join(", ")));
    }
    out
}

fn density(cfg: &RunConfig, grid: Vec<f64>) -> Result<Outcome, CliError> {
    let p = params(cfg)?;
    let p0 = ModelParams::new(p.d, p.alpha, 0.0)?;
    let q = QuadratureSpec::default();
    let mut table = Table::new(&["r", "j_m", "j_0", "sigma", "tail_mass"]);
    let mut jm = Vec::new();
    let mut j0 = Vec::new();
    for &r in &grid {
        let a = jump_density(&p, r)?;
        let b = jump_density(&p0, r)?;
        let s = if p.is_massless() { 0.0 } else { sigma_density(&p, r, &q)? };
        let t = tail_mass(&p, r, &q)?;
        table.push(vec![Cell::Float(r), Cell::Float(a), Cell::Float(b), Cell::Float(s), Cell::Float(t)]);
        jm.push((r, a));
        j0.push((r, b));
    }
    let mut plot = Plot::new("jump densities", "r", "density").log_axes(true, true);
    plot.add(Series::new("j_m", jm, Style::Line));
    plot.add(Series::new("j_0", j0, Style::Dashed));
    Ok(Outcome::table(table).with_plot(plot))
}

fn sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let x0 = point(cfg, cfg.x.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0));
    let walker = Walker::new(process(cfg)?, Region::ExitBall(cfg.potential.a), step(cfg)?)?;
    let n = cfg.mc.n;
    let streams = cfg.mc.streams;
    let samples = walker.simulate(&x0, n, cfg.mc.seed, streams)?;
    let mut table = Table::new(&["stream", "path_id", "tau_hat", "occupation", "x_after_norm", "truncated"]);
    let mut taus = Vec::new();
    for k in 0..streams {
        let lo = k * n / streams;
        let hi = (k + 1) * n / streams;
        for (j, s) in samples[lo..hi].iter().enumerate() {
            table.push(vec![
                Cell::Int(k as i64),
                Cell::Int(j as i64),
                Cell::Float(s.tau_hat),
                Cell::Float(s.occupation),
                Cell::Float(s.x_after.iter().map(|c| c * c).sum::<f64>().sqrt()),
                Cell::Bool(s.truncated),
            ]);
            taus.push(s.tau_hat);
        }
    }
    taus.sort_by(f64::total_cmp);
    let m = taus.len() as f64;
    let survival: Vec<(f64, f64)> = taus.iter().enumerate().map(|(i, t)| (*t, 1.0 - (i + 1) as f64 / m)).collect();
    let mut plot = Plot::new("empirical survival", "t", "P(tau > t)");
    plot.add(Series::new("survival", survival, Style::Line));
    Ok(Outcome::table(table).with_plot(plot))
}

fn survival(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pr = process(cfg)?;
    let (mc, sc) = (run(cfg)?, step(cfg)?);
    let rows = xs_or(cfg, &[0.0, 0.5, 0.9])
        .into_iter()
        .map(|x| Ok((x, estimate_survival(&pr, cfg.potential.a, &point(cfg, x), cfg.t, &mc, &sc)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(estimate_outcome("survival probability", rows))
}

fn exit_mgf(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lambda = require(cfg.lambda, "lambda", "exit-mgf")?;
    let pr = process(cfg)?;
    let (mc, sc) = (run(cfg)?, step(cfg)?);
    let lr = lambda_hat(cfg, cfg.potential.a)?;
    let rows = xs_or(cfg, &[0.0, 0.5, 0.9])
        .into_iter()
        .map(|x| Ok((x, estimate_exit_mgf(&pr, cfg.potential.a, &point(cfg, x), lambda, &mc, &sc, lr)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(estimate_outcome("exit-time MGF", rows))
}

fn hit_laplace(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lambda = require(cfg.lambda, "lambda", "hit-laplace")?;
    let pr = process(cfg)?;
    let (mc, sc) = (run(cfg)?, step(cfg)?);
    let rows = xs_or(cfg, &[1.2, 2.0, 3.0, 5.0])
        .into_iter()
        .map(|x| Ok((x, estimate_hitting_laplace(&pr, cfg.potential.a, &point(cfg, x), lambda, &mc, &sc)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(estimate_outcome("hitting-time Laplace transform", rows))
}

fn profile_band(cfg: &RunConfig, l0: f64, la: f64) -> Result<Option<ProfileBand>, CliError> {
    if cfg.model.brownian {
        return Ok(None);
    }
    let meta = ProfileMeta::new(params(cfg)?, well(cfg)?, l0, la)?;
    Ok(Some(ProfileBand::with_slack(meta, cfg.slack)?))
}

fn groundstate_mc(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = well(cfg)?;
    let (l0, la) = ground_energies(cfg)?;
    let pr = process(cfg)?;
    let (mc, sc) = (run(cfg)?, step(cfg)?);
    let band = profile_band(cfg, l0, la)?;
    let mut table = Table::new(&["r", "estimate", "stderr", "branch", "profile_lower", "profile_upper"]);
    let mut est = Vec::new();
    let mut diverged = Vec::new();
    for (i, x) in xs_or(cfg, &[0.0, 0.5, 0.9, 1.0, 1.5, 2.5]).into_iter().enumerate() {
        let run_i = mc.with_seed(mc.seed.wrapping_add(i as u64));
        let (branch, e) = fk_ratio(&pr, &w, l0, &point(cfg, x), &run_i, &sc, la)?;
        let r = x.abs();
        let (lo, hi) = match &band {
            Some(b) => (b.lower(r)?, b.upper(r)?),
            None => (f64::NAN, f64::NAN),
        };
        if e.diverged {
            diverged.push(x.to_string());
        }
        table.push(vec![
            Cell::Float(x),
            Cell::Float(e.value),
            Cell::Float(e.stderr),
            Cell::Text(branch.name().into()),
            Cell::Float(lo),
            Cell::Float(hi),
        ]);
        est.push((r, e.value, lo, hi));
    }
    let mut plot = Plot::new("Feynman-Kac ratios", "|x|", "phi0(x)/phi0(a)").log_axes(false, true);
    plot.add(Series::new("estimate", est.iter().map(|e| (e.0, e.1)).collect(), Style::Dots));
    if band.is_some() {
        let mut sorted = est.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        plot.add(Series::new("band lower", sorted.iter().map(|e| (e.0, e.2)).collect(), Style::Dashed));
        plot.add(Series::new("band upper", sorted.iter().map(|e| (e.0, e.3)).collect(), Style::Dashed));
    }
    let mut out = Outcome::table(table).with_plot(plot);
    if !diverged.is_empty() {
        out.diverged = Some(format!("inside estimate diverged at x = {}", diverged.join(", ")));
    }
    Ok(out)
}

fn groundstate_spectral(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.model.brownian {
        return Err(CliError::Usage("the spectral solver covers the Lévy process only".into()));
    }
    let p = params(cfg)?;
    let w = well(cfg)?;
    let sd = spectral_solve_1d(&p, &RadialPotential::from(w), cfg.half_width, cfg.grid)?;
    let la = sd.lambda_r(w.a)?;
    let header = json!({
        "lambda0": sd.lambda0,
        "lambdaR": { "radius": w.a, "value": la },
        "grid": sd.grid,
    });
    let mut table = Table::new(&["r", "phi0"]).with_header(header);
    let mut pts = Vec::new();
    for (r, f) in sd.r.iter().zip(&sd.phi) {
        table.push(vec![Cell::Float(*r), Cell::Float(*f)]);
        if *r <= 5.0 * w.a {
            pts.push((*r, *f));
        }
    }
    let mut plot = Plot::new("spectral ground state", "r", "phi0");
    plot.add(Series::new("phi0", pts, Style::Line));
    Ok(Outcome::table(table).with_plot(plot))
}

fn groundstate_classical(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = well(cfg)?;
    let grid = default_grid(cfg, 1.0, 1.0, 2);
    let grid = if cfg.x.is_some() { grid } else { (0..=200).map(|i| 0.025 * w.a * i as f64).collect() };
    let (lambda0, values): (f64, Vec<f64>) = match cfg.model.d {
        1 => {
            let g = classical_groundstate_1d(w.a, w.v)?;
            (g.lambda0, grid.iter().map(|&r| g.eval(r)).collect())
        }
        3 => {
            let g = classical_groundstate_radial(w.a, w.v, 3)?
                .ok_or_else(|| CliError::Core(fracwell::Error::Numerical("the well has no bound state".into())))?;
            let vals = grid.iter().map(|&r| g.eval(r)).collect::<fracwell::Result<Vec<_>>>()?;
            (g.lambda0, vals)
        }
        d => return Err(CliError::Usage(format!("classical ground state is available for d = 1 or 3, got {d}"))),
    };
    let header = json!({
        "lambda0": lambda0,
        "lambdaR": { "radius": w.a, "value": brownian_ball_eigenvalue(cfg.model.d, w.a)? },
        "grid": { "points": grid.len() },
    });
    let mut table = Table::new(&["r", "phi0"]).with_header(header);
    for (r, f) in grid.iter().zip(&values) {
        table.push(vec![Cell::Float(*r), Cell::Float(*f)]);
    }
    let mut plot = Plot::new("classical ground state", "r", "phi0");
    plot.add(Series::new("phi0", grid.iter().cloned().zip(values).collect(), Style::Line));
    Ok(Outcome::table(table).with_plot(plot))
}

fn groundstate_profile(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.model.brownian {
        return Err(CliError::Usage("the profile band is defined for the Lévy process".into()));
    }
    let (l0, la) = ground_energies(cfg)?;
    let band = profile_band(cfg, l0, la)?.expect("Lévy process");
    let a = cfg.potential.a;
    let grid = cfg.x.clone().unwrap_or_else(|| (0..=100).map(|i| 0.05 * a * i as f64).collect());
    let mut table = Table::new(&["r", "shape", "lower", "upper", "branch"]);
    let mut s = Vec::new();
    for &r in &grid {
        let shape = profile_shape(&band.meta, r)?;
        let (lo, hi) = (band.lower(r)?, band.upper(r)?);
        table.push(vec![
            Cell::Float(r),
            Cell::Float(shape),
            Cell::Float(lo),
            Cell::Float(hi),
            Cell::Text(Branch::of(r.abs(), a).name().into()),
        ]);
        s.push((r, shape, lo, hi));
    }
    let mut plot = Plot::new("profile band", "r", "phi0(r)/phi0(a)").log_axes(false, true);
    plot.add(Series::new("shape", s.iter().map(|v| (v.0, v.1)).collect(), Style::Line));
    plot.add(Series::new("lower", s.iter().map(|v| (v.0, v.2)).collect(), Style::Dashed));
    plot.add(Series::new("upper", s.iter().map(|v| (v.0, v.3)).collect(), Style::Dashed));
    Ok(Outcome::table(table).with_plot(plot))
}

fn groundstate_moments(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.model.brownian {
        return Err(CliError::Usage("moment bounds are defined for the Lévy process".into()));
    }
    let p = params(cfg)?;
    let w = well(cfg)?;
    let (l0, la) = ground_energies(cfg)?;
    let q = QuadratureSpec::default();
    let phi = phi_at_a(&p, &w, l0, la, 1.0, &q)?;
    let delta = match cfg.delta {
        Some(d) => d,
        None if w.v > la => 0.5 * (w.v - la),
        None => {
            return Err(CliError::Core(fracwell::Error::Domain(format!(
                "v > lambda_a + delta fails for every delta > 0: v = {}, lambda_a = {la}",
                w.v
            ))))
        }
    };
    let orders = cfg.p.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    let mut table = Table::new(&["p", "lower", "upper", "diverged"]);
    for pe in orders {
        let b = moment_bounds(&p, &w, l0, la, &phi, pe, delta, cfg.slack, &q)?;
        table.push(vec![Cell::Float(pe), Cell::Float(b.lower), Cell::Float(b.upper), Cell::Bool(b.diverged)]);
    }
    Ok(Outcome::table(table))
}

fn verify(cfg: &RunConfig, suites: &[Suite]) -> Result<Outcome, CliError> {
    let opts = SuiteOptions {
        seed: cfg.mc.seed,
        streams: cfg.mc.streams,
        scale: cfg.scale,
    };
    let mut table = Table::new(&["suite", "check", "value", "lower", "upper", "pass"]);
    let mut failed = Vec::new();
    for s in suites {
        let rep = run_suite(*s, &opts)?;
        if !rep.passed() {
            failed.push(s.name());
        }
        table.rows.extend(rep.table().rows);
    }
    let mut out = Outcome::table(table);
    if !failed.is_empty() {
        out.failed = Some(failed.join(", "));
    }
    Ok(out)
}
