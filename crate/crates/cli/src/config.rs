//! Command-line flags, `key=value` config files and the resolved run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;
use crate::output::Format;
use crate::verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "fracwell", version, about = "Ground states of nonlocal Schrödinger operators with potential wells")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jump density, massless density, sigma density and tail mass on a radius grid.
    Density,
    /// Same columns as `density` on a small-radius grid.
    Tailmass,
    /// Raw stopped paths for the exit from B_a.
    Sample,
    /// Survival probability P^x(tau_a > t).
    Survival,
    /// Exit-time moment generating function E^x[exp(lambda tau_a)].
    ExitMgf,
    /// Hitting-time Laplace transform E^x[exp(-lambda T_a)].
    HitLaplace,
    /// Ground-state estimators and reference solutions.
    Groundstate {
        #[command(subcommand)]
        which: Groundstate,
    },
    /// Run one verification suite; exit code 3 on failure.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Run every verification suite and emit a combined table.
    Report,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Groundstate {
    /// Feynman-Kac ratios at the points of --x with the profile band.
    Mc,
    /// Deterministic one-dimensional eigen-solve.
    Spectral,
    /// Brownian closed-form ground state (d = 1 or 3).
    Classical,
    /// Closed-form profile band.
    Profile,
    /// Moment bounds for the orders in --p.
    Moments,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub d: Option<u32>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Well (or ball) radius.
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Well depth.
    #[arg(long, global = true)]
    pub v: Option<f64>,
    /// Comma-separated radii or first coordinates of start points.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// |lambda_0|, overriding the built-in solve.
    #[arg(long, global = true)]
    pub lambda0: Option<f64>,
    /// Principal Dirichlet eigenvalue of B_a, overriding the built-in solve.
    #[arg(long = "lambda-r", global = true)]
    pub lambda_r: Option<f64>,
    /// Survival time.
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Comma-separated moment orders.
    #[arg(long, global = true, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub streams: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// SVG output path.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// File of `key=value` lines; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Simulate Brownian motion (generator Δ/2) instead of the Lévy process.
    #[arg(long, global = true)]
    pub brownian: bool,
    /// Multiplicative slack of profile and moment bands.
    #[arg(long, global = true)]
    pub slack: Option<f64>,
    /// Node count of the spectral grid.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Half-width of the spectral domain.
    #[arg(long = "half-width", global = true)]
    pub half_width: Option<f64>,
    /// delta of the moment upper bound (v > lambda_a + delta).
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Path-budget multiplier of verification suites.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad_value(key, v)))
        .collect()
}

fn bad_value(key: &str, v: &str) -> CliError {
    CliError::Usage(format!("invalid value '{v}' for '{key}'"))
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse::<T>().map_err(|_| bad_value(key, v))
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

impl Flags {
    /// Fill flags not given on the command line from config entries.
    pub fn merge_config(&mut self, cfg: &BTreeMap<String, String>) -> Result<(), CliError> {
        macro_rules! fill {
            ($field:ident, $key:expr) => {
                if self.$field.is_none() {
                    if let Some(v) = cfg.get($key) {
                        self.$field = Some(parse($key, v)?);
                    }
                }
            };
        }
        for k in cfg.keys() {
            const KNOWN: [&str; 24] = [
                "d", "alpha", "m", "a", "v", "x", "lambda", "lambda0", "lambda-r", "t", "p", "n", "h", "tmax",
                "seed", "streams", "out", "format", "plot", "brownian", "slack", "grid", "half-width", "delta",
            ];
            if !KNOWN.contains(&k.as_str()) && k != "scale" {
                return Err(CliError::Usage(format!("unknown config key '{k}'")));
            }
        }
        fill!(d, "d");
        fill!(alpha, "alpha");
        fill!(m, "m");
        fill!(a, "a");
        fill!(v, "v");
        fill!(lambda, "lambda");
        fill!(lambda0, "lambda0");
        fill!(lambda_r, "lambda-r");
        fill!(t, "t");
        fill!(n, "n");
        fill!(h, "h");
        fill!(tmax, "tmax");
        fill!(seed, "seed");
        fill!(streams, "streams");
        fill!(out, "out");
        fill!(slack, "slack");
        fill!(grid, "grid");
        fill!(half_width, "half-width");
        fill!(delta, "delta");
        fill!(scale, "scale");
        if self.x.is_none() {
            if let Some(v) = cfg.get("x") {
                self.x = Some(parse_list("x", v)?);
            }
        }
        if self.p.is_none() {
            if let Some(v) = cfg.get("p") {
                self.p = Some(parse_list("p", v)?);
            }
        }
        if self.format.is_none() {
            if let Some(v) = cfg.get("format") {
                self.format = Some(match v.as_str() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad_value("format", v)),
                });
            }
        }
        if self.plot.is_none() {
            if let Some(v) = cfg.get("plot") {
                self.plot = Some(PathBuf::from(v));
            }
        }
        if !self.brownian {
            if let Some(v) = cfg.get("brownian") {
                self.brownian = parse("brownian", v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelConfig {
    pub d: u32,
    pub alpha: f64,
    pub m: f64,
    pub brownian: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WellConfig {
    pub a: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McConfig {
    pub n: usize,
    pub h: f64,
    pub t_max: f64,
    pub seed: u64,
    pub streams: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputConfig {
    pub format: Format,
    pub path: String,
    pub plot: Option<PathBuf>,
}

/// Fully resolved settings of one invocation, echoed in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub potential: WellConfig,
    pub mc: McConfig,
    pub output: OutputConfig,
    pub x: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub lambda0: Option<f64>,
    pub lambda_r: Option<f64>,
    pub t: f64,
    pub p: Option<Vec<f64>>,
    pub slack: f64,
    pub grid: usize,
    pub half_width: f64,
    pub delta: Option<f64>,
    pub scale: f64,
}

impl RunConfig {
    /// Resolve flags, then config file, then defaults; `FW_SEED` overrides any seed.
    pub fn resolve(mut flags: Flags, env_seed: Option<String>) -> Result<Self, CliError> {
        if let Some(path) = flags.config.clone() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            flags.merge_config(&parse_config(&text)?)?;
        }
        let seed = match env_seed {
            Some(s) => parse("FW_SEED", &s)?,
            None => flags.seed.unwrap_or(1),
        };
        let streams = flags.streams.unwrap_or(8);
        if streams == 0 {
            return Err(CliError::Usage("--streams must be at least 1".into()));
        }
        let a = flags.a.unwrap_or(1.0);
        Ok(Self {
            model: ModelConfig {
                d: flags.d.unwrap_or(1),
                alpha: flags.alpha.unwrap_or(1.0),
                m: flags.m.unwrap_or(0.0),
                brownian: flags.brownian,
            },
            potential: WellConfig {
                a,
                v: flags.v.unwrap_or(5.0),
            },
            mc: McConfig {
                n: flags.n.unwrap_or(10_000),
                h: flags.h.unwrap_or(1e-3),
                t_max: flags.tmax.unwrap_or(50.0),
                seed,
                streams,
            },
            output: OutputConfig {
                format: flags.format.unwrap_or(Format::Csv),
                path: flags.out.unwrap_or_else(|| "-".into()),
                plot: flags.plot,
            },
            x: flags.x,
            lambda: flags.lambda,
            lambda0: flags.lambda0,
            lambda_r: flags.lambda_r,
            t: flags.t.unwrap_or(1.0),
            p: flags.p,
            slack: flags.slack.unwrap_or(2.0),
            grid: flags.grid.unwrap_or(2048),
            half_width: flags.half_width.unwrap_or((10.0 * a).max(16.0)),
            delta: flags.delta,
            scale: flags.scale.unwrap_or(1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_fill_missing_flags_only() {
        let cfg = parse_config("# run\nalpha = 1.5\nx=0,0.5\nseed=9\n\nhalf_width=20\n").unwrap();
        let mut f = Flags {
            alpha: Some(0.5),
            ..Flags::default()
        };
        f.merge_config(&cfg).unwrap();
        assert_eq!(f.alpha, Some(0.5));
        assert_eq!(f.x, Some(vec![0.0, 0.5]));
        assert_eq!(f.seed, Some(9));
        assert_eq!(f.half_width, Some(20.0));
    }

    #[test]
    fn env_seed_wins() {
        let f = Flags {
            seed: Some(3),
            ..Flags::default()
        };
        assert_eq!(RunConfig::resolve(f.clone(), Some("77".into())).unwrap().mc.seed, 77);
        assert_eq!(RunConfig::resolve(f, None).unwrap().mc.seed, 3);
        assert!(RunConfig::resolve(Flags::default(), Some("x".into())).is_err());
    }

    #[test]
    fn bad_config_lines_are_usage_errors() {
        assert!(parse_config("alpha").is_err());
        let mut f = Flags::default();
        assert!(f.merge_config(&parse_config("colour=red").unwrap()).is_err());
        assert!(f.merge_config(&parse_config("n=many").unwrap()).is_err());
    }
}
