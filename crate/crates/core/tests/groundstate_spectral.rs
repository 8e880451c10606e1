use fracwell::groundstate::*;
use fracwell::levy::{jump_density, Interval, ModelParams};
use fracwell::oracles::{spectral_solve_1d, SpectralData};
use fracwell::potential::{RadialPotential, WellSpec};
use fracwell::sampler::{Process, StepConfig};
use fracwell::specfun::QuadratureSpec;
use fracwell::stopping::McRun;

fn cauchy_well() -> (ModelParams, WellSpec, SpectralData, f64) {
    let p = ModelParams::new(1, 1.0, 0.0).unwrap();
    let well = WellSpec::new(1.0, 5.0).unwrap();
    let sd = spectral_solve_1d(&p, &RadialPotential::from(well), 16.0, 2048).unwrap();
    let la = sd.lambda_r(1.0).unwrap();
    (p, well, sd, la)
}

#[test]
fn fitted_band_contains_spectral_profile() {
    let (p, well, sd, la) = cauchy_well();
    assert!(gap_inequality_check(&well, -sd.lambda0, la));
    let meta = ProfileMeta::new(p, well, -sd.lambda0, la).unwrap();
    let pa = sd.phi_at(1.0);
    let refs: Vec<(f64, f64)> = (0..=10)
        .map(|i| 0.1 * i as f64)
        .chain([1.02, 1.5, 2.0, 3.0, 4.0, 5.0])
        .map(|r| (r, sd.phi_at(r) / pa))
        .collect();
    let band = ProfileBand::fit(meta, &refs, 1.1).unwrap();
    for (r, f) in sd.r.iter().zip(&sd.phi).filter(|(r, _)| **r <= 5.0) {
        assert!(band.contains(*r, f / pa).unwrap(), "r = {r}");
    }
}

#[test]
fn normalization_within_factor_three() {
    let (p, well, sd, la) = cauchy_well();
    let band = phi_at_a(&p, &well, -sd.lambda0, la, 1.0, &QuadratureSpec::default()).unwrap();
    let ratio = band.lo / sd.phi_at(1.0);
    assert!(ratio > 1.0 / 3.0 && ratio < 3.0, "{ratio}");
}

#[test]
fn first_moment_within_bounds() {
    let (p, well, sd, la) = cauchy_well();
    let q = QuadratureSpec::default();
    let phi = phi_at_a(&p, &well, -sd.lambda0, la, 1.0, &q).unwrap();
    let b = moment_bounds(&p, &well, -sd.lambda0, la, &phi, 1.0, 0.5, 5.0, &q).unwrap();
    assert!(b.contains(sd.moment(1.0)), "{b:?} vs {}", sd.moment(1.0));
}

#[test]
fn outside_ratio_tracks_jump_density() {
    let (p, well, sd, _) = cauchy_well();
    let run = McRun::new(4_000, 21, 4).unwrap();
    let cfg = StepConfig::new(2e-3, 10.0).unwrap();
    let ratios: Vec<f64> = [1.2, 2.0, 3.0, 5.0]
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let e = fk_ratio_outside(&Process::Levy(p), &well, -sd.lambda0, &[x], &run.with_seed(21 + i as u64), &cfg)
                .unwrap();
            e.value / jump_density(&p, x).unwrap()
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 10.0, "{ratios:?}");
}

#[test]
fn inside_profile_is_monotone() {
    let (p, well, sd, la) = cauchy_well();
    let run = McRun::new(4_000, 31, 4).unwrap();
    let cfg = StepConfig::new(1e-3, 50.0).unwrap();
    let est: Vec<_> = [0.0, 0.5, 0.9]
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            fk_ratio_inside(&Process::Levy(p), &well, -sd.lambda0, &[x], &run.with_seed(31 + i as u64), &cfg, la).unwrap()
        })
        .collect();
    for w in est.windows(2) {
        assert!(w[0].value >= w[1].value - 3.0 * w[0].stderr.hypot(w[1].stderr));
    }
}

#[test]
fn decaying_band_contains_spectral_ratio() {
    let p = ModelParams::new(1, 1.0, 0.0).unwrap();
    let pot = RadialPotential::exponential(2.0, 1.0).unwrap();
    let sd = spectral_solve_1d(&p, &pot, 16.0, 2048).unwrap();
    let l0 = -sd.lambda0;
    let lam1 = sd.lambda_r(1.0).unwrap();
    let levels = DecayLevels { gamma: 1.2, gamma1: 0.5, gamma2: 1.2 };
    let rg = level_set_radius(&pot, levels.gamma).unwrap();
    let run = McRun::new(20_000, 41, 4).unwrap();
    let cfg = StepConfig::new(1e-3, 20.0).unwrap();
    let lam = move |r: f64| Ok(lam1 / r);
    let rep = decaying_bounds(&Process::Levy(p), &pot, l0, &levels, &[0.0], &run, &cfg, &lam).unwrap();
    let band = Interval::new(rep.lower.value / 2.0, rep.upper.value * 2.0).unwrap();
    assert!(band.contains(sd.phi_at(0.0) / sd.phi_at(rg)), "{rep:?}");
}
