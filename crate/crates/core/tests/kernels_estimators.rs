use fracwell::levy::*;
use fracwell::oracles::{brownian_exit_mgf, brownian_hit_laplace};
use fracwell::sampler::{Process, StepConfig};
use fracwell::specfun::QuadratureSpec;
use fracwell::stopping::*;

#[test]
fn decomposition_identity_spot_checks() {
    let q = QuadratureSpec::default();
    for (d, alpha, m) in [(1, 0.5, 1.0), (2, 1.0, 2.0), (3, 1.5, 0.5)] {
        let p = ModelParams::new(d, alpha, m).unwrap();
        let p0 = ModelParams::new(d, alpha, 0.0).unwrap();
        for r in [0.01, 0.3, 1.0, 7.0, 40.0] {
            let lhs = jump_density(&p0, r).unwrap();
            let rhs = jump_density(&p, r).unwrap() + sigma_density(&p, r, &q).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * lhs.max(1.0), "{d} {alpha} {m} {r}");
        }
        let mass = total_sigma_mass(&p, &q).unwrap();
        assert!((mass / m - 1.0).abs() < 1e-4);
    }
}

#[test]
fn brownian_exit_and_hitting_transforms() {
    let pr = Process::Brownian { d: 1 };
    let run = McRun::new(20_000, 5, 4).unwrap();
    let cfg = StepConfig::new(1e-3, 30.0).unwrap();
    let u = 0.6;
    let e = estimate_exit_mgf(&pr, 1.0, &[0.2], u, &run, &cfg, std::f64::consts::PI.powi(2) / 8.0).unwrap();
    let want = brownian_exit_mgf(1.0, 0.2, u).unwrap();
    assert!((e.value - want).abs() < (3.0 * e.stderr).max(0.02 * want), "{e:?} {want}");
    let h = estimate_hitting_laplace(&pr, 1.0, &[1.5], 2.0, &run, &cfg).unwrap();
    let want = brownian_hit_laplace(0.5, 2.0).unwrap();
    assert!((h.value - want).abs() < (3.0 * h.stderr).max(0.02 * want), "{h:?} {want}");
}

#[test]
fn survival_is_non_increasing_in_time() {
    let p = ModelParams::new(1, 1.5, 0.0).unwrap();
    let run = McRun::new(5_000, 8, 2).unwrap();
    let cfg = StepConfig::new(1e-3, 5.0).unwrap();
    let s = exit_paths(&Process::Levy(p), 1.0, &[0.0], &run, &cfg).unwrap();
    let curve = survival_curve(&s, &[0.05, 0.1, 0.2, 0.4, 0.8]);
    for w in curve.windows(2) {
        assert!(w[1].value <= w[0].value);
    }
}
