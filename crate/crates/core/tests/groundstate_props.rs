use fracwell::groundstate::*;
use fracwell::levy::ModelParams;
use fracwell::potential::{RadialPotential, WellSpec};
use proptest::prelude::*;

fn meta(alpha: f64, m: f64, l0: f64, slack: f64) -> ProfileMeta {
    let well = WellSpec::new(1.0, 5.0).unwrap();
    ProfileMeta::new(ModelParams::new(1, alpha, m).unwrap(), well, l0, 5.0 - l0 + slack).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_is_non_increasing(alpha in 0.2f64..1.9, l0 in 0.5f64..5.0, s in 0.05f64..3.0, r in 0.0f64..4.0, dr in 0.0f64..1.0) {
        let mt = meta(alpha, 0.0, l0, s);
        prop_assert!(profile_shape(&mt, r + dr).unwrap() <= profile_shape(&mt, r).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn band_lower_below_upper(alpha in 0.2f64..1.9, m in 0.0f64..2.0, slack in 1.0f64..10.0, r in 0.0f64..6.0) {
        let b = ProfileBand::with_slack(meta(alpha, m, 4.0, 0.5), slack).unwrap();
        prop_assert!(b.lower(r).unwrap() <= b.upper(r).unwrap());
    }

    #[test]
    fn level_set_inverts_exponential(amp in 0.5f64..10.0, rate in 0.1f64..5.0, frac in 0.01f64..0.99) {
        let pot = RadialPotential::exponential(amp, rate).unwrap();
        let g = frac * amp;
        let r = level_set_radius(&pot, g).unwrap();
        prop_assert!((r - (amp / g).ln() / rate).abs() < 1e-10 * (1.0 + r));
    }
}
