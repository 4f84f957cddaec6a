mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use drive_repair::localizer::{locate, prefix_robustness};
use drive_repair::spec::{parse_spec, robustness};
use drive_repair::trace::{Signal, Trace};

fn case(seed: u64) -> (common::Phi, Vec<common::Sample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = common::random_phi(&mut rng, 3);
    (phi, common::random_trace(&mut rng, 10))
}

fn rho_of(text: &str, samples: &[common::Sample]) -> f64 {
    let f = parse_spec(text).unwrap();
    robustness(&f, &common::to_trace(samples), 0).unwrap().value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn negation_flips_sign(seed in any::<u64>()) {
        let (phi, tr) = case(seed);
        let pos = rho_of(&phi.text(), &tr);
        let neg = rho_of(&format!("!{}", phi.text()), &tr);
        prop_assert_eq!(pos, -neg);
    }

    #[test]
    fn always_is_dual_of_eventually(seed in any::<u64>(), lo in 0u32..3, len in 0u32..3) {
        let (phi, tr) = case(seed);
        let p = phi.text();
        let w = format!("[{lo},{}]", lo + len);
        let g = rho_of(&format!("G{w} {p}"), &tr);
        let f = rho_of(&format!("!(F{w} !{p})"), &tr);
        prop_assert_eq!(g, f);
    }

    #[test]
    fn implication_is_disjunction(seed in any::<u64>()) {
        let (phi, tr) = case(seed);
        let p = phi.text();
        let a = rho_of(&format!("(speed > 1.5) -> {p}"), &tr);
        let b = rho_of(&format!("!(speed > 1.5) | {p}"), &tr);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn prefix_robustness_of_invariant_never_rises(speeds in prop::collection::vec(0.0f64..100.0, 1..80)) {
        let f = parse_spec("G (speed < 60)").unwrap();
        let tr = Trace::from_signal(Signal::Speed, &speeds, 0.1).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..speeds.len() {
            let r = prefix_robustness(&f, &tr, k).unwrap().value();
            prop_assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn near_miss_moves_earlier_as_threshold_grows(
        speeds in prop::collection::vec(0.0f64..100.0, 1..80),
        d1 in 0.0f64..30.0,
        extra in 0.0f64..30.0,
    ) {
        let f = parse_spec("G (speed < 60)").unwrap();
        let tr = Trace::from_signal(Signal::Speed, &speeds, 0.1).unwrap();
        let small = locate(&f, &tr, d1).unwrap();
        let large = locate(&f, &tr, d1 + extra).unwrap();
        prop_assert_eq!(small.violation_step, large.violation_step);
        if let (Some(a), Some(b)) = (small.near_miss_step, large.near_miss_step) {
            prop_assert!(b <= a);
        }
        if let (Some(n), Some(v)) = (small.near_miss_step, small.violation_step) {
            prop_assert!(n <= v);
        }
        let zero = locate(&f, &tr, 0.0).unwrap();
        prop_assert_eq!(zero.near_miss_step, zero.violation_step);
    }
}
