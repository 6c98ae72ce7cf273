use proptest::prelude::*;
use trace_sharp::bubble::{w, BubbleSpec};
use trace_sharp::constants::{sharp_constant, ConstantSet};
use trace_sharp::geometry::{sqrt_det_g, CurvatureData, CurvatureParts};
use trace_sharp::rayleigh::{
    decode_checkpoint, encode_checkpoint, AlphaSchedule, CheckpointHeader, CylinderModel, DiscreteField, GridSpec,
};
use trace_sharp::SobolevParams;

fn small_model(sigma: f64) -> CylinderModel {
    CylinderModel::new(&SobolevParams::new(2, sigma).unwrap(), 2.0, 1.0, GridSpec::new(8, 6).unwrap()).unwrap()
}

fn field(m: &CylinderModel, seed: &[f64]) -> DiscreteField {
    let values = (0..m.node_count()).map(|i| seed[i % seed.len()] + 0.01 * (i as f64).sin()).collect();
    DiscreteField::from_values(m, values).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn i_alpha_is_scale_invariant(
        sigma in 0.05f64..0.95,
        alpha in 0.0f64..100.0,
        c in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
        seed in prop::collection::vec(-2.0f64..2.0, 3..12),
    ) {
        let m = small_model(sigma);
        let u = field(&m, &seed);
        let a = m.i_alpha(&u, alpha).unwrap();
        let b = m.i_alpha(&u.scaled(c), alpha).unwrap();
        prop_assert!(rel(a.value, b.value) < 1e-10, "{} vs {}", a.value, b.value);
        prop_assert!(rel(b.energy, c * c * a.energy) < 1e-10);
    }

    #[test]
    fn penalty_only_raises_the_quotient(
        sigma in 0.05f64..0.95,
        alpha in 0.0f64..100.0,
        seed in prop::collection::vec(-2.0f64..2.0, 3..12),
    ) {
        let m = small_model(sigma);
        let u = field(&m, &seed);
        let ev = m.i_alpha(&u, alpha).unwrap();
        let plain = ev.energy / ev.traces.lp_norm_p.powf(2.0 / m.params().p());
        prop_assert!(ev.penalty >= 0.0);
        prop_assert!(ev.value >= plain * (1.0 - 1e-14));
        prop_assert!(m.i_alpha(&u, alpha + 1.0).unwrap().value >= ev.value);
    }

    #[test]
    fn energy_ignores_constants(
        sigma in 0.05f64..0.95,
        c in -5.0f64..5.0,
        seed in prop::collection::vec(-2.0f64..2.0, 3..12),
    ) {
        let m = small_model(sigma);
        let u = field(&m, &seed);
        let e = m.energy(&u).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((m.energy(&u.shifted(c)).unwrap() - e).abs() <= 1e-10 * e.max(1.0));
    }

    #[test]
    fn checkpoint_round_trips(
        iteration in 0usize..1_000_000,
        alpha in 0.0f64..1e6,
        xi in -1e3f64..1e3,
        seed in prop::collection::vec(-1e3f64..1e3, 1..8),
    ) {
        let m = small_model(0.5);
        let u = field(&m, &seed);
        let header = CheckpointHeader { model: *m.spec(), iteration, alpha, xi_alpha: xi };
        let (h, v) = decode_checkpoint(&encode_checkpoint(&header, &u)).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(v.as_slice(), u.values());
    }

    #[test]
    fn truncated_checkpoints_are_rejected(cut in 0usize..200) {
        let m = small_model(0.5);
        let u = m.sample(|x, t| x[0] + t);
        let header = CheckpointHeader { model: *m.spec(), iteration: 1, alpha: 1.0, xi_alpha: 0.5 };
        let bytes = encode_checkpoint(&header, &u);
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(decode_checkpoint(&bytes[..cut]).is_err());
    }
}

proptest! {
    #[test]
    fn grid_parser_round_trips(a in 0usize..5000, b in 0usize..5000) {
        let parsed = format!("{a},{b}").parse::<GridSpec>();
        match GridSpec::new(a, b) {
            Ok(g) => prop_assert_eq!(parsed.unwrap(), g),
            Err(_) => prop_assert!(parsed.is_err()),
        }
    }

    #[test]
    fn grid_parser_never_panics(s in "\\PC{0,24}") {
        let _ = s.parse::<GridSpec>();
    }

    #[test]
    fn alpha_schedule_round_trips(mut v in prop::collection::vec(0.0f64..1e9, 1..20)) {
        v.sort_by(f64::total_cmp);
        v.dedup();
        let text = v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",");
        let s: AlphaSchedule = text.parse().unwrap();
        prop_assert_eq!(s.values(), v.as_slice());
    }

    #[test]
    fn unsorted_alpha_schedule_is_rejected(a in 1.0f64..1e6, b in 0.0f64..1.0) {
        let text = format!("{},{}", a, a * b);
        prop_assert!(text.parse::<AlphaSchedule>().is_err());
    }

    #[test]
    fn constants_are_finite_and_consistent(n in 2u32..40, sigma in 0.01f64..0.99) {
        let Ok(p) = SobolevParams::new(n, sigma) else { return Ok(()) };
        prop_assert!(p.p() > 2.0);
        let s = sharp_constant(&p);
        prop_assert!(s > 0.0 && s.is_finite());
        let set = ConstantSet::compute(&p);
        prop_assert_eq!(set.sharp, s);
    }

    #[test]
    fn bubble_is_permutation_invariant(
        eps in 0.05f64..5.0,
        x in prop::collection::vec(-3.0f64..3.0, 4),
        sigma in 0.05f64..0.95,
    ) {
        let p = SobolevParams::new(4, sigma).unwrap();
        let spec = BubbleSpec::centered(eps, 4).unwrap();
        let mut y = x.clone();
        y.reverse();
        prop_assert!(rel(w(&spec, &p, &x), w(&spec, &p, &y)) < 1e-14);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!(rel(w(&spec, &p, &x), w(&spec, &p, &neg)) < 1e-14);
    }

    #[test]
    fn umbilic_density_is_even_in_x(
        h in -2.0f64..2.0,
        x in prop::collection::vec(-0.2f64..0.2, 3),
        t in 0.0f64..0.2,
    ) {
        let d = CurvatureData::from_parts(CurvatureParts::umbilic(3, h)).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(sqrt_det_g(&d, &x, t), sqrt_det_g(&d, &neg, t));
    }

    #[test]
    fn curvature_json_round_trips(n in 2usize..6, h in -3.0f64..3.0) {
        let d = CurvatureData::from_parts(CurvatureParts::umbilic(n, h)).unwrap();
        prop_assert_eq!(CurvatureData::parse_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn curvature_json_never_panics(s in "\\PC{0,64}") {
        let _ = CurvatureData::parse_json(&s);
    }
}
