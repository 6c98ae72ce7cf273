use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trace_sharp::bubble::{
    decay_envelope, extend, extension_half, w, w_radial, BubbleSpec, ExtensionRule, KernelRule,
};
use trace_sharp::constants::bubble_amplitude;
use trace_sharp::SobolevParams;

fn params(n: u32, s: f64) -> SobolevParams {
    SobolevParams::new(n, s).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, n: u32, span: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-span..span)).collect()
}

#[test]
fn center_value_is_amplitude() {
    let p = params(3, 0.5);
    let spec = BubbleSpec::centered(1.0, 3).unwrap();
    assert!((w(&spec, &p, &[0.0; 3]) - 2.0).abs() < 1e-14);
}

#[test]
fn boundary_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(n, s) in &[(3u32, 0.5), (4, 0.3), (6, 0.85)] {
        let p = params(n, s);
        let eps = 0.37;
        let unit = BubbleSpec::centered(1.0, n).unwrap();
        let scaled = BubbleSpec::centered(eps, n).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, n, 2.0);
            let xs: Vec<f64> = x.iter().map(|v| v / eps).collect();
            let want = eps.powf(-p.half_gap()) * w(&unit, &p, &xs);
            let got = w(&scaled, &p, &x);
            assert!(((got - want) / want).abs() < 1e-13);
        }
    }
}

#[test]
fn radial_symmetry_and_center() {
    let p = params(4, 0.4);
    let spec = BubbleSpec::new(0.5, vec![1.0, -2.0, 0.0, 0.5]).unwrap();
    let x = [1.3, -1.6, 0.2, 0.1];
    let d: Vec<f64> = x.iter().zip(spec.x0()).map(|(a, b)| a - b).collect();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((w(&spec, &p, &x) - w_radial(&p, 0.5, r)).abs() < 1e-14);
    assert!(BubbleSpec::new(0.0, vec![0.0]).is_err());
    assert!(BubbleSpec::new(1.0, vec![f64::NAN]).is_err());
}

#[test]
fn extension_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for &(n, s) in &[(3u32, 0.25), (5, 0.7)] {
        let p = params(n, s);
        let rule = ExtensionRule::standard(&p).unwrap();
        let eps = 0.2;
        let unit = BubbleSpec::centered(1.0, n).unwrap();
        let scaled = BubbleSpec::centered(eps, n).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut rng, n, 1.0);
            let t = rng.gen_range(0.01..1.0);
            let xs: Vec<f64> = x.iter().map(|v| v / eps).collect();
            let want = eps.powf(-p.half_gap()) * extend(&unit, &p, &xs, t / eps, &rule).unwrap().value;
            let got = extend(&scaled, &p, &x, t, &rule).unwrap().value;
            assert!(((got - want) / want).abs() < 1e-9, "({n},{s}) t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn half_order_closed_form_against_kernel_and_feynman() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [3u32, 5] {
        let p = params(n, 0.5);
        let rule = ExtensionRule::standard(&p).unwrap();
        let kr = KernelRule::new(&p, 24, 48).unwrap();
        let f = |r: f64| w_radial(&p, 1.0, r);
        for _ in 0..50 {
            let r = rng.gen_range(0.0..3.0);
            let t = rng.gen_range(0.005..4.0);
            let closed = extension_half(&p, 1.0, r, t);
            let feyn = rule.feynman(1.0, r, t).unwrap();
            assert!(((feyn.value - closed.value) / closed.value).abs() < 1e-9);
            assert!((feyn.d_r - closed.d_r).abs() < 1e-8 * closed.value.max(closed.d_r.abs()));
            assert!((feyn.d_t - closed.d_t).abs() < 1e-8 * closed.value.max(closed.d_t.abs()));
            let k = kr.extend(&f, r, t, 1.0);
            assert!(((k - closed.value) / closed.value).abs() < 1e-6);
        }
    }
}

#[test]
fn gradient_matches_difference_quotient() {
    let p = params(4, 0.3);
    let rule = ExtensionRule::standard(&p).unwrap();
    let spec = BubbleSpec::new(0.8, vec![0.1, 0.0, -0.2, 0.3]).unwrap();
    let x = [0.6, -0.4, 0.2, 0.9];
    let t = 0.35;
    let e = extend(&spec, &p, &x, t, &rule).unwrap();
    let h = 1e-5;
    for i in 0..4 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h;
        xm[i] -= h;
        let fd = (extend(&spec, &p, &xp, t, &rule).unwrap().value - extend(&spec, &p, &xm, t, &rule).unwrap().value)
            / (2.0 * h);
        assert!((fd - e.grad_x[i]).abs() < 1e-7, "i={i}: {fd} vs {}", e.grad_x[i]);
    }
    let fd = (extend(&spec, &p, &x, t + h, &rule).unwrap().value - extend(&spec, &p, &x, t - h, &rule).unwrap().value)
        / (2.0 * h);
    assert!((fd - e.grad_t).abs() < 1e-7);
    assert!(e.quadrature_error_bound >= 0.0);
}

#[test]
fn trace_limit_is_monotone() {
    for &(n, s) in &[(3u32, 0.5), (3, 0.3), (5, 0.75)] {
        let p = params(n, s);
        let rule = ExtensionRule::standard(&p).unwrap();
        let spec = BubbleSpec::centered(1.0, n).unwrap();
        let mut x = vec![0.0; n as usize];
        x[0] = 0.6;
        let target = w(&spec, &p, &x);
        let gaps: Vec<f64> =
            [1e-1, 1e-2, 1e-3].iter().map(|&t| (extend(&spec, &p, &x, t, &rule).unwrap().value - target).abs()).collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "({n},{s}): {gaps:?}");
    }
}

#[test]
fn half_order_flux_is_finite() {
    // −∂_t W at t → 0⁺ converges when σ = 1/2.
    let p = params(3, 0.5);
    let a = -extension_half(&p, 1.0, 0.4, 1e-6).d_t;
    let b = -extension_half(&p, 1.0, 0.4, 1e-9).d_t;
    assert!(a.is_finite() && a > 0.0 && (a - b).abs() < 1e-5 * a);
}

#[test]
fn envelopes_bound_the_extension() {
    for &(n, s) in &[(3u32, 0.5), (4, 0.3)] {
        let p = params(n, s);
        let rule = ExtensionRule::standard(&p).unwrap();
        let (wb, _, tb) = decay_envelope(&p, 1.0, 0.0, 1.0);
        assert!(wb > 0.0 && wb.is_finite() && tb > 0.0 && tb.is_finite());
        let mut c_w = 0.0f64;
        let mut c_t = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let r = 0.5 * i as f64 * 1.6f64.powi(i);
                let t = 0.01 * 2.2f64.powi(j);
                let e = rule.radial(1.0, r, t).unwrap();
                let (bw, _, bt) = decay_envelope(&p, 1.0, r, t);
                c_w = c_w.max(e.value.abs() / bw);
                c_t = c_t.max(e.d_t.abs() / bt);
            }
        }
        assert!(c_w.is_finite() && c_w < 10.0 * bubble_amplitude(&p), "{c_w}");
        assert!(c_t.is_finite() && c_t < 1e3, "{c_t}");
    }
}

#[test]
fn extension_rejects_mismatched_rule_and_bad_t() {
    let p = params(3, 0.4);
    let q = params(3, 0.6);
    let rule = ExtensionRule::standard(&q).unwrap();
    let spec = BubbleSpec::centered(1.0, 3).unwrap();
    assert!(extend(&spec, &p, &[0.0; 3], 0.5, &rule).is_err());
    let rule = ExtensionRule::standard(&p).unwrap();
    assert!(extend(&spec, &p, &[0.0; 3], 0.0, &rule).is_err());
    assert!(ExtensionRule::new(&p, 2, 1e-9).is_err());
}
