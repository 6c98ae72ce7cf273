use std::f64::consts::PI;

use trace_sharp::bubble::extension_half;
use trace_sharp::constants::{a0_ratio, sphere_area};
use trace_sharp::quadrature::{
    deterministic_sum, gauss_jacobi, gauss_legendre, graded_rule, half_space_integral, jacobi_rule, left_singular,
    right_singular, semi_infinite, CylinderRule, HalfBallRule, RadialRule, TailModel,
};
use trace_sharp::SobolevParams;

#[test]
fn weighted_moments() {
    let r = jacobi_rule(0.25, 1.0, 8).unwrap();
    assert!((r.integrate(|_| 1.0) - 2.0 / 3.0).abs() < 1e-12);
    let r = jacobi_rule(0.5, 2.0, 8).unwrap();
    assert!((r.integrate(|t| t) - 2.0).abs() < 1e-12);
    let r = jacobi_rule(0.3, 1.0, 8).unwrap();
    assert!((r.integrate(|t| t.powi(3)) - 1.0 / 4.4).abs() < 1e-12);
}

#[test]
fn jacobi_rule_is_exact_to_its_degree() {
    let (s, h) = (0.8, 1.7);
    let r = jacobi_rule(s, h, 6).unwrap();
    let a = 1.0 - 2.0 * s;
    for k in 0..=r.degree() {
        let e = a + 1.0 + k as f64;
        let exact = h.powf(e) / e;
        let got = r.integrate(|t| t.powi(k as i32));
        assert!(((got - exact) / exact).abs() < 1e-12, "k={k}");
    }
}

#[test]
fn rejects_bad_rules() {
    assert!(jacobi_rule(0.0, 1.0, 4).is_err());
    assert!(jacobi_rule(0.5, -1.0, 4).is_err());
    assert!(jacobi_rule(0.5, 1.0, 1).is_err());
    assert!(graded_rule(0.0, 1.0, 4.0, 1.0, 4).is_err());
    assert!(semi_infinite(2.0, 3.0, 8, |_| 1.0).is_err());
}

#[test]
fn endpoint_singular_rules() {
    // ∫_1^3 (t-1)^{-1/2} dt = 2√2 and ∫_1^3 (3-t)^{0.7} t dt in closed form.
    let l = left_singular(1.0, 3.0, -0.5, 6).unwrap();
    assert!((l.integrate(|_| 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-13);
    let r = right_singular(1.0, 3.0, 0.7, 6).unwrap();
    let exact = 3.0 * 2f64.powf(1.7) / 1.7 - 2f64.powf(2.7) / 2.7;
    assert!((r.integrate(|t| t) - exact).abs() < 1e-12);
}

#[test]
fn gauss_jacobi_weight_sum() {
    // ∫_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1).
    let (a, b) = (0.3, -0.4);
    let r = gauss_jacobi(10, a, b).unwrap();
    let exact = 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0);
    assert!((r.weight_sum() - exact).abs() < 1e-12);
    let g = gauss_legendre(5).unwrap();
    assert!((g.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-14);
}

// Lanczos gamma, independent of the library's log-gamma.
fn gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
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
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let a = C.iter().enumerate().skip(1).fold(C[0], |acc, (i, c)| acc + c / (x + i as f64));
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

fn beta(a: f64, b: f64) -> f64 {
    gamma(a) * gamma(b) / gamma(a + b)
}

#[test]
fn radial_rules_integrate_gaussians() {
    // ∫_{R^n} exp(-|x|²) = π^{n/2}.
    for n in [2u32, 3, 5] {
        let r = RadialRule::graded(n, 0.25, 12.0, 16).unwrap();
        let got = r.integrate(|r| (-r * r).exp());
        assert!((got - PI.powf(n as f64 / 2.0)).abs() < 1e-10, "n={n}");
    }
    let g = RadialRule::gauss(3, 1.0, 4).unwrap();
    assert!((g.integrate(|r| r * r) - sphere_area(2) / 5.0).abs() < 1e-13);
}

#[test]
fn semi_infinite_reports_small_tail() {
    let (v, tail) = semi_infinite(0.0, 2.0, 16, |s| 1.0 / (1.0 + s * s)).unwrap();
    assert!((v - PI / 2.0).abs() < 1e-12);
    assert!((0.0..1e-12).contains(&tail));
}

#[test]
fn separable_half_space_factorizes() {
    for (n, s) in [(2u32, 0.25), (4, 0.7)] {
        let a = 1.0 - 2.0 * s;
        let rule = CylinderRule::new(n, a, 12.0, 12.0, 0.25, 1e-6, 16).unwrap();
        let v = half_space_integral(|r, t| t.powf(2.0 * s) * (-r * r - t * t).exp(), &rule, None).unwrap();
        // t-factor ∫ t exp(-t²) = 1/2, x-factor π^{n/2}.
        let exact = 0.5 * PI.powf(n as f64 / 2.0);
        assert!(((v.value - exact) / exact).abs() < 1e-8);
        assert_eq!(half_space_integral(|_, _| 0.0, &rule, None).unwrap().value, 0.0);
    }
}

#[test]
fn full_gradient_energy_on_truncated_cylinder() {
    let p = SobolevParams::new(5, 0.5).unwrap();
    let rule = CylinderRule::new(5, 0.0, 60.0, 60.0, 0.25, 1e-6, 16).unwrap();
    let grad = half_space_integral(
        |r, t| {
            let e = extension_half(&p, 1.0, r, t);
            e.d_r * e.d_r + e.d_t * e.d_t
        },
        &rule,
        Some(TailModel { decay: 2.0 * (5.0 - 1.0) + 2.0 }),
    )
    .unwrap();
    let a0 = half_space_integral(|r, t| extension_half(&p, 1.0, r, t).value.powi(2), &rule, None).unwrap();
    let want = a0_ratio(&p).unwrap() * a0.value;
    assert!(((grad.value - want) / want).abs() < 0.01, "{} vs {want}", grad.value);
    assert!(grad.tail_bound.is_finite() && grad.tail_bound >= 0.0);
}

#[test]
fn half_ball_weighted_volume() {
    let (n, a) = (4u32, -0.5);
    let rule = HalfBallRule::new(n, a, 0.05, 0.8, 12, 12, 4).unwrap();
    let got = rule.integrate(|_, _| 1.0).unwrap();
    // ω_{n-1} δ^{n+a+1}/(n+a+1) · ½B((a+1)/2, n/2)
    let beta = beta((a + 1.0) / 2.0, n as f64 / 2.0);
    let exact = sphere_area(n - 1) * 0.8f64.powf(n as f64 + a + 1.0) / (n as f64 + a + 1.0) * 0.5 * beta;
    assert!(((got - exact) / exact).abs() < 1e-11, "{got} vs {exact}");
    let many = rule.integrate_many(|x, t| Ok([1.0, x, t])).unwrap();
    assert!((many[0] - got).abs() < 1e-15 * got);
    assert!(many[1] > 0.0 && many[2] > 0.0);
}

#[test]
fn compensated_sum_cases() {
    assert_eq!(deterministic_sum(&[1e16, 1.0, -1e16]), 1.0);
    let tenths = vec![0.1; 1_000_000];
    assert!((deterministic_sum(&tenths) - 1e5).abs() < 1e-9);
    let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.37).collect();
    assert_eq!(deterministic_sum(&xs).to_bits(), deterministic_sum(&xs.clone()).to_bits());
}
