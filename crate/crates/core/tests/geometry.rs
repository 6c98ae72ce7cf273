use trace_sharp::geometry::{
    curvature_condition, curvature_tensor_from, g_inverse, metric_sample, sqrt_det_g, CurvatureData, CurvatureParts,
    RadialFactors,
};
use trace_sharp::{Error, SobolevParams};

fn flat_json(n: usize) -> String {
    let zeros = |k: usize| vec!["0"; k].join(",");
    format!(
        r#"{{"H":0,"pi":{{"shape":[{n},{n}],"data":[{m}]}},"Rbar_ric":{{"shape":[{n},{n}],"data":[{m}]}},
        "Rbar_scalar":0,"Rtt":0,"Ritjt":{{"shape":[{n},{n}],"data":[{m}]}},"Hgrad":{{"shape":[{n}],"data":[{v}]}}}}"#,
        m = zeros(n * n),
        v = zeros(n)
    )
}

#[test]
fn flat_data_gives_euclidean_metric() {
    let d = CurvatureData::flat(3);
    let x = [0.1, 0.2, -0.1];
    assert_eq!(sqrt_det_g(&d, &x, 0.2), 1.0);
    let g = g_inverse(&d, &x, 0.2);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(g[i * 3 + j], if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn umbilic_density_along_the_normal() {
    // trace(π) = H forces ‖π‖² = H²/n, so the t² coefficient is ½(H² − H²/n).
    let d = CurvatureData::from_parts(CurvatureParts::umbilic(3, 1.0)).unwrap();
    let want = 1.0 - 0.1 + 0.5 * (1.0 - 1.0 / 3.0) * 0.01;
    assert!((sqrt_det_g(&d, &[0.0; 3], 0.1) - want).abs() < 1e-15);
}

#[test]
fn density_restricted_to_boundary() {
    let n = 3;
    let mut parts = CurvatureParts::flat(n);
    parts.rbar_ric = vec![2.0, 0.5, 0.0, 0.5, -1.0, 0.3, 0.0, 0.3, 1.0];
    parts.rbar_scalar = 2.0;
    let d = CurvatureData::from_parts(parts).unwrap();
    let x = [0.2, 0.1, -0.3];
    let quad = 2.0 * 0.04 + 2.0 * 0.5 * 0.02 - 0.01 + 2.0 * 0.3 * (-0.03) + 0.09;
    assert!((sqrt_det_g(&d, &x, 0.0) - (1.0 - quad / 6.0)).abs() < 1e-15);
    // Sphere average of x_i x_j Ric_ij is r² R̄ / n.
    let f = RadialFactors::new(&d);
    let r = 0.3;
    assert!((f.volume.eval(r, 0.0) - (1.0 - r * r * 2.0 / (6.0 * n as f64))).abs() < 1e-15);
}

#[test]
fn inverse_metric_second_order_term() {
    let n = 2;
    let mut parts = CurvatureParts::trace_free(n, 2.0);
    parts.ritjt = vec![0.5, 0.0, 0.0, -0.5];
    let d = CurvatureData::from_parts(parts).unwrap();
    let t = 0.1;
    let g = g_inverse(&d, &[0.0, 0.0], t);
    // π = diag(1, −1): g^{11} = 1 + 2t + (3 + 0.5)t², g^{22} = 1 − 2t + (3 − 0.5)t².
    assert!((g[0] - (1.0 + 0.2 + 3.5 * 0.01)).abs() < 1e-15);
    assert!((g[3] - (1.0 - 0.2 + 2.5 * 0.01)).abs() < 1e-15);
    assert_eq!(g[1], 0.0);
}

#[test]
fn condition_examples() {
    let p = SobolevParams::new(5, 0.5).unwrap();
    assert!((curvature_condition(&p, 1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((curvature_condition(&p, 0.0, 0.0, -1.0).unwrap() + 2.0).abs() < 1e-14);
    for &(n, s) in &[(4u32, 0.2), (7, 0.9), (12, 0.5)] {
        let p = SobolevParams::new(n, s).unwrap();
        assert!((curvature_condition(&p, 0.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }
    assert!(matches!(
        curvature_condition(&SobolevParams::new(3, 0.6).unwrap(), 0.0, 1.0, 0.0),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn json_parsing() {
    let d = CurvatureData::parse_json(&flat_json(2)).unwrap();
    assert_eq!(d, CurvatureData::flat(2));
    let back = CurvatureData::parse_json(&d.to_json()).unwrap();
    assert_eq!(back, d);
    let extra = flat_json(2).replacen('{', r#"{"extra":1,"#, 1);
    assert!(matches!(CurvatureData::parse_json(&extra), Err(Error::Parse(_))));
    let bad_shape = flat_json(2).replace(r#""Hgrad":{"shape":[2]"#, r#""Hgrad":{"shape":[3]"#);
    assert!(CurvatureData::parse_json(&bad_shape).is_err());
    assert!(CurvatureData::parse_json(&flat_json(65)).is_err());
    assert!(CurvatureData::parse_json(&flat_json(2).replace(r#""H":0"#, r#""H":1"#)).is_err());
}

#[test]
fn trace_mismatch_is_rejected() {
    let mut parts = CurvatureParts::trace_free(3, 1.0);
    parts.h = 0.5;
    assert!(matches!(CurvatureData::from_parts(parts), Err(Error::Geometry(_))));
    let mut parts = CurvatureParts::flat(3);
    parts.pi[1] = 0.2;
    assert!(CurvatureData::from_parts(parts).is_err());
    let mut parts = CurvatureParts::flat(3);
    parts.rtt = 1.0;
    assert!(CurvatureData::from_parts(parts).is_err());
}

#[test]
fn kulkarni_nomizu_tensor_is_accepted_and_used() {
    let n = 3;
    let a = [1.0, 0.2, 0.0, 0.2, -0.5, 0.1, 0.0, 0.1, 0.3];
    let b = [0.4, 0.0, 0.3, 0.0, 1.0, 0.0, 0.3, 0.0, -0.2];
    let mut parts = CurvatureParts::flat(n);
    parts.riem4 = Some(curvature_tensor_from(&a, &b, n));
    let d = CurvatureData::from_parts(parts).unwrap();
    let g0 = g_inverse(&d, &[0.0; 3], 0.0);
    let g1 = g_inverse(&d, &[0.2, -0.1, 0.1], 0.0);
    assert!(g0.iter().zip(&g1).any(|(u, v)| (u - v).abs() > 1e-6));
    // The R_{ikjl} x^k x^l correction is symmetric in (i, j).
    for i in 0..n {
        for j in 0..n {
            assert!((g1[i * n + j] - g1[j * n + i]).abs() < 1e-15);
        }
    }
}

#[test]
fn metric_sample_validity() {
    let d = CurvatureData::from_parts(CurvatureParts::umbilic(3, 1.0)).unwrap();
    let s = metric_sample(&d, &[0.1, 0.0, 0.0], 0.1).unwrap();
    assert_eq!(s.truncation_order, 2);
    assert!(metric_sample(&d, &[0.4, 0.3, 0.0], 0.1).is_err());
    assert!(metric_sample(&d, &[0.1, 0.0], 0.1).is_err());
    // 1 − ½‖π‖² t² < 0 for ‖π‖² = 100, t = 0.3.
    let strong = CurvatureData::from_parts(CurvatureParts::trace_free(3, 100.0)).unwrap();
    assert!(matches!(metric_sample(&strong, &[0.0; 3], 0.3), Err(Error::Geometry(_))));
}
