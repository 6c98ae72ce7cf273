//! Second-order Fermi-coordinate expansion of the metric near a boundary
//! point `P`, and the curvature combination deciding the second-order sign.
//!
//! All tensors are components in an orthonormal frame at `P`; indices are
//! raised and lowered with δ.
//!
//! ```text
//! √|g|  = 1 - H t + ½(H² - ‖π‖² - R_tt) t² - H_{,i} x^i t - ⅙ R̄_ij x^i x^j
//! g^{ij} = δ^{ij} + 2 π^{ij} t - ⅓ R̄^i_{kl}^j x^k x^l + g^{ij}_{,tm} x^m t
//!          + (3 π^{im} π_m^j + R^i_t^j_t) t²
//! ```
//!
//! JSON layout: every tensor is an object `{"shape": [...], "data": [...]}`
//! with `data` in row-major order. `g_tm` has shape `[n, n, n]` indexed
//! `(i, j, m)`; `Riem4` has shape `[n, n, n, n]` indexed `(i, k, l, j)` and
//! holds `R̄^i_{kl}^j`.

use serde::{Deserialize, Serialize};

use crate::constants::SobolevParams;
use crate::error::{Error, Result};
use crate::poly::{Poly, RadialPoly};

/// Radius of the ball around `P` where the truncated expansion is trusted.
pub const VALIDITY_RADIUS: f64 = 0.5;

const TRACE_TOL: f64 = 1e-12;

/// Unvalidated curvature data; turn into [`CurvatureData`] with
/// [`CurvatureData::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureParts {
    pub n: usize,
    pub h: f64,
    pub pi: Vec<f64>,
    pub rbar_ric: Vec<f64>,
    pub rbar_scalar: f64,
    pub rtt: f64,
    pub ritjt: Vec<f64>,
    pub hgrad: Vec<f64>,
    pub g_tm: Option<Vec<f64>>,
    pub riem4: Option<Vec<f64>>,
}

impl CurvatureParts {
    /// Flat boundary point: every tensor zero.
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            h: 0.0,
            pi: vec![0.0; n * n],
            rbar_ric: vec![0.0; n * n],
            rbar_scalar: 0.0,
            rtt: 0.0,
            ritjt: vec![0.0; n * n],
            hgrad: vec![0.0; n],
            g_tm: None,
            riem4: None,
        }
    }

    /// Umbilic point with `π = (H/n) δ`.
    pub fn umbilic(n: usize, h: f64) -> Self {
        let mut parts = Self::flat(n);
        parts.h = h;
        for i in 0..n {
            parts.pi[i * n + i] = h / n as f64;
        }
        parts
    }

    /// Trace-free `π = diag(a, -a, 0, …)` with `‖π‖² = norm2`.
    pub fn trace_free(n: usize, norm2: f64) -> Self {
        let mut parts = Self::flat(n);
        let a = (norm2 / 2.0).sqrt();
        parts.pi[0] = a;
        parts.pi[n + 1] = -a;
        parts
    }
}

/// Validated pointwise curvature data at `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    parts: CurvatureParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvatureJson {
    #[serde(rename = "H")]
    h: f64,
    pi: TensorJson,
    #[serde(rename = "Rbar_ric")]
    rbar_ric: TensorJson,
    #[serde(rename = "Rbar_scalar")]
    rbar_scalar: f64,
    #[serde(rename = "Rtt")]
    rtt: f64,
    #[serde(rename = "Ritjt")]
    ritjt: TensorJson,
    #[serde(rename = "Hgrad")]
    hgrad: TensorJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g_tm: Option<TensorJson>,
    #[serde(rename = "Riem4", default, skip_serializing_if = "Option::is_none")]
    riem4: Option<TensorJson>,
}

fn tensor(name: &str, t: TensorJson, n: usize, rank: u32) -> Result<Vec<f64>> {
    let want = vec![n; rank as usize];
    if t.shape != want {
        return Err(Error::Geometry(format!("{name} has shape {:?}, expected {want:?}", t.shape)));
    }
    if t.data.len() != n.pow(rank) {
        return Err(Error::Geometry(format!(
            "{name} has {} entries, expected {}",
            t.data.len(),
            n.pow(rank)
        )));
    }
    Ok(t.data)
}

fn scale_of(v: &[f64]) -> f64 {
    v.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

fn check_symmetric(name: &str, a: &[f64], n: usize) -> Result<()> {
    let tol = TRACE_TOL * scale_of(a);
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i]).abs() > tol {
                return Err(Error::Geometry(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

fn check_trace(name: &str, a: &[f64], n: usize, expected: f64, expected_name: &str) -> Result<()> {
    let tr = trace(a, n);
    if (tr - expected).abs() > TRACE_TOL * scale_of(a).max(expected.abs()) {
        return Err(Error::Geometry(format!("trace of {name} is {tr}, but {expected_name} = {expected}")));
    }
    Ok(())
}

/// Index into a rank-4 tensor stored row-major.
fn idx4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Checks the algebraic symmetries of `T[i][k][l][j] = R̄_{iklj}`:
/// antisymmetry in `(i, k)` and in `(l, j)`, pair symmetry and the first
/// Bianchi identity.
fn check_curvature_tensor(t: &[f64], n: usize) -> Result<()> {
    let tol = 1e-10 * scale_of(t);
    let at = |a, b, c, d| t[idx4(n, a, b, c, d)];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = at(a, b, c, d);
                    if (v + at(b, a, c, d)).abs() > tol || (v + at(a, b, d, c)).abs() > tol {
                        return Err(Error::Geometry(format!("Riem4 is not antisymmetric at ({a},{b},{c},{d})")));
                    }
                    if (v - at(c, d, a, b)).abs() > tol {
                        return Err(Error::Geometry(format!("Riem4 lacks pair symmetry at ({a},{b},{c},{d})")));
                    }
                    if (v + at(a, c, d, b) + at(a, d, b, c)).abs() > tol {
                        return Err(Error::Geometry(format!("Riem4 violates the Bianchi identity at ({a},{b},{c},{d})")));
                    }
                }
            }
        }
    }
    Ok(())
}

impl CurvatureData {
    pub fn from_parts(parts: CurvatureParts) -> Result<Self> {
        let n = parts.n;
        if n < 2 {
            return Err(Error::Geometry(format!("dimension {n} must be at least 2")));
        }
        let sq = n * n;
        for (name, len, want) in [
            ("pi", parts.pi.len(), sq),
            ("Rbar_ric", parts.rbar_ric.len(), sq),
            ("Ritjt", parts.ritjt.len(), sq),
            ("Hgrad", parts.hgrad.len(), n),
        ] {
            if len != want {
                return Err(Error::Geometry(format!("{name} has {len} entries, expected {want}")));
            }
        }
        if let Some(g) = &parts.g_tm {
            if g.len() != n * sq {
                return Err(Error::Geometry(format!("g_tm has {} entries, expected {}", g.len(), n * sq)));
            }
        }
        if let Some(r) = &parts.riem4 {
            if r.len() != sq * sq {
                return Err(Error::Geometry(format!("Riem4 has {} entries, expected {}", r.len(), sq * sq)));
            }
        }
        let all_finite = [parts.h, parts.rbar_scalar, parts.rtt]
            .iter()
            .chain(&parts.pi)
            .chain(&parts.rbar_ric)
            .chain(&parts.ritjt)
            .chain(&parts.hgrad)
            .chain(parts.g_tm.iter().flatten())
            .chain(parts.riem4.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Geometry("curvature data contains non-finite values".into()));
        }
        check_symmetric("pi", &parts.pi, n)?;
        check_symmetric("Rbar_ric", &parts.rbar_ric, n)?;
        check_symmetric("Ritjt", &parts.ritjt, n)?;
        check_trace("pi", &parts.pi, n, parts.h, "H")?;
        check_trace("Rbar_ric", &parts.rbar_ric, n, parts.rbar_scalar, "Rbar_scalar")?;
        check_trace("Ritjt", &parts.ritjt, n, parts.rtt, "Rtt")?;
        if let Some(g) = &parts.g_tm {
            for m in 0..n {
                let slice: Vec<f64> = (0..sq).map(|ij| g[ij * n + m]).collect();
                check_symmetric("g_tm", &slice, n)?;
            }
        }
        if let Some(r) = &parts.riem4 {
            check_curvature_tensor(r, n)?;
        }
        Ok(Self { parts })
    }

    pub fn flat(n: usize) -> Self {
        Self::from_parts(CurvatureParts::flat(n)).expect("flat data is valid")
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let raw: CurvatureJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("curvature JSON: {e}")))?;
        let n = match raw.pi.shape.first() {
            Some(&n) => n,
            None => return Err(Error::Geometry("pi must have shape [n, n]".into())),
        };
        if !(2..=64).contains(&n) {
            return Err(Error::Geometry(format!("dimension {n} outside 2..=64")));
        }
        let parts = CurvatureParts {
            n,
            h: raw.h,
            pi: tensor("pi", raw.pi, n, 2)?,
            rbar_ric: tensor("Rbar_ric", raw.rbar_ric, n, 2)?,
            rbar_scalar: raw.rbar_scalar,
            rtt: raw.rtt,
            ritjt: tensor("Ritjt", raw.ritjt, n, 2)?,
            hgrad: tensor("Hgrad", raw.hgrad, n, 1)?,
            g_tm: raw.g_tm.map(|t| tensor("g_tm", t, n, 3)).transpose()?,
            riem4: raw.riem4.map(|t| tensor("Riem4", t, n, 4)).transpose()?,
        };
        Self::from_parts(parts)
    }

    pub fn to_json(&self) -> String {
        let p = &self.parts;
        let n = p.n;
        let t = |shape: Vec<usize>, data: &Vec<f64>| TensorJson { shape, data: data.clone() };
        let raw = CurvatureJson {
            h: p.h,
            pi: t(vec![n, n], &p.pi),
            rbar_ric: t(vec![n, n], &p.rbar_ric),
            rbar_scalar: p.rbar_scalar,
            rtt: p.rtt,
            ritjt: t(vec![n, n], &p.ritjt),
            hgrad: t(vec![n], &p.hgrad),
            g_tm: p.g_tm.as_ref().map(|g| t(vec![n, n, n], g)),
            riem4: p.riem4.as_ref().map(|r| t(vec![n, n, n, n], r)),
        };
        serde_json::to_string_pretty(&raw).expect("curvature data serializes")
    }

    pub fn parts(&self) -> &CurvatureParts {
        &self.parts
    }

    pub fn n(&self) -> usize {
        self.parts.n
    }

    pub fn mean_curvature(&self) -> f64 {
        self.parts.h
    }

    pub fn rbar_scalar(&self) -> f64 {
        self.parts.rbar_scalar
    }

    pub fn rtt(&self) -> f64 {
        self.parts.rtt
    }

    /// `‖π‖² = Σ π_ij²` at `P`.
    pub fn pi_norm2(&self) -> f64 {
        self.parts.pi.iter().map(|v| v * v).sum()
    }

    fn pi_squared(&self, i: usize, j: usize) -> f64 {
        let n = self.parts.n;
        (0..n).map(|m| self.parts.pi[i * n + m] * self.parts.pi[m * n + j]).sum()
    }

    /// The expansion of `√|g|` as a polynomial in `(x, t)`.
    pub fn sqrt_det_poly(&self) -> Poly {
        let p = &self.parts;
        let n = p.n;
        let t = Poly::linear(n, n, 1.0);
        let mut out = Poly::constant(n, 1.0);
        out = out.add(&t.scale(-p.h));
        out = out.add(&t.mul(&t).scale(0.5 * (p.h * p.h - self.pi_norm2() - p.rtt)));
        for i in 0..n {
            let xi = Poly::linear(n, i, 1.0);
            out = out.add(&xi.mul(&t).scale(-p.hgrad[i]));
            for j in 0..n {
                let xj = Poly::linear(n, j, 1.0);
                out = out.add(&xi.mul(&xj).scale(-p.rbar_ric[i * n + j] / 6.0));
            }
        }
        out
    }

    /// The five pieces of the `g^{ij}` expansion, each an `n × n` array of
    /// polynomials: identity, `2πt`, curvature `x x`, `g_tm x t`, and the
    /// `t²` term.
    pub fn inverse_metric_pieces(&self) -> [Vec<Poly>; 5] {
        let p = &self.parts;
        let n = p.n;
        let t = Poly::linear(n, n, 1.0);
        let t2 = t.mul(&t);
        let mut pieces: [Vec<Poly>; 5] = std::array::from_fn(|_| vec![Poly::zero(n); n * n]);
        for i in 0..n {
            for j in 0..n {
                let ij = i * n + j;
                if i == j {
                    pieces[0][ij] = Poly::constant(n, 1.0);
                }
                pieces[1][ij] = t.scale(2.0 * p.pi[ij]);
                if let Some(r) = &p.riem4 {
                    let mut acc = Poly::zero(n);
                    for k in 0..n {
                        for l in 0..n {
                            let c = r[idx4(n, i, k, l, j)];
                            if c != 0.0 {
                                acc = acc.add(&Poly::linear(n, k, 1.0).mul(&Poly::linear(n, l, 1.0)).scale(-c / 3.0));
                            }
                        }
                    }
                    pieces[2][ij] = acc;
                }
                if let Some(g) = &p.g_tm {
                    let mut acc = Poly::zero(n);
                    for m in 0..n {
                        let c = g[ij * n + m];
                        if c != 0.0 {
                            acc = acc.add(&Poly::linear(n, m, 1.0).mul(&t).scale(c));
                        }
                    }
                    pieces[3][ij] = acc;
                }
                pieces[4][ij] = t2.scale(3.0 * self.pi_squared(i, j) + p.ritjt[ij]);
            }
        }
        pieces
    }
}

/// `√|g|(x, t)` evaluated term by term.
pub fn sqrt_det_g(data: &CurvatureData, x: &[f64], t: f64) -> f64 {
    let p = &data.parts;
    let n = p.n;
    let mut v = 1.0 - p.h * t + 0.5 * (p.h * p.h - data.pi_norm2() - p.rtt) * t * t;
    for i in 0..n {
        v -= p.hgrad[i] * x[i] * t;
        for j in 0..n {
            v -= p.rbar_ric[i * n + j] * x[i] * x[j] / 6.0;
        }
    }
    v
}

/// `g^{ij}(x, t)` as a row-major `n × n` matrix, evaluated term by term.
pub fn g_inverse(data: &CurvatureData, x: &[f64], t: f64) -> Vec<f64> {
    let p = &data.parts;
    let n = p.n;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let ij = i * n + j;
            let mut v = if i == j { 1.0 } else { 0.0 };
            v += 2.0 * p.pi[ij] * t;
            if let Some(r) = &p.riem4 {
                for k in 0..n {
                    for l in 0..n {
                        v -= r[idx4(n, i, k, l, j)] * x[k] * x[l] / 3.0;
                    }
                }
            }
            if let Some(gt) = &p.g_tm {
                for m in 0..n {
                    v += gt[ij * n + m] * x[m] * t;
                }
            }
            v += (3.0 * data.pi_squared(i, j) + p.ritjt[ij]) * t * t;
            g[ij] = v;
        }
    }
    g
}

/// Metric at one point of the validity ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSample {
    pub sqrt_det: f64,
    pub g_inv: Vec<f64>,
    pub truncation_order: u32,
}

/// Metric at `(x, t)`, checked to lie within [`VALIDITY_RADIUS`] with a
/// positive density and positive definite inverse metric.
pub fn metric_sample(data: &CurvatureData, x: &[f64], t: f64) -> Result<MetricSample> {
    let n = data.n();
    if x.len() != n {
        return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {n}", x.len())));
    }
    let rho = (x.iter().map(|v| v * v).sum::<f64>() + t * t).sqrt();
    if rho > VALIDITY_RADIUS {
        return Err(Error::InvalidParameter(format!("|(x,t)| = {rho} exceeds validity radius {VALIDITY_RADIUS}")));
    }
    let sqrt_det = sqrt_det_g(data, x, t);
    let g_inv = g_inverse(data, x, t);
    if !(sqrt_det > 0.0) {
        return Err(Error::Geometry(format!("volume density {sqrt_det} is not positive at |(x,t)| = {rho}")));
    }
    if !is_positive_definite(&g_inv, n) {
        return Err(Error::Geometry(format!("inverse metric is not positive definite at |(x,t)| = {rho}")));
    }
    Ok(MetricSample { sqrt_det, g_inv, truncation_order: 2 })
}

fn is_positive_definite(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// Positive exactly when the second-order curvature hypothesis holds:
/// `c_R R̄ + ‖π‖² + c_t R_tt` with
/// `c_R = (3n²-6n-4σ²+4) / (12(1-σ)(n-1)(n-2-2σ))`,
/// `c_t = (3n-2-2σ) / (3n-6-6σ)`.
pub fn curvature_condition(params: &SobolevParams, rbar: f64, pi_norm2: f64, rtt: f64) -> Result<f64> {
    let (n, s) = (params.nf(), params.sigma());
    if n - 2.0 - 2.0 * s <= 0.0 {
        return Err(Error::Hypothesis(format!("n - 2 - 2σ = {} must be positive", n - 2.0 - 2.0 * s)));
    }
    let c_r = (3.0 * n * n - 6.0 * n - 4.0 * s * s + 4.0) / (12.0 * (1.0 - s) * (n - 1.0) * (n - 2.0 - 2.0 * s));
    let c_t = (3.0 * n - 2.0 - 2.0 * s) / (3.0 * n - 6.0 - 6.0 * s);
    Ok(c_r * rbar + pi_norm2 + c_t * rtt)
}

/// Algebraic curvature tensor `A ∧ B` (Kulkarni–Nomizu product of two
/// symmetric matrices), stored as `T[i][k][l][j] = R̄_{iklj}`.
pub fn curvature_tensor_from(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let m = |x: &[f64], i: usize, j: usize| x[i * n + j];
    let mut t = vec![0.0; n * n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for j in 0..n {
                    t[idx4(n, i, k, l, j)] = m(a, i, l) * m(b, k, j) + m(a, k, j) * m(b, i, l)
                        - m(a, i, j) * m(b, k, l)
                        - m(a, k, l) * m(b, i, j);
                }
            }
        }
    }
    t
}

/// Sphere averages of the metric factors multiplying a radial integrand.
///
/// For `U(x, t) = F(|x|, t)`,
/// `g^{ij} ∂_i U ∂_j U √|g|` averages over `|x| = r` to `F_r² · Σ_k A_k(r, t)`
/// and `(∂_t U)² √|g|` to `F_t² · B(r, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFactors {
    /// One factor per inverse-metric piece (see
    /// [`CurvatureData::inverse_metric_pieces`]).
    pub gradient: [RadialPoly; 5],
    pub volume: RadialPoly,
}

impl RadialFactors {
    pub fn new(data: &CurvatureData) -> Self {
        let n = data.n();
        let sqrt_g = data.sqrt_det_poly();
        let pieces = data.inverse_metric_pieces();
        let gradient = pieces.map(|piece| {
            let mut acc = Poly::zero(n);
            for i in 0..n {
                for j in 0..n {
                    let g = &piece[i * n + j];
                    if g.terms().next().is_none() {
                        continue;
                    }
                    let xx = Poly::linear(n, i, 1.0).mul(&Poly::linear(n, j, 1.0));
                    acc = acc.add(&xx.mul(g));
                }
            }
            acc.mul(&sqrt_g).sphere_average().div_r2()
        });
        Self { gradient, volume: sqrt_g.sphere_average() }
    }

    /// Sum of the gradient factors.
    pub fn gradient_total(&self, r: f64, t: f64) -> f64 {
        self.gradient.iter().map(|p| p.eval(r, t)).sum()
    }
}
