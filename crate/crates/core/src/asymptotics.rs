//! Test functions `φ_ε = η W_ε − μ_ε` on the Fermi half-ball model and the
//! expansion of their quotient in the concentration scale `ε`.
//!
//! The model boundary is the ball `B_{2δ}` with density `√|g|(x, 0)` plus an
//! exterior piece of volume `V_ext` on which `φ_ε ≡ −μ_ε`. The interior is the
//! half-ball `B⁺_{2δ}` with the polynomial metric from [`crate::geometry`].
//! Every integrand is radial in `x`, so the metric enters only through its
//! sphere averages ([`RadialFactors`]).

use serde::Serialize;

use crate::bubble::{w_radial, ExtensionRule};
use crate::constants::{bubble_lp_norm_p, sharp_constant, sphere_area, SobolevParams};
use crate::error::{Error, Result};
use crate::geometry::{CurvatureData, RadialFactors, VALIDITY_RADIUS};
use crate::quadrature::{
    deterministic_sum, left_singular, legendre_on, par_eval, right_singular, HalfBallRule, Rule1D,
};

/// Radial cut-off: `η = 1` on `[0, δ]`, `η = 0` beyond `2δ`, quintic
/// smoothstep in between (C²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffSpec {
    delta: f64,
}

impl CutoffSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && 2.0 * delta <= VALIDITY_RADIUS) {
            return Err(Error::InvalidParameter(format!(
                "cutoff needs 0 < 2δ ≤ {VALIDITY_RADIUS}, got δ = {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self, radius: f64) -> f64 {
        let s = ((radius - self.delta) / self.delta).clamp(0.0, 1.0);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    pub fn eta_prime(&self, radius: f64) -> f64 {
        let s = ((radius - self.delta) / self.delta).clamp(0.0, 1.0);
        -30.0 * s * s * (1.0 - s) * (1.0 - s) / self.delta
    }
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { delta: 0.25 }
    }
}

/// Second-order coefficients of the energy and quotient expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k1bar: f64,
}

/// Closed-form `K1, K2, K3, K̄1`; needs `n > 2σ + 2`.
pub fn expansion_coefficients(params: &SobolevParams) -> Result<ExpansionCoefficients> {
    let (n, s) = (params.nf(), params.sigma());
    let gap = n - 2.0 - 2.0 * s;
    if !(gap > 0.0) {
        return Err(Error::Hypothesis(format!("expansion needs n > 2σ + 2, got n = {n}, σ = {s}")));
    }
    let plus = n - 2.0 + 2.0 * s;
    let k1 = -(n * n - 4.0 * n * (1.0 - s) + 4.0 * (1.0 - s - s * s)) / (6.0 * (n - 2.0) * plus * gap);
    let k2 = -4.0 * s * (1.0 - s) * (n - 1.0) / (n * (n - 2.0) * plus);
    let k3 = -4.0 * s * (1.0 - s) * (n - 1.0) * (3.0 * n - 2.0 - 2.0 * s)
        / (3.0 * n * (n - 2.0) * plus * gap);
    let k1bar = k1 + (n - 2.0 * s) / (6.0 * n * (n - 2.0));
    Ok(ExpansionCoefficients { k1, k2, k3, k1bar })
}

/// `K̄1` from its own closed form, independent of `K1`.
pub fn k1bar_closed_form(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    -s * (3.0 * n * n - 6.0 * n - 4.0 * s * s + 4.0)
        / (3.0 * n * (n - 2.0) * (n - 2.0 + 2.0 * s) * (n - 2.0 - 2.0 * s))
}

impl ExpansionCoefficients {
    /// `K̄1 R̄ + K2 ‖π‖² + K3 R_tt`.
    pub fn second_order(&self, rbar: f64, pi_norm2: f64, rtt: f64) -> f64 {
        self.k1bar * rbar + self.k2 * pi_norm2 + self.k3 * rtt
    }
}

/// `sgn(u) |u|^e`, through the logarithm with a `1e-300` floor.
pub fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    u.signum() * (e * u.abs().max(1e-300).ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub eps: f64,
    pub mu_eps: f64,
    pub cutoff: CutoffSpec,
    pub params: SobolevParams,
}

/// Split of the interior energy over the inverse-metric pieces:
/// `δ`, `2πt`, the curvature tensor, `g_{,tm} x^m t`, and the `t²` term.
/// `j6` (remainder of the truncated metric) is identically zero in the model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct JTerms {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j4: f64,
    pub j5: f64,
    pub j6: f64,
}

impl JTerms {
    pub fn total(&self) -> f64 {
        deterministic_sum(&[self.j1, self.j2, self.j3, self.j4, self.j5, self.j6])
    }
}

/// Quadrature sizes for the model integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRules {
    /// Nodes per boundary panel.
    pub boundary_nodes: usize,
    /// Nodes per radial panel of the half-ball rules.
    pub radial_nodes: usize,
    /// Nodes per angular panel.
    pub angle_nodes: usize,
    /// Angular grading levels toward `t = 0`; `None` picks 0 at σ = 1/2 and
    /// 10 otherwise.
    pub theta_levels: Option<u32>,
    /// First radial panel as a fraction of ε.
    pub first_fraction: f64,
}

impl Default for AsymptoticRules {
    fn default() -> Self {
        Self { boundary_nodes: 20, radial_nodes: 16, angle_nodes: 16, theta_levels: None, first_fraction: 1.0 / 16.0 }
    }
}

/// One row of an ε sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub mu_eps: f64,
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub boundary_lp: f64,
    pub quotient: f64,
}

/// The half-ball model with fixed curvature data, cut-off and exterior volume.
pub struct AsymptoticModel {
    params: SobolevParams,
    cutoff: CutoffSpec,
    v_ext: f64,
    rules: AsymptoticRules,
    factors: RadialFactors,
    ext: ExtensionRule,
    surface: f64,
}

#[derive(Debug, Clone, Copy)]
enum Power {
    Constraint,
    Lp,
}

impl AsymptoticModel {
    /// `v_ext = None` uses `10 |B_{2δ}|`.
    pub fn new(
        params: &SobolevParams,
        data: &CurvatureData,
        cutoff: CutoffSpec,
        v_ext: Option<f64>,
        rules: AsymptoticRules,
    ) -> Result<Self> {
        if data.n() != params.n() as usize {
            return Err(Error::InvalidParameter(format!(
                "curvature data has n = {}, parameters have n = {}",
                data.n(),
                params.n()
            )));
        }
        let surface = sphere_area(params.n() - 1);
        let ball = surface * (2.0 * cutoff.delta()).powi(params.n() as i32) / params.nf();
        let v_ext = v_ext.unwrap_or(10.0 * ball);
        if !(v_ext > 0.0 && v_ext.is_finite()) {
            return Err(Error::InvalidParameter(format!("exterior volume must be positive, got {v_ext}")));
        }
        if rules.boundary_nodes < 2 || rules.radial_nodes < 2 || rules.angle_nodes < 2 {
            return Err(Error::InvalidParameter("asymptotic rules need at least 2 nodes per panel".into()));
        }
        if !(rules.first_fraction > 0.0) {
            return Err(Error::InvalidParameter("first_fraction must be positive".into()));
        }
        let factors = RadialFactors::new(data);
        for i in 0..=64 {
            let r = 2.0 * cutoff.delta() * i as f64 / 64.0;
            for j in 0..=64 - i {
                let t = 2.0 * cutoff.delta() * j as f64 / 64.0;
                if !(factors.volume.eval(r, t) > 0.0) {
                    return Err(Error::Geometry(format!(
                        "volume density not positive at (r, t) = ({r}, {t}); curvature too large for δ"
                    )));
                }
            }
        }
        Ok(Self { params: *params, cutoff, v_ext, rules, factors, ext: ExtensionRule::standard(params)?, surface })
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn v_ext(&self) -> f64 {
        self.v_ext
    }

    fn theta_levels(&self) -> u32 {
        self.rules.theta_levels.unwrap_or(if self.params.sigma() == 0.5 { 0 } else { 10 })
    }

    fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps < self.cutoff.delta()) {
            return Err(Error::InvalidParameter(format!(
                "ε must lie in (0, δ) = (0, {}), got {eps}",
                self.cutoff.delta()
            )));
        }
        Ok(())
    }

    fn boundary_profile(&self, eps: f64, r: f64) -> f64 {
        self.cutoff.eta(r) * w_radial(&self.params, eps, r)
    }

    /// Radius where `η w_ε = μ`; the profile is strictly decreasing on
    /// `[0, 2δ]`.
    fn crossing(&self, eps: f64, mu: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 2.0 * self.cutoff.delta());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.boundary_profile(eps, mid) > mu {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `ω ∫_0^{2δ} g(η w − μ) √|g|(r, 0) r^{n-1} dr` with `g` the signed
    /// power of the constraint or `|·|^p`. Panels adjacent to the crossing
    /// carry the Jacobi weight `|r − r*|^e`.
    fn ball_integral(&self, eps: f64, mu: f64, power: Power) -> Result<f64> {
        let p = self.params.p();
        let e = match power {
            Power::Constraint => p - 1.0,
            Power::Lp => p,
        };
        let outer = 2.0 * self.cutoff.delta();
        let star = if mu > 0.0 && mu < self.boundary_profile(eps, 0.0) { Some(self.crossing(eps, mu)) } else { None };
        let mut breaks = vec![0.0, self.cutoff.delta(), outer];
        let mut b = eps / 4.0;
        while b < outer {
            breaks.push(b);
            b *= 2.0;
        }
        if let Some(rs) = star {
            breaks.retain(|&x| (x - rs).abs() > 1e-12 * outer);
            breaks.push(rs);
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * outer);

        let m = self.rules.boundary_nodes;
        let nf = self.params.nf();
        let mut parts = Vec::with_capacity(breaks.len());
        for win in breaks.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            let (rule, anchor): (Rule1D, Option<f64>) = match star {
                Some(rs) if hi == rs => (right_singular(lo, hi, e, m)?, Some(rs)),
                Some(rs) if lo == rs => (left_singular(lo, hi, e, m)?, Some(rs)),
                _ => (legendre_on(lo, hi, m)?, None),
            };
            let vals: Vec<f64> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&r, &w)| {
                    let u = self.boundary_profile(eps, r) - mu;
                    let g = match anchor {
                        Some(rs) => {
                            let d = (r - rs).abs();
                            match power {
                                Power::Constraint => u.signum() * (e * (u.abs() / d).ln()).exp(),
                                Power::Lp => (e * (u.abs() / d).ln()).exp(),
                            }
                        }
                        None => match power {
                            Power::Constraint => signed_pow(u, e),
                            Power::Lp => signed_pow(u.abs(), e),
                        },
                    };
                    w * g * self.factors.volume.eval(r, 0.0) * r.powf(nf - 1.0)
                })
                .collect();
            parts.push(deterministic_sum(&vals));
        }
        let value = self.surface * deterministic_sum(&parts);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("boundary integral at ε = {eps}, μ = {mu}")));
        }
        Ok(value)
    }

    /// The constraint map `μ ↦ ∫ |φ|^{p-2} φ ds`, strictly decreasing.
    pub fn constraint(&self, eps: f64, mu: f64) -> Result<f64> {
        let interior = self.ball_integral(eps, mu, Power::Constraint)?;
        Ok(interior - self.v_ext * signed_pow(mu, self.params.p() - 1.0))
    }

    /// Root of the constraint map by bisection in `ln μ` to `1e-12` relative.
    pub fn solve_mu(&self, eps: f64) -> Result<f64> {
        self.check_eps(eps)?;
        let hi = self.boundary_profile(eps, 0.0);
        let lo = hi * 1e-30;
        let (f_lo, f_hi) = (self.constraint(eps, lo)?, self.constraint(eps, hi)?);
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::Bracket { lo: f_lo, hi: f_hi });
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        while b - a > 1e-13 {
            let mid = 0.5 * (a + b);
            if self.constraint(eps, mid.exp())? > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((0.5 * (a + b)).exp())
    }

    pub fn test_function(&self, eps: f64) -> Result<TestFunction> {
        Ok(TestFunction { eps, mu_eps: self.solve_mu(eps)?, cutoff: self.cutoff, params: self.params })
    }

    /// `∫_{∂M} |φ_ε|^p ds` including the exterior part.
    pub fn boundary_lp(&self, tf: &TestFunction) -> Result<f64> {
        self.check_eps(tf.eps)?;
        let interior = self.ball_integral(tf.eps, tf.mu_eps, Power::Lp)?;
        Ok(interior + self.v_ext * signed_pow(tf.mu_eps, self.params.p()))
    }

    fn half_ball(&self, eps: f64, t_exponent: f64) -> Result<HalfBallRule> {
        HalfBallRule::new(
            self.params.n(),
            t_exponent,
            self.rules.first_fraction * eps,
            self.cutoff.delta(),
            self.rules.radial_nodes,
            self.rules.angle_nodes,
            self.theta_levels(),
        )
    }

    fn annulus(&self, t_exponent: f64) -> Result<HalfBallRule> {
        HalfBallRule::annulus(
            self.params.n(),
            t_exponent,
            self.cutoff.delta(),
            2.0 * self.cutoff.delta(),
            self.rules.radial_nodes,
            self.rules.angle_nodes,
            self.theta_levels(),
        )
    }

    /// Energy of `W_ε` on `B⁺_δ`, split by inverse-metric piece.
    pub fn energy_terms(&self, eps: f64) -> Result<JTerms> {
        self.check_eps(eps)?;
        let a = self.params.weight_exponent();
        let g = &self.factors.gradient;
        let x_part = self.half_ball(eps, a)?.integrate_many(|r, t| {
            let w = self.ext.radial(eps, r, t)?;
            let d2 = w.d_r * w.d_r;
            Ok([0, 1, 2, 3, 4].map(|k| d2 * g[k].eval(r, t)))
        })?;
        let [t_part] = self.half_ball(eps, -a)?.integrate_many(|r, t| {
            let w = self.ext.radial(eps, r, t)?;
            let d = t.powf(a) * w.d_t;
            Ok([d * d * self.factors.volume.eval(r, t)])
        })?;
        Ok(JTerms {
            j1: x_part[0] + t_part,
            j2: x_part[1],
            j3: x_part[2],
            j4: x_part[3],
            j5: x_part[4],
            j6: 0.0,
        })
    }

    /// `I1 = ∫_{B⁺_δ} t^{1-2σ} |∇_g W_ε|² dv_g`.
    pub fn energy_i1(&self, eps: f64) -> Result<f64> {
        Ok(self.energy_terms(eps)?.total())
    }

    /// `I2`: energy of `η W_ε − μ_ε` on the annulus `B⁺_{2δ} ∖ B⁺_δ`. The
    /// constant `μ_ε` does not contribute.
    pub fn energy_i2(&self, eps: f64) -> Result<f64> {
        self.check_eps(eps)?;
        let a = self.params.weight_exponent();
        let field = |r: f64, t: f64| -> Result<(f64, f64, f64)> {
            let w = self.ext.radial(eps, r, t)?;
            let big = r.hypot(t);
            let (eta, dk) = (self.cutoff.eta(big), self.cutoff.eta_prime(big));
            Ok((
                eta * w.d_r + w.value * dk * r / big,
                eta * w.d_t + w.value * dk * t / big,
                w.value,
            ))
        };
        let [x_part] = self.annulus(a)?.integrate_many(|r, t| {
            let (dr, _, _) = field(r, t)?;
            Ok([dr * dr * self.factors.gradient_total(r, t)])
        })?;
        let [t_part] = self.annulus(-a)?.integrate_many(|r, t| {
            let (_, dt, _) = field(r, t)?;
            let d = t.powf(a) * dt;
            Ok([d * d * self.factors.volume.eval(r, t)])
        })?;
        Ok(x_part + t_part)
    }

    /// Flat-metric moment `∫_{B⁺_δ} t^{1-2σ} |(x,t)|^k |∇W_ε|²`.
    pub fn moment_energy(&self, eps: f64, k: f64) -> Result<f64> {
        self.check_eps(eps)?;
        let a = self.params.weight_exponent();
        let [x_part] = self.half_ball(eps, a)?.integrate_many(|r, t| {
            let w = self.ext.radial(eps, r, t)?;
            Ok([r.hypot(t).powf(k) * w.d_r * w.d_r])
        })?;
        let [t_part] = self.half_ball(eps, -a)?.integrate_many(|r, t| {
            let w = self.ext.radial(eps, r, t)?;
            let d = t.powf(a) * w.d_t;
            Ok([r.hypot(t).powf(k) * d * d])
        })?;
        Ok(x_part + t_part)
    }

    /// `(I1 + I2) / (∫|φ_ε|^p)^{2/p}` with all intermediate values.
    pub fn evaluate(&self, eps: f64) -> Result<SweepRow> {
        let tf = self.test_function(eps)?;
        let lp = self.boundary_lp(&tf)?;
        let i1 = self.energy_i1(eps)?;
        let i2 = self.energy_i2(eps)?;
        let quotient = (i1 + i2) / lp.powf(2.0 / self.params.p());
        Ok(SweepRow { eps, mu_eps: tf.mu_eps, i1, i2, boundary_lp: lp, quotient })
    }

    /// Evaluates every ε independently, in parallel.
    pub fn sweep(&self, eps: &[f64]) -> Result<Vec<SweepRow>> {
        par_eval(eps.len(), |i| self.evaluate(eps[i])).into_iter().collect()
    }

    /// `μ_ε` for every ε, in parallel.
    pub fn mu_sweep(&self, eps: &[f64]) -> Result<Vec<f64>> {
        par_eval(eps.len(), |i| self.solve_mu(eps[i])).into_iter().collect()
    }
}

pub fn solve_mu_eps(
    eps: f64,
    cutoff: CutoffSpec,
    data: &CurvatureData,
    params: &SobolevParams,
    rules: AsymptoticRules,
) -> Result<f64> {
    AsymptoticModel::new(params, data, cutoff, None, rules)?.solve_mu(eps)
}

pub fn boundary_lp(tf: &TestFunction, data: &CurvatureData, rules: AsymptoticRules) -> Result<f64> {
    AsymptoticModel::new(&tf.params, data, tf.cutoff, None, rules)?.boundary_lp(tf)
}

pub fn energy_i1(
    eps: f64,
    data: &CurvatureData,
    params: &SobolevParams,
    cutoff: CutoffSpec,
    rules: AsymptoticRules,
) -> Result<f64> {
    AsymptoticModel::new(params, data, cutoff, None, rules)?.energy_i1(eps)
}

/// The annulus carries the flat metric unless `data` says otherwise, so this
/// takes curvature data like the other entry points.
pub fn energy_i2(
    eps: f64,
    cutoff: CutoffSpec,
    data: &CurvatureData,
    params: &SobolevParams,
    rules: AsymptoticRules,
) -> Result<f64> {
    AsymptoticModel::new(params, data, cutoff, None, rules)?.energy_i2(eps)
}

pub fn quotient(
    eps: f64,
    data: &CurvatureData,
    params: &SobolevParams,
    cutoff: CutoffSpec,
    rules: AsymptoticRules,
) -> Result<f64> {
    Ok(AsymptoticModel::new(params, data, cutoff, None, rules)?.evaluate(eps)?.quotient)
}

/// `ε = 2^{-lo}, …, 2^{-hi}`.
pub fn dyadic_eps(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|j| 2f64.powi(-j)).collect()
}

/// Exponent of `μ_ε ∼ ε^γ`: `γ = (n−2σ)² / (2(n+2σ))`.
pub fn mu_exponent(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    (n - 2.0 * s).powi(2) / (2.0 * (n + 2.0 * s))
}

/// Least-squares line `y ≈ c0 + c1 x`, returned as `(c0, c1)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = deterministic_sum(xs) / n;
    let my = deterministic_sum(ys) / n;
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let slope = deterministic_sum(&sxy) / deterministic_sum(&sxx);
    (my - slope * mx, slope)
}

/// Slopes fitted to a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepFits {
    /// `d ln μ / d ln ε` on the two smallest octaves.
    pub mu_slope: f64,
    /// The same fit one octave up; the gap to `mu_slope` gauges contamination.
    pub mu_slope_previous: f64,
    /// Richardson extrapolation `2 mu_slope − mu_slope_previous`.
    pub mu_slope_extrapolated: f64,
    pub mu_predicted: f64,
    /// `dQ/dε` on the two smallest octaves.
    pub quotient_eps_slope: f64,
    /// `dQ/d(ε²)` on the two smallest octaves.
    pub quotient_eps2_slope: f64,
    pub sharp_inverse: f64,
}

/// `ln μ` against `ln ε` on the three smallest ε, and one octave up.
pub fn fit_mu(eps: &[f64], mu: &[f64]) -> Result<(f64, f64)> {
    if eps.len() < 4 || eps.len() != mu.len() {
        return Err(Error::InvalidParameter("μ fit needs at least 4 points".into()));
    }
    let mut pts: Vec<(f64, f64)> = eps.iter().map(|e| e.ln()).zip(mu.iter().map(|m| m.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fit = |s: &[(f64, f64)]| {
        let (x, y): (Vec<f64>, Vec<f64>) = s.iter().copied().unzip();
        least_squares(&x, &y).1
    };
    Ok((fit(&pts[..3]), fit(&pts[1..4])))
}

pub fn fit_sweep(rows: &[SweepRow], params: &SobolevParams) -> Result<SweepFits> {
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mu: Vec<f64> = rows.iter().map(|r| r.mu_eps).collect();
    let (mu_slope, mu_slope_previous) = fit_mu(&eps, &mu)?;
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let small = &sorted[..3];
    let q: Vec<f64> = small.iter().map(|r| r.quotient).collect();
    let e1: Vec<f64> = small.iter().map(|r| r.eps).collect();
    let e2: Vec<f64> = small.iter().map(|r| r.eps * r.eps).collect();
    Ok(SweepFits {
        mu_slope,
        mu_slope_previous,
        mu_slope_extrapolated: 2.0 * mu_slope - mu_slope_previous,
        mu_predicted: mu_exponent(params),
        quotient_eps_slope: least_squares(&e1, &q).1,
        quotient_eps2_slope: least_squares(&e2, &q).1,
        sharp_inverse: 1.0 / sharp_constant(params),
    })
}

/// `(S^{-1} κ_σ)^{n/2σ}`, the limit of the boundary `L^p` integral.
pub fn boundary_limit(params: &SobolevParams) -> f64 {
    bubble_lp_norm_p(params)
}
