//! Gauss-type rules for the degenerate weights `t^{1-2σ}` and `r^{n-1}`,
//! composite graded rules, and integrals over half-spaces and half-balls.
//!
//! Nodes come from the Golub–Welsch eigenproblem of the Jacobi matrix. Only
//! the first component of each eigenvector is needed for the weights, so the
//! QL sweep tracks a single row of the eigenvector matrix.

use rayon::prelude::*;

use crate::constants::{ln_beta, ln_gamma, sphere_area};
use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Neumaier-compensated sum of `values` in slice order.
pub fn deterministic_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Evaluates `f` at every index in parallel and returns the values in index
/// order, so any later reduction is independent of the thread count.
pub fn par_eval<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Nodes and weights of a one-dimensional rule. The weight function, if any,
/// is folded into `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> =
            self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).collect();
        deterministic_sum(&terms)
    }

    pub fn weight_sum(&self) -> f64 {
        deterministic_sum(&self.weights)
    }

    fn append(&mut self, other: Rule1D) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }

    /// Affine image of a rule on `[-1, 1]` onto `[lo, hi]`; `weight_scale`
    /// multiplies every weight on top of the Jacobian.
    fn mapped(&self, lo: f64, hi: f64, weight_scale: f64) -> Rule1D {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        Rule1D {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half * weight_scale).collect(),
        }
    }
}

/// Gauss–Jacobi rule on `[-1, 1]` for the weight `(1-x)^a (1+x)^b`.
pub fn gauss_jacobi(m: usize, a: f64, b: f64) -> Result<Rule1D> {
    if m == 0 {
        return Err(Error::InvalidParameter("rule needs at least one node".into()));
    }
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidParameter(format!("Jacobi exponents ({a}, {b}) must exceed -1")));
    }
    let ab = a + b;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m];
    for (k, d) in diag.iter_mut().enumerate() {
        let kf = k as f64;
        *d = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            let s = 2.0 * kf + ab;
            (b * b - a * a) / (s * (s + 2.0))
        };
    }
    for k in 1..m {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let beta = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = beta.sqrt();
    }
    let mut first = vec![0.0; m];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first)?;
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(ab + 2.0);
    let mu0 = ln_mu0.exp();
    let mut pairs: Vec<(f64, f64)> =
        diag.iter().zip(&first).map(|(&x, &z)| (x, mu0 * z * z)).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(Rule1D {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Result<Rule1D> {
    gauss_jacobi(m, 0.0, 0.0)
}

/// Implicit QL on a symmetric tridiagonal matrix. `off[i]` couples rows `i`
/// and `i + 1`. On return `diag` holds the eigenvalues and `z` the first row
/// of the eigenvector matrix, given `z` initialized to the first unit vector.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(Error::EigenConvergence(MAX_QL_SWEEPS));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Rule on `[lo, hi]` for the weight `(t - lo)^b`.
pub fn left_singular(lo: f64, hi: f64, b: f64, m: usize) -> Result<Rule1D> {
    let base = gauss_jacobi(m, 0.0, b)?;
    Ok(base.mapped(lo, hi, (0.5 * (hi - lo)).powf(b)))
}

/// Rule on `[lo, hi]` for the weight `(hi - t)^a`.
pub fn right_singular(lo: f64, hi: f64, a: f64, m: usize) -> Result<Rule1D> {
    let base = gauss_jacobi(m, a, 0.0)?;
    Ok(base.mapped(lo, hi, (0.5 * (hi - lo)).powf(a)))
}

/// Plain Gauss–Legendre rule on `[lo, hi]`.
pub fn legendre_on(lo: f64, hi: f64, m: usize) -> Result<Rule1D> {
    Ok(gauss_legendre(m)?.mapped(lo, hi, 1.0))
}

/// Gauss rule for `∫_0^T t^{1-2σ} f(t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiRule {
    pub exponent: f64,
    pub t_max: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl JacobiRule {
    /// Highest polynomial degree integrated exactly against the weight.
    pub fn degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> =
            self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).collect();
        deterministic_sum(&terms)
    }
}

pub fn jacobi_rule(sigma: f64, t_max: f64, m: usize) -> Result<JacobiRule> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} outside (0, 1)")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("height {t_max} must be positive")));
    }
    if m < 2 {
        return Err(Error::InvalidParameter("Jacobi rule needs at least two nodes".into()));
    }
    let exponent = 1.0 - 2.0 * sigma;
    let rule = left_singular(0.0, t_max, exponent, m)?;
    Ok(JacobiRule { exponent, t_max, nodes: rule.nodes, weights: rule.weights })
}

/// Composite rule for `∫_0^end s^a f(s) ds`: a Gauss–Jacobi panel on
/// `[0, first]` followed by Gauss–Legendre panels whose lengths grow by
/// `ratio`, with `s^a` folded into the weights.
pub fn graded_rule(a: f64, first: f64, end: f64, ratio: f64, m: usize) -> Result<Rule1D> {
    if !(first > 0.0 && end > 0.0 && ratio > 1.0) {
        return Err(Error::InvalidParameter("graded rule needs first, end > 0, ratio > 1".into()));
    }
    let first = first.min(end);
    let mut rule = left_singular(0.0, first, a, m)?;
    let leg = gauss_legendre(m)?;
    let mut lo = first;
    while lo < end * (1.0 - 1e-14) {
        let hi = (lo * ratio).min(end);
        let mut panel = leg.mapped(lo, hi, 1.0);
        for (w, &x) in panel.weights.iter_mut().zip(&panel.nodes) {
            *w *= x.powf(a);
        }
        rule.append(panel);
        lo = hi;
    }
    Ok(rule)
}

/// Rule for `ω_{n-1} ∫_0^R f(r) r^{n-1} dr`, the radial reduction of an
/// integral of a radial function over the ball of radius `R` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialRule {
    pub dim: u32,
    pub surface: f64,
    pub nodes: Vec<f64>,
    /// Include `r^{n-1}` but not the surface factor.
    pub weights: Vec<f64>,
}

impl RadialRule {
    /// Single Gauss–Jacobi panel on `[0, R]`, exact for `r^k`, `k ≤ 2m - 1`.
    pub fn gauss(dim: u32, r_max: f64, m: usize) -> Result<Self> {
        let rule = left_singular(0.0, r_max, dim as f64 - 1.0, m)?;
        Ok(Self { dim, surface: sphere_area(dim - 1), nodes: rule.nodes, weights: rule.weights })
    }

    /// Graded composite rule on `[0, R]` starting with a panel of width `first`.
    pub fn graded(dim: u32, first: f64, r_max: f64, m: usize) -> Result<Self> {
        let rule = graded_rule(dim as f64 - 1.0, first, r_max, 2.0, m)?;
        Ok(Self { dim, surface: sphere_area(dim - 1), nodes: rule.nodes, weights: rule.weights })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> =
            self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).collect();
        self.surface * deterministic_sum(&terms)
    }
}

/// `∫_0^∞ f(r) r^{b} dr` for integrands decaying like `r^{-decay}`, with
/// `decay > b + 1`. Returns the value and a bound for the part beyond the
/// last panel, estimated from the integrand at the cut.
pub fn semi_infinite(b: f64, decay: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if decay <= b + 1.0 {
        return Err(Error::Hypothesis(format!("decay {decay} too slow for weight r^{b}")));
    }
    // Cut where r^{b+1-decay} has dropped below 1e-18.
    let cut = (1e-18f64).powf(1.0 / (b + 1.0 - decay)).max(16.0);
    let rule = graded_rule(b, 0.25, cut, 2.0, m)?;
    let value = rule.integrate(&f);
    let tail = (f(cut).abs() * cut.powf(b + 1.0) / (decay - b - 1.0)).max(0.0);
    Ok((value, tail))
}

/// Tensor rule on the truncated cylinder `{|x| ≤ R, 0 < t ≤ T}` of the
/// upper half-space in `R^{n+1}`, carrying the weight `t^a r^{n-1}` and the
/// sphere area `ω_{n-1}` in its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderRule {
    pub dim: u32,
    pub t_exponent: f64,
    pub r_max: f64,
    pub t_max: f64,
    pub r: Rule1D,
    pub t: Rule1D,
    pub surface: f64,
}

impl CylinderRule {
    /// Both directions graded geometrically out to the cut-offs with `m`
    /// nodes per panel; the first panels have widths `r_first` and `t_first`.
    /// A small `t_first` resolves non-smooth factors such as `t^{2σ}`.
    pub fn new(
        dim: u32,
        t_exponent: f64,
        r_max: f64,
        t_max: f64,
        r_first: f64,
        t_first: f64,
        m: usize,
    ) -> Result<Self> {
        Ok(Self {
            dim,
            t_exponent,
            r_max,
            t_max,
            r: graded_rule(dim as f64 - 1.0, r_first, r_max, 2.0, m)?,
            t: graded_rule(t_exponent, t_first, t_max, 2.0, m)?,
            surface: sphere_area(dim - 1),
        })
    }

    pub fn node_count(&self) -> usize {
        self.r.len() * self.t.len()
    }
}

/// Decay model for the part of a half-space integral outside the cylinder:
/// `|f(r, t)| ≤ C ρ^{-decay}` for `ρ = |(r, t)|` beyond the cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// `∫_{R^{n+1}_+} t^a f(|x|, t) dx dt` over the cylinder of `rule`, with a
/// bound on the remainder from `tail`.
pub fn half_space_integral<F>(f: F, rule: &CylinderRule, tail: Option<TailModel>) -> Result<HalfSpaceValue>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    let values = rule.sample(|r, t| Ok(f(r, t)))?;
    let value = rule.integrate_values(&values);
    let tail_bound = match tail {
        None => 0.0,
        Some(model) => tail_bound(|r, t| Ok(f(r, t)), rule, model)?,
    };
    Ok(HalfSpaceValue { value, tail_bound })
}

impl CylinderRule {
    /// `f` at every node, `r`-major, checked for finiteness.
    pub fn sample<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send + SampleCheck,
        F: Fn(f64, f64) -> Result<T> + Sync + Send,
    {
        let nt = self.t.len();
        let out: Vec<Result<T>> = par_eval(self.node_count(), |idx| {
            let (r, t) = (self.r.nodes[idx / nt], self.t.nodes[idx % nt]);
            let v = f(r, t)?;
            if !v.is_finite_sample() {
                return Err(Error::NonFinite(format!("(r, t) = ({r:e}, {t:e})")));
            }
            Ok(v)
        });
        out.into_iter().collect()
    }

    /// Weighted sum of node values laid out as by [`CylinderRule::sample`].
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        let nt = self.t.len();
        let rows: Vec<f64> = (0..self.r.len())
            .map(|i| {
                let terms: Vec<f64> =
                    (0..nt).map(|j| self.t.weights[j] * values[i * nt + j]).collect();
                self.r.weights[i] * deterministic_sum(&terms)
            })
            .collect();
        self.surface * deterministic_sum(&rows)
    }
}

/// Finiteness test for node samples.
pub trait SampleCheck {
    fn is_finite_sample(&self) -> bool;
}

impl SampleCheck for f64 {
    fn is_finite_sample(&self) -> bool {
        self.is_finite()
    }
}

impl<const N: usize> SampleCheck for [f64; N] {
    fn is_finite_sample(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Bound on `∫ t^a |f|` outside the cylinder of `rule`, from
/// `|f| ≤ C ρ^{-decay}` on `ρ ≥ min(R, T)`. The constant is fitted from
/// samples of `f` on the shell `min(R,T)/2 ≤ ρ ≤ min(R,T)` and doubled.
pub fn tail_bound<F>(f: F, rule: &CylinderRule, model: TailModel) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let n = rule.dim as f64;
    let a = rule.t_exponent;
    let e = n + 1.0 + a - model.decay;
    if e >= 0.0 {
        return Err(Error::Hypothesis(format!(
            "integrand decay {} does not make the half-space integral converge",
            model.decay
        )));
    }
    let r0 = rule.r_max.min(rule.t_max);
    let mut c: f64 = 0.0;
    for i in 0..=8 {
        let rho = r0 * (0.5 + 0.5 * i as f64 / 8.0);
        for j in 0..=8 {
            let th = std::f64::consts::FRAC_PI_2 * (j as f64 + 0.5) / 9.0;
            let v = f(rho * th.cos(), rho * th.sin())?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("tail sample at rho = {rho:e}")));
            }
            c = c.max(v.abs() * rho.powf(model.decay));
        }
    }
    let angular = 0.5 * ln_beta((a + 1.0) / 2.0, n / 2.0).exp();
    Ok(2.0 * c * rule.surface * angular * r0.powf(e) / (-e))
}

/// Polar rule on the half-ball `{|(x, t)| ≤ δ, t > 0}` in `R^{n+1}` for
/// integrands `t^a F(|x|, t)`. With `x = R cos θ θ'`, `t = R sin θ`, the
/// measure is `ω_{n-1} R^{n+a} cos^{n-1}θ sin^a θ dR dθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfBallRule {
    pub dim: u32,
    pub t_exponent: f64,
    pub radius: Rule1D,
    pub angle: Rule1D,
    pub surface: f64,
}

impl HalfBallRule {
    /// Radial panels `[0, first]`, then doubling up to `outer`. Angular
    /// rule: see [`polar_angle_rule`].
    pub fn new(
        dim: u32,
        t_exponent: f64,
        first: f64,
        outer: f64,
        m_r: usize,
        m_theta: usize,
        theta_levels: u32,
    ) -> Result<Self> {
        let a = t_exponent;
        let radius = graded_rule(dim as f64 + a, first, outer, 2.0, m_r)?;
        let angle = polar_angle_rule(dim, a, m_theta, theta_levels)?;
        Ok(Self { dim, t_exponent: a, radius, angle, surface: sphere_area(dim - 1) })
    }

    /// Rule on the annulus `inner ≤ R ≤ outer` with Legendre panels of
    /// ratio at most `√2`.
    pub fn annulus(
        dim: u32,
        t_exponent: f64,
        inner: f64,
        outer: f64,
        m_r: usize,
        m_theta: usize,
        theta_levels: u32,
    ) -> Result<Self> {
        let a = t_exponent;
        let mut radius = Rule1D { nodes: vec![], weights: vec![] };
        let mut lo = inner;
        let panels = ((outer / inner).log2().ceil() as usize).max(1) * 2;
        let step = (outer / inner).powf(1.0 / panels as f64);
        for k in 0..panels {
            let hi = if k + 1 == panels { outer } else { lo * step };
            let mut p = legendre_on(lo, hi, m_r)?;
            for (w, &x) in p.weights.iter_mut().zip(&p.nodes) {
                *w *= x.powf(dim as f64 + a);
            }
            radius.append(p);
            lo = hi;
        }
        let angle = polar_angle_rule(dim, a, m_theta, theta_levels)?;
        Ok(Self { dim, t_exponent: a, radius, angle, surface: sphere_area(dim - 1) })
    }

    pub fn node_count(&self) -> usize {
        self.radius.len() * self.angle.len()
    }

    /// Several integrands sharing one evaluation per node.
    pub fn integrate_many<const K: usize, F>(&self, f: F) -> Result<[f64; K]>
    where
        F: Fn(f64, f64) -> Result<[f64; K]> + Sync + Send,
    {
        let na = self.angle.len();
        let rows: Vec<Result<[f64; K]>> = par_eval(self.radius.len(), |i| {
            let rr = self.radius.nodes[i];
            let mut terms = vec![Vec::with_capacity(na); K];
            for j in 0..na {
                let th = self.angle.nodes[j];
                let (s, c) = th.sin_cos();
                let v = f(rr * c, rr * s)?;
                if !v.is_finite_sample() {
                    return Err(Error::NonFinite(format!("(R, θ) = ({rr:e}, {th})")));
                }
                for k in 0..K {
                    terms[k].push(self.angle.weights[j] * v[k]);
                }
            }
            Ok(std::array::from_fn(|k| self.radius.weights[i] * deterministic_sum(&terms[k])))
        });
        let rows = rows.into_iter().collect::<Result<Vec<[f64; K]>>>()?;
        Ok(std::array::from_fn(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            self.surface * deterministic_sum(&col)
        }))
    }

    /// `ω_{n-1} ∫∫ t^a f(r, t) r^{n-1} dr dt` over the rule's region.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        let na = self.angle.len();
        let rows: Vec<Result<f64>> = par_eval(self.radius.len(), |i| {
            let rr = self.radius.nodes[i];
            let mut terms = Vec::with_capacity(na);
            for j in 0..na {
                let th = self.angle.nodes[j];
                let (s, c) = th.sin_cos();
                let v = f(rr * c, rr * s);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("(R, θ) = ({rr:e}, {th})")));
                }
                terms.push(self.angle.weights[j] * v);
            }
            Ok(self.radius.weights[i] * deterministic_sum(&terms))
        });
        let rows = rows.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(self.surface * deterministic_sum(&rows))
    }
}

/// θ-rule on `[0, π/2]` for `cos^{n-1}θ sin^a θ dθ`: a Gauss–Jacobi panel
/// with weight `θ^a` on `[0, π/4 · 2^{-levels}]`, doubling Legendre panels up
/// to `π/4`, and a Legendre panel on `[π/4, π/2]`. Extra levels resolve
/// integrands with non-smooth powers of `t` near `θ = 0`.
pub fn polar_angle_rule(dim: u32, a: f64, m: usize, levels: u32) -> Result<Rule1D> {
    let quarter = std::f64::consts::FRAC_PI_4;
    let first = quarter / 2f64.powi(levels as i32);
    let mut rule = left_singular(0.0, first, a, m)?;
    for (w, &th) in rule.weights.iter_mut().zip(&rule.nodes) {
        *w *= (th.sin() / th).powf(a) * th.cos().powi(dim as i32 - 1);
    }
    let mut lo = first;
    while lo < quarter * (1.0 - 1e-14) {
        let hi = (2.0 * lo).min(quarter);
        let mut p = legendre_on(lo, hi, m)?;
        for (w, &th) in p.weights.iter_mut().zip(&p.nodes) {
            *w *= th.sin().powf(a) * th.cos().powi(dim as i32 - 1);
        }
        rule.append(p);
        lo = hi;
    }
    let mut upper = legendre_on(quarter, 2.0 * quarter, m)?;
    for (w, &th) in upper.weights.iter_mut().zip(&upper.nodes) {
        *w *= th.sin().powf(a) * th.cos().powi(dim as i32 - 1);
    }
    rule.append(upper);
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum() {
        assert_eq!(deterministic_sum(&[1e16, 1.0, -1e16]), 1.0);
        let v = vec![0.1; 1_000_000];
        assert!((deterministic_sum(&v) - 1e5).abs() < 1e-9);
        assert_eq!(deterministic_sum(&[]), 0.0);
    }

    #[test]
    fn legendre_small_rules() {
        let r = gauss_legendre(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-14);
        let r = gauss_legendre(20).unwrap();
        for k in 0..40 {
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((r.integrate(|x| x.powi(k)) - exact).abs() < 1e-13, "k = {k}");
        }
    }

    #[test]
    fn jacobi_moments() {
        for &(a, b) in &[(0.5, -0.5), (-0.7, 0.3), (2.0, 4.0), (-0.999, 0.0)] {
            let r = gauss_jacobi(12, a, b).unwrap();
            for k in 0..24 {
                // ∫ (1-x)^a (1+x)^b ((1+x)/2)^k dx = 2^{a+b+1} B(a+1, b+k+1)
                let exact = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_beta(a + 1.0, b + k as f64 + 1.0)).exp();
                let got = r.integrate(|x| ((1.0 + x) / 2.0).powi(k));
                assert!(((got - exact) / exact).abs() < 1e-12, "a={a} b={b} k={k}");
            }
        }
    }

    #[test]
    fn jacobi_rule_examples() {
        let r = jacobi_rule(0.25, 1.0, 8).unwrap();
        assert!((r.integrate(|_| 1.0) - 2.0 / 3.0).abs() < 1e-12);
        let r = jacobi_rule(0.5, 2.0, 4).unwrap();
        assert!((r.integrate(|t| t) - 2.0).abs() < 1e-12);
        let r = jacobi_rule(0.3, 1.0, 4).unwrap();
        assert!((r.integrate(|t| t.powi(3)) - 1.0 / 4.4).abs() < 1e-12);
        assert!(jacobi_rule(0.3, 1.0, 1).is_err());
        assert!(jacobi_rule(1.3, 1.0, 4).is_err());
    }

    #[test]
    fn graded_rule_moments() {
        let a = -0.4;
        let r = graded_rule(a, 1e-3, 5.0, 2.0, 10).unwrap();
        for k in 0..6 {
            let exact = 5f64.powf(a + 1.0 + k as f64) / (a + 1.0 + k as f64);
            let got = r.integrate(|t| t.powi(k));
            assert!(((got - exact) / exact).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn radial_rule_monomials() {
        let r = RadialRule::gauss(4, 2.0, 6).unwrap();
        let w = sphere_area(3);
        for k in 0..12 {
            let exact = w * 2f64.powi(k + 4) / (k as f64 + 4.0);
            assert!(((r.integrate(|x| x.powi(k)) - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn intparts_ratio() {
        for n in 3..=10 {
            let nf = n as f64;
            let (num, _) = semi_infinite(nf + 1.0, 2.0 * nf, 20, |s| (1.0 + s * s).powf(-nf)).unwrap();
            let (den, _) = semi_infinite(nf - 1.0, 2.0 * nf, 20, |s| (1.0 + s * s).powf(-nf)).unwrap();
            assert!((num / den - nf / (nf - 2.0)).abs() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn separable_half_space() {
        let s = 0.3;
        let a = 1.0 - 2.0 * s;
        let rule = CylinderRule::new(3, a, 12.0, 12.0, 0.25, 1e-6, 16).unwrap();
        let v = half_space_integral(|r, t| t.powf(2.0 * s) * (-r * r - t * t).exp(), &rule, None).unwrap();
        // ∫ t exp(-t²) dt = 1/2;  ∫_{R^3} exp(-|x|²) = π^{3/2}
        let exact = 0.5 * std::f64::consts::PI.powf(1.5);
        assert!(((v.value - exact) / exact).abs() < 1e-8, "{} vs {exact}", v.value);
        let z = half_space_integral(|_, _| 0.0, &rule, None).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn half_ball_volume() {
        // Weighted volume of the unit half-ball: ω_{n-1} ∫R^{n+a} ∫cos^{n-1} sin^a.
        let (n, a) = (3u32, 0.4);
        let rule = HalfBallRule::new(n, a, 0.1, 1.0, 10, 12, 3).unwrap();
        let got = rule.integrate(|_, _| 1.0).unwrap();
        let exact = sphere_area(n - 1) / (n as f64 + a + 1.0)
            * 0.5 * ln_beta((a + 1.0) / 2.0, n as f64 / 2.0).exp();
        assert!(((got - exact) / exact).abs() < 1e-12);
        let ann = HalfBallRule::annulus(n, a, 0.5, 1.0, 10, 12, 0).unwrap();
        let got = ann.integrate(|_, _| 1.0).unwrap();
        assert!(((got - exact * (1.0 - 0.5f64.powf(n as f64 + a + 1.0))) / exact).abs() < 1e-12);
    }
}
