//! Boundary bubbles `w_{ε,x0}` and their weighted-harmonic extensions
//! `W_{ε,x0}`.
//!
//! At σ = 1/2 the extension has a closed form. For other orders the Poisson
//! convolution is collapsed with a Feynman parameter: for `k = (n-2σ)/2`,
//! `m = (n+2σ)/2`,
//!
//! ```text
//! W(r, t) = C t^{2σ} ∫_0^1 (1-q)^{k-1} q^{m-1} Q(q)^{-n/2} dq,
//! Q(q)    = (1-q) ε² + q t² + q (1-q) r²,
//! C       = α ε^k Γ(n/2) / (Γ(k) Γ(σ)),
//! ```
//!
//! a one-dimensional integral with algebraic endpoint weights and boundary
//! layers of widths `t²/(ε²+r²)` near `q = 1` and `ε²/(t²+r²)` near `q = 0`.
//! Both layers are resolved by geometric panels. Gradients come from
//! differentiating `Q^{-n/2}` under the integral.
//!
//! [`KernelRule`] evaluates the same convolution directly in polar
//! coordinates around the evaluation point; it serves as an independent check.

use crate::constants::{bubble_amplitude, kernel_constant, ln_gamma, sphere_area, SobolevParams};
use crate::error::{Error, Result};
use crate::quadrature::{deterministic_sum, gauss_jacobi, gauss_legendre, Rule1D};

/// Concentration scale and center of a bubble.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleSpec {
    eps: f64,
    x0: Vec<f64>,
}

impl BubbleSpec {
    pub fn new(eps: f64, x0: Vec<f64>) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("bubble center must be finite".into()));
        }
        Ok(Self { eps, x0 })
    }

    /// Bubble of scale `eps` centered at the origin of `R^n`.
    pub fn centered(eps: f64, n: u32) -> Result<Self> {
        Self::new(eps, vec![0.0; n as usize])
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x0).map(|(a, b)| a - b).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `w_{ε,0}` as a function of `r = |x|`.
pub fn w_radial(params: &SobolevParams, eps: f64, r: f64) -> f64 {
    let k = params.half_gap();
    bubble_amplitude(params) * (eps / (eps * eps + r * r)).powf(k)
}

/// Radial derivative of [`w_radial`].
pub fn w_radial_derivative(params: &SobolevParams, eps: f64, r: f64) -> f64 {
    let k = params.half_gap();
    -2.0 * k * r / (eps * eps + r * r) * w_radial(params, eps, r)
}

pub fn w(spec: &BubbleSpec, params: &SobolevParams, x: &[f64]) -> f64 {
    w_radial(params, spec.eps, norm(&spec.offset(x)))
}

/// Extension value and gradient at one point of the half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionValue {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_t: f64,
    pub quadrature_error_bound: f64,
}

/// `W`, `∂_r W`, `∂_t W` of a bubble centered at the origin, as functions of
/// `(r, t)`, and an error bound covering all three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialExtension {
    pub value: f64,
    pub d_r: f64,
    pub d_t: f64,
    pub error_bound: f64,
}

/// Closed-form extension at σ = 1/2:
/// `W = α (ε / ((ε+t)² + r²))^{(n-1)/2}`.
pub fn extension_half(params: &SobolevParams, eps: f64, r: f64, t: f64) -> RadialExtension {
    let k = params.half_gap();
    let d = (eps + t) * (eps + t) + r * r;
    let value = bubble_amplitude(params) * (eps / d).powf(k);
    RadialExtension {
        value,
        d_r: -2.0 * k * r / d * value,
        d_t: -2.0 * k * (eps + t) / d * value,
        error_bound: 0.0,
    }
}

/// Precomputed panel rules for the Feynman-parameter form of the extension.
#[derive(Debug, Clone)]
pub struct ExtensionRule {
    params: SobolevParams,
    alpha: f64,
    gamma_factor: f64,
    tol: f64,
    fine: PanelSet,
    coarse: PanelSet,
}

#[derive(Debug, Clone)]
struct PanelSet {
    // Jacobi panels with weight y^{k-1} (near q = 1) and q^{m-1} (near q = 0),
    // on [-1, 1] in the (1+x)^b convention.
    near_one: Rule1D,
    near_zero: Rule1D,
    legendre: Rule1D,
}

impl PanelSet {
    fn new(k: f64, m: f64, nodes: usize) -> Result<Self> {
        Ok(Self {
            near_one: gauss_jacobi(nodes, 0.0, k - 1.0)?,
            near_zero: gauss_jacobi(nodes, 0.0, m - 1.0)?,
            legendre: gauss_legendre(nodes)?,
        })
    }
}

/// Sums of the three Feynman integrals.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    i0: f64,
    ir: f64,
    it: f64,
}

impl ExtensionRule {
    /// `nodes` points per panel; the error bound compares against a rule with
    /// half as many, and `tol` is the relative bound above which evaluation
    /// reports an unresolved integral.
    pub fn new(params: &SobolevParams, nodes: usize, tol: f64) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::InvalidParameter("extension rule needs at least 4 nodes per panel".into()));
        }
        let k = params.half_gap();
        let m = (params.nf() + 2.0 * params.sigma()) / 2.0;
        let gamma_factor =
            (ln_gamma(params.nf() / 2.0) - ln_gamma(k) - ln_gamma(params.sigma())).exp();
        Ok(Self {
            params: *params,
            alpha: bubble_amplitude(params),
            gamma_factor,
            tol,
            fine: PanelSet::new(k, m, nodes)?,
            coarse: PanelSet::new(k, m, nodes / 2)?,
        })
    }

    /// Default rule: 16 nodes per panel, relative tolerance `1e-9`.
    pub fn standard(params: &SobolevParams) -> Result<Self> {
        Self::new(params, 16, 1e-9)
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    /// `W`, `∂_r W`, `∂_t W` for the bubble of scale `eps` centered at the
    /// origin. Uses the closed form at σ = 1/2.
    pub fn radial(&self, eps: f64, r: f64, t: f64) -> Result<RadialExtension> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("extension needs t > 0, got {t}")));
        }
        if self.params.sigma() == 0.5 {
            return Ok(extension_half(&self.params, eps, r, t));
        }
        self.feynman(eps, r, t)
    }

    /// Feynman-parameter evaluation regardless of σ.
    pub fn feynman(&self, eps: f64, r: f64, t: f64) -> Result<RadialExtension> {
        let p = &self.params;
        let (n, s) = (p.nf(), p.sigma());
        let k = p.half_gap();
        let m = (n + 2.0 * s) / 2.0;
        let fine = self.moments(&self.fine, eps, r, t, k, m);
        let coarse = self.moments(&self.coarse, eps, r, t, k, m);
        let c = self.alpha * eps.powf(k) * self.gamma_factor * t.powf(2.0 * s);
        let value = c * fine.i0;
        let d_r = -n * r * c * fine.ir;
        let d_t = 2.0 * s / t * value - n * t * c * fine.it;
        let rel = |a: f64, b: f64| if a == 0.0 { (a - b).abs() } else { ((a - b) / a).abs() };
        let err_rel = rel(fine.i0, coarse.i0).max(rel(fine.ir, coarse.ir)).max(rel(fine.it, coarse.it));
        if !(value.is_finite() && d_r.is_finite() && d_t.is_finite()) {
            return Err(Error::NonFinite(format!("extension at (r, t) = ({r:e}, {t:e})")));
        }
        if err_rel > self.tol {
            return Err(Error::Unresolved { estimate: err_rel, tol: self.tol });
        }
        Ok(RadialExtension {
            value,
            d_r,
            d_t,
            error_bound: err_rel * (value.abs() + d_r.abs() + d_t.abs()),
        })
    }

    fn moments(&self, set: &PanelSet, eps: f64, r: f64, t: f64, k: f64, m: f64) -> Moments {
        let n = self.params.nf();
        let (e2, r2, t2) = (eps * eps, r * r, t * t);
        let mut terms0 = Vec::new();
        let mut terms_r = Vec::new();
        let mut terms_t = Vec::new();
        let mut push = |q: f64, y: f64, w: f64| {
            let qq = y * e2 + q * t2 + q * y * r2;
            let base = w * qq.powf(-n / 2.0);
            terms0.push(base);
            terms_r.push(base * q * y / qq);
            terms_t.push(base * q / qq);
        };

        // Half near q = 1, in y = 1 - q with weight y^{k-1}.
        let tau = t2 / (e2 + r2);
        for (lo, hi, jac) in panels(tau) {
            let half = 0.5 * (hi - lo);
            if jac {
                let scale = half * half.powf(k - 1.0);
                for (&x, &wt) in set.near_one.nodes.iter().zip(&set.near_one.weights) {
                    let y = lo + half * (1.0 + x);
                    let q = 1.0 - y;
                    push(q, y, wt * scale * q.powf(m - 1.0));
                }
            } else {
                for (&x, &wt) in set.legendre.nodes.iter().zip(&set.legendre.weights) {
                    let y = lo + half * (1.0 + x);
                    let q = 1.0 - y;
                    push(q, y, wt * half * y.powf(k - 1.0) * q.powf(m - 1.0));
                }
            }
        }

        // Half near q = 0 with weight q^{m-1}.
        let tau = e2 / (t2 + r2);
        for (lo, hi, jac) in panels(tau) {
            let half = 0.5 * (hi - lo);
            if jac {
                let scale = half * half.powf(m - 1.0);
                for (&x, &wt) in set.near_zero.nodes.iter().zip(&set.near_zero.weights) {
                    let q = lo + half * (1.0 + x);
                    let y = 1.0 - q;
                    push(q, y, wt * scale * y.powf(k - 1.0));
                }
            } else {
                for (&x, &wt) in set.legendre.nodes.iter().zip(&set.legendre.weights) {
                    let q = lo + half * (1.0 + x);
                    let y = 1.0 - q;
                    push(q, y, wt * half * q.powf(m - 1.0) * y.powf(k - 1.0));
                }
            }
        }
        Moments {
            i0: deterministic_sum(&terms0),
            ir: deterministic_sum(&terms_r),
            it: deterministic_sum(&terms_t),
        }
    }
}

/// Panels covering `[0, 1/2]`: a singular panel `[0, τ]` then doubling.
fn panels(tau: f64) -> Vec<(f64, f64, bool)> {
    let first = tau.clamp(1e-300, 0.5);
    let mut out = vec![(0.0, first, true)];
    let mut lo = first;
    while lo < 0.5 {
        let hi = (2.0 * lo).min(0.5);
        out.push((lo, hi, false));
        lo = hi;
    }
    out
}

/// Extension of the bubble `spec` at `(x, t)`.
pub fn extend(spec: &BubbleSpec, params: &SobolevParams, x: &[f64], t: f64, rule: &ExtensionRule) -> Result<ExtensionValue> {
    if rule.params() != params {
        return Err(Error::InvalidParameter("extension rule built for different parameters".into()));
    }
    let d = spec.offset(x);
    let r = norm(&d);
    let e = rule.radial(spec.eps, r, t)?;
    let grad_x = if r > 0.0 { d.iter().map(|v| e.d_r * v / r).collect() } else { vec![0.0; d.len()] };
    Ok(ExtensionValue { value: e.value, grad_x, grad_t: e.d_t, quadrature_error_bound: e.error_bound })
}

/// The three decay envelopes for the bubble of scale `eps`:
/// `ε^k (ε²+ρ²)^{-k}`, `ε^k (ε²+ρ²)^{-(n-2σ+1)/2}`,
/// `ε^k t^{2σ-1} (ε²+ρ²)^{-n/2}` with `ρ = |(x, t)|`.
pub fn decay_envelope(params: &SobolevParams, eps: f64, r: f64, t: f64) -> (f64, f64, f64) {
    let (n, s) = (params.nf(), params.sigma());
    let k = params.half_gap();
    let d = eps * eps + r * r + t * t;
    let lead = eps.powf(k);
    (
        lead * d.powf(-k),
        lead * d.powf(-(n - 2.0 * s + 1.0) / 2.0),
        lead * t.powf(2.0 * s - 1.0) * d.powf(-n / 2.0),
    )
}

/// Direct polar quadrature of the Poisson convolution for radial boundary
/// data `f(|y|)`.
///
/// With `y = x + s θ` and `s = t √(v / (1-v))` the kernel measure becomes the
/// Beta density `(p ω_{n-1} / 2) v^{n/2-1} (1-v)^{σ-1} dv`, normalized to 1.
/// The spherical mean of `f` over `|y - x| = s` is computed with the
/// Gegenbauer weight `(1-c²)^{(n-3)/2}`. The `v` integral is split at
/// `v = 1/2`, i.e. at `s = t`.
#[derive(Debug, Clone)]
pub struct KernelRule {
    params: SobolevParams,
    inner: Rule1D,
    outer: Rule1D,
    legendre: Rule1D,
    sphere: Rule1D,
    normalization: f64,
}

impl KernelRule {
    pub fn new(params: &SobolevParams, nodes: usize, sphere_nodes: usize) -> Result<Self> {
        let n = params.nf();
        let g = (n - 3.0) / 2.0;
        let mut sphere = gauss_jacobi(sphere_nodes, g, g)?;
        let total = sphere.weight_sum();
        for w in &mut sphere.weights {
            *w /= total;
        }
        Ok(Self {
            params: *params,
            inner: gauss_jacobi(nodes, 0.0, n / 2.0 - 1.0)?,
            outer: gauss_jacobi(nodes, 0.0, params.sigma() - 1.0)?,
            legendre: gauss_legendre(nodes)?,
            sphere,
            normalization: 0.5 * kernel_constant(params) * sphere_area(params.n() - 1),
        })
    }

    /// Spherical mean of `f(|x + s θ|)` over unit vectors θ, `|x| = r`.
    pub fn sphere_mean(&self, f: &dyn Fn(f64) -> f64, r: f64, s: f64) -> f64 {
        let terms: Vec<f64> = self
            .sphere
            .nodes
            .iter()
            .zip(&self.sphere.weights)
            .map(|(&c, &w)| w * f((r * r + s * s + 2.0 * r * s * c).max(0.0).sqrt()))
            .collect();
        deterministic_sum(&terms)
    }

    /// Extension at `(|x| = r, t)` of the radial data `f`; `scale` is the
    /// length scale of `f` and sets how far out the outer panels reach.
    pub fn extend(&self, f: &dyn Fn(f64) -> f64, r: f64, t: f64, scale: f64) -> f64 {
        let n = self.params.nf();
        let sigma = self.params.sigma();
        let mut terms = Vec::new();
        // v in [0, 1/2]: weight v^{n/2-1}, remaining factor (1-v)^{σ-1}.
        let h: f64 = 0.25;
        let sc = h * h.powf(n / 2.0 - 1.0);
        for (&x, &w) in self.inner.nodes.iter().zip(&self.inner.weights) {
            let v = h * (1.0 + x);
            let s = t * (v / (1.0 - v)).sqrt();
            terms.push(w * sc * (1.0 - v).powf(sigma - 1.0) * self.sphere_mean(f, r, s));
        }
        // y = 1 - v in (0, 1/2]: weight y^{σ-1}, graded toward y = 0 where s → ∞.
        let far = 1e4 * (r + t + scale);
        let y_min = (t / far).powi(2).min(0.25);
        let mut lo = 0.0;
        let mut hi = y_min;
        loop {
            let half = 0.5 * (hi - lo);
            if lo == 0.0 {
                let sc = half * half.powf(sigma - 1.0);
                for (&x, &w) in self.outer.nodes.iter().zip(&self.outer.weights) {
                    let y = half * (1.0 + x);
                    let s = t * ((1.0 - y) / y).sqrt();
                    terms.push(w * sc * (1.0 - y).powf(n / 2.0 - 1.0) * self.sphere_mean(f, r, s));
                }
            } else {
                for (&x, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
                    let y = lo + half * (1.0 + x);
                    let s = t * ((1.0 - y) / y).sqrt();
                    terms.push(
                        w * half * y.powf(sigma - 1.0) * (1.0 - y).powf(n / 2.0 - 1.0) * self.sphere_mean(f, r, s),
                    );
                }
            }
            if hi >= 0.5 {
                break;
            }
            lo = hi;
            hi = (1.5 * hi).min(0.5);
        }
        self.normalization * deterministic_sum(&terms)
    }
}
