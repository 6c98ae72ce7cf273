//! Physical-space check of the weighted integral identities satisfied by the
//! unit extended bubble `W_1`, with `A0 = ∫ t^{1-2σ} W_1²`:
//!
//! ```text
//! ∫ t^{1-2σ} |x|² |∇W_1|²  = n (n² - 4n(1-σ) + 4(1-σ-σ²)) / (4σ(n-1)) · A0
//! ∫ t^{1-2σ} |∇W_1|²       = (n-2)(n-2+2σ)(n-2-2σ) / (4σ(n-1))       · A0
//! ∫ t^{3-2σ} |∇_x W_1|²    = 2(1-σ²)/3                                · A0
//! ∫ t^{3-2σ} |∇W_1|²       = 2(1-σ)                                   · A0
//! ```
//!
//! Each side is a two-dimensional integral in `(|x|, t)`. The `x`-gradient
//! parts use the weight `t^{1-2σ}`; the `t`-derivative parts are written as
//! `t^{2σ-1} (t^{1-2σ} ∂_t W)²`, whose bracket stays bounded as `t → 0`.

use serde::Serialize;

use crate::bubble::ExtensionRule;
use crate::constants::{a0_ratio, SobolevParams};
use crate::error::{Error, Result};
use crate::quadrature::{tail_bound, CylinderRule, TailModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    X2FullGrad,
    FullGrad,
    T3Xgrad,
    T3FullGrad,
}

impl Identity {
    pub const ALL: [Identity; 4] =
        [Identity::X2FullGrad, Identity::FullGrad, Identity::T3Xgrad, Identity::T3FullGrad];

    pub fn name(self) -> &'static str {
        match self {
            Identity::X2FullGrad => "x2_full_grad",
            Identity::FullGrad => "full_grad",
            Identity::T3Xgrad => "t3_xgrad",
            Identity::T3FullGrad => "t3_full_grad",
        }
    }

    /// Right-hand coefficient multiplying `A0`.
    pub fn coefficient(self, params: &SobolevParams) -> Result<f64> {
        params.require_l2_range()?;
        let (n, s) = (params.nf(), params.sigma());
        Ok(match self {
            Identity::X2FullGrad => {
                n * (n * n - 4.0 * n * (1.0 - s) + 4.0 * (1.0 - s - s * s)) / (4.0 * s * (n - 1.0))
            }
            Identity::FullGrad => a0_ratio(params)?,
            Identity::T3Xgrad => 2.0 * (1.0 - s * s) / 3.0,
            Identity::T3FullGrad => 2.0 * (1.0 - s),
        })
    }

    /// Extra power of `|(x, t)|` carried by the integrand.
    fn moment(self) -> f64 {
        match self {
            Identity::FullGrad => 0.0,
            _ => 2.0,
        }
    }

    fn includes_t_part(self) -> bool {
        !matches!(self, Identity::T3Xgrad)
    }

    /// Multiplier applied to the squared gradient at `(r, t)`.
    fn factor(self, r: f64, t: f64) -> f64 {
        match self {
            Identity::X2FullGrad => r * r,
            Identity::FullGrad => 1.0,
            Identity::T3Xgrad | Identity::T3FullGrad => t * t,
        }
    }
}

impl std::str::FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Identity::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown identity {s:?}")))
    }
}

/// Truncation and resolution of the half-space quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRule {
    /// Nodes per panel.
    pub nodes: usize,
    /// Cylinder radius and height.
    pub extent: f64,
    /// Width of the first `t`-panel; geometric panels resolve `t^{2σ}`.
    pub t_first: f64,
}

impl Default for IdentityRule {
    fn default() -> Self {
        Self { nodes: 8, extent: 512.0, t_first: 1e-6 }
    }
}

impl IdentityRule {
    /// Twice the nodes per panel and twice the extent.
    pub fn doubled(self) -> Self {
        Self { nodes: 2 * self.nodes, extent: 2.0 * self.extent, t_first: self.t_first }
    }

    fn cylinder(&self, params: &SobolevParams, t_exponent: f64) -> Result<CylinderRule> {
        CylinderRule::new(params.n(), t_exponent, self.extent, self.extent, 0.25, self.t_first, self.nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A0Value {
    pub value: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    pub coefficient: f64,
    pub a0: f64,
    pub rel_err: f64,
    /// Bound on `|lhs - rhs|` caused by truncating both integrals.
    pub tail_bound: f64,
    /// Set when the truncation bound alone exceeds `tol · |rhs| / 10`.
    pub tail_flagged: bool,
    pub params: SobolevParams,
}

/// Evaluator sharing one extension rule across identities.
pub struct AppendixOracle {
    params: SobolevParams,
    ext: ExtensionRule,
    tol: f64,
}

impl AppendixOracle {
    /// `tol` is the relative tolerance against which truncation is flagged.
    pub fn new(params: &SobolevParams, tol: f64) -> Result<Self> {
        params.require_l2_range()?;
        Ok(Self { params: *params, ext: ExtensionRule::new(params, 16, 1e-7)?, tol })
    }

    fn x_weight(&self) -> f64 {
        self.params.weight_exponent()
    }

    fn t_weight(&self) -> f64 {
        -self.params.weight_exponent()
    }

    /// `(W, W_r², g)` with `g = (t^{1-2σ} ∂_t W)²`.
    fn fields(&self, r: f64, t: f64) -> Result<[f64; 3]> {
        let e = self.ext.radial(1.0, r, t)?;
        let g = t.powf(self.x_weight()) * e.d_t;
        Ok([e.value, e.d_r * e.d_r, g * g])
    }

    fn a0_on(&self, rule: &IdentityRule) -> Result<A0Value> {
        let cyl = rule.cylinder(&self.params, self.x_weight())?;
        let samples = cyl.sample(|r, t| self.fields(r, t))?;
        let vals: Vec<f64> = samples.iter().map(|s| s[0] * s[0]).collect();
        let value = cyl.integrate_values(&vals);
        let tail = self.a0_tail(&cyl)?;
        Ok(A0Value { value, tail_bound: tail })
    }

    fn a0_tail(&self, cyl: &CylinderRule) -> Result<f64> {
        let decay = 2.0 * (self.params.nf() - 2.0 * self.params.sigma());
        tail_bound(|r, t| Ok(self.fields(r, t)?[0].powi(2)), cyl, TailModel { decay })
    }

    /// `A0` with a truncation bound; fails if the bound does not shrink when
    /// the cylinder is doubled.
    pub fn verify_a0_finite(&self, rule: &IdentityRule) -> Result<A0Value> {
        let a0 = self.a0_on(rule)?;
        let bigger = IdentityRule { extent: 2.0 * rule.extent, ..*rule };
        let large_tail = self.a0_tail(&bigger.cylinder(&self.params, self.x_weight())?)?;
        if !(large_tail < a0.tail_bound) {
            return Err(Error::Divergent { small: a0.tail_bound, large: large_tail });
        }
        Ok(a0)
    }

    /// All four identities from one pass over the quadrature nodes.
    pub fn verify_all(&self, rule: &IdentityRule) -> Result<Vec<IdentityReport>> {
        let (n, s) = (self.params.nf(), self.params.sigma());
        let xcyl = rule.cylinder(&self.params, self.x_weight())?;
        let tcyl = rule.cylinder(&self.params, self.t_weight())?;
        let xs = xcyl.sample(|r, t| self.fields(r, t))?;
        let ts = tcyl.sample(|r, t| self.fields(r, t))?;
        let nt_x = xcyl.t.len();
        let nt_t = tcyl.t.len();

        let a0_vals: Vec<f64> = xs.iter().map(|v| v[0] * v[0]).collect();
        let a0 = xcyl.integrate_values(&a0_vals);
        let a0_tail = self.a0_tail(&xcyl)?;

        let x_decay = 2.0 * (n - 2.0 * s + 1.0);
        let t_decay = 2.0 * n;
        let mut out = Vec::with_capacity(4);
        for id in Identity::ALL {
            let coefficient = id.coefficient(&self.params)?;
            let xv: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, v)| v[1] * id.factor(xcyl.r.nodes[i / nt_x], xcyl.t.nodes[i % nt_x]))
                .collect();
            let mut lhs = xcyl.integrate_values(&xv);
            let mut tail = tail_bound(
                |r, t| Ok(self.fields(r, t)?[1] * id.factor(r, t)),
                &xcyl,
                TailModel { decay: x_decay - id.moment() },
            )?;
            if id.includes_t_part() {
                let tv: Vec<f64> = ts
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v[2] * id.factor(tcyl.r.nodes[i / nt_t], tcyl.t.nodes[i % nt_t]))
                    .collect();
                lhs += tcyl.integrate_values(&tv);
                tail += tail_bound(
                    |r, t| Ok(self.fields(r, t)?[2] * id.factor(r, t)),
                    &tcyl,
                    TailModel { decay: t_decay - id.moment() },
                )?;
            }
            let rhs = coefficient * a0;
            let tail_bound = tail + coefficient * a0_tail;
            out.push(IdentityReport {
                identity: id,
                lhs,
                rhs,
                coefficient,
                a0,
                rel_err: ((lhs - rhs) / rhs).abs(),
                tail_bound,
                tail_flagged: tail_bound > 0.1 * self.tol * rhs.abs(),
                params: self.params,
            });
        }
        Ok(out)
    }

    pub fn verify_identity(&self, which: Identity, rule: &IdentityRule) -> Result<IdentityReport> {
        Ok(self.verify_all(rule)?.into_iter().find(|r| r.identity == which).expect("all identities reported"))
    }
}
