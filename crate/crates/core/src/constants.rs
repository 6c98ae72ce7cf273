//! Closed-form constants of the sharp weighted trace inequality.
//!
//! Every gamma quotient is assembled from `ln Γ` terms and exponentiated once,
//! which keeps the evaluation stable for dimensions where `Γ(n)` alone would
//! overflow.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible distance of `sigma` from the endpoints of `(0, 1)`.
pub const SIGMA_MARGIN: f64 = 1e-6;

/// Dimension `n` of the boundary, fractional order `sigma`, and the critical
/// trace exponent `p = 2n / (n - 2 sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevParams {
    n: u32,
    sigma: f64,
    p: f64,
}

impl SobolevParams {
    pub fn new(n: u32, sigma: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
        }
        if !(SIGMA_MARGIN..=1.0 - SIGMA_MARGIN).contains(&sigma) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma} must lie in [{SIGMA_MARGIN}, {}]",
                1.0 - SIGMA_MARGIN
            )));
        }
        let nf = n as f64;
        if nf <= 2.0 * sigma {
            return Err(Error::InvalidParameter(format!("n = {n} must exceed 2 sigma")));
        }
        Ok(Self { n, sigma, p: 2.0 * nf / (nf - 2.0 * sigma) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Decay exponent of the bubble, `(n - 2 sigma) / 2`.
    pub fn half_gap(&self) -> f64 {
        (self.nf() - 2.0 * self.sigma) / 2.0
    }

    /// Exponent `1 - 2 sigma` of the degenerate weight.
    pub fn weight_exponent(&self) -> f64 {
        1.0 - 2.0 * self.sigma
    }

    /// Requires `n > 2 sigma + 2`, the range where the weighted `L^2` norm of
    /// the extended bubble is finite.
    pub fn require_l2_range(&self) -> Result<()> {
        if self.nf() <= 2.0 * self.sigma + 2.0 {
            return Err(Error::Hypothesis(format!(
                "n = {} must exceed 2 sigma + 2 = {}",
                self.n,
                2.0 * self.sigma + 2.0
            )));
        }
        Ok(())
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    libm::lgamma(x)
}

/// Surface area of the unit sphere `S^d ⊂ R^{d+1}`.
pub fn sphere_area(d: u32) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    (2.0f64.ln() + h * PI.ln() - ln_gamma(h)).exp()
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Best constant `S(n, sigma)` of the half-space weighted trace inequality.
pub fn sharp_constant(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    let ln = -(2.0f64.ln()) - s * PI.ln() + ln_gamma(s) - ln_gamma(1.0 - s)
        + ln_gamma((n - 2.0 * s) / 2.0)
        - ln_gamma((n + 2.0 * s) / 2.0)
        + (2.0 * s / n) * (ln_gamma(n) - ln_gamma(n / 2.0));
    ln.exp()
}

/// `kappa_sigma = Γ(σ) / (2^{1-2σ} Γ(1-σ))`; equals 1 at σ = 1/2.
pub fn kappa(sigma: f64) -> f64 {
    (ln_gamma(sigma) - ln_gamma(1.0 - sigma) - (1.0 - 2.0 * sigma) * 2.0f64.ln()).exp()
}

/// Amplitude `alpha_{n,sigma}` of the normalized bubble.
pub fn bubble_amplitude(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    let k = (n - 2.0 * s) / 2.0;
    let ln = k * 2.0f64.ln() + (k / (2.0 * s)) * (ln_gamma((n + 2.0 * s) / 2.0) - ln_gamma(k));
    ln.exp()
}

/// Normalization `p_{n,sigma}` of the extension kernel
/// `t^{2σ} (|x|^2 + t^2)^{-(n+2σ)/2}`.
pub fn kernel_constant(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    (ln_gamma((n + 2.0 * s) / 2.0) - (n / 2.0) * PI.ln() - ln_gamma(s)).exp()
}

/// Ratio between the weighted Dirichlet energy of the unit extended bubble and
/// its weighted `L^2` norm `A0`.
pub fn a0_ratio(params: &SobolevParams) -> Result<f64> {
    params.require_l2_range()?;
    let (n, s) = (params.nf(), params.sigma());
    Ok((n - 2.0) * (n - 2.0 + 2.0 * s) * (n - 2.0 - 2.0 * s) / (4.0 * s * (n - 1.0)))
}

/// `(∫ w^p)` of any bubble: `(S^{-1} κ)^{n / 2σ}`.
pub fn bubble_lp_norm_p(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    ((n / (2.0 * s)) * (kappa(s).ln() - sharp_constant(params).ln())).exp()
}

/// Weighted Dirichlet energy of any extended bubble: `κ^{(n-2σ)/2σ} S^{-n/2σ}`.
pub fn extremal_energy(params: &SobolevParams) -> f64 {
    let (n, s) = (params.nf(), params.sigma());
    (((n - 2.0 * s) / (2.0 * s)) * kappa(s).ln() - (n / (2.0 * s)) * sharp_constant(params).ln())
        .exp()
}

/// Closed-form `A0 = ∫ t^{1-2σ} W_1^2`, obtained from the extremal energy and
/// [`a0_ratio`].
pub fn a0_closed_form(params: &SobolevParams) -> Result<f64> {
    Ok(extremal_energy(params) / a0_ratio(params)?)
}

/// Every named constant for one parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantSet {
    pub sharp: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub pker: f64,
    /// Only defined when `n > 2σ + 2`.
    pub a0_ratio: Option<f64>,
}

impl ConstantSet {
    pub fn compute(params: &SobolevParams) -> Self {
        Self {
            sharp: sharp_constant(params),
            kappa: kappa(params.sigma()),
            alpha: bubble_amplitude(params),
            pker: kernel_constant(params),
            a0_ratio: a0_ratio(params).ok(),
        }
    }
}
