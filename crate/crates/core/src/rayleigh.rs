//! Discrete minimization of the trace quotient on the flat model
//! `T^n × [0, T]` (torus side `L`) with defining function `ρ = t(T−t)/T`.
//!
//! Values live on the nodes of a tensor grid: `J_x` periodic points per torus
//! direction and `J_t + 1` graded points in `t`, clustered at both ends by
//! `t_j = T/2 · (j / (J_t/2))^γ`, `γ = max(1, 1/(1−σ))`, mirrored about
//! `T/2`. Node `(j, x_1, …, x_n)` is stored at `j·J_x^n + Σ x_i J_x^{n−1−i}`.
//!
//! The energy is the exact integral of the weight against the piecewise
//! linear interpolant in `t`:
//!
//! ```text
//! E(u) = h^n Σ_j c_j ((u_{j+1} − u_j) / Δt_j)²  +  h^n Σ_j D_j |∇_h u_j|²
//! c_j = ∫_{t_j}^{t_{j+1}} ρ^{1−2σ},    D_j = ∫ ρ^{1−2σ} φ_j   (φ_j the hat at t_j)
//! ```
//!
//! with `h = L / J_x` and forward differences `∇_h` on the torus. Both
//! boundary components carry the counting measure `h^n`.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bubble::w_radial;
use crate::constants::SobolevParams;
use crate::error::{Error, Result};
use crate::quadrature::{deterministic_sum, left_singular, legendre_on, par_eval, right_singular};

/// Upper bound on grid nodes accepted from user input or checkpoints.
pub const MAX_NODES: usize = 1 << 26;

/// `J_x` per torus direction and `J_t` intervals in `t`; parsed from `"Jx,Jt"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub jx: usize,
    pub jt: usize,
}

impl GridSpec {
    pub fn new(jx: usize, jt: usize) -> Result<Self> {
        for (name, v) in [("Jx", jx), ("Jt", jt)] {
            if !(4..=4096).contains(&v) || v % 2 != 0 {
                return Err(Error::InvalidParameter(format!("{name} must be even and in 4..=4096, got {v}")));
            }
        }
        Ok(Self { jx, jt })
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(',').ok_or_else(|| Error::Parse(format!("grid {s:?} is not \"Jx,Jt\"")))?;
        let parse = |v: &str| {
            v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("grid entry {v:?} is not an integer")))
        };
        GridSpec::new(parse(a)?, parse(b)?)
    }
}

/// Increasing penalty weights, parsed from a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule(Vec<f64>);

impl AlphaSchedule {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() > 64 {
            return Err(Error::InvalidParameter("alpha schedule needs 1..=64 entries".into()));
        }
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter("alpha values must be finite and nonnegative".into()));
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("alpha schedule must be strictly increasing".into()));
        }
        Ok(Self(alphas))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn last(&self) -> f64 {
        *self.0.last().expect("schedule is nonempty")
    }
}

impl FromStr for AlphaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("alpha entry {v:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        AlphaSchedule::new(vals)
    }
}

/// Everything needed to rebuild a [`CylinderModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: u32,
    pub sigma: f64,
    pub period: f64,
    pub height: f64,
    pub grid: GridSpec,
}

impl ModelSpec {
    /// Number of grid nodes, or an error if it overflows or exceeds
    /// [`MAX_NODES`].
    pub fn node_count(&self) -> Result<usize> {
        let slab = self
            .grid
            .jx
            .checked_pow(self.n)
            .ok_or_else(|| Error::InvalidParameter("grid size overflows".into()))?;
        let total = slab
            .checked_mul(self.grid.jt + 1)
            .filter(|&t| t <= MAX_NODES)
            .ok_or_else(|| Error::InvalidParameter(format!("grid exceeds {MAX_NODES} nodes")))?;
        Ok(total)
    }
}

pub struct CylinderModel {
    spec: ModelSpec,
    params: SobolevParams,
    t: Vec<f64>,
    dt: Vec<f64>,
    cell: Vec<f64>,
    dual: Vec<f64>,
    slab: usize,
    dx: f64,
    measure: f64,
    lambda: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CylinderModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CylinderModel").field("spec", &self.spec).finish()
    }
}

impl CylinderModel {
    pub fn new(params: &SobolevParams, period: f64, height: f64, grid: GridSpec) -> Result<Self> {
        let spec = ModelSpec { n: params.n(), sigma: params.sigma(), period, height, grid };
        Self::from_spec(spec)
    }

    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        let params = SobolevParams::new(spec.n, spec.sigma)?;
        let grid = GridSpec::new(spec.grid.jx, spec.grid.jt)?;
        if !(spec.period > 0.0 && spec.period.is_finite() && spec.height > 0.0 && spec.height.is_finite()) {
            return Err(Error::InvalidParameter("period and height must be positive and finite".into()));
        }
        let total = spec.node_count()?;
        let slab = total / (grid.jt + 1);
        let t = graded_nodes(spec.height, grid.jt, grading_exponent(spec.sigma));
        let dt: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let a = params.weight_exponent();
        let mut cell = Vec::with_capacity(grid.jt);
        let mut left = Vec::with_capacity(grid.jt);
        let mut right = Vec::with_capacity(grid.jt);
        for j in 0..grid.jt {
            let (lo, hi) = (t[j], t[j + 1]);
            cell.push(weight_integral(spec.height, a, lo, hi, &|_| 1.0)?);
            left.push(weight_integral(spec.height, a, lo, hi, &|s| (hi - s) / (hi - lo))?);
            right.push(weight_integral(spec.height, a, lo, hi, &|s| (s - lo) / (hi - lo))?);
        }
        let dual: Vec<f64> = (0..=grid.jt)
            .map(|j| {
                let below = if j > 0 { right[j - 1] } else { 0.0 };
                let above = if j < grid.jt { left[j] } else { 0.0 };
                below + above
            })
            .collect();
        let dx = spec.period / grid.jx as f64;
        let measure = dx.powi(spec.n as i32);
        let n = spec.n as usize;
        let lambda = (0..slab)
            .map(|m| {
                let mut acc = 0.0;
                let mut rest = m;
                for _ in 0..n {
                    let k = rest % grid.jx;
                    rest /= grid.jx;
                    acc += (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / grid.jx as f64).cos()) / (dx * dx);
                }
                acc
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.jx);
        let ifft = planner.plan_fft_inverse(grid.jx);
        Ok(Self { spec, params, t, dt, cell, dual, slab, dx, measure, lambda, fft, ifft })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn slab_len(&self) -> usize {
        self.slab
    }

    pub fn node_count(&self) -> usize {
        self.slab * (self.spec.grid.jt + 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn rho(&self, t: f64) -> f64 {
        t * (self.spec.height - t) / self.spec.height
    }

    /// Coordinates of torus node `xi`.
    pub fn x_coords(&self, xi: usize) -> Vec<f64> {
        let n = self.spec.n as usize;
        let mut out = vec![0.0; n];
        let mut rest = xi;
        for i in (0..n).rev() {
            out[i] = (rest % self.spec.grid.jx) as f64 * self.dx;
            rest /= self.spec.grid.jx;
        }
        out
    }

    /// Field from `f(x, t)` sampled at every node.
    pub fn sample(&self, f: impl Fn(&[f64], f64) -> f64 + Sync) -> DiscreteField {
        let slabs = par_eval(self.t.len(), |j| {
            (0..self.slab).map(|xi| f(&self.x_coords(xi), self.t[j])).collect::<Vec<f64>>()
        });
        DiscreteField { values: slabs.concat(), slab: self.slab }
    }

    pub fn zeros(&self) -> DiscreteField {
        DiscreteField { values: vec![0.0; self.node_count()], slab: self.slab }
    }

    fn check(&self, u: &DiscreteField) -> Result<()> {
        if u.values.len() != self.node_count() || u.slab != self.slab {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, model has {} nodes",
                u.values.len(),
                self.node_count()
            )));
        }
        Ok(())
    }

    fn neighbors(&self, xi: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let jx = self.spec.grid.jx;
        let n = self.spec.n as usize;
        (0..n).map(move |i| {
            let stride = jx.pow((n - 1 - i) as u32);
            let c = (xi / stride) % jx;
            let up = if c + 1 < jx { xi + stride } else { xi + stride - jx * stride };
            let down = if c > 0 { xi - stride } else { xi + (jx - 1) * stride };
            (up, down)
        })
    }

    fn stiffness(&self, j: usize) -> f64 {
        self.cell[j] / (self.dt[j] * self.dt[j])
    }

    /// Weighted Dirichlet energy.
    pub fn energy(&self, u: &DiscreteField) -> Result<f64> {
        self.check(u)?;
        let jt = self.spec.grid.jt;
        let parts = par_eval(jt + 1, |j| {
            let s = u.slab(j);
            let mut terms = Vec::with_capacity(self.slab * 2);
            let dx2 = self.dx * self.dx;
            for xi in 0..self.slab {
                let mut g = 0.0;
                for (up, _) in self.neighbors(xi) {
                    let d = s[up] - s[xi];
                    g += d * d;
                }
                terms.push(self.dual[j] * g / dx2);
                if j < jt {
                    let d = u.slab(j + 1)[xi] - s[xi];
                    terms.push(self.stiffness(j) * d * d);
                }
            }
            deterministic_sum(&terms)
        });
        Ok(self.measure * deterministic_sum(&parts))
    }

    /// `K u` with `E(u) = uᵀ K u`.
    pub fn apply_stiffness(&self, u: &DiscreteField) -> Result<DiscreteField> {
        self.check(u)?;
        let jt = self.spec.grid.jt;
        let dx2 = self.dx * self.dx;
        let slabs = par_eval(jt + 1, |j| {
            let s = u.slab(j);
            (0..self.slab)
                .map(|xi| {
                    let mut lap = 0.0;
                    for (up, down) in self.neighbors(xi) {
                        lap += 2.0 * s[xi] - s[up] - s[down];
                    }
                    let mut v = self.dual[j] * lap / dx2;
                    if j > 0 {
                        v += self.stiffness(j - 1) * (s[xi] - u.slab(j - 1)[xi]);
                    }
                    if j < jt {
                        v += self.stiffness(j) * (s[xi] - u.slab(j + 1)[xi]);
                    }
                    self.measure * v
                })
                .collect::<Vec<f64>>()
        });
        Ok(DiscreteField { values: slabs.concat(), slab: self.slab })
    }

    /// `∫|u|^p`, `∫|u|^{p−2}u`, `∫u²` over both boundary components.
    pub fn trace_integrals(&self, u: &DiscreteField) -> Result<TraceIntegrals> {
        self.check(u)?;
        let p = self.params.p();
        let jt = self.spec.grid.jt;
        let mut lp = Vec::with_capacity(2 * self.slab);
        let mut sm = Vec::with_capacity(2 * self.slab);
        let mut l2 = Vec::with_capacity(2 * self.slab);
        let mut abs = Vec::with_capacity(2 * self.slab);
        for &v in u.slab(0).iter().chain(u.slab(jt)) {
            let a = abs_pow(v, p - 2.0);
            lp.push(a * v * v);
            sm.push(a * v);
            l2.push(v * v);
            abs.push(a * v.abs());
        }
        Ok(TraceIntegrals {
            lp_norm_p: self.measure * deterministic_sum(&lp),
            signed_mean: self.measure * deterministic_sum(&sm),
            l2: self.measure * deterministic_sum(&l2),
            abs_moment: self.measure * deterministic_sum(&abs),
        })
    }

    /// Boundary volume `2 L^n`.
    pub fn boundary_volume(&self) -> f64 {
        2.0 * self.measure * self.slab as f64
    }

    /// `E / (∫|u|^p)^{2/p}` without penalty.
    pub fn quotient(&self, u: &DiscreteField) -> Result<f64> {
        let e = self.energy(u)?;
        let tr = self.trace_integrals(u)?;
        if !(tr.lp_norm_p > 0.0) {
            return Err(Error::DegenerateTrace(tr.lp_norm_p));
        }
        Ok(e / tr.lp_norm_p.powf(2.0 / self.params.p()))
    }

    /// `I_α(u) = (E + α |∫|u|^{p−2}u|^{2/(p−1)}) / (∫|u|^p)^{2/p}`.
    pub fn i_alpha(&self, u: &DiscreteField, alpha: f64) -> Result<Evaluation> {
        let energy = self.energy(u)?;
        let traces = self.trace_integrals(u)?;
        if !(traces.lp_norm_p > 1e-300) {
            return Err(Error::DegenerateTrace(traces.lp_norm_p));
        }
        let p = self.params.p();
        let penalty = alpha * traces.signed_mean.abs().powf(2.0 / (p - 1.0));
        let value = (energy + penalty) / traces.lp_norm_p.powf(2.0 / p);
        if !value.is_finite() {
            return Err(Error::NonFinite("I_alpha".into()));
        }
        Ok(Evaluation { energy, traces, penalty, value })
    }

    /// Euclidean gradient of `I_α` with respect to the nodal values.
    pub fn i_alpha_gradient(&self, u: &DiscreteField, alpha: f64, ev: &Evaluation) -> Result<DiscreteField> {
        let p = self.params.p();
        let q = 2.0 / (p - 1.0);
        let lp = ev.traces.lp_norm_p;
        let denom = lp.powf(2.0 / p);
        let numer = ev.energy + ev.penalty;
        let sm = ev.traces.signed_mean;
        // The penalty has a cusp on the constraint set; there it contributes
        // the zero subgradient.
        let pen_slope = if ev.traces.on_constraint() || alpha == 0.0 {
            0.0
        } else {
            alpha * q * sm.abs().powf(q - 1.0) * sm.signum() * (p - 1.0) * self.measure
        };
        let dl_scale = 2.0 * lp.powf(2.0 / p - 1.0) * self.measure;
        let mut g = self.apply_stiffness(u)?;
        for v in g.values.iter_mut() {
            *v *= 2.0 / denom;
        }
        let jt = self.spec.grid.jt;
        for j in [0, jt] {
            let off = j * self.slab;
            for xi in 0..self.slab {
                let v = u.values[off + xi];
                let a = abs_pow(v, p - 2.0);
                let d_numer = pen_slope * a;
                let d_denom = dl_scale * a * v;
                g.values[off + xi] += d_numer / denom - numer * d_denom / (denom * denom);
            }
        }
        Ok(g)
    }

    fn forward_slab(&self, data: &mut [Complex64]) {
        self.transform_slab(data, &self.fft);
    }

    fn inverse_slab(&self, data: &mut [Complex64]) {
        self.transform_slab(data, &self.ifft);
        let scale = 1.0 / self.slab as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform_slab(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let jx = self.spec.grid.jx;
        let n = self.spec.n as usize;
        let mut line = vec![Complex64::new(0.0, 0.0); jx];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..n {
            let stride = jx.pow((n - 1 - axis) as u32);
            for base in 0..self.slab {
                if !(base / stride).is_multiple_of(jx) {
                    continue;
                }
                for k in 0..jx {
                    line[k] = data[base + k * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for k in 0..jx {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }

    fn spectrum(&self, u: &DiscreteField) -> Vec<Vec<Complex64>> {
        par_eval(self.t.len(), |j| {
            let mut s: Vec<Complex64> = u.slab(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.forward_slab(&mut s);
            s
        })
    }

    fn field_from_spectrum(&self, spec: Vec<Vec<Complex64>>) -> DiscreteField {
        let slabs = par_eval(spec.len(), |j| {
            let mut s = spec[j].clone();
            self.inverse_slab(&mut s);
            s.into_iter().map(|c| c.re).collect::<Vec<f64>>()
        });
        DiscreteField { values: slabs.concat(), slab: self.slab }
    }

    /// Tridiagonal `(diag, off)` of the stiffness for Fourier mode `m`,
    /// without the `h^n` factor.
    fn mode_matrix(&self, m: usize, boundary_mass: f64) -> (Vec<f64>, Vec<f64>) {
        let jt = self.spec.grid.jt;
        let lam = self.lambda[m];
        let off: Vec<f64> = (0..jt).map(|j| -self.stiffness(j)).collect();
        let diag: Vec<f64> = (0..=jt)
            .map(|j| {
                let mut d = self.dual[j] * lam;
                if j > 0 {
                    d += self.stiffness(j - 1);
                }
                if j < jt {
                    d += self.stiffness(j);
                }
                if j == 0 || j == jt {
                    d += boundary_mass;
                }
                d
            })
            .collect();
        (diag, off)
    }

    /// Solves `(K + β M_∂) d = g`, `M_∂` the boundary counting measure.
    pub fn precondition(&self, g: &DiscreteField, beta: f64) -> Result<DiscreteField> {
        self.check(g)?;
        let spec = self.spectrum(g);
        let cols = par_eval(self.slab, |m| {
            let (diag, off) = self.mode_matrix(m, beta);
            let mut rhs: Vec<Complex64> = spec.iter().map(|s| s[m] / self.measure).collect();
            thomas(&off, &diag, &mut rhs);
            rhs
        });
        Ok(self.field_from_spectrum(transpose(cols, self.t.len())))
    }

    /// Discrete weighted-harmonic field with the given boundary traces.
    pub fn harmonic_extension(&self, bottom: &[f64], top: &[f64]) -> Result<DiscreteField> {
        if bottom.len() != self.slab || top.len() != self.slab {
            return Err(Error::InvalidParameter("trace length does not match the torus grid".into()));
        }
        let jt = self.spec.grid.jt;
        let mut u = self.zeros();
        u.values[..self.slab].copy_from_slice(bottom);
        u.values[jt * self.slab..].copy_from_slice(top);
        let spec = self.spectrum(&u);
        let cols = par_eval(self.slab, |m| {
            let (diag, off) = self.mode_matrix(m, 0.0);
            let mut rhs = vec![Complex64::new(0.0, 0.0); jt - 1];
            rhs[0] -= spec[0][m] * off[0];
            rhs[jt - 2] -= spec[jt][m] * off[jt - 1];
            thomas(&off[1..jt - 1], &diag[1..jt], &mut rhs);
            let mut col = Vec::with_capacity(jt + 1);
            col.push(spec[0][m]);
            col.extend(rhs);
            col.push(spec[jt][m]);
            col
        });
        let mut out = self.field_from_spectrum(transpose(cols, self.t.len()));
        out.values[..self.slab].copy_from_slice(bottom);
        out.values[jt * self.slab..].copy_from_slice(top);
        Ok(out)
    }

    /// Copy scaled so that `∫|u|^p = 1`.
    pub fn normalized(&self, u: &DiscreteField) -> Result<DiscreteField> {
        let lp = self.trace_integrals(u)?.lp_norm_p;
        if !(lp > 1e-300) {
            return Err(Error::DegenerateTrace(lp));
        }
        let c = lp.powf(-1.0 / self.params.p());
        Ok(DiscreteField { values: u.values.iter().map(|v| v * c).collect(), slab: self.slab })
    }
}

/// `|u|^e`, zero at `u = 0`.
fn abs_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(e)
    }
}

fn grading_exponent(sigma: f64) -> f64 {
    (1.0 / (1.0 - sigma)).max(1.0)
}

fn graded_nodes(height: f64, jt: usize, gamma: f64) -> Vec<f64> {
    let half = jt / 2;
    let mut t = vec![0.0; jt + 1];
    for j in 0..=half {
        t[j] = 0.5 * height * (j as f64 / half as f64).powf(gamma);
        t[jt - j] = height - t[j];
    }
    t[half] = 0.5 * height;
    t
}

/// `∫_lo^hi ρ^a f`. Cells closer to an end than their width are written as
/// differences of Jacobi integrals anchored at that end.
fn weight_integral(height: f64, a: f64, lo: f64, hi: f64, f: &dyn Fn(f64) -> f64) -> Result<f64> {
    let m = 12;
    let rho = |s: f64| s * (height - s) / height;
    let width = hi - lo;
    if a == 0.0 || (lo >= width && height - hi >= width) {
        return Ok(legendre_on(lo, hi, m)?.integrate(|s| rho(s).powf(a) * f(s)));
    }
    if hi <= 0.5 * height {
        let g = |s: f64| ((height - s) / height).powf(a) * f(s);
        let upper = left_singular(0.0, hi, a, m)?.integrate(g);
        let lower = if lo > 0.0 { left_singular(0.0, lo, a, m)?.integrate(g) } else { 0.0 };
        return Ok(upper - lower);
    }
    let g = |s: f64| (s / height).powf(a) * f(s);
    let lower = right_singular(lo, height, a, m)?.integrate(g);
    let upper = if hi < height { right_singular(hi, height, a, m)?.integrate(g) } else { 0.0 };
    Ok(lower - upper)
}

/// Symmetric tridiagonal solve with real coefficients.
fn thomas(off: &[f64], diag: &[f64], rhs: &mut [Complex64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = if n > 1 { off[0] / d } else { 0.0 };
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / d;
        }
        rhs[i] = (rhs[i] - rhs[i - 1] * off[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= rhs[i + 1] * c[i];
    }
}

fn transpose(cols: Vec<Vec<Complex64>>, rows: usize) -> Vec<Vec<Complex64>> {
    (0..rows).map(|j| cols.iter().map(|c| c[j]).collect()).collect()
}

/// Nodal values on a [`CylinderModel`] grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    values: Vec<f64>,
    slab: usize,
}

impl DiscreteField {
    pub fn from_values(model: &CylinderModel, values: Vec<f64>) -> Result<Self> {
        let f = Self { values, slab: model.slab };
        model.check(&f)?;
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field value".into()));
        }
        Ok(f)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slab(&self, j: usize) -> &[f64] {
        &self.values[j * self.slab..(j + 1) * self.slab]
    }

    /// Trace at `t = 0`.
    pub fn bottom(&self) -> &[f64] {
        self.slab(0)
    }

    /// Trace at `t = T`.
    pub fn top(&self) -> &[f64] {
        let last = self.values.len() / self.slab - 1;
        self.slab(last)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), slab: self.slab }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), slab: self.slab }
    }

    fn axpy(&self, s: f64, d: &DiscreteField) -> Self {
        Self { values: self.values.iter().zip(&d.values).map(|(u, v)| u + s * v).collect(), slab: self.slab }
    }

    fn dot(&self, other: &DiscreteField) -> f64 {
        let terms: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        deterministic_sum(&terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceIntegrals {
    pub lp_norm_p: f64,
    pub signed_mean: f64,
    pub l2: f64,
    /// `∫|u|^{p−1}`, the scale against which `signed_mean` is rounded.
    pub abs_moment: f64,
}

impl TraceIntegrals {
    /// `signed_mean` is indistinguishable from zero at working precision.
    pub fn on_constraint(&self) -> bool {
        self.signed_mean.abs() <= 64.0 * f64::EPSILON * self.abs_moment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub energy: f64,
    pub traces: TraceIntegrals,
    pub penalty: f64,
    pub value: f64,
}

/// Descent controls. Each iteration tries `initial_step` and halves it up to
/// `max_backtracks` times until the Armijo condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub max_iter: usize,
    /// Stop once an accepted step lowers `I_α` by less than this, relatively.
    pub rel_tol: f64,
    /// Boundary mass added to the preconditioner.
    pub beta: f64,
    pub armijo: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { max_iter: 300, rel_tol: 1e-10, beta: 1.0, armijo: 1e-4, initial_step: 1.0, max_backtracks: 50 }
    }
}

/// One accepted descent step; serialized as a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub alpha: f64,
    pub i_alpha: f64,
    pub energy: f64,
    pub lp_norm_p: f64,
    pub signed_mean: f64,
    pub step: f64,
    pub interior_residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub field: DiscreteField,
    pub xi_alpha: f64,
    pub history: Vec<HistoryRow>,
    /// Set when backtracking ran out after at least one accepted step.
    pub stalled: bool,
}

/// Preconditioned gradient descent on `I_α` from `start`, keeping
/// `∫|u|^p = 1`. The returned history is nonincreasing in `i_alpha`.
pub fn minimize_i_alpha(
    model: &CylinderModel,
    alpha: f64,
    start: &DiscreteField,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let mut u = model.normalized(start)?;
    let mut ev = model.i_alpha(&u, alpha)?;
    let mut history = Vec::new();
    let mut stalled = false;
    for it in 0..opts.max_iter {
        let g = model.i_alpha_gradient(&u, alpha, &ev)?;
        let d = model.precondition(&g, opts.beta)?;
        let slope = g.dot(&d);
        if !(slope > 0.0) {
            break;
        }
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = u.axpy(-step, &d);
            if let Ok(tev) = model.i_alpha(&trial, alpha) {
                if tev.value <= ev.value - opts.armijo * step * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(trial) = accepted else {
            if it == 0 {
                return Err(Error::NonMonotone(0));
            }
            stalled = true;
            break;
        };
        u = model.normalized(&trial)?;
        let new = model.i_alpha(&u, alpha)?;
        let decrease = ev.value - new.value;
        ev = new;
        history.push(HistoryRow {
            iteration: it,
            alpha,
            i_alpha: ev.value,
            energy: ev.energy,
            lp_norm_p: ev.traces.lp_norm_p,
            signed_mean: ev.traces.signed_mean,
            step,
            interior_residual: interior_residual(model, &u, None)?,
        });
        if decrease <= opts.rel_tol * ev.value.abs() {
            break;
        }
    }
    Ok(FlowResult { field: u, xi_alpha: ev.value, history, stalled })
}

/// Shifts `u` by the constant `c` making `∫|u − c|^{p−2}(u − c) = 0`.
pub fn project_to_constraint(model: &CylinderModel, u: &DiscreteField) -> Result<(DiscreteField, f64)> {
    let p = model.params.p();
    let jt = model.spec.grid.jt;
    let trace: Vec<f64> = u.slab(0).iter().chain(u.slab(jt)).copied().collect();
    let signed = |c: f64| {
        let terms: Vec<f64> = trace.iter().map(|&v| abs_pow(v - c, p - 2.0) * (v - c)).collect();
        deterministic_sum(&terms)
    };
    let lo0 = trace.iter().copied().fold(f64::INFINITY, f64::min);
    let hi0 = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi0 > lo0) {
        return Err(Error::DegenerateTrace(0.0));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if signed(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (hi0 - lo0) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok((u.shifted(-c), c))
}

/// Boundary data `w_ε(x − a) − w_ε(x − a − (L/2, …, L/2))` at `t = 0`
/// (torus distance), zero at `t = T`, extended weighted-harmonically. The
/// bottom trace is odd under the half-period shift, so its signed mean
/// vanishes.
pub fn two_bubble_competitor(model: &CylinderModel, eps: f64) -> Result<DiscreteField> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("bubble scale must be positive, got {eps}")));
    }
    let l = model.spec.period;
    let half = 0.5 * l;
    let torus_dist = |x: &[f64], shift: f64| {
        x.iter()
            .map(|&xi| {
                let d = (xi - shift).rem_euclid(l);
                let d = d.min(l - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let bottom: Vec<f64> = (0..model.slab)
        .map(|xi| {
            let x = model.x_coords(xi);
            w_radial(&model.params, eps, torus_dist(&x, 0.0)) - w_radial(&model.params, eps, torus_dist(&x, half))
        })
        .collect();
    model.harmonic_extension(&bottom, &vec![0.0; model.slab])
}

/// Competitor plus a smooth random low-mode perturbation.
fn perturbed(model: &CylinderModel, base: &DiscreteField, seed: u64) -> DiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = base.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = model.spec.n as usize;
    let modes: Vec<(Vec<f64>, f64, f64, f64)> = (0..4)
        .map(|_| {
            let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
            (k, rng.gen_range(-0.2..0.2) * scale, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..1.0))
        })
        .collect();
    let (l, height) = (model.spec.period, model.spec.height);
    let noise = model.sample(|x, t| {
        modes
            .iter()
            .map(|(k, a, phase, tilt)| {
                let arg: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>() * std::f64::consts::TAU / l;
                a * (arg + phase).cos() * (1.0 - tilt * t / height)
            })
            .sum()
    });
    base.axpy(1.0, &noise)
}

/// Controls for [`mu_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuOptions {
    /// Bubble scale of the two-bubble start.
    pub eps: f64,
    /// Restart 0 starts from the competitor itself; the others perturb it.
    pub restarts: usize,
    pub seed: u64,
    pub flow: FlowOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartReport {
    pub restart: usize,
    pub xi_alpha: f64,
    /// `None` when the descent ended on a constant trace.
    pub mu_hat: Option<f64>,
    pub shift: Option<f64>,
    pub iterations: usize,
    pub stalled: bool,
}

#[derive(Debug, Clone)]
pub struct MuEstimate {
    /// Smallest projected quotient over restarts; an upper bound on the
    /// discrete infimum over the constraint set.
    pub mu_hat: f64,
    pub xi_alpha: f64,
    pub competitor_quotient: f64,
    pub field: DiscreteField,
    pub restarts: Vec<RestartReport>,
    /// Descent history of the winning restart across the schedule.
    pub history: Vec<HistoryRow>,
}

/// Continuation through the α schedule from each start, then projection onto
/// the constraint set; the best restart is reported.
pub fn mu_estimate(model: &CylinderModel, schedule: &AlphaSchedule, opts: &MuOptions) -> Result<MuEstimate> {
    let competitor = two_bubble_competitor(model, opts.eps)?;
    let competitor_quotient = model.quotient(&project_to_constraint(model, &competitor)?.0)?;
    let mut best: Option<MuEstimate> = None;
    let mut reports = Vec::new();
    for r in 0..opts.restarts.max(1) {
        let mut u =
            if r == 0 { competitor.clone() } else { perturbed(model, &competitor, opts.seed.wrapping_add(r as u64)) };
        let mut history = Vec::new();
        let mut xi = f64::NAN;
        let mut stalled = false;
        for &alpha in schedule.values() {
            match minimize_i_alpha(model, alpha, &u, &opts.flow) {
                Ok(res) => {
                    history.extend(res.history);
                    xi = res.xi_alpha;
                    stalled |= res.stalled;
                    u = res.field;
                }
                // No descent from this start at this α: keep the field.
                Err(Error::NonMonotone(_)) => {
                    u = model.normalized(&u)?;
                    xi = model.i_alpha(&u, alpha)?.value;
                    stalled = true;
                }
                Err(e) => return Err(e),
            }
        }
        // A restart that collapsed onto a constant trace has nothing to project.
        let (projected, shift) = match project_to_constraint(model, &u) {
            Ok(v) => v,
            Err(Error::DegenerateTrace(_)) => {
                reports.push(RestartReport {
                    restart: r,
                    xi_alpha: xi,
                    mu_hat: None,
                    shift: None,
                    iterations: history.len(),
                    stalled,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let projected = model.normalized(&projected)?;
        let mu_hat = model.quotient(&projected)?;
        reports.push(RestartReport {
            restart: r,
            xi_alpha: xi,
            mu_hat: Some(mu_hat),
            shift: Some(shift),
            iterations: history.len(),
            stalled,
        });
        if best.as_ref().is_none_or(|b| mu_hat < b.mu_hat) {
            best = Some(MuEstimate {
                mu_hat,
                xi_alpha: xi,
                competitor_quotient,
                field: projected,
                restarts: Vec::new(),
                history,
            });
        }
    }
    let Some(mut best) = best else {
        return Err(Error::DegenerateTrace(0.0));
    };
    best.restarts = reports;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElResidual {
    /// Max over interior nodes of `|div_h(ρ^{1−2σ} ∇_h u) + f|`.
    pub interior: f64,
    /// Max over boundary nodes of `|flux − μ̂ |u|^{p−2} u|` with `∫|u|^p = 1`.
    pub boundary: f64,
}

fn interior_residual(model: &CylinderModel, u: &DiscreteField, forcing: Option<&DiscreteField>) -> Result<f64> {
    let ku = model.apply_stiffness(u)?;
    let jt = model.spec.grid.jt;
    let mut worst = 0.0f64;
    for j in 1..jt {
        let mass = model.measure * model.dual[j];
        for xi in 0..model.slab {
            let mut v = ku.slab(j)[xi] / mass;
            if let Some(f) = forcing {
                v -= f.slab(j)[xi];
            }
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Discrete Euler–Lagrange residuals of `u` for the value `mu_hat`.
pub fn el_residual(model: &CylinderModel, u: &DiscreteField, mu_hat: f64) -> Result<ElResidual> {
    el_residual_forced(model, u, mu_hat, None)
}

/// As [`el_residual`], for `−div(ρ^{1−2σ}∇u) = f` in the interior.
pub fn el_residual_forced(
    model: &CylinderModel,
    u: &DiscreteField,
    mu_hat: f64,
    forcing: Option<&DiscreteField>,
) -> Result<ElResidual> {
    model.check(u)?;
    if let Some(f) = forcing {
        model.check(f)?;
    }
    let interior = interior_residual(model, u, forcing)?;
    let boundary = match model.normalized(u) {
        Ok(v) => {
            let ku = model.apply_stiffness(&v)?;
            let p = model.params.p();
            let jt = model.spec.grid.jt;
            let mut worst = 0.0f64;
            for j in [0, jt] {
                for xi in 0..model.slab {
                    let flux = ku.slab(j)[xi] / model.measure;
                    let w = v.slab(j)[xi];
                    worst = worst.max((flux - mu_hat * abs_pow(w, p - 2.0) * w).abs());
                }
            }
            worst
        }
        Err(_) => 0.0,
    };
    Ok(ElResidual { interior, boundary })
}

const MAGIC: &[u8; 8] = b"TSCKPT01";
const MAX_HEADER: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelSpec,
    pub iteration: usize,
    pub alpha: f64,
    pub xi_alpha: f64,
}

/// `TSCKPT01`, header length (u64 LE), JSON header, node values (f64 LE) in
/// storage order.
pub fn encode_checkpoint(header: &CheckpointHeader, field: &DiscreteField) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * field.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses and validates a checkpoint; never panics on malformed input.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<f64>)> {
    let bad = |m: &str| Error::Parse(format!("checkpoint: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if len > MAX_HEADER || len as usize > bytes.len() - 16 {
        return Err(bad("header length out of range"));
    }
    let end = 16 + len as usize;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[16..end]).map_err(|e| bad(&format!("header: {e}")))?;
    let m = header.model;
    SobolevParams::new(m.n, m.sigma)?;
    GridSpec::new(m.grid.jx, m.grid.jt)?;
    if !(m.period > 0.0 && m.period.is_finite() && m.height > 0.0 && m.height.is_finite()) {
        return Err(bad("nonpositive model size"));
    }
    if !(header.alpha.is_finite() && header.alpha >= 0.0 && header.xi_alpha.is_finite()) {
        return Err(bad("non-finite header value"));
    }
    let nodes = m.node_count()?;
    let body = &bytes[end..];
    if body.len() != nodes * 8 {
        return Err(bad(&format!("expected {} value bytes, found {}", nodes * 8, body.len())));
    }
    let values: Vec<f64> =
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite node value"));
    }
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: u32, sigma: f64, jx: usize, jt: usize) -> CylinderModel {
        CylinderModel::new(&SobolevParams::new(n, sigma).unwrap(), 2.0, 1.0, GridSpec::new(jx, jt).unwrap()).unwrap()
    }

    #[test]
    fn weights_integrate_rho() {
        // ∫_0^T ρ^a = T^{a+1} B(a+1, a+1)
        for &s in &[0.25, 0.5, 0.8] {
            let m = model(2, s, 8, 16);
            let a = 1.0 - 2.0 * s;
            let exact = (2.0 * crate::constants::ln_gamma(a + 1.0) - crate::constants::ln_gamma(2.0 * a + 2.0)).exp();
            let sum: f64 = m.cell.iter().sum();
            let dual: f64 = m.dual.iter().sum();
            assert!((sum - exact).abs() < 1e-12 * exact, "σ = {s}: {sum} vs {exact}");
            assert!((dual - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn constant_has_zero_energy() {
        let m = model(2, 0.3, 8, 8);
        let u = m.sample(|_, _| 1.0);
        assert!(m.energy(&u).unwrap().abs() < 1e-14);
        let tr = m.trace_integrals(&u).unwrap();
        assert!((tr.signed_mean - m.boundary_volume()).abs() < 1e-12);
    }

    #[test]
    fn stiffness_matches_energy() {
        let m = model(2, 0.3, 8, 8);
        let u = m.sample(|x, t| (x[0] * 3.0).sin() + t * t * x[1].cos());
        let ku = m.apply_stiffness(&u).unwrap();
        assert!((u.dot(&ku) - m.energy(&u).unwrap()).abs() < 1e-12 * m.energy(&u).unwrap());
    }

    #[test]
    fn preconditioner_inverts() {
        let m = model(2, 0.5, 8, 8);
        let u = m.sample(|x, t| (x[0] * 3.0).sin() + t * x[1].cos() + 0.3);
        let mut g = m.apply_stiffness(&u).unwrap();
        let jt = m.spec.grid.jt;
        for j in [0, jt] {
            for xi in 0..m.slab {
                g.values[j * m.slab + xi] += 0.7 * m.measure * u.slab(j)[xi];
            }
        }
        let back = m.precondition(&g, 0.7).unwrap();
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_extension_is_discrete_harmonic() {
        let m = model(2, 0.3, 8, 10);
        let bottom: Vec<f64> = (0..m.slab).map(|i| (i as f64 * 0.37).sin()).collect();
        let top: Vec<f64> = (0..m.slab).map(|i| (i as f64 * 0.11).cos()).collect();
        let u = m.harmonic_extension(&bottom, &top).unwrap();
        assert_eq!(u.bottom(), &bottom[..]);
        assert!(interior_residual(&m, &u, None).unwrap() < 1e-10);
    }

    #[test]
    fn parsers() {
        assert_eq!("64,32".parse::<GridSpec>().unwrap(), GridSpec { jx: 64, jt: 32 });
        assert!("64".parse::<GridSpec>().is_err());
        assert!("63,32".parse::<GridSpec>().is_err());
        assert!("1,10,100".parse::<AlphaSchedule>().is_ok());
        assert!("10,1".parse::<AlphaSchedule>().is_err());
        assert!("1,x".parse::<AlphaSchedule>().is_err());
        assert!("".parse::<AlphaSchedule>().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = model(2, 0.5, 4, 4);
        let u = m.sample(|x, t| x[0] + 2.0 * x[1] - t);
        let header = CheckpointHeader { model: *m.spec(), iteration: 7, alpha: 10.0, xi_alpha: 1.5 };
        let bytes = encode_checkpoint(&header, &u);
        let (h, v) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(h, header);
        assert_eq!(v, u.values);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(decode_checkpoint(&corrupt).is_err());
    }

    #[test]
    fn competitor_has_zero_signed_mean() {
        let m = model(2, 0.5, 16, 8);
        let u = two_bubble_competitor(&m, 0.2).unwrap();
        let tr = m.trace_integrals(&u).unwrap();
        assert!(tr.signed_mean.abs() < 1e-12 * tr.lp_norm_p);
        assert!(u.top().iter().all(|&v| v == 0.0));
    }
}
