//! Sparse real polynomials in `(x_1, …, x_n, t)` and their averages over the
//! unit sphere in `x`.

use std::collections::BTreeMap;

use crate::constants::ln_gamma;

/// Polynomial with exponent vectors of length `n + 1`, the last entry being
/// the power of `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    vars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Self { vars: n + 1, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; n + 1], c);
        p
    }

    /// `c · x_i` (or `c · t` when `i == n`).
    pub fn linear(n: usize, i: usize, c: f64) -> Self {
        let mut e = vec![0u8; n + 1];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.add_term(e, c);
        p
    }

    pub fn dim(&self) -> usize {
        self.vars - 1
    }

    pub fn add_term(&mut self, exps: Vec<u8>, c: f64) {
        debug_assert_eq!(exps.len(), self.vars);
        if c == 0.0 {
            return;
        }
        *self.terms.entry(exps).or_insert(0.0) += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &f64)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Poly {
        Poly { vars: self.vars, terms: self.terms.iter().map(|(e, &v)| (e.clone(), v * c)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly { vars: self.vars, terms: BTreeMap::new() };
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let n = self.dim();
        let mut acc = Vec::with_capacity(self.terms.len());
        for (e, &c) in &self.terms {
            let mut v = c;
            for i in 0..n {
                if e[i] > 0 {
                    v *= x[i].powi(e[i] as i32);
                }
            }
            if e[n] > 0 {
                v *= t.powi(e[n] as i32);
            }
            acc.push(v);
        }
        crate::quadrature::deterministic_sum(&acc)
    }

    /// Average over `x = r θ`, `θ` uniform on the unit sphere, as a
    /// polynomial in `(r, t)`.
    pub fn sphere_average(&self) -> RadialPoly {
        let n = self.dim();
        let mut out = RadialPoly::default();
        for (e, &c) in &self.terms {
            let m = sphere_moment(&e[..n]);
            if m != 0.0 {
                let deg: u32 = e[..n].iter().map(|&a| a as u32).sum();
                out.add_term(deg, e[n] as u32, c * m);
            }
        }
        out
    }
}

/// `E[θ^α]` for `θ` uniform on `S^{n-1}`; zero unless every `α_i` is even.
pub fn sphere_moment(alpha: &[u8]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let n = alpha.len() as f64;
    let total: f64 = alpha.iter().map(|&a| a as f64).sum();
    let half_ln_pi = 0.5 * std::f64::consts::PI.ln();
    let mut ln = ln_gamma(n / 2.0) - ln_gamma((n + total) / 2.0);
    for &a in alpha {
        ln += ln_gamma((a as f64 + 1.0) / 2.0) - half_ln_pi;
    }
    ln.exp()
}

/// Polynomial in `(r, t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadialPoly {
    terms: BTreeMap<(u32, u32), f64>,
}

impl RadialPoly {
    pub fn add_term(&mut self, r_pow: u32, t_pow: u32, c: f64) {
        if c == 0.0 {
            return;
        }
        *self.terms.entry((r_pow, t_pow)).or_insert(0.0) += c;
    }

    pub fn coefficient(&self, r_pow: u32, t_pow: u32) -> f64 {
        self.terms.get(&(r_pow, t_pow)).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let acc: Vec<f64> =
            self.terms.iter().map(|(&(i, j), &c)| c * r.powi(i as i32) * t.powi(j as i32)).collect();
        crate::quadrature::deterministic_sum(&acc)
    }

    /// Divides by `r^2`; every term must carry at least that power.
    pub fn div_r2(&self) -> RadialPoly {
        let mut out = RadialPoly::default();
        for (&(i, j), &c) in &self.terms {
            assert!(i >= 2, "term r^{i} t^{j} is not divisible by r^2");
            out.add_term(i - 2, j, c);
        }
        out
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.abs() <= tol)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.terms.iter()
    }
}
