//! Gaussian-times-polynomial profiles on ℝⁿ with exact symbolic derivatives.
//!
//! A [`SchwartzProfile`] represents x ↦ P(x − c) · exp(−α|x − c|²). The
//! polynomial factor is stored in centered monomials (powers of x − c), which
//! makes translation a pure center shift and keeps the family closed under
//! differentiation.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on symbolic derivative order for pointwise evaluation.
pub const DEFAULT_MAX_DERIV_ORDER: usize = 8;

/// P(x − c) · exp(−α|x − c|²) with a finite centered-monomial map P.
#[derive(Debug, Clone, PartialEq)]
pub struct SchwartzProfile {
    n: usize,
    center: Vec<f64>,
    alpha: f64,
    poly: BTreeMap<Vec<u32>, Complex64>,
}

impl SchwartzProfile {
    /// Build a profile; `poly` maps centered multi-indices to coefficients.
    pub fn new(center: Vec<f64>, alpha: f64, poly: BTreeMap<Vec<u32>, Complex64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Rejected(format!("alpha must be positive, got {alpha}")));
        }
        let n = center.len();
        for idx in poly.keys() {
            if idx.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: idx.len() });
            }
        }
        Ok(SchwartzProfile { n, center, alpha, poly })
    }

    /// Pure Gaussian e^{−α|x−c|²}.
    pub fn gaussian(center: Vec<f64>, alpha: f64) -> Result<Self> {
        let n = center.len();
        let mut poly = BTreeMap::new();
        poly.insert(vec![0; n], Complex64::new(1.0, 0.0));
        Self::new(center, alpha, poly)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Translate by q: the translated profile evaluates at x as the original
    /// does at x − q. Exact (only the center moves).
    pub fn translate(&self, q: &[f64]) -> SchwartzProfile {
        assert_eq!(q.len(), self.n);
        let center = self.center.iter().zip(q).map(|(c, d)| c + d).collect();
        SchwartzProfile { n: self.n, center, alpha: self.alpha, poly: self.poly.clone() }
    }

    /// Partial derivative along axis `i`, as a new profile.
    ///
    /// With t = x − c: ∂_i [t^β e^{−α|t|²}] = (β_i t^{β−e_i} − 2α t^{β+e_i}) e^{−α|t|²}.
    pub fn derivative(&self, i: usize) -> SchwartzProfile {
        assert!(i < self.n);
        let mut poly: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        let mut add = |idx: Vec<u32>, c: Complex64| {
            let entry = poly.entry(idx).or_default();
            *entry += c;
        };
        for (beta, c) in &self.poly {
            if beta[i] > 0 {
                let mut down = beta.clone();
                down[i] -= 1;
                add(down, c * Complex64::new(beta[i] as f64, 0.0));
            }
            let mut up = beta.clone();
            up[i] += 1;
            add(up, c * Complex64::new(-2.0 * self.alpha, 0.0));
        }
        poly.retain(|_, c| c.norm() > 0.0);
        SchwartzProfile { n: self.n, center: self.center.clone(), alpha: self.alpha, poly }
    }

    /// Iterated derivative by multi-index.
    pub fn derivative_multi(&self, beta: &[u32]) -> SchwartzProfile {
        let mut out = self.clone();
        for (i, &b) in beta.iter().enumerate() {
            for _ in 0..b {
                out = out.derivative(i);
            }
        }
        out
    }

    /// Evaluate the profile at x.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.n);
        let mut exponent = 0.0;
        for i in 0..self.n {
            let t = x[i] - self.center[i];
            exponent += t * t;
        }
        let gauss = (-self.alpha * exponent).exp();
        let mut acc = Complex64::default();
        for (beta, c) in &self.poly {
            let mut mono = 1.0;
            for i in 0..self.n {
                let t = x[i] - self.center[i];
                mono *= t.powi(beta[i] as i32);
            }
            acc += c * mono;
        }
        acc * gauss
    }

    /// Exact value of ∂^deriv profile at x, computed by symbolic product-rule
    /// expansion then evaluation. Orders above `DEFAULT_MAX_DERIV_ORDER` are
    /// rejected.
    pub fn eval_deriv(&self, x: &[f64], deriv: &[u32]) -> Result<Complex64> {
        self.eval_deriv_capped(x, deriv, DEFAULT_MAX_DERIV_ORDER)
    }

    pub fn eval_deriv_capped(&self, x: &[f64], deriv: &[u32], max_order: usize) -> Result<Complex64> {
        let order: u32 = deriv.iter().sum();
        if order as usize > max_order {
            return Err(Error::DerivativeOrder { requested: order as usize, max: max_order });
        }
        Ok(self.derivative_multi(deriv).eval(x))
    }

    /// Upper bound for sup |profile| over the region where some axis satisfies
    /// |x_i − c_i| ≥ half_width. Uses per-axis monotonicity of s^b e^{−αs²}
    /// beyond its maximum at √(b/2α).
    pub fn tail_sup_bound(&self, half_width: f64) -> f64 {
        let per_axis_sup = |b: u32| -> f64 {
            if b == 0 {
                1.0
            } else {
                let b = b as f64;
                (b / (2.0 * self.alpha)).powf(b / 2.0) * (-b / 2.0).exp()
            }
        };
        let per_axis_at = |b: u32, s: f64| -> f64 { s.powi(b as i32) * (-self.alpha * s * s).exp() };
        let mut total = 0.0;
        for (beta, c) in &self.poly {
            let mut worst = 0.0f64;
            for i in 0..self.n {
                let mut prod = per_axis_at(beta[i], half_width.max((beta[i] as f64 / (2.0 * self.alpha)).sqrt()));
                for (j, &bj) in beta.iter().enumerate() {
                    if j != i {
                        prod *= per_axis_sup(bj);
                    }
                }
                worst = worst.max(prod);
            }
            total += c.norm() * worst;
        }
        total
    }
}
