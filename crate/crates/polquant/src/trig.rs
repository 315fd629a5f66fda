//! Trigonometric polynomials on the standard torus ℝ²ⁿ/ℤ²ⁿ.
//!
//! A [`TrigPoly`] is a finite sum Σ c · e^{2πi(⟨q,x⟩ + ⟨p,y⟩)} indexed by
//! integer frequency pairs ([`FourierMode`]). It is the coefficient ring for
//! all Weyl elements: closed under addition, multiplication (convolution of
//! mode maps) and differentiation, with exact frequency bookkeeping.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped on normalization.
pub const ZERO_EPS: f64 = 1e-15;

/// A coordinate direction on the torus: base direction `x_i` or fibre
/// direction `y_j` (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X(usize),
    Y(usize),
}

/// Integer frequency vector of one Fourier mode: `qx` along the base
/// coordinates x, `py` along the fibre coordinates y.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FourierMode {
    pub qx: Vec<i64>,
    pub py: Vec<i64>,
}

impl FourierMode {
    pub fn new(qx: Vec<i64>, py: Vec<i64>) -> Self {
        assert_eq!(qx.len(), py.len(), "mode index vectors must share length");
        FourierMode { qx, py }
    }

    pub fn dim(&self) -> usize {
        self.qx.len()
    }

    /// The zero mode (constant function) in dimension `n`.
    pub fn zero(n: usize) -> Self {
        FourierMode { qx: vec![0; n], py: vec![0; n] }
    }

    fn add(&self, other: &FourierMode) -> FourierMode {
        FourierMode {
            qx: self.qx.iter().zip(&other.qx).map(|(a, b)| a + b).collect(),
            py: self.py.iter().zip(&other.py).map(|(a, b)| a + b).collect(),
        }
    }

    fn frequency(&self, axis: Axis) -> i64 {
        match axis {
            Axis::X(i) => self.qx[i],
            Axis::Y(j) => self.py[j],
        }
    }
}

/// Finite Fourier sum on the torus with complex double coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    n: usize,
    terms: BTreeMap<FourierMode, Complex64>,
}

impl TrigPoly {
    pub fn zero(n: usize) -> Self {
        TrigPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        let mut p = TrigPoly::zero(n);
        p.insert(FourierMode::zero(n), c);
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, Complex64::new(1.0, 0.0))
    }

    /// The single mode `c · e^{2πi(⟨q,x⟩+⟨p,y⟩)}`.
    pub fn mode(n: usize, qx: Vec<i64>, py: Vec<i64>, c: Complex64) -> Self {
        let mode = FourierMode::new(qx, py);
        assert_eq!(mode.dim(), n);
        let mut p = TrigPoly::zero(n);
        p.insert(mode, c);
        p
    }

    /// Unit-coefficient 1-dimensional mode `e^{2πi(qx+py)}`.
    pub fn unit_mode_1d(q: i64, p: i64) -> Self {
        Self::mode(1, vec![q], vec![p], Complex64::new(1.0, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FourierMode, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mode: &FourierMode) -> Complex64 {
        self.terms.get(mode).copied().unwrap_or_default()
    }

    /// Largest coefficient magnitude; 0 for the zero polynomial.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn insert(&mut self, mode: FourierMode, c: Complex64) {
        debug_assert_eq!(mode.dim(), self.n);
        let entry = self.terms.entry(mode.clone()).or_default();
        *entry += c;
        if entry.norm() < ZERO_EPS {
            self.terms.remove(&mode);
        }
    }

    fn check_dim(&self, other: &TrigPoly) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    /// Pointwise sum. Errors on dimension mismatch.
    pub fn try_add(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), *c);
        }
        out.normalize();
        Ok(out)
    }

    /// Product: convolution of mode maps. The support of the result is the
    /// Minkowski sum of the operand supports. Errors on dimension mismatch.
    pub fn try_mul(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_dim(other)?;
        let mut out = TrigPoly::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert(ma.add(mb), ca * cb);
            }
        }
        out.normalize();
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> TrigPoly {
        let mut out = TrigPoly::zero(self.n);
        for (m, v) in &self.terms {
            out.insert(m.clone(), v * c);
        }
        out.normalize();
        out
    }

    /// Termwise derivative along one coordinate axis: each mode coefficient
    /// is multiplied by 2πi times its frequency along that axis.
    pub fn derivative(&self, axis: Axis) -> Result<TrigPoly> {
        let idx = match axis {
            Axis::X(i) => i,
            Axis::Y(j) => j,
        };
        if idx >= self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: idx + 1 });
        }
        let mut out = TrigPoly::zero(self.n);
        for (m, c) in &self.terms {
            let freq = m.frequency(axis);
            if freq != 0 {
                let factor = Complex64::new(0.0, 2.0 * PI * freq as f64);
                out.insert(m.clone(), c * factor);
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Iterated x-derivative by multi-index `beta`, evaluated lazily as mode
    /// scalings (exact in the frequency bookkeeping).
    pub fn derivative_x_multi(&self, beta: &[u32]) -> Result<TrigPoly> {
        let mut out = self.clone();
        for (i, &b) in beta.iter().enumerate() {
            for _ in 0..b {
                out = out.derivative(Axis::X(i))?;
            }
        }
        Ok(out)
    }

    /// Evaluate at a point (x, y) ∈ ℝⁿ × ℝⁿ.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let mut acc = Complex64::default();
        for (m, c) in &self.terms {
            let mut phase = 0.0;
            for i in 0..self.n {
                phase += m.qx[i] as f64 * x[i] + m.py[i] as f64 * y[i];
            }
            acc += c * Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        acc
    }

    /// Evaluate a base-only polynomial at x (fibre coordinates set to 0).
    pub fn eval_x(&self, x: &[f64]) -> Complex64 {
        let y = vec![0.0; self.n];
        self.eval(x, &y)
    }

    /// True when no mode has a nonzero fibre frequency p.
    pub fn is_y_independent(&self) -> bool {
        self.terms.keys().all(|m| m.py.iter().all(|&p| p == 0))
    }

    /// Drop coefficients below the [`ZERO_EPS`] threshold.
    pub fn normalize(&mut self) {
        self.terms.retain(|_, c| c.norm() >= ZERO_EPS);
    }

    /// Max-norm distance to another polynomial (∞ on dimension mismatch is
    /// not meaningful; callers compare same-dimension values).
    pub fn distance(&self, other: &TrigPoly) -> f64 {
        let diff = self.try_add(&other.neg_ref()).expect("same dimension");
        diff.max_coeff_norm()
    }

    fn neg_ref(&self) -> TrigPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        self.try_add(rhs).expect("dimension mismatch in +")
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        self.try_add(&rhs.neg_ref()).expect("dimension mismatch in -")
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        self.try_mul(rhs).expect("dimension mismatch in *")
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self.neg_ref()
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)e(q={:?},p={:?})", c.re, c.im, m.qx, m.py)?;
        }
        Ok(())
    }
}
