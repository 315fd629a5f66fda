//! Graded arithmetic in Ω*(M, 𝒲) over flat frames.
//!
//! A [`WeylElement`] is a finite sum of terms
//! `ħ^r · f(x,y) · v^{b…} ∧ v̌^{a…} ⊗ u^{J} ǔ^{I}` with [`TrigPoly`]
//! coefficients. The module provides the fibrewise star product with
//! separation of variables, its graded commutator, the polarization-adapted
//! Hodge operators, the double-weight grading, the fibrewise module action on
//! Ŝym Q*-valued elements, and evaluation of the formal parameter at ħ = i/k.
//!
//! Sign convention: form factors are kept in canonical order (v-block before
//! v̌-block, each strictly ascending); every wedge sign is derived from
//! adjacent transpositions against that order. The symmetric variables u, ǔ
//! and ħ are even and never produce signs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trig::{Axis, TrigPoly};

/// Which flat model the frame lives on. The torus fixes ω_{iǰ} = 2π·δ_ij;
/// the local flat (cotangent) model defaults to ω_{iǰ} = δ_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryFlavor {
    Torus,
    LocalFlat,
}

/// Flat-frame geometry data: the pairing matrix ω_{iǰ} = ω(v_i, v̌_j) and its
/// inverse ω^{ǰi}. On flat models Γ, R_ω, Ĩ and F^𝐋 all vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    n: usize,
    flavor: GeometryFlavor,
    omega: Vec<Vec<f64>>,
    omega_inv: Vec<Vec<f64>>,
}

impl Geometry {
    /// Standard symplectic torus: ω = 2π Σ dx^i ∧ dy^i.
    pub fn torus(n: usize) -> Self {
        let mut omega = vec![vec![0.0; n]; n];
        for i in 0..n {
            omega[i][i] = 2.0 * PI;
        }
        Self::build(n, GeometryFlavor::Torus, omega).expect("diagonal omega is invertible")
    }

    /// Local flat model (T*ℝⁿ in a flat frame): ω_{iǰ} = δ_ij.
    pub fn local_flat(n: usize) -> Self {
        let mut omega = vec![vec![0.0; n]; n];
        for i in 0..n {
            omega[i][i] = 1.0;
        }
        Self::build(n, GeometryFlavor::LocalFlat, omega).expect("identity is invertible")
    }

    /// Local flat model with an arbitrary constant invertible pairing matrix.
    pub fn local_flat_with(omega: Vec<Vec<f64>>) -> Result<Self> {
        let n = omega.len();
        Self::build(n, GeometryFlavor::LocalFlat, omega)
    }

    fn build(n: usize, flavor: GeometryFlavor, omega: Vec<Vec<f64>>) -> Result<Self> {
        if omega.len() != n || omega.iter().any(|row| row.len() != n) {
            return Err(Error::Rejected("omega must be n×n".into()));
        }
        let omega_inv = invert(&omega)
            .ok_or_else(|| Error::Rejected("omega matrix is singular".into()))?;
        // residual check: inv · omega = identity to 1e-12
        for i in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += omega[i][j] * omega_inv[j][k];
                }
                let expect = if i == k { 1.0 } else { 0.0 };
                if (acc - expect).abs() > 1e-12 {
                    return Err(Error::Internal("omega inverse residual above 1e-12".into()));
                }
            }
        }
        Ok(Geometry { n, flavor, omega, omega_inv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn flavor(&self) -> GeometryFlavor {
        self.flavor
    }

    /// ω_{iǰ}.
    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.omega[i][j]
    }

    /// ω^{ǰi} (inverse matrix entry, row ǰ column i).
    pub fn omega_inv(&self, j: usize, i: usize) -> f64 {
        self.omega_inv[j][i]
    }

    /// The symplectic form as a Weyl element: ω = ω_{iǰ} v^i ∧ v̌^j with
    /// constant coefficients.
    pub fn omega_element(&self, trunc: Truncation) -> WeylElement {
        let mut out = WeylElement::zero(self, trunc);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.omega[i][j] != 0.0 {
                    let mono = WeylMonomial::unit(self.n).with_vform(i).with_pform(j);
                    out.add_term(
                        &mono,
                        TrigPoly::constant(self.n, Complex64::new(self.omega[i][j], 0.0)),
                    );
                }
            }
        }
        out
    }
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Truncation policy: cap on ħ-power and on total weight
/// (|ǔ-degree| + ħ-power + |u-degree|), enforced after every operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub max_total_weight: u32,
    pub max_hbar: u32,
}

impl Truncation {
    pub fn new(max_total_weight: u32, max_hbar: u32) -> Self {
        Truncation { max_total_weight, max_hbar }
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { max_total_weight: 6, max_hbar: 4 }
    }
}

/// Whether ħ is still a formal variable or has been evaluated at i/k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HbarMode {
    Formal,
    Level(u32),
}

/// The monomial part of one Weyl term: wedge factors, ħ-power and the two
/// symmetric multi-exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeylMonomial {
    /// Ascending indices of v^i wedge factors (Q*-forms).
    pub vforms: Vec<u8>,
    /// Ascending indices of v̌^j wedge factors (P*-forms).
    pub pforms: Vec<u8>,
    pub hpow: u32,
    /// Powers of u^i (Sym Q*).
    pub uexp: Vec<u32>,
    /// Powers of ǔ^j (Sym P*).
    pub cuexp: Vec<u32>,
}

impl WeylMonomial {
    pub fn unit(n: usize) -> Self {
        WeylMonomial {
            vforms: Vec::new(),
            pforms: Vec::new(),
            hpow: 0,
            uexp: vec![0; n],
            cuexp: vec![0; n],
        }
    }

    pub fn with_u(mut self, i: usize, pow: u32) -> Self {
        self.uexp[i] += pow;
        self
    }

    pub fn with_cu(mut self, j: usize, pow: u32) -> Self {
        self.cuexp[j] += pow;
        self
    }

    pub fn with_hbar(mut self, pow: u32) -> Self {
        self.hpow += pow;
        self
    }

    pub fn with_vform(mut self, i: usize) -> Self {
        self.vforms.push(i as u8);
        self.vforms.sort_unstable();
        self
    }

    pub fn with_pform(mut self, j: usize) -> Self {
        self.pforms.push(j as u8);
        self.pforms.sort_unstable();
        self
    }

    pub fn u_degree(&self) -> u32 {
        self.uexp.iter().sum()
    }

    pub fn cu_degree(&self) -> u32 {
        self.cuexp.iter().sum()
    }

    /// Polarized weight: ǔ-degree + ħ-power.
    pub fn polarized_weight(&self) -> u32 {
        self.cu_degree() + self.hpow
    }

    /// Total weight: polarized weight + u-degree.
    pub fn total_weight(&self) -> u32 {
        self.polarized_weight() + self.u_degree()
    }

    pub fn form_degree(&self) -> usize {
        self.vforms.len() + self.pforms.len()
    }
}

/// Merge two ascending index lists, returning the merged list and the wedge
/// sign, or `None` when a factor repeats.
fn merge_forms(a: &[u8], b: &[u8]) -> Option<(Vec<u8>, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut swaps = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] crosses the remaining a-factors
            swaps += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
    Some((out, sign))
}

/// Insert one index into an ascending list as a left wedge factor.
fn wedge_front(list: &[u8], idx: u8) -> Option<(Vec<u8>, f64)> {
    if list.contains(&idx) {
        return None;
    }
    let smaller = list.iter().filter(|&&x| x < idx).count();
    let mut out = list.to_vec();
    out.push(idx);
    out.sort_unstable();
    let sign = if smaller % 2 == 0 { 1.0 } else { -1.0 };
    Some((out, sign))
}

/// Contract one index out of an ascending list; sign is (−1)^position.
fn contract(list: &[u8], idx: u8) -> Option<(Vec<u8>, f64)> {
    let pos = list.iter().position(|&x| x == idx)?;
    let mut out = list.to_vec();
    out.remove(pos);
    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
    Some((out, sign))
}

/// Truncated graded element of Ω*(M, 𝒲).
#[derive(Debug, Clone, PartialEq)]
pub struct WeylElement {
    geometry: Geometry,
    trunc: Truncation,
    hbar: HbarMode,
    terms: BTreeMap<WeylMonomial, TrigPoly>,
}

impl WeylElement {
    pub fn zero(geometry: &Geometry, trunc: Truncation) -> Self {
        WeylElement {
            geometry: geometry.clone(),
            trunc,
            hbar: HbarMode::Formal,
            terms: BTreeMap::new(),
        }
    }

    /// A 𝒲-degree-0 element: a plain function coefficient.
    pub fn scalar(geometry: &Geometry, trunc: Truncation, f: TrigPoly) -> Self {
        let mut e = Self::zero(geometry, trunc);
        e.add_term(&WeylMonomial::unit(geometry.dim()), f);
        e
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn hbar_mode(&self) -> HbarMode {
        self.hbar
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WeylMonomial, &TrigPoly)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &WeylMonomial) -> TrigPoly {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| TrigPoly::zero(self.geometry.dim()))
    }

    /// Largest trig coefficient magnitude over all terms.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|p| p.max_coeff_norm()).fold(0.0, f64::max)
    }

    /// Add one monomial term, merging and enforcing truncation.
    pub fn add_term(&mut self, m: &WeylMonomial, coeff: TrigPoly) {
        if m.hpow > self.trunc.max_hbar || m.total_weight() > self.trunc.max_total_weight {
            return;
        }
        self.add_term_unchecked(m, coeff);
    }

    /// Merge a term without the truncation caps. The Hodge homotopies trade a
    /// form factor for one unit of symmetric degree, so they may carry a term
    /// one weight above the cap; every algebra operation re-enforces the caps
    /// when it merges.
    fn add_term_unchecked(&mut self, m: &WeylMonomial, coeff: TrigPoly) {
        if coeff.is_zero() {
            return;
        }
        debug_assert_eq!(m.uexp.len(), self.geometry.dim());
        let entry = self
            .terms
            .entry(m.clone())
            .or_insert_with(|| TrigPoly::zero(self.geometry.dim()));
        *entry = entry.try_add(&coeff).expect("coefficient dimensions agree");
        if entry.is_zero() {
            self.terms.remove(m);
        }
    }

    fn compatible(&self, other: &WeylElement) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch("different geometries".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::GeometryMismatch("different truncation policies".into()));
        }
        if self.hbar != other.hbar {
            return Err(Error::GeometryMismatch("mixed formal/evaluated ħ modes".into()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &WeylElement) -> Result<WeylElement> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term_unchecked(m, c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> WeylElement {
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (m, p) in &self.terms {
            out.add_term_unchecked(m, p.scale(c));
        }
        out
    }

    pub fn try_sub(&self, other: &WeylElement) -> Result<WeylElement> {
        self.try_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Max-norm distance between two compatible elements.
    pub fn distance(&self, other: &WeylElement) -> f64 {
        self.try_sub(other).map(|d| d.max_coeff_norm()).unwrap_or(f64::INFINITY)
    }

    /// Copy with a different truncation policy (terms above the new caps are
    /// dropped).
    pub fn with_truncation(&self, trunc: Truncation) -> WeylElement {
        let mut out = Self::zero(&self.geometry, trunc);
        out.hbar = self.hbar;
        for (m, c) in &self.terms {
            out.add_term(m, c.clone());
        }
        out
    }

    /// Split into form-degree-homogeneous components keyed by degree.
    pub fn form_components(&self) -> BTreeMap<usize, WeylElement> {
        let mut map: BTreeMap<usize, WeylElement> = BTreeMap::new();
        for (m, c) in &self.terms {
            let deg = m.form_degree();
            let slot = map.entry(deg).or_insert_with(|| {
                let mut e = Self::zero(&self.geometry, self.trunc);
                e.hbar = self.hbar;
                e
            });
            slot.add_term_unchecked(m, c.clone());
        }
        map
    }

    /// The (r, l) double-weight component: ǔ-degree + ħ-power = r and
    /// u-degree = l. Components sum back to the element.
    pub fn double_weight_component(&self, r: u32, l: u32) -> WeylElement {
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (m, c) in &self.terms {
            if m.polarized_weight() == r && m.u_degree() == l {
                out.add_term_unchecked(m, c.clone());
            }
        }
        out
    }

    /// All components of a given polarized weight r.
    pub fn polarized_weight_component(&self, r: u32) -> WeylElement {
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (m, c) in &self.terms {
            if m.polarized_weight() == r {
                out.add_term_unchecked(m, c.clone());
            }
        }
        out
    }

    /// Largest ǔ-degree present.
    pub fn max_cu_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.cu_degree()).max().unwrap_or(0)
    }

    /// Largest total weight present.
    pub fn max_total_weight(&self) -> u32 {
        self.terms.keys().map(|m| m.total_weight()).max().unwrap_or(0)
    }

    /// Restriction to components of total weight ≤ w.
    pub fn weight_filter(&self, w: u32) -> WeylElement {
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (m, c) in &self.terms {
            if m.total_weight() <= w {
                out.add_term_unchecked(m, c.clone());
            }
        }
        out
    }

    /// Coefficient-wise exterior derivative in the flat frame:
    /// d(f · μ) = Σ_i ∂f/∂x^i v^i ∧ μ + Σ_j ∂f/∂y^j v̌^j ∧ μ.
    pub fn exterior_derivative(&self) -> WeylElement {
        let n = self.geometry.dim();
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (m, c) in &self.terms {
            for i in 0..n {
                let dc = c.derivative(Axis::X(i)).expect("axis in range");
                if dc.is_zero() {
                    continue;
                }
                if let Some((vf, sign)) = wedge_front(&m.vforms, i as u8) {
                    let mut nm = m.clone();
                    nm.vforms = vf;
                    out.add_term_unchecked(&nm, dc.scale(Complex64::new(sign, 0.0)));
                }
            }
            for j in 0..n {
                let dc = c.derivative(Axis::Y(j)).expect("axis in range");
                if dc.is_zero() {
                    continue;
                }
                if let Some((pf, sign)) = wedge_front(&m.pforms, j as u8) {
                    let q_block = m.vforms.len();
                    let cross = if q_block % 2 == 0 { 1.0 } else { -1.0 };
                    let mut nm = m.clone();
                    nm.pforms = pf;
                    out.add_term_unchecked(&nm, dc.scale(Complex64::new(sign * cross, 0.0)));
                }
            }
        }
        out
    }

    /// Evaluate ħ at i/k: each ħ^j becomes the scalar (i/k)^j.
    pub fn evaluate_hbar(&self, k: u32) -> Result<WeylElement> {
        match self.hbar {
            HbarMode::Level(existing) if existing == k => Ok(self.clone()),
            HbarMode::Level(existing) => Err(Error::GeometryMismatch(format!(
                "element already evaluated at k={existing}, asked for k={k}"
            ))),
            HbarMode::Formal => {
                let ik = Complex64::new(0.0, 1.0 / k as f64);
                let mut out = Self::zero(&self.geometry, self.trunc);
                out.hbar = HbarMode::Level(k);
                for (m, c) in &self.terms {
                    let mut nm = m.clone();
                    nm.hpow = 0;
                    out.add_term(&nm, c.scale(ik.powu(m.hpow)));
                }
                Ok(out)
            }
        }
    }

    /// Fibrewise star product with separation of variables:
    /// a ⋆F b = Σ_r (ħ^r/r!) ω^{ǰ₁i₁}…ω^{ǰ_ri_r} ∂ʳa/∂ǔ · ∂ʳb/∂u,
    /// the r-sum terminating at min(ǔ-degree of a, u-degree of b) per term.
    pub fn star(&self, other: &WeylElement) -> Result<WeylElement> {
        self.compatible(other)?;
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        self.star_into(other, &mut out, false);
        Ok(out)
    }

    /// π₀(a ⋆F b) computed without assembling the full product: only scalar
    /// (form-free, u-free, ǔ-free) output terms are produced. Agrees with
    /// `hodge_apply(Pi0, star(a,b))`.
    pub fn star_scalar_part(&self, other: &WeylElement) -> Result<WeylElement> {
        self.compatible(other)?;
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        self.star_into(other, &mut out, true);
        Ok(out)
    }

    fn star_into(&self, other: &WeylElement, out: &mut WeylElement, scalar_only: bool) {
        let n = self.geometry.dim();
        let cells: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (j, i)))
            .filter(|&(j, i)| self.geometry.omega_inv(j, i) != 0.0)
            .collect();
        for (ka, pa) in &self.terms {
            if scalar_only && (ka.form_degree() > 0 || ka.u_degree() > 0) {
                continue;
            }
            for (kb, pb) in &other.terms {
                if scalar_only && (kb.form_degree() > 0 || kb.cu_degree() > 0) {
                    continue;
                }
                let cross = if (ka.pforms.len() * kb.vforms.len()) % 2 == 0 { 1.0 } else { -1.0 };
                let Some((vf, s1)) = merge_forms(&ka.vforms, &kb.vforms) else { continue };
                let Some((pf, s2)) = merge_forms(&ka.pforms, &kb.pforms) else { continue };
                let sign = cross * s1 * s2;
                let base = pa.try_mul(pb).expect("same dimension");
                if base.is_zero() {
                    continue;
                }
                let mut beta = ka.cuexp.clone();
                let mut alpha = kb.uexp.clone();
                self.contract_rec(
                    &cells,
                    0,
                    &mut beta,
                    &mut alpha,
                    0,
                    1.0,
                    &mut |beta_rem: &[u32], alpha_rem: &[u32], r: u32, factor: f64| {
                        if scalar_only && beta_rem.iter().any(|&b| b > 0) {
                            return;
                        }
                        if scalar_only && alpha_rem.iter().any(|&a| a > 0) {
                            return;
                        }
                        let mut m = WeylMonomial {
                            vforms: vf.clone(),
                            pforms: pf.clone(),
                            hpow: ka.hpow + kb.hpow,
                            uexp: ka.uexp.clone(),
                            cuexp: kb.cuexp.clone(),
                        };
                        for i in 0..n {
                            m.uexp[i] += alpha_rem[i];
                            m.cuexp[i] += beta_rem[i];
                        }
                        let hbar_scale = match self.hbar {
                            HbarMode::Formal => {
                                m.hpow += r;
                                Complex64::new(1.0, 0.0)
                            }
                            HbarMode::Level(k) => {
                                Complex64::new(0.0, 1.0 / k as f64).powu(r)
                            }
                        };
                        if m.hpow > out.trunc.max_hbar
                            || m.total_weight() > out.trunc.max_total_weight
                        {
                            return;
                        }
                        let coeff = base.scale(hbar_scale * Complex64::new(sign * factor, 0.0));
                        out.add_term(&m, coeff);
                    },
                );
            }
        }
    }

    /// Enumerate contraction multiplicity matrices ρ over the nonzero ω cells.
    /// The accumulated factor carries Π ω^ρ / Π ρ! · Π falling(β) · Π falling(α).
    #[allow(clippy::too_many_arguments)]
    fn contract_rec(
        &self,
        cells: &[(usize, usize)],
        idx: usize,
        beta: &mut Vec<u32>,
        alpha: &mut Vec<u32>,
        r: u32,
        factor: f64,
        emit: &mut impl FnMut(&[u32], &[u32], u32, f64),
    ) {
        if idx == cells.len() {
            emit(beta, alpha, r, factor);
            return;
        }
        let (j, i) = cells[idx];
        let w = self.geometry.omega_inv(j, i);
        // c = 0 branch
        self.contract_rec(cells, idx + 1, beta, alpha, r, factor, emit);
        let maxc = beta[j].min(alpha[i]);
        let mut f = factor;
        for c in 1..=maxc {
            f *= w * beta[j] as f64 * alpha[i] as f64 / c as f64;
            beta[j] -= 1;
            alpha[i] -= 1;
            self.contract_rec(cells, idx + 1, beta, alpha, r + c, f, emit);
        }
        beta[j] += maxc;
        alpha[i] += maxc;
    }

    /// Graded commutator [a, b]⋆ = a⋆b − (−1)^{|a||b|} b⋆a, computed on
    /// form-degree-homogeneous components. With `divide_hbar`, every term is
    /// divided by one power of ħ (structurally guaranteed to exist); the
    /// bracket is then evaluated with the ħ-cap lifted by one, since terms at
    /// the cap produce intermediates one power higher that the division
    /// brings back into range.
    pub fn commutator(&self, other: &WeylElement, divide_hbar: bool) -> Result<WeylElement> {
        self.compatible(other)?;
        if !divide_hbar {
            return self.commutator_bracket(other);
        }
        match self.hbar {
            HbarMode::Level(k) => {
                // ħ = i/k is an invertible scalar
                let inv = Complex64::new(0.0, 1.0 / k as f64).finv();
                Ok(self.commutator_bracket(other)?.scale(inv))
            }
            HbarMode::Formal => {
                let lifted = Truncation {
                    max_total_weight: self.trunc.max_total_weight,
                    max_hbar: self.trunc.max_hbar + 1,
                };
                let a = self.with_truncation(lifted);
                let b = other.with_truncation(lifted);
                let out = a.commutator_bracket(&b)?;
                let mut divided = Self::zero(&self.geometry, lifted);
                let overall = out.max_coeff_norm();
                for (m, c) in &out.terms {
                    if m.hpow == 0 {
                        // cancellation dust is tolerated, real content is not
                        if c.max_coeff_norm() > 1e-9 * overall.max(1.0) {
                            return Err(Error::Internal(
                                "commutator term without ħ factor; cannot divide".into(),
                            ));
                        }
                        continue;
                    }
                    let mut nm = m.clone();
                    nm.hpow -= 1;
                    divided.add_term(&nm, c.clone());
                }
                Ok(divided.with_truncation(self.trunc))
            }
        }
    }

    fn commutator_bracket(&self, other: &WeylElement) -> Result<WeylElement> {
        let mut out = Self::zero(&self.geometry, self.trunc);
        out.hbar = self.hbar;
        for (da, ca) in self.form_components() {
            for (db, cb) in other.form_components() {
                let ab = ca.star(&cb)?;
                let ba = cb.star(&ca)?;
                let sign = if (da * db) % 2 == 0 { -1.0 } else { 1.0 };
                out = out.try_add(&ab)?.try_add(&ba.scale(Complex64::new(sign, 0.0)))?;
            }
        }
        Ok(out)
    }

    /// Fibrewise action a ⊛ᶠₖ s for s valued in Ŝym Q* (no ǔ, no ħ; forms are
    /// extended by graded linearity):
    /// (ħ^r u^{I} ǔ^{j₁…j_q}) ⊛ s = (i/k)^{r+q} ω^{ǰ₁k₁}…ω^{ǰ_qk_q} u^{I} ∂^q s/∂u^{k…}.
    pub fn fibrewise_act(&self, s: &WeylElement, k: u32) -> Result<WeylElement> {
        if self.geometry != s.geometry {
            return Err(Error::GeometryMismatch("different geometries".into()));
        }
        if let HbarMode::Level(kk) = self.hbar {
            if kk != k {
                return Err(Error::GeometryMismatch(format!(
                    "element evaluated at k={kk}, action requested at k={k}"
                )));
            }
        }
        for m in s.terms.keys() {
            if m.cu_degree() > 0 {
                return Err(Error::Rejected("module argument contains ǔ factors".into()));
            }
            if m.hpow > 0 {
                return Err(Error::Rejected("module argument contains ħ factors".into()));
            }
        }
        let n = self.geometry.dim();
        let ik = Complex64::new(0.0, 1.0 / k as f64);
        let cells: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (j, i)))
            .filter(|&(j, i)| self.geometry.omega_inv(j, i) != 0.0)
            .collect();
        let mut out = Self::zero(&self.geometry, s.trunc);
        out.hbar = HbarMode::Level(k);
        for (ka, pa) in &self.terms {
            let hbar_factor = match self.hbar {
                HbarMode::Formal => ik.powu(ka.hpow + ka.cu_degree()),
                HbarMode::Level(_) => ik.powu(ka.cu_degree()),
            };
            for (kb, pb) in &s.terms {
                let cross = if (ka.pforms.len() * kb.vforms.len()) % 2 == 0 { 1.0 } else { -1.0 };
                let Some((vf, s1)) = merge_forms(&ka.vforms, &kb.vforms) else { continue };
                let Some((pf, s2)) = merge_forms(&ka.pforms, &kb.pforms) else { continue };
                let sign = cross * s1 * s2;
                let base = pa.try_mul(pb)?;
                if base.is_zero() {
                    continue;
                }
                let mut beta = ka.cuexp.clone();
                let mut alpha = kb.uexp.clone();
                self.contract_rec(
                    &cells,
                    0,
                    &mut beta,
                    &mut alpha,
                    0,
                    1.0,
                    &mut |beta_rem: &[u32], alpha_rem: &[u32], _r: u32, factor: f64| {
                        // the action consumes every ǔ of a
                        if beta_rem.iter().any(|&b| b > 0) {
                            return;
                        }
                        let mut m = WeylMonomial {
                            vforms: vf.clone(),
                            pforms: pf.clone(),
                            hpow: 0,
                            uexp: ka.uexp.clone(),
                            cuexp: vec![0; n],
                        };
                        for i in 0..n {
                            m.uexp[i] += alpha_rem[i];
                        }
                        let coeff =
                            base.scale(hbar_factor * Complex64::new(sign * factor, 0.0));
                        out.add_term(&m, coeff);
                    },
                );
            }
        }
        Ok(out)
    }
}

/// The nine polarization-adapted Hodge-type operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HodgeOp {
    DeltaQ,
    DeltaP,
    Delta,
    DeltaQInv,
    DeltaPInv,
    DeltaInv,
    PiQ,
    PiP,
    Pi0,
}

/// Apply a Hodge operator termwise with the bidegree-dependent scalings
/// 1/(q+l), 1/(p+m), 1/(k+r).
pub fn hodge_apply(kind: HodgeOp, a: &WeylElement) -> WeylElement {
    let geom = a.geometry().clone();
    let n = geom.dim();
    let mut out = WeylElement::zero(&geom, a.truncation());
    out.hbar = a.hbar_mode();
    for (m, c) in a.iter() {
        match kind {
            HodgeOp::DeltaQ | HodgeOp::DeltaP | HodgeOp::Delta => {
                if kind != HodgeOp::DeltaP {
                    // δ_Q = v^i ∧ ∂/∂u^i
                    for i in 0..n {
                        if m.uexp[i] == 0 {
                            continue;
                        }
                        if let Some((vf, sign)) = wedge_front(&m.vforms, i as u8) {
                            let mut nm = m.clone();
                            nm.vforms = vf;
                            nm.uexp[i] -= 1;
                            let factor = m.uexp[i] as f64 * sign;
                            out.add_term_unchecked(&nm, c.scale(Complex64::new(factor, 0.0)));
                        }
                    }
                }
                if kind != HodgeOp::DeltaQ {
                    // δ_P = v̌^j ∧ ∂/∂ǔ^j
                    for j in 0..n {
                        if m.cuexp[j] == 0 {
                            continue;
                        }
                        if let Some((pf, sign)) = wedge_front(&m.pforms, j as u8) {
                            let cross = if m.vforms.len() % 2 == 0 { 1.0 } else { -1.0 };
                            let mut nm = m.clone();
                            nm.pforms = pf;
                            nm.cuexp[j] -= 1;
                            let factor = m.cuexp[j] as f64 * sign * cross;
                            out.add_term_unchecked(&nm, c.scale(Complex64::new(factor, 0.0)));
                        }
                    }
                }
            }
            HodgeOp::DeltaQInv => {
                let q = m.vforms.len() as u32;
                let l = m.u_degree();
                if q + l == 0 {
                    continue;
                }
                let scale = 1.0 / (q + l) as f64;
                for &i in &m.vforms {
                    let (vf, sign) = contract(&m.vforms, i).expect("index present");
                    let mut nm = m.clone();
                    nm.vforms = vf;
                    nm.uexp[i as usize] += 1;
                    out.add_term_unchecked(&nm, c.scale(Complex64::new(scale * sign, 0.0)));
                }
            }
            HodgeOp::DeltaPInv => {
                let p = m.pforms.len() as u32;
                let mm = m.cu_degree();
                if p + mm == 0 {
                    continue;
                }
                let scale = 1.0 / (p + mm) as f64;
                let cross = if m.vforms.len() % 2 == 0 { 1.0 } else { -1.0 };
                for &j in &m.pforms {
                    let (pf, sign) = contract(&m.pforms, j).expect("index present");
                    let mut nm = m.clone();
                    nm.pforms = pf;
                    nm.cuexp[j as usize] += 1;
                    out.add_term_unchecked(&nm, c.scale(Complex64::new(scale * sign * cross, 0.0)));
                }
            }
            HodgeOp::DeltaInv => {
                let k_deg = m.form_degree() as u32;
                let r_deg = m.u_degree() + m.cu_degree();
                if k_deg + r_deg == 0 {
                    continue;
                }
                let scale = 1.0 / (k_deg + r_deg) as f64;
                for &i in &m.vforms {
                    let (vf, sign) = contract(&m.vforms, i).expect("index present");
                    let mut nm = m.clone();
                    nm.vforms = vf;
                    nm.uexp[i as usize] += 1;
                    out.add_term_unchecked(&nm, c.scale(Complex64::new(scale * sign, 0.0)));
                }
                let cross = if m.vforms.len() % 2 == 0 { 1.0 } else { -1.0 };
                for &j in &m.pforms {
                    let (pf, sign) = contract(&m.pforms, j).expect("index present");
                    let mut nm = m.clone();
                    nm.pforms = pf;
                    nm.cuexp[j as usize] += 1;
                    out.add_term_unchecked(&nm, c.scale(Complex64::new(scale * sign * cross, 0.0)));
                }
            }
            HodgeOp::PiQ => {
                if m.vforms.is_empty() && m.u_degree() == 0 {
                    out.add_term_unchecked(m, c.clone());
                }
            }
            HodgeOp::PiP => {
                if m.pforms.is_empty() && m.cu_degree() == 0 {
                    out.add_term_unchecked(m, c.clone());
                }
            }
            HodgeOp::Pi0 => {
                if m.form_degree() == 0 && m.u_degree() == 0 && m.cu_degree() == 0 {
                    out.add_term_unchecked(m, c.clone());
                }
            }
        }
    }
    out
}

impl fmt::Display for WeylElement {
    /// Debug dump: one term per line,
    /// `hbar^j [v:...][p:...] u^J cu^I * <trigpoly>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return writeln!(f, "0");
        }
        for (m, c) in &self.terms {
            writeln!(
                f,
                "hbar^{} [v:{:?}][p:{:?}] u^{:?} cu^{:?} * {}",
                m.hpow, m.vforms, m.pforms, m.uexp, m.cuexp, c
            )?;
        }
        Ok(())
    }
}

/// Seeded random element generation, shared by the test suites and the
/// `verify-algebra` command.
pub mod sample {
    use super::*;
    use rand::Rng;

    pub struct SampleOpts {
        pub max_form_factors: usize,
        pub max_sym_degree: u32,
        pub max_hpow: u32,
        pub max_mode: i64,
        pub terms: usize,
    }

    impl Default for SampleOpts {
        fn default() -> Self {
            SampleOpts {
                max_form_factors: 2,
                max_sym_degree: 2,
                max_hpow: 1,
                max_mode: 1,
                terms: 3,
            }
        }
    }

    pub fn random_trig(n: usize, max_mode: i64, terms: usize, rng: &mut impl Rng) -> TrigPoly {
        let mut p = TrigPoly::zero(n);
        for _ in 0..terms {
            let qx: Vec<i64> = (0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect();
            let py: Vec<i64> = (0..n).map(|_| rng.gen_range(-max_mode..=max_mode)).collect();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            p.insert(crate::trig::FourierMode::new(qx, py), c);
        }
        p.normalize();
        p
    }

    pub fn random_weyl(
        geom: &Geometry,
        trunc: Truncation,
        opts: &SampleOpts,
        rng: &mut impl Rng,
    ) -> WeylElement {
        let n = geom.dim();
        let mut e = WeylElement::zero(geom, trunc);
        for _ in 0..opts.terms {
            let mut m = WeylMonomial::unit(n);
            for _ in 0..rng.gen_range(0..=opts.max_form_factors) {
                let idx = rng.gen_range(0..n);
                if rng.gen_bool(0.5) {
                    if !m.vforms.contains(&(idx as u8)) {
                        m = m.with_vform(idx);
                    }
                } else if !m.pforms.contains(&(idx as u8)) {
                    m = m.with_pform(idx);
                }
            }
            for i in 0..n {
                m.uexp[i] = rng.gen_range(0..=opts.max_sym_degree);
                m.cuexp[i] = rng.gen_range(0..=opts.max_sym_degree);
            }
            m.hpow = rng.gen_range(0..=opts.max_hpow);
            let coeff = random_trig(n, opts.max_mode, 2, rng);
            e.add_term(&m, coeff);
        }
        e
    }
}
