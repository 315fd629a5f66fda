//! Toeplitz-type operators on the polarized distributional states of the
//! standard symplectic torus.
//!
//! States live on the basis {σ_k^[m]} indexed by classes [m] ∈ (ℤ/kℤ)ⁿ; test
//! sections are carried by their Weil–Brezin coefficients τ̃_m (Schwartz
//! profiles with the quasi-periodicity τ̃_{m+kq}(x) = τ̃_m(x − q)). The module
//! provides the fibrewise Fourier regrouping, the Toeplitz pairing
//! ⟨T_{f,k} σ_k^[m], τ⟩, the expansion terms T_{f,r,k}, the ℓ¹ and Schwartz
//! norms, the remainder-decay sweep with its log-log slope fit, and the
//! weak-derivative route through the quantum-jet engine that must reproduce
//! T_{f,r,k}.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fedosov::{duality_arrow_expand, quantum_jet, HbarPoly};
use crate::schwartz::SchwartzProfile;
use crate::trig::{FourierMode, TrigPoly};
use crate::weyl::{hodge_apply, Geometry, HodgeOp, Truncation};

/// Reduce m = m₀ + k·q with m₀ ∈ {0,…,k−1}ⁿ; returns (class m₀, shift q).
pub fn wb_reduce(m: &[i64], k: u32) -> (Vec<i64>, Vec<i64>) {
    let kk = k as i64;
    let mut class = Vec::with_capacity(m.len());
    let mut shift = Vec::with_capacity(m.len());
    for &mi in m {
        let c = mi.rem_euclid(kk);
        class.push(c);
        shift.push((mi - c) / kk);
    }
    (class, shift)
}

/// Finite coefficient vector over the distributional basis {σ_k^[m]}.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedState {
    k: u32,
    n: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl PolarizedState {
    pub fn zero(k: u32, n: usize) -> Self {
        PolarizedState { k, n, coeffs: BTreeMap::new() }
    }

    /// The basis vector σ_k^[m] (m reduced to its canonical representative).
    pub fn basis(k: u32, n: usize, m: &[i64]) -> Self {
        let mut s = Self::zero(k, n);
        s.add(m, Complex64::new(1.0, 0.0));
        s
    }

    pub fn add(&mut self, m: &[i64], c: Complex64) {
        assert_eq!(m.len(), self.n);
        let (class, _) = wb_reduce(m, self.k);
        let entry = self.coeffs.entry(class.clone()).or_default();
        *entry += c;
        if entry.norm() == 0.0 {
            self.coeffs.remove(&class);
        }
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.coeffs.iter()
    }

    /// ℓ¹-norm: Σ |s_[m]|.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }
}

/// A test section given through its Weil–Brezin coefficients: one Schwartz
/// profile per class, out-of-range indices resolved by the periodicity rule.
#[derive(Debug, Clone)]
pub struct TestSection {
    k: u32,
    n: usize,
    profiles: BTreeMap<Vec<i64>, SchwartzProfile>,
}

impl TestSection {
    /// Every class carries the same template profile.
    pub fn from_template(k: u32, template: &SchwartzProfile) -> Self {
        let n = template.dim();
        let mut profiles = BTreeMap::new();
        for class in all_classes(k, n) {
            profiles.insert(class, template.clone());
        }
        TestSection { k, n, profiles }
    }

    /// Explicit per-class profiles; every class must be present.
    pub fn from_profiles(
        k: u32,
        n: usize,
        profiles: BTreeMap<Vec<i64>, SchwartzProfile>,
    ) -> Result<Self> {
        for class in all_classes(k, n) {
            match profiles.get(&class) {
                Some(p) if p.dim() == n => {}
                Some(_) => return Err(Error::Rejected("profile dimension mismatch".into())),
                None => {
                    return Err(Error::Rejected(format!(
                        "missing Weil–Brezin profile for class {class:?}"
                    )))
                }
            }
        }
        Ok(TestSection { k, n, profiles })
    }

    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// τ̃_m for an arbitrary integer index, resolved through
    /// τ̃_{m₀+kq}(x) = τ̃_{m₀}(x − q).
    pub fn coefficient(&self, m: &[i64]) -> SchwartzProfile {
        let (class, shift) = wb_reduce(m, self.k);
        let q: Vec<f64> = shift.iter().map(|&v| v as f64).collect();
        self.profiles[&class].translate(&q)
    }

    pub fn profiles(&self) -> impl Iterator<Item = (&Vec<i64>, &SchwartzProfile)> {
        self.profiles.iter()
    }
}

fn all_classes(k: u32, n: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * k as usize);
        for prefix in &out {
            for c in 0..k as i64 {
                let mut v = prefix.clone();
                v.push(c);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Regroup f by fibre frequency: f̂_p(x) = Σ_q c_{q,p} e^{2πi⟨q,x⟩}. The
/// reassembly Σ_p f̂_p · e^{2πi⟨p,y⟩} reproduces f exactly.
pub fn fiber_fourier(f: &TrigPoly) -> BTreeMap<Vec<i64>, TrigPoly> {
    let n = f.dim();
    let mut out: BTreeMap<Vec<i64>, TrigPoly> = BTreeMap::new();
    for (mode, c) in f.iter() {
        let slot = out.entry(mode.py.clone()).or_insert_with(|| TrigPoly::zero(n));
        slot.insert(FourierMode::new(mode.qx.clone(), vec![0; n]), *c);
    }
    out.retain(|_, p| !p.is_zero());
    out
}

/// ⟨σ_k^[m], τ⟩ = τ̃_m(m/k).
pub fn pair_sigma(k: u32, m: &[i64], tau: &TestSection) -> Complex64 {
    let x: Vec<f64> = m.iter().map(|&v| v as f64 / k as f64).collect();
    tau.coefficient(m).eval(&x)
}

/// ⟨s, τ⟩ extended ℓ¹-linearly over the basis.
pub fn state_pairing(s: &PolarizedState, tau: &TestSection) -> Complex64 {
    s.iter().map(|(m, c)| c * pair_sigma(s.level(), m, tau)).sum()
}

/// ⟨T_{f,k} σ_k^[m], τ⟩ = Σ_p (f̂_p · τ̃_{m+p})((m+p)/k), a finite sum over
/// the fibre-Fourier support of f.
pub fn toeplitz_pairing(f: &TrigPoly, k: u32, m: &[i64], tau: &TestSection) -> Result<Complex64> {
    check_dims(f, m, tau)?;
    let mut acc = Complex64::default();
    for (p, fp) in fiber_fourier(f) {
        let mp: Vec<i64> = m.iter().zip(&p).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = mp.iter().map(|&v| v as f64 / k as f64).collect();
        acc += fp.eval_x(&x) * tau.coefficient(&mp).eval(&x);
    }
    Ok(acc)
}

/// ⟨T_{f,r,k} σ_k^[m], τ⟩ = Σ_p Σ_{|β|=r} (1/β!) ∂^β(f̂_p·τ̃_{m+p})(m/k) · p^β / k^r,
/// grouping the symmetric index tuples into multi-indices β.
pub fn toeplitz_term(
    f: &TrigPoly,
    r: u32,
    k: u32,
    m: &[i64],
    tau: &TestSection,
    max_order: usize,
) -> Result<Complex64> {
    check_dims(f, m, tau)?;
    if r as usize > max_order {
        return Err(Error::DerivativeOrder { requested: r as usize, max: max_order });
    }
    let n = f.dim();
    let x: Vec<f64> = m.iter().map(|&v| v as f64 / k as f64).collect();
    let kr = (k as f64).powi(r as i32);
    let mut acc = Complex64::default();
    for (p, fp) in fiber_fourier(f) {
        let mp: Vec<i64> = m.iter().zip(&p).map(|(a, b)| a + b).collect();
        let tau_mp = tau.coefficient(&mp);
        for beta in fixed_degree_indices(n, r) {
            let p_pow: f64 = beta
                .iter()
                .zip(&p)
                .map(|(&b, &pi)| (pi as f64).powi(b as i32))
                .product();
            if p_pow == 0.0 {
                continue;
            }
            let deriv = product_derivative(&fp, &tau_mp, &beta, &x)?;
            acc += deriv * Complex64::new(p_pow / (kr * multi_factorial(&beta)), 0.0);
        }
    }
    Ok(acc)
}

/// ⟨T_{f,k} s, τ⟩ extended linearly over the state.
pub fn toeplitz_pairing_state(
    f: &TrigPoly,
    s: &PolarizedState,
    tau: &TestSection,
) -> Result<Complex64> {
    let mut acc = Complex64::default();
    for (m, c) in s.iter() {
        acc += c * toeplitz_pairing(f, s.level(), m, tau)?;
    }
    Ok(acc)
}

/// ⟨T_{f,r,k} s, τ⟩ extended linearly over the state.
pub fn toeplitz_term_state(
    f: &TrigPoly,
    r: u32,
    s: &PolarizedState,
    tau: &TestSection,
    max_order: usize,
) -> Result<Complex64> {
    let mut acc = Complex64::default();
    for (m, c) in s.iter() {
        acc += c * toeplitz_term(f, r, s.level(), m, tau, max_order)?;
    }
    Ok(acc)
}

/// ∂^β(f̂·τ̃)(x) by the Leibniz rule: trig derivatives close in frequency,
/// Schwartz derivatives close in the Gaussian-polynomial family.
fn product_derivative(
    fp: &TrigPoly,
    tau_mp: &SchwartzProfile,
    beta: &[u32],
    x: &[f64],
) -> Result<Complex64> {
    let mut acc = Complex64::default();
    for gamma in sub_indices(beta) {
        let rest: Vec<u32> = beta.iter().zip(&gamma).map(|(&b, &g)| b - g).collect();
        let binom = multi_binomial(beta, &gamma);
        let df = fp.derivative_x_multi(&gamma)?;
        if df.is_zero() {
            continue;
        }
        let dtau = tau_mp.derivative_multi(&rest).eval(x);
        acc += df.eval_x(x) * dtau * Complex64::new(binom, 0.0);
    }
    Ok(acc)
}

fn check_dims(f: &TrigPoly, m: &[i64], tau: &TestSection) -> Result<()> {
    if f.dim() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: tau.dim(), got: f.dim() });
    }
    if m.len() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: tau.dim(), got: m.len() });
    }
    Ok(())
}

/// All multi-indices on n axes with total degree exactly r.
fn fixed_degree_indices(n: usize, r: u32) -> Vec<Vec<u32>> {
    crate::fedosov::multi_indices(n, r)
        .into_iter()
        .filter(|idx| idx.iter().sum::<u32>() == r)
        .collect()
}

/// All γ ≤ β componentwise.
fn sub_indices(beta: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &b in beta {
        let mut next = Vec::with_capacity(out.len() * (b as usize + 1));
        for prefix in &out {
            for g in 0..=b {
                let mut v = prefix.clone();
                v.push(g);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn multi_factorial(idx: &[u32]) -> f64 {
    idx.iter().map(|&v| (1..=v).map(|w| w as f64).product::<f64>()).product()
}

fn multi_binomial(beta: &[u32], gamma: &[u32]) -> f64 {
    beta.iter()
        .zip(gamma)
        .map(|(&b, &g)| multi_factorial(&[b]) / (multi_factorial(&[g]) * multi_factorial(&[b - g])))
        .product()
}

/// Grid parameters for the seminorm estimate. `radius` is the half-width of
/// the sampling box around each profile's center; the default covers six
/// Gaussian widths, beyond which the analytic tail bound takes over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
    pub radius: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { step: 1e-3, radius: None }
    }
}

/// Estimate ‖τ‖_N: the sup over classes, derivative orders ≤ N and x of
/// |∂^β τ̃_m(x)|, by grid sampling plus the analytic Gaussian tail bound
/// outside the box. The returned value is an upper estimate of the true sup
/// up to grid resolution.
pub fn seminorm(tau: &TestSection, n_order: u32, grid: GridSpec) -> Result<f64> {
    if !(grid.step > 0.0) {
        return Err(Error::Rejected("grid step must be positive".into()));
    }
    let mut unique: Vec<&SchwartzProfile> = Vec::new();
    for (_, p) in tau.profiles() {
        if !unique.iter().any(|u| *u == p) {
            unique.push(p);
        }
    }
    let mut best: f64 = 0.0;
    for profile in unique {
        let half = grid.radius.unwrap_or(6.0 / profile.alpha().sqrt());
        for order in 0..=n_order {
            for beta in fixed_degree_indices(profile.dim(), order) {
                let derived = profile.derivative_multi(&beta);
                best = best.max(grid_sup(&derived, half, grid.step));
                best = best.max(derived.tail_sup_bound(half));
            }
        }
    }
    Ok(best)
}

fn grid_sup(p: &SchwartzProfile, half: f64, step: f64) -> f64 {
    let n = p.dim();
    let count = (2.0 * half / step).ceil() as usize + 1;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut best: f64 = 0.0;
    loop {
        for i in 0..n {
            x[i] = p.center()[i] - half + idx[i] as f64 * step;
        }
        best = best.max(p.eval(&x).norm());
        // odometer
        let mut axis = 0;
        loop {
            if axis == n {
                return best;
            }
            idx[axis] += 1;
            if idx[axis] < count {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// One row of a remainder sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub k: u32,
    pub n_order: u32,
    pub m_class: Vec<i64>,
    pub remainder_abs: f64,
    pub l1_norm: f64,
    pub seminorm: f64,
    pub bound_ratio: f64,
}

/// Remainder magnitudes per level, the empirical bound constants, and the
/// fitted decay exponent.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fitted_slope: Option<f64>,
    pub max_bound_ratio: f64,
}

/// Which states a sweep evaluates: a single basis class per k (the default;
/// the bound is uniform in s by ℓ¹-linearity) or every class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateChoice {
    SingleClass(Vec<i64>),
    AllClasses,
}

/// For each k: remainder = |⟨T_{f,k} σ_k^[m] − Σ_{r≤N} T_{f,r,k} σ_k^[m], τ⟩|,
/// with bound_ratio = remainder·k^{N+1}/(ℓ¹·seminorm_{N+1}) and a
/// least-squares slope of log remainder against log k (per-k maxima when
/// several classes are swept).
pub fn remainder_sweep(
    f: &TrigPoly,
    n_order: u32,
    k_list: &[u32],
    states: &StateChoice,
    tau_template: &SchwartzProfile,
    grid: GridSpec,
    max_order: usize,
) -> Result<SweepReport> {
    if k_list.is_empty() {
        return Err(Error::Rejected("empty k list".into()));
    }
    if k_list[0] == 0 || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Rejected("k list must be strictly increasing and positive".into()));
    }
    let n = f.dim();
    if tau_template.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: tau_template.dim() });
    }
    let mut rows = Vec::new();
    for &k in k_list {
        let tau = TestSection::from_template(k, tau_template);
        let sem = seminorm(&tau, n_order + 1, grid)?;
        let classes = match states {
            StateChoice::SingleClass(m) => vec![wb_reduce(m, k).0],
            StateChoice::AllClasses => all_classes(k, n),
        };
        for class in classes {
            let full = toeplitz_pairing(f, k, &class, &tau)?;
            let mut partial = Complex64::default();
            for r in 0..=n_order {
                partial += toeplitz_term(f, r, k, &class, &tau, max_order)?;
            }
            let remainder = (full - partial).norm();
            let ratio = remainder * (k as f64).powi(n_order as i32 + 1) / sem;
            rows.push(SweepRow {
                k,
                n_order,
                m_class: class,
                remainder_abs: remainder,
                l1_norm: 1.0,
                seminorm: sem,
                bound_ratio: ratio,
            });
        }
    }
    let fitted_slope = fit_decay(&rows).ok().map(|(slope, _)| slope);
    let max_bound_ratio = rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max);
    Ok(SweepReport { rows, fitted_slope, max_bound_ratio })
}

/// Least-squares slope of log remainder against log k over the per-k maxima,
/// together with the largest bound ratio (the empirical constant). Needs at
/// least three k with nonzero remainders.
pub fn fit_decay(rows: &[SweepRow]) -> Result<(f64, f64)> {
    let mut per_k: BTreeMap<u32, f64> = BTreeMap::new();
    for row in rows {
        let slot = per_k.entry(row.k).or_insert(0.0);
        *slot = slot.max(row.remainder_abs);
    }
    let points: Vec<(f64, f64)> = per_k
        .iter()
        .filter(|(_, &rem)| rem > 0.0)
        .map(|(&k, &rem)| ((k as f64).ln(), rem.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::Rejected(format!(
            "need at least 3 nonzero remainder rows to fit a slope, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let max_ratio = rows.iter().map(|r| r.bound_ratio).fold(0.0, f64::max);
    Ok((slope, max_ratio))
}

/// The weight-r action route: compute 𝐉_f with the jet engine, take the
/// polarized weight-r component, send its fibre part through the ω-duality
/// arrow to the operator Σ g_β(x,y) ∂_x^β at level k, and pair weakly with
/// σ_k^[m] against τ (integration by parts; ∂_x is divergence-free). Must
/// reproduce `toeplitz_term`.
pub fn jet_action_pairing(
    f: &TrigPoly,
    r: u32,
    k: u32,
    m: &[i64],
    tau: &TestSection,
) -> Result<Complex64> {
    check_dims(f, m, tau)?;
    let n = f.dim();
    let geom = Geometry::torus(n);
    let trunc = Truncation::new(r, r);
    let jet = quantum_jet(&HbarPoly::from_trig(f.clone()), &geom, trunc)?.jet;
    let component = jet.polarized_weight_component(r);
    let fiber_part = hodge_apply(HodgeOp::PiQ, &component);
    let mut acc = Complex64::default();
    for (mono, coeff) in fiber_part.iter() {
        if mono.form_degree() > 0 {
            return Err(Error::Internal("jet component carries form factors".into()));
        }
        let level_coeff = coeff.scale(Complex64::new(0.0, 1.0 / k as f64).powu(mono.hpow));
        for (beta, w) in duality_arrow_expand(&geom, &mono.cuexp, k) {
            acc += w * weak_operator_pairing(&level_coeff, &beta, k, m, tau)?;
        }
    }
    Ok(acc)
}

/// ⟨g·∂_x^β σ_k^[m], τ⟩ in the weak sense:
/// (−1)^{|β|} Σ_{γ≤β} C(β,γ) ⟨σ_k^[m], ∂^γ g · ∂^{β−γ} τ⟩, where the base
/// pairing reads off one Weil–Brezin coefficient per fibre mode of g.
fn weak_operator_pairing(
    g: &TrigPoly,
    beta: &[u32],
    k: u32,
    m: &[i64],
    tau: &TestSection,
) -> Result<Complex64> {
    let x: Vec<f64> = m.iter().map(|&v| v as f64 / k as f64).collect();
    let total: u32 = beta.iter().sum();
    let sign = if total % 2 == 0 { 1.0 } else { -1.0 };
    let mut acc = Complex64::default();
    for gamma in sub_indices(beta) {
        let rest: Vec<u32> = beta.iter().zip(&gamma).map(|(&b, &g0)| b - g0).collect();
        let binom = multi_binomial(beta, &gamma);
        let dg = g.derivative_x_multi(&gamma)?;
        if dg.is_zero() {
            continue;
        }
        for (p_mode, gp) in fiber_fourier(&dg) {
            let mp: Vec<i64> = m.iter().zip(&p_mode).map(|(a, b)| a + b).collect();
            let dtau = tau.coefficient(&mp).derivative_multi(&rest).eval(&x);
            acc += gp.eval_x(&x) * dtau * Complex64::new(binom, 0.0);
        }
    }
    Ok(acc * Complex64::new(sign, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian_template() -> SchwartzProfile {
        SchwartzProfile::gaussian(vec![0.0], 1.0).unwrap()
    }

    #[test]
    fn wb_reduce_examples() {
        assert_eq!(wb_reduce(&[5], 2), (vec![1], vec![2]));
        assert_eq!(wb_reduce(&[0], 7), (vec![0], vec![0]));
        assert_eq!(wb_reduce(&[-1], 4), (vec![3], vec![-1]));
    }

    #[test]
    fn fiber_fourier_examples_and_reassembly() {
        // e^{2πiy} → {p=1 ↦ 1}
        let f = TrigPoly::unit_mode_1d(0, 1);
        let map = fiber_fourier(&f);
        assert_eq!(map.len(), 1);
        assert!(map[&vec![1]].distance(&TrigPoly::one(1)) < 1e-15);
        // e^{2πi(x+y)} → {p=1 ↦ e^{2πix}}
        let f = TrigPoly::unit_mode_1d(1, 1);
        let map = fiber_fourier(&f);
        assert!(map[&vec![1]].distance(&TrigPoly::unit_mode_1d(1, 0)) < 1e-15);
        // x-only → {p=0 ↦ f}
        let f = TrigPoly::unit_mode_1d(2, 0);
        let map = fiber_fourier(&f);
        assert!(map[&vec![0]].distance(&f) < 1e-15);
        // reassembly is exact
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let f = crate::weyl::sample::random_trig(1, 3, 5, &mut rng);
            let mut back = TrigPoly::zero(1);
            for (p, fp) in fiber_fourier(&f) {
                let phase = TrigPoly::mode(1, vec![0], p.clone(), c(1.0, 0.0));
                back = back.try_add(&fp.try_mul(&phase).unwrap()).unwrap();
            }
            assert!(back.distance(&f) < 1e-15);
        }
    }

    #[test]
    fn pair_sigma_examples() {
        let g = gaussian_template();
        // k=2, m=0: evaluation at 0
        let tau = TestSection::from_template(2, &g);
        assert!((pair_sigma(2, &[0], &tau) - c(1.0, 0.0)).norm() < 1e-14);
        // k=4, m=1: evaluation at 1/4
        let tau = TestSection::from_template(4, &g);
        let expect = (-1.0f64 / 16.0).exp();
        assert!((pair_sigma(4, &[1], &tau) - c(expect, 0.0)).norm() < 1e-14);
        // k=2, m=2 resolves through periodicity: τ̃₂(1) = τ̃₀(0) = 1
        let tau = TestSection::from_template(2, &g);
        assert!((pair_sigma(2, &[2], &tau) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn toeplitz_pairing_examples() {
        let g = gaussian_template();
        // f = e^{2πiy}, k=4, m=0: single p=1 term evaluated at 1/4
        let f = TrigPoly::unit_mode_1d(0, 1);
        let tau = TestSection::from_template(4, &g);
        let v = toeplitz_pairing(&f, 4, &[0], &tau).unwrap();
        assert!((v - c((-1.0f64 / 16.0).exp(), 0.0)).norm() < 1e-14);
        // f = 1: the identity operator
        let one = TrigPoly::one(1);
        let v = toeplitz_pairing(&one, 4, &[1], &tau).unwrap();
        assert!((v - pair_sigma(4, &[1], &tau)).norm() < 1e-15);
        // f = f(x): multiplication by f(m/k)
        let fx = TrigPoly::unit_mode_1d(1, 0);
        let v = toeplitz_pairing(&fx, 4, &[1], &tau).unwrap();
        let expect = fx.eval_x(&[0.25]) * pair_sigma(4, &[1], &tau);
        assert!((v - expect).norm() < 1e-15);
    }

    #[test]
    fn toeplitz_term_examples() {
        let g = gaussian_template();
        let tau = TestSection::from_template(4, &g);
        // r = 0 is the zeroth Taylor term Σ_p (f̂_p τ̃_{m+p})(m/k)
        let f = TrigPoly::unit_mode_1d(1, 1);
        let t0 = toeplitz_term(&f, 0, 4, &[0], &tau, 8).unwrap();
        let fp = TrigPoly::unit_mode_1d(1, 0);
        let expect = fp.eval_x(&[0.0]) * tau.coefficient(&[1]).eval(&[0.0]);
        assert!((t0 - expect).norm() < 1e-14);
        // f = e^{2πiy}, r = 1: τ̃'_{m+1}(m/k)/k
        let f = TrigPoly::unit_mode_1d(0, 1);
        let t1 = toeplitz_term(&f, 1, 4, &[0], &tau, 8).unwrap();
        let expect = tau.coefficient(&[1]).derivative(0).eval(&[0.0]) / c(4.0, 0.0);
        assert!((t1 - expect).norm() < 1e-14);
        // y-independent f: all r ≥ 1 terms vanish
        let fx = TrigPoly::unit_mode_1d(2, 0);
        for r in 1..=3 {
            let t = toeplitz_term(&fx, r, 4, &[0], &tau, 8).unwrap();
            assert_eq!(t, Complex64::default());
        }
        // derivative order cap enforced
        assert!(toeplitz_term(&f, 9, 4, &[0], &tau, 8).is_err());
    }

    #[test]
    fn l1_norm_examples() {
        let mut s = PolarizedState::zero(4, 1);
        s.add(&[0], c(2.0, 0.0));
        s.add(&[1], c(-1.0, 0.0));
        assert!((s.l1_norm() - 3.0).abs() < 1e-15);
        assert_eq!(PolarizedState::zero(4, 1).l1_norm(), 0.0);
        let mut s = PolarizedState::zero(4, 1);
        s.add(&[0], c(0.0, 1.0));
        assert!((s.l1_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn seminorm_gaussian_values() {
        let g = gaussian_template();
        let tau = TestSection::from_template(2, &g);
        let grid = GridSpec::default();
        // N = 0: the Gaussian peak
        let s0 = seminorm(&tau, 0, grid).unwrap();
        assert!((s0 - 1.0).abs() < 1e-6);
        // N = 1: max(1, sup|−2x e^{−x²}|) = max(1, √(2/e)) = 1
        let s1 = seminorm(&tau, 1, grid).unwrap();
        assert!((s1 - 1.0).abs() < 1e-6);
        // sup of the first derivative alone is √(2/e)
        let d = g.derivative(0);
        let sup = grid_sup(&d, 6.0, 1e-3);
        assert!((sup - (2.0f64 / std::f64::consts::E).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn seminorm_zero_section_is_zero() {
        // a profile with empty polynomial part evaluates to zero everywhere
        let z = SchwartzProfile::new(vec![0.0], 1.0, BTreeMap::new()).unwrap();
        let tau = TestSection::from_template(2, &z);
        assert_eq!(seminorm(&tau, 1, GridSpec::default()).unwrap(), 0.0);
    }

    #[test]
    fn hoelder_control_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = SchwartzProfile::gaussian(vec![0.3], 2.0).unwrap();
        for k in [2u32, 5] {
            let tau = TestSection::from_template(k, &g);
            let sem = seminorm(&tau, 0, GridSpec::default()).unwrap();
            for _ in 0..20 {
                let mut s = PolarizedState::zero(k, 1);
                for _ in 0..4 {
                    let m = rng.gen_range(-6i64..6);
                    s.add(&[m], c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
                let lhs = state_pairing(&s, &tau).norm();
                // 1e-6 relative slack covers grid resolution of the sup
                assert!(lhs <= s.l1_norm() * sem * (1.0 + 1e-6) + 1e-12);
            }
        }
    }

    #[test]
    fn pairings_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = SchwartzProfile::gaussian(vec![0.1], 1.5).unwrap();
        let tau = TestSection::from_template(4, &g);
        for _ in 0..10 {
            let f1 = crate::weyl::sample::random_trig(1, 2, 3, &mut rng);
            let f2 = crate::weyl::sample::random_trig(1, 2, 3, &mut rng);
            let a = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let comb = f1.scale(a).try_add(&f2).unwrap();
            let lhs = toeplitz_pairing(&comb, 4, &[1], &tau).unwrap();
            let rhs = a * toeplitz_pairing(&f1, 4, &[1], &tau).unwrap()
                + toeplitz_pairing(&f2, 4, &[1], &tau).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
            // linearity in s
            let mut s = PolarizedState::zero(4, 1);
            s.add(&[0], a);
            s.add(&[2], c(1.0, 0.0));
            let lhs = toeplitz_pairing_state(&f1, &s, &tau).unwrap();
            let rhs = a * toeplitz_pairing(&f1, 4, &[0], &tau).unwrap()
                + toeplitz_pairing(&f1, 4, &[2], &tau).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        }
        // linearity in τ (profiles sharing center and width add by their
        // polynomial parts)
        let mut pa = BTreeMap::new();
        pa.insert(vec![0u32], c(1.0, 0.0));
        let mut pb = BTreeMap::new();
        pb.insert(vec![1u32], c(0.5, -0.5));
        let mut pab: BTreeMap<Vec<u32>, Complex64> = pa.clone();
        for (key, v) in &pb {
            *pab.entry(key.clone()).or_default() += *v;
        }
        let ta = TestSection::from_template(4, &SchwartzProfile::new(vec![0.2], 1.0, pa).unwrap());
        let tb = TestSection::from_template(4, &SchwartzProfile::new(vec![0.2], 1.0, pb).unwrap());
        let tab =
            TestSection::from_template(4, &SchwartzProfile::new(vec![0.2], 1.0, pab).unwrap());
        let f = TrigPoly::unit_mode_1d(1, 1);
        let lhs = toeplitz_pairing(&f, 4, &[0], &tab).unwrap();
        let rhs = toeplitz_pairing(&f, 4, &[0], &ta).unwrap()
            + toeplitz_pairing(&f, 4, &[0], &tb).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn sweep_collapses_for_base_functions() {
        // f = f(x): only the p = 0 mode survives and the remainder is exactly 0
        let f = TrigPoly::unit_mode_1d(2, 0);
        let template = SchwartzProfile::gaussian(vec![0.3], 2.0).unwrap();
        let report = remainder_sweep(
            &f,
            1,
            &[4, 8, 16],
            &StateChoice::SingleClass(vec![0]),
            &template,
            GridSpec::default(),
            8,
        )
        .unwrap();
        assert!(report.rows.iter().all(|r| r.remainder_abs == 0.0));
        assert!(report.fitted_slope.is_none());
    }

    #[test]
    fn sweep_single_mode_slope_near_minus_one() {
        // f = e^{2πiy}, N = 0: remainder(k) = |τ̃₁(1/k) − τ̃₁(0)| ~ |τ̃₁'(0)|/k
        let f = TrigPoly::unit_mode_1d(0, 1);
        let template = SchwartzProfile::gaussian(vec![0.55], 1.8).unwrap();
        let report = remainder_sweep(
            &f,
            0,
            &[4, 8, 16, 32, 64],
            &StateChoice::SingleClass(vec![0]),
            &template,
            GridSpec::default(),
            8,
        )
        .unwrap();
        let slope = report.fitted_slope.unwrap();
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
        // mean-value oracle at the largest k
        let tau = TestSection::from_template(64, &template);
        let expect = (tau.coefficient(&[1]).eval(&[1.0 / 64.0])
            - tau.coefficient(&[1]).eval(&[0.0]))
        .norm();
        let last = report.rows.last().unwrap();
        assert!((last.remainder_abs - expect).abs() < 1e-14);
    }

    #[test]
    fn fit_decay_synthetic() {
        let mk_rows = |pow: i32| -> Vec<SweepRow> {
            [4u32, 8, 16, 32]
                .iter()
                .map(|&k| SweepRow {
                    k,
                    n_order: 0,
                    m_class: vec![0],
                    remainder_abs: 3.0 * (k as f64).powi(pow),
                    l1_norm: 1.0,
                    seminorm: 1.0,
                    bound_ratio: 0.0,
                })
                .collect()
        };
        let (slope, _) = fit_decay(&mk_rows(-2)).unwrap();
        assert!((slope + 2.0).abs() < 1e-9);
        let (slope, _) = fit_decay(&mk_rows(-1)).unwrap();
        assert!((slope + 1.0).abs() < 1e-9);
        assert!(fit_decay(&mk_rows(-1)[..2]).is_err());
    }

    #[test]
    fn jet_route_matches_direct_expansion_terms() {
        let template = SchwartzProfile::gaussian(vec![0.25], 1.5).unwrap();
        let f = TrigPoly::unit_mode_1d(1, 1);
        for k in [4u32, 8] {
            let tau = TestSection::from_template(k, &template);
            for r in 0..=3 {
                let direct = toeplitz_term(&f, r, k, &[1], &tau, 8).unwrap();
                let via_jet = jet_action_pairing(&f, r, k, &[1], &tau).unwrap();
                assert!(
                    (direct - via_jet).norm() < 1e-10 * direct.norm().max(1.0),
                    "r={r} k={k}: {direct} vs {via_jet}"
                );
            }
        }
    }

    #[test]
    fn empty_k_list_rejected() {
        let f = TrigPoly::unit_mode_1d(0, 1);
        let template = gaussian_template();
        assert!(remainder_sweep(
            &f,
            0,
            &[],
            &StateChoice::SingleClass(vec![0]),
            &template,
            GridSpec::default(),
            8
        )
        .is_err());
    }
}
