//! JSON configuration schema and the CLI mode-expression shorthand.
//!
//! Trig polynomials are written as lists of records
//! `{qx:[…], py:[…], re:…, im:…}`; Schwartz profiles as
//! `{center:[…], alpha:…, poly:[{idx:[…], re:…, im:…}]}` with `idx` the
//! centered monomial powers (of x − center). The flag shorthand `e(q,p)`
//! denotes the unit-coefficient mode e^{2πi(qx+py)} in dimension 1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fedosov::HbarPoly;
use crate::schwartz::SchwartzProfile;
use crate::toeplitz::GridSpec;
use crate::trig::{FourierMode, TrigPoly};
use crate::weyl::{Geometry, Truncation};

#[derive(Debug, Clone, Deserialize)]
pub struct TrigTermLiteral {
    pub qx: Vec<i64>,
    pub py: Vec<i64>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PolyTermLiteral {
    pub idx: Vec<u32>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SchwartzLiteral {
    pub center: Vec<f64>,
    pub alpha: f64,
    #[serde(default)]
    pub poly: Vec<PolyTermLiteral>,
}

/// Either one template profile for every class or explicit per-class
/// profiles (keys are class vectors joined with ':').
#[derive(Debug, Clone, Deserialize)]
pub struct TauSpec {
    #[serde(default)]
    pub template: Option<SchwartzLiteral>,
    #[serde(default)]
    pub per_class: Option<BTreeMap<String, SchwartzLiteral>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct TruncationSpec {
    pub max_total_weight: u32,
    pub max_hbar: u32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct GridLiteral {
    pub step: f64,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_geometry")]
    pub geometry: String,
    #[serde(default)]
    pub truncation: Option<TruncationSpec>,
    /// Named function specs; `jet`/`classify` read "f", `star` reads "f", "g".
    /// A name with suffix `#<i>` contributes the ħ^i slice.
    #[serde(default)]
    pub functions: BTreeMap<String, Vec<TrigTermLiteral>>,
    #[serde(default)]
    pub tau: Option<TauSpec>,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<u32>,
    #[serde(default, rename = "N")]
    pub n_order: u32,
    #[serde(default)]
    pub grid: Option<GridLiteral>,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub plot_svg: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_deriv")]
    pub max_deriv_order: usize,
    #[serde(default)]
    pub all_classes: bool,
    #[serde(default)]
    pub m_class: Option<Vec<i64>>,
}

fn default_dimension() -> usize {
    1
}

fn default_geometry() -> String {
    "torus".into()
}

fn default_k_list() -> Vec<u32> {
    vec![4, 8, 16, 32, 64]
}

fn default_max_deriv() -> usize {
    8
}

impl Default for ConfigDocument {
    fn default() -> Self {
        ConfigDocument {
            dimension: default_dimension(),
            geometry: default_geometry(),
            truncation: None,
            functions: BTreeMap::new(),
            tau: None,
            k_list: default_k_list(),
            n_order: 0,
            grid: None,
            out_csv: None,
            plot_svg: None,
            seed: 0,
            max_deriv_order: default_max_deriv(),
            all_classes: false,
            m_class: None,
        }
    }
}

impl ConfigDocument {
    /// Parse a JSON config file, with line/field diagnostics on malformed
    /// input.
    pub fn load(path: &Path) -> Result<ConfigDocument> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc: ConfigDocument = serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!(
                "{} line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.geometry != "torus" && self.geometry != "local_flat" {
            return Err(Error::Config(format!(
                "geometry must be \"torus\" or \"local_flat\", got {:?}",
                self.geometry
            )));
        }
        if self.k_list.is_empty()
            || self.k_list[0] == 0
            || self.k_list.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "k_list must be non-empty, positive and strictly increasing".into(),
            ));
        }
        if let Some(g) = &self.grid {
            if !(g.step > 0.0) {
                return Err(Error::Config("grid.step must be positive".into()));
            }
        }
        Ok(())
    }

    /// The geometry selected by the config.
    pub fn build_geometry(&self) -> Geometry {
        match self.geometry.as_str() {
            "local_flat" => Geometry::local_flat(self.dimension),
            _ => Geometry::torus(self.dimension),
        }
    }

    /// Truncation policy, with the `POLQUANT_MAX_WEIGHT` environment variable
    /// overriding the total-weight cap.
    pub fn build_truncation(&self) -> Truncation {
        let mut t = self
            .truncation
            .map(|s| Truncation::new(s.max_total_weight, s.max_hbar))
            .unwrap_or_default();
        if let Ok(v) = std::env::var("POLQUANT_MAX_WEIGHT") {
            if let Ok(w) = v.parse::<u32>() {
                t.max_total_weight = w;
            }
        }
        t
    }

    pub fn build_grid(&self) -> GridSpec {
        self.grid
            .map(|g| GridSpec { step: g.step, radius: g.radius })
            .unwrap_or_default()
    }

    /// A named function: the base entry plus any `name#<i>` ħ-slices.
    pub fn build_function(&self, name: &str) -> Result<HbarPoly> {
        let mut out = HbarPoly::zero(self.dimension);
        let mut found = false;
        if let Some(terms) = self.functions.get(name) {
            out.set_coeff(0, trig_from_literals(self.dimension, terms)?);
            found = true;
        }
        for (key, terms) in &self.functions {
            if let Some(rest) = key.strip_prefix(name) {
                if let Some(power) = rest.strip_prefix('#') {
                    let i: u32 = power.parse().map_err(|_| {
                        Error::Config(format!("bad ħ-power suffix in function name {key:?}"))
                    })?;
                    out.set_coeff(i, trig_from_literals(self.dimension, terms)?);
                    found = true;
                }
            }
        }
        if !found {
            return Err(Error::Config(format!("config defines no function named {name:?}")));
        }
        Ok(out)
    }

    /// The τ template profile; defaults to the Gaussian e^{−1.8|x−0.55|²}
    /// (off-center so the Weil–Brezin coefficients have nonvanishing
    /// derivatives at the sampled Bohr–Sommerfeld points).
    pub fn build_tau_template(&self) -> Result<SchwartzProfile> {
        match &self.tau {
            Some(TauSpec { template: Some(lit), .. }) => schwartz_from_literal(lit),
            Some(TauSpec { template: None, per_class: Some(_) }) => Err(Error::Config(
                "per-class tau profiles require a fixed k; sweeps need a template".into(),
            )),
            _ => SchwartzProfile::gaussian(vec![0.55; self.dimension], 1.8)
                .map_err(|e| Error::Config(format!("default tau: {e}"))),
        }
    }

    /// Explicit per-class profiles for a fixed level k, when given.
    pub fn build_tau_per_class(
        &self,
        k: u32,
    ) -> Result<Option<BTreeMap<Vec<i64>, SchwartzProfile>>> {
        let Some(TauSpec { per_class: Some(map), .. }) = &self.tau else {
            return Ok(None);
        };
        let mut out = BTreeMap::new();
        for (key, lit) in map {
            let class: Vec<i64> = key
                .split(':')
                .map(|s| s.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad class key {key:?}")))?;
            if class.iter().any(|&c| c < 0 || c >= k as i64) {
                return Err(Error::Config(format!("class key {key:?} outside 0..{k}")));
            }
            out.insert(class, schwartz_from_literal(lit)?);
        }
        Ok(Some(out))
    }
}

pub fn trig_from_literals(n: usize, terms: &[TrigTermLiteral]) -> Result<TrigPoly> {
    let mut out = TrigPoly::zero(n);
    for t in terms {
        if t.qx.len() != n || t.py.len() != n {
            return Err(Error::Config(format!(
                "mode vectors must have length {n}: qx={:?} py={:?}",
                t.qx, t.py
            )));
        }
        out.insert(FourierMode::new(t.qx.clone(), t.py.clone()), Complex64::new(t.re, t.im));
    }
    out.normalize();
    Ok(out)
}

pub fn schwartz_from_literal(lit: &SchwartzLiteral) -> Result<SchwartzProfile> {
    let n = lit.center.len();
    let mut poly = BTreeMap::new();
    if lit.poly.is_empty() {
        poly.insert(vec![0; n], Complex64::new(1.0, 0.0));
    }
    for term in &lit.poly {
        if term.idx.len() != n {
            return Err(Error::Config(format!("poly index must have length {n}: {:?}", term.idx)));
        }
        let e = poly.entry(term.idx.clone()).or_insert(Complex64::default());
        *e += Complex64::new(term.re, term.im);
    }
    SchwartzProfile::new(lit.center.clone(), lit.alpha, poly)
        .map_err(|e| Error::Config(format!("bad Schwartz literal: {e}")))
}

/// Parse the flag shorthand for 1-dimensional trig polynomials:
/// sums/differences of `[coef*]e(q,p)` terms and bare numeric constants,
/// e.g. `e(0,1)+e(0,-1)`, `2*e(1,0) - 0.5`, `1`.
pub fn parse_mode_expr(expr: &str) -> Result<TrigPoly> {
    let mut out = TrigPoly::zero(1);
    let cleaned: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Err(Error::Config("empty function expression".into()));
    }
    // split into signed chunks at top level; signs inside e(..) stay put
    let mut chunks: Vec<(f64, String)> = Vec::new();
    let mut current = String::new();
    let mut sign = 1.0;
    let mut depth = 0usize;
    for (i, ch) in cleaned.chars().enumerate() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::Config(format!("unbalanced ')' in {expr:?}")))?;
                current.push(ch);
            }
            '+' | '-' if depth == 0 && i > 0 => {
                if current.is_empty() {
                    return Err(Error::Config(format!("dangling sign in {expr:?}")));
                }
                chunks.push((sign, std::mem::take(&mut current)));
                sign = if ch == '-' { -1.0 } else { 1.0 };
            }
            '-' if depth == 0 && i == 0 => sign = -1.0,
            '+' if depth == 0 && i == 0 => {}
            _ => current.push(ch),
        }
    }
    if depth != 0 {
        return Err(Error::Config(format!("unbalanced '(' in {expr:?}")));
    }
    if current.is_empty() {
        return Err(Error::Config(format!("dangling sign in {expr:?}")));
    }
    chunks.push((sign, current));
    for (sgn, chunk) in chunks {
        let (coef, mode_part) = match chunk.split_once('*') {
            Some((c, rest)) => {
                let v: f64 = c
                    .parse()
                    .map_err(|_| Error::Config(format!("bad coefficient {c:?} in {expr:?}")))?;
                (v, rest.to_string())
            }
            None => (1.0, chunk.clone()),
        };
        if let Some(args) = mode_part.strip_prefix("e(").and_then(|s| s.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!("e(q,p) needs two integers: {mode_part:?}")));
            }
            let q: i64 = parts[0]
                .parse()
                .map_err(|_| Error::Config(format!("bad mode index {:?}", parts[0])))?;
            let p: i64 = parts[1]
                .parse()
                .map_err(|_| Error::Config(format!("bad mode index {:?}", parts[1])))?;
            out.insert(FourierMode::new(vec![q], vec![p]), Complex64::new(sgn * coef, 0.0));
        } else {
            let v: f64 = mode_part.parse().map_err(|_| {
                Error::Config(format!("unrecognized term {mode_part:?} in {expr:?}"))
            })?;
            out.insert(FourierMode::zero(1), Complex64::new(sgn * coef * v, 0.0));
        }
    }
    out.normalize();
    Ok(out)
}

/// Parse an ħ-sliced expression: slices separated by ';' give the ħ^0, ħ^1, …
/// coefficients, each in the `e(q,p)` shorthand. An empty slice means zero.
pub fn parse_hbar_expr(expr: &str) -> Result<HbarPoly> {
    let mut slices = Vec::new();
    for part in expr.split(';') {
        let trimmed = part.trim();
        if trimmed.is_empty() {
            slices.push(TrigPoly::zero(1));
        } else {
            slices.push(parse_mode_expr(trimmed)?);
        }
    }
    Ok(HbarPoly::from_slices(1, slices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_simple_modes() {
        let f = parse_mode_expr("e(0,1)").unwrap();
        assert!(f.distance(&TrigPoly::unit_mode_1d(0, 1)) < 1e-15);
        let f = parse_mode_expr("e(0,1)+e(0,-1)").unwrap();
        let expect =
            TrigPoly::unit_mode_1d(0, 1).try_add(&TrigPoly::unit_mode_1d(0, -1)).unwrap();
        assert!(f.distance(&expect) < 1e-15);
        let f = parse_mode_expr("2*e(1,0) - 0.5").unwrap();
        let expect = TrigPoly::unit_mode_1d(1, 0)
            .scale(Complex64::new(2.0, 0.0))
            .try_add(&TrigPoly::constant(1, Complex64::new(-0.5, 0.0)))
            .unwrap();
        assert!(f.distance(&expect) < 1e-15);
        let f = parse_mode_expr("e(1,-2)").unwrap();
        assert!(f.distance(&TrigPoly::unit_mode_1d(1, -2)) < 1e-15);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse_mode_expr("").is_err());
        assert!(parse_mode_expr("e(1)").is_err());
        assert!(parse_mode_expr("e(1,2").is_err());
        assert!(parse_mode_expr("wat").is_err());
    }

    #[test]
    fn parse_hbar_slices() {
        let f = parse_hbar_expr("5; e(1,0)").unwrap();
        assert_eq!(f.degree(), 1);
        assert!(f.coeff(0).distance(&TrigPoly::constant(1, Complex64::new(5.0, 0.0))) < 1e-15);
        assert!(f.coeff(1).distance(&TrigPoly::unit_mode_1d(1, 0)) < 1e-15);
    }

    #[test]
    fn config_validation_and_defaults() {
        let doc: ConfigDocument = serde_json::from_str("{}").unwrap();
        doc.validate().unwrap();
        assert_eq!(doc.dimension, 1);
        assert_eq!(doc.k_list, vec![4, 8, 16, 32, 64]);
        let bad: ConfigDocument = serde_json::from_str(r#"{"k_list": [4, 4]}"#).unwrap();
        assert!(bad.validate().is_err());
        let bad: std::result::Result<ConfigDocument, _> =
            serde_json::from_str(r#"{"unknown_field": 1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn functions_with_hbar_slices() {
        let json = r#"{
            "functions": {
                "f": [{"qx":[0],"py":[1],"re":1.0}],
                "f#1": [{"qx":[1],"py":[0],"re":1.0}]
            }
        }"#;
        let doc: ConfigDocument = serde_json::from_str(json).unwrap();
        let f = doc.build_function("f").unwrap();
        assert_eq!(f.degree(), 1);
        assert!(f.coeff(0).distance(&TrigPoly::unit_mode_1d(0, 1)) < 1e-15);
        assert!(f.coeff(1).distance(&TrigPoly::unit_mode_1d(1, 0)) < 1e-15);
        assert!(doc.build_function("g").is_err());
    }
}
