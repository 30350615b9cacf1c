//! Parameter-dependent matrix families H(λ) = Σ_k C_k λ^k.
//!
//! Builtin models are stored in the same polynomial form, so evaluation and
//! the analytic derivative share one code path; the builtin tag only adds
//! parameter-domain checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{json, Value};

use crate::eig::{self, Spectrum};
use crate::error::{LevelflowError, Result};
use crate::linalg::{self, CMat, C64};
use crate::oscillator::OscSpec;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinName {
    TwoLevelHermitian,
    TwoLevelPt,
    Oscillator2d,
}

impl BuiltinName {
    pub const ALL: [BuiltinName; 3] =
        [BuiltinName::TwoLevelHermitian, BuiltinName::TwoLevelPt, BuiltinName::Oscillator2d];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinName::TwoLevelHermitian => "two_level_hermitian",
            BuiltinName::TwoLevelPt => "two_level_pt",
            BuiltinName::Oscillator2d => "oscillator_2d",
        }
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BuiltinName {
    type Err = LevelflowError;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| LevelflowError::InvalidParameter(format!("unknown builtin model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinModel {
    pub name: BuiltinName,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    Builtin(BuiltinModel),
    Polynomial,
}

#[derive(Debug, Clone)]
pub struct MatrixFamily {
    dim: usize,
    kind: FamilyKind,
    coeffs: Vec<CMat>,
    hermitian_on_real_axis: bool,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

impl MatrixFamily {
    /// H(λ) = Σ_k coeffs[k]·λ^k.
    pub fn polynomial(coeffs: Vec<CMat>, hermitian_on_real_axis: bool) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| LevelflowError::InvalidParameter("at least one coefficient matrix required".into()))?;
        let dim = first.nrows();
        if dim < 2 {
            return Err(LevelflowError::InvalidParameter(format!("dim must be at least 2, got {dim}")));
        }
        for (k, ck) in coeffs.iter().enumerate() {
            if ck.nrows() != dim || ck.ncols() != dim {
                return Err(LevelflowError::InvalidParameter(format!(
                    "coefficient {k} is {}x{}, expected {dim}x{dim}",
                    ck.nrows(),
                    ck.ncols()
                )));
            }
            if ck.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(LevelflowError::InvalidParameter(format!("coefficient {k} has non-finite entries")));
            }
            if hermitian_on_real_axis {
                let defect = linalg::hermitian_defect(ck);
                if defect > 1e-14 * linalg::frobenius(ck).max(1.0) {
                    return Err(LevelflowError::InvalidParameter(format!(
                        "coefficient {k} is not Hermitian (defect {defect:e}) but hermitian_on_real_axis is set"
                    )));
                }
            }
        }
        Ok(MatrixFamily { dim, kind: FamilyKind::Polynomial, coeffs, hermitian_on_real_axis })
    }

    /// diag(−1+z, 1−z) with off-diagonal −1.
    pub fn two_level_hermitian() -> Self {
        let c0 = CMat::from_row_slice(2, 2, &[c(-1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        let c1 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        MatrixFamily {
            dim: 2,
            kind: FamilyKind::Builtin(BuiltinModel { name: BuiltinName::TwoLevelHermitian, params: BTreeMap::new() }),
            coeffs: vec![c0, c1],
            hermitian_on_real_axis: true,
        }
    }

    /// diag(ig, −ig) with off-diagonal −1.
    pub fn two_level_pt() -> Self {
        let c0 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let c1 = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        MatrixFamily {
            dim: 2,
            kind: FamilyKind::Builtin(BuiltinModel { name: BuiltinName::TwoLevelPt, params: BTreeMap::new() }),
            coeffs: vec![c0, c1],
            hermitian_on_real_axis: false,
        }
    }

    pub fn oscillator_2d(spec: &OscSpec) -> Result<Self> {
        spec.validate()?;
        let (c0, c1) = crate::oscillator::family_coefficients(spec);
        let mut params = BTreeMap::new();
        params.insert("k".to_string(), spec.k);
        params.insert("N".to_string(), spec.n_max as f64);
        params.insert("lambda_ref".to_string(), spec.lambda_ref);
        Ok(MatrixFamily {
            dim: c0.nrows(),
            kind: FamilyKind::Builtin(BuiltinModel { name: BuiltinName::Oscillator2d, params }),
            coeffs: vec![c0, c1],
            hermitian_on_real_axis: true,
        })
    }

    pub fn builtin(name: BuiltinName, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            BuiltinName::TwoLevelHermitian | BuiltinName::TwoLevelPt => &[],
            BuiltinName::Oscillator2d => &["k", "N", "lambda_ref"],
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(LevelflowError::InvalidParameter(format!("model {name} has no parameter `{bad}`")));
        }
        match name {
            BuiltinName::TwoLevelHermitian => Ok(Self::two_level_hermitian()),
            BuiltinName::TwoLevelPt => Ok(Self::two_level_pt()),
            BuiltinName::Oscillator2d => {
                let k = params.get("k").copied().unwrap_or(1.0);
                let n = params.get("N").copied().unwrap_or(6.0);
                if n.fract() != 0.0 || n < 0.0 {
                    return Err(LevelflowError::InvalidParameter(format!("N must be a non-negative integer, got {n}")));
                }
                let lambda_ref = params.get("lambda_ref").copied().unwrap_or(k);
                Self::oscillator_2d(&OscSpec { k, n_max: n as usize, lambda_ref })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn hermitian_on_real_axis(&self) -> bool {
        self.hermitian_on_real_axis
    }

    pub fn builtin_name(&self) -> Option<BuiltinName> {
        match &self.kind {
            FamilyKind::Builtin(b) => Some(b.name),
            FamilyKind::Polynomial => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            FamilyKind::Builtin(b) => b.name.to_string(),
            FamilyKind::Polynomial => format!("polynomial(dim={}, degree={})", self.dim, self.coeffs.len() - 1),
        }
    }

    fn check_parameter(&self, lambda: C64) -> Result<()> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(LevelflowError::InvalidParameter(format!("parameter {lambda} is not finite")));
        }
        if self.builtin_name() == Some(BuiltinName::Oscillator2d) && (lambda.im != 0.0 || lambda.re <= 0.0) {
            return Err(LevelflowError::Domain(format!(
                "oscillator_2d needs a real positive stiffness, got {lambda}"
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, lambda: C64) -> Result<CMat> {
        self.check_parameter(lambda)?;
        let mut acc = CMat::zeros(self.dim, self.dim);
        for ck in self.coeffs.iter().rev() {
            acc = acc * lambda + ck;
        }
        Ok(acc)
    }

    pub fn evaluate_derivative(&self, lambda: C64) -> Result<CMat> {
        self.check_parameter(lambda)?;
        let mut acc = CMat::zeros(self.dim, self.dim);
        for (k, ck) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * lambda + ck * C64::new(k as f64, 0.0);
        }
        Ok(acc)
    }

    pub fn evaluate_real(&self, lambda: f64) -> Result<CMat> {
        self.evaluate(C64::new(lambda, 0.0))
    }

    pub fn derivative_real(&self, lambda: f64) -> Result<CMat> {
        self.evaluate_derivative(C64::new(lambda, 0.0))
    }

    /// Spectrum at λ, using the Hermitian solver on the real axis when the
    /// family is Hermitian there and the general solver otherwise.
    pub fn spectrum(&self, lambda: C64, settings: &Settings) -> Result<Spectrum> {
        let h = self.evaluate(lambda)?;
        let s = if self.hermitian_on_real_axis && lambda.im == 0.0 {
            eig::eig_hermitian(&h, settings)?
        } else {
            eig::eig_general(&h, settings)?
        };
        Ok(s.with_lambda(lambda))
    }

    pub fn spectrum_real(&self, lambda: f64, settings: &Settings) -> Result<Spectrum> {
        self.spectrum(C64::new(lambda, 0.0), settings)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| LevelflowError::parse("$", e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| LevelflowError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| LevelflowError::parse("$", "expected a JSON object"))?;
        let kind = obj
            .get("kind")
            .ok_or_else(|| LevelflowError::parse("$.kind", "missing field"))?
            .as_str()
            .ok_or_else(|| LevelflowError::parse("$.kind", "expected a string"))?;
        match kind {
            "builtin" => {
                let name = obj
                    .get("name")
                    .ok_or_else(|| LevelflowError::parse("$.name", "missing field"))?
                    .as_str()
                    .ok_or_else(|| LevelflowError::parse("$.name", "expected a string"))?;
                let name: BuiltinName =
                    name.parse().map_err(|_| LevelflowError::parse("$.name", format!("unknown builtin `{name}`")))?;
                let mut params = BTreeMap::new();
                if let Some(p) = obj.get("params") {
                    let p = p.as_object().ok_or_else(|| LevelflowError::parse("$.params", "expected an object"))?;
                    for (key, v) in p {
                        let x = v
                            .as_f64()
                            .ok_or_else(|| LevelflowError::parse(format!("$.params.{key}"), "expected a number"))?;
                        params.insert(key.clone(), x);
                    }
                }
                Self::builtin(name, &params).map_err(|e| LevelflowError::parse("$.params", e.to_string()))
            }
            "polynomial" => {
                let dim = obj
                    .get("dim")
                    .ok_or_else(|| LevelflowError::parse("$.dim", "missing field"))?
                    .as_u64()
                    .ok_or_else(|| LevelflowError::parse("$.dim", "expected a non-negative integer"))?
                    as usize;
                if dim < 2 {
                    return Err(LevelflowError::parse("$.dim", format!("must be at least 2, got {dim}")));
                }
                let hermitian = match obj.get("hermitian_on_real_axis") {
                    None => false,
                    Some(v) => v
                        .as_bool()
                        .ok_or_else(|| LevelflowError::parse("$.hermitian_on_real_axis", "expected a boolean"))?,
                };
                let list = obj
                    .get("coeffs")
                    .ok_or_else(|| LevelflowError::parse("$.coeffs", "missing field"))?
                    .as_array()
                    .ok_or_else(|| LevelflowError::parse("$.coeffs", "expected an array of matrices"))?;
                if list.is_empty() {
                    return Err(LevelflowError::parse("$.coeffs", "at least one coefficient matrix required"));
                }
                let coeffs = list
                    .iter()
                    .enumerate()
                    .map(|(k, m)| parse_matrix(m, dim, &format!("$.coeffs[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                Self::polynomial(coeffs, hermitian).map_err(|e| LevelflowError::parse("$.coeffs", e.to_string()))
            }
            other => Err(LevelflowError::parse("$.kind", format!("expected \"builtin\" or \"polynomial\", got {other:?}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match &self.kind {
            FamilyKind::Builtin(b) => json!({"kind": "builtin", "name": b.name.as_str(), "params": b.params}),
            FamilyKind::Polynomial => {
                let coeffs: Vec<Value> = self
                    .coeffs
                    .iter()
                    .map(|m| {
                        let mut flat = Vec::with_capacity(self.dim * self.dim);
                        for i in 0..self.dim {
                            for j in 0..self.dim {
                                flat.push(json!([m[(i, j)].re, m[(i, j)].im]));
                            }
                        }
                        Value::Array(flat)
                    })
                    .collect();
                json!({
                    "dim": self.dim,
                    "kind": "polynomial",
                    "coeffs": coeffs,
                    "hermitian_on_real_axis": self.hermitian_on_real_axis,
                })
            }
        }
    }
}

fn parse_entry(v: &Value, path: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => {
            let re = re.as_f64().ok_or_else(|| LevelflowError::parse(format!("{path}[0]"), "expected a number"))?;
            let im = im.as_f64().ok_or_else(|| LevelflowError::parse(format!("{path}[1]"), "expected a number"))?;
            Ok(C64::new(re, im))
        }
        _ => Err(LevelflowError::parse(path, "expected [re, im]")),
    }
}

/// A coefficient matrix is either a flat row-major list of dim² entries or a
/// list of dim rows.
fn parse_matrix(v: &Value, dim: usize, path: &str) -> Result<CMat> {
    let items = v.as_array().ok_or_else(|| LevelflowError::parse(path, "expected an array"))?;
    let mut m = CMat::zeros(dim, dim);
    if items.len() == dim * dim {
        for (idx, e) in items.iter().enumerate() {
            m[(idx / dim, idx % dim)] = parse_entry(e, &format!("{path}[{idx}]"))?;
        }
    } else if items.len() == dim {
        for (i, row) in items.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|r| r.len() == dim)
                .ok_or_else(|| LevelflowError::parse(format!("{path}[{i}]"), format!("expected a row of {dim} entries")))?;
            for (j, e) in row.iter().enumerate() {
                m[(i, j)] = parse_entry(e, &format!("{path}[{i}][{j}]"))?;
            }
        }
    } else {
        return Err(LevelflowError::parse(
            path,
            format!("expected {} entries (row-major) or {dim} rows, got {}", dim * dim, items.len()),
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        linalg::frobenius(&(a - b)) <= tol
    }

    #[test]
    fn two_level_hermitian_at_one() {
        let h = MatrixFamily::two_level_hermitian().evaluate_real(1.0).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(close(&h, &want, 0.0));
    }

    #[test]
    fn two_level_pt_at_zero_and_derivative() {
        let f = MatrixFamily::two_level_pt();
        let h = f.evaluate_real(0.0).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(close(&h, &want, 0.0));
        let d = f.derivative_real(3.7).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        assert!(close(&d, &want, 0.0));
    }

    #[test]
    fn hermitian_derivative_is_constant() {
        let d = MatrixFamily::two_level_hermitian().derivative_real(-0.3).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(close(&d, &want, 0.0));
    }

    #[test]
    fn simple_polynomial() {
        let c1 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let f = MatrixFamily::polynomial(vec![CMat::identity(2, 2), c1], true).unwrap();
        let h = f.evaluate_real(2.0).unwrap();
        let want = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0)]));
        assert!(close(&h, &want, 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let f = MatrixFamily::two_level_hermitian();
        assert!(matches!(f.evaluate_real(f64::NAN), Err(LevelflowError::InvalidParameter(_))));
        let osc = MatrixFamily::oscillator_2d(&OscSpec::new(1.0, 2)).unwrap();
        assert!(matches!(osc.evaluate_real(0.0), Err(LevelflowError::Domain(_))));
        assert!(matches!(osc.evaluate(C64::new(1.0, 0.1)), Err(LevelflowError::Domain(_))));
    }

    #[test]
    fn rejects_inconsistent_coefficients() {
        assert!(MatrixFamily::polynomial(vec![CMat::identity(2, 2), CMat::identity(3, 3)], false).is_err());
        assert!(MatrixFamily::polynomial(vec![CMat::identity(1, 1)], false).is_err());
        let skew = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(MatrixFamily::polynomial(vec![skew], true).is_err());
    }

    #[test]
    fn json_polynomial_flat_and_nested() {
        let flat = r#"{"dim": 2, "kind": "polynomial", "hermitian_on_real_axis": true,
            "coeffs": [[[1,0],[0,0],[0,0],[1,0]], [[1,0],[0,0],[0,0],[-1,0]]]}"#;
        let nested = r#"{"dim": 2, "kind": "polynomial", "hermitian_on_real_axis": true,
            "coeffs": [[[[1,0],[0,0]],[[0,0],[1,0]]], [[[1,0],[0,0]],[[0,0],[-1,0]]]]}"#;
        let a = MatrixFamily::from_json_str(flat).unwrap();
        let b = MatrixFamily::from_json_str(nested).unwrap();
        assert!(close(&a.evaluate_real(2.0).unwrap(), &b.evaluate_real(2.0).unwrap(), 0.0));
        let back = MatrixFamily::from_json_value(&a.to_json()).unwrap();
        assert!(close(&back.evaluate_real(0.7).unwrap(), &a.evaluate_real(0.7).unwrap(), 0.0));
    }

    #[test]
    fn json_builtin() {
        let f = MatrixFamily::from_json_str(r#"{"kind": "builtin", "name": "oscillator_2d", "params": {"k": 1, "N": 2}}"#)
            .unwrap();
        assert_eq!(f.dim(), 9);
        assert_eq!(f.builtin_name(), Some(BuiltinName::Oscillator2d));
    }

    #[test]
    fn json_errors_name_the_path() {
        let err = MatrixFamily::from_json_str(r#"{"dim": 2, "kind": "polynomial", "coeffs": [[[1,0],[0,"x"],[0,0],[1,0]]]}"#)
            .unwrap_err();
        match err {
            LevelflowError::ModelParse { path, .. } => assert_eq!(path, "$.coeffs[0][1][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let err = MatrixFamily::from_json_str(r#"{"kind": "builtin", "name": "nope"}"#).unwrap_err();
        assert!(matches!(err, LevelflowError::ModelParse { ref path, .. } if path == "$.name"));
        let err = MatrixFamily::from_json_str(r#"{"kind": "polynomial", "coeffs": []}"#).unwrap_err();
        assert!(matches!(err, LevelflowError::ModelParse { ref path, .. } if path == "$.dim"));
    }
}
