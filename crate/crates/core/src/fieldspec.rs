//! Field specifications and their JSON document format.
//!
//! A [`FieldSpec`] fully describes a locally stationary field: dimension,
//! split between unique-minimum and plateau coordinates, domain, exponent
//! profiles and local variance scales. Documents are validated structurally
//! before use; every violation reports the JSON path of the offending node.

use crate::error::{Error, Result};
use crate::profile::AlphaProfile;
use serde::Serialize;
use serde_json::Value;

/// Local variance scale C_i: a positive function on the domain hypercube.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum VarianceScale {
    /// C(t) = value.
    Constant { value: f64 },
    /// Product over axes of per-axis polynomials (ascending coefficients).
    Separable { coeffs: Vec<Vec<f64>> },
    /// Multilinear interpolation of tabulated values on a tensor grid.
    Grid {
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
    /// prefactor * t_axis^{-alpha_axis(t_axis)}, the scale of a standardized
    /// mfBm coordinate inside an aggregate field.
    MfbmLocal { axis: usize, prefactor: f64 },
}

impl VarianceScale {
    /// Evaluate at a point of the domain. `profiles` supplies the exponent
    /// functions needed by the mfBm-local form.
    pub fn eval(&self, t: &[f64], profiles: &[AlphaProfile]) -> f64 {
        match self {
            VarianceScale::Constant { value } => *value,
            VarianceScale::Separable { coeffs } => coeffs
                .iter()
                .zip(t)
                .map(|(c, &x)| c.iter().rev().fold(0.0, |acc, &a| acc * x + a))
                .product(),
            VarianceScale::Grid { points, values } => multilinear(points, values, t),
            VarianceScale::MfbmLocal { axis, prefactor } => {
                let x = t[*axis];
                prefactor * x.powf(-profiles[*axis].eval(x))
            }
        }
    }
}

/// Multilinear interpolation on a tensor grid, last axis fastest.
fn multilinear(points: &[Vec<f64>], values: &[f64], t: &[f64]) -> f64 {
    let k = points.len();
    let mut cell = vec![0usize; k];
    let mut w = vec![0.0f64; k];
    for i in 0..k {
        let nodes = &points[i];
        let x = t[i].clamp(nodes[0], *nodes.last().unwrap());
        let j = match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(j) => j.min(nodes.len() - 2),
            Err(j) => j.saturating_sub(1).min(nodes.len() - 2),
        };
        cell[i] = j;
        w[i] = if nodes.len() == 1 {
            0.0
        } else {
            (x - nodes[j]) / (nodes[j + 1] - nodes[j])
        };
    }
    let strides: Vec<usize> = {
        let mut s = vec![1usize; k];
        for i in (0..k.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * points[i + 1].len();
        }
        s
    };
    let mut acc = 0.0;
    for corner in 0..(1usize << k) {
        let mut idx = 0usize;
        let mut weight = 1.0;
        for i in 0..k {
            let hi = (corner >> i) & 1 == 1;
            let j = cell[i] + usize::from(hi && points[i].len() > 1);
            idx += j * strides[i];
            weight *= if hi { w[i] } else { 1.0 - w[i] };
        }
        acc += weight * values[idx];
    }
    acc
}

/// Full description of a locally stationary field on `[origin, origin+edge]^k`.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSpec {
    pub k: usize,
    pub k1: usize,
    /// Lower corner of the domain (same in every axis). Zero unless the field
    /// needs strictly positive times (standardized mfBm coordinates do).
    pub origin: f64,
    /// Edge length of the domain hypercube.
    #[serde(rename = "T")]
    pub edge: f64,
    pub profiles: Vec<AlphaProfile>,
    pub variance_scales: Vec<VarianceScale>,
}

impl FieldSpec {
    /// Domain bounds `[lo, hi]`, identical per axis.
    pub fn domain(&self) -> (f64, f64) {
        (self.origin, self.origin + self.edge)
    }

    /// Evaluate the i-th variance scale at a point.
    pub fn variance_scale_at(&self, i: usize, t: &[f64]) -> f64 {
        self.variance_scales[i].eval(t, &self.profiles)
    }

    /// Minimum exponent value per axis.
    pub fn alpha_mins(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.alpha_min()).collect()
    }

    /// Structural validation: counts, profile kinds and ranges, positivity of
    /// the variance scales on a sampled lattice.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain();
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.k1 > self.k {
            return Err(Error::Validation(format!(
                "k1 = {} exceeds k = {}",
                self.k1, self.k
            )));
        }
        if !(self.edge > 0.0) {
            return Err(Error::Validation(format!(
                "edge length T must be positive; got {}",
                self.edge
            )));
        }
        if self.origin < 0.0 {
            return Err(Error::Validation(format!(
                "origin must be nonnegative; got {}",
                self.origin
            )));
        }
        if self.profiles.len() != self.k {
            return Err(Error::Validation(format!(
                "expected {} profiles, got {}",
                self.k,
                self.profiles.len()
            )));
        }
        if self.variance_scales.len() != self.k {
            return Err(Error::Validation(format!(
                "expected {} variance scales, got {}",
                self.k,
                self.variance_scales.len()
            )));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate(lo, hi)
                .map_err(|e| Error::Validation(format!("profile {i}: {e}")))?;
            let is_unique_min = matches!(p, AlphaProfile::UniqueMin { .. });
            if i < self.k1 && !is_unique_min {
                return Err(Error::Validation(format!(
                    "profile {i}: first k1 = {} coordinates must have a unique minimum; \
                     kind `{}` has a non-unique minimum set",
                    self.k1,
                    p.kind_name()
                )));
            }
            if i >= self.k1 && is_unique_min {
                return Err(Error::Validation(format!(
                    "profile {i}: unique-minimum profiles must come first (k1 = {})",
                    self.k1
                )));
            }
        }
        for (i, s) in self.variance_scales.iter().enumerate() {
            self.validate_scale(i, s)?;
        }
        Ok(())
    }

    fn validate_scale(&self, i: usize, s: &VarianceScale) -> Result<()> {
        let (lo, hi) = self.domain();
        match s {
            VarianceScale::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: constant must be positive and finite; got {value}"
                    )));
                }
            }
            VarianceScale::Separable { coeffs } => {
                if coeffs.len() != self.k {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: expected {} coefficient lists, got {}",
                        self.k,
                        coeffs.len()
                    )));
                }
            }
            VarianceScale::Grid { points, values } => {
                if points.len() != self.k {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: expected {} axis node lists, got {}",
                        self.k,
                        points.len()
                    )));
                }
                let total: usize = points.iter().map(Vec::len).product();
                if total != values.len() || total == 0 {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: {} values for a {total}-point grid",
                        values.len()
                    )));
                }
                for (ax, nodes) in points.iter().enumerate() {
                    if nodes.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Validation(format!(
                            "variance scale {i}: axis {ax} nodes must be strictly increasing"
                        )));
                    }
                }
            }
            VarianceScale::MfbmLocal { axis, prefactor } => {
                if *axis >= self.k {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: axis {axis} out of range for k = {}",
                        self.k
                    )));
                }
                if !(*prefactor > 0.0) {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: prefactor must be positive; got {prefactor}"
                    )));
                }
                if lo <= 0.0 {
                    return Err(Error::Validation(format!(
                        "variance scale {i}: mfbm_local requires a strictly positive domain \
                         origin (got {lo}); the scale diverges at t = 0"
                    )));
                }
            }
        }
        // Boundedness: sample the scale on a lattice and require positivity.
        let (min_v, max_v) = self.scale_range_on_lattice(i, 9);
        if !(min_v > 0.0) || !max_v.is_finite() {
            return Err(Error::Validation(format!(
                "variance scale {i}: must satisfy 0 < inf C <= sup C < inf on the domain; \
                 sampled range [{min_v}, {max_v}] on [{lo}, {hi}]^{}",
                self.k
            )));
        }
        Ok(())
    }

    /// Sampled range of the i-th variance scale on an `m`-per-axis lattice.
    pub fn scale_range_on_lattice(&self, i: usize, m: usize) -> (f64, f64) {
        let (lo, hi) = self.domain();
        let nodes: Vec<f64> = (0..m)
            .map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64)
            .collect();
        let mut point = vec![0.0; self.k];
        let mut idx = vec![0usize; self.k];
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        loop {
            for (d, &j) in idx.iter().enumerate() {
                point[d] = nodes[j];
            }
            let v = self.variance_scale_at(i, &point);
            min_v = min_v.min(v);
            max_v = max_v.max(v);
            // odometer increment over the lattice
            let mut d = 0;
            loop {
                if d == self.k {
                    return (min_v, max_v);
                }
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Parse and validate a JSON document.
    pub fn from_json_str(text: &str) -> Result<FieldSpec> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Schema {
            path: "$".into(),
            message: format!("not valid JSON: {e}"),
        })?;
        Self::from_json(&value)
    }

    /// Build from a parsed JSON value, reporting the path of any violation.
    pub fn from_json(v: &Value) -> Result<FieldSpec> {
        let obj = as_object(v, "$")?;
        let k = get_usize(obj, "$", "k")?;
        let k1 = get_usize(obj, "$", "k1")?;
        let edge = get_f64(obj, "$", "T")?;
        let origin = match obj.get("origin") {
            Some(x) => f64_at(x, "$.origin")?,
            None => 0.0,
        };
        let profiles_v = get_array(obj, "$", "profiles")?;
        let scales_v = get_array(obj, "$", "variance_scales")?;
        let mut profiles = Vec::with_capacity(profiles_v.len());
        for (i, pv) in profiles_v.iter().enumerate() {
            profiles.push(parse_profile(pv, &format!("$.profiles[{i}]"))?);
        }
        let mut variance_scales = Vec::with_capacity(scales_v.len());
        for (i, sv) in scales_v.iter().enumerate() {
            variance_scales.push(parse_scale(sv, &format!("$.variance_scales[{i}]"))?);
        }
        let spec = FieldSpec {
            k,
            k1,
            origin,
            edge,
            profiles,
            variance_scales,
        };
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("field spec serializes")
    }
}

fn as_object<'a>(
    v: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "expected a JSON object".into(),
    })
}

fn f64_at(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "expected a number".into(),
    })
}

fn get_f64(obj: &serde_json::Map<String, Value>, base: &str, key: &str) -> Result<f64> {
    let v = obj.get(key).ok_or_else(|| Error::Schema {
        path: format!("{base}.{key}"),
        message: "missing required field".into(),
    })?;
    f64_at(v, &format!("{base}.{key}"))
}

fn get_usize(obj: &serde_json::Map<String, Value>, base: &str, key: &str) -> Result<usize> {
    let v = obj.get(key).ok_or_else(|| Error::Schema {
        path: format!("{base}.{key}"),
        message: "missing required field".into(),
    })?;
    v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Schema {
        path: format!("{base}.{key}"),
        message: "expected a nonnegative integer".into(),
    })
}

fn get_array<'a>(
    obj: &'a serde_json::Map<String, Value>,
    base: &str,
    key: &str,
) -> Result<&'a Vec<Value>> {
    let v = obj.get(key).ok_or_else(|| Error::Schema {
        path: format!("{base}.{key}"),
        message: "missing required field".into(),
    })?;
    v.as_array().ok_or_else(|| Error::Schema {
        path: format!("{base}.{key}"),
        message: "expected an array".into(),
    })
}

fn get_f64_list(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "expected an array of numbers".into(),
    })?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| f64_at(x, &format!("{path}[{i}]")))
        .collect()
}

fn parse_profile(v: &Value, path: &str) -> Result<AlphaProfile> {
    let obj = as_object(v, path)?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema {
            path: format!("{path}.kind"),
            message: "missing or non-string profile kind".into(),
        })?;
    let delta_log = match obj.get("delta_log") {
        Some(x) => f64_at(x, &format!("{path}.delta_log"))?,
        None => 2.0,
    };
    match kind {
        "constant" => Ok(AlphaProfile::Constant {
            alpha0: get_f64(obj, path, "alpha0")?,
        }),
        "unique_min" => Ok(AlphaProfile::UniqueMin {
            alpha0: get_f64(obj, path, "alpha0")?,
            t0: get_f64(obj, path, "t0")?,
            m: get_f64(obj, path, "M")?,
            beta: get_f64(obj, path, "beta")?,
            delta_log,
        }),
        "plateau" => Ok(AlphaProfile::Plateau {
            alpha0: get_f64(obj, path, "alpha0")?,
            a: get_f64(obj, path, "a")?,
            b: get_f64(obj, path, "b")?,
            m: get_f64(obj, path, "M")?,
            beta: get_f64(obj, path, "beta")?,
            m_tilde: get_f64(obj, path, "M_tilde")?,
            beta_tilde: get_f64(obj, path, "beta_tilde")?,
            delta_log,
        }),
        other => Err(Error::Schema {
            path: format!("{path}.kind"),
            message: format!(
                "unknown profile kind `{other}`; expected constant | unique_min | plateau"
            ),
        }),
    }
}

fn parse_scale(v: &Value, path: &str) -> Result<VarianceScale> {
    let obj = as_object(v, path)?;
    let form = obj
        .get("form")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema {
            path: format!("{path}.form"),
            message: "missing or non-string scale form".into(),
        })?;
    match form {
        "constant" => Ok(VarianceScale::Constant {
            value: get_f64(obj, path, "value")?,
        }),
        "separable" => {
            let coeffs_v = get_array(obj, path, "coeffs")?;
            let mut coeffs = Vec::with_capacity(coeffs_v.len());
            for (i, cv) in coeffs_v.iter().enumerate() {
                coeffs.push(get_f64_list(cv, &format!("{path}.coeffs[{i}]"))?);
            }
            Ok(VarianceScale::Separable { coeffs })
        }
        "grid" => {
            let points_v = get_array(obj, path, "points")?;
            let mut points = Vec::with_capacity(points_v.len());
            for (i, pv) in points_v.iter().enumerate() {
                points.push(get_f64_list(pv, &format!("{path}.points[{i}]"))?);
            }
            let values = get_f64_list(
                obj.get("values").ok_or_else(|| Error::Schema {
                    path: format!("{path}.values"),
                    message: "missing required field".into(),
                })?,
                &format!("{path}.values"),
            )?;
            Ok(VarianceScale::Grid { points, values })
        }
        "mfbm_local" => Ok(VarianceScale::MfbmLocal {
            axis: get_usize(obj, path, "axis")?,
            prefactor: get_f64(obj, path, "prefactor")?,
        }),
        other => Err(Error::Schema {
            path: format!("{path}.form"),
            message: format!(
                "unknown scale form `{other}`; expected constant | separable | grid | mfbm_local"
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stationary_json() -> &'static str {
        r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#
    }

    #[test]
    fn parses_and_validates_stationary() {
        let spec = FieldSpec::from_json_str(stationary_json()).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.k, 1);
        assert_eq!(spec.domain(), (0.0, 1.0));
        assert_eq!(spec.variance_scale_at(0, &[0.3]), 1.0);
    }

    #[test]
    fn schema_error_carries_path() {
        let bad = r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"unique_min","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#;
        let err = FieldSpec::from_json_str(bad).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "$.profiles[0].t0"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn rejects_unique_min_declared_constant() {
        // k1 = 1 but the first profile has a non-unique minimum set
        let bad = r#"{"k":1,"k1":1,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#;
        let spec = FieldSpec::from_json_str(bad).unwrap();
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("non-unique minimum"));
    }

    #[test]
    fn rejects_scale_touching_zero() {
        let bad = r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"grid","points":[[0.0,1.0]],"values":[0.0,1.0]}]}"#;
        let spec = FieldSpec::from_json_str(bad).unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn mfbm_local_requires_positive_origin() {
        let bad = r#"{"k":1,"k1":1,"T":1.0,
            "profiles":[{"kind":"unique_min","alpha0":1.0,"t0":0.5,"M":1.0,"beta":2.0}],
            "variance_scales":[{"form":"mfbm_local","axis":0,"prefactor":0.5}]}"#;
        let spec = FieldSpec::from_json_str(bad).unwrap();
        assert!(spec.validate().is_err());
        let good = r#"{"k":1,"k1":1,"T":1.0,"origin":0.5,
            "profiles":[{"kind":"unique_min","alpha0":1.0,"t0":1.0,"M":1.0,"beta":2.0}],
            "variance_scales":[{"form":"mfbm_local","axis":0,"prefactor":0.5}]}"#;
        let spec = FieldSpec::from_json_str(good).unwrap();
        spec.validate().unwrap();
        // C(t) = 0.5 * t^{-alpha(t)}
        let c = spec.variance_scale_at(0, &[1.0]);
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separable_polynomial_scale() {
        let json = r#"{"k":2,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0},{"kind":"constant","alpha0":1.5}],
            "variance_scales":[
              {"form":"separable","coeffs":[[1.0,1.0],[2.0]]},
              {"form":"constant","value":0.25}]}"#;
        let spec = FieldSpec::from_json_str(json).unwrap();
        spec.validate().unwrap();
        // (1 + t0) * 2
        assert!((spec.variance_scale_at(0, &[0.5, 0.9]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_scale_interpolates() {
        let json = r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"grid","points":[[0.0,1.0]],"values":[1.0,3.0]}]}"#;
        let spec = FieldSpec::from_json_str(json).unwrap();
        spec.validate().unwrap();
        assert!((spec.variance_scale_at(0, &[0.25]) - 1.5).abs() < 1e-15);
    }
}
