//! Turning user-supplied feature values into model instances.

use std::collections::BTreeSet;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::bundle::ModelBundle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InputError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("missing features: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("unknown features: {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error("feature {name:?} has value {value}, which is not one of the levels {levels:?}")]
    InvalidLevel { name: String, value: f64, levels: Vec<f64> },
}

impl InputError {
    /// True when the request is well formed but names values outside the
    /// model's schema.
    pub fn is_out_of_schema(&self) -> bool {
        matches!(self, Self::Unknown(_) | Self::InvalidLevel { .. })
    }
}

fn check_levels(bundle: &ModelBundle, values: &[f64]) -> Result<(), InputError> {
    for (j, &v) in values.iter().enumerate() {
        if let Some(levels) = &bundle.feature_summary[j].levels {
            if !levels.contains(&v) {
                return Err(InputError::InvalidLevel {
                    name: bundle.feature_names()[j].clone(),
                    value: v,
                    levels: levels.clone(),
                });
            }
        }
    }
    Ok(())
}

fn number(name: &str, v: &Value) -> Result<f64, InputError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(InputError::Malformed(format!("feature {name:?} must be a finite number, got {v}"))),
    }
}

/// Orders a name-keyed object by the model's feature list.
pub fn instance_from_named(bundle: &ModelBundle, features: &Map<String, Value>) -> Result<Vec<f64>, InputError> {
    let names = bundle.feature_names();
    let known: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    let unknown: Vec<String> = features.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        return Err(InputError::Unknown(unknown));
    }
    let missing: Vec<String> = names.iter().filter(|n| !features.contains_key(n.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(InputError::Missing(missing));
    }
    let values = names.iter().map(|n| number(n, &features[n.as_str()])).collect::<Result<Vec<_>, _>>()?;
    check_levels(bundle, &values)?;
    Ok(values)
}

/// Validates a positional vector.
pub fn instance_from_positional(bundle: &ModelBundle, values: &[Value]) -> Result<Vec<f64>, InputError> {
    let n = bundle.feature_names().len();
    if values.len() != n {
        return Err(InputError::Malformed(format!("expected {n} values, got {}", values.len())));
    }
    let values = values
        .iter()
        .enumerate()
        .map(|(j, v)| number(&bundle.feature_names()[j], v))
        .collect::<Result<Vec<_>, _>>()?;
    check_levels(bundle, &values)?;
    Ok(values)
}

/// Accepts a JSON object keyed by feature name, a JSON array, or a comma
/// separated list of numbers.
pub fn parse_instance(bundle: &ModelBundle, text: &str) -> Result<Vec<f64>, InputError> {
    let text = text.trim();
    if text.starts_with('{') || text.starts_with('[') {
        let value: Value = serde_json::from_str(text).map_err(|e| InputError::Malformed(e.to_string()))?;
        return match value {
            Value::Object(map) => match map.get("features") {
                Some(Value::Object(inner)) if !bundle.feature_names().iter().any(|n| n == "features") => {
                    instance_from_named(bundle, inner)
                }
                _ => instance_from_named(bundle, &map),
            },
            Value::Array(items) => instance_from_positional(bundle, &items),
            _ => unreachable!("checked first character"),
        };
    }
    let values = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::from)
                .ok_or_else(|| InputError::Malformed(format!("{s:?} is not a finite number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    instance_from_positional(bundle, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::tests::minimal_bundle;
    use cdss_core::dataset::FeatureKind;

    #[test]
    fn accepts_the_three_textual_forms() {
        let b = minimal_bundle();
        assert_eq!(parse_instance(&b, r#"{"nc":2,"age":86}"#).unwrap(), vec![86.0, 2.0]);
        assert_eq!(parse_instance(&b, r#"{"features":{"nc":2,"age":86}}"#).unwrap(), vec![86.0, 2.0]);
        assert_eq!(parse_instance(&b, "[86, 2]").unwrap(), vec![86.0, 2.0]);
        assert_eq!(parse_instance(&b, " 86 , 2.5 ").unwrap(), vec![86.0, 2.5]);
    }

    #[test]
    fn classifies_errors() {
        let b = minimal_bundle();
        assert_eq!(parse_instance(&b, r#"{"age":86}"#), Err(InputError::Missing(vec!["nc".into()])));
        let e = parse_instance(&b, r#"{"age":86,"nc":1,"bmi":3}"#).unwrap_err();
        assert!(e.is_out_of_schema());
        assert!(matches!(parse_instance(&b, r#"{"age":"x","nc":1}"#), Err(InputError::Malformed(_))));
        assert!(matches!(parse_instance(&b, "1,2,3"), Err(InputError::Malformed(_))));
        assert!(matches!(parse_instance(&b, "1,nan"), Err(InputError::Malformed(_))));
        assert!(matches!(parse_instance(&b, "{"), Err(InputError::Malformed(_))));
    }

    #[test]
    fn categorical_levels_are_enforced() {
        let mut b = minimal_bundle();
        b.feature_summary[1].kind = FeatureKind::Categorical;
        b.feature_summary[1].levels = Some(vec![0.0, 1.0, 2.0, 3.0]);
        assert!(parse_instance(&b, "80,2").is_ok());
        let e = parse_instance(&b, "80,2.5").unwrap_err();
        assert!(matches!(e, InputError::InvalidLevel { .. }));
        assert!(e.is_out_of_schema());
    }
}
