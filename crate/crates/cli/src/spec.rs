//! IFS specification files.
//!
//! ```json
//! {
//!   "name": "optional",
//!   "description": "optional",
//!   "epsilon": 0.05,
//!   "maps": ["x/8", "x/8 + x^2/32"],
//!   "weights": [0.5, 0.5]
//! }
//! ```

use std::fmt;
use std::path::Path;

use dualsep_core::dimension::ProbabilityVector;
use dualsep_core::ifs::Ifs;
use dualsep_core::map::{parse_map, AnalyticMap};
use dualsep_core::Error;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IfsSpecFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub epsilon: f64,
    pub maps: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// A schema or content error, located by a field path such as `maps[2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path == "$" {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for SpecError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError {
        path: path.into(),
        message: message.into(),
    }
}

const FIELDS: [&str; 5] = ["name", "description", "epsilon", "maps", "weights"];

fn optional_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, SpecError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(err(key, "expected a string")),
    }
}

impl IfsSpecFile {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            err(
                "$",
                format!(
                    "invalid JSON at line {} column {}: {e}",
                    e.line(),
                    e.column()
                ),
            )
        })?;
        let Value::Object(obj) = value else {
            return Err(err("$", "expected an object"));
        };
        if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(err(k.as_str(), "unknown field"));
        }
        let epsilon = match obj.get("epsilon") {
            None => return Err(err("epsilon", "missing field")),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| err("epsilon", "expected a number"))?,
        };
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(err("epsilon", format!("must be positive, got {epsilon}")));
        }
        let maps = match obj.get("maps") {
            None => return Err(err("maps", "missing field")),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| err(format!("maps[{k}]"), "expected an expression string"))
                })
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(err("maps", "expected an array of strings")),
        };
        if maps.is_empty() {
            return Err(err("maps", "at least one map is required"));
        }
        let weights = match obj.get("weights") {
            None | Some(Value::Null) => None,
            Some(Value::Array(a)) => Some(
                a.iter()
                    .enumerate()
                    .map(|(k, v)| {
                        v.as_f64()
                            .ok_or_else(|| err(format!("weights[{k}]"), "expected a number"))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Some(_) => return Err(err("weights", "expected an array of numbers")),
        };
        if let Some(w) = &weights {
            if w.len() != maps.len() {
                return Err(err(
                    "weights",
                    format!("{} weights for {} maps", w.len(), maps.len()),
                ));
            }
        }
        Ok(IfsSpecFile {
            name: optional_string(&obj, "name")?,
            description: optional_string(&obj, "description")?,
            epsilon,
            maps,
            weights,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    /// Parse every map; parse errors cite `maps[k]` and the byte position.
    pub fn parse_maps(&self) -> Result<Vec<AnalyticMap>, SpecError> {
        self.maps
            .iter()
            .enumerate()
            .map(|(k, src)| {
                parse_map(src, self.epsilon).map_err(|e| err(format!("maps[{k}]"), e.to_string()))
            })
            .collect()
    }

    /// Parsed and validated system.
    pub fn build(&self) -> Result<Ifs, SpecError> {
        Ifs::new(self.parse_maps()?).map_err(|e| match e {
            Error::InvalidMap { index, reason } => err(format!("maps[{}]", index - 1), reason),
            other => err("maps", other.to_string()),
        })
    }

    /// Declared weights, or the uniform vector.
    pub fn weights(&self) -> Result<ProbabilityVector, SpecError> {
        match &self.weights {
            Some(w) => ProbabilityVector::new(w.clone()).map_err(|e| err("weights", e.to_string())),
            None => {
                ProbabilityVector::uniform(self.maps.len()).map_err(|e| err("maps", e.to_string()))
            }
        }
    }
}

/// A spec read from disk with the SHA-256 of its bytes.
#[derive(Clone, Debug)]
pub struct SpecSource {
    pub path: String,
    pub digest: String,
    pub spec: IfsSpecFile,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_spec(path: &Path) -> Result<SpecSource, SpecError> {
    let bytes = std::fs::read(path).map_err(|e| err("$", format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| err("$", format!("not UTF-8: {e}")))?;
    Ok(SpecSource {
        path: path.display().to_string(),
        digest: digest(&bytes),
        spec: IfsSpecFile::from_json(text)?,
    })
}

/// Read, parse and validate.
pub fn load_spec(path: &Path) -> Result<Ifs, SpecError> {
    read_spec(path)?.spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_MAPS: &str =
        r#"{"epsilon": 0.05, "maps": ["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"]}"#;

    #[test]
    fn parses_and_builds() {
        let s = IfsSpecFile::from_json(THREE_MAPS).unwrap();
        assert_eq!(s.maps.len(), 3);
        let ifs = s.build().unwrap();
        assert!(ifs.c_max().contains(3.0 / 16.0));
        assert_eq!(s.weights().unwrap().as_slice(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn field_paths() {
        let e = IfsSpecFile::from_json(r#"{"maps": ["x/2"]}"#).unwrap_err();
        assert_eq!(e.path, "epsilon");
        let e = IfsSpecFile::from_json(r#"{"epsilon": 0.1, "maps": ["x/2", 3]}"#).unwrap_err();
        assert_eq!(e.path, "maps[1]");
        let e = IfsSpecFile::from_json(r#"{"epsilon": 0.1, "maps": ["x/2"], "weigths": [1]}"#)
            .unwrap_err();
        assert_eq!(e.path, "weigths");
        let e =
            IfsSpecFile::from_json(r#"{"epsilon": 0.1, "maps": ["x/2"], "weights": [0.5, 0.5]}"#)
                .unwrap_err();
        assert_eq!(e.path, "weights");
        let e = IfsSpecFile::from_json(r#"{"epsilon": 0.1, "maps": ["x/2", "x/3 +* 1"]}"#)
            .unwrap()
            .build()
            .unwrap_err();
        assert_eq!(e.path, "maps[1]");
        assert!(e.message.contains("position 5"), "{e}");
        let e = IfsSpecFile::from_json(r#"{"epsilon": 0.1, "maps": ["x/2", "2*x"]}"#)
            .unwrap()
            .build()
            .unwrap_err();
        assert_eq!(e.path, "maps[1]");
    }

    #[test]
    fn round_trip_keeps_behaviour() {
        let a = IfsSpecFile::from_json(THREE_MAPS).unwrap();
        let b = IfsSpecFile::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        let (fa, fb) = (a.build().unwrap(), b.build().unwrap());
        for (ma, mb) in fa.maps().iter().zip(fb.maps()) {
            for k in 0..=100 {
                let x = k as f64 / 100.0;
                assert_eq!(ma.eval(x).unwrap().to_bits(), mb.eval(x).unwrap().to_bits());
            }
        }
    }
}
