//! JSON problem definition files.
//!
//! ```json
//! {"dimension": 2,
//!  "objective": [{"type": "poly", "terms": [{"coef": -1, "powers": [1, 0]}]}],
//!  "constraint": [{"type": "custom", "name": "my_oracle"}],
//!  "box": {"lower": [0, 0], "upper": [1, 1]},
//!  "start": [0.5, 0.5],
//!  "known_optimum": null,
//!  "constants": null}
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoxSet, MaxRepresentation, PieceOracle, ProblemConstants, ProblemSpec, SmoothPiece};
use crate::poly::{Monomial, Polynomial};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PieceSpec {
    Poly {
        terms: Vec<Monomial>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hessian_bound: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gradient_bound: Option<f64>,
    },
    Custom {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hessian_bound: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gradient_bound: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub objective: Vec<PieceSpec>,
    pub constraint: Vec<PieceSpec>,
    #[serde(rename = "box")]
    pub bounds: BoxSpec,
    pub start: Vec<f64>,
    #[serde(default)]
    pub known_optimum: Option<f64>,
    #[serde(default)]
    pub constants: Option<ProblemConstants>,
}

/// Named custom oracles that problem files may refer to.
#[derive(Clone, Debug, Default)]
pub struct OracleRegistry {
    oracles: HashMap<String, Arc<dyn PieceOracle>>,
}

impl OracleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, oracle: Arc<dyn PieceOracle>) {
        self.oracles.insert(name.into(), oracle);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn PieceOracle>> {
        self.oracles.get(name)
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    fn piece(&self, spec: &PieceSpec, registry: &OracleRegistry) -> Result<SmoothPiece> {
        let (mut piece, hb, gb) = match spec {
            PieceSpec::Poly {
                terms,
                hessian_bound,
                gradient_bound,
            } => {
                if let Some(t) = terms.iter().find(|t| t.powers.len() != self.dimension) {
                    return Err(Error::DimensionMismatch {
                        expected: self.dimension,
                        got: t.powers.len(),
                    });
                }
                let piece = SmoothPiece::new(Polynomial::new(terms.clone()));
                (piece, *hessian_bound, *gradient_bound)
            }
            PieceSpec::Custom {
                name,
                hessian_bound,
                gradient_bound,
            } => {
                let oracle = registry
                    .get(name)
                    .ok_or_else(|| Error::InvalidProblem(format!("unregistered oracle `{name}`")))?;
                (SmoothPiece::from_arc(oracle.clone()), *hessian_bound, *gradient_bound)
            }
        };
        piece.hessian_bound = hb;
        piece.gradient_bound = gb;
        Ok(piece)
    }

    pub fn to_spec(&self, registry: &OracleRegistry) -> Result<ProblemSpec> {
        let rep = |specs: &[PieceSpec]| -> Result<MaxRepresentation> {
            MaxRepresentation::new(
                specs
                    .iter()
                    .map(|s| self.piece(s, registry))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let bounds = BoxSet::new(self.bounds.lower.clone(), self.bounds.upper.clone())?;
        if bounds.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: bounds.dim(),
            });
        }
        let mut spec = ProblemSpec::new(
            rep(&self.objective)?,
            rep(&self.constraint)?,
            bounds,
            self.start.clone(),
        )?;
        if let Some(f_opt) = self.known_optimum {
            spec = spec.with_known_optimum(f_opt)?;
        }
        if let Some(c) = self.constants {
            spec = spec.with_constants(c)?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TP1: &str = r#"{
        "name": "tp1",
        "dimension": 2,
        "objective": [{"type": "poly", "terms": [{"coef": -1, "powers": [1, 0]}, {"coef": -2, "powers": [0, 1]}]}],
        "constraint": [
            {"type": "poly", "terms": [{"coef": -1, "powers": [1, 0]}]},
            {"type": "custom", "name": "shifted_x1"},
            {"type": "poly", "terms": [{"coef": 1, "powers": [0, 1]}], "hessian_bound": 0}
        ],
        "box": {"lower": [-1, -2], "upper": [2, 1]},
        "start": [0.5, -0.5],
        "known_optimum": -1,
        "constants": {"L_f": 2.23606797749979, "L_g": 1, "K_f": 0, "K_g": 0}
    }"#;

    fn registry() -> OracleRegistry {
        let mut r = OracleRegistry::new();
        r.register("shifted_x1", Arc::new(Polynomial::affine(-1.0, &[1.0, 0.0])));
        r
    }

    #[test]
    fn parses_and_builds() {
        let file = ProblemFile::from_json(TP1).unwrap();
        let spec = file.to_spec(&registry()).unwrap();
        assert_eq!(spec.dimension, 2);
        assert_eq!(spec.objective.value(&[1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(spec.constraint.value(&[0.5, -0.2]).unwrap(), -0.2);
        assert_eq!(spec.constraint.pieces()[2].hessian_bound, Some(0.0));
        assert_eq!(spec.known_optimum, Some(-1.0));
        assert_eq!(spec.constants.unwrap().l_g, 1.0);
    }

    #[test]
    fn unregistered_oracle_is_an_error() {
        let file = ProblemFile::from_json(TP1).unwrap();
        assert!(file.to_spec(&OracleRegistry::new()).is_err());
    }

    #[test]
    fn ragged_powers_are_rejected() {
        let bad = TP1.replace(r#""powers": [0, 1]}], "hessian"#, r#""powers": [1]}], "hessian"#);
        let file = ProblemFile::from_json(&bad).unwrap();
        assert!(matches!(file.to_spec(&registry()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = TP1.replace(r#""dimension": 2"#, r#""dimension": 2, "extra": 1"#);
        assert!(ProblemFile::from_json(&bad).is_err());
    }
}
