//! JSON wire formats for densities, instances, divisions and bead necklaces.
//!
//! ```json
//! {"breakpoints": [[0, 0.5, 1]], "values": [2, 0]}
//! {"k": 2, "m": [2], "measures": [ ...densities... ], "mode": "probability"}
//! {"k": 2, "cuts": [[0.25, 0.75]], "labels": [1, 2, 1]}
//! {"beads": "AABB"}   or   {"beads": [1, 1, 2, 2]}
//! ```
//!
//! Cell values and labels are flattened row-major with axis 1 most
//! significant. Colors are 1-based.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divisions::{Division, DivisionError};
use crate::measures::{GridDensity, MeasureError, MeasureMode, MeasureSet};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("measure {index}: {source}")]
    Measure { index: usize, source: MeasureError },
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error("instance: {0}")]
    Instance(String),
    #[error("bead {position}: '{symbol}' is not a color letter A-Z")]
    BadBead { position: usize, symbol: char },
    #[error("empty necklace")]
    EmptyNecklace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub breakpoints: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl DensityJson {
    pub fn to_density(&self) -> Result<GridDensity, MeasureError> {
        GridDensity::new(self.breakpoints.clone(), self.values.clone())
    }
}

impl From<&GridDensity> for DensityJson {
    fn from(g: &GridDensity) -> Self {
        Self { breakpoints: g.breakpoints().to_vec(), values: g.values().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub k: usize,
    pub m: Vec<usize>,
    pub measures: Vec<DensityJson>,
    #[serde(default)]
    pub mode: MeasureMode,
}

/// A validated instance: the measures are normalized to total mass one.
#[derive(Debug, Clone)]
pub struct Instance {
    pub k: usize,
    pub m: Vec<usize>,
    pub measures: MeasureSet,
    pub mode: MeasureMode,
}

impl InstanceJson {
    pub fn into_instance(self) -> Result<Instance, FormatError> {
        if self.k < 2 {
            return Err(FormatError::Instance(format!("k must be at least 2, got {}", self.k)));
        }
        if self.measures.is_empty() {
            return Err(FormatError::Instance("no measures".into()));
        }
        let densities = self
            .measures
            .iter()
            .enumerate()
            .map(|(index, d)| {
                d.to_density()
                    .and_then(|g| g.normalize(self.mode))
                    .map_err(|source| FormatError::Measure { index: index + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let measures = MeasureSet::new(densities).map_err(|e| FormatError::Instance(e.to_string()))?;
        if self.m.len() != measures.dim() {
            return Err(FormatError::Instance(format!(
                "m has {} entries but the measures live in dimension {}",
                self.m.len(),
                measures.dim()
            )));
        }
        let total: usize = self.m.iter().sum();
        let needed = measures.len() * (self.k - 1);
        if total != needed {
            return Err(FormatError::Instance(format!(
                "sum of m is {total}, but n(k-1) = {}·{} = {needed}",
                measures.len(),
                self.k - 1
            )));
        }
        Ok(Instance { k: self.k, m: self.m, measures, mode: self.mode })
    }
}

impl Instance {
    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            k: self.k,
            m: self.m.clone(),
            measures: self.measures.iter().map(DensityJson::from).collect(),
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionJson {
    pub k: usize,
    pub cuts: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl DivisionJson {
    pub fn to_division(&self) -> Result<Division, DivisionError> {
        Division::from_parts(self.k, self.cuts.clone(), self.labels.clone())
    }
}

impl From<&Division> for DivisionJson {
    fn from(d: &Division) -> Self {
        Self { k: d.k(), cuts: d.cuts().cuts().to_vec(), labels: d.labels().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BeadSpec {
    Letters(String),
    Colors(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecklaceJson {
    pub beads: BeadSpec,
}

impl BeadSpec {
    /// Colors as 1-based integers.
    pub fn colors(&self) -> Result<Vec<usize>, FormatError> {
        let beads = match self {
            BeadSpec::Letters(s) => parse_beads(s)?,
            BeadSpec::Colors(c) => c.clone(),
        };
        if beads.is_empty() {
            return Err(FormatError::EmptyNecklace);
        }
        Ok(beads)
    }
}

/// `"AABC"` becomes `[1, 1, 2, 3]`.
pub fn parse_beads(s: &str) -> Result<Vec<usize>, FormatError> {
    s.chars()
        .enumerate()
        .map(|(position, symbol)| {
            if symbol.is_ascii_uppercase() {
                Ok(symbol as usize - 'A' as usize + 1)
            } else {
                Err(FormatError::BadBead { position, symbol })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_round_trip() {
        let text = r#"{"k":2,"m":[2],"measures":[
            {"breakpoints":[[0,0.5,1]],"values":[2,0]},
            {"breakpoints":[[0,0.5,1]],"values":[0,2]}]}"#;
        let inst: InstanceJson = serde_json::from_str(text).unwrap();
        assert_eq!(inst.mode, MeasureMode::Probability);
        let inst = inst.into_instance().unwrap();
        assert_eq!(inst.measures.len(), 2);
        let back = serde_json::to_string(&inst.to_json()).unwrap();
        let again: InstanceJson = serde_json::from_str(&back).unwrap();
        assert_eq!(again, inst.to_json());
    }

    #[test]
    fn instance_budget_is_checked() {
        let text = r#"{"k":2,"m":[3],"measures":[{"breakpoints":[[0,1]],"values":[1]}]}"#;
        let inst: InstanceJson = serde_json::from_str(text).unwrap();
        let err = inst.into_instance().unwrap_err();
        assert!(err.to_string().contains("n(k-1)"), "{err}");
    }

    #[test]
    fn negative_cells_need_signed_mode() {
        let text = r#"{"k":2,"m":[1],"measures":[{"breakpoints":[[0,0.5,1]],"values":[3,-1]}]}"#;
        let inst: InstanceJson = serde_json::from_str(text).unwrap();
        assert!(matches!(inst.into_instance(), Err(FormatError::Measure { index: 1, .. })));
        let text = r#"{"k":2,"m":[1],"mode":"signed","measures":[{"breakpoints":[[0,0.5,1]],"values":[3,-1]}]}"#;
        let inst: InstanceJson = serde_json::from_str(text).unwrap();
        assert!(inst.into_instance().is_ok());
    }

    #[test]
    fn division_json() {
        let d: DivisionJson = serde_json::from_str(r#"{"k":2,"cuts":[[0.25,0.75]],"labels":[1,2,1]}"#).unwrap();
        let div = d.to_division().unwrap();
        assert_eq!(DivisionJson::from(&div), d);
    }

    #[test]
    fn bead_specs() {
        let n: NecklaceJson = serde_json::from_str(r#"{"beads":"AABB"}"#).unwrap();
        assert_eq!(n.beads.colors().unwrap(), vec![1, 1, 2, 2]);
        let n: NecklaceJson = serde_json::from_str(r#"{"beads":[1,2,1,2]}"#).unwrap();
        assert_eq!(n.beads.colors().unwrap(), vec![1, 2, 1, 2]);
        assert!(matches!(parse_beads("Ab"), Err(FormatError::BadBead { position: 1, symbol: 'b' })));
        assert!(matches!(BeadSpec::Letters(String::new()).colors(), Err(FormatError::EmptyNecklace)));
    }
}
