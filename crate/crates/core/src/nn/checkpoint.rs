//! Versioned JSON parameter checkpoints.
//!
//! ```json
//! {"format":"mlgw-params","version":1,"metadata":{...},
//!  "tensors":[{"name":"...","shape":[rows,cols],"values":[...]}]}
//! ```
//!
//! Values are row-major and written with the shortest decimal form that
//! parses back to the same `f64`, so save/load is exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamTensor};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "mlgw-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_tensors<'a, S: Scalar>(
        tensors: impl IntoIterator<Item = &'a ParamTensor<S>>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            metadata,
            tensors: tensors
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name.clone(),
                    shape: [t.rows, t.cols],
                    values: t.value.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    /// Copies values into `tensors`, matched by name; shapes must agree and
    /// every target tensor must be present.
    pub fn restore_into<S: Scalar>(
        &self,
        tensors: Vec<&mut ParamTensor<S>>,
    ) -> Result<(), NnError> {
        let by_name: BTreeMap<&str, &TensorRecord> =
            self.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        for t in tensors {
            let rec = by_name
                .get(t.name.as_str())
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor `{}`", t.name)))?;
            if rec.shape != [t.rows, t.cols] || rec.values.len() != t.rows * t.cols {
                return Err(NnError::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, expected [{}, {}]",
                    t.name, rec.shape, t.rows, t.cols
                )));
            }
            t.value = rec.values.iter().map(|&v| S::of(v)).collect();
            t.grad = vec![S::zero(); t.value.len()];
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let ck: Self =
            serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!(
                "unknown format `{}`",
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        std::fs::write(path.as_ref(), self.to_json() + "\n")
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}
