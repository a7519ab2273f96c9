//! Policy files: the solved α-vectors, the solve trace and the model they belong to.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::to_json_string;
use crate::model::PosmdpModel;

use super::{AlphaVector, IterationRecord, SolveOutcome, SolverError, ValueFunction};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("policy was solved for model {found}, not {expected}")]
    ModelMismatch { expected: String, found: String },
    #[error("policy vectors are invalid: {0}")]
    Invalid(#[from] SolverError),
    #[error("α-vector {index} is tagged with action {action}, but the model has {num_actions} actions")]
    UnknownAction { index: usize, action: usize, num_actions: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    /// SHA-256 of the canonical model document.
    pub model_hash: String,
    pub converged: bool,
    pub vectors: Vec<AlphaVector>,
    pub trace: Vec<IterationRecord>,
}

impl Policy {
    pub fn from_outcome(model: &PosmdpModel, outcome: &SolveOutcome) -> Self {
        Self {
            model_hash: model.content_hash(),
            converged: outcome.converged,
            vectors: outcome.value_function.vectors().to_vec(),
            trace: outcome.trace.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        to_json_string(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PolicyError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// The value function, after checking the policy belongs to `model`.
    pub fn value_function_for(&self, model: &PosmdpModel) -> Result<ValueFunction, PolicyError> {
        let expected = model.content_hash();
        if self.model_hash != expected {
            return Err(PolicyError::ModelMismatch {
                expected,
                found: self.model_hash.clone(),
            });
        }
        let v = ValueFunction::new(self.vectors.clone())?;
        if v.num_states() != model.num_states() {
            return Err(SolverError::Dimension {
                index: 0,
                expected: model.num_states(),
                found: v.num_states(),
            }
            .into());
        }
        if let Some((index, alpha)) = v
            .vectors()
            .iter()
            .enumerate()
            .find(|(_, alpha)| alpha.action >= model.num_actions())
        {
            return Err(PolicyError::UnknownAction {
                index,
                action: alpha.action,
                num_actions: model.num_actions(),
            });
        }
        Ok(v)
    }
}
