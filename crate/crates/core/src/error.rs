// Copyright 2026 The dfs-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use thiserror::Error;

use crate::fock::ModeLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("duplicate mode label {0}")]
    DuplicateMode(ModeLabel),

    #[error("mode {0} is not registered")]
    UnknownMode(ModeLabel),

    #[error("mode {0} used more than once in one element")]
    ModeCollision(ModeLabel),

    #[error("invalid mode label {label}: {reason}")]
    InvalidLabel { label: ModeLabel, reason: String },

    #[error("truncation must be at least 2, got {0}")]
    InvalidTruncation(usize),

    /// A raising operation would push some occupation past `d - 1`. Carries
    /// the total squared amplitude that would have been lost.
    #[error("truncation overflow: squared amplitude {lost_weight:e} would exceed the cutoff")]
    TruncationOverflow { lost_weight: f64 },

    #[error("states belong to different mode registries")]
    RegistryMismatch,

    #[error("occupation vector {0:?} does not fit the registry")]
    BadOccupation(Vec<u8>),

    #[error("matrix for element `{name}` is not unitary (max deviation {deviation:e})")]
    NotUnitary { name: String, deviation: f64 },

    #[error("matrix for element `{name}` has shape {rows}x{cols}, expected {modes}x{modes}")]
    BadShape {
        name: String,
        rows: usize,
        cols: usize,
        modes: usize,
    },

    #[error("cannot normalise a state with zero norm")]
    ZeroNorm,

    #[error("amplitudes are not normalised: |alpha|^2 + |beta|^2 = {0}")]
    NotNormalized(f64),

    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode {0} is not in a definite occupation; the reduced state would be mixed")]
    NotDefinite(ModeLabel),

    #[error("mode {0} must start in vacuum")]
    NotVacuum(ModeLabel),

    #[error("Bell-state measurement failed; no Pauli mark available")]
    FailedOutcome,

    #[error("pattern probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
