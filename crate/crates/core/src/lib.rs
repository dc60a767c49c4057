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

//! Exact and sampled simulation of a decoherence-free quantum memory for
//! photonic qubits stored in pairs of atomic ensembles.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`] is the linear-algebra engine: labelled bosonic modes, truncated
//!   Fock states stored sparsely, the second-quantised lift of single-particle
//!   unitaries, projections and fidelities.
//! * [`optics`] builds the optical elements used by the protocol (wave plates,
//!   polarising beam splitters, Mach-Zehnder encoder, 50/50 splitter).
//! * [`source`] holds the emission primitives: the Raman pair state of an
//!   ensemble, the dual-rail single-ensemble source and atomic read-out.
//! * [`protocol`] composes the four write steps (herald, spatial encoding,
//!   Bell-state measurement, Pauli marking), memory read-out and the remote
//!   state transfer between ensemble pairs.
//! * [`noise`] is the analytic imperfection model together with the exact
//!   density pipeline that checks it.
//! * [`trials`] is the seeded Monte Carlo layer with detector efficiency,
//!   loss thinning and dark counts.
//! * [`cli`] parses configurations and dispatches experiments; the
//!   `dfs-sim` binary is a thin wrapper around it.

pub mod cli;
pub mod error;
pub mod fock;
pub mod noise;
pub mod optics;
pub mod protocol;
pub mod source;
pub mod trials;

pub use error::{Result, SimError};
pub use fock::{
    fidelity_mixed, fidelity_pure, MixedState, ModeKind, ModeLabel, ModeRegistry, OpticalElement,
    Polarization, PureState, C64,
};
