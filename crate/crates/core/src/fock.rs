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

//! Truncated multimode Fock space.
//!
//! A [`ModeRegistry`] fixes an ordered list of bosonic modes and a truncation
//! `d` (allowed occupations `0..d`). [`PureState`] stores only the nonzero
//! amplitudes keyed by occupation vector; [`MixedState`] is a weighted
//! ensemble of pure states. Every operation returns a new value.
//!
//! Optical elements act through the second-quantised lift of their
//! single-particle matrix `U`: each creation operator transforms as
//! `a_j^† -> Σ_i U[i, j] a_i^†`, so a basis ket is mapped by expanding the
//! product of transformed creation operators.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};

pub type C64 = Complex64;

/// Smallest truncation that keeps the two-excitation source terms.
pub const DEFAULT_TRUNCATION: usize = 3;

/// Tolerance for normalisation and unitarity checks.
pub const NORM_TOL: f64 = 1e-12;

/// Amplitudes below this magnitude are dropped after each unitary.
pub const PRUNE_TOL: f64 = 1e-15;

// Overflow weight below this is rounding residue from cancelling terms.
const OVERFLOW_TOL: f64 = 1e-24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeKind {
    AtomicCollective,
    Photonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    /// Left circular.
    Lcirc,
    /// Right circular.
    Rcirc,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::Lcirc => "L",
            Polarization::Rcirc => "R",
        };
        f.write_str(s)
    }
}

/// Name of one bosonic mode.
///
/// Atomic collective modes are identified by their ensemble only. Photonic
/// modes always carry a polarization and a spatial path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    subsystem: String,
    kind: ModeKind,
    polarization: Option<Polarization>,
    path: Option<String>,
}

impl ModeLabel {
    pub fn atomic(ensemble: impl Into<String>) -> Self {
        ModeLabel {
            subsystem: ensemble.into(),
            kind: ModeKind::AtomicCollective,
            polarization: None,
            path: None,
        }
    }

    pub fn photonic(
        subsystem: impl Into<String>,
        polarization: Polarization,
        path: impl Into<String>,
    ) -> Self {
        ModeLabel {
            subsystem: subsystem.into(),
            kind: ModeKind::Photonic,
            polarization: Some(polarization),
            path: Some(path.into()),
        }
    }

    pub fn subsystem(&self) -> &str {
        &self.subsystem
    }

    pub fn kind(&self) -> ModeKind {
        self.kind
    }

    pub fn polarization(&self) -> Option<Polarization> {
        self.polarization
    }

    pub fn path(&self) -> Option<&str> {
        self.path.as_deref()
    }

    pub fn is_photonic(&self) -> bool {
        self.kind == ModeKind::Photonic
    }

    /// The same spatial mode with a different polarization.
    pub fn with_polarization(&self, polarization: Polarization) -> Result<Self> {
        if !self.is_photonic() {
            return Err(SimError::InvalidLabel {
                label: self.clone(),
                reason: "atomic modes carry no polarization".into(),
            });
        }
        Ok(ModeLabel {
            polarization: Some(polarization),
            ..self.clone()
        })
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.path, &self.polarization) {
            (Some(path), Some(pol)) => write!(f, "{}[{},{}]", self.subsystem, path, pol),
            _ => write!(f, "S_{}", self.subsystem),
        }
    }
}

/// Ordered set of modes with a common truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeRegistry {
    modes: Vec<ModeLabel>,
    truncation: usize,
}

/// Builds a registry; see [`ModeRegistry::new`].
pub fn register_modes(labels: Vec<ModeLabel>, truncation: usize) -> Result<Arc<ModeRegistry>> {
    ModeRegistry::new(labels, truncation)
}

impl ModeRegistry {
    pub fn new(labels: Vec<ModeLabel>, truncation: usize) -> Result<Arc<Self>> {
        if truncation < 2 || truncation > u8::MAX as usize {
            return Err(SimError::InvalidTruncation(truncation));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(SimError::DuplicateMode(label.clone()));
            }
        }
        Ok(Arc::new(ModeRegistry {
            modes: labels,
            truncation,
        }))
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `d`: occupations run over `0..d`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `d^n`, or `None` if it does not fit in a `usize`.
    pub fn dimension(&self) -> Option<usize> {
        u32::try_from(self.modes.len())
            .ok()
            .and_then(|n| self.truncation.checked_pow(n))
    }

    pub fn contains(&self, label: &ModeLabel) -> bool {
        self.modes.contains(label)
    }

    pub fn index_of(&self, label: &ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == label)
            .ok_or_else(|| SimError::UnknownMode(label.clone()))
    }

    /// A new registry with one extra mode appended.
    pub fn with_mode(&self, label: ModeLabel) -> Result<Arc<Self>> {
        let mut modes = self.modes.clone();
        modes.push(label);
        ModeRegistry::new(modes, self.truncation)
    }

    /// Mixed-radix index of an occupation vector, first mode most significant.
    pub fn basis_index(&self, occupation: &[u8]) -> usize {
        occupation
            .iter()
            .fold(0, |acc, &n| acc * self.truncation + n as usize)
    }

    pub fn occupation_at(&self, mut index: usize) -> Vec<u8> {
        let mut occ = vec![0u8; self.modes.len()];
        for slot in occ.iter_mut().rev() {
            *slot = (index % self.truncation) as u8;
            index /= self.truncation;
        }
        occ
    }

    fn check_occupation(&self, occ: &[u8]) -> Result<()> {
        if occ.len() != self.modes.len() || occ.iter().any(|&n| n as usize >= self.truncation) {
            return Err(SimError::BadOccupation(occ.to_vec()));
        }
        Ok(())
    }
}

fn same_registry(a: &Arc<ModeRegistry>, b: &Arc<ModeRegistry>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// Sparse amplitude table over the registry's occupation basis.
#[derive(Clone, Debug)]
pub struct PureState {
    registry: Arc<ModeRegistry>,
    amps: BTreeMap<Vec<u8>, C64>,
}

impl PureState {
    /// All modes empty.
    pub fn vacuum(registry: &Arc<ModeRegistry>) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(vec![0; registry.len()], C64::new(1.0, 0.0));
        PureState {
            registry: registry.clone(),
            amps,
        }
    }

    /// The state with no amplitude at all (the result of a failed projection).
    pub fn zero(registry: &Arc<ModeRegistry>) -> Self {
        PureState {
            registry: registry.clone(),
            amps: BTreeMap::new(),
        }
    }

    /// Builds a state from explicit `(occupation, amplitude)` pairs. Repeated
    /// occupations are summed. No normalisation is applied.
    pub fn from_components<I>(registry: &Arc<ModeRegistry>, components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, C64)>,
    {
        let mut amps: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (occ, amp) in components {
            registry.check_occupation(&occ)?;
            *amps.entry(occ).or_default() += amp;
        }
        amps.retain(|_, a| *a != C64::new(0.0, 0.0));
        Ok(PureState {
            registry: registry.clone(),
            amps,
        })
    }

    /// Basis ket given as `(mode, occupation)` pairs; unlisted modes are empty.
    pub fn basis(registry: &Arc<ModeRegistry>, occupied: &[(&ModeLabel, u8)]) -> Result<Self> {
        let mut occ = vec![0u8; registry.len()];
        for (label, n) in occupied {
            occ[registry.index_of(label)?] = *n;
        }
        PureState::from_components(registry, [(occ, C64::new(1.0, 0.0))])
    }

    /// Reads a dense amplitude vector indexed by [`ModeRegistry::basis_index`].
    pub fn from_dense(registry: &Arc<ModeRegistry>, dense: &[C64]) -> Result<Self> {
        if Some(dense.len()) != registry.dimension() {
            return Err(invalid(
                "dense",
                "length does not match the registry dimension",
            ));
        }
        let amps = dense
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= PRUNE_TOL)
            .map(|(i, a)| (registry.occupation_at(i), *a))
            .collect();
        Ok(PureState {
            registry: registry.clone(),
            amps,
        })
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let dim = self
            .registry
            .dimension()
            .ok_or_else(|| invalid("registry", "dimension does not fit in memory"))?;
        let mut dense = vec![C64::new(0.0, 0.0); dim];
        for (occ, amp) in &self.amps {
            dense[self.registry.basis_index(occ)] = *amp;
        }
        Ok(dense)
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    /// Nonzero components in basis order.
    pub fn components(&self) -> impl Iterator<Item = (&[u8], C64)> + '_ {
        self.amps.iter().map(|(o, a)| (o.as_slice(), *a))
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, occupation: &[u8]) -> C64 {
        self.amps.get(occupation).copied().unwrap_or_default()
    }

    /// Amplitude of the basis ket given as `(mode, occupation)` pairs.
    pub fn amplitude_of(&self, occupied: &[(&ModeLabel, u8)]) -> Result<C64> {
        let mut occ = vec![0u8; self.registry.len()];
        for (label, n) in occupied {
            occ[self.registry.index_of(label)?] = *n;
        }
        Ok(self.amplitude(&occ))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalize(&self) -> Result<PureState> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(SimError::ZeroNorm);
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> PureState {
        let amps = self
            .amps
            .iter()
            .map(|(o, a)| (o.clone(), a * factor))
            .collect();
        PureState {
            registry: self.registry.clone(),
            amps,
        }
    }

    /// Vector sum `self + other`.
    pub fn plus(&self, other: &PureState) -> Result<PureState> {
        self.check_same(other)?;
        let mut amps = self.amps.clone();
        for (o, a) in &other.amps {
            *amps.entry(o.clone()).or_default() += a;
        }
        amps.retain(|_, a| a.norm() >= PRUNE_TOL);
        Ok(PureState {
            registry: self.registry.clone(),
            amps,
        })
    }

    fn check_same(&self, other: &PureState) -> Result<()> {
        if same_registry(&self.registry, &other.registry) {
            Ok(())
        } else {
            Err(SimError::RegistryMismatch)
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.check_same(other)?;
        let (small, large, conj_small) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, true)
        } else {
            (&other.amps, &self.amps, false)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (o, a) in small {
            if let Some(b) = large.get(o) {
                acc += if conj_small {
                    a.conj() * b
                } else {
                    b.conj() * a
                };
            }
        }
        Ok(acc)
    }

    /// Bosonic raising operator on `mode` (`√(n+1)` matrix elements).
    pub fn apply_creation(&self, mode: &ModeLabel) -> Result<PureState> {
        let i = self.registry.index_of(mode)?;
        let d = self.registry.truncation();
        let mut lost = 0.0;
        let mut amps = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let n = occ[i];
            let raised = amp * (n as f64 + 1.0).sqrt();
            if n as usize + 1 >= d {
                lost += raised.norm_sqr();
                continue;
            }
            let mut next = occ.clone();
            next[i] += 1;
            amps.insert(next, raised);
        }
        if lost > 0.0 {
            return Err(SimError::TruncationOverflow { lost_weight: lost });
        }
        Ok(PureState {
            registry: self.registry.clone(),
            amps,
        })
    }

    /// Fock-space lift of `element`.
    pub fn apply_unitary(&self, element: &OpticalElement) -> Result<PureState> {
        let idx = element
            .modes()
            .iter()
            .map(|m| self.registry.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        let d = self.registry.truncation();
        let mut images: BTreeMap<Vec<u8>, Vec<(Vec<u8>, C64)>> = BTreeMap::new();
        let mut out: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        let mut overflow: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let local: Vec<u8> = idx.iter().map(|&i| occ[i]).collect();
            let image = images
                .entry(local)
                .or_insert_with_key(|local| lift_monomial(&element.matrix, local));
            for (img, coeff) in image.iter() {
                let mut next = occ.clone();
                for (k, &i) in idx.iter().enumerate() {
                    next[i] = img[k];
                }
                let bucket = if img.iter().any(|&n| n as usize >= d) {
                    &mut overflow
                } else {
                    &mut out
                };
                *bucket.entry(next).or_default() += amp * coeff;
            }
        }
        let lost: f64 = overflow.values().map(|a| a.norm_sqr()).sum();
        if lost > OVERFLOW_TOL {
            return Err(SimError::TruncationOverflow { lost_weight: lost });
        }
        out.retain(|_, a| a.norm() >= PRUNE_TOL);
        Ok(PureState {
            registry: self.registry.clone(),
            amps: out,
        })
    }

    /// Component with occupation `n` on `mode`, unnormalised, and its weight.
    pub fn project_occupation(&self, mode: &ModeLabel, n: u8) -> Result<(PureState, f64)> {
        let i = self.registry.index_of(mode)?;
        if n as usize >= self.registry.truncation() {
            return Err(invalid(
                "n",
                format!("occupation {n} exceeds the truncation"),
            ));
        }
        let amps: BTreeMap<_, _> = self
            .amps
            .iter()
            .filter(|(o, _)| o[i] == n)
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let state = PureState {
            registry: self.registry.clone(),
            amps,
        };
        let p = state.norm_sqr();
        Ok((state, p))
    }

    /// Component whose occupations on `modes` equal `pattern`, unnormalised.
    pub fn project_pattern(&self, modes: &[ModeLabel], pattern: &[u8]) -> Result<(PureState, f64)> {
        if modes.len() != pattern.len() {
            return Err(invalid("pattern", "length differs from the mode list"));
        }
        let idx = modes
            .iter()
            .map(|m| self.registry.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        let amps: BTreeMap<_, _> = self
            .amps
            .iter()
            .filter(|(o, _)| idx.iter().zip(pattern).all(|(&i, &n)| o[i] == n))
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let state = PureState {
            registry: self.registry.clone(),
            amps,
        };
        let p = state.norm_sqr();
        Ok((state, p))
    }

    /// Marginal weight of each joint occupation pattern on `modes`.
    ///
    /// Weights are squared amplitudes, so they sum to the squared norm.
    pub fn born_probabilities(&self, modes: &[ModeLabel]) -> Result<BTreeMap<Vec<u8>, f64>> {
        let idx = modes
            .iter()
            .map(|m| self.registry.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        let mut table = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let key: Vec<u8> = idx.iter().map(|&i| occ[i]).collect();
            *table.entry(key).or_insert(0.0) += amp.norm_sqr();
        }
        Ok(table)
    }

    /// Splits the state by total occupation of `modes`. Values are unnormalised.
    pub fn split_by_total(&self, modes: &[ModeLabel]) -> Result<BTreeMap<u32, PureState>> {
        let idx = modes
            .iter()
            .map(|m| self.registry.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        let mut parts: BTreeMap<u32, BTreeMap<Vec<u8>, C64>> = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let total = idx.iter().map(|&i| occ[i] as u32).sum();
            parts.entry(total).or_default().insert(occ.clone(), *amp);
        }
        Ok(parts
            .into_iter()
            .map(|(k, amps)| {
                (
                    k,
                    PureState {
                        registry: self.registry.clone(),
                        amps,
                    },
                )
            })
            .collect())
    }

    /// True if `mode` is empty in every component.
    pub fn is_vacuum_on(&self, mode: &ModeLabel) -> Result<bool> {
        let i = self.registry.index_of(mode)?;
        Ok(self.amps.keys().all(|o| o[i] == 0))
    }

    /// Product of two states with disjoint support on the same registry.
    ///
    /// Both states must leave empty every mode the other one occupies; the
    /// result has amplitude `a(x) b(y)` on the ket with occupations `x + y`.
    pub fn disjoint_product(&self, other: &PureState) -> Result<PureState> {
        self.check_same(other)?;
        let used = |s: &PureState| -> Vec<bool> {
            (0..s.registry.len())
                .map(|i| s.amps.keys().any(|o| o[i] != 0))
                .collect()
        };
        let (mine, theirs) = (used(self), used(other));
        if let Some(i) = (0..mine.len()).find(|&i| mine[i] && theirs[i]) {
            return Err(SimError::ModeCollision(self.registry.modes[i].clone()));
        }
        let mut amps = BTreeMap::new();
        for (x, a) in &self.amps {
            for (y, b) in &other.amps {
                let occ: Vec<u8> = x.iter().zip(y).map(|(p, q)| p + q).collect();
                amps.insert(occ, a * b);
            }
        }
        Ok(PureState {
            registry: self.registry.clone(),
            amps,
        })
    }

    /// Re-expresses the state on `target`, matching modes by label.
    pub fn remap(&self, target: &Arc<ModeRegistry>) -> Result<PureState> {
        self.remap_renamed(target, &BTreeMap::new())
    }

    /// Like [`remap`](Self::remap) but renames source modes first.
    ///
    /// Target modes with no source are vacuum. Source modes absent from the
    /// target are dropped, which is only allowed when every component has the
    /// same occupation there (otherwise the reduced state would be mixed).
    pub fn remap_renamed(
        &self,
        target: &Arc<ModeRegistry>,
        rename: &BTreeMap<ModeLabel, ModeLabel>,
    ) -> Result<PureState> {
        let mut placement: Vec<Option<usize>> = Vec::with_capacity(self.registry.len());
        let mut taken = vec![false; target.len()];
        for label in self.registry.modes() {
            let name = rename.get(label).unwrap_or(label);
            match target.index_of(name) {
                Ok(j) => {
                    if taken[j] {
                        return Err(SimError::ModeCollision(name.clone()));
                    }
                    taken[j] = true;
                    placement.push(Some(j));
                }
                Err(_) => placement.push(None),
            }
        }
        for (i, slot) in placement.iter().enumerate() {
            if slot.is_none() {
                let mut values = self.amps.keys().map(|o| o[i]);
                if let Some(first) = values.next() {
                    if values.any(|n| n != first) {
                        return Err(SimError::NotDefinite(self.registry.modes[i].clone()));
                    }
                }
            }
        }
        let mut amps = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let mut next = vec![0u8; target.len()];
            for (i, slot) in placement.iter().enumerate() {
                if let Some(j) = slot {
                    next[*j] = occ[i];
                }
            }
            target.check_occupation(&next)?;
            *amps.entry(next).or_default() += amp;
        }
        Ok(PureState {
            registry: target.clone(),
            amps,
        })
    }

    /// Multiplies each component by `phase(occupation)`.
    pub fn map_phases(&self, phase: impl Fn(&[u8]) -> C64) -> PureState {
        let amps = self
            .amps
            .iter()
            .map(|(o, a)| (o.clone(), a * phase(o)))
            .collect();
        PureState {
            registry: self.registry.clone(),
            amps,
        }
    }
}

/// Image of `Π_j (a_j^†)^{n_j} / √(n_j!) |0⟩` under `a_j^† -> Σ_i U[i,j] a_i^†`.
fn lift_monomial(u: &DMatrix<C64>, input: &[u8]) -> Vec<(Vec<u8>, C64)> {
    let k = input.len();
    let mut poly: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
    poly.insert(vec![0; k], C64::new(1.0, 0.0));
    let mut input_norm = 1.0;
    for (j, &n) in input.iter().enumerate() {
        input_norm *= factorial(n);
        for _ in 0..n {
            let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
            for (mono, c) in &poly {
                for i in 0..k {
                    let uij = u[(i, j)];
                    if uij == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[i] += 1;
                    *next.entry(m).or_default() += c * uij;
                }
            }
            poly = next;
        }
    }
    let scale = 1.0 / input_norm.sqrt();
    poly.into_iter()
        .filter(|(_, c)| *c != C64::new(0.0, 0.0))
        .map(|(m, c)| {
            let out_norm: f64 = m.iter().map(|&n| factorial(n)).product();
            (m, c * (scale * out_norm.sqrt()))
        })
        .collect()
}

/// `|⟨s|t⟩|²`.
pub fn fidelity_pure(s: &PureState, t: &PureState) -> Result<f64> {
    Ok(s.inner(t)?.norm_sqr())
}

/// `⟨t|ρ|t⟩`.
pub fn fidelity_mixed(rho: &MixedState, t: &PureState) -> Result<f64> {
    rho.fidelity(t)
}

/// Weighted ensemble of normalised pure states on one registry.
#[derive(Clone, Debug)]
pub struct MixedState {
    registry: Arc<ModeRegistry>,
    components: Vec<(f64, PureState)>,
}

impl MixedState {
    /// Checks that weights lie in `[0, 1]` and sum to one, and that every
    /// component is normalised.
    pub fn new(components: Vec<(f64, PureState)>) -> Result<Self> {
        let registry = match components.first() {
            Some((_, s)) => s.registry.clone(),
            None => return Err(SimError::WeightSum(0.0)),
        };
        let mut total = 0.0;
        for (w, s) in &components {
            if !same_registry(&registry, &s.registry) {
                return Err(SimError::RegistryMismatch);
            }
            if !(0.0..=1.0 + NORM_TOL).contains(w) {
                return Err(SimError::WeightSum(*w));
            }
            if !s.is_normalized() {
                return Err(SimError::NotNormalized(s.norm_sqr()));
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(SimError::WeightSum(total));
        }
        Ok(MixedState {
            registry,
            components,
        })
    }

    pub fn from_pure(state: &PureState) -> Result<Self> {
        MixedState::new(vec![(1.0, state.normalize()?)])
    }

    /// Builds an ensemble from unnormalised branches `(w_k, |ψ_k⟩)` whose
    /// physical weight is `w_k ‖ψ_k‖²`. Returns the normalised ensemble and the
    /// total weight before normalisation. Branches of zero weight are dropped.
    pub fn from_branches(branches: Vec<(f64, PureState)>) -> Result<(Self, f64)> {
        let mut parts = Vec::with_capacity(branches.len());
        let mut total = 0.0;
        for (w, s) in branches {
            let weight = w * s.norm_sqr();
            if weight > 0.0 {
                total += weight;
                parts.push((weight, s.normalize()?));
            }
        }
        if total == 0.0 {
            return Err(SimError::ZeroNorm);
        }
        for p in parts.iter_mut() {
            p.0 /= total;
        }
        Ok((MixedState::new(parts)?, total))
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn components(&self) -> &[(f64, PureState)] {
        &self.components
    }

    pub fn trace(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }

    pub fn fidelity(&self, target: &PureState) -> Result<f64> {
        self.components
            .iter()
            .map(|(w, s)| Ok(w * s.inner(target)?.norm_sqr()))
            .sum()
    }

    pub fn apply_unitary(&self, element: &OpticalElement) -> Result<MixedState> {
        let components = self
            .components
            .iter()
            .map(|(w, s)| Ok((*w, s.apply_unitary(element)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MixedState {
            registry: self.registry.clone(),
            components,
        })
    }

    pub fn born_probabilities(&self, modes: &[ModeLabel]) -> Result<BTreeMap<Vec<u8>, f64>> {
        let mut table = BTreeMap::new();
        for (w, s) in &self.components {
            for (k, p) in s.born_probabilities(modes)? {
                *table.entry(k).or_insert(0.0) += w * p;
            }
        }
        Ok(table)
    }
}

impl TryFrom<PureState> for MixedState {
    type Error = SimError;

    fn try_from(state: PureState) -> Result<Self> {
        MixedState::from_pure(&state)
    }
}

/// A linear-optical element: a unitary single-particle matrix over a list of
/// modes. Column `j` is the image of the creation operator of `modes[j]`.
#[derive(Clone, Debug)]
pub struct OpticalElement {
    name: String,
    modes: Vec<ModeLabel>,
    matrix: DMatrix<C64>,
}

impl OpticalElement {
    pub fn new(
        name: impl Into<String>,
        modes: Vec<ModeLabel>,
        matrix: DMatrix<C64>,
    ) -> Result<Self> {
        let name = name.into();
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(SimError::ModeCollision(m.clone()));
            }
        }
        if matrix.nrows() != modes.len() || matrix.ncols() != modes.len() {
            return Err(SimError::BadShape {
                name,
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                modes: modes.len(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > NORM_TOL {
            return Err(SimError::NotUnitary { name, deviation });
        }
        Ok(OpticalElement {
            name,
            modes,
            matrix,
        })
    }

    pub fn identity(name: impl Into<String>, modes: Vec<ModeLabel>) -> Result<Self> {
        let n = modes.len();
        OpticalElement::new(name, modes, DMatrix::identity(n, n))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Max-entry distance of `U^† U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    /// The single-particle map on `modes`, extended by the identity where the
    /// element does not act.
    pub fn embedded_matrix(&self, modes: &[ModeLabel]) -> Result<DMatrix<C64>> {
        let pos = self
            .modes
            .iter()
            .map(|m| {
                modes
                    .iter()
                    .position(|x| x == m)
                    .ok_or_else(|| SimError::UnknownMode(m.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut full = DMatrix::identity(modes.len(), modes.len());
        for (a, &i) in pos.iter().enumerate() {
            for (b, &j) in pos.iter().enumerate() {
                full[(i, j)] = self.matrix[(a, b)];
            }
        }
        Ok(full)
    }

    /// `next ∘ self` on the union of both mode lists.
    pub fn then(&self, next: &OpticalElement) -> Result<OpticalElement> {
        let mut modes = self.modes.clone();
        for m in &next.modes {
            if !modes.contains(m) {
                modes.push(m.clone());
            }
        }
        let product = next.embedded_matrix(&modes)? * self.embedded_matrix(&modes)?;
        OpticalElement::new(format!("{}*{}", next.name, self.name), modes, product)
    }
}

fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn two_modes(d: usize) -> (Arc<ModeRegistry>, ModeLabel, ModeLabel) {
        let l = ModeLabel::atomic("L");
        let r = ModeLabel::atomic("R");
        (register_modes(vec![l.clone(), r.clone()], d).unwrap(), l, r)
    }

    #[test]
    fn registry_dimensions() {
        let (reg, _, _) = two_modes(2);
        assert_eq!(reg.dimension(), Some(4));
        let reg = register_modes(
            vec![
                ModeLabel::atomic("L"),
                ModeLabel::atomic("R"),
                ModeLabel::photonic("photon", Polarization::H, "a"),
                ModeLabel::photonic("photon", Polarization::V, "a"),
            ],
            3,
        )
        .unwrap();
        assert_eq!(reg.dimension(), Some(81));
    }

    #[test]
    fn duplicate_label_is_named() {
        let err =
            register_modes(vec![ModeLabel::atomic("L"), ModeLabel::atomic("L")], 2).unwrap_err();
        assert_eq!(err, SimError::DuplicateMode(ModeLabel::atomic("L")));
        assert!(err.to_string().contains("S_L"));
    }

    #[test]
    fn truncation_below_two_rejected() {
        assert_eq!(
            register_modes(vec![ModeLabel::atomic("L")], 1).unwrap_err(),
            SimError::InvalidTruncation(1)
        );
    }

    #[test]
    fn vacuum_basics() {
        let (reg, _, _) = two_modes(3);
        let v = PureState::vacuum(&reg);
        assert_eq!(v.amplitude(&[0, 0]), c(1.0));
        assert_eq!(v.norm_sqr(), 1.0);
        assert_eq!(fidelity_pure(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn creation_operator() {
        let (reg, l, _) = two_modes(3);
        let one = PureState::vacuum(&reg).apply_creation(&l).unwrap();
        assert_eq!(one.amplitude(&[1, 0]), c(1.0));
        let two = one.apply_creation(&l).unwrap();
        assert!((two.amplitude(&[2, 0]) - c(2f64.sqrt())).norm() < 1e-15);
        match two.apply_creation(&l) {
            Err(SimError::TruncationOverflow { lost_weight }) => {
                assert!((lost_weight - 6.0).abs() < 1e-12)
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn identity_element_leaves_state() {
        let (reg, l, r) = two_modes(3);
        let s = PureState::from_components(
            &reg,
            [(vec![1, 0], c(0.6)), (vec![0, 2], C64::new(0.0, 0.8))],
        )
        .unwrap();
        let id = OpticalElement::identity("id", vec![l, r]).unwrap();
        let out = s.apply_unitary(&id).unwrap();
        assert!((fidelity_pure(&s, &out).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_products() {
        let (reg, l, r) = two_modes(2);
        let a = PureState::basis(&reg, &[(&r, 1)]).unwrap();
        let b = PureState::basis(&reg, &[(&l, 1)]).unwrap();
        assert_eq!(a.inner(&a).unwrap(), c(1.0));
        assert_eq!(a.inner(&b).unwrap(), c(0.0));
        let plus = a.plus(&b).unwrap().scaled(c(FRAC_1_SQRT_2));
        assert!((plus.inner(&b).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(fidelity_pure(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn registry_mismatch() {
        let (reg, _, _) = two_modes(2);
        let (other, _, _) = two_modes(3);
        assert_eq!(
            PureState::vacuum(&reg)
                .inner(&PureState::vacuum(&other))
                .unwrap_err(),
            SimError::RegistryMismatch
        );
    }

    #[test]
    fn projection() {
        let (reg, l, r) = two_modes(2);
        let s = PureState::from_components(
            &reg,
            [
                (vec![1, 0], c(FRAC_1_SQRT_2)),
                (vec![0, 1], c(FRAC_1_SQRT_2)),
            ],
        )
        .unwrap();
        let (p, w) = s.project_occupation(&l, 1).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert_eq!(p.len(), 1);
        assert!(p.amplitude(&[1, 0]).norm() > 0.0);
        let v = PureState::vacuum(&reg);
        let (p0, w0) = v.project_occupation(&r, 0).unwrap();
        assert_eq!(w0, 1.0);
        assert_eq!(fidelity_pure(&p0, &v).unwrap(), 1.0);
        let (p1, w1) = v.project_occupation(&r, 1).unwrap();
        assert_eq!(w1, 0.0);
        assert!(p1.is_empty());
    }

    #[test]
    fn mixed_fidelity_with_orthogonal_vacuum() {
        let (reg, l, r) = two_modes(2);
        let psi = PureState::from_components(
            &reg,
            [
                (vec![1, 0], c(FRAC_1_SQRT_2)),
                (vec![0, 1], c(FRAC_1_SQRT_2)),
            ],
        )
        .unwrap();
        let _ = (l, r);
        let rho =
            MixedState::new(vec![(0.1, PureState::vacuum(&reg)), (0.9, psi.clone())]).unwrap();
        assert!((fidelity_mixed(&rho, &psi).unwrap() - 0.9).abs() < 1e-15);
        assert!(MixedState::new(vec![(0.5, psi)]).is_err());
    }

    #[test]
    fn born_vacuum_and_sum() {
        let (reg, l, r) = two_modes(3);
        let v = PureState::vacuum(&reg);
        let table = v.born_probabilities(&[l.clone(), r.clone()]).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[&vec![0, 0]], 1.0);
        let s =
            PureState::from_components(&reg, [(vec![2, 0], c(0.6)), (vec![1, 1], c(0.8))]).unwrap();
        let t = s.born_probabilities(&[l]).unwrap();
        assert!((t.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_rejected() {
        let (_, l, r) = two_modes(2);
        let m = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            OpticalElement::new("bad", vec![l, r], m),
            Err(SimError::NotUnitary { .. })
        ));
    }

    #[test]
    fn remap_drops_definite_modes_only() {
        let (reg, l, r) = two_modes(3);
        let atoms = register_modes(vec![l.clone()], 3).unwrap();
        let s =
            PureState::from_components(&reg, [(vec![1, 1], c(0.6)), (vec![0, 1], c(0.8))]).unwrap();
        let reduced = s.remap(&atoms).unwrap();
        assert_eq!(reduced.amplitude(&[1]), c(0.6));
        let mixed =
            PureState::from_components(&reg, [(vec![1, 0], c(0.6)), (vec![0, 1], c(0.8))]).unwrap();
        assert_eq!(mixed.remap(&atoms).unwrap_err(), SimError::NotDefinite(r));
    }

    #[test]
    fn dense_round_trip() {
        let (reg, _, _) = two_modes(3);
        let s =
            PureState::from_components(&reg, [(vec![2, 1], c(0.6)), (vec![0, 1], c(0.8))]).unwrap();
        let dense = s.to_dense().unwrap();
        assert_eq!(dense[reg.basis_index(&[2, 1])], c(0.6));
        let back = PureState::from_dense(&reg, &dense).unwrap();
        assert!((fidelity_pure(&s, &back).unwrap() - 1.0).abs() < 1e-15);
    }
}
