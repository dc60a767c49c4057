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

//! The memory protocol: heralded atom-photon entanglement, spatial encoding
//! of the input qubit, polarisation-spatial Bell-state measurement, Pauli
//! marking, read-out, and remote transfer between ensemble pairs.
//!
//! # Conventions
//!
//! The write setup uses two ensembles `L`, `R` and two spatial paths `a`, `b`,
//! each carrying R, L (circular), H and V modes. The Stokes photon of `L`
//! leaves on path `a`, the one of `R` on path `b`. After the quarter-wave
//! plates, the rotator on `b` and the in-place PBS, the photon sits on path
//! `a` with H paired with an excitation of `L` and V with one of `R`:
//!
//! ```text
//! |Ψ⟩ = (|H⟩|1⟩_a + |V⟩|0⟩_a) / √2,   |1⟩_a = |1_L 0_R⟩,  |0⟩_a = |0_L 1_R⟩
//! ```
//!
//! The Bell analyser recombines `a` and `b` on a second in-place PBS and
//! applies a half-wave plate to each path. Detector modes are
//! `D1 = (b, H)`, `D2 = (b, V)`, `D3 = (a, H)`, `D4 = (a, V)`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::fock::{
    MixedState, ModeLabel, ModeRegistry, OpticalElement, Polarization, PureState, C64,
};
use crate::optics;
use crate::source::{raman_pair_state, retrieve, SourceParams};

/// Which detectors fired.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickPattern(pub Vec<bool>);

impl ClickPattern {
    pub fn from_counts(counts: &[u8]) -> Self {
        ClickPattern(counts.iter().map(|&n| n > 0).collect())
    }

    pub fn clicks(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }

    /// Index of the only detector that fired, if exactly one did.
    pub fn single(&self) -> Option<usize> {
        if self.clicks() == 1 {
            self.0.iter().position(|&c| c)
        } else {
            None
        }
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fired: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| format!("D{}", i + 1))
            .collect();
        if fired.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&fired.join(""))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
    Failure(ClickPattern),
}

impl BellOutcome {
    pub const SUCCESSES: [BellOutcome; 4] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "PsiPlus",
            BellOutcome::PsiMinus => "PsiMinus",
            BellOutcome::PhiPlus => "PhiPlus",
            BellOutcome::PhiMinus => "PhiMinus",
            BellOutcome::Failure(_) => "Failure",
        }
    }

    pub fn is_success(&self) -> bool {
        !matches!(self, BellOutcome::Failure(_))
    }

    /// Outcome heralded by a lone click on detector `index` (0-based).
    pub fn from_detector(index: usize) -> Option<BellOutcome> {
        BellOutcome::SUCCESSES.get(index).cloned()
    }
}

/// Maps a click pattern of the four analyser detectors to a Bell outcome.
/// Anything but a single click is a failure.
pub fn classify(clicks: &ClickPattern) -> BellOutcome {
    match (clicks.0.len(), clicks.single()) {
        (4, Some(i)) => BellOutcome::SUCCESSES[i].clone(),
        _ => BellOutcome::Failure(clicks.clone()),
    }
}

/// Classical correction record kept with the memory. `ZX` stands for `iY`
/// up to a global phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliMark {
    I,
    Z,
    X,
    ZX,
}

pub fn pauli_mark(outcome: &BellOutcome) -> Result<PauliMark> {
    match outcome {
        BellOutcome::PsiPlus => Ok(PauliMark::I),
        BellOutcome::PsiMinus => Ok(PauliMark::Z),
        BellOutcome::PhiPlus => Ok(PauliMark::X),
        BellOutcome::PhiMinus => Ok(PauliMark::ZX),
        BellOutcome::Failure(_) => Err(SimError::FailedOutcome),
    }
}

/// Dual-rail encoding on a pair of modes:
/// `|0⟩ = |0⟩_left |1⟩_right`, `|1⟩ = |1⟩_left |0⟩_right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalQubitMap {
    pub left: ModeLabel,
    pub right: ModeLabel,
}

impl LogicalQubitMap {
    pub fn new(left: ModeLabel, right: ModeLabel) -> Result<Self> {
        if left == right {
            return Err(SimError::ModeCollision(left));
        }
        Ok(LogicalQubitMap { left, right })
    }

    /// `alpha|0⟩ + beta|1⟩` with every other mode empty.
    pub fn state(&self, registry: &Arc<ModeRegistry>, alpha: C64, beta: C64) -> Result<PureState> {
        let zero = PureState::basis(registry, &[(&self.right, 1)])?;
        let one = PureState::basis(registry, &[(&self.left, 1)])?;
        zero.scaled(alpha).plus(&one.scaled(beta))
    }
}

/// Applies the Pauli correction named by `mark` on the logical qubit.
///
/// X exchanges the two logical occupation patterns and Z negates `|1⟩`;
/// components outside the logical subspace are left untouched.
pub fn apply_logical_pauli(
    state: &PureState,
    mark: PauliMark,
    map: &LogicalQubitMap,
) -> Result<PureState> {
    let reg = state.registry();
    let (il, ir) = (reg.index_of(&map.left)?, reg.index_of(&map.right)?);
    let flip = matches!(mark, PauliMark::X | PauliMark::ZX);
    let sign = matches!(mark, PauliMark::Z | PauliMark::ZX);
    let comps = state.components().map(|(occ, amp)| {
        let mut occ = occ.to_vec();
        if flip && occ[il] + occ[ir] == 1 {
            occ.swap(il, ir);
        }
        // Z acts after X, on the relabelled component.
        let amp = if sign && occ[il] == 1 && occ[ir] == 0 {
            -amp
        } else {
            amp
        };
        (occ, amp)
    });
    PureState::from_components(reg, comps.collect::<Vec<_>>())
}

/// Equal phase `e^{iθ}` on both rails (collective dephasing).
pub fn collective_dephasing(
    state: &PureState,
    theta: f64,
    map: &LogicalQubitMap,
) -> Result<PureState> {
    state.apply_unitary(&optics::phase_shift(
        &[map.left.clone(), map.right.clone()],
        theta,
    )?)
}

fn check_qubit(alpha: C64, beta: C64) -> Result<()> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(SimError::NotNormalized(n));
    }
    Ok(())
}

/// R, L, H and V modes of one spatial path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathModes {
    pub rcirc: ModeLabel,
    pub lcirc: ModeLabel,
    pub h: ModeLabel,
    pub v: ModeLabel,
}

impl PathModes {
    fn new(path: &str) -> Self {
        let m = |p| ModeLabel::photonic("stokes", p, path);
        PathModes {
            rcirc: m(Polarization::Rcirc),
            lcirc: m(Polarization::Lcirc),
            h: m(Polarization::H),
            v: m(Polarization::V),
        }
    }

    fn all(&self) -> [ModeLabel; 4] {
        [
            self.rcirc.clone(),
            self.lcirc.clone(),
            self.h.clone(),
            self.v.clone(),
        ]
    }
}

/// Modes of the write setup (two ensembles, two spatial paths).
#[derive(Clone, Debug)]
pub struct WriteLayout {
    registry: Arc<ModeRegistry>,
    atomic_registry: Arc<ModeRegistry>,
    pub s_l: ModeLabel,
    pub s_r: ModeLabel,
    pub a: PathModes,
    pub b: PathModes,
}

impl WriteLayout {
    pub fn new(truncation: usize) -> Result<Self> {
        let s_l = ModeLabel::atomic("L");
        let s_r = ModeLabel::atomic("R");
        let (a, b) = (PathModes::new("a"), PathModes::new("b"));
        let mut modes = vec![s_l.clone(), s_r.clone()];
        modes.extend(a.all());
        modes.extend(b.all());
        let registry = ModeRegistry::new(modes, truncation)?;
        let atomic_registry = ModeRegistry::new(vec![s_l.clone(), s_r.clone()], truncation)?;
        Ok(WriteLayout {
            registry,
            atomic_registry,
            s_l,
            s_r,
            a,
            b,
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    /// Registry holding only the two collective modes.
    pub fn atomic_registry(&self) -> &Arc<ModeRegistry> {
        &self.atomic_registry
    }

    pub fn logical_map(&self) -> LogicalQubitMap {
        LogicalQubitMap {
            left: self.s_l.clone(),
            right: self.s_r.clone(),
        }
    }

    /// Analyser detector modes `D1..D4`.
    pub fn detectors(&self) -> Vec<ModeLabel> {
        vec![
            self.b.h.clone(),
            self.b.v.clone(),
            self.a.h.clone(),
            self.a.v.clone(),
        ]
    }

    /// The fibre modes that carry the heralded photon.
    pub fn fiber_modes(&self) -> Vec<ModeLabel> {
        vec![self.a.h.clone(), self.a.v.clone()]
    }

    pub fn photonic_modes(&self) -> Vec<ModeLabel> {
        let mut m = self.a.all().to_vec();
        m.extend(self.b.all());
        m
    }

    /// Wave plates, rotator and PBS that merge both Stokes photons into path `a`.
    pub fn entangling_optics(&self) -> Result<Vec<OpticalElement>> {
        let (a, b) = (&self.a, &self.b);
        Ok(vec![
            optics::qwp(&a.rcirc, &a.lcirc, &a.h, &a.v)?,
            optics::qwp(&b.rcirc, &b.lcirc, &b.h, &b.v)?,
            optics::pol_rotator(&b.h, &b.v)?,
            optics::pbs(&a.h, &a.v, &b.h, &b.v, &a.h, &a.v, &b.h, &b.v)?,
        ])
    }

    pub fn encoder(&self, alpha: C64, beta: C64) -> Result<OpticalElement> {
        optics::mz_split(&self.a.h, &self.a.h, &self.b.h, alpha, beta)
    }

    /// PBS1 and the two half-wave plates of the Bell analyser.
    pub fn analyser_optics(&self) -> Result<Vec<OpticalElement>> {
        let (a, b) = (&self.a, &self.b);
        Ok(vec![
            optics::pbs(&a.h, &a.v, &b.h, &b.v, &a.h, &a.v, &b.h, &b.v)?,
            optics::hwp(&a.h, &a.v)?,
            optics::hwp(&b.h, &b.v)?,
        ])
    }

    /// Product of one Raman pair state per ensemble, before any optics.
    pub fn source_state(&self, pc: f64, n_max: u8) -> Result<PureState> {
        let params = SourceParams::new(pc, n_max)?;
        let left = raman_pair_state(params, &self.s_l, &self.a.rcirc, &self.registry)?;
        let right = raman_pair_state(params, &self.s_r, &self.b.rcirc, &self.registry)?;
        left.disjoint_product(&right)
    }

    /// The ideal heralded state `(|H⟩|1⟩_a + |V⟩|0⟩_a)/√2`.
    pub fn ideal_entangled_state(&self) -> Result<PureState> {
        let h = PureState::basis(&self.registry, &[(&self.s_l, 1), (&self.a.h, 1)])?;
        let v = PureState::basis(&self.registry, &[(&self.s_r, 1), (&self.a.v, 1)])?;
        Ok(h.plus(&v)?.scaled(C64::new(FRAC_1_SQRT_2, 0.0)))
    }

    /// Source, entangling optics, encoder and analyser optics applied in
    /// order, with no conditioning.
    pub fn unheralded_state(&self, pc: f64, n_max: u8, alpha: C64, beta: C64) -> Result<PureState> {
        let mut state = apply_all(&self.source_state(pc, n_max)?, &self.entangling_optics()?)?;
        state = encode_spatial(&state, alpha, beta, self)?;
        apply_all(&state, &self.analyser_optics()?)
    }
}

pub(crate) fn apply_all(state: &PureState, elements: &[OpticalElement]) -> Result<PureState> {
    elements
        .iter()
        .try_fold(state.clone(), |s, e| s.apply_unitary(e))
}

/// Highest pair order used for the Raman sources at a given truncation.
pub fn source_order(truncation: usize) -> u8 {
    (truncation - 1).min(2) as u8
}

/// Heralded atom-photon state and the probability of the herald.
#[derive(Clone, Debug)]
pub struct Entanglement {
    /// `None` when the herald probability is zero.
    pub state: Option<PureState>,
    pub herald_probability: f64,
}

/// Both ensembles emit Raman pairs with the same `pc`; the Stokes photons are
/// merged on the PBS and the state is projected onto exactly one photon in
/// the output.
pub fn generate_entanglement(pc: f64, layout: &WriteLayout) -> Result<Entanglement> {
    let n_max = source_order(layout.registry.truncation());
    let merged = apply_all(
        &layout.source_state(pc, n_max)?,
        &layout.entangling_optics()?,
    )?;
    let mut parts = merged.split_by_total(&layout.photonic_modes())?;
    let one = parts
        .remove(&1)
        .unwrap_or_else(|| PureState::zero(layout.registry()));
    let herald_probability = one.norm_sqr();
    let state = if herald_probability > 0.0 {
        Some(one.normalize()?)
    } else {
        None
    };
    Ok(Entanglement {
        state,
        herald_probability,
    })
}

/// Splits the photon on path `a` into `alpha|a⟩ + beta|b⟩` for both
/// polarisations.
pub fn encode_spatial(
    state: &PureState,
    alpha: C64,
    beta: C64,
    layout: &WriteLayout,
) -> Result<PureState> {
    check_qubit(alpha, beta)?;
    for m in [&layout.b.h, &layout.b.v] {
        if !state.is_vacuum_on(m)? {
            return Err(SimError::NotVacuum(m.clone()));
        }
    }
    state.apply_unitary(&layout.encoder(alpha, beta)?)
}

/// State after the analyser optics and its photon-count distribution on
/// `D1..D4`.
#[derive(Clone, Debug)]
pub struct BsmReadout {
    pub state: PureState,
    pub detector_probabilities: BTreeMap<Vec<u8>, f64>,
}

pub fn bsm(state: &PureState, layout: &WriteLayout) -> Result<BsmReadout> {
    let state = apply_all(state, &layout.analyser_optics()?)?;
    let detector_probabilities = state.born_probabilities(&layout.detectors())?;
    Ok(BsmReadout {
        state,
        detector_probabilities,
    })
}

/// Atomic state left behind when the detector modes hold `pattern`.
/// Returns the normalised state on the atomic registry and the pattern's
/// probability, or `None` if the pattern cannot occur.
pub fn conditional_atomic_state(
    post_bsm: &PureState,
    pattern: &[u8],
    layout: &WriteLayout,
) -> Result<Option<(PureState, f64)>> {
    let (proj, p) = post_bsm.project_pattern(&layout.detectors(), pattern)?;
    if p == 0.0 {
        return Ok(None);
    }
    Ok(Some((
        proj.remap(layout.atomic_registry())?.normalize()?,
        p,
    )))
}

/// Outcome of one memory write.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub rounds_until_herald: u64,
    pub click_pattern: ClickPattern,
    pub outcome: BellOutcome,
    /// `None` for failed writes.
    pub mark: Option<PauliMark>,
    /// Atomic state on the two-mode atomic registry, uncorrected.
    pub atomic_state: MixedState,
    pub success: bool,
}

/// Every single-click branch of a write with its probability given the
/// herald. The stored atomic state is `σ|φ̃⟩` for the branch's Pauli `σ`.
pub fn write_memory_branches(
    alpha: C64,
    beta: C64,
    pc: f64,
    layout: &WriteLayout,
) -> Result<Vec<(f64, TrialRecord)>> {
    check_qubit(alpha, beta)?;
    let heralded = generate_entanglement(pc, layout)?
        .state
        .ok_or_else(|| invalid("pc", "the herald never fires at pc = 0"))?;
    let encoded = encode_spatial(&heralded, alpha, beta, layout)?;
    let readout = bsm(&encoded, layout)?;
    let mut branches = Vec::new();
    for detector in 0..4 {
        let mut pattern = vec![0u8; 4];
        pattern[detector] = 1;
        if let Some((atomic, p)) = conditional_atomic_state(&readout.state, &pattern, layout)? {
            let click_pattern = ClickPattern::from_counts(&pattern);
            let outcome = classify(&click_pattern);
            branches.push((
                p,
                TrialRecord {
                    rounds_until_herald: 1,
                    mark: Some(pauli_mark(&outcome)?),
                    click_pattern,
                    outcome,
                    atomic_state: MixedState::from_pure(&atomic)?,
                    success: true,
                },
            ));
        }
    }
    Ok(branches)
}

/// One sampled write: rounds until the herald are geometric in the herald
/// probability, the outcome follows the exact branch weights.
pub fn write_memory<R: Rng + ?Sized>(
    alpha: C64,
    beta: C64,
    pc: f64,
    layout: &WriteLayout,
    rng: &mut R,
) -> Result<TrialRecord> {
    let herald = generate_entanglement(pc, layout)?.herald_probability;
    let branches = write_memory_branches(alpha, beta, pc, layout)?;
    let u: f64 = rng.random();
    let rounds = if herald >= 1.0 {
        1
    } else {
        ((1.0 - u).ln() / (1.0 - herald).ln()).ceil().max(1.0) as u64
    };
    let mut x: f64 = rng.random::<f64>() * branches.iter().map(|b| b.0).sum::<f64>();
    let last = branches.len() - 1;
    for (i, (p, mut record)) in branches.into_iter().enumerate() {
        if x < p || i == last {
            record.rounds_until_herald = rounds;
            return Ok(record);
        }
        x -= p;
    }
    unreachable!("branch list is never empty")
}

/// Modes of the read-out setup: both ensembles and one anti-Stokes path per
/// ensemble. The ensemble `L` emits H on path `x`, `R` emits V on path `y`,
/// and a PBS merges both onto path `x`.
#[derive(Clone, Debug)]
pub struct ReadLayout {
    registry: Arc<ModeRegistry>,
    pub s_l: ModeLabel,
    pub s_r: ModeLabel,
    pub x_h: ModeLabel,
    pub x_v: ModeLabel,
    pub y_h: ModeLabel,
    pub y_v: ModeLabel,
}

impl ReadLayout {
    pub fn new(truncation: usize) -> Result<Self> {
        let m = |p, path| ModeLabel::photonic("anti-stokes", p, path);
        let layout = ReadLayout {
            registry: ModeRegistry::new(
                vec![
                    ModeLabel::atomic("L"),
                    ModeLabel::atomic("R"),
                    m(Polarization::H, "x"),
                    m(Polarization::V, "x"),
                    m(Polarization::H, "y"),
                    m(Polarization::V, "y"),
                ],
                truncation,
            )?,
            s_l: ModeLabel::atomic("L"),
            s_r: ModeLabel::atomic("R"),
            x_h: m(Polarization::H, "x"),
            x_v: m(Polarization::V, "x"),
            y_h: m(Polarization::H, "y"),
            y_v: m(Polarization::V, "y"),
        };
        Ok(layout)
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    /// The recovered photonic qubit `alpha|V⟩ + beta|H⟩` on path `x`.
    pub fn target(&self, alpha: C64, beta: C64) -> Result<PureState> {
        self.photonic_map().state(&self.registry, alpha, beta)
    }

    /// Polarisation qubit with `|1⟩ = H`, `|0⟩ = V`.
    pub fn photonic_map(&self) -> LogicalQubitMap {
        LogicalQubitMap {
            left: self.x_h.clone(),
            right: self.x_v.clone(),
        }
    }

    pub fn correction(&self, mark: PauliMark) -> Result<Vec<OpticalElement>> {
        let x = optics::pol_rotator(&self.x_h, &self.x_v)?;
        let z = optics::sign_flip(&self.x_h)?;
        Ok(match mark {
            PauliMark::I => vec![],
            PauliMark::Z => vec![z],
            PauliMark::X => vec![x],
            PauliMark::ZX => vec![x, z],
        })
    }
}

/// Retrieves both ensembles, merges the anti-Stokes photons on a PBS and
/// applies the stored Pauli mark to the photonic qubit.
pub fn read_memory(
    record: &TrialRecord,
    retrieval_efficiency: f64,
    layout: &ReadLayout,
) -> Result<MixedState> {
    let mark = match (record.success, record.mark) {
        (true, Some(mark)) => mark,
        _ => return Err(SimError::FailedOutcome),
    };
    let comps = record
        .atomic_state
        .components()
        .iter()
        .map(|(w, s)| Ok((*w, s.remap(layout.registry())?)))
        .collect::<Result<Vec<_>>>()?;
    let mut state = MixedState::new(comps)?;
    state = retrieve(&state, &layout.s_l, &layout.x_h, retrieval_efficiency)?;
    state = retrieve(&state, &layout.s_r, &layout.y_v, retrieval_efficiency)?;
    state = state.apply_unitary(&optics::pbs(
        &layout.x_h,
        &layout.x_v,
        &layout.y_h,
        &layout.y_v,
        &layout.x_h,
        &layout.x_v,
        &layout.y_h,
        &layout.y_v,
    )?)?;
    for element in layout.correction(mark)? {
        state = state.apply_unitary(&element)?;
    }
    Ok(state)
}

/// Local phase correction after remote transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseMark {
    None,
    Pi,
}

/// Modes of the remote-transfer setup: input pair `I`, entangled pairs `L`
/// and `R`, and one read-out photon each for `I1`, `I2`, `L1`, `L2`.
#[derive(Clone, Debug)]
pub struct RemoteLayout {
    registry: Arc<ModeRegistry>,
    r_registry: Arc<ModeRegistry>,
    pub i1: ModeLabel,
    pub i2: ModeLabel,
    pub l1: ModeLabel,
    pub l2: ModeLabel,
    pub r1: ModeLabel,
    pub r2: ModeLabel,
    pub ph_i1: ModeLabel,
    pub ph_i2: ModeLabel,
    pub ph_l1: ModeLabel,
    pub ph_l2: ModeLabel,
}

impl RemoteLayout {
    pub fn new(truncation: usize) -> Result<Self> {
        let at = ModeLabel::atomic;
        let ph = |p: &str| ModeLabel::photonic("anti-stokes", Polarization::H, p);
        let (i1, i2, l1, l2, r1, r2) = (at("I1"), at("I2"), at("L1"), at("L2"), at("R1"), at("R2"));
        let (ph_i1, ph_i2, ph_l1, ph_l2) = (ph("i1"), ph("i2"), ph("l1"), ph("l2"));
        let registry = ModeRegistry::new(
            vec![
                i1.clone(),
                i2.clone(),
                l1.clone(),
                l2.clone(),
                r1.clone(),
                r2.clone(),
                ph_i1.clone(),
                ph_i2.clone(),
                ph_l1.clone(),
                ph_l2.clone(),
            ],
            truncation,
        )?;
        let r_registry = ModeRegistry::new(vec![r1.clone(), r2.clone()], truncation)?;
        Ok(RemoteLayout {
            registry,
            r_registry,
            i1,
            i2,
            l1,
            l2,
            r1,
            r2,
            ph_i1,
            ph_i2,
            ph_l1,
            ph_l2,
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn r_registry(&self) -> &Arc<ModeRegistry> {
        &self.r_registry
    }

    pub fn r_map(&self) -> LogicalQubitMap {
        LogicalQubitMap {
            left: self.r1.clone(),
            right: self.r2.clone(),
        }
    }

    /// `D1, D2` behind the `(I1, L1)` splitter, `D3, D4` behind `(I2, L2)`.
    pub fn detectors(&self) -> Vec<ModeLabel> {
        vec![
            self.ph_i1.clone(),
            self.ph_l1.clone(),
            self.ph_i2.clone(),
            self.ph_l2.clone(),
        ]
    }

    /// `(alpha S_I2^† + beta S_I1^†)` on pair `I` times
    /// `(S_L1^† S_R2^† + S_L2^† S_R1^†)/√2` on the long-distance pairs.
    pub fn input_state(&self, alpha: C64, beta: C64) -> Result<PureState> {
        check_qubit(alpha, beta)?;
        let vac = PureState::vacuum(&self.registry);
        let input = vac
            .apply_creation(&self.i2)?
            .scaled(alpha)
            .plus(&vac.apply_creation(&self.i1)?.scaled(beta))?;
        let resource = vac
            .apply_creation(&self.l1)?
            .apply_creation(&self.r2)?
            .plus(&vac.apply_creation(&self.l2)?.apply_creation(&self.r1)?)?
            .scaled(C64::new(FRAC_1_SQRT_2, 0.0));
        input.disjoint_product(&resource)
    }

    /// Read-out of `I1, L1, I2, L2` followed by the two balanced splitters.
    pub fn circuit(&self) -> Result<Vec<OpticalElement>> {
        Ok(vec![
            optics::transfer(&self.i1, &self.ph_i1)?,
            optics::transfer(&self.l1, &self.ph_l1)?,
            optics::transfer(&self.i2, &self.ph_i2)?,
            optics::transfer(&self.l2, &self.ph_l2)?,
            optics::bs50(&self.ph_i1, &self.ph_l1)?,
            optics::bs50(&self.ph_i2, &self.ph_l2)?,
        ])
    }

    pub fn post_circuit_state(&self, alpha: C64, beta: C64) -> Result<PureState> {
        apply_all(&self.input_state(alpha, beta)?, &self.circuit()?)
    }

    /// State of pair `R` given the photon counts on `D1..D4`.
    pub fn conditional_r_state(
        &self,
        post: &PureState,
        pattern: &[u8],
    ) -> Result<Option<(PureState, f64)>> {
        let (proj, p) = post.project_pattern(&self.detectors(), pattern)?;
        if p == 0.0 {
            return Ok(None);
        }
        Ok(Some((proj.remap(&self.r_registry)?.normalize()?, p)))
    }
}

/// One click in `{D1, D2}` and one in `{D3, D4}`.
pub fn is_remote_success(clicks: &ClickPattern) -> bool {
    let c = &clicks.0;
    c.len() == 4 && (c[0] as u8 + c[1] as u8) == 1 && (c[2] as u8 + c[3] as u8) == 1
}

/// Phase correction for a successful coincidence: a π phase is needed when
/// exactly one of `D2`, `D4` fired, i.e. for `D1D4` and `D2D3`.
pub fn remote_phase_mark(clicks: &ClickPattern) -> Option<PhaseMark> {
    if !is_remote_success(clicks) {
        return None;
    }
    Some(if clicks.0[1] ^ clicks.0[3] {
        PhaseMark::Pi
    } else {
        PhaseMark::None
    })
}

pub fn apply_phase_mark(
    state: &PureState,
    mark: PhaseMark,
    map: &LogicalQubitMap,
) -> Result<PureState> {
    match mark {
        PhaseMark::None => Ok(state.clone()),
        PhaseMark::Pi => apply_logical_pauli(state, PauliMark::Z, map),
    }
}

/// Detector click class of the remote-transfer experiment.
#[derive(Clone, Debug)]
pub struct RemoteClass {
    pub clicks: ClickPattern,
    pub probability: f64,
    pub success: bool,
    /// Conditional state of pair `R` (success classes only).
    pub r_state: Option<PureState>,
    pub phase_mark: Option<PhaseMark>,
}

#[derive(Clone, Debug)]
pub struct RemoteTransfer {
    pub success_probability: f64,
    pub classes: Vec<RemoteClass>,
}

/// Exact enumeration of all detector outcomes of the remote transfer with
/// non-number-resolving detectors.
pub fn remote_transfer(alpha: C64, beta: C64, layout: &RemoteLayout) -> Result<RemoteTransfer> {
    let post = layout.post_circuit_state(alpha, beta)?;
    let mut grouped: BTreeMap<ClickPattern, Vec<(Vec<u8>, f64)>> = BTreeMap::new();
    for (pattern, p) in post.born_probabilities(&layout.detectors())? {
        grouped
            .entry(ClickPattern::from_counts(&pattern))
            .or_default()
            .push((pattern, p));
    }
    let mut classes = Vec::new();
    let mut success_probability = 0.0;
    for (clicks, patterns) in grouped {
        let probability: f64 = patterns.iter().map(|(_, p)| p).sum();
        let success = is_remote_success(&clicks);
        let r_state = match (success, patterns.as_slice()) {
            (true, [(pattern, _)]) => layout.conditional_r_state(&post, pattern)?.map(|(s, _)| s),
            _ => None,
        };
        if success {
            success_probability += probability;
        }
        classes.push(RemoteClass {
            phase_mark: remote_phase_mark(&clicks),
            clicks,
            probability,
            success,
            r_state,
        });
    }
    Ok(RemoteTransfer {
        success_probability,
        classes,
    })
}

/// Recomputes the phase table from the simulation itself using the probe
/// input `(|0⟩ + |1⟩)/√2`, whose corrected and uncorrected versions are
/// orthogonal.
pub fn derive_phase_table(layout: &RemoteLayout) -> Result<BTreeMap<ClickPattern, PhaseMark>> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let probe = layout.r_map().state(layout.r_registry(), s, s)?;
    let mut table = BTreeMap::new();
    for class in remote_transfer(s, s, layout)?.classes {
        if let Some(r) = class.r_state {
            let plus = crate::fock::fidelity_pure(&r, &probe)?;
            table.insert(
                class.clicks,
                if plus > 0.5 {
                    PhaseMark::None
                } else {
                    PhaseMark::Pi
                },
            );
        }
    }
    Ok(table)
}
