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

//! Imperfections: the analytic click/vacuum/multi-excitation model, the
//! preparation-time and fidelity curves, the exact loss channel, and a
//! density pipeline that checks the analytic estimate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::fock::{MixedState, ModeLabel, Polarization, PureState, C64};
use crate::optics;
use crate::protocol::{self, apply_logical_pauli, classify, pauli_mark, ClickPattern, WriteLayout};

/// Physical knobs of the noise model. Lengths share one unit; `f_p` is in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub pc: f64,
    pub chi: f64,
    pub eta_d: f64,
    /// Dark-count probability per detector per pulse window.
    pub p_dc: f64,
    pub l0: f64,
    pub l_att: f64,
    pub f_p: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            pc: 0.01,
            chi: 1.0,
            eta_d: 1.0,
            p_dc: 0.0,
            l0: 0.0,
            l_att: 1.0,
            f_p: 1e7,
        }
    }
}

fn unit_interval(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} outside [0, 1]")))
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.pc) {
            return Err(invalid("pc", format!("{} outside [0, 0.5)", self.pc)));
        }
        unit_interval("chi", self.chi)?;
        unit_interval("eta_d", self.eta_d)?;
        unit_interval("p_dc", self.p_dc)?;
        if !(self.l0 >= 0.0 && self.l0.is_finite()) {
            return Err(invalid(
                "l0",
                format!("{} must be finite and nonnegative", self.l0),
            ));
        }
        if !(self.l_att > 0.0 && self.l_att.is_finite()) {
            return Err(invalid("l_att", format!("{} must be positive", self.l_att)));
        }
        if !(self.f_p > 0.0 && self.f_p.is_finite()) {
            return Err(invalid("f_p", format!("{} must be positive", self.f_p)));
        }
        Ok(())
    }

    pub fn channel_transmission(&self) -> f64 {
        (-self.l0 / self.l_att).exp()
    }

    /// `χ η_d`.
    pub fn eta(&self) -> f64 {
        self.chi * self.eta_d
    }

    /// Overall per-photon efficiency `χ η_d e^{-L0/L_att}`.
    pub fn eta_prime(&self) -> f64 {
        self.eta() * self.channel_transmission()
    }
}

pub fn p1_analytic(n: &NoiseParams) -> f64 {
    2.0 * n.pc * n.eta_prime()
}

/// Vacuum weight from dark counts, `p_dc / (pc η′)`. Defined only where it
/// cannot exceed one.
pub fn p0_analytic(n: &NoiseParams) -> Result<f64> {
    let denom = n.pc * n.eta_prime();
    if n.p_dc == 0.0 {
        return Ok(0.0);
    }
    if n.p_dc > denom {
        return Err(invalid(
            "p_dc",
            format!("{} exceeds pc * eta' = {denom}", n.p_dc),
        ));
    }
    Ok(n.p_dc / denom)
}

/// Weight of the `excitations`-fold term, `pc^n χ (1 - η_d) e^{-L0/L_att}`.
pub fn po_analytic(n: &NoiseParams, excitations: u32) -> f64 {
    n.pc.powi(excitations as i32) * n.chi * (1.0 - n.eta_d) * n.channel_transmission()
}

pub fn preparation_time(p1: f64, f_p: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(invalid("p1", format!("{p1} outside (0, 1]")));
    }
    if f_p.is_nan() || f_p <= 0.0 {
        return Err(invalid("f_p", format!("{f_p} must be positive")));
    }
    Ok(1.0 / (p1 * f_p))
}

/// Excitation probability that yields preparation time `t` at efficiency
/// `eta_prime`.
fn pc_for_time(eta_prime: f64, f_p: f64, t: f64) -> f64 {
    1.0 / (2.0 * eta_prime * f_p * t)
}

fn check_rate(eta_prime: f64, f_p: f64) -> Result<()> {
    if !(eta_prime > 0.0 && eta_prime <= 1.0) {
        return Err(invalid("eta_prime", format!("{eta_prime} outside (0, 1]")));
    }
    if !(f_p > 0.0 && f_p.is_finite()) {
        return Err(invalid("f_p", format!("{f_p} must be positive")));
    }
    Ok(())
}

/// `(T, F)` with `F = 1 - 1/(2 η′ f_p T)` clamped to `[0, 1]`.
pub fn fidelity_vs_t(eta_prime: f64, f_p: f64, t_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_rate(eta_prime, f_p)?;
    t_values
        .iter()
        .map(|&t| {
            if t.is_nan() || t <= 0.0 {
                return Err(invalid("T", format!("{t} must be positive")));
            }
            Ok((t, (1.0 - pc_for_time(eta_prime, f_p, t)).clamp(0.0, 1.0)))
        })
        .collect()
}

/// `(η′, ΔF)` with `ΔF = 1/(2 η′ f_p T)`.
pub fn df_vs_eta(t: f64, f_p: f64, eta_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if t.is_nan() || t <= 0.0 {
        return Err(invalid("T", format!("{t} must be positive")));
    }
    eta_values
        .iter()
        .map(|&eta| {
            check_rate(eta, f_p)?;
            Ok((eta, pc_for_time(eta, f_p, t)))
        })
        .collect()
}

/// `points` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(invalid("points", "need at least one point")),
        1 => Ok(vec![start]),
        _ => {
            let step = (end - start) / (points - 1) as f64;
            Ok((0..points)
                .map(|i| {
                    if i == points - 1 {
                        end
                    } else {
                        start + step * i as f64
                    }
                })
                .collect())
        }
    }
}

/// `p0 |vac⟩⟨vac| + p1 |Ψ⟩⟨Ψ| + Σ w_k |ψ_k⟩⟨ψ_k|`.
pub fn build_mixed_state(
    p0: f64,
    p1: f64,
    po_components: &[(f64, PureState)],
    ideal: &PureState,
    vac: &PureState,
) -> Result<MixedState> {
    let total = p0 + p1 + po_components.iter().map(|(w, _)| w).sum::<f64>();
    if (total - 1.0).abs() > 1e-12 {
        return Err(SimError::WeightSum(total));
    }
    let mut comps = Vec::with_capacity(po_components.len() + 2);
    for (w, s) in [(p0, vac), (p1, ideal)]
        .into_iter()
        .chain(po_components.iter().map(|(w, s)| (*w, s)))
    {
        if w < 0.0 {
            return Err(SimError::WeightSum(w));
        }
        if w > 0.0 {
            comps.push((w, s.normalize()?));
        }
    }
    MixedState::new(comps)
}

/// Loss channel of survival probability `survival` on `mode`.
///
/// The mode is mixed with a fresh vacuum port on a beam splitter of
/// amplitude transmissivity `√survival`; the port is then traced out by
/// keeping one ensemble component per port occupation.
pub fn apply_loss(state: &MixedState, mode: &ModeLabel, survival: f64) -> Result<MixedState> {
    unit_interval("survival", survival)?;
    let reg = state.registry();
    reg.index_of(mode)?;
    if survival == 1.0 {
        return Ok(state.clone());
    }
    let port = ModeLabel::photonic("loss", Polarization::H, mode.to_string());
    let ext = reg.with_mode(port.clone())?;
    let splitter = optics::loss_splitter(mode, &port, survival)?;
    let mut branches = Vec::new();
    for (w, psi) in state.components() {
        let mixed = psi.remap(&ext)?.apply_unitary(&splitter)?;
        for (_, part) in mixed.split_by_total(std::slice::from_ref(&port))? {
            branches.push((*w, part.remap(reg)?));
        }
    }
    Ok(MixedState::from_branches(branches)?.0)
}

pub fn apply_loss_pure(state: &PureState, mode: &ModeLabel, survival: f64) -> Result<MixedState> {
    apply_loss(&MixedState::from_pure(state)?, mode, survival)
}

/// Analytic counterparts reported next to the pipeline values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEstimate {
    pub p0: f64,
    pub p1: f64,
    pub po: f64,
    pub t_seconds: f64,
    pub delta_f: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Heralded weight with no photon in the fibre.
    pub p0: f64,
    /// Heralded weight with one photon and one atomic excitation.
    pub p1: f64,
    /// Every other heralded weight.
    pub po: f64,
    pub eta_prime: f64,
    /// Probability of a herald click per round.
    pub herald_probability: f64,
    pub t_seconds: f64,
    /// Overlap of the heralded atom-photon state with the ideal state.
    pub f: f64,
    pub delta_f: f64,
    /// Mean fidelity of the corrected stored qubit given a single click in
    /// the Bell analyser.
    pub memory_fidelity: f64,
    pub analytic: AnalyticEstimate,
}

/// Smallest truncation that holds every term of a two-pair source after
/// the analyser recombines both paths.
pub const PIPELINE_TRUNCATION: usize = 5;

/// Full density pipeline: Raman sources with pairs up to two, the
/// entangling optics, loss `η′` on the fibre, a threshold herald with dark
/// counts, then encoding, the Bell analyser and mark correction.
pub fn end_to_end_fidelity(noise: &NoiseParams, alpha: C64, beta: C64) -> Result<FidelityReport> {
    noise.validate()?;
    if noise.pc == 0.0 {
        return Err(invalid("pc", "the herald never fires at pc = 0"));
    }
    let layout = WriteLayout::new(PIPELINE_TRUNCATION)?;
    let eta_prime = noise.eta_prime();
    let source = layout.source_state(noise.pc, 2)?;
    let merged = protocol::apply_all(&source, &layout.entangling_optics()?)?;
    let mut state = MixedState::from_pure(&merged)?;
    for m in layout.fiber_modes() {
        state = apply_loss(&state, &m, eta_prime)?;
    }

    let fiber = layout.fiber_modes();
    let atoms = [layout.s_l.clone(), layout.s_r.clone()];
    let mut heralded = Vec::new();
    let (mut w0, mut w1, mut wo) = (0.0, 0.0, 0.0);
    for (w, psi) in state.components() {
        for (photons, part) in psi.split_by_total(&fiber)? {
            let click = if photons == 0 { noise.p_dc } else { 1.0 };
            for (excitations, sub) in part.split_by_total(&atoms)? {
                let weight = w * click * sub.norm_sqr();
                match (photons, excitations) {
                    (0, _) => w0 += weight,
                    (1, 1) => w1 += weight,
                    _ => wo += weight,
                }
            }
            if click > 0.0 {
                heralded.push((w * click, part));
            }
        }
    }
    let (rho, herald_probability) = MixedState::from_branches(heralded)?;
    let f = rho.fidelity(&layout.ideal_entangled_state()?)?;
    let memory_fidelity = memory_fidelity(&state, noise.p_dc, alpha, beta, &layout)?;

    let p1 = p1_analytic(noise);
    let analytic = AnalyticEstimate {
        p0: p0_analytic(noise).unwrap_or(f64::NAN),
        p1,
        po: po_analytic(noise, 2),
        t_seconds: preparation_time(p1, noise.f_p).unwrap_or(f64::INFINITY),
        delta_f: noise.pc,
    };
    Ok(FidelityReport {
        p0: w0 / herald_probability,
        p1: w1 / herald_probability,
        po: wo / herald_probability,
        eta_prime,
        herald_probability,
        t_seconds: 1.0 / (herald_probability * noise.f_p),
        f,
        delta_f: 1.0 - f,
        memory_fidelity,
        analytic,
    })
}

/// Probability that exactly the detectors in `clicks` fire given photon
/// counts `counts`, for unit-efficiency threshold detectors with dark-count
/// probability `p_dc`.
pub fn click_probability(counts: &[u8], clicks: &[bool], p_dc: f64) -> f64 {
    counts
        .iter()
        .zip(clicks)
        .map(|(&n, &c)| match (n > 0, c) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, true) => p_dc,
            (false, false) => 1.0 - p_dc,
        })
        .product()
}

/// Mean fidelity of the corrected atomic qubit, conditioned on exactly one
/// click in the Bell analyser.
fn memory_fidelity(
    state: &MixedState,
    p_dc: f64,
    alpha: C64,
    beta: C64,
    layout: &WriteLayout,
) -> Result<f64> {
    let map = layout.logical_map();
    let target = map.state(layout.atomic_registry(), alpha, beta)?;
    let detectors = layout.detectors();
    let (mut total, mut weighted) = (0.0, 0.0);
    for (w, psi) in state.components() {
        let encoded = protocol::encode_spatial(psi, alpha, beta, layout)?;
        let out = protocol::bsm(&encoded, layout)?;
        for counts in out.detector_probabilities.keys() {
            let (proj, p) = out.state.project_pattern(&detectors, counts)?;
            let atomic = proj.remap(layout.atomic_registry())?;
            for detector in 0..4 {
                let mut clicks = vec![false; 4];
                clicks[detector] = true;
                let weight = w * click_probability(counts, &clicks, p_dc);
                if weight == 0.0 {
                    continue;
                }
                let mark = pauli_mark(&classify(&ClickPattern(clicks)))?;
                let corrected = apply_logical_pauli(&atomic, mark, &map)?;
                weighted += weight * corrected.inner(&target)?.norm_sqr();
                total += weight * p;
            }
        }
    }
    if total == 0.0 {
        return Err(SimError::ZeroNorm);
    }
    Ok(weighted / total)
}
