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

//! Emission and read-out primitives of a single ensemble.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::fock::{MixedState, ModeLabel, ModeRegistry, Polarization, PureState, C64};
use crate::noise::apply_loss;
use crate::optics;

/// Excitation probability per pump pulse and the highest pair order kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub pc: f64,
    pub n_max: u8,
}

impl SourceParams {
    pub fn new(pc: f64, n_max: u8) -> Result<Self> {
        if !(0.0..0.5).contains(&pc) {
            return Err(invalid("pc", format!("{pc} outside [0, 0.5)")));
        }
        if n_max < 1 {
            return Err(invalid(
                "n_max",
                "at least one excitation order is required",
            ));
        }
        Ok(SourceParams { pc, n_max })
    }
}

/// Pump and ensemble parameters in one caller-chosen unit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpPhysical {
    pub coupling: f64,
    pub linear_density: f64,
    pub length: f64,
    pub rabi: f64,
    pub detuning: f64,
    pub pulse_duration: f64,
    pub speed_of_light: f64,
}

/// Single spin-flip probability `4 g² N L / c · |Ω|² / Δ² · t_p`.
pub fn pc_from_physical(p: &PumpPhysical) -> Result<f64> {
    let positive = [
        ("coupling", p.coupling),
        ("linear_density", p.linear_density),
        ("length", p.length),
        ("rabi", p.rabi.abs()),
        ("pulse_duration", p.pulse_duration),
        ("speed_of_light", p.speed_of_light),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("{v} must be positive")));
        }
    }
    if p.detuning == 0.0 || !p.detuning.is_finite() {
        return Err(invalid("detuning", "must be nonzero"));
    }
    Ok(
        4.0 * p.coupling.powi(2) * p.linear_density * p.length / p.speed_of_light * p.rabi.powi(2)
            / p.detuning.powi(2)
            * p.pulse_duration,
    )
}

/// Number-correlated pair state `Σ_n pc^{n/2} |n⟩_atomic |n⟩_photon`,
/// `n = 0..=n_max`, normalised. Other modes are empty.
pub fn raman_pair_state(
    params: SourceParams,
    atomic: &ModeLabel,
    photon: &ModeLabel,
    registry: &Arc<ModeRegistry>,
) -> Result<PureState> {
    if params.n_max as usize >= registry.truncation() {
        return Err(invalid(
            "n_max",
            format!(
                "{} does not fit truncation {}",
                params.n_max,
                registry.truncation()
            ),
        ));
    }
    let (ia, ip) = (registry.index_of(atomic)?, registry.index_of(photon)?);
    if ia == ip {
        return Err(SimError::ModeCollision(atomic.clone()));
    }
    let terms = (0..=params.n_max).map(|n| {
        let mut occ = vec![0u8; registry.len()];
        occ[ia] = n;
        occ[ip] = n;
        (occ, C64::new(params.pc.powf(n as f64 / 2.0), 0.0))
    });
    PureState::from_components(registry, terms)?.normalize()
}

/// Whether the dual-rail source output is conditioned on an emission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emission {
    /// The one-excitation branch only.
    Heralded,
    /// Includes the no-emission vacuum with weight `1 - pc`.
    Raw,
}

/// Single-ensemble dual-rail source.
///
/// An excitation of `atomic0` is accompanied by a left-circular photon and
/// one of `atomic1` by a right-circular photon, with equal amplitudes. The
/// built-in quarter-wave plate then maps the photon to V and H on the same
/// path, so the heralded output is
/// `(|V⟩|1⟩_{atomic0} + |H⟩|1⟩_{atomic1}) / √2`.
/// The registry must hold the L, R, H and V modes of the photon's path.
pub fn dualrail_emit(
    pc: f64,
    atomic0: &ModeLabel,
    atomic1: &ModeLabel,
    photon_l: &ModeLabel,
    photon_r: &ModeLabel,
    registry: &Arc<ModeRegistry>,
    emission: Emission,
) -> Result<PureState> {
    if !(0.0..=1.0).contains(&pc) {
        return Err(invalid("pc", format!("{pc} outside [0, 1]")));
    }
    let out_h = photon_r.with_polarization(Polarization::H)?;
    let out_v = photon_r.with_polarization(Polarization::V)?;
    let vac = PureState::vacuum(registry);
    let branch0 = vac.apply_creation(atomic0)?.apply_creation(photon_l)?;
    let branch1 = vac.apply_creation(atomic1)?.apply_creation(photon_r)?;
    let excited = branch0.plus(&branch1)?.scaled(C64::new(FRAC_1_SQRT_2, 0.0));
    let qwp = optics::qwp(photon_r, photon_l, &out_h, &out_v)?;
    let excited = excited.apply_unitary(&qwp)?;
    match emission {
        Emission::Heralded => Ok(excited),
        Emission::Raw => vac
            .scaled(C64::new((1.0 - pc).sqrt(), 0.0))
            .plus(&excited.scaled(C64::new(pc.sqrt(), 0.0))),
    }
}

/// Converts the atomic excitation into an anti-Stokes photon and applies
/// the read-out efficiency as a loss channel on that photon.
pub fn retrieve(
    state: &MixedState,
    atomic: &ModeLabel,
    anti_stokes: &ModeLabel,
    efficiency: f64,
) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(invalid(
            "efficiency",
            format!("{efficiency} outside [0, 1]"),
        ));
    }
    for (_, s) in state.components() {
        if !s.is_vacuum_on(anti_stokes)? {
            return Err(SimError::NotVacuum(anti_stokes.clone()));
        }
    }
    let swapped = state.apply_unitary(&optics::transfer(atomic, anti_stokes)?)?;
    apply_loss(&swapped, anti_stokes, efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity_pure, register_modes};

    fn pair_registry(d: usize) -> (Arc<ModeRegistry>, ModeLabel, ModeLabel) {
        let s = ModeLabel::atomic("L");
        let a = ModeLabel::photonic("stokes", Polarization::Rcirc, "a");
        (register_modes(vec![s.clone(), a.clone()], d).unwrap(), s, a)
    }

    fn unit_pump() -> PumpPhysical {
        PumpPhysical {
            coupling: 1.0,
            linear_density: 1.0,
            length: 1.0,
            rabi: 1.0,
            detuning: 1.0,
            pulse_duration: 1.0,
            speed_of_light: 1.0,
        }
    }

    #[test]
    fn pc_formula_scaling() {
        let base = unit_pump();
        assert_eq!(pc_from_physical(&base).unwrap(), 4.0);
        let longer = PumpPhysical {
            pulse_duration: 2.0,
            ..base
        };
        assert_eq!(pc_from_physical(&longer).unwrap(), 8.0);
        let detuned = PumpPhysical {
            detuning: 2.0,
            ..base
        };
        assert_eq!(pc_from_physical(&detuned).unwrap(), 1.0);
        assert!(pc_from_physical(&PumpPhysical {
            length: 0.0,
            ..base
        })
        .is_err());
        assert!(pc_from_physical(&PumpPhysical {
            detuning: 0.0,
            ..base
        })
        .is_err());
    }

    #[test]
    fn pair_state_amplitudes() {
        let (reg, s, a) = pair_registry(3);
        let vac = raman_pair_state(SourceParams::new(0.0, 2).unwrap(), &s, &a, &reg).unwrap();
        assert_eq!(fidelity_pure(&vac, &PureState::vacuum(&reg)).unwrap(), 1.0);

        let pc = 0.01;
        let st = raman_pair_state(SourceParams::new(pc, 2).unwrap(), &s, &a, &reg).unwrap();
        let z = (1.0 + pc + pc * pc).sqrt();
        for (n, want) in [(0u8, 1.0), (1, 0.1), (2, 0.01)] {
            assert!((st.amplitude(&[n, n]).re * z - want).abs() < 1e-15);
        }
        let p_emit = 1.0 - st.amplitude(&[0, 0]).norm_sqr();
        assert!((p_emit - (pc + pc * pc) / (1.0 + pc + pc * pc)).abs() < 1e-15);
    }

    #[test]
    fn pair_state_rejects_order_beyond_truncation() {
        let (reg, s, a) = pair_registry(2);
        assert!(raman_pair_state(SourceParams::new(0.1, 2).unwrap(), &s, &a, &reg).is_err());
        assert!(SourceParams::new(0.6, 1).is_err());
    }

    #[test]
    fn dualrail_heralded_state() {
        let (s0, s1) = (ModeLabel::atomic("0"), ModeLabel::atomic("1"));
        let modes: Vec<ModeLabel> = [
            Polarization::Lcirc,
            Polarization::Rcirc,
            Polarization::H,
            Polarization::V,
        ]
        .into_iter()
        .map(|p| ModeLabel::photonic("stokes", p, "a"))
        .collect();
        let mut all = vec![s0.clone(), s1.clone()];
        all.extend(modes.iter().cloned());
        let reg = register_modes(all, 2).unwrap();
        let st = dualrail_emit(
            0.05,
            &s0,
            &s1,
            &modes[0],
            &modes[1],
            &reg,
            Emission::Heralded,
        )
        .unwrap();
        assert!((st.norm_sqr() - 1.0).abs() < 1e-15);
        let v = st.amplitude_of(&[(&s0, 1), (&modes[3], 1)]).unwrap();
        let h = st.amplitude_of(&[(&s1, 1), (&modes[2], 1)]).unwrap();
        assert!((v.re - FRAC_1_SQRT_2).abs() < 1e-15 && (h.re - FRAC_1_SQRT_2).abs() < 1e-15);

        let raw = dualrail_emit(0.05, &s0, &s1, &modes[0], &modes[1], &reg, Emission::Raw).unwrap();
        assert!((raw.amplitude(&[0; 6]).norm_sqr() - 0.95).abs() < 1e-15);
        assert!((raw.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn retrieve_transfers_and_loses() {
        let s = ModeLabel::atomic("L");
        let x = ModeLabel::photonic("anti-stokes", Polarization::H, "x");
        let reg = register_modes(vec![s.clone(), x.clone()], 2).unwrap();
        let one = MixedState::from_pure(&PureState::basis(&reg, &[(&s, 1)]).unwrap()).unwrap();
        let photon = PureState::basis(&reg, &[(&x, 1)]).unwrap();
        let full = retrieve(&one, &s, &x, 1.0).unwrap();
        assert!((full.fidelity(&photon).unwrap() - 1.0).abs() < 1e-15);
        let half = retrieve(&one, &s, &x, 0.5).unwrap();
        assert!((half.fidelity(&photon).unwrap() - 0.5).abs() < 1e-12);
        assert!((half.fidelity(&PureState::vacuum(&reg)).unwrap() - 0.5).abs() < 1e-12);
        let vac = MixedState::from_pure(&PureState::vacuum(&reg)).unwrap();
        let out = retrieve(&vac, &s, &x, 0.3).unwrap();
        assert!((out.fidelity(&PureState::vacuum(&reg)).unwrap() - 1.0).abs() < 1e-15);
        let busy = MixedState::from_pure(&photon).unwrap();
        assert_eq!(
            retrieve(&busy, &s, &x, 1.0).unwrap_err(),
            SimError::NotVacuum(x)
        );
    }
}
