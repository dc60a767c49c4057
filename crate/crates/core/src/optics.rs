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

//! Constructors for the optical elements of the memory setup.
//!
//! Every constructor returns an [`OpticalElement`] whose single-particle
//! matrix is exactly unitary. Routing elements (wave-plate relabelling, PBS)
//! are permutation matrices with all phases `+1`; outputs may reuse input
//! labels, in which case the element acts in place.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Result, SimError};
use crate::fock::{ModeLabel, OpticalElement, Polarization, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn require_photonic(labels: &[&ModeLabel]) -> Result<()> {
    for l in labels {
        if !l.is_photonic() {
            return Err(SimError::InvalidLabel {
                label: (*l).clone(),
                reason: "optical elements act on photonic modes".into(),
            });
        }
    }
    Ok(())
}

fn first_repeat<'a>(labels: &[&'a ModeLabel]) -> Option<&'a ModeLabel> {
    labels
        .iter()
        .enumerate()
        .find(|(i, l)| labels[..*i].contains(l))
        .map(|(_, l)| *l)
}

/// Permutation element sending each `input` to its `output`.
///
/// Inputs must be distinct and outputs must be distinct. Output modes that
/// are not inputs are sent back onto the inputs that are not outputs, in
/// order, which completes the map to a permutation of the union.
pub fn routing(name: &str, pairs: &[(&ModeLabel, &ModeLabel)]) -> Result<OpticalElement> {
    let ins: Vec<&ModeLabel> = pairs.iter().map(|p| p.0).collect();
    let outs: Vec<&ModeLabel> = pairs.iter().map(|p| p.1).collect();
    if let Some(l) = first_repeat(&ins).or_else(|| first_repeat(&outs)) {
        return Err(SimError::ModeCollision(l.clone()));
    }
    let mut modes: Vec<ModeLabel> = ins.iter().map(|l| (*l).clone()).collect();
    for o in &outs {
        if !modes.contains(o) {
            modes.push((*o).clone());
        }
    }
    let pos = |l: &ModeLabel| modes.iter().position(|m| m == l).unwrap();
    let mut image: Vec<Option<usize>> = vec![None; modes.len()];
    for (i, o) in &pairs
        .iter()
        .map(|(i, o)| (pos(i), pos(o)))
        .collect::<Vec<_>>()
    {
        image[*i] = Some(*o);
    }
    let spare_sources = modes.iter().filter(|m| !ins.contains(m)).map(&pos);
    let spare_targets: Vec<usize> = modes
        .iter()
        .filter(|m| !outs.contains(m))
        .map(pos)
        .collect();
    for (src, dst) in spare_sources.zip(spare_targets) {
        image[src] = Some(dst);
    }
    let n = modes.len();
    let mut m = DMatrix::from_element(n, n, c(0.0));
    for (j, i) in image.iter().enumerate() {
        m[(i.expect("permutation is complete"), j)] = c(1.0);
    }
    OpticalElement::new(name, modes, m)
}

/// Quarter-wave plate as a relabelling: right circular to H, left circular to V.
pub fn qwp(
    in_rcirc: &ModeLabel,
    in_lcirc: &ModeLabel,
    out_h: &ModeLabel,
    out_v: &ModeLabel,
) -> Result<OpticalElement> {
    require_photonic(&[in_rcirc, in_lcirc, out_h, out_v])?;
    if let Some(l) = first_repeat(&[in_rcirc, in_lcirc, out_h, out_v]) {
        return Err(SimError::ModeCollision(l.clone()));
    }
    routing("qwp", &[(in_rcirc, out_h), (in_lcirc, out_v)])
}

/// Polarising beam splitter: H is transmitted (input k to output k), V is
/// reflected (input 1 to output 2 and back).
#[allow(clippy::too_many_arguments)]
pub fn pbs(
    in1_h: &ModeLabel,
    in1_v: &ModeLabel,
    in2_h: &ModeLabel,
    in2_v: &ModeLabel,
    out1_h: &ModeLabel,
    out1_v: &ModeLabel,
    out2_h: &ModeLabel,
    out2_v: &ModeLabel,
) -> Result<OpticalElement> {
    require_photonic(&[in1_h, in1_v, in2_h, in2_v, out1_h, out1_v, out2_h, out2_v])?;
    routing(
        "pbs",
        &[
            (in1_h, out1_h),
            (in1_v, out2_v),
            (in2_h, out2_h),
            (in2_v, out1_v),
        ],
    )
}

/// Half-wave plate acting as a Hadamard on `(H, V)`.
pub fn hwp(mode_h: &ModeLabel, mode_v: &ModeLabel) -> Result<OpticalElement> {
    require_photonic(&[mode_h, mode_v])?;
    let s = c(FRAC_1_SQRT_2);
    let m = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
    OpticalElement::new("hwp", vec![mode_h.clone(), mode_v.clone()], m)
}

/// Polarisation rotator exchanging H and V.
pub fn pol_rotator(mode_h: &ModeLabel, mode_v: &ModeLabel) -> Result<OpticalElement> {
    require_photonic(&[mode_h, mode_v])?;
    swap_matrix("rotator", mode_h, mode_v)
}

fn swap_matrix(name: &str, a: &ModeLabel, b: &ModeLabel) -> Result<OpticalElement> {
    let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    OpticalElement::new(name, vec![a.clone(), b.clone()], m)
}

/// Polarisation-independent Mach-Zehnder splitter.
///
/// Sends the photon in `in_mode` to `alpha·out_a + beta·out_b`, identically
/// for the H and V copies of the three spatial modes (the polarisation tag of
/// the labels passed in is ignored). The second column is `(-β̄, ᾱ)`. When
/// `in_mode` and `out_a` name the same path the element acts on two spatial
/// modes; otherwise the remaining column returns `out_a` to `in_mode`.
pub fn mz_split(
    in_mode: &ModeLabel,
    out_a: &ModeLabel,
    out_b: &ModeLabel,
    alpha: C64,
    beta: C64,
) -> Result<OpticalElement> {
    require_photonic(&[in_mode, out_a, out_b])?;
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(SimError::NotNormalized(norm));
    }
    let (alpha, beta) = (alpha / norm.sqrt(), beta / norm.sqrt());
    let zero = c(0.0);
    let in_place = in_mode.path() == out_a.path() && in_mode.subsystem() == out_a.subsystem();
    let mut modes = Vec::new();
    let mut blocks = Vec::new();
    for pol in [Polarization::H, Polarization::V] {
        let a = out_a.with_polarization(pol)?;
        let b = out_b.with_polarization(pol)?;
        if in_place {
            modes.extend([a, b]);
            blocks.push(DMatrix::from_row_slice(
                2,
                2,
                &[alpha, -beta.conj(), beta, alpha.conj()],
            ));
        } else {
            modes.extend([in_mode.with_polarization(pol)?, a, b]);
            blocks.push(DMatrix::from_row_slice(
                3,
                3,
                &[
                    zero,
                    c(1.0),
                    zero,
                    alpha,
                    zero,
                    -beta.conj(),
                    beta,
                    zero,
                    alpha.conj(),
                ],
            ));
        }
    }
    let k = blocks[0].nrows();
    let mut m = DMatrix::from_element(2 * k, 2 * k, zero);
    m.view_mut((0, 0), (k, k)).copy_from(&blocks[0]);
    m.view_mut((k, k), (k, k)).copy_from(&blocks[1]);
    OpticalElement::new("mz", modes, m)
}

/// Balanced beam splitter with matrix `[[1, 1], [1, -1]] / √2`.
pub fn bs50(mode_1: &ModeLabel, mode_2: &ModeLabel) -> Result<OpticalElement> {
    require_photonic(&[mode_1, mode_2])?;
    let s = c(FRAC_1_SQRT_2);
    let m = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
    OpticalElement::new("bs50", vec![mode_1.clone(), mode_2.clone()], m)
}

/// Beam splitter transmitting amplitude `√t` from `mode` and coupling
/// `√(1 - t)` into `port`.
pub fn loss_splitter(
    mode: &ModeLabel,
    port: &ModeLabel,
    transmissivity: f64,
) -> Result<OpticalElement> {
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(crate::error::invalid(
            "survival",
            format!("{transmissivity} not in [0, 1]"),
        ));
    }
    let t = transmissivity.sqrt();
    let r = (1.0 - transmissivity).sqrt();
    let m = DMatrix::from_row_slice(2, 2, &[c(t), c(-r), c(r), c(t)]);
    OpticalElement::new("loss", vec![mode.clone(), port.clone()], m)
}

/// Exchange of two modes of any kind; models the coherent atom-to-photon
/// read-out when the destination starts empty.
pub fn transfer(from: &ModeLabel, to: &ModeLabel) -> Result<OpticalElement> {
    swap_matrix("transfer", from, to)
}

/// Phase `e^{iθ}` per quantum in each listed mode.
pub fn phase_shift(modes: &[ModeLabel], theta: f64) -> Result<OpticalElement> {
    let n = modes.len();
    let m = DMatrix::from_diagonal_element(n, n, C64::from_polar(1.0, theta));
    OpticalElement::new("phase", modes.to_vec(), m)
}

/// Exact sign flip (`π` phase) on one mode.
pub fn sign_flip(mode: &ModeLabel) -> Result<OpticalElement> {
    OpticalElement::new(
        "sign",
        vec![mode.clone()],
        DMatrix::from_element(1, 1, c(-1.0)),
    )
}
