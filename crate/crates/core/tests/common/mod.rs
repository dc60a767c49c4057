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

//! Dense reference implementation used by the integration tests.
//!
//! Matrix elements of a lifted unitary are evaluated directly from
//! permanents, `⟨m|U|n⟩ = Perm(U[m, n]) / √(Π m_i! Π n_j!)`, where `U[m, n]`
//! repeats row `i` `m_i` times and column `j` `n_j` times.

#![allow(dead_code)]

use dfs_sim::{ModeRegistry, OpticalElement, PureState, C64};
use nalgebra::DMatrix;

pub fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// Permanent by summing over every permutation (Heap's algorithm).
pub fn permanent(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let term = |p: &[usize]| (0..n).map(|i| m[(i, p[i])]).product::<C64>();
    let mut total = term(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += term(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total
}

/// All occupation vectors of length `k` with entries below `d` summing to `total`.
pub fn compositions(k: usize, total: usize, d: usize) -> Vec<Vec<u8>> {
    if k == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..d.min(total + 1) {
        for mut rest in compositions(k - 1, total - first, d) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

pub fn matrix_element(u: &DMatrix<C64>, out: &[u8], inp: &[u8]) -> C64 {
    let rows: Vec<usize> = out
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
        .collect();
    let cols: Vec<usize> = inp
        .iter()
        .enumerate()
        .flat_map(|(j, &k)| std::iter::repeat_n(j, k as usize))
        .collect();
    assert_eq!(rows.len(), cols.len());
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])]);
    let norm: f64 = out.iter().chain(inp).map(|&k| factorial(k)).product();
    permanent(&sub) / norm.sqrt()
}

/// Applies `element` to a dense state vector over `registry`.
pub fn dense_apply(registry: &ModeRegistry, dense: &[C64], element: &OpticalElement) -> Vec<C64> {
    let d = registry.truncation();
    let idx: Vec<usize> = element
        .modes()
        .iter()
        .map(|m| registry.index_of(m).unwrap())
        .collect();
    let u = element.matrix();
    let mut out = vec![C64::new(0.0, 0.0); dense.len()];
    for (i, &amp) in dense.iter().enumerate() {
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let occ = registry.occupation_at(i);
        let local: Vec<u8> = idx.iter().map(|&j| occ[j]).collect();
        let total: usize = local.iter().map(|&k| k as usize).sum();
        for target in compositions(idx.len(), total, d) {
            let mut next = occ.clone();
            for (&j, &k) in idx.iter().zip(&target) {
                next[j] = k;
            }
            out[registry.basis_index(&next)] += amp * matrix_element(u, &target, &local);
        }
    }
    out
}

/// Largest amplitude difference between a sparse state and a dense vector.
pub fn max_deviation(state: &PureState, dense: &[C64]) -> f64 {
    let sparse = state.to_dense().unwrap();
    sparse
        .iter()
        .zip(dense)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// Applies `elements` in order both ways and returns the largest deviation.
pub fn compare_circuit(input: &PureState, elements: &[OpticalElement]) -> f64 {
    let registry = input.registry().clone();
    let mut dense = input.to_dense().unwrap();
    let mut sparse = input.clone();
    let mut worst = 0.0f64;
    for e in elements {
        dense = dense_apply(&registry, &dense, e);
        sparse = sparse.apply_unitary(e).unwrap();
        worst = worst.max(max_deviation(&sparse, &dense));
    }
    worst
}

/// Reproducible pseudo-random normalised qubit amplitudes.
pub fn qubit(rng: &mut impl rand::Rng) -> (C64, C64) {
    let theta: f64 = rng.random::<f64>() * std::f64::consts::PI;
    let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let chi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    (
        C64::from_polar((theta / 2.0).cos(), chi),
        C64::from_polar((theta / 2.0).sin(), chi + phi),
    )
}
