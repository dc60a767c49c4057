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

//! Writes a qubit into the ensemble pair: every Bell outcome, its Pauli mark,
//! and the fidelity of the corrected stored state. Then a sampled run.

use dfs_sim::fock::fidelity_pure;
use dfs_sim::noise::NoiseParams;
use dfs_sim::protocol::{apply_logical_pauli, write_memory_branches, WriteLayout};
use dfs_sim::trials::{run_write_trials, RunConfig};
use dfs_sim::C64;

fn main() -> dfs_sim::Result<()> {
    let layout = WriteLayout::new(3)?;
    let (alpha, beta) = (C64::new(0.6, 0.0), C64::from_polar(0.8, 0.7));
    let map = layout.logical_map();
    let target = map.state(layout.atomic_registry(), alpha, beta)?;
    for (p, rec) in write_memory_branches(alpha, beta, 0.01, &layout)? {
        let mark = rec.mark.expect("single clicks always mark");
        let stored = &rec.atomic_state.components()[0].1;
        let fixed = apply_logical_pauli(stored, mark, &map)?;
        println!(
            "{:<9} {}  P={p:.15}  mark={mark:?}  F={:.15}",
            rec.outcome.name(),
            rec.click_pattern,
            fidelity_pure(&fixed, &target)?
        );
    }

    let cfg = RunConfig::new(20_000, 42, alpha, beta, NoiseParams::default())?;
    let stats = run_write_trials(&cfg)?;
    println!(
        "sampled: {}",
        serde_json::to_string(&stats).expect("serialisable")
    );
    Ok(())
}
