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

//! Moves a qubit from ensemble pair I to the distant pair R through a shared
//! entangled pair, listing every click class.

use dfs_sim::fock::fidelity_pure;
use dfs_sim::noise::NoiseParams;
use dfs_sim::protocol::{apply_phase_mark, derive_phase_table, remote_transfer, RemoteLayout};
use dfs_sim::trials::{run_remote_trials, RunConfig};
use dfs_sim::C64;

fn main() -> dfs_sim::Result<()> {
    let layout = RemoteLayout::new(3)?;
    let (alpha, beta) = (C64::new(0.28, 0.0), C64::from_polar(0.96, -1.1));
    let target = layout.r_map().state(layout.r_registry(), alpha, beta)?;
    let rt = remote_transfer(alpha, beta, &layout)?;
    println!("success probability {:.15}", rt.success_probability);
    for class in &rt.classes {
        match (&class.r_state, class.phase_mark) {
            (Some(r), Some(mark)) => {
                let fixed = apply_phase_mark(r, mark, &layout.r_map())?;
                println!(
                    "{:<8} P={:.6} {mark:?} F={:.15}",
                    class.clicks,
                    class.probability,
                    fidelity_pure(&fixed, &target)?
                );
            }
            _ => println!("{:<8} P={:.6} failure", class.clicks, class.probability),
        }
    }
    println!("phase table: {:?}", derive_phase_table(&layout)?);

    let lossy = NoiseParams {
        chi: 0.5,
        ..NoiseParams::default()
    };
    let stats = run_remote_trials(&RunConfig::new(100_000, 7, alpha, beta, lossy)?)?;
    println!(
        "eta'=0.5 sampled success {:.5} +- {:.5}",
        stats.success_rate.value, stats.success_rate.se
    );
    Ok(())
}
