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

//! Stores a qubit, then retrieves it as an anti-Stokes polarisation qubit at
//! a few read-out efficiencies.

use dfs_sim::protocol::{read_memory, write_memory_branches, ReadLayout, WriteLayout};
use dfs_sim::C64;

fn main() -> dfs_sim::Result<()> {
    let write = WriteLayout::new(3)?;
    let read = ReadLayout::new(3)?;
    let (alpha, beta) = (C64::new(0.0, 0.6), C64::new(0.8, 0.0));
    let target = read.target(alpha, beta)?;
    for efficiency in [1.0, 0.9, 0.5] {
        for (_, rec) in write_memory_branches(alpha, beta, 0.01, &write)? {
            let out = read_memory(&rec, efficiency, &read)?;
            println!(
                "eta={efficiency:<4} {:<9} F={:.12}",
                rec.outcome.name(),
                out.fidelity(&target)?
            );
        }
    }
    Ok(())
}
