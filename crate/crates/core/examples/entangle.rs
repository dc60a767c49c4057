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

//! Heralded atom-photon entanglement from two Raman sources, then the
//! density pipeline with loss and dark counts.

use dfs_sim::fock::fidelity_pure;
use dfs_sim::noise::{end_to_end_fidelity, NoiseParams};
use dfs_sim::protocol::{generate_entanglement, WriteLayout};
use dfs_sim::C64;

fn main() -> dfs_sim::Result<()> {
    let layout = WriteLayout::new(3)?;
    let pc = 0.01;
    let ent = generate_entanglement(pc, &layout)?;
    let state = ent.state.expect("pc > 0 heralds");
    println!("herald probability  {:.6e}", ent.herald_probability);
    println!(
        "fidelity with ideal {:.15}",
        fidelity_pure(&state, &layout.ideal_entangled_state()?)?
    );

    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for pc in [1e-3, 5e-3, 1e-2, 5e-2] {
        let noise = NoiseParams {
            pc,
            ..NoiseParams::default()
        };
        let r = end_to_end_fidelity(&noise, s, s)?;
        println!(
            "pc={pc:<6} dF={:.4e} dF/pc={:.3} p0={:.2e} p1={:.6} po={:.3e} T={:.3e}s memory F={:.6}",
            r.delta_f,
            r.delta_f / pc,
            r.p0,
            r.p1,
            r.po,
            r.t_seconds,
            r.memory_fidelity
        );
    }

    let lossy = NoiseParams {
        pc: 0.01,
        chi: 0.5,
        eta_d: 2.0 / 3.0,
        p_dc: 1e-5,
        ..NoiseParams::default()
    };
    let r = end_to_end_fidelity(&lossy, s, s)?;
    println!(
        "lossy: eta'={:.4} F={:.6} p0={:.3e} analytic p0={:.3e}",
        r.eta_prime, r.f, r.p0, r.analytic.p0
    );
    Ok(())
}
