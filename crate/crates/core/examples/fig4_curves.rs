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

//! Fidelity against preparation time, and fidelity loss against overall
//! efficiency, for the default repetition rate.

use dfs_sim::noise::{
    df_vs_eta, fidelity_vs_t, linspace, p1_analytic, preparation_time, NoiseParams,
};

fn main() -> dfs_sim::Result<()> {
    let f_p = 1e7;
    for (t, f) in fidelity_vs_t(1.0 / 3.0, f_p, &linspace(5e-6, 5e-5, 10)?)? {
        println!("T={:>5.1} us  F={f:.6}", t * 1e6);
    }
    for t in [2e-5, 3e-5, 4e-5] {
        let curve = df_vs_eta(t, f_p, &[0.1, 0.5, 1.0])?;
        let cells: Vec<String> = curve
            .iter()
            .map(|(e, d)| format!("dF({e})={d:.5}"))
            .collect();
        println!("T={:.0} us  {}", t * 1e6, cells.join("  "));
    }
    let n = NoiseParams {
        pc: 0.01,
        chi: 0.5,
        eta_d: 2.0 / 3.0,
        ..NoiseParams::default()
    };
    println!(
        "pc=0.01 at eta'=1/3: T = {:.3e} s",
        preparation_time(p1_analytic(&n), f_p)?
    );
    Ok(())
}
