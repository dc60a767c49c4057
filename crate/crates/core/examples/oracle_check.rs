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

//! Sampled click statistics against the exact distribution, with a
//! deliberately wrong detector efficiency as a negative control.

use dfs_sim::noise::NoiseParams;
use dfs_sim::trials::{compare_with_oracle, exact_write_distribution, run_write_trials, RunConfig};
use dfs_sim::C64;

fn main() -> dfs_sim::Result<()> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let noise = NoiseParams {
        pc: 0.05,
        eta_d: 0.8,
        p_dc: 1e-3,
        ..NoiseParams::default()
    };
    let cfg = RunConfig::new(20_000, 3, s, s, noise)?;
    let stats = run_write_trials(&cfg)?;
    let honest = compare_with_oracle(&stats, &exact_write_distribution(&cfg)?, 3.0);
    let wrong = RunConfig {
        noise: NoiseParams {
            eta_d: 0.6,
            ..noise
        },
        ..cfg
    };
    let control = compare_with_oracle(&stats, &exact_write_distribution(&wrong)?, 3.0);
    for e in &honest.entries {
        println!(
            "{:<22} {:.5} vs {:.5} (se {:.1e})",
            e.quantity, e.empirical, e.expected, e.se
        );
    }
    println!("matching oracle passes: {}", honest.passed());
    println!(
        "wrong eta_d flagged:    {:?}",
        control.flagged().map(|e| &e.quantity).collect::<Vec<_>>()
    );
    Ok(())
}
