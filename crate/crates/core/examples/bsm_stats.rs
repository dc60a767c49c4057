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

//! Detector routing of the four polarisation-path Bell states.

use dfs_sim::cli::bell_routing;
use dfs_sim::protocol::WriteLayout;

fn main() -> dfs_sim::Result<()> {
    let layout = WriteLayout::new(3)?;
    println!("{:<9} {:>6} {:>6} {:>6} {:>6}", "", "D1", "D2", "D3", "D4");
    for (name, probs) in bell_routing(&layout)? {
        println!(
            "{name:<9} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            probs[0], probs[1], probs[2], probs[3]
        );
    }
    Ok(())
}
