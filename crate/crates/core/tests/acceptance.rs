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

//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any fails.

mod common;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use dfs_sim::cli::{execute, parse_config};
use dfs_sim::fock::fidelity_pure;
use dfs_sim::noise::{end_to_end_fidelity, NoiseParams};
use dfs_sim::protocol::*;
use dfs_sim::trials::{oracle_check, run_remote_trials, Experiment, RunConfig};
use dfs_sim::{PureState, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, limit: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    check(
        took < limit,
        format!(
            "{detail}, {:.3} s (limit {} s)",
            took.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn csv_rows(body: &str) -> Vec<Vec<f64>> {
    body.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn run_cli(args: &str) -> Result<String, String> {
    let argv = std::iter::once("dfs-sim").chain(args.split_whitespace());
    let cfg = parse_config(argv, None).map_err(|e| e.to_string())?;
    Ok(execute(&cfg).map_err(|e| e.to_string())?.body)
}

fn fig4a() -> Outcome {
    let start = Instant::now();
    let body = run_cli("curves-fig4a --eta-prime=0.3333333333333333 --f-p=1e7 --t-min=5e-6 --t-max=5e-5 --points=100")?;
    let rows = csv_rows(&body);
    let anchor = rows
        .iter()
        .find(|r| (r[0] - 1.5e-5).abs() < 1e-12)
        .ok_or("no 15 us row")?;
    let beyond = rows.iter().filter(|r| r[0] > 1.5e-5 + 1e-12);
    let min_beyond = beyond.clone().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    let ok = rows.len() == 100
        && (anchor[1] - 0.99).abs() < 1e-6
        && beyond.count() > 0
        && min_beyond > 0.99;
    let detail = format!(
        "F(15 us) = {:.10}, min F beyond 15 us = {min_beyond:.6}",
        anchor[1]
    );
    check(ok, detail.clone()).and_then(|d| within_time(start, Duration::from_secs(1), d))
}

fn fig4b() -> Outcome {
    let start = Instant::now();
    let body = run_cli(
        "curves-fig4b --f-p=1e7 --t-values=2e-5,3e-5,4e-5 --eta-min=0.1 --eta-max=1.0 --points=100",
    )?;
    let rows = csv_rows(&body);
    let curve = |t: f64| {
        rows.iter()
            .filter(|r| r[2] == t)
            .map(|r| (r[0], r[1]))
            .collect::<Vec<_>>()
    };
    let base = curve(2e-5);
    let change = base[0].1 - base[base.len() - 1].1;
    let below = [3e-5, 4e-5].iter().all(|&t| {
        let c = curve(t);
        c.len() == base.len() && c.iter().zip(&base).all(|(o, b)| o.0 == b.0 && o.1 < b.1)
    });
    let ok = base[0].0 == 0.1
        && base[base.len() - 1].0 == 1.0
        && (change - 0.0225).abs() < 1e-6
        && below;
    check(
        ok,
        format!("dF(0.1) - dF(1.0) = {change:.10}, longer T strictly below: {below}"),
    )
    .and_then(|d| within_time(start, Duration::from_secs(1), d))
}

fn teleportation() -> Outcome {
    let start = Instant::now();
    let layout = WriteLayout::new(3).map_err(|e| e.to_string())?;
    let map = layout.logical_map();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let (mut worst_f, mut worst_p) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (alpha, beta) = common::qubit(&mut rng);
        let target = map.state(layout.atomic_registry(), alpha, beta).unwrap();
        let branches =
            write_memory_branches(alpha, beta, 0.01, &layout).map_err(|e| e.to_string())?;
        if branches.len() != 4 {
            return Err(format!("{} outcomes instead of 4", branches.len()));
        }
        for (p, rec) in branches {
            worst_p = worst_p.max((p - 0.25).abs());
            let fixed =
                apply_logical_pauli(&rec.atomic_state.components()[0].1, rec.mark.unwrap(), &map)
                    .unwrap();
            worst_f = worst_f.max((fidelity_pure(&fixed, &target).unwrap() - 1.0).abs());
        }
    }
    check(
        worst_f < 1e-10 && worst_p < 1e-12,
        format!("max |F - 1| = {worst_f:.2e}, max |P - 1/4| = {worst_p:.2e}"),
    )
    .and_then(|d| within_time(start, Duration::from_secs(10), d))
}

fn bsm_determinism() -> Outcome {
    let layout = WriteLayout::new(3).unwrap();
    let reg = layout.registry();
    let one = |m| PureState::basis(reg, &[(m, 1)]).unwrap();
    let (ha, va, hb, vb) = (
        one(&layout.a.h),
        one(&layout.a.v),
        one(&layout.b.h),
        one(&layout.b.v),
    );
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let neg = C64::new(-1.0, 0.0);
    let bells = [
        hb.plus(&va).unwrap(),
        hb.plus(&va.scaled(neg)).unwrap(),
        ha.plus(&vb).unwrap(),
        ha.plus(&vb.scaled(neg)).unwrap(),
    ];
    let detectors = layout.detectors();
    let mut worst = 0.0f64;
    let mut routed = true;
    for (j, bell) in bells.iter().enumerate() {
        let out = bsm(&bell.scaled(s), &layout).unwrap().state;
        let mut on_target = 0.0;
        for (occ, amp) in out.components() {
            let hits: Vec<u8> = detectors
                .iter()
                .map(|d| occ[reg.index_of(d).unwrap()])
                .collect();
            if hits.iter().enumerate().all(|(k, &n)| n == (k == j) as u8) {
                on_target += amp.norm_sqr();
            } else {
                worst = worst.max(amp.norm());
            }
        }
        let mut pattern = vec![0u8; 4];
        pattern[j] = 1;
        routed &= (on_target - 1.0).abs() < 1e-12
            && classify(&ClickPattern::from_counts(&pattern)) == BellOutcome::SUCCESSES[j];
    }
    check(
        worst < 1e-12 && routed,
        format!(
            "Psi+ -> D1, Psi- -> D2, Phi+ -> D3, Phi- -> D4; max off-target amplitude {worst:.2e}"
        ),
    )
}

fn remote() -> Outcome {
    let start = Instant::now();
    let layout = RemoteLayout::new(3).unwrap();
    let (alpha, beta) = (C64::new(0.6, 0.0), C64::from_polar(0.8, 2.1));
    let target = layout
        .r_map()
        .state(layout.r_registry(), alpha, beta)
        .unwrap();
    let rt = remote_transfer(alpha, beta, &layout).map_err(|e| e.to_string())?;
    let mut worst_f = 0.0f64;
    for class in rt.classes.iter().filter(|c| c.success) {
        let fixed = apply_phase_mark(
            class.r_state.as_ref().unwrap(),
            class.phase_mark.unwrap(),
            &layout.r_map(),
        )
        .unwrap();
        worst_f = worst_f.max((fidelity_pure(&fixed, &target).unwrap() - 1.0).abs());
    }
    let noise = NoiseParams {
        chi: 0.5,
        ..NoiseParams::default()
    };
    let stats = run_remote_trials(&RunConfig::new(100_000, 2026, alpha, beta, noise).unwrap())
        .map_err(|e| e.to_string())?;
    let se = (0.125f64 * 0.875 / 1e5).sqrt();
    let z = (stats.success_rate.value - 0.125) / se;
    let ok = (rt.success_probability - 0.5).abs() < 1e-12 && worst_f < 1e-10 && z.abs() <= 3.0;
    check(
        ok,
        format!(
            "P(success) = {:.15}, max |F - 1| = {worst_f:.2e}, sampled rate at eta' = 0.5: {:.5} ({z:+.2} sigma)",
            rt.success_probability, stats.success_rate.value
        ),
    )
    .and_then(|d| within_time(start, Duration::from_secs(60), d))
}

fn envelope() -> Outcome {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let mut parts = Vec::new();
    let mut ok = true;
    for pc in [1e-3, 5e-3, 1e-2, 5e-2] {
        let noise = NoiseParams {
            pc,
            p_dc: 0.0,
            eta_d: 1.0,
            ..NoiseParams::default()
        };
        let r = end_to_end_fidelity(&noise, s, s).map_err(|e| e.to_string())?;
        let ratio = r.delta_f / pc;
        ok &= (0.5..=2.0).contains(&ratio);
        parts.push(format!("{pc}: {ratio:.3}"));
    }
    check(ok, format!("dF/pc = {}", parts.join(", ")))
}

fn oracle() -> Outcome {
    let mut worst = 0.0f64;
    let write = WriteLayout::new(3).unwrap();
    let (alpha, beta) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
    worst = worst.max(common::compare_circuit(
        &write.source_state(0.2, 2).unwrap(),
        &write.entangling_optics().unwrap(),
    ));
    let heralded = generate_entanglement(0.2, &write).unwrap().state.unwrap();
    let mut chain = vec![write.encoder(alpha, beta).unwrap()];
    chain.extend(write.analyser_optics().unwrap());
    worst = worst.max(common::compare_circuit(&heralded, &chain));
    let remote = RemoteLayout::new(3).unwrap();
    worst = worst.max(common::compare_circuit(
        &remote.input_state(alpha, beta).unwrap(),
        &remote.circuit().unwrap(),
    ));
    let read = ReadLayout::new(3).unwrap();
    let stored = read
        .photonic_map()
        .state(read.registry(), alpha, beta)
        .unwrap();
    let mut readout = vec![dfs_sim::optics::pbs(
        &read.x_h, &read.x_v, &read.y_h, &read.y_v, &read.x_h, &read.x_v, &read.y_h, &read.y_v,
    )
    .unwrap()];
    readout.extend(read.correction(PauliMark::ZX).unwrap());
    worst = worst.max(common::compare_circuit(&stored, &readout));

    let noise = NoiseParams {
        pc: 0.05,
        eta_d: 0.8,
        p_dc: 1e-3,
        ..NoiseParams::default()
    };
    let cfg = RunConfig::new(100_000, 2026, alpha, beta, noise).unwrap();
    let w = oracle_check(&cfg, Experiment::Write, 3.0).map_err(|e| e.to_string())?;
    let r = oracle_check(&cfg, Experiment::Remote, 3.0).map_err(|e| e.to_string())?;
    let max_z = w
        .entries
        .iter()
        .chain(&r.entries)
        .filter(|e| e.se > 0.0)
        .map(|e| ((e.empirical - e.expected) / e.se).abs())
        .fold(0.0, f64::max);
    check(
        worst < 1e-12 && w.passed() && r.passed(),
        format!(
            "max sparse/dense deviation {worst:.2e}, max Monte Carlo deviation {max_z:.2} sigma"
        ),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dfs-sim");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands = [
        "entangle",
        "teleport",
        "read",
        "remote-transfer",
        "curves-fig4a",
        "curves-fig4b",
        "bsm-stats",
        "oracle-check",
    ];
    for cmd in commands {
        let mut outputs = Vec::new();
        for threads in [1, 8] {
            let path = dir.path().join(format!("{cmd}-{threads}.out"));
            let status = Process::new(bin)
                .args([
                    cmd,
                    "--seed=77",
                    "--trials=5000",
                    "--pc=0.05",
                    "--eta-d=0.9",
                    "--p-dc=1e-4",
                ])
                .arg(format!("--threads={threads}"))
                .arg(format!("--output={}", path.display()))
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{cmd} exited with {:?}", status.status.code()));
            }
            outputs.push(fs::read(&path).map_err(|e| e.to_string())?);
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Err(format!("{cmd}: outputs differ between 1 and 8 threads"));
        }
    }
    Ok(format!(
        "{} commands byte-identical at 1 and 8 threads",
        commands.len()
    ))
}

fn dfs() -> Outcome {
    let layout = WriteLayout::new(3).unwrap();
    let map = layout.logical_map();
    let s = map
        .state(
            layout.atomic_registry(),
            C64::new(0.6, 0.0),
            C64::from_polar(0.8, 0.9),
        )
        .unwrap();
    let mut worst = 0.0f64;
    for k in 0..16 {
        let theta = k as f64 * std::f64::consts::TAU / 16.0;
        let out = collective_dephasing(&s, theta, &map).unwrap();
        worst = worst.max((fidelity_pure(&out, &s).unwrap() - 1.0).abs());
    }
    let single = dfs_sim::optics::phase_shift(
        std::slice::from_ref(&layout.s_l),
        std::f64::consts::FRAC_PI_2,
    )
    .unwrap();
    let control = fidelity_pure(&s.apply_unitary(&single).unwrap(), &s).unwrap();
    check(
        worst <= 4.0 * f64::EPSILON && control < 0.99,
        format!("max |F - 1| over 16 phases = {worst:.2e}; single-rail control F = {control:.4}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fig4a endpoint", fig4a),
        ("fig4b sensitivity", fig4b),
        ("teleportation identity", teleportation),
        ("BSM determinism", bsm_determinism),
        ("remote transfer", remote),
        ("dF ~ pc envelope", envelope),
        ("oracle equivalence", oracle),
        ("determinism", determinism),
        ("DFS property", dfs),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
