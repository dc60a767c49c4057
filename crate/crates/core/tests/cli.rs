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

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::process::Command as Process;

use dfs_sim::cli::{parse_complex, parse_config, render, Command, Format, EXIT_CONFIG};
use dfs_sim::C64;

const BIN: &str = env!("CARGO_BIN_EXE_dfs-sim");

fn argv(s: &str) -> Vec<String> {
    std::iter::once("dfs-sim".to_string())
        .chain(s.split_whitespace().map(String::from))
        .collect()
}

#[test]
fn parses_teleport_flags() {
    let cfg = parse_config(
        argv("teleport --alpha 0.7071,0 --beta 0,0.7071 --trials 100000 --seed 42"),
        None,
    )
    .unwrap();
    assert_eq!(cfg.command, Command::Teleport);
    assert!((cfg.alpha - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    assert!((cfg.beta - C64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
    assert_eq!((cfg.trials, cfg.seed), (100_000, 42));
    assert_eq!(cfg.format, Format::Json);
}

#[test]
fn parses_curve_grid() {
    let cfg = parse_config(
        argv("curves-fig4a --eta-prime 0.3333 --t-min 5e-6 --t-max 5e-5 --points 100"),
        None,
    )
    .unwrap();
    assert_eq!(cfg.command, Command::CurvesFig4a);
    assert_eq!(
        (cfg.eta_prime, cfg.t_min, cfg.t_max, cfg.points),
        (0.3333, 5e-6, 5e-5, 100)
    );
    assert_eq!(cfg.format, Format::Csv);
}

#[test]
fn polar_amplitudes() {
    let z = parse_complex("1@90").unwrap();
    assert!((z - C64::new(0.0, 1.0)).norm() < 1e-15);
    assert!(parse_complex("1,x").is_err());
}

#[test]
fn errors_name_the_field() {
    let e = parse_config(argv("teleport --beta 2,0"), None).unwrap_err();
    assert_eq!(e.field, "beta");
    let e = parse_config(argv("teleport --alpha 1,0 --beta 0.1,0"), None).unwrap_err();
    assert_eq!(e.field, "beta");
    let e = parse_config(argv("teleport --pc 0.7"), None).unwrap_err();
    assert_eq!(e.field, "pc");
    let e = parse_config(argv("teleport --trials many"), None).unwrap_err();
    assert_eq!(e.field, "trials");
    let e = parse_config(argv("teleport --bogus 1"), None).unwrap_err();
    assert_eq!(e.field, "argv");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "# defaults\npc = 0.02\nseed=5\neta_d = 0.9\n").unwrap();
    let cfg = parse_config(argv("entangle --seed 6"), Some(&path)).unwrap();
    assert_eq!((cfg.noise.pc, cfg.seed, cfg.noise.eta_d), (0.02, 6, 0.9));
    let via_flag =
        parse_config(argv(&format!("entangle --config {}", path.display())), None).unwrap();
    assert_eq!(via_flag.seed, 5);
    let cfg = parse_config(argv("entangle"), None).unwrap();
    assert_eq!(parse_config(render(&cfg), None).unwrap(), cfg);
}

#[test]
fn bad_config_exits_with_two() {
    let out = Process::new(BIN)
        .args(["teleport", "--beta", "2,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn fig4a_csv_contains_the_anchor_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig4a.csv");
    let out = Process::new(BIN)
        .args([
            "curves-fig4a",
            "--eta-prime",
            "0.3333333333333333",
            "--t-min",
            "5e-6",
            "--t-max",
            "5e-5",
            "--points",
            "100",
        ])
        .arg(format!("--output={}", path.display()))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("T_seconds,F"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, f) = l.split_once(',').unwrap();
            (t.parse().unwrap(), f.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 100);
    let anchor = rows
        .iter()
        .find(|(t, _)| (t - 1.5e-5).abs() < 1e-15)
        .unwrap();
    assert!((anchor.1 - 0.99).abs() < 1e-6);
}

#[test]
fn fig4b_header() {
    let out = Process::new(BIN)
        .args(["curves-fig4b", "--points", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("eta_prime,delta_F,T_seconds\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn teleport_json_has_run_stats_keys() {
    let out = Process::new(BIN)
        .args(["teleport", "--trials=4000", "--seed=1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in [
        "success_rate",
        "mean_rounds",
        "empirical_t_seconds",
        "outcome_frequencies",
        "mean_conditional_fidelity",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for f in v["outcome_frequencies"].as_object().unwrap().values() {
        let x = f["value"].as_f64().unwrap();
        assert!((x - 0.25).abs() < 4.0 * f["se"].as_f64().unwrap());
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |seed: &str| {
        Process::new(BIN)
            .env("DFS_SIM_SEED", seed)
            .args(["teleport", "--trials=200"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("12"), run("12"));
    assert_ne!(run("12"), run("13"));
}
