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

//! Command-line front end.
//!
//! Every parameter can come from a flat `key = value` file (`--config`) or
//! from a flag of the same name; flags win. Complex amplitudes are written
//! `re,im` or `amp@degrees`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Result, SimError};
use crate::fock::C64;
use crate::noise::{self, NoiseParams};
use crate::protocol::{self, BellOutcome, ReadLayout, RemoteLayout, WriteLayout};
use crate::trials::{self, Experiment, RunConfig, RunStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "DFS_SIM_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    #[value(name = "entangle")]
    Entangle,
    #[value(name = "teleport")]
    Teleport,
    #[value(name = "read")]
    Read,
    #[value(name = "remote-transfer")]
    RemoteTransfer,
    #[value(name = "curves-fig4a")]
    CurvesFig4a,
    #[value(name = "curves-fig4b")]
    CurvesFig4b,
    #[value(name = "bsm-stats")]
    BsmStats,
    #[value(name = "oracle-check")]
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Entangle => "entangle",
            Command::Teleport => "teleport",
            Command::Read => "read",
            Command::RemoteTransfer => "remote-transfer",
            Command::CurvesFig4a => "curves-fig4a",
            Command::CurvesFig4b => "curves-fig4b",
            Command::BsmStats => "bsm-stats",
            Command::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dfs-sim",
    version,
    about = "Decoherence-free ensemble memory simulator"
)]
#[command(allow_negative_numbers = true)]
struct Args {
    command: Command,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pc: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    chi: Option<String>,
    #[arg(long)]
    eta_d: Option<String>,
    #[arg(long)]
    p_dc: Option<String>,
    #[arg(long)]
    l0: Option<String>,
    #[arg(long)]
    l_att: Option<String>,
    #[arg(long)]
    f_p: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    truncation: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    eta_prime: Option<String>,
    #[arg(long)]
    t_min: Option<String>,
    #[arg(long)]
    t_max: Option<String>,
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    t_values: Option<String>,
    #[arg(long)]
    eta_min: Option<String>,
    #[arg(long)]
    eta_max: Option<String>,
    #[arg(long)]
    efficiency: Option<String>,
    #[arg(long)]
    sigmas: Option<String>,
}

impl Args {
    fn values(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("pc", &self.pc),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("chi", &self.chi),
            ("eta-d", &self.eta_d),
            ("p-dc", &self.p_dc),
            ("l0", &self.l0),
            ("l-att", &self.l_att),
            ("f-p", &self.f_p),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("truncation", &self.truncation),
            ("output", &self.output),
            ("format", &self.format),
            ("threads", &self.threads),
            ("eta-prime", &self.eta_prime),
            ("t-min", &self.t_min),
            ("t-max", &self.t_max),
            ("points", &self.points),
            ("t-values", &self.t_values),
            ("eta-min", &self.eta_min),
            ("eta-max", &self.eta_max),
            ("efficiency", &self.efficiency),
            ("sigmas", &self.sigmas),
        ]
    }
}

/// A rejected configuration, naming the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub noise: NoiseParams,
    pub alpha: C64,
    pub beta: C64,
    pub trials: u64,
    pub seed: u64,
    pub truncation: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
    pub eta_prime: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub t_values: Vec<f64>,
    pub eta_min: f64,
    pub eta_max: f64,
    pub efficiency: f64,
    pub sigmas: f64,
}

impl CliConfig {
    pub fn run_config(&self) -> Result<RunConfig> {
        RunConfig::new(self.trials, self.seed, self.alpha, self.beta, self.noise)
    }
}

/// Parses `re,im` or `amp@degrees`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    if let Some((amp, deg)) = s.split_once('@') {
        return Ok(C64::from_polar(num(amp)?, num(deg)?.to_radians()));
    }
    match s.split_once(',') {
        Some((re, im)) => Ok(C64::new(num(re)?, num(im)?)),
        None => Ok(C64::new(num(s)?, 0.0)),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> std::result::Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| cfg_err("config", format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err("config", format!("line {}: expected key = value", no + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

struct Raw(BTreeMap<String, String>);

impl Raw {
    fn get<T>(
        &self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> std::result::Result<T, ConfigError> {
        match self.0.get(key) {
            Some(v) => parse(v).map_err(|e| cfg_err(key, e)),
            None => Ok(default),
        }
    }

    fn num<T: std::str::FromStr>(
        &self,
        key: &str,
        default: T,
    ) -> std::result::Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key, default, |v| {
            v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
        })
    }
}

fn default_seed() -> std::result::Result<u64, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| cfg_err(SEED_ENV, format!("`{v}`: {e}"))),
        Err(_) => Ok(0),
    }
}

/// Parses `argv` (including the program name). Values from `config_file`
/// or `--config` are loaded first; flags override them.
pub fn parse_config<I, S>(
    argv: I,
    config_file: Option<&Path>,
) -> std::result::Result<CliConfig, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)
        .map_err(|e| cfg_err("argv", e.to_string().trim().to_string()))?;
    let mut raw = BTreeMap::new();
    for path in [config_file.map(Path::to_path_buf), args.config.clone()]
        .into_iter()
        .flatten()
    {
        raw.extend(read_config_file(&path)?);
    }
    for (key, value) in args.values() {
        if let Some(v) = value {
            raw.insert(key.to_string(), v.clone());
        }
    }
    let known: Vec<&str> = args.values().iter().map(|(k, _)| *k).collect();
    if let Some(k) = raw.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(cfg_err(k, "unknown key"));
    }
    resolve(args.command, Raw(raw))
}

fn resolve(command: Command, raw: Raw) -> std::result::Result<CliConfig, ConfigError> {
    let d = NoiseParams::default();
    let noise = NoiseParams {
        pc: raw.num("pc", d.pc)?,
        chi: raw.num("chi", d.chi)?,
        eta_d: raw.num("eta-d", d.eta_d)?,
        p_dc: raw.num("p-dc", d.p_dc)?,
        l0: raw.num("l0", d.l0)?,
        l_att: raw.num("l-att", d.l_att)?,
        f_p: raw.num("f-p", d.f_p)?,
    };
    let half = C64::new(FRAC_1_SQRT_2, 0.0);
    let default_format = match command {
        Command::CurvesFig4a | Command::CurvesFig4b => Format::Csv,
        _ => Format::Json,
    };
    let threads_default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut cfg = CliConfig {
        command,
        noise,
        alpha: raw.get("alpha", half, parse_complex)?,
        beta: raw.get("beta", half, parse_complex)?,
        trials: raw.num("trials", 10_000)?,
        seed: match raw.0.contains_key("seed") {
            true => raw.num("seed", 0)?,
            false => default_seed()?,
        },
        truncation: raw.num("truncation", 3)?,
        output: raw.0.get("output").map(PathBuf::from),
        format: raw.get("format", default_format, |v| Format::from_str(v, true))?,
        threads: raw.num("threads", threads_default)?,
        eta_prime: raw.num("eta-prime", 1.0 / 3.0)?,
        t_min: raw.num("t-min", 5e-6)?,
        t_max: raw.num("t-max", 5e-5)?,
        points: raw.num("points", 100)?,
        t_values: raw.get("t-values", vec![2e-5, 3e-5, 4e-5], parse_list)?,
        eta_min: raw.num("eta-min", 0.1)?,
        eta_max: raw.num("eta-max", 1.0)?,
        efficiency: raw.num("efficiency", 1.0)?,
        sigmas: raw.num("sigmas", 3.0)?,
    };
    validate(&mut cfg, &raw)?;
    Ok(cfg)
}

/// Amplitudes typed with a few digits are accepted and rescaled when their
/// norm is this close to one.
pub const AMPLITUDE_SLACK: f64 = 1e-3;

fn validate(cfg: &mut CliConfig, raw: &Raw) -> std::result::Result<(), ConfigError> {
    let norm = cfg.alpha.norm_sqr() + cfg.beta.norm_sqr();
    if (norm - 1.0).abs() > AMPLITUDE_SLACK {
        let field = if raw.0.contains_key("beta") {
            "beta"
        } else {
            "alpha"
        };
        return Err(cfg_err(
            field,
            format!("|alpha|^2 + |beta|^2 = {norm}, expected 1"),
        ));
    }
    if (norm - 1.0).abs() > 1e-12 {
        cfg.alpha /= norm.sqrt();
        cfg.beta /= norm.sqrt();
    }
    cfg.noise.validate().map_err(|e| match e {
        SimError::InvalidParameter { name, reason } => cfg_err(&name.replace('_', "-"), reason),
        other => cfg_err("noise", other.to_string()),
    })?;
    let checks: [(&str, bool, &str); 10] = [
        ("trials", cfg.trials >= 1, "need at least one trial"),
        (
            "truncation",
            (2..=255).contains(&cfg.truncation),
            "must lie in 2..=255",
        ),
        ("threads", cfg.threads >= 1, "need at least one thread"),
        ("points", cfg.points >= 1, "need at least one point"),
        (
            "eta-prime",
            cfg.eta_prime > 0.0 && cfg.eta_prime <= 1.0,
            "must lie in (0, 1]",
        ),
        ("t-min", cfg.t_min > 0.0, "must be positive"),
        ("t-max", cfg.t_max >= cfg.t_min, "must not be below t-min"),
        (
            "t-values",
            !cfg.t_values.is_empty() && cfg.t_values.iter().all(|&t| t > 0.0),
            "must be positive",
        ),
        (
            "eta-min",
            cfg.eta_min > 0.0 && cfg.eta_min <= cfg.eta_max && cfg.eta_max <= 1.0,
            "need 0 < eta-min <= eta-max <= 1",
        ),
        (
            "efficiency",
            (0.0..=1.0).contains(&cfg.efficiency),
            "must lie in [0, 1]",
        ),
    ];
    for (field, ok, message) in checks {
        if !ok {
            return Err(cfg_err(field, message));
        }
    }
    if cfg.sigmas.is_nan() || cfg.sigmas <= 0.0 {
        return Err(cfg_err("sigmas", "must be positive"));
    }
    Ok(())
}

fn render_complex(z: C64) -> String {
    format!("{},{}", z.re, z.im)
}

/// Argument vector that parses back to `cfg`. Uses `--flag=value` so that
/// negative numbers survive.
pub fn render(cfg: &CliConfig) -> Vec<String> {
    let n = &cfg.noise;
    let list = cfg
        .t_values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let mut pairs = vec![
        ("pc", n.pc.to_string()),
        ("alpha", render_complex(cfg.alpha)),
        ("beta", render_complex(cfg.beta)),
        ("chi", n.chi.to_string()),
        ("eta-d", n.eta_d.to_string()),
        ("p-dc", n.p_dc.to_string()),
        ("l0", n.l0.to_string()),
        ("l-att", n.l_att.to_string()),
        ("f-p", n.f_p.to_string()),
        ("trials", cfg.trials.to_string()),
        ("seed", cfg.seed.to_string()),
        ("truncation", cfg.truncation.to_string()),
        ("format", cfg.format.name().to_string()),
        ("threads", cfg.threads.to_string()),
        ("eta-prime", cfg.eta_prime.to_string()),
        ("t-min", cfg.t_min.to_string()),
        ("t-max", cfg.t_max.to_string()),
        ("points", cfg.points.to_string()),
        ("t-values", list),
        ("eta-min", cfg.eta_min.to_string()),
        ("eta-max", cfg.eta_max.to_string()),
        ("efficiency", cfg.efficiency.to_string()),
        ("sigmas", cfg.sigmas.to_string()),
    ];
    if let Some(out) = &cfg.output {
        pairs.push(("output", out.display().to_string()));
    }
    let mut argv = vec!["dfs-sim".to_string(), cfg.command.name().to_string()];
    argv.extend(pairs.into_iter().map(|(k, v)| format!("--{k}={v}")));
    argv
}

/// Rendered artifact plus the one-line summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub body: String,
    pub summary: String,
    /// False when the command ran but its check did not pass.
    pub ok: bool,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s =
        serde_json::to_string_pretty(value).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"));
    s.push('\n');
    s
}

fn stats_csv(stats: &RunStats) -> String {
    let mut rows = vec!["quantity,value,se".to_string()];
    let mut push = |name: &str, e: &trials::Estimate| {
        rows.push(format!("{name},{},{}", sci(e.value), sci(e.se)))
    };
    push("success_rate", &stats.success_rate);
    push("mean_rounds", &stats.mean_rounds);
    push("empirical_t_seconds", &stats.empirical_t_seconds);
    push("herald_rate_per_round", &stats.herald_rate_per_round);
    push(
        "mean_conditional_fidelity",
        &stats.mean_conditional_fidelity,
    );
    for (k, e) in &stats.outcome_frequencies {
        push(k, e);
    }
    rows.push(format!("trials,{},0", stats.trials));
    rows.push(format!("censored,{},0", stats.censored));
    rows.join("\n") + "\n"
}

fn key_value_csv(rows: &[(&str, f64)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{}\n", sci(*v)));
    }
    out
}

/// Executes the configured command and renders its artifact.
pub fn execute(cfg: &CliConfig) -> Result<Artifact> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| crate::error::invalid("threads", e.to_string()))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &CliConfig) -> Result<Artifact> {
    let csv = cfg.format == Format::Csv;
    match cfg.command {
        Command::CurvesFig4a => {
            let ts = noise::linspace(cfg.t_min, cfg.t_max, cfg.points)?;
            let curve = noise::fidelity_vs_t(cfg.eta_prime, cfg.noise.f_p, &ts)?;
            let body = if csv {
                let mut s = String::from("T_seconds,F\n");
                for (t, f) in &curve {
                    s.push_str(&format!("{},{}\n", sci(*t), sci(*f)));
                }
                s
            } else {
                to_json(
                    &curve
                        .iter()
                        .map(|(t, f)| json!({"T_seconds": t, "F": f}))
                        .collect::<Vec<_>>(),
                )
            };
            let (t_last, f_last) = curve[curve.len() - 1];
            Ok(Artifact {
                body,
                summary: format!(
                    "curves-fig4a: {} points, F({t_last:.3e} s) = {f_last:.6}",
                    curve.len()
                ),
                ok: true,
            })
        }
        Command::CurvesFig4b => {
            let etas = noise::linspace(cfg.eta_min, cfg.eta_max, cfg.points)?;
            let mut rows = Vec::new();
            for &t in &cfg.t_values {
                for (eta, df) in noise::df_vs_eta(t, cfg.noise.f_p, &etas)? {
                    rows.push((eta, df, t));
                }
            }
            let body = if csv {
                let mut s = String::from("eta_prime,delta_F,T_seconds\n");
                for (eta, df, t) in &rows {
                    s.push_str(&format!("{},{},{}\n", sci(*eta), sci(*df), sci(*t)));
                }
                s
            } else {
                to_json(
                    &rows
                        .iter()
                        .map(|(e, d, t)| json!({"eta_prime": e, "delta_F": d, "T_seconds": t}))
                        .collect::<Vec<_>>(),
                )
            };
            Ok(Artifact {
                body,
                summary: format!(
                    "curves-fig4b: {} curves x {} points",
                    cfg.t_values.len(),
                    etas.len()
                ),
                ok: true,
            })
        }
        Command::Entangle => {
            let layout = WriteLayout::new(cfg.truncation)?;
            let ent = protocol::generate_entanglement(cfg.noise.pc, &layout)?;
            let ideal_fidelity = match &ent.state {
                Some(s) => crate::fock::fidelity_pure(s, &layout.ideal_entangled_state()?)?,
                None => 0.0,
            };
            let report = noise::end_to_end_fidelity(&cfg.noise, cfg.alpha, cfg.beta)?;
            let body = if csv {
                key_value_csv(&[
                    ("herald_probability", ent.herald_probability),
                    ("heralded_fidelity", ideal_fidelity),
                    ("p0", report.p0),
                    ("p1", report.p1),
                    ("po", report.po),
                    ("eta_prime", report.eta_prime),
                    ("t_seconds", report.t_seconds),
                    ("F", report.f),
                    ("delta_F", report.delta_f),
                    ("memory_fidelity", report.memory_fidelity),
                ])
            } else {
                to_json(&json!({
                    "herald_probability": ent.herald_probability,
                    "heralded_fidelity": ideal_fidelity,
                    "report": report,
                }))
            };
            Ok(Artifact {
                body,
                summary: format!(
                    "entangle: herald={:.6e} F={:.6} T={:.6e} s",
                    report.herald_probability, report.f, report.t_seconds
                ),
                ok: true,
            })
        }
        Command::Teleport => {
            let stats = trials::run_write_trials(&cfg.run_config()?)?;
            let body = if csv {
                stats_csv(&stats)
            } else {
                to_json(&stats)
            };
            Ok(Artifact {
                summary: format!(
                    "teleport: success_rate={:.6} F={:.6} T={:.6e} s",
                    stats.success_rate.value,
                    stats.mean_conditional_fidelity.value,
                    stats.empirical_t_seconds.value
                ),
                body,
                ok: true,
            })
        }
        Command::Read => {
            let write = WriteLayout::new(cfg.truncation)?;
            let read = ReadLayout::new(cfg.truncation)?;
            let target = read.target(cfg.alpha, cfg.beta)?;
            let mut rows = Vec::new();
            let mut mean = 0.0;
            for (p, record) in
                protocol::write_memory_branches(cfg.alpha, cfg.beta, cfg.noise.pc, &write)?
            {
                let out = protocol::read_memory(&record, cfg.efficiency, &read)?;
                let f = out.fidelity(&target)?;
                mean += p * f;
                rows.push((record.outcome.name(), p, f));
            }
            let body = if csv {
                let mut s = String::from("outcome,probability,fidelity\n");
                for (name, p, f) in &rows {
                    s.push_str(&format!("{name},{},{}\n", sci(*p), sci(*f)));
                }
                s
            } else {
                to_json(&json!({
                    "efficiency": cfg.efficiency,
                    "mean_fidelity": mean,
                    "branches": rows.iter().map(|(n, p, f)| json!({"outcome": n, "probability": p, "fidelity": f})).collect::<Vec<_>>(),
                }))
            };
            Ok(Artifact {
                body,
                summary: format!("read: efficiency={} F={mean:.6}", cfg.efficiency),
                ok: true,
            })
        }
        Command::RemoteTransfer => {
            let layout = RemoteLayout::new(cfg.truncation)?;
            let exact = protocol::remote_transfer(cfg.alpha, cfg.beta, &layout)?;
            let target = layout
                .r_map()
                .state(layout.r_registry(), cfg.alpha, cfg.beta)?;
            let mut classes = Vec::new();
            for class in &exact.classes {
                let fidelity = match (&class.r_state, class.phase_mark) {
                    (Some(s), Some(m)) => Some(crate::fock::fidelity_pure(
                        &protocol::apply_phase_mark(s, m, &layout.r_map())?,
                        &target,
                    )?),
                    _ => None,
                };
                classes.push((
                    class.clicks.to_string(),
                    class.probability,
                    class.success,
                    fidelity,
                ));
            }
            let stats = trials::run_remote_trials(&cfg.run_config()?)?;
            let body = if csv {
                let mut s = String::from("clicks,probability,success,fidelity\n");
                for (c, p, ok, f) in &classes {
                    let f = f.map_or(String::new(), sci);
                    s.push_str(&format!("{c},{},{ok},{f}\n", sci(*p)));
                }
                s
            } else {
                to_json(&json!({
                    "exact_success_probability": exact.success_probability,
                    "classes": classes.iter().map(|(c, p, ok, f)| json!({"clicks": c, "probability": p, "success": ok, "fidelity": f})).collect::<Vec<_>>(),
                    "stats": stats,
                }))
            };
            Ok(Artifact {
                summary: format!(
                    "remote-transfer: success_rate={:.6} (exact {:.6}) F={:.6}",
                    stats.success_rate.value,
                    exact.success_probability,
                    stats.mean_conditional_fidelity.value
                ),
                body,
                ok: true,
            })
        }
        Command::BsmStats => {
            let layout = WriteLayout::new(cfg.truncation)?;
            let routing = bell_routing(&layout)?;
            let branches =
                protocol::write_memory_branches(cfg.alpha, cfg.beta, cfg.noise.pc, &layout)?;
            let outcomes: Vec<(&str, f64)> = branches
                .iter()
                .map(|(p, r)| (r.outcome.name(), *p))
                .collect();
            let body = if csv {
                let mut s = String::from("bell_state,D1,D2,D3,D4\n");
                for (name, probs) in &routing {
                    let cols: Vec<String> = probs.iter().map(|p| sci(*p)).collect();
                    s.push_str(&format!("{name},{}\n", cols.join(",")));
                }
                s
            } else {
                to_json(&json!({
                    "routing": routing.iter().map(|(n, p)| json!({"bell_state": n, "detectors": p})).collect::<Vec<_>>(),
                    "outcome_probabilities": outcomes.iter().map(|(n, p)| json!({"outcome": n, "probability": p})).collect::<Vec<_>>(),
                }))
            };
            let spread = outcomes
                .iter()
                .map(|(_, p)| (p - 0.25).abs())
                .fold(0.0, f64::max);
            Ok(Artifact {
                body,
                summary: format!("bsm-stats: max |P - 1/4| = {spread:.3e}"),
                ok: true,
            })
        }
        Command::OracleCheck => {
            let rc = cfg.run_config()?;
            let write = trials::oracle_check(&rc, Experiment::Write, cfg.sigmas)?;
            let remote = trials::oracle_check(&rc, Experiment::Remote, cfg.sigmas)?;
            let ok = write.passed() && remote.passed();
            let body = if csv {
                let mut s = String::from("experiment,quantity,empirical,expected,se,flagged\n");
                for (name, rep) in [("write", &write), ("remote", &remote)] {
                    for e in &rep.entries {
                        s.push_str(&format!(
                            "{name},{},{},{},{},{}\n",
                            e.quantity,
                            sci(e.empirical),
                            sci(e.expected),
                            sci(e.se),
                            e.flagged
                        ));
                    }
                }
                s
            } else {
                to_json(&json!({"write": write, "remote": remote, "passed": ok}))
            };
            let flagged = write.flagged().count() + remote.flagged().count();
            Ok(Artifact {
                body,
                summary: format!(
                    "oracle-check: {} ({flagged} flagged at {} sigma)",
                    if ok { "pass" } else { "FAIL" },
                    cfg.sigmas
                ),
                ok,
            })
        }
    }
}

/// Detector probabilities `D1..D4` for each Bell state of the polarisation
/// and path qubits of a single photon.
pub fn bell_routing(layout: &WriteLayout) -> Result<Vec<(&'static str, Vec<f64>)>> {
    let reg = layout.registry();
    let one = |m: &crate::fock::ModeLabel| crate::fock::PureState::basis(reg, &[(m, 1)]);
    let (ha, va, hb, vb) = (
        one(&layout.a.h)?,
        one(&layout.a.v)?,
        one(&layout.b.h)?,
        one(&layout.b.v)?,
    );
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let states = [
        ("PsiPlus", hb.plus(&va)?),
        ("PsiMinus", hb.plus(&va.scaled(C64::new(-1.0, 0.0)))?),
        ("PhiPlus", ha.plus(&vb)?),
        ("PhiMinus", ha.plus(&vb.scaled(C64::new(-1.0, 0.0)))?),
    ];
    let mut out = Vec::new();
    for (name, st) in states {
        let readout = protocol::bsm(&st.scaled(s), layout)?;
        let probs = (0..4)
            .map(|j| {
                let mut pattern = vec![0u8; 4];
                pattern[j] = 1;
                readout
                    .detector_probabilities
                    .get(&pattern)
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect();
        out.push((name, probs));
    }
    debug_assert!(out
        .iter()
        .zip(BellOutcome::SUCCESSES.iter())
        .all(|((n, _), o)| *n == o.name()));
    Ok(out)
}

fn write_artifact(cfg: &CliConfig, artifact: &Artifact) -> std::io::Result<()> {
    match &cfg.output {
        Some(path) => {
            fs::write(path, &artifact.body)?;
            println!("{}", artifact.summary);
        }
        None => {
            std::io::stdout().write_all(artifact.body.as_bytes())?;
            eprintln!("{}", artifact.summary);
        }
    }
    Ok(())
}

/// Entry point shared by the binary: parses, runs, writes, and returns the
/// process exit code.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    if let Err(e) = Args::try_parse_from(&argv) {
        if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) {
            print!("{e}");
            return 0;
        }
    }
    let cfg = match parse_config(argv, None) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cfg) {
        Ok(artifact) => {
            if let Err(e) = write_artifact(&cfg, &artifact) {
                eprintln!("cannot write output: {e}");
                return EXIT_FAILURE;
            }
            if artifact.ok {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            eprintln!("simulation failed: {e}");
            EXIT_FAILURE
        }
    }
}
