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

//! Seeded Monte Carlo over detector clicks.
//!
//! Each trial owns a ChaCha8 generator seeded with the master seed and
//! switched to stream number `trial_index`, so a run is a pure function of
//! the configuration no matter how trials are scheduled across threads.
//! Trials are evaluated in parallel, collected in index order, and reduced
//! sequentially.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::fock::{PureState, C64};
use crate::noise::{NoiseParams, PIPELINE_TRUNCATION};
use crate::protocol::{
    apply_logical_pauli, apply_phase_mark, classify, pauli_mark, remote_phase_mark, BellOutcome,
    ClickPattern, PauliMark, PhaseMark, RemoteLayout, WriteLayout,
};

/// Trials still without a herald after this many rounds are censored.
pub const ROUND_CAP: u64 = 10_000_000;

/// Non-number-resolving detector. `efficiency` is the overall survival of
/// each photon on its way to and through the detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_prob: f64,
}

impl DetectorSpec {
    pub fn new(efficiency: f64, dark_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(invalid(
                "efficiency",
                format!("{efficiency} outside [0, 1]"),
            ));
        }
        if !(0.0..=1.0).contains(&dark_prob) {
            return Err(invalid("dark_prob", format!("{dark_prob} outside [0, 1]")));
        }
        Ok(DetectorSpec {
            efficiency,
            dark_prob,
        })
    }

    pub fn ideal() -> Self {
        DetectorSpec {
            efficiency: 1.0,
            dark_prob: 0.0,
        }
    }

    pub fn from_noise(noise: &NoiseParams) -> Self {
        DetectorSpec {
            efficiency: noise.eta_prime(),
            dark_prob: noise.p_dc,
        }
    }

    /// Probability of a click given `n` incident photons.
    pub fn click_probability(&self, n: u8) -> f64 {
        1.0 - (1.0 - self.efficiency).powi(n as i32) * (1.0 - self.dark_prob)
    }

    fn fires<R: Rng + ?Sized>(&self, n: u8, rng: &mut R) -> bool {
        let survived =
            (0..n).any(|_| self.efficiency >= 1.0 || rng.random::<f64>() < self.efficiency);
        survived || (self.dark_prob > 0.0 && rng.random::<f64>() < self.dark_prob)
    }
}

/// Draws photon-count patterns from a table of Born probabilities.
#[derive(Clone, Debug)]
pub struct PatternSampler {
    patterns: Vec<Vec<u8>>,
    cumulative: Vec<f64>,
}

impl PatternSampler {
    pub fn new(probabilities: &BTreeMap<Vec<u8>, f64>) -> Result<Self> {
        let total: f64 = probabilities.values().sum();
        if (total - 1.0).abs() > 1e-9 || probabilities.values().any(|&p| p < 0.0) {
            return Err(SimError::ProbabilitySum(total));
        }
        let mut acc = 0.0;
        let mut patterns = Vec::with_capacity(probabilities.len());
        let mut cumulative = Vec::with_capacity(probabilities.len());
        for (pattern, p) in probabilities {
            acc += p / total;
            patterns.push(pattern.clone());
            cumulative.push(acc);
        }
        Ok(PatternSampler {
            patterns,
            cumulative,
        })
    }

    pub fn patterns(&self) -> &[Vec<u8>] {
        &self.patterns
    }

    /// Index into [`patterns`](Self::patterns) of a sampled pattern.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.patterns.len() - 1)
    }
}

/// Applies per-photon survival and dark counts to a photon pattern.
pub fn thin_pattern<R: Rng + ?Sized>(
    counts: &[u8],
    detectors: &[DetectorSpec],
    rng: &mut R,
) -> Result<ClickPattern> {
    if counts.len() != detectors.len() {
        return Err(invalid("detectors", "one spec per channel is required"));
    }
    Ok(ClickPattern(
        counts
            .iter()
            .zip(detectors)
            .map(|(&n, d)| d.fires(n, rng))
            .collect(),
    ))
}

/// Samples a photon pattern by the Born rule and turns it into clicks.
pub fn sample_detectors<R: Rng + ?Sized>(
    probabilities: &BTreeMap<Vec<u8>, f64>,
    detectors: &[DetectorSpec],
    rng: &mut R,
) -> Result<ClickPattern> {
    let sampler = PatternSampler::new(probabilities)?;
    let i = sampler.sample_index(rng);
    thin_pattern(&sampler.patterns[i], detectors, rng)
}

/// Generator of trial `trial_index` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Exact probability that the clicks are exactly `clicks`, summed over all
/// photon patterns.
pub fn exact_click_probability(
    probabilities: &BTreeMap<Vec<u8>, f64>,
    clicks: &[bool],
    detectors: &[DetectorSpec],
) -> f64 {
    probabilities
        .iter()
        .map(|(counts, p)| {
            p * counts
                .iter()
                .zip(clicks)
                .zip(detectors)
                .map(|((&n, &c), d)| {
                    let q = d.click_probability(n);
                    if c {
                        q
                    } else {
                        1.0 - q
                    }
                })
                .product::<f64>()
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trial_count: u64,
    pub master_seed: u64,
    pub alpha: C64,
    pub beta: C64,
    pub noise: NoiseParams,
    pub round_cap: u64,
}

impl RunConfig {
    pub fn new(
        trial_count: u64,
        master_seed: u64,
        alpha: C64,
        beta: C64,
        noise: NoiseParams,
    ) -> Result<Self> {
        let cfg = RunConfig {
            trial_count,
            master_seed,
            alpha,
            beta,
            noise,
            round_cap: ROUND_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trial_count == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        if self.round_cap == 0 {
            return Err(invalid("round_cap", "must be positive"));
        }
        let n = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(SimError::NotNormalized(n));
        }
        self.noise.validate()
    }

    fn detectors(&self) -> Vec<DetectorSpec> {
        vec![DetectorSpec::from_noise(&self.noise); 4]
    }
}

/// A value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn proportion(k: u64, n: u64) -> Self {
        if n == 0 {
            return Estimate {
                value: f64::NAN,
                se: f64::NAN,
            };
        }
        let p = k as f64 / n as f64;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    fn mean(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count();
        if n == 0 {
            return Estimate {
                value: f64::NAN,
                se: f64::NAN,
            };
        }
        let m = xs.clone().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            value: m,
            se: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub trials: u64,
    pub successes: u64,
    pub censored: u64,
    pub total_rounds: u64,
    pub success_rate: Estimate,
    pub mean_rounds: Estimate,
    pub empirical_t_seconds: Estimate,
    pub herald_rate_per_round: Estimate,
    /// Frequencies among successful trials.
    pub outcome_frequencies: BTreeMap<String, Estimate>,
    pub mean_conditional_fidelity: Estimate,
}

/// Per-trial summary, suitable for streaming.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub rounds: u64,
    /// Outcome name, or `None` when censored or failed.
    pub outcome: Option<String>,
    pub fidelity: Option<f64>,
    pub censored: bool,
}

fn aggregate(trials: &[TrialSummary], f_p: f64, outcome_names: &[String]) -> RunStats {
    let n = trials.len() as u64;
    let ok: Vec<&TrialSummary> = trials.iter().filter(|t| t.outcome.is_some()).collect();
    let successes = ok.len() as u64;
    let censored = trials.iter().filter(|t| t.censored).count() as u64;
    let total_rounds: u64 = trials.iter().map(|t| t.rounds).sum();
    let mean_rounds = Estimate::mean(ok.iter().map(|t| t.rounds as f64));
    let mut outcome_frequencies = BTreeMap::new();
    for name in outcome_names {
        let k = ok
            .iter()
            .filter(|t| t.outcome.as_deref() == Some(name.as_str()))
            .count() as u64;
        outcome_frequencies.insert(name.clone(), Estimate::proportion(k, successes));
    }
    RunStats {
        trials: n,
        successes,
        censored,
        total_rounds,
        success_rate: Estimate::proportion(successes, n),
        empirical_t_seconds: Estimate {
            value: mean_rounds.value / f_p,
            se: mean_rounds.se / f_p,
        },
        mean_rounds,
        herald_rate_per_round: Estimate::proportion(successes, total_rounds),
        outcome_frequencies,
        mean_conditional_fidelity: Estimate::mean(ok.iter().filter_map(|t| t.fidelity)),
    }
}

/// Fidelity with `target` of each pattern's conditional state after each
/// correction, indexed like the sampler's patterns.
fn fidelity_table<M: Copy>(
    patterns: &[Vec<u8>],
    marks: &[M],
    conditional: impl Fn(&[u8]) -> Result<Option<PureState>>,
    correct: impl Fn(&PureState, M) -> Result<PureState>,
    target: &PureState,
) -> Result<Vec<Vec<f64>>> {
    patterns
        .iter()
        .map(|p| match conditional(p)? {
            Some(state) => marks
                .iter()
                .map(|&m| Ok(correct(&state, m)?.inner(target)?.norm_sqr()))
                .collect(),
            None => Ok(vec![0.0; marks.len()]),
        })
        .collect()
}

const MARKS: [PauliMark; 4] = [PauliMark::I, PauliMark::Z, PauliMark::X, PauliMark::ZX];

struct WriteModel {
    sampler: PatternSampler,
    probabilities: BTreeMap<Vec<u8>, f64>,
    fidelity: Vec<Vec<f64>>,
}

fn write_model(cfg: &RunConfig) -> Result<WriteModel> {
    cfg.validate()?;
    let layout = WriteLayout::new(PIPELINE_TRUNCATION)?;
    let state = layout.unheralded_state(cfg.noise.pc, 2, cfg.alpha, cfg.beta)?;
    let detectors = layout.detectors();
    let probabilities = state.born_probabilities(&detectors)?;
    let sampler = PatternSampler::new(&probabilities)?;
    let map = layout.logical_map();
    let target = map.state(layout.atomic_registry(), cfg.alpha, cfg.beta)?;
    let fidelity = fidelity_table(
        sampler.patterns(),
        &MARKS,
        |p| {
            let (proj, w) = state.project_pattern(&detectors, p)?;
            if w == 0.0 {
                return Ok(None);
            }
            Ok(Some(proj.remap(layout.atomic_registry())?.normalize()?))
        },
        |s, m| apply_logical_pauli(s, m, &map),
        &target,
    )?;
    Ok(WriteModel {
        sampler,
        probabilities,
        fidelity,
    })
}

fn outcome_names() -> Vec<String> {
    BellOutcome::SUCCESSES
        .iter()
        .map(|o| o.name().to_string())
        .collect()
}

/// Runs `trial_count` memory writes. Each trial repeats Raman rounds until
/// exactly one analyser detector fires, then records the outcome and the
/// fidelity of the corrected stored qubit.
pub fn run_write_trials(cfg: &RunConfig) -> Result<RunStats> {
    Ok(run_write_trial_records(cfg)?.0)
}

pub fn run_write_trial_records(cfg: &RunConfig) -> Result<(RunStats, Vec<TrialSummary>)> {
    let model = write_model(cfg)?;
    let detectors = cfg.detectors();
    let trials = (0..cfg.trial_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.master_seed, i);
            let mut rounds = 0;
            while rounds < cfg.round_cap {
                rounds += 1;
                let idx = model.sampler.sample_index(&mut rng);
                let clicks = thin_pattern(&model.sampler.patterns()[idx], &detectors, &mut rng)?;
                if let Some(j) = clicks.single() {
                    let outcome = classify(&clicks);
                    let mark = pauli_mark(&outcome)?;
                    let fidelity =
                        model.fidelity[idx][MARKS.iter().position(|&m| m == mark).unwrap_or(0)];
                    debug_assert_eq!(BellOutcome::from_detector(j), Some(outcome.clone()));
                    return Ok(TrialSummary {
                        trial: i,
                        rounds,
                        outcome: Some(outcome.name().to_string()),
                        fidelity: Some(fidelity),
                        censored: false,
                    });
                }
            }
            Ok(TrialSummary {
                trial: i,
                rounds,
                outcome: None,
                fidelity: None,
                censored: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate(&trials, cfg.noise.f_p, &outcome_names()), trials))
}

/// Exact values the Monte Carlo estimates converge to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub success_rate: f64,
    pub herald_rate_per_round: f64,
    pub outcome_probabilities: BTreeMap<String, f64>,
}

pub fn exact_write_distribution(cfg: &RunConfig) -> Result<ExactDistribution> {
    let model = write_model(cfg)?;
    let detectors = cfg.detectors();
    let mut per_outcome = BTreeMap::new();
    let mut herald = 0.0;
    for j in 0..4 {
        let mut clicks = vec![false; 4];
        clicks[j] = true;
        let p = exact_click_probability(&model.probabilities, &clicks, &detectors);
        herald += p;
        per_outcome.insert(BellOutcome::SUCCESSES[j].name().to_string(), p);
    }
    if herald == 0.0 {
        return Err(SimError::ZeroNorm);
    }
    for p in per_outcome.values_mut() {
        *p /= herald;
    }
    let success_rate = 1.0 - (1.0 - herald).powf(cfg.round_cap as f64);
    Ok(ExactDistribution {
        success_rate,
        herald_rate_per_round: herald,
        outcome_probabilities: per_outcome,
    })
}

struct RemoteModel {
    sampler: PatternSampler,
    probabilities: BTreeMap<Vec<u8>, f64>,
    fidelity: Vec<Vec<f64>>,
}

const PHASE_MARKS: [PhaseMark; 2] = [PhaseMark::None, PhaseMark::Pi];

fn remote_model(cfg: &RunConfig) -> Result<RemoteModel> {
    cfg.validate()?;
    let layout = RemoteLayout::new(3)?;
    let post = layout.post_circuit_state(cfg.alpha, cfg.beta)?;
    let probabilities = post.born_probabilities(&layout.detectors())?;
    let sampler = PatternSampler::new(&probabilities)?;
    let map = layout.r_map();
    let target = map.state(layout.r_registry(), cfg.alpha, cfg.beta)?;
    let fidelity = fidelity_table(
        sampler.patterns(),
        &PHASE_MARKS,
        |p| Ok(layout.conditional_r_state(&post, p)?.map(|(s, _)| s)),
        |s, m| apply_phase_mark(s, m, &map),
        &target,
    )?;
    Ok(RemoteModel {
        sampler,
        probabilities,
        fidelity,
    })
}

fn all_click_patterns() -> Vec<ClickPattern> {
    (0..16u8)
        .map(|b| ClickPattern((0..4).map(|i| b >> i & 1 == 1).collect()))
        .collect()
}

fn remote_success_names() -> Vec<String> {
    all_click_patterns()
        .into_iter()
        .filter(|c| remote_phase_mark(c).is_some())
        .map(|c| c.to_string())
        .collect()
}

/// Single-shot trials of the remote transfer; success is one click on each
/// side, followed by the phase correction of the click pattern.
pub fn run_remote_trials(cfg: &RunConfig) -> Result<RunStats> {
    Ok(run_remote_trial_records(cfg)?.0)
}

pub fn run_remote_trial_records(cfg: &RunConfig) -> Result<(RunStats, Vec<TrialSummary>)> {
    let model = remote_model(cfg)?;
    let detectors = cfg.detectors();
    let trials = (0..cfg.trial_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.master_seed, i);
            let idx = model.sampler.sample_index(&mut rng);
            let clicks = thin_pattern(&model.sampler.patterns()[idx], &detectors, &mut rng)?;
            let (outcome, fidelity) = match remote_phase_mark(&clicks) {
                Some(mark) => {
                    let m = PHASE_MARKS.iter().position(|&x| x == mark).unwrap_or(0);
                    (Some(clicks.to_string()), Some(model.fidelity[idx][m]))
                }
                None => (None, None),
            };
            Ok(TrialSummary {
                trial: i,
                rounds: 1,
                outcome,
                fidelity,
                censored: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        aggregate(&trials, cfg.noise.f_p, &remote_success_names()),
        trials,
    ))
}

pub fn exact_remote_distribution(cfg: &RunConfig) -> Result<ExactDistribution> {
    let model = remote_model(cfg)?;
    let detectors = cfg.detectors();
    let mut per_outcome = BTreeMap::new();
    let mut success = 0.0;
    for clicks in all_click_patterns()
        .into_iter()
        .filter(|c| remote_phase_mark(c).is_some())
    {
        let p = exact_click_probability(&model.probabilities, &clicks.0, &detectors);
        success += p;
        per_outcome.insert(clicks.to_string(), p);
    }
    if success > 0.0 {
        for p in per_outcome.values_mut() {
            *p /= success;
        }
    }
    Ok(ExactDistribution {
        success_rate: success,
        herald_rate_per_round: success,
        outcome_probabilities: per_outcome,
    })
}

/// Which experiment a configuration drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    Write,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub quantity: String,
    pub empirical: f64,
    pub expected: f64,
    pub se: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub insufficient_data: bool,
    pub entries: Vec<OracleEntry>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        !self.insufficient_data && self.entries.iter().all(|e| !e.flagged)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &OracleEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

/// Flags every empirical frequency further than `sigmas` standard errors
/// from its exact value. Standard errors come from the exact value, so a
/// frequency the oracle deems impossible is flagged as soon as it is seen.
pub fn compare_with_oracle(
    stats: &RunStats,
    exact: &ExactDistribution,
    sigmas: f64,
) -> OracleReport {
    if stats.trials == 0 || stats.successes == 0 {
        return OracleReport {
            insufficient_data: true,
            entries: vec![],
        };
    }
    let entry = |quantity: &str, empirical: f64, expected: f64, n: u64| {
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        let flagged =
            (empirical - expected).abs() > sigmas * se && (empirical - expected).abs() > 1e-12;
        OracleEntry {
            quantity: quantity.to_string(),
            empirical,
            expected,
            se,
            flagged,
        }
    };
    let mut entries = vec![
        entry(
            "success_rate",
            stats.success_rate.value,
            exact.success_rate,
            stats.trials,
        ),
        entry(
            "herald_rate_per_round",
            stats.herald_rate_per_round.value,
            exact.herald_rate_per_round,
            stats.total_rounds,
        ),
    ];
    for (name, &expected) in &exact.outcome_probabilities {
        let empirical = stats.outcome_frequencies.get(name).map_or(0.0, |e| e.value);
        entries.push(entry(name, empirical, expected, stats.successes));
    }
    OracleReport {
        insufficient_data: false,
        entries,
    }
}

/// Runs the experiment and checks it against its exact distribution.
pub fn oracle_check(cfg: &RunConfig, experiment: Experiment, sigmas: f64) -> Result<OracleReport> {
    if cfg.trial_count == 0 {
        return Ok(OracleReport {
            insufficient_data: true,
            entries: vec![],
        });
    }
    let (stats, exact) = match experiment {
        Experiment::Write => (run_write_trials(cfg)?, exact_write_distribution(cfg)?),
        Experiment::Remote => (run_remote_trials(cfg)?, exact_remote_distribution(cfg)?),
    };
    Ok(compare_with_oracle(&stats, &exact, sigmas))
}
