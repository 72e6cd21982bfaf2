//! Seeded command-line harness behind the `pe` binary.
//!
//! Every subcommand is a pure function of its resolved configuration: trial
//! `i` of a sweep point draws from `derive_stream(seed, tag, i)`, trials run on
//! a rayon pool, and results are gathered in trial order before anything is
//! written. Output is CSV preceded by one `#` line holding the tool version
//! and the resolved configuration as JSON.
//!
//! Options come from flags and, optionally, a JSON file (`--config`) whose
//! keys are the flag names without dashes; flags win.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;
use crate::fast::{self, RoundPlan};
use crate::infotheory::{self, ThetaMode};
use crate::kitaev::{self, ErrorRates};
use crate::phase::RationalPhase;
use crate::resources::{self, Algorithm, CostConstants, Model};
use crate::sparse::{self, AmplitudeAlphabet, ENUMERATION_LIMIT};
use crate::stats::wilson_interval;
use crate::stream::derive_stream;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_GUARD: u8 = 4;

/// Largest hypothesis count `t` for the likelihood decoder.
pub const MAX_HYPOTHESES: u64 = 1 << 24;
/// Largest gate list `--emit-circuit` will write, in measurements.
pub const MAX_CIRCUIT_MEASUREMENTS: u64 = 1 << 22;
/// Search caps for the budget comparison.
pub const MAX_KITAEV_S: u64 = 1024;
pub const MAX_FAST_S1: u64 = 256;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("guard violation: {0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Guard(_) => EXIT_GUARD,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Guard(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pe", version, about = "Phase estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random-measurement maximum-likelihood estimation of k/t.
    Infotheory(Invocation<InfoFlags>),
    /// Kitaev estimation of random m-bit phases.
    Kitaev(Invocation<KitaevFlags>),
    /// Multi-round fast estimation of random m-bit phases.
    Fast(Invocation<FastFlags>),
    /// Exact recovery of K-sparse Fourier signals through a one-bit channel.
    Sparse(Invocation<SparseFlags>),
    /// Depth, width, and size of both algorithms in three circuit models.
    Resources(Invocation<ResourcesFlags>),
}

#[derive(Debug, Args)]
pub struct Invocation<F: Args> {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub flags: F,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed (required here or in the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file of defaults keyed by flag name.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 or absent uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct InfoFlags {
    /// Moduli t (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<u64>>,
    /// Measurement counts s (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<usize>>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// `uniform` or `binary`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_mode: Option<ThetaMode>,
    /// Emit `k,posterior` for the first trial of the first sweep point.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub posterior: bool,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct KitaevFlags {
    /// Word lengths m (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    /// Repetitions per angle and position (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<u64>>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FastFlags {
    /// Word lengths m (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    /// Number of rounds (at least 2)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Round-one repetitions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1: Option<u64>,
    /// Sets per later round.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<u64>,
    /// Final-round set density.
    #[arg(long = "S")]
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub density: Option<usize>,
    /// Shots per set (even).
    #[arg(long = "C")]
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<u64>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Emit both algorithms' budgets at matched word success instead.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub compare_kitaev: bool,
    /// Word success the comparison must reach.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SparseFlags {
    /// Signal lengths t (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<u64>>,
    /// Sparsity bound.
    #[arg(long = "K")]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Amplitudes such as `1,-1` or `1+1i,-1i`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<String>,
    /// Measurement counts (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<usize>>,
    /// Monte Carlo trials per sweep point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ResourcesFlags {
    /// Word lengths m (comma list).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u64>>,
    /// Repetition count; derived from the cost constants when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    /// Write the sequential Kitaev gate list for the (single) m here.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit_circuit: Option<PathBuf>,
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn default_trials_info() -> u64 {
    200
}
fn default_trials() -> u64 {
    100
}
fn default_theta_mode() -> ThetaMode {
    ThetaMode::Uniform
}
fn default_rounds() -> usize {
    2
}
fn default_target() -> f64 {
    0.9
}
fn default_alphabet() -> String {
    "1,-1".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InfoConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub t: Vec<u64>,
    #[serde(deserialize_with = "one_or_many")]
    pub s: Vec<usize>,
    #[serde(default = "default_trials_info")]
    pub trials: u64,
    #[serde(default = "default_theta_mode")]
    pub theta_mode: ThetaMode,
    #[serde(default)]
    pub posterior: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KitaevConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub s: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FastConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub s1: Option<u64>,
    #[serde(default)]
    pub s2: Option<u64>,
    #[serde(default, rename = "S")]
    pub density: Option<usize>,
    #[serde(default, rename = "C")]
    pub c: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub compare_kitaev: bool,
    #[serde(default = "default_target")]
    pub target: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SparseConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub t: Vec<u64>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet: String,
    #[serde(deserialize_with = "one_or_many")]
    pub s: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ResourcesConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub m: Vec<u64>,
    #[serde(default)]
    pub s: Option<u64>,
    #[serde(default)]
    pub constants: CostConstants,
    pub seed: u64,
}

/// Where and how a run executes; never part of the recorded configuration.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub emit_circuit: Option<PathBuf>,
}

fn take_path(map: &mut Map<String, Value>, key: &str) -> CliResult<Option<PathBuf>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
        Some(v) => Err(CliError::Config(format!("{key} must be a string, got {v}"))),
    }
}

/// Overlays flags onto the config file and splits off the run settings.
pub fn resolve<F: Serialize, C: DeserializeOwned>(
    common: &Common,
    flags: &F,
) -> CliResult<(C, Settings)> {
    let mut map = match &common.config {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => {
                    return Err(CliError::Config(
                        "config file must hold a JSON object".into(),
                    ))
                }
                Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display()))),
            }
        }
    };
    let overlay = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?;
    if let Value::Object(overlay) = overlay {
        map.extend(overlay);
    }
    if let Some(seed) = common.seed {
        map.insert("seed".into(), seed.into());
    }
    let mut settings = Settings {
        out: take_path(&mut map, "out")?,
        emit_circuit: take_path(&mut map, "emit-circuit")?,
        threads: 0,
    };
    if let Some(out) = &common.out {
        settings.out = Some(out.clone());
    }
    let threads = map.remove("threads");
    settings.threads = match (common.threads, threads) {
        (Some(n), _) => n,
        (None, None) => 0,
        (None, Some(v)) => v
            .as_u64()
            .ok_or_else(|| CliError::Config(format!("threads must be a count, got {v}")))?
            as usize,
    };
    if !map.contains_key("seed") {
        return Err(CliError::Config("--seed is required".into()));
    }
    let config =
        serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((config, settings))
}

/// The `#` line that opens every output.
pub fn header_line<C: Serialize>(command: &str, config: &C) -> String {
    let record = serde_json::json!({
        "tool": "pe",
        "version": VERSION,
        "command": command,
        "config": config,
    });
    format!("# {record}\n")
}

/// CSV body under construction.
struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(columns: &[&str]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(columns).map_err(io_error)?;
        Ok(Table { writer })
    }

    fn row(&mut self, fields: &[String]) -> CliResult<()> {
        self.writer.write_record(fields).map_err(io_error)
    }

    fn finish(self, header: String) -> CliResult<Vec<u8>> {
        let body = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Io(e.to_string()))?;
        let mut out = header.into_bytes();
        out.extend(body);
        Ok(out)
    }
}

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn check_trials(trials: u64) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    Ok(())
}

fn rate_fields(successes: u64, trials: u64) -> [String; 4] {
    let (lo, hi) = wilson_interval(successes, trials);
    [
        successes.to_string(),
        (successes as f64 / trials as f64).to_string(),
        lo.to_string(),
        hi.to_string(),
    ]
}

/// Runs `trials` independent trials in parallel, results in trial order.
fn run_trials<T, F>(trials: u64, trial: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> crate::Result<T> + Sync + Send,
{
    Ok((0..trials)
        .into_par_iter()
        .map(trial)
        .collect::<crate::Result<Vec<T>>>()?)
}

fn info_tag(t: u64, s: usize) -> String {
    format!("infotheory/t={t}/s={s}")
}

pub fn cmd_infotheory(cfg: &InfoConfig) -> CliResult<Vec<u8>> {
    check_trials(cfg.trials)?;
    if let Some(&t) = cfg.t.iter().find(|&&t| t > MAX_HYPOTHESES) {
        return Err(CliError::Guard(format!("t = {t} exceeds {MAX_HYPOTHESES}")));
    }
    let header = header_line("infotheory", cfg);
    if cfg.posterior {
        let (&t, &s) = cfg
            .t
            .first()
            .zip(cfg.s.first())
            .ok_or_else(|| CliError::Config("posterior needs one t and one s".into()))?;
        let mut rng = derive_stream(cfg.seed, &info_tag(t, s), 0);
        let k = rng.gen_range(0..t);
        let phase = RationalPhase::new(k, t)?;
        let records = infotheory::simulate_records(&phase, s, cfg.theta_mode, &mut rng)?;
        let table = infotheory::accumulate_loglik(&records, t)?;
        let mut out = Table::new(&["k", "posterior"])?;
        for (k, p) in table.posterior().iter().enumerate() {
            out.row(&[k.to_string(), p.to_string()])?;
        }
        return out.finish(header);
    }
    let mut out = Table::new(&[
        "t",
        "s",
        "trials",
        "successes",
        "rate",
        "ci_lo",
        "ci_hi",
        "seed",
    ])?;
    for &t in &cfg.t {
        for &s in &cfg.s {
            let tag = info_tag(t, s);
            let wins = run_trials(cfg.trials, |i| {
                let mut rng = derive_stream(cfg.seed, &tag, i);
                let k = rng.gen_range(0..t.max(1));
                infotheory::run_trial_with(t, k, s, cfg.theta_mode, &mut rng).map(|o| o.success)
            })?;
            let successes = wins.iter().filter(|&&w| w).count() as u64;
            let mut row = vec![t.to_string(), s.to_string(), cfg.trials.to_string()];
            row.extend(rate_fields(successes, cfg.trials));
            row.push(cfg.seed.to_string());
            out.row(&row)?;
        }
    }
    out.finish(header)
}

/// Bit and word error rates of Kitaev estimation on stream tag `tag`.
pub fn kitaev_error_rates(
    m: usize,
    s: u64,
    trials: u64,
    seed: u64,
    tag: &str,
) -> crate::Result<ErrorRates> {
    let scores = (0..trials)
        .into_par_iter()
        .map(|i| kitaev::scored_trial(m, s, &mut derive_stream(seed, tag, i)))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(ErrorRates::from_scores(&scores))
}

pub fn cmd_kitaev(cfg: &KitaevConfig) -> CliResult<Vec<u8>> {
    check_trials(cfg.trials)?;
    let mut out = Table::new(&[
        "m",
        "s",
        "trials",
        "bit_error_rate",
        "word_error_rate",
        "seed",
    ])?;
    for &m in &cfg.m {
        for &s in &cfg.s {
            let rates =
                kitaev_error_rates(m, s, cfg.trials, cfg.seed, &format!("kitaev/m={m}/s={s}"))?;
            out.row(&[
                m.to_string(),
                s.to_string(),
                cfg.trials.to_string(),
                rates.bit_rate.to_string(),
                rates.word_rate.to_string(),
                cfg.seed.to_string(),
            ])?;
        }
    }
    out.finish(header_line("kitaev", cfg))
}

/// The default plan for `m` with any overrides applied. `s2` replaces every
/// later-round repetition count and `S` the final density.
pub fn fast_plan(m: usize, cfg: &FastConfig, s1: Option<u64>) -> crate::Result<RoundPlan> {
    let s1 = s1.or(cfg.s1);
    let plan = match (cfg.rounds, s1, cfg.s2, cfg.density, cfg.c) {
        (2, Some(s1), Some(s2), Some(d), Some(c)) => RoundPlan::two_round(s1, s2, d, c)?,
        _ => {
            let base = fast::default_plan(m, cfg.rounds)?;
            let mut s = base.s.clone();
            let mut densities = base.densities.clone();
            if let Some(x) = s1 {
                s[0] = x;
            }
            if let Some(x) = cfg.s2 {
                s[1..].iter_mut().for_each(|v| *v = x);
            }
            if let (Some(x), Some(last)) = (cfg.density, densities.last_mut()) {
                *last = x;
            }
            RoundPlan::new(s, densities, cfg.c.unwrap_or(base.c), base.epsilon)?
        }
    };
    plan.check_for(m)?;
    Ok(plan)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Smallest budget found by a first-passage scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedBudget {
    /// `s` for Kitaev, `s1` for fast estimation.
    pub repetitions: u64,
    pub success: f64,
    pub measurements: u64,
}

/// Raises `s` from 1 until Kitaev word success reaches `target`.
pub fn kitaev_matched_budget(
    m: usize,
    trials: u64,
    target: f64,
    seed: u64,
) -> crate::Result<Option<MatchedBudget>> {
    for s in 1..=MAX_KITAEV_S {
        let rates = kitaev_error_rates(m, s, trials, seed, &format!("compare/kitaev/m={m}/s={s}"))?;
        if 1.0 - rates.word_rate >= target {
            return Ok(Some(MatchedBudget {
                repetitions: s,
                success: 1.0 - rates.word_rate,
                measurements: 2 * m as u64 * s,
            }));
        }
    }
    Ok(None)
}

/// Raises `s1` from 1, other plan parameters fixed, until fast word success
/// reaches `target`.
pub fn fast_matched_budget(
    m: usize,
    cfg: &FastConfig,
    trials: u64,
    target: f64,
    seed: u64,
) -> crate::Result<Option<MatchedBudget>> {
    for s1 in 1..=MAX_FAST_S1 {
        let plan = fast_plan(m, cfg, Some(s1))?;
        let error = fast::word_error_rate(
            m,
            &plan,
            trials,
            seed,
            &format!("compare/fast/m={m}/s1={s1}"),
        )?;
        if 1.0 - error >= target {
            return Ok(Some(MatchedBudget {
                repetitions: s1,
                success: 1.0 - error,
                measurements: plan.measurement_count(m),
            }));
        }
    }
    Ok(None)
}

pub fn cmd_fast(cfg: &FastConfig) -> CliResult<Vec<u8>> {
    check_trials(cfg.trials)?;
    let header = header_line("fast", cfg);
    if cfg.compare_kitaev {
        if !(cfg.target > 0.0 && cfg.target <= 1.0) {
            return Err(CliError::Config("target must lie in (0, 1]".into()));
        }
        let mut out = Table::new(&[
            "m",
            "algorithm",
            "repetitions",
            "trials",
            "word_success",
            "total_measurements",
            "seed",
        ])?;
        for &m in &cfg.m {
            let found = [
                (
                    "kitaev",
                    kitaev_matched_budget(m, cfg.trials, cfg.target, cfg.seed)?,
                ),
                (
                    "fast",
                    fast_matched_budget(m, cfg, cfg.trials, cfg.target, cfg.seed)?,
                ),
            ];
            for (name, budget) in found {
                let b = budget.ok_or_else(|| {
                    CliError::Guard(format!(
                        "{name} at m = {m} never reached success {}",
                        cfg.target
                    ))
                })?;
                out.row(&[
                    m.to_string(),
                    name.to_string(),
                    b.repetitions.to_string(),
                    cfg.trials.to_string(),
                    b.success.to_string(),
                    b.measurements.to_string(),
                    cfg.seed.to_string(),
                ])?;
            }
        }
        return out.finish(header);
    }
    let mut out = Table::new(&[
        "m",
        "rounds",
        "s1",
        "S",
        "s2",
        "C",
        "trials",
        "word_error_rate",
        "total_measurements",
        "seed",
    ])?;
    for &m in &cfg.m {
        let plan = fast_plan(m, cfg, None)?;
        let tag = format!("fast/m={m}/rounds={}", plan.rounds());
        let error = fast::word_error_rate(m, &plan, cfg.trials, cfg.seed, &tag)?;
        out.row(&[
            m.to_string(),
            plan.rounds().to_string(),
            plan.s[0].to_string(),
            join(&plan.densities),
            join(&plan.s[1..]),
            plan.c.to_string(),
            cfg.trials.to_string(),
            error.to_string(),
            plan.measurement_count(m).to_string(),
            cfg.seed.to_string(),
        ])?;
    }
    out.finish(header)
}

/// Grid resolution used to fit the channel constant for the bound column.
pub const C0_GRID: usize = 128;

pub fn cmd_sparse(cfg: &SparseConfig) -> CliResult<Vec<u8>> {
    check_trials(cfg.trials)?;
    let alphabet = AmplitudeAlphabet::parse(&cfg.alphabet, cfg.k)?;
    // The fit lives on the normalized channel input; the bound takes inputs
    // in signal units, which shrinks the constant by A_max².
    let c0 = sparse::fit_c0(C0_GRID)? / alphabet.a_max().powi(2);
    let mut out = Table::new(&[
        "t",
        "K",
        "alphabet",
        "s",
        "trials",
        "exact_recovery_rate",
        "N_choices",
        "theorem2_bound",
        "seed",
    ])?;
    for &t in &cfg.t {
        let n = alphabet.n_choices(t);
        if n > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                count: n,
                limit: ENUMERATION_LIMIT,
            }
            .into());
        }
        for &s in &cfg.s {
            let tag = format!("sparse/t={t}/s={s}");
            let wins = run_trials(cfg.trials, |i| {
                sparse::recovery_trial(t, &alphabet, s, &mut derive_stream(cfg.seed, &tag, i))
            })?;
            let successes = wins.iter().filter(|&&w| w).count();
            let bound =
                sparse::theorem2_bound(n as f64, c0, alphabet.d_min(), alphabet.a_max(), s as u64)?;
            out.row(&[
                t.to_string(),
                cfg.k.to_string(),
                alphabet.to_string(),
                s.to_string(),
                cfg.trials.to_string(),
                (successes as f64 / cfg.trials as f64).to_string(),
                n.to_string(),
                bound.to_string(),
                cfg.seed.to_string(),
            ])?;
        }
    }
    out.finish(header_line("sparse", cfg))
}

/// Resource table, plus the gate list when `emit_circuit` is requested.
pub fn cmd_resources(
    cfg: &ResourcesConfig,
    emit_circuit: bool,
) -> CliResult<(Vec<u8>, Option<String>)> {
    let mut out = Table::new(&[
        "algorithm",
        "model",
        "m",
        "s",
        "depth",
        "width",
        "size",
        "depth_class",
        "width_class",
        "size_class",
    ])?;
    for &m in &cfg.m {
        for algorithm in Algorithm::ALL {
            for model in Model::ALL {
                let p = match cfg.s {
                    Some(s) => resources::profile_with_s(algorithm, model, m, s, &cfg.constants)?,
                    None => resources::profile(algorithm, model, m, &cfg.constants)?,
                };
                let mut row = vec![
                    p.algorithm.to_string(),
                    p.model.to_string(),
                    p.m.to_string(),
                    p.s.to_string(),
                    p.depth.to_string(),
                    p.width.to_string(),
                    p.size.to_string(),
                ];
                row.extend(p.classes.iter().map(|c| c.to_string()));
                out.row(&row)?;
            }
        }
    }
    let circuit = if emit_circuit {
        let [m] = cfg.m[..] else {
            return Err(CliError::Config(
                "--emit-circuit needs exactly one m".into(),
            ));
        };
        let s = cfg
            .s
            .unwrap_or_else(|| cfg.constants.repetitions(Algorithm::Kitaev, m));
        let n = m.saturating_mul(s).saturating_mul(2);
        if n > MAX_CIRCUIT_MEASUREMENTS {
            return Err(CliError::Guard(format!(
                "circuit of {n} measurements exceeds {MAX_CIRCUIT_MEASUREMENTS}"
            )));
        }
        let specs = kitaev::measurement_schedule(m as usize, s);
        Some(resources::emit_sequential_circuit(
            m as usize,
            2 * s as usize,
            &specs,
        )?)
    } else {
        None
    };
    Ok((out.finish(header_line("resources", cfg))?, circuit))
}

fn open_output(settings: &Settings) -> CliResult<Option<File>> {
    settings
        .out
        .as_ref()
        .map(|p| File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))))
        .transpose()
}

fn write_output(file: Option<File>, bytes: &[u8]) -> CliResult<()> {
    match file {
        Some(mut f) => f.write_all(bytes).and_then(|_| f.flush()).map_err(io_error),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(io_error)
        }
    }
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(job)
}

fn execute_with<F, C>(
    inv: &Invocation<F>,
    command: impl FnOnce(&C) -> CliResult<Vec<u8>> + Send,
) -> CliResult<()>
where
    F: Args + Serialize,
    C: DeserializeOwned + Sync,
{
    let (cfg, settings) = resolve::<F, C>(&inv.common, &inv.flags)?;
    let file = open_output(&settings)?;
    let bytes = in_pool(settings.threads, || command(&cfg))?;
    write_output(file, &bytes)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Infotheory(inv) => execute_with(&inv, cmd_infotheory),
        Command::Kitaev(inv) => execute_with(&inv, cmd_kitaev),
        Command::Fast(inv) => execute_with(&inv, cmd_fast),
        Command::Sparse(inv) => execute_with(&inv, cmd_sparse),
        Command::Resources(inv) => {
            let (cfg, settings) = resolve::<_, ResourcesConfig>(&inv.common, &inv.flags)?;
            let file = open_output(&settings)?;
            let circuit_file = settings
                .emit_circuit
                .as_ref()
                .map(|p| File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))))
                .transpose()?;
            let (bytes, circuit) = cmd_resources(&cfg, circuit_file.is_some())?;
            if let (Some(mut f), Some(text)) = (circuit_file, circuit) {
                f.write_all(text.as_bytes()).map_err(io_error)?;
            }
            write_output(file, &bytes)
        }
    }
}

/// Parses `args` (program name first), runs, and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
