//! Random-measurement phase estimation with maximum-likelihood decoding.
//!
//! Each of `s` measurements uses a uniformly random multiple `M ∈ {1..t-1}`
//! and a random angle; the decoder scores every `k ∈ {0..t-1}` by the log
//! likelihood of the observed outcome sequence and returns the maximiser.
//! Post-processing is `O(s·t)`.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, TAU};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phase::{
    cos_sin_turns, draw_outcome, outcome_probabilities, reduce_rational, Angle, MeasurementRecord,
    MeasurementSpec, Multiple, RationalPhase, UnitReal,
};

/// How measurement angles are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    /// θ uniform on `[0, 2π)`.
    Uniform,
    /// θ uniform on `{0, π/2}`.
    Binary,
}

impl FromStr for ThetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ThetaMode::Uniform),
            "binary" => Ok(ThetaMode::Binary),
            other => Err(invalid(format!("unknown theta mode {other:?}"))),
        }
    }
}

impl ThetaMode {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Angle {
        match self {
            ThetaMode::Uniform => Angle::Radians(rng.gen::<f64>() * TAU),
            ThetaMode::Binary => {
                if rng.gen::<bool>() {
                    Angle::Sin
                } else {
                    Angle::Cos
                }
            }
        }
    }
}

pub fn random_plan<R: Rng + ?Sized>(
    t: u64,
    s: usize,
    mode: ThetaMode,
    rng: &mut R,
) -> Result<Vec<MeasurementSpec>> {
    if t < 2 {
        return Err(invalid("random multiples need t >= 2"));
    }
    Ok((0..s)
        .map(|_| MeasurementSpec {
            multiple: Multiple::Integer(rng.gen_range(1..t)),
            angle: mode.draw(rng),
        })
        .collect())
}

/// Running log-likelihoods `log P(v_1..v_i | k)` for every `k`.
///
/// `-∞` entries are kept exactly: once an outcome has probability zero under
/// some `k`, that `k` is eliminated for good.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    t: u64,
    loglik: Vec<f64>,
    trig: Vec<(f64, f64)>,
}

impl LikelihoodTable {
    /// Flat prior over `k ∈ {0..t-1}`.
    pub fn new(t: u64) -> Result<Self> {
        if t == 0 {
            return Err(invalid("modulus t must be at least 1"));
        }
        let trig = (0..t).map(|r| cos_sin_turns(r as f64 / t as f64)).collect();
        Ok(LikelihoodTable {
            t,
            loglik: vec![0.0; t as usize],
            trig,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn loglik(&self) -> &[f64] {
        &self.loglik
    }

    /// Folds one outcome into the table. `M·k mod t` advances by modular
    /// addition as `k` increases.
    pub fn update(&mut self, multiple: u64, angle: Angle, outcome: u8) {
        let t = self.t;
        let step = multiple % t;
        let (ct, st) = match angle {
            Angle::Cos => (1.0, 0.0),
            Angle::Sin => (0.0, 1.0),
            Angle::Radians(theta) => {
                let (s, c) = theta.sin_cos();
                (c, s)
            }
        };
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        let mut r = 0u64;
        for ll in self.loglik.iter_mut() {
            let (c, s) = self.trig[r as usize];
            let p = ((1.0 + sign * (c * ct - s * st)) / 2.0).clamp(0.0, 1.0);
            *ll += p.ln();
            r += step;
            if r >= t {
                r -= t;
            }
        }
    }

    /// Normalised posterior under a flat prior.
    pub fn posterior(&self) -> Vec<f64> {
        let max = self
            .loglik
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return vec![0.0; self.loglik.len()];
        }
        let w: Vec<f64> = self.loglik.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }
}

pub fn accumulate_loglik(records: &[MeasurementRecord], t: u64) -> Result<LikelihoodTable> {
    let mut table = LikelihoodTable::new(t)?;
    for rec in records {
        let m = match &rec.spec.multiple {
            Multiple::Integer(m) => *m,
            Multiple::Dyadic(_) => {
                return Err(invalid("likelihood tables take integer multiples"));
            }
        };
        table.update(m, rec.spec.angle, rec.outcome);
    }
    Ok(table)
}

/// Maximum-likelihood `k`; ties resolve to the smallest `k`.
pub fn infer_k(table: &LikelihoodTable) -> Result<u64> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &l) in table.loglik.iter().enumerate() {
        if l > f64::NEG_INFINITY && best.is_none_or(|(_, b)| l > b) {
            best = Some((k, l));
        }
    }
    best.map(|(k, _)| k as u64).ok_or(Error::ImpossibleEvidence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub t: u64,
    pub true_k: u64,
    pub s: usize,
    pub theta_mode: ThetaMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success: bool,
    pub inferred_k: u64,
}

/// Simulates the measurement records of one trial.
pub fn simulate_records<R: Rng + ?Sized>(
    phase: &RationalPhase,
    s: usize,
    mode: ThetaMode,
    rng: &mut R,
) -> Result<Vec<MeasurementRecord>> {
    let plan = random_plan(phase.t(), s, mode, rng)?;
    plan.into_iter()
        .map(|spec| {
            let x = reduce_rational(phase, &spec.multiple)?;
            let (p0, _) = outcome_probabilities(x, spec.angle);
            let outcome = draw_outcome(p0, rng);
            Ok(MeasurementRecord { spec, outcome })
        })
        .collect()
}

pub fn run_trial_with<R: Rng + ?Sized>(
    t: u64,
    true_k: u64,
    s: usize,
    mode: ThetaMode,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let phase = RationalPhase::new(true_k, t)?;
    let records = simulate_records(&phase, s, mode, rng)?;
    let inferred_k = infer_k(&accumulate_loglik(&records, t)?)?;
    Ok(TrialOutcome {
        success: inferred_k == true_k,
        inferred_k,
    })
}

pub fn run_trial(config: &TrialConfig) -> Result<TrialOutcome> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    run_trial_with(
        config.t,
        config.true_k,
        config.s,
        config.theta_mode,
        &mut rng,
    )
}

/// Runs one trial of `s_max` measurements and reports, for every prefix
/// length `s = 0..=s_max`, whether the ML estimate after `s` outcomes is
/// correct. Prefixes share outcomes, so the entries are correlated.
pub fn prefix_successes<R: Rng + ?Sized>(
    t: u64,
    true_k: u64,
    s_max: usize,
    mode: ThetaMode,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let phase = RationalPhase::new(true_k, t)?;
    let records = simulate_records(&phase, s_max, mode, rng)?;
    let mut table = LikelihoodTable::new(t)?;
    let mut out = Vec::with_capacity(s_max + 1);
    out.push(infer_k(&table)? == true_k);
    for rec in &records {
        if let Multiple::Integer(m) = rec.spec.multiple {
            table.update(m, rec.spec.angle, rec.outcome);
        }
        out.push(infer_k(&table)? == true_k);
    }
    Ok(out)
}

/// `Σ_v √(P(v|x0) P(v|x1))` at a fixed angle.
fn overlap_at(x0: UnitReal, x1: UnitReal, angle: Angle) -> f64 {
    let (a0, a1) = outcome_probabilities(x0, angle);
    let (b0, b1) = outcome_probabilities(x1, angle);
    (a0 * b0).sqrt() + (a1 * b1).sqrt()
}

/// Average over θ uniform on the circle of the overlap, in closed form.
///
/// With `d = π(x1 - x0)` the overlap at angle θ equals
/// `max(|cos d|, |cos(2πx0 + θ + d)|)`, whose circular mean is
/// `(2/π)(√(1-c²) + c(π/2 - acos c))` for `c = |cos d|`.
fn uniform_theta_overlap(x0: UnitReal, x1: UnitReal) -> f64 {
    let (cd, _) = cos_sin_turns((x1.value() - x0.value()) / 2.0);
    let c = cd.abs().min(1.0);
    FRAC_2_PI * ((1.0 - c * c).sqrt() + c * (FRAC_PI_2 - c.acos()))
}

/// The per-measurement Bhattacharyya contraction between hypotheses `k0` and
/// `k1`, averaged over `M ∈ {1..t-1}` and the angle distribution.
pub fn bhattacharyya_avg(t: u64, k0: u64, k1: u64, mode: ThetaMode) -> Result<f64> {
    if k0 == k1 {
        return Err(invalid("hypotheses must differ"));
    }
    if t < 2 {
        return Err(invalid("need t >= 2"));
    }
    let p0 = RationalPhase::new(k0, t)?;
    let p1 = RationalPhase::new(k1, t)?;
    let mut total = 0.0;
    for m in 1..t {
        let x0 = UnitReal::new(p0.reduced_numerator(m) as f64 / t as f64);
        let x1 = UnitReal::new(p1.reduced_numerator(m) as f64 / t as f64);
        total += match mode {
            ThetaMode::Binary => {
                (overlap_at(x0, x1, Angle::Cos) + overlap_at(x0, x1, Angle::Sin)) / 2.0
            }
            ThetaMode::Uniform => uniform_theta_overlap(x0, x1),
        };
    }
    Ok(total / (t - 1) as f64)
}

/// Largest contraction over all hypothesis pairs (exhaustive, `O(t^3)`).
pub fn max_bhattacharyya(t: u64, mode: ThetaMode) -> Result<f64> {
    let mut best = 0.0f64;
    for k0 in 0..t {
        for k1 in k0 + 1..t {
            best = best.max(bhattacharyya_avg(t, k0, k1, mode)?);
        }
    }
    Ok(best)
}

/// Union bound `t·c^s` on the ML error probability.
pub fn theorem1_bound(t: u64, c: f64, s: usize) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("contraction {c} must lie in (0, 1)")));
    }
    Ok(t as f64 * c.powi(s as i32))
}

/// Counting bound: `s` binary outcomes single out at most `2^s` of `t`
/// hypotheses, so the success probability is at most `2^s / t`.
pub fn counting_success_bound(t: u64, s: usize) -> f64 {
    (2f64.powi(s as i32) / t as f64).min(1.0)
}
