//! Multi-round fast phase estimation.
//!
//! Round one is Kitaev-like with a small repetition count `s_1`, producing
//! coarse octants `β_j` for positions `1..m+L` (the `L` extra positions let
//! every window below reach past `m`). Each later round draws `s_r·m` random
//! sets of `S_r` distinct positions, measures the multiple
//! `M = Σ 2^{j_a-1}` `C` times to get `σ_i ≈ M·φ`, and turns every set into
//! one candidate per member position:
//!
//! ```text
//! candidate(j_a) = σ_i − (ρ_{j_1} + … + ρ_{j_S}) + ρ_{j_a}
//! ```
//!
//! where the `ρ` are windowed sharpenings of the previous round's octants.
//! The new octant `β'_j` is the one within 1/16 of the most candidates. The
//! final octants drive Kitaev's digit inference.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kitaev::{estimate_on_device, infer_word, rho_from_counts, BinaryFraction};
use crate::phase::{
    circle_distance, round_to_octant, sharpen_window, Device, DyadicMultiple, DyadicPhase,
    OctantEstimate, UnitReal,
};
use crate::resources::log_star;

/// Calibration constants behind [`default_plan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Last-round density `S_R = ⌈λ·log2 m⌉`.
    pub lambda: f64,
    /// Earlier densities `S_{r-1} = μ·⌈log2 S_r⌉`.
    pub mu: usize,
    /// Round-one repetitions `s_1 = ⌈ν·log2 log2 m⌉`.
    pub nu: f64,
    /// Sets per position in every later round.
    pub s_later: u64,
    /// Floor on the expected candidates per position, `s_r·S_r`; raises
    /// `s_r` when the density is small.
    pub min_votes: u64,
    /// Repetitions per measurement set.
    pub c: u64,
}

impl Default for Calibration {
    fn default() -> Self {
        DEFAULT_CALIBRATION
    }
}

pub const DEFAULT_CALIBRATION: Calibration = Calibration {
    lambda: 2.0,
    mu: 2,
    nu: 4.5,
    s_later: 3,
    min_votes: 32,
    c: 6,
};

/// Per-round parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    /// `s_1 … s_R`: round-one repetitions per angle, then sets per position.
    pub s: Vec<u64>,
    /// `S_2 … S_R`.
    pub densities: Vec<usize>,
    /// Repetitions per measurement set (half at each angle).
    pub c: u64,
    /// Target word-error budget.
    pub epsilon: f64,
}

impl RoundPlan {
    pub fn new(s: Vec<u64>, densities: Vec<usize>, c: u64, epsilon: f64) -> Result<Self> {
        let plan = RoundPlan {
            s,
            densities,
            c,
            epsilon,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn two_round(s1: u64, s2: u64, density: usize, c: u64) -> Result<Self> {
        Self::new(vec![s1, s2], vec![density], c, 0.1)
    }

    pub fn rounds(&self) -> usize {
        self.s.len()
    }

    fn validate(&self) -> Result<()> {
        if self.s.is_empty() {
            return Err(invalid("a plan needs at least one round"));
        }
        if self.densities.len() + 1 != self.s.len() {
            return Err(invalid("need one density per round after the first"));
        }
        if self.s.contains(&0) {
            return Err(invalid("every s_r must be at least 1"));
        }
        if self.densities.first().is_some_and(|&d| d < 2) {
            return Err(invalid("densities must be at least 2"));
        }
        if self.densities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("densities must strictly increase across rounds"));
        }
        if self.rounds() > 1 && (self.c < 2 || self.c % 2 == 1) {
            return Err(invalid("C must be even and at least 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn check_for(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(invalid("word length m must be at least 1"));
        }
        if let Some(&last) = self.densities.last() {
            if last > m {
                return Err(invalid(format!("density {last} exceeds m = {m}")));
            }
        }
        Ok(())
    }

    /// Precision `δ_{r}` handed from round `r` to round `r+1`, `r = 1..R-1`.
    pub fn delta(&self, r: usize) -> f64 {
        1.0 / (32.0 * self.densities[r - 1] as f64)
    }

    /// Extra round-one positions beyond `m`: `⌈log2(1/δ)⌉` for the finest
    /// precision any round asks for.
    pub fn extension_bits(&self) -> usize {
        self.densities
            .iter()
            .map(|&d| precision_bits(d))
            .max()
            .unwrap_or(0)
    }

    /// Closed-form measurement total for word length `m`.
    pub fn measurement_count(&self, m: usize) -> u64 {
        let m = m as u64;
        let first = 2 * (m + self.extension_bits() as u64) * self.s[0];
        let later: u64 = self.s[1..].iter().map(|&s| s * m * self.c).sum();
        first + later
    }
}

/// `⌈log2(32·S)⌉`, the digits needed for precision `1/(32·S)`.
fn precision_bits(density: usize) -> usize {
    (32 * density).next_power_of_two().trailing_zeros() as usize
}

/// Octant window length whose `L+2` sharpened digits reach precision
/// `1/(32·S)`.
pub fn window_len(density: usize) -> usize {
    precision_bits(density).saturating_sub(2).max(1)
}

pub fn measurement_count(plan: &RoundPlan, m: usize) -> u64 {
    plan.measurement_count(m)
}

pub fn default_plan(m: usize, rounds: usize) -> Result<RoundPlan> {
    default_plan_with(m, rounds, &DEFAULT_CALIBRATION)
}

/// Builds the plan for `m` bits and `rounds ≥ 2` rounds: the last density
/// grows like `log m` (capped at `√m`), each earlier one like the log of
/// the next.
pub fn default_plan_with(m: usize, rounds: usize, cal: &Calibration) -> Result<RoundPlan> {
    if m < 16 {
        return Err(invalid("default plans need m >= 16"));
    }
    if rounds < 2 {
        return Err(invalid("default plans need at least two rounds"));
    }
    if rounds > log_star(m as u64) as usize + 1 {
        return Err(invalid(format!(
            "{rounds} rounds exceed log*(m)+1 = {} for m = {m}",
            log_star(m as u64) + 1
        )));
    }
    let log_m = (m as f64).log2();
    let root = (m as f64).sqrt().floor() as usize;
    let last = ((cal.lambda * log_m).ceil() as usize).clamp(2, root);
    let mut densities = vec![last];
    for _ in 2..rounds {
        let next = *densities.last().expect("non-empty");
        let earlier = (cal.mu * (next as f64).log2().ceil() as usize).max(2);
        if earlier >= next {
            return Err(invalid(format!(
                "no density headroom for {rounds} rounds at m = {m}"
            )));
        }
        densities.push(earlier);
    }
    densities.reverse();
    let s1 = ((cal.nu * log_m.log2()).ceil() as u64).max(1);
    let mut s = vec![s1];
    s.extend(
        densities
            .iter()
            .map(|&d| cal.s_later.max(cal.min_votes.div_ceil(d as u64))),
    );
    RoundPlan::new(s, densities, cal.c, 0.1)
}

/// Exact probability that the arctangent estimator with `c/2` measurements
/// at each angle lands farther than `distance` from `x`.
pub fn sigma_failure_probability(x: UnitReal, c: u64, distance: f64) -> f64 {
    let half = c / 2;
    let (p0_cos, _) = crate::phase::outcome_probabilities(x, crate::phase::Angle::Cos);
    let (p0_sin, _) = crate::phase::outcome_probabilities(x, crate::phase::Angle::Sin);
    let cos_pmf = binomial_pmf(half, p0_cos);
    let sin_pmf = binomial_pmf(half, p0_sin);
    let mut fail = 0.0;
    for (zc, &wc) in cos_pmf.iter().enumerate() {
        if wc == 0.0 {
            continue;
        }
        for (zs, &ws) in sin_pmf.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            let zc = zc as u64;
            let zs = zs as u64;
            let (rho, _) = rho_from_counts([zc, half - zc], [zs, half - zs]);
            if circle_distance(rho, x) > distance {
                fail += wc * ws;
            }
        }
    }
    fail
}

/// `P(Binomial(n, p) = z)` for `z = 0..=n`, where `p` is the success chance.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    pmf[0] = 1.0;
    for step in 1..=n as usize {
        for z in (0..=step).rev() {
            let from_success = if z > 0 { pmf[z - 1] * p } else { 0.0 };
            pmf[z] = pmf[z] * (1.0 - p) + from_success;
        }
    }
    pmf
}

/// Worst-case failure probability over a `2^-grid_bits` grid of phases.
pub fn worst_sigma_failure(c: u64, distance: f64, grid_bits: u32) -> f64 {
    let n = 1u64 << grid_bits;
    (0..n)
        .map(|i| sigma_failure_probability(UnitReal::new(i as f64 / n as f64), c, distance))
        .fold(0.0, f64::max)
}

/// Smallest even `C` whose worst-case chance of missing by more than
/// `distance` is at most `failure`. Outcome patterns are enumerated exactly,
/// grouped by their counts.
/// [`calibrate_c`] at distance 1/32 and failure 1/8.
pub const STRICT_C: u64 = 132;

pub fn calibrate_c(distance: f64, failure: f64) -> u64 {
    let mut c = 2;
    while worst_sigma_failure(c, distance, 10) > failure {
        c += 2;
    }
    c
}

/// One later-round measurement set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    /// Distinct sorted positions in `1..=m`.
    pub positions: Vec<usize>,
    pub sigma: UnitReal,
    /// Outcome counts `[zeros, ones]` at θ = 0 and θ = π/2.
    pub cos_counts: [u64; 2],
    pub sin_counts: [u64; 2],
}

impl MeasurementSet {
    pub fn multiple(&self) -> DyadicMultiple {
        DyadicMultiple::new(self.positions.iter().map(|&j| (j - 1) as u32).collect())
            .expect("positions are distinct")
    }
}

/// Draws `count` sets of `density` distinct positions from `1..=m`.
///
/// A tuple with a repeated position is thrown away and redrawn. When that
/// would almost always happen, an equivalent draw without replacement is
/// used instead (both give every subset the same probability).
pub fn draw_sets<R: Rng + ?Sized>(
    m: usize,
    count: usize,
    density: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if density == 0 || density > m {
        return Err(invalid(format!("density {density} must lie in 1..={m}")));
    }
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let distinct_chance: f64 = (0..density).map(|i| 1.0 - i as f64 / m as f64).product();
    let mut sets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut set: Vec<usize> = if density == m {
            (1..=m).collect()
        } else if distinct_chance >= 1.0 / 64.0 {
            loop {
                let mut tuple: Vec<usize> = (0..density).map(|_| rng.gen_range(1..=m)).collect();
                tuple.sort_unstable();
                if tuple.windows(2).all(|w| w[0] != w[1]) {
                    break tuple;
                }
            }
        } else {
            index::sample(rng, m, density)
                .into_iter()
                .map(|i| i + 1)
                .collect()
        };
        set.sort_unstable();
        sets.push(set);
    }
    Ok(sets)
}

/// Measures one set: `c/2` shots at each angle of `M = Σ 2^{j-1}`.
pub fn estimate_sigma<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    positions: Vec<usize>,
    c: u64,
) -> Result<MeasurementSet> {
    if c < 2 || c % 2 == 1 {
        return Err(invalid("C must be even and at least 2"));
    }
    if positions.contains(&0) {
        return Err(invalid("positions are 1-based"));
    }
    let multiple = DyadicMultiple::new(positions.iter().map(|&j| (j - 1) as u32).collect())?;
    let cos_counts = device.measure_counts(&multiple, crate::phase::Angle::Cos, c / 2);
    let sin_counts = device.measure_counts(&multiple, crate::phase::Angle::Sin, c / 2);
    let (sigma, _) = rho_from_counts(cos_counts, sin_counts);
    let mut positions = positions;
    positions.sort_unstable();
    Ok(MeasurementSet {
        positions,
        sigma,
        cos_counts,
        sin_counts,
    })
}

/// Octant within 1/16 of the most candidates; ties go to the smaller octant.
pub fn vote_octant(candidates: &[UnitReal]) -> Option<OctantEstimate> {
    if candidates.is_empty() {
        return None;
    }
    let mut votes = [0usize; 8];
    for &c in candidates {
        for (o, v) in votes.iter_mut().enumerate() {
            if circle_distance(c, UnitReal::new(o as f64 / 8.0)) <= 1.0 / 16.0 {
                *v += 1;
            }
        }
    }
    let best = (0..8).fold(0, |b, o| if votes[o] > votes[b] { o } else { b });
    OctantEstimate::new(best as u8).ok()
}

/// Candidate estimates of `2^{j-1}·φ` for every position `j ∈ 1..=m`, one
/// per set containing `j`. The sum of `ρ` over a set is formed once and
/// reused for each member.
pub fn candidates_by_position(
    sets: &[MeasurementSet],
    rhos: &[UnitReal],
    m: usize,
) -> Vec<Vec<UnitReal>> {
    let mut out = vec![Vec::new(); m];
    for set in sets {
        let total = set
            .positions
            .iter()
            .fold(UnitReal::ZERO, |acc, &j| acc + rhos[j - 1]);
        let shared = set.sigma - total;
        for &j in &set.positions {
            out[j - 1].push(shared + rhos[j - 1]);
        }
    }
    out
}

/// `β'_j` from the candidates of the sets containing `j`.
pub fn combine_for_bit(candidates: &[UnitReal], j: usize) -> Result<OctantEstimate> {
    vote_octant(candidates).ok_or(Error::UncoveredPosition(j))
}

/// Windowed `ρ_j` from octants of positions `j..j+L-1`.
pub fn compute_rho(octants: &[OctantEstimate], j: usize, len: usize) -> Result<UnitReal> {
    if j == 0 || len == 0 || j - 1 + len > octants.len() {
        return Err(invalid(format!(
            "window of {len} at position {j} exceeds {} octants",
            octants.len()
        )));
    }
    sharpen_window(&octants[j - 1..j - 1 + len])
}

/// All measurement data of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastRecord {
    /// `β_j` for `j = 1..m+L`.
    pub round_one: Vec<OctantEstimate>,
    /// Measurement sets of rounds `2..R`.
    pub rounds: Vec<Vec<MeasurementSet>>,
}

/// Diagnostics of the post-processing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FastStats {
    /// Positions with no containing set, per later round.
    pub uncovered: Vec<usize>,
}

/// Round one: octants of `2^{j-1}·φ` for `j = 1..count`.
pub fn round_one<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    count: usize,
    s1: u64,
) -> Result<Vec<OctantEstimate>> {
    if device.phase_len() < count {
        return Err(invalid(format!(
            "phase carries {} bits, round one needs {count}",
            device.phase_len()
        )));
    }
    let mut betas = vec![OctantEstimate::new(0)?; count];
    for j in (1..=count).rev() {
        let multiple = DyadicMultiple::power_of_two((j - 1) as u32);
        let (rho, _) = estimate_on_device(device, &multiple, s1, s1)?;
        betas[j - 1] = round_to_octant(rho);
    }
    Ok(betas)
}

/// Performs every measurement of the plan.
pub fn measure<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    m: usize,
    plan: &RoundPlan,
) -> Result<FastRecord> {
    plan.check_for(m)?;
    let round_one = round_one(device, m + plan.extension_bits(), plan.s[0])?;
    let mut rounds = Vec::with_capacity(plan.rounds() - 1);
    for (r, &density) in plan.densities.iter().enumerate() {
        let count = plan.s[r + 1] as usize * m;
        let positions = draw_sets(m, count, density, device.rng())?;
        let sets = positions
            .into_iter()
            .map(|p| estimate_sigma(device, p, plan.c))
            .collect::<Result<Vec<_>>>()?;
        rounds.push(sets);
    }
    Ok(FastRecord { round_one, rounds })
}

/// Classical post-processing of a complete record.
pub fn post_process(
    record: &FastRecord,
    m: usize,
    plan: &RoundPlan,
) -> Result<(BinaryFraction, FastStats)> {
    plan.check_for(m)?;
    if record.round_one.len() < m + plan.extension_bits() {
        return Err(invalid(
            "round-one record is shorter than m plus the extension",
        ));
    }
    if record.rounds.len() != plan.densities.len() {
        return Err(invalid("record and plan disagree on the number of rounds"));
    }
    let mut current = record.round_one.clone();
    let mut stats = FastStats::default();
    for (sets, &density) in record.rounds.iter().zip(&plan.densities) {
        let len = window_len(density);
        let rhos = (1..=m)
            .map(|j| compute_rho(&current, j, len))
            .collect::<Result<Vec<_>>>()?;
        let candidates = candidates_by_position(sets, &rhos, m);
        let mut uncovered = 0;
        for (j, cands) in candidates.iter().enumerate() {
            match combine_for_bit(cands, j + 1) {
                Ok(beta) => current[j] = beta,
                // keep the previous round's octant
                Err(Error::UncoveredPosition(_)) => uncovered += 1,
                Err(e) => return Err(e),
            }
        }
        stats.uncovered.push(uncovered);
    }
    let finals: Vec<UnitReal> = current[..m].iter().map(|o| o.value()).collect();
    Ok((infer_word(&finals)?, stats))
}

pub fn run_on_device<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    m: usize,
    plan: &RoundPlan,
) -> Result<BinaryFraction> {
    let record = measure(device, m, plan)?;
    Ok(post_process(&record, m, plan)?.0)
}

/// Fast phase estimation of an `m`-bit word. The phase must carry at least
/// `m + plan.extension_bits()` digits.
pub fn run<R: Rng + ?Sized>(
    phase: &DyadicPhase,
    m: usize,
    plan: &RoundPlan,
    rng: &mut R,
) -> Result<BinaryFraction> {
    run_on_device(&mut Device::new(phase, rng), m, plan)
}

/// One Monte Carlo trial on a uniformly random `m`-bit phase. Returns the
/// score and the number of measurements taken.
pub fn scored_trial<R: Rng + ?Sized>(
    m: usize,
    plan: &RoundPlan,
    rng: &mut R,
) -> Result<(crate::kitaev::WordScore, u64)> {
    let phase = DyadicPhase::random(m, rng)?;
    let padded = phase.with_len(m + plan.extension_bits())?;
    let mut device = Device::new(&padded, rng);
    let alpha = run_on_device(&mut device, m, plan)?;
    let shots = device.shots();
    Ok((crate::kitaev::score_word(&phase, &alpha), shots))
}

/// Word-error rate over `trials` random `m`-bit phases; trial `i` runs on
/// stream `(seed, tag, i)`.
pub fn word_error_rate(
    m: usize,
    plan: &RoundPlan,
    trials: u64,
    seed: u64,
    tag: &str,
) -> Result<f64> {
    let failures = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::stream::derive_stream(seed, tag, i);
            scored_trial(m, plan, &mut rng).map(|(score, _)| u64::from(!score.word_ok))
        })
        .sum::<Result<u64>>()?;
    Ok(failures as f64 / trials as f64)
}

/// Binary search for the smallest round-one repetition count whose
/// two-round default plan at word length `m` reaches `target` word error,
/// returned as the matching `ν`.
pub fn calibrate_nu(
    m: usize,
    target: f64,
    trials: u64,
    seed: u64,
    base: &Calibration,
) -> Result<Calibration> {
    let loglog = (m as f64).log2().log2();
    let cal_for = |s1: u64| Calibration {
        nu: (s1 as f64 - 0.5) / loglog,
        ..*base
    };
    let error_at = |s1: u64| -> Result<f64> {
        let plan = default_plan_with(m, 2, &cal_for(s1))?;
        word_error_rate(m, &plan, trials, seed, "calibrate")
    };
    let (mut lo, mut hi) = (1u64, 64u64);
    if error_at(hi)? > target {
        return Err(invalid("no s_1 up to 64 reaches the target"));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if error_at(mid)? <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(cal_for(lo))
}
