//! K-sparse Fourier signals observed through a one-bit channel.
//!
//! `f(M) = Σ_k a(k)·e^{2πiMk/t}` with at most `K` nonzero `a(k)` drawn from a
//! finite alphabet. Each measurement sends `Re f(M)` or `Im f(M)`, rescaled
//! by `1/A_max`, through the channel `P(0|x) = (1+x)/2`.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phase::{cos_sin_turns, draw_outcome};

/// Largest candidate count [`ml_infer`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Finite set of admissible nonzero amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeAlphabet {
    values: Vec<Complex64>,
    /// Sparsity bound `K`.
    k: usize,
    a_max: f64,
}

impl AmplitudeAlphabet {
    /// `A_max` defaults to `K·max|a|`.
    pub fn new(values: Vec<Complex64>, k: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("alphabet must not be empty"));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(invalid("amplitudes must be finite"));
        }
        let mut alphabet = AmplitudeAlphabet {
            values,
            k,
            a_max: 0.0,
        };
        if alphabet.d_min() <= 0.0 {
            return Err(invalid("amplitudes must be distinct and nonzero"));
        }
        alphabet.a_max = (k.max(1) as f64) * alphabet.max_abs();
        Ok(alphabet)
    }

    /// Parses a comma-separated list such as `1,-1` or `1+1i,-0.5i`.
    pub fn parse(text: &str, k: usize) -> Result<Self> {
        let values = text
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<Complex64>()
                    .map_err(|_| invalid(format!("bad amplitude {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values, k)
    }

    /// Replaces `A_max`; it must lie in `[max|a|, K·max|a|]`.
    pub fn with_a_max(mut self, a_max: f64) -> Result<Self> {
        let lo = self.max_abs();
        if !(a_max >= lo && a_max <= self.k.max(1) as f64 * lo) {
            return Err(invalid(format!("A_max {a_max} outside [{lo}, K·{lo}]")));
        }
        self.a_max = a_max;
        Ok(self)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest distance between two values, or between a value and 0.
    pub fn d_min(&self) -> f64 {
        let mut d = self
            .values
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min);
        for (i, a) in self.values.iter().enumerate() {
            for b in &self.values[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d
    }

    /// Number of admissible signals of period `t`.
    pub fn n_choices(&self, t: u64) -> u128 {
        n_choices(t, self.k, self.values.len())
    }
}

impl fmt::Display for AmplitudeAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(format_complex).collect();
        f.write_str(&parts.join(";"))
    }
}

fn format_complex(v: &Complex64) -> String {
    if v.im == 0.0 {
        format!("{}", v.re)
    } else {
        format!("{v}")
    }
}

/// `Σ_{κ≤K} C(t,κ)·n^κ`, saturating.
pub fn n_choices(t: u64, k: usize, alphabet_len: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut power: u128 = 1;
    for kappa in 0..=k.min(t as usize) as u128 {
        if let Some(b) = binom
            .saturating_mul(t as u128 + 1 - kappa.max(1))
            .checked_div(kappa)
        {
            binom = b;
            power = power.saturating_mul(alphabet_len as u128);
        }
        total = total.saturating_add(binom.saturating_mul(power));
    }
    total
}

/// A signal with sorted support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    t: u64,
    coeffs: Vec<(u64, Complex64)>,
}

impl SparseSignal {
    pub fn new(t: u64, mut coeffs: Vec<(u64, Complex64)>) -> Result<Self> {
        if t == 0 {
            return Err(invalid("period must be positive"));
        }
        coeffs.retain(|(_, a)| *a != Complex64::new(0.0, 0.0));
        coeffs.sort_by_key(|&(k, _)| k);
        if coeffs.iter().any(|&(k, _)| k >= t) {
            return Err(invalid("frequency index out of range"));
        }
        if coeffs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("repeated frequency index"));
        }
        Ok(SparseSignal { t, coeffs })
    }

    pub fn zero(t: u64) -> Result<Self> {
        Self::new(t, Vec::new())
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn coeffs(&self) -> &[(u64, Complex64)] {
        &self.coeffs
    }

    /// Random signal with exactly `K` nonzero coefficients.
    pub fn random<R: Rng + ?Sized>(
        t: u64,
        alphabet: &AmplitudeAlphabet,
        rng: &mut R,
    ) -> Result<Self> {
        if alphabet.k as u64 > t {
            return Err(invalid("K exceeds the period"));
        }
        let support = rand::seq::index::sample(rng, t as usize, alphabet.k);
        let coeffs = support
            .into_iter()
            .map(|k| {
                let a = alphabet.values[rng.gen_range(0..alphabet.values.len())];
                (k as u64, a)
            })
            .collect();
        Self::new(t, coeffs)
    }
}

/// `e^{2πi·Mk/t}` with `Mk` reduced exactly.
fn twiddle(m: u64, k: u64, t: u64) -> Complex64 {
    let r = ((m as u128 * k as u128) % t as u128) as f64 / t as f64;
    let (c, s) = cos_sin_turns(r);
    Complex64::new(c, s)
}

pub fn eval_signal(signal: &SparseSignal, m: u64) -> Complex64 {
    signal
        .coeffs
        .iter()
        .map(|&(k, a)| a * twiddle(m, k, signal.t))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

impl Part {
    pub fn of(self, z: Complex64) -> f64 {
        match self {
            Part::Re => z.re,
            Part::Im => z.im,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalMeasurement {
    pub m: u64,
    pub part: Part,
    pub outcome: u8,
}

/// `(P(0), P(1))` for input `x ∈ [−A_max, A_max]`.
pub fn channel_probabilities(x: f64, a_max: f64) -> Result<(f64, f64)> {
    let xn = normalized(x, a_max)?;
    let p0 = (1.0 + xn) / 2.0;
    Ok((p0, 1.0 - p0))
}

fn normalized(x: f64, a_max: f64) -> Result<f64> {
    if !(a_max > 0.0) {
        return Err(invalid("A_max must be positive"));
    }
    if !(x.abs() <= a_max * (1.0 + 1e-12)) {
        return Err(invalid(format!("channel input {x} outside ±{a_max}")));
    }
    Ok((x / a_max).clamp(-1.0, 1.0))
}

pub fn sample_signal_measurement<R: Rng + ?Sized>(
    signal: &SparseSignal,
    alphabet: &AmplitudeAlphabet,
    m: u64,
    part: Part,
    rng: &mut R,
) -> Result<SignalMeasurement> {
    if m >= signal.t {
        return Err(invalid(format!("time {m} outside 0..{}", signal.t)));
    }
    let (p0, _) = channel_probabilities(part.of(eval_signal(signal, m)), alphabet.a_max)?;
    Ok(SignalMeasurement {
        m,
        part,
        outcome: draw_outcome(p0, rng),
    })
}

/// `s` measurements at uniform random times and parts.
pub fn random_measurements<R: Rng + ?Sized>(
    signal: &SparseSignal,
    alphabet: &AmplitudeAlphabet,
    s: usize,
    rng: &mut R,
) -> Result<Vec<SignalMeasurement>> {
    (0..s)
        .map(|_| {
            let m = rng.gen_range(0..signal.t);
            let part = if rng.gen::<bool>() {
                Part::Im
            } else {
                Part::Re
            };
            sample_signal_measurement(signal, alphabet, m, part, rng)
        })
        .collect()
}

fn check_guard(t: u64, alphabet: &AmplitudeAlphabet) -> Result<()> {
    let count = alphabet.n_choices(t);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Visits every admissible signal: by support size, then lexicographic
/// support, then alphabet index per position (odometer, last fastest).
fn for_each_candidate(
    t: u64,
    alphabet: &AmplitudeAlphabet,
    mut visit: impl FnMut(&[(u64, usize)]),
) {
    let n = alphabet.values.len();
    for kappa in 0..=alphabet.k.min(t as usize) {
        let mut support: Vec<u64> = (0..kappa as u64).collect();
        loop {
            let mut assign = vec![0usize; kappa];
            loop {
                let cand: Vec<(u64, usize)> = support
                    .iter()
                    .copied()
                    .zip(assign.iter().copied())
                    .collect();
                visit(&cand);
                // advance the odometer
                let mut i = kappa;
                while i > 0 && assign[i - 1] + 1 == n {
                    assign[i - 1] = 0;
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                assign[i - 1] += 1;
            }
            // next combination
            let mut i = kappa;
            while i > 0 && support[i - 1] == t - (kappa - i + 1) as u64 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            support[i - 1] += 1;
            for j in i..kappa {
                support[j] = support[j - 1] + 1;
            }
        }
    }
}

fn build(t: u64, alphabet: &AmplitudeAlphabet, cand: &[(u64, usize)]) -> SparseSignal {
    SparseSignal {
        t,
        coeffs: cand.iter().map(|&(k, i)| (k, alphabet.values[i])).collect(),
    }
}

pub fn enumerate_candidates(t: u64, alphabet: &AmplitudeAlphabet) -> Result<Vec<SparseSignal>> {
    if t == 0 {
        return Err(invalid("period must be positive"));
    }
    check_guard(t, alphabet)?;
    let mut out = Vec::with_capacity(alphabet.n_choices(t) as usize);
    for_each_candidate(t, alphabet, |c| out.push(build(t, alphabet, c)));
    Ok(out)
}

/// `Σ_i log P(v_i | f(M_i))`, with `−∞` for impossible outcomes.
pub fn log_likelihood(
    signal: &SparseSignal,
    alphabet: &AmplitudeAlphabet,
    measurements: &[SignalMeasurement],
) -> Result<f64> {
    measurements.iter().try_fold(0.0, |acc, meas| {
        let (p0, p1) =
            channel_probabilities(meas.part.of(eval_signal(signal, meas.m)), alphabet.a_max)?;
        Ok(acc + if meas.outcome == 0 { p0 } else { p1 }.ln())
    })
}

/// Maximum-likelihood signal over every admissible candidate; ties go to
/// the earliest in enumeration order.
pub fn ml_infer(
    measurements: &[SignalMeasurement],
    t: u64,
    alphabet: &AmplitudeAlphabet,
) -> Result<SparseSignal> {
    if t == 0 {
        return Err(invalid("period must be positive"));
    }
    check_guard(t, alphabet)?;
    if measurements.iter().any(|m| m.m >= t) {
        return Err(invalid("measurement time outside the period"));
    }
    // rotated amplitudes per (measurement, frequency, alphabet entry)
    let n = alphabet.values.len();
    let table: Vec<f64> = measurements
        .iter()
        .flat_map(|meas| {
            (0..t).flat_map(move |k| {
                let w = twiddle(meas.m, k, t);
                alphabet
                    .values
                    .iter()
                    .map(move |&a| meas.part.of(a * w) / alphabet.a_max)
            })
        })
        .collect();
    let stride = t as usize * n;
    let mut best: Option<(f64, Vec<(u64, usize)>)> = None;
    for_each_candidate(t, alphabet, |cand| {
        let mut ll = 0.0;
        for (i, meas) in measurements.iter().enumerate() {
            let row = &table[i * stride..(i + 1) * stride];
            let x: f64 = cand.iter().map(|&(k, a)| row[k as usize * n + a]).sum();
            let p0 = (1.0 + x.clamp(-1.0, 1.0)) / 2.0;
            ll += if meas.outcome == 0 { p0 } else { 1.0 - p0 }.ln();
            if ll == f64::NEG_INFINITY {
                break;
            }
        }
        let better = match &best {
            None => true,
            Some((b, _)) => ll > *b,
        };
        if better {
            best = Some((ll, cand.to_vec()));
        }
    });
    let (_, cand) = best.expect("at least the zero signal is a candidate");
    Ok(build(t, alphabet, &cand))
}

/// Draws a random K-sparse signal, measures it `s` times, and reports
/// whether maximum likelihood recovers it exactly.
pub fn recovery_trial<R: Rng + ?Sized>(
    t: u64,
    alphabet: &AmplitudeAlphabet,
    s: usize,
    rng: &mut R,
) -> Result<bool> {
    let truth = SparseSignal::random(t, alphabet, rng)?;
    let measurements = random_measurements(&truth, alphabet, s, rng)?;
    Ok(ml_infer(&measurements, t, alphabet)? == truth)
}

/// Bhattacharyya coefficient of the channel outputs for inputs `x`, `y`.
pub fn channel_overlap(x: f64, y: f64, a_max: f64) -> Result<f64> {
    let (xn, yn) = (normalized(x, a_max)?, normalized(y, a_max)?);
    Ok((((1.0 + xn) * (1.0 + yn)).sqrt() + ((1.0 - xn) * (1.0 - yn)).sqrt()) / 2.0)
}

/// Largest `c0` with `overlap(x, y) ≤ 1 − c0·(x−y)²` over a grid of
/// `points` normalized inputs in `[−1, 1]`, including the limit of the
/// ratio along the diagonal, `1/(8(1−x²))`.
pub fn fit_c0(points: usize) -> Result<f64> {
    if points < 64 {
        return Err(invalid("need at least 64 grid points"));
    }
    let grid: Vec<f64> = (0..=points)
        .map(|i| -1.0 + 2.0 * i as f64 / points as f64)
        .collect();
    let mut c0 = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        if x.abs() < 1.0 {
            c0 = c0.min(1.0 / (8.0 * (1.0 - x * x)));
        }
        for &y in &grid[i + 1..] {
            let gap = 1.0 - channel_overlap(x, y, 1.0)?;
            c0 = c0.min(gap / ((x - y) * (x - y)));
        }
    }
    Ok(c0)
}

/// `N·c^s` with `c = 1 − c0·(d_min/2)²·d_min²/(16·A_max²)`.
pub fn theorem2_bound(n_choices: f64, c0: f64, d_min: f64, a_max: f64, s: u64) -> Result<f64> {
    if !(n_choices > 0.0 && c0 > 0.0 && d_min > 0.0 && a_max > 0.0) {
        return Err(invalid("all bound inputs must be positive"));
    }
    if d_min > 2.0 * a_max {
        return Err(invalid("d_min cannot exceed 2·A_max"));
    }
    let c = 1.0 - c0 * (d_min / 2.0).powi(2) * d_min.powi(2) / (16.0 * a_max.powi(2));
    if c <= 0.0 {
        return Err(invalid(format!("contraction {c} is not positive")));
    }
    Ok(n_choices * c.powf(s as f64))
}

/// Chance that maximum likelihood tells `a` from `a − ε` after `n` channel
/// uses, both equally likely, input scaled by `a_max`. Ties favour `a`.
pub fn amplitude_success(n: u64, a: f64, eps: f64, a_max: f64) -> Result<f64> {
    let (p, _) = channel_probabilities(a, a_max)?;
    let (q, _) = channel_probabilities(a - eps, a_max)?;
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let pmf = |z: u64, p: f64| -> f64 {
        let ln_c = ln_fact[n as usize] - ln_fact[z as usize] - ln_fact[(n - z) as usize];
        let ln = ln_c + z as f64 * p.ln() + (n - z) as f64 * (1.0 - p).ln();
        if ln.is_nan() {
            0.0
        } else {
            ln.exp()
        }
    };
    let loglik = |z: u64, p: f64| -> f64 {
        let zero = if z == 0 { 0.0 } else { z as f64 * p.ln() };
        let one = if z == n {
            0.0
        } else {
            (n - z) as f64 * (1.0 - p).ln()
        };
        zero + one
    };
    let mut success = 0.0;
    for z in 0..=n {
        if loglik(z, p) >= loglik(z, q) {
            success += 0.5 * pmf(z, p);
        } else {
            success += 0.5 * pmf(z, q);
        }
    }
    Ok(success)
}

/// Smallest `n` whose [`amplitude_success`] reaches `target`.
pub fn amplitude_threshold(a: f64, eps: f64, a_max: f64, target: f64) -> Result<u64> {
    if !(eps > 0.0) || !(target < 1.0) {
        return Err(invalid("need eps > 0 and target < 1"));
    }
    let mut n = 1;
    while amplitude_success(n, a, eps, a_max)? < target {
        n += 1;
        if n > 1 << 24 {
            return Err(invalid("threshold search did not converge"));
        }
    }
    Ok(n)
}

/// Fraction of `trials` in which `s` uniform times in `0..t` repeat.
pub fn collision_fraction<R: Rng + ?Sized>(t: u64, s: usize, trials: usize, rng: &mut R) -> f64 {
    let hits = (0..trials)
        .filter(|_| {
            let mut seen = BTreeSet::new();
            (0..s).any(|_| !seen.insert(rng.gen_range(0..t)))
        })
        .count();
    hits as f64 / trials as f64
}
