//! Kitaev-style phase estimation.
//!
//! Each doubling `2^{j-1}·φ mod 1` is estimated to constant precision from
//! `s` cosine-type and `s` sine-type measurements and an arctangent. The
//! word `α_1 … α_{m+2}` is then read off from the finest doubling down to
//! the coarsest, one digit per position.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::phase::{
    infer_digits, Angle, Device, DyadicMultiple, DyadicPhase, MeasurementSpec, Multiple, UnitReal,
};

/// Estimate of one multiple of the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipleEstimate {
    pub j: usize,
    pub rho: UnitReal,
    pub n_cos: u64,
    pub n_sin: u64,
    /// Both empirical components were zero; `rho` is set to 0.
    pub degenerate: bool,
}

/// Quadrant-correct arctangent of `(p_sin, p_cos)` in turns. Returns the
/// degenerate flag when both components vanish.
pub fn rho_from_components(p_cos: f64, p_sin: f64) -> (UnitReal, bool) {
    if p_cos == 0.0 && p_sin == 0.0 {
        return (UnitReal::ZERO, true);
    }
    (UnitReal::new(p_sin.atan2(p_cos) / TAU), false)
}

/// Arctangent estimate from outcome counts `[zeros, ones]` of the cosine
/// (θ = 0) and sine (θ = π/2) measurements.
pub fn rho_from_counts(cos_counts: [u64; 2], sin_counts: [u64; 2]) -> (UnitReal, bool) {
    let n_c = (cos_counts[0] + cos_counts[1]) as f64;
    let n_s = (sin_counts[0] + sin_counts[1]) as f64;
    let p_cos = (cos_counts[0] as f64 - cos_counts[1] as f64) / n_c;
    let p_sin = (sin_counts[1] as f64 - sin_counts[0] as f64) / n_s;
    rho_from_components(p_cos, p_sin)
}

/// Measures `multiple` `n_cos` times at θ = 0 and `n_sin` times at θ = π/2
/// and returns the arctangent estimate of `M·φ mod 1`.
pub fn estimate_on_device<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    multiple: &DyadicMultiple,
    n_cos: u64,
    n_sin: u64,
) -> Result<(UnitReal, bool)> {
    if n_cos == 0 || n_sin == 0 {
        return Err(invalid("need at least one measurement of each angle"));
    }
    let cos_counts = device.measure_counts(multiple, Angle::Cos, n_cos);
    let sin_counts = device.measure_counts(multiple, Angle::Sin, n_sin);
    Ok(rho_from_counts(cos_counts, sin_counts))
}

fn estimate_position<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    j: usize,
    s: u64,
) -> Result<MultipleEstimate> {
    if j == 0 {
        return Err(invalid("positions are 1-based"));
    }
    let multiple = DyadicMultiple::power_of_two((j - 1) as u32);
    let (rho, degenerate) = estimate_on_device(device, &multiple, s, s)?;
    Ok(MultipleEstimate {
        j,
        rho,
        n_cos: s,
        n_sin: s,
        degenerate,
    })
}

/// Estimates `2^{j-1}·φ mod 1` from `s` measurements at each angle.
pub fn estimate_multiple<R: Rng + ?Sized>(
    phase: &DyadicPhase,
    j: usize,
    s: u64,
    rng: &mut R,
) -> Result<MultipleEstimate> {
    if s == 0 {
        return Err(invalid("s must be at least 1"));
    }
    estimate_position(&mut Device::new(phase, rng), j, s)
}

/// The output word `.α_1 … α_{m+2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryFraction {
    bits: Vec<u8>,
}

impl BinaryFraction {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() || bits.iter().any(|&b| b > 1) {
            return Err(invalid("a binary fraction needs one or more 0/1 digits"));
        }
        Ok(BinaryFraction { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_phase(&self) -> DyadicPhase {
        DyadicPhase::from_bits(&self.bits).expect("digits validated on construction")
    }

    pub fn value(&self) -> UnitReal {
        crate::phase::digits_value(&self.bits)
    }
}

/// Infers the word from estimates `ρ_1 … ρ_m` of the doublings.
pub fn infer_word(rhos: &[UnitReal]) -> Result<BinaryFraction> {
    BinaryFraction::new(infer_digits(rhos)?)
}

pub fn run_on_device<R: Rng + ?Sized>(
    device: &mut Device<'_, R>,
    m: usize,
    s: u64,
) -> Result<BinaryFraction> {
    if m == 0 {
        return Err(invalid("word length m must be at least 1"));
    }
    if s == 0 {
        return Err(invalid("s must be at least 1"));
    }
    if device.phase_len() < m {
        return Err(invalid(format!(
            "phase carries {} bits, fewer than m = {m}",
            device.phase_len()
        )));
    }
    let mut rhos = vec![UnitReal::ZERO; m];
    for j in (1..=m).rev() {
        rhos[j - 1] = estimate_position(device, j, s)?.rho;
    }
    infer_word(&rhos)
}

/// The `2·m·s` measurements of [`run_on_device`] in issue order.
pub fn measurement_schedule(m: usize, s: u64) -> Vec<MeasurementSpec> {
    let mut specs = Vec::with_capacity(2 * m * s as usize);
    for j in (1..=m).rev() {
        let multiple = Multiple::Dyadic(DyadicMultiple::power_of_two((j - 1) as u32));
        for angle in [Angle::Cos, Angle::Sin] {
            specs.extend((0..s).map(|_| MeasurementSpec {
                multiple: multiple.clone(),
                angle,
            }));
        }
    }
    specs
}

/// Full Kitaev estimation of an `m`-bit word, `2·m·s` measurements.
pub fn run<R: Rng + ?Sized>(
    phase: &DyadicPhase,
    m: usize,
    s: u64,
    rng: &mut R,
) -> Result<BinaryFraction> {
    run_on_device(&mut Device::new(phase, rng), m, s)
}

/// How an inferred word compares with the true phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordScore {
    pub bits: usize,
    pub bit_errors: usize,
    pub word_ok: bool,
}

/// Scores `alpha` against `phase`. The word is correct when it lies within
/// `2^-(len)` of the phase on the circle (which also covers carries across a
/// dyadic boundary); otherwise bit errors count mismatches with the
/// truncation of the phase.
pub fn score_word(phase: &DyadicPhase, alpha: &BinaryFraction) -> WordScore {
    let n = alpha.len();
    let word_ok = alpha.to_phase().within_circle_distance(phase, n);
    let bit_errors = if word_ok {
        0
    } else {
        (1..=n)
            .filter(|&p| alpha.bits()[p - 1] != phase.bit(p))
            .count()
    };
    WordScore {
        bits: n,
        bit_errors,
        word_ok,
    }
}

/// One Monte Carlo trial: a uniformly random `m`-bit phase, estimated and
/// scored.
pub fn scored_trial<R: Rng + ?Sized>(m: usize, s: u64, rng: &mut R) -> Result<WordScore> {
    let phase = DyadicPhase::random(m, rng)?;
    let alpha = run(&phase, m, s, rng)?;
    Ok(score_word(&phase, &alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRates {
    pub bit_rate: f64,
    pub word_rate: f64,
}

impl ErrorRates {
    pub fn from_scores<'a>(scores: impl IntoIterator<Item = &'a WordScore>) -> Self {
        let (mut bits, mut bad_bits, mut trials, mut bad_words) = (0usize, 0usize, 0usize, 0usize);
        for sc in scores {
            bits += sc.bits;
            bad_bits += sc.bit_errors;
            trials += 1;
            bad_words += !sc.word_ok as usize;
        }
        ErrorRates {
            bit_rate: bad_bits as f64 / bits.max(1) as f64,
            word_rate: bad_words as f64 / trials.max(1) as f64,
        }
    }
}

/// Bit and word error rates over `trials` random `m`-bit phases.
pub fn bit_and_word_error_rates<R: Rng + ?Sized>(
    m: usize,
    s: u64,
    trials: usize,
    rng: &mut R,
) -> Result<ErrorRates> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let scores = (0..trials)
        .map(|_| scored_trial(m, s, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorRates::from_scores(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{circle_distance, round_to_octant};
    use crate::stream::derive_stream;

    fn u(x: f64) -> UnitReal {
        UnitReal::new(x)
    }

    /// At φ = 0 every cosine-type outcome is 0, so `P*_cos = 1`; sine-type
    /// outcomes are fair coins, which keeps `ρ` within 1/8 of zero.
    #[test]
    fn zero_phase_cosine_is_deterministic() {
        let phase = DyadicPhase::parse("000000").unwrap();
        let mut rng = derive_stream(1, "zero", 0);
        let mut device = Device::new(&phase, &mut rng);
        for j in 1..=6u32 {
            let m = DyadicMultiple::power_of_two(j - 1);
            assert_eq!(device.measure_counts(&m, Angle::Cos, 50), [50, 0]);
        }
        for j in 1..=6 {
            let est = estimate_multiple(&phase, j, 16, &mut rng).unwrap();
            assert!(circle_distance(est.rho, UnitReal::ZERO) <= 0.125);
            assert!(!est.degenerate);
        }
        assert!(estimate_multiple(&phase, 1, 0, &mut rng).is_err());
    }

    #[test]
    fn quarter_phase_concentrates() {
        let phase = DyadicPhase::parse("01").unwrap();
        let good = (0..200)
            .filter(|&i| {
                let mut rng = derive_stream(2, "quarter", i);
                let est = estimate_multiple(&phase, 1, 64, &mut rng).unwrap();
                circle_distance(est.rho, u(0.25)) < 1.0 / 16.0
            })
            .count();
        assert!(good >= 198, "{good}");
    }

    #[test]
    fn arctangent_quadrants() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (rho, _) = rho_from_components(-h, h);
        assert!((rho.value() - 0.375).abs() < 1e-15);
        assert_eq!(rho_from_components(0.0, 0.0), (UnitReal::ZERO, true));
        assert_eq!(rho_from_counts([3, 3], [2, 2]), (UnitReal::ZERO, true));
        // exact components on a 2^-8 grid
        for i in 0..256 {
            let phi = i as f64 / 256.0;
            let (c, s) = crate::phase::cos_sin_turns(phi);
            let (rho, _) = rho_from_components(c, s);
            assert!(circle_distance(rho, u(phi)) < 1e-12, "{phi}");
        }
    }

    #[test]
    fn noiseless_word_inference() {
        let phase = DyadicPhase::parse("1011010010").unwrap();
        let rhos: Vec<UnitReal> = (1..=10)
            .map(|j| {
                UnitReal::from_fixed(
                    phase.multiple_mod_one_fixed(&DyadicMultiple::power_of_two(j - 1)),
                )
            })
            .collect();
        let alpha = infer_word(&rhos).unwrap();
        assert_eq!(alpha.bits(), &[1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 0, 0]);

        let alpha = infer_word(&[u(0.13)]).unwrap();
        assert_eq!(alpha.bits(), &[0, 0, 1]);
        assert!(infer_word(&[]).is_err());
    }

    /// Every 8-bit phase, every doubling pushed by just under ±1/16 in an
    /// adversarial sign pattern: the word is still exact.
    #[test]
    fn word_survives_sixteenth_perturbations() {
        let m = 8;
        let eps = 1.0 / 16.0 - 1e-9;
        for v in 0..256u32 {
            let phi = v as f64 / 256.0;
            let truth: Vec<f64> = (0..m).map(|l| phi * (1u32 << l) as f64).collect();
            for pattern in [0u32, 0xff, 0x55, 0xaa, 0x0f, 0xf0, 0x33, 0xcc] {
                let rhos: Vec<UnitReal> = truth
                    .iter()
                    .enumerate()
                    .map(|(l, &x)| {
                        u(if pattern >> l & 1 == 1 {
                            x + eps
                        } else {
                            x - eps
                        })
                    })
                    .collect();
                let alpha = infer_word(&rhos).unwrap();
                let expect: Vec<u8> = (0..m + 2)
                    .map(|p| {
                        if p < m {
                            (v >> (m - 1 - p) & 1) as u8
                        } else {
                            0
                        }
                    })
                    .collect();
                assert_eq!(
                    alpha.bits(),
                    expect.as_slice(),
                    "v={v} pattern={pattern:#x}"
                );
            }
        }
    }

    #[test]
    fn budget_is_two_m_s() {
        let phase = DyadicPhase::parse("110100101").unwrap();
        let mut rng = derive_stream(3, "budget", 0);
        let mut device = Device::new(&phase, &mut rng);
        run_on_device(&mut device, 9, 13).unwrap();
        assert_eq!(device.shots(), 2 * 9 * 13);
    }

    #[test]
    fn short_phase_is_rejected() {
        let phase = DyadicPhase::parse("101").unwrap();
        let mut rng = derive_stream(3, "short", 0);
        assert!(run(&phase, 4, 10, &mut rng).is_err());
    }

    #[test]
    fn four_bit_words_recovered() {
        let phase = DyadicPhase::parse("1010").unwrap();
        let exact = (0..100)
            .filter(|&i| {
                let mut rng = derive_stream(4, "m4", i);
                score_word(&phase, &run(&phase, 4, 200, &mut rng).unwrap()).word_ok
            })
            .count();
        assert!(exact >= 99);
    }

    #[test]
    fn large_s_matches_noiseless() {
        let mut rng = derive_stream(5, "large-s", 0);
        let phase = DyadicPhase::random(12, &mut rng).unwrap();
        let rhos: Vec<UnitReal> = (1..=12)
            .map(|j| {
                UnitReal::from_fixed(
                    phase.multiple_mod_one_fixed(&DyadicMultiple::power_of_two(j - 1)),
                )
            })
            .collect();
        let noisy = run(&phase, 12, 5000, &mut rng).unwrap();
        assert_eq!(noisy, infer_word(&rhos).unwrap());
    }

    #[test]
    fn scoring_handles_wraparound() {
        let phase = DyadicPhase::parse("1111111111").unwrap();
        // .000 is 2^-10 from .1111111111 across zero, inside 2^-3
        let wrapped = BinaryFraction::new(vec![0, 0, 0]).unwrap();
        let sc = score_word(&phase, &wrapped);
        assert!(sc.word_ok);
        assert_eq!(sc.bit_errors, 0);
        let wrong = BinaryFraction::new(vec![0, 1, 0]).unwrap();
        let sc = score_word(&phase, &wrong);
        assert!(!sc.word_ok);
        assert_eq!(sc.bit_errors, 2);
    }

    #[test]
    fn error_rates() {
        let mut rng = derive_stream(6, "rates", 0);
        let r = bit_and_word_error_rates(8, 10_000, 50, &mut rng).unwrap();
        assert_eq!((r.bit_rate, r.word_rate), (0.0, 0.0));
        let r = bit_and_word_error_rates(30, 2, 1, &mut rng).unwrap();
        assert!(r.word_rate == 0.0 || r.word_rate == 1.0);
        assert!(bit_and_word_error_rates(8, 4, 0, &mut rng).is_err());
    }

    #[test]
    fn repetitions_grow_logarithmically() {
        // Smallest s with word error <= 0.1; the fitted slope from the
        // smallest m must cover larger m with modest slack.
        let needed = |m: usize| {
            (1..=64u64)
                .find(|&s| {
                    let mut rng = derive_stream(9, "scaling", (m as u64) << 8 | s);
                    bit_and_word_error_rates(m, s, 100, &mut rng)
                        .unwrap()
                        .word_rate
                        <= 0.1
                })
                .unwrap()
        };
        let ms = [16usize, 64, 256, 1000];
        let s: Vec<u64> = ms.iter().map(|&m| needed(m)).collect();
        let kappa = s[0] as f64 / (ms[0] as f64).log2();
        for (&m, &sm) in ms.iter().zip(&s) {
            assert!(sm as f64 <= 1.5 * kappa * (m as f64).log2(), "{s:?}");
        }
        assert!(s.windows(2).all(|w| w[1] + 2 >= w[0]), "{s:?}");
    }

    #[test]
    fn octant_of_single_estimate() {
        assert_eq!(round_to_octant(u(0.13)).octant(), 1);
    }
}
