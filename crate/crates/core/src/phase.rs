//! Exact phase arithmetic and the basic measurement operation.
//!
//! The eigenphase enters the measurement statistics only through the reduced
//! value `M·φ mod 1`, so every routine here works on that reduced value. Two
//! phase representations are supported: rationals `k/t` (reduced with a
//! widening integer product) and dyadic fractions `.b_1 b_2 … b_L` (reduced
//! with exact multi-word shift-and-add).
//!
//! The second half of the module holds the bit-inference primitives shared by
//! Kitaev and fast phase estimation: octant rounding and backward inference of
//! a binary fraction from coarse estimates of successive doublings.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// A real number in `[0, 1)`, interpreted modulo one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct UnitReal(f64);

impl UnitReal {
    pub const ZERO: UnitReal = UnitReal(0.0);

    /// Reduces any finite real modulo one.
    pub fn new(x: f64) -> Self {
        let r = x - x.floor();
        // x slightly below an integer can round up to exactly 1.0
        if r >= 1.0 {
            UnitReal(0.0)
        } else {
            UnitReal(r)
        }
    }

    /// Value of a 64-bit binary fraction, truncated to the 53 bits an `f64` holds.
    pub fn from_fixed(bits: u64) -> Self {
        UnitReal((bits >> 11) as f64 * TWO_POW_NEG_53)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Add for UnitReal {
    type Output = UnitReal;
    fn add(self, rhs: UnitReal) -> UnitReal {
        UnitReal::new(self.0 + rhs.0)
    }
}

impl std::ops::Sub for UnitReal {
    type Output = UnitReal;
    fn sub(self, rhs: UnitReal) -> UnitReal {
        UnitReal::new(self.0 - rhs.0)
    }
}

impl fmt::Display for UnitReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Distance between two points of the unit circle `R/Z`; always in `[0, 1/2]`.
pub fn circle_distance(x: UnitReal, y: UnitReal) -> f64 {
    let d = (x.0 - y.0).abs();
    d.min(1.0 - d)
}

/// Returns `(cos 2πx, sin 2πx)`, exact at multiples of a quarter turn.
pub fn cos_sin_turns(x: f64) -> (f64, f64) {
    let quarter = (4.0 * x).round();
    let rem = x - quarter / 4.0;
    let (s, c) = (TAU * rem).sin_cos();
    match (quarter as i64).rem_euclid(4) {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// The auxiliary rotation angle of the basic measurement.
///
/// `Cos` (θ = 0) and `Sin` (θ = π/2) are kept symbolic so that the two angles
/// every algorithm relies on never pick up rounding from π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Cos,
    Sin,
    Radians(f64),
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self {
            Angle::Cos => 0.0,
            Angle::Sin => std::f64::consts::FRAC_PI_2,
            Angle::Radians(r) => r,
        }
    }

    /// `cos(2πx + θ)`.
    pub fn shifted_cos(self, x: UnitReal) -> f64 {
        let (c, s) = cos_sin_turns(x.0);
        match self {
            Angle::Cos => c,
            Angle::Sin => -s,
            Angle::Radians(theta) => {
                let (st, ct) = theta.sin_cos();
                c * ct - s * st
            }
        }
    }
}

/// Outcome distribution `(P(0), P(1))` of the basic measurement when the
/// reduced phase is `x` and the angle is `theta`.
pub fn outcome_probabilities(x: UnitReal, theta: Angle) -> (f64, f64) {
    let p0 = ((1.0 + theta.shifted_cos(x)) / 2.0).clamp(0.0, 1.0);
    (p0, 1.0 - p0)
}

/// Draws one outcome bit: 0 with probability `p0`. Consumes exactly one `f64`
/// from the stream.
pub fn draw_outcome<R: Rng + ?Sized>(p0: f64, rng: &mut R) -> u8 {
    if rng.gen::<f64>() < p0 {
        0
    } else {
        1
    }
}

/// A phase whose multiples can be reduced modulo one.
pub trait Phase {
    type Multiple: Clone + fmt::Debug;

    fn multiple_mod_one(&self, multiple: &Self::Multiple) -> Result<UnitReal>;
}

/// The phase `k/t mod 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalPhase {
    k: u64,
    t: u64,
}

impl RationalPhase {
    pub fn new(k: u64, t: u64) -> Result<Self> {
        if t == 0 {
            return Err(invalid("modulus t must be at least 1"));
        }
        if k >= t {
            return Err(invalid(format!(
                "numerator {k} out of range for modulus {t}"
            )));
        }
        Ok(RationalPhase { k, t })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `M·k mod t` computed exactly.
    pub fn reduced_numerator(&self, multiple: u64) -> u64 {
        ((multiple as u128 * self.k as u128) % self.t as u128) as u64
    }
}

impl Phase for RationalPhase {
    type Multiple = u64;

    fn multiple_mod_one(&self, multiple: &u64) -> Result<UnitReal> {
        if *multiple == 0 {
            return Err(invalid("multiple M must be at least 1"));
        }
        let r = self.reduced_numerator(*multiple);
        Ok(UnitReal::new(r as f64 / self.t as f64))
    }
}

/// A multiple that is a sum of distinct powers of two, stored as the sorted
/// exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicMultiple {
    exponents: Vec<u32>,
}

impl DyadicMultiple {
    pub fn new(mut exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(invalid("multiple M must be at least 1"));
        }
        exponents.sort_unstable();
        if exponents.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("repeated power of two in multiple"));
        }
        Ok(DyadicMultiple { exponents })
    }

    pub fn power_of_two(exponent: u32) -> Self {
        DyadicMultiple {
            exponents: vec![exponent],
        }
    }

    /// Binary decomposition of a machine integer.
    pub fn from_integer(m: u64) -> Result<Self> {
        Self::new((0..64).filter(|e| m >> e & 1 == 1).collect())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }
}

impl fmt::Display for DyadicMultiple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "2^{e}")?;
        }
        Ok(())
    }
}

/// A phase `Σ_p 2^{-p} b_p` given by its binary digits, most significant first.
///
/// Digits are packed big-endian into 64-bit limbs; bits past `len` are zero.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicPhase {
    limbs: Vec<u64>,
    len: usize,
}

impl fmt::Debug for DyadicPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicPhase(.")?;
        for p in 1..=self.len.min(80) {
            write!(f, "{}", self.bit(p))?;
        }
        if self.len > 80 {
            write!(f, "…[{} bits]", self.len)?;
        }
        write!(f, ")")
    }
}

impl DyadicPhase {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("a dyadic phase needs at least one bit"));
        }
        let mut limbs = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => limbs[i / 64] |= 1 << (63 - i % 64),
                _ => return Err(invalid(format!("bit value {b} is not 0 or 1"))),
            }
        }
        Ok(DyadicPhase {
            limbs,
            len: bits.len(),
        })
    }

    /// Parses a digit string such as `"1011"` or `".1011"`.
    pub fn parse(digits: &str) -> Result<Self> {
        let digits = digits.strip_prefix('.').unwrap_or(digits);
        let bits = digits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(invalid(format!("unexpected digit {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(&bits)
    }

    /// A uniformly random `len`-bit dyadic rational.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        if len == 0 {
            return Err(invalid("a dyadic phase needs at least one bit"));
        }
        let mut limbs: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
        mask_tail(&mut limbs, len);
        Ok(DyadicPhase { limbs, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Digit `b_p`, 1-based; zero beyond the stored length.
    pub fn bit(&self, p: usize) -> u8 {
        if p == 0 || p > self.len {
            return 0;
        }
        let i = p - 1;
        (self.limbs[i / 64] >> (63 - i % 64) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (1..=self.len).map(|p| self.bit(p)).collect()
    }

    /// The same value carried with `len` digits (zero-padded or truncated).
    pub fn with_len(&self, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(invalid("a dyadic phase needs at least one bit"));
        }
        let mut limbs = self.limbs.clone();
        limbs.resize(len.div_ceil(64), 0);
        mask_tail(&mut limbs, len);
        Ok(DyadicPhase { limbs, len })
    }

    pub fn to_unit(&self) -> UnitReal {
        UnitReal::from_fixed(self.limbs[0])
    }

    /// Fractional digits of `2^e · φ`, as limbs aligned to the binary point.
    fn shifted_limb(&self, e: u32, i: usize) -> u64 {
        let word = e as usize / 64 + i;
        let shift = e % 64;
        let hi = self.limbs.get(word).copied().unwrap_or(0);
        if shift == 0 {
            return hi;
        }
        let lo = self.limbs.get(word + 1).copied().unwrap_or(0);
        hi << shift | lo >> (64 - shift)
    }

    /// Exact `M·φ mod 1` as a full-length limb vector.
    fn multiple_limbs(&self, multiple: &DyadicMultiple) -> Vec<u64> {
        let n = self.limbs.len();
        let mut acc = vec![0u64; n];
        for &e in multiple.exponents() {
            let mut carry = false;
            for i in (0..n).rev() {
                let (s1, c1) = acc[i].overflowing_add(self.shifted_limb(e, i));
                let (s2, c2) = s1.overflowing_add(carry as u64);
                acc[i] = s2;
                carry = c1 || c2;
            }
            // carry out of the top limb is an integer part and vanishes mod 1
        }
        acc
    }

    /// Top 64 fractional bits of `M·φ mod 1`, computed exactly (truncated).
    pub fn multiple_mod_one_fixed(&self, multiple: &DyadicMultiple) -> u64 {
        if let [e] = multiple.exponents() {
            return self.shifted_limb(*e, 0);
        }
        self.multiple_limbs(multiple)[0]
    }

    /// Whether `φ` and `other` are closer than `2^-bits` on the unit circle,
    /// decided in exact arithmetic.
    pub fn within_circle_distance(&self, other: &DyadicPhase, bits: usize) -> bool {
        let n = self.limbs.len().max(other.limbs.len());
        let mut diff = vec![0u64; n];
        let mut borrow = false;
        for i in (0..n).rev() {
            let a = self.limbs.get(i).copied().unwrap_or(0);
            let b = other.limbs.get(i).copied().unwrap_or(0);
            let (d1, b1) = a.overflowing_sub(b);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            diff[i] = d2;
            borrow = b1 || b2;
        }
        if leading_zero_bits(&diff) >= bits {
            return true;
        }
        // two's complement gives the distance the other way round
        let mut carry = true;
        for limb in diff.iter_mut().rev() {
            let (v, c) = (!*limb).overflowing_add(carry as u64);
            *limb = v;
            carry = c;
        }
        leading_zero_bits(&diff) >= bits
    }
}

fn mask_tail(limbs: &mut [u64], len: usize) {
    let used = len % 64;
    if used != 0 {
        if let Some(last) = limbs.last_mut() {
            *last &= !0u64 << (64 - used);
        }
    }
}

fn leading_zero_bits(limbs: &[u64]) -> usize {
    let mut count = 0;
    for &l in limbs {
        if l == 0 {
            count += 64;
        } else {
            return count + l.leading_zeros() as usize;
        }
    }
    count
}

impl Phase for DyadicPhase {
    type Multiple = DyadicMultiple;

    fn multiple_mod_one(&self, multiple: &DyadicMultiple) -> Result<UnitReal> {
        Ok(UnitReal::from_fixed(self.multiple_mod_one_fixed(multiple)))
    }
}

/// A multiple in either representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiple {
    Integer(u64),
    Dyadic(DyadicMultiple),
}

impl fmt::Display for Multiple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiple::Integer(m) => write!(f, "{m}"),
            Multiple::Dyadic(d) => d.fmt(f),
        }
    }
}

/// One request to the basic measurement: a multiple and an angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub multiple: Multiple,
    pub angle: Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub spec: MeasurementSpec,
    pub outcome: u8,
}

/// Reduces a phase by a multiple given in either representation.
pub fn reduce_rational(phase: &RationalPhase, multiple: &Multiple) -> Result<UnitReal> {
    match multiple {
        Multiple::Integer(m) => phase.multiple_mod_one(m),
        Multiple::Dyadic(d) => {
            let m = d
                .exponents()
                .iter()
                .try_fold(0u64, |acc, &e| 1u64.checked_shl(e).map(|p| acc | p))
                .filter(|_| d.exponents().iter().all(|&e| e < 64))
                .ok_or_else(|| invalid("multiple does not fit a machine integer"))?;
            phase.multiple_mod_one(&m)
        }
    }
}

/// Simulates one basic measurement of `phase` with multiple `multiple` and
/// angle `angle`.
pub fn sample_outcome<P, R>(
    phase: &P,
    multiple: &P::Multiple,
    angle: Angle,
    rng: &mut R,
) -> Result<u8>
where
    P: Phase,
    R: Rng + ?Sized,
{
    let x = phase.multiple_mod_one(multiple)?;
    let (p0, _) = outcome_probabilities(x, angle);
    Ok(draw_outcome(p0, rng))
}

/// Simulated hardware for a hidden dyadic phase.
///
/// Every basic measurement goes through [`Device::measure_counts`], which
/// keeps an exact tally of shots for budget accounting. The device also
/// lends out its stream for any classical randomness an algorithm needs.
pub struct Device<'a, R: ?Sized> {
    phase: &'a DyadicPhase,
    rng: &'a mut R,
    shots: u64,
}

impl<'a, R: Rng + ?Sized> Device<'a, R> {
    pub fn new(phase: &'a DyadicPhase, rng: &'a mut R) -> Self {
        Device {
            phase,
            rng,
            shots: 0,
        }
    }

    /// Performs `n` measurements with the same multiple and angle and returns
    /// the number of 0 and 1 outcomes.
    pub fn measure_counts(&mut self, multiple: &DyadicMultiple, angle: Angle, n: u64) -> [u64; 2] {
        let x = UnitReal::from_fixed(self.phase.multiple_mod_one_fixed(multiple));
        let (p0, _) = outcome_probabilities(x, angle);
        let mut counts = [0u64; 2];
        for _ in 0..n {
            counts[draw_outcome(p0, self.rng) as usize] += 1;
        }
        self.shots += n;
        counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn phase_len(&self) -> usize {
        self.phase.len()
    }

    pub fn rng(&mut self) -> &mut R {
        self.rng
    }
}

/// One of the eight values `0/8 … 7/8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OctantEstimate(u8);

impl OctantEstimate {
    pub fn new(octant: u8) -> Result<Self> {
        if octant > 7 {
            return Err(invalid(format!("octant {octant} out of range 0..=7")));
        }
        Ok(OctantEstimate(octant))
    }

    pub fn octant(self) -> u8 {
        self.0
    }

    pub fn value(self) -> UnitReal {
        UnitReal(self.0 as f64 / 8.0)
    }

    /// The three binary digits `.b1 b2 b3` of the octant value.
    pub fn bits(self) -> [u8; 3] {
        [self.0 >> 2 & 1, self.0 >> 1 & 1, self.0 & 1]
    }
}

/// Nearest octant on the circle; ties go to the smaller octant index.
pub fn round_to_octant(rho: UnitReal) -> OctantEstimate {
    let mut best = 0u8;
    let mut best_dist = f64::INFINITY;
    for o in 0..8u8 {
        let d = circle_distance(rho, OctantEstimate(o).value());
        if d < best_dist {
            best = o;
            best_dist = d;
        }
    }
    OctantEstimate(best)
}

/// Chooses the leading digit of `.α a_next a_next2` that lies within a quarter
/// turn of `rho`. The two candidates are antipodal, so at most one is
/// strictly closer than 1/4; an exact tie resolves to 0.
pub fn infer_bit(rho: UnitReal, a_next: u8, a_next2: u8) -> u8 {
    let zero = UnitReal((a_next as f64) / 4.0 + (a_next2 as f64) / 8.0);
    if circle_distance(zero, rho) <= 0.25 {
        0
    } else {
        1
    }
}

/// Backward bit inference over estimates of `2^{l}·x mod 1`, `l = 0..n-1`.
///
/// The last estimate seeds the three lowest digits through octant rounding;
/// each earlier estimate then fixes one more leading digit. Returns the
/// `n + 2` digits of the reconstructed `x`.
pub fn infer_digits(estimates: &[UnitReal]) -> Result<Vec<u8>> {
    let n = estimates.len();
    if n == 0 {
        return Err(invalid("bit inference needs at least one estimate"));
    }
    let mut digits = vec![0u8; n + 2];
    digits[n - 1..].copy_from_slice(&round_to_octant(estimates[n - 1]).bits());
    for l in (0..n - 1).rev() {
        digits[l] = infer_bit(estimates[l], digits[l + 1], digits[l + 2]);
    }
    Ok(digits)
}

/// Value of a digit string `.d_1 d_2 …` (only the first 53 digits matter).
pub fn digits_value(digits: &[u8]) -> UnitReal {
    let mut v = 0.0;
    let mut w = 0.5;
    for &d in digits.iter().take(53) {
        v += d as f64 * w;
        w /= 2.0;
    }
    UnitReal::new(v)
}

/// Sharpens a window of `L` octant estimates of `2^{j-1+l}·φ`, `l = 0..L-1`,
/// into an `(L+2)`-digit estimate of `2^{j-1}·φ mod 1`.
pub fn sharpen_window(estimates: &[OctantEstimate]) -> Result<UnitReal> {
    let values: Vec<UnitReal> = estimates.iter().map(|o| o.value()).collect();
    Ok(digits_value(&infer_digits(&values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn u(x: f64) -> UnitReal {
        UnitReal::new(x)
    }

    #[test]
    fn rational_multiples() {
        let p = RationalPhase::new(1, 4).unwrap();
        assert_eq!(p.multiple_mod_one(&2).unwrap().value(), 0.5);
        let p = RationalPhase::new(3, 5).unwrap();
        assert_eq!(p.multiple_mod_one(&5).unwrap().value(), 0.0);
        assert!(p.multiple_mod_one(&0).is_err());
        assert!(RationalPhase::new(5, 5).is_err());
        assert!(RationalPhase::new(0, 0).is_err());
    }

    #[test]
    fn rational_reduction_is_exact_for_large_moduli() {
        let t = 1_000_000u64;
        let p = RationalPhase::new(999_999, t).unwrap();
        // (t-1)(t-1) = t^2 - 2t + 1 ≡ 1 (mod t)
        assert_eq!(p.reduced_numerator(t - 1), 1);
        let big = RationalPhase::new(u64::MAX - 1, u64::MAX).unwrap();
        assert_eq!(big.reduced_numerator(u64::MAX - 1), 1);
    }

    #[test]
    fn dyadic_sum_of_powers() {
        // .1011 = 0.6875; (2 + 4) * 0.6875 = 4.125
        let p = DyadicPhase::parse(".1011").unwrap();
        let m = DyadicMultiple::new(vec![1, 2]).unwrap();
        assert_eq!(p.multiple_mod_one(&m).unwrap().value(), 0.125);
        assert!(DyadicMultiple::new(vec![]).is_err());
        assert!(DyadicMultiple::new(vec![3, 3]).is_err());
        assert_eq!(
            DyadicMultiple::from_integer(5).unwrap().exponents(),
            &[0, 2]
        );
    }

    #[test]
    fn dyadic_bits_roundtrip() {
        let p = DyadicPhase::parse("1100101").unwrap();
        assert_eq!(p.bits(), vec![1, 1, 0, 0, 1, 0, 1]);
        assert_eq!(p.bit(0), 0);
        assert_eq!(p.bit(8), 0);
        assert_eq!(p.with_len(3).unwrap().bits(), vec![1, 1, 0]);
        assert_eq!(
            p.with_len(9).unwrap().bits(),
            vec![1, 1, 0, 0, 1, 0, 1, 0, 0]
        );
        assert!(DyadicPhase::parse("102").is_err());
    }

    fn big_fraction(p: &DyadicPhase) -> BigUint {
        p.bits()
            .iter()
            .fold(BigUint::zero(), |acc, &b| (acc << 1u32) + BigUint::from(b))
    }

    /// Top 64 bits of `M·φ mod 1` through big-integer arithmetic.
    fn oracle_top64(p: &DyadicPhase, exps: &[u32]) -> u64 {
        let len = p.len();
        let n = big_fraction(p);
        let modulus = BigUint::one() << len;
        let m = exps
            .iter()
            .fold(BigUint::zero(), |acc, &e| acc + (BigUint::one() << e));
        let r = (m * n) % &modulus;
        let top = if len >= 64 {
            r >> (len - 64)
        } else {
            r << (64 - len)
        };
        top.to_u64().unwrap()
    }

    #[test]
    fn dyadic_exact_small_exhaustive() {
        for len in 1..=6usize {
            for v in 0..1u32 << len {
                let bits: Vec<u8> = (0..len).map(|i| (v >> (len - 1 - i) & 1) as u8).collect();
                let p = DyadicPhase::from_bits(&bits).unwrap();
                for mask in 1u32..1 << 8 {
                    let exps: Vec<u32> = (0..8).filter(|e| mask >> e & 1 == 1).collect();
                    let m = DyadicMultiple::new(exps.clone()).unwrap();
                    assert_eq!(p.multiple_mod_one_fixed(&m), oracle_top64(&p, &exps));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn dyadic_exact_randomized(
            seed in any::<u64>(),
            len in 1usize..300,
            exps in proptest::collection::btree_set(0u32..320, 1..=8),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = DyadicPhase::random(len, &mut rng).unwrap();
            let exps: Vec<u32> = exps.into_iter().collect();
            let m = DyadicMultiple::new(exps.clone()).unwrap();
            prop_assert_eq!(p.multiple_mod_one_fixed(&m), oracle_top64(&p, &exps));
        }

        #[test]
        fn probabilities_normalized(k in 0u64..1000, extra in 1u64..1000, mult in 1u64..1_000_000, theta in 0.0f64..std::f64::consts::TAU) {
            let t = k + extra;
            let x = RationalPhase::new(k, t).unwrap().multiple_mod_one(&mult).unwrap();
            for angle in [Angle::Cos, Angle::Sin, Angle::Radians(theta)] {
                let (p0, p1) = outcome_probabilities(x, angle);
                prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
                prop_assert!((p0 + p1 - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn circle_distance_bounds(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let d = circle_distance(u(x), u(y));
            prop_assert!((0.0..=0.5).contains(&d));
            prop_assert_eq!(d, circle_distance(u(y), u(x)));
        }
    }

    #[test]
    fn shift_identity_through_reduced_value() {
        let phase = RationalPhase::new(7, 31).unwrap();
        for m in 1..31u64 {
            let reduced = phase.multiple_mod_one(&m).unwrap();
            let direct = RationalPhase::new(phase.reduced_numerator(m), 31)
                .unwrap()
                .multiple_mod_one(&1)
                .unwrap();
            for angle in [Angle::Cos, Angle::Sin, Angle::Radians(1.234)] {
                assert_eq!(
                    outcome_probabilities(reduced, angle),
                    outcome_probabilities(direct, angle)
                );
            }
        }
    }

    #[test]
    fn probability_examples() {
        assert_eq!(outcome_probabilities(u(0.0), Angle::Cos), (1.0, 0.0));
        assert_eq!(outcome_probabilities(u(0.0), Angle::Sin), (0.5, 0.5));
        let (p0, p1) = outcome_probabilities(u(0.375), Angle::Cos);
        // (1 + cos(3π/4))/2 = (2 - √2)/4
        assert!((p0 - (2.0 - 2f64.sqrt()) / 4.0).abs() < 1e-15);
        assert!((p1 - 0.853_553_390_593_273_8).abs() < 1e-15);
        // symbolic angles agree with the radian formula
        for i in 0..64 {
            let x = u(i as f64 / 64.0 + 0.003);
            let sym = outcome_probabilities(x, Angle::Sin).0;
            let rad = outcome_probabilities(x, Angle::Radians(std::f64::consts::FRAC_PI_2)).0;
            assert!((sym - rad).abs() < 1e-14);
        }
    }

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(cos_sin_turns(0.25), (0.0, 1.0));
        assert_eq!(cos_sin_turns(0.5), (-1.0, 0.0));
        assert_eq!(cos_sin_turns(0.75), (0.0, -1.0));
        assert_eq!(outcome_probabilities(u(0.5), Angle::Sin), (0.5, 0.5));
    }

    #[test]
    fn deterministic_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = RationalPhase::new(0, 1).unwrap();
        let half = RationalPhase::new(1, 2).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_outcome(&zero, &1, Angle::Cos, &mut rng).unwrap(), 0);
            assert_eq!(sample_outcome(&half, &1, Angle::Cos, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn sampling_frequency_matches_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let phase = RationalPhase::new(1, 8).unwrap();
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| sample_outcome(&phase, &1, Angle::Cos, &mut rng).unwrap() == 0)
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0).abs() < 0.005);
    }

    #[test]
    fn sampling_is_reproducible() {
        let phase = DyadicPhase::parse("1011011").unwrap();
        let m = DyadicMultiple::new(vec![0, 2]).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|i| {
                    let a = if i % 2 == 0 { Angle::Cos } else { Angle::Sin };
                    sample_outcome(&phase, &m, a, &mut rng).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn device_counts_match_individual_samples() {
        let phase = DyadicPhase::parse("0110101").unwrap();
        let m = DyadicMultiple::new(vec![1, 4]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = a.clone();
        let mut dev = Device::new(&phase, &mut a);
        let counts = dev.measure_counts(&m, Angle::Sin, 500);
        assert_eq!(dev.shots(), 500);
        let ones: u64 = (0..500)
            .map(|_| sample_outcome(&phase, &m, Angle::Sin, &mut b).unwrap() as u64)
            .sum();
        assert_eq!(counts, [500 - ones, ones]);
    }

    #[test]
    fn circle_distance_examples() {
        assert!((circle_distance(u(0.1), u(0.9)) - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(u(0.25), u(0.25)), 0.0);
        assert_eq!(circle_distance(u(0.0), u(0.5)), 0.5);
    }

    #[test]
    fn octant_rounding() {
        assert_eq!(round_to_octant(u(0.13)).octant(), 1);
        assert_eq!(round_to_octant(u(0.95)).octant(), 0);
        assert_eq!(round_to_octant(u(0.0625)).octant(), 0);
        assert_eq!(round_to_octant(u(0.9375)).octant(), 0);
        assert_eq!(OctantEstimate::new(5).unwrap().bits(), [1, 0, 1]);
        assert!(OctantEstimate::new(8).is_err());
    }

    #[test]
    fn bit_inference_examples() {
        assert_eq!(infer_bit(u(0.3), 0, 1), 0);
        assert_eq!(infer_bit(u(0.6), 0, 1), 1);
        assert_eq!(infer_bit(u(0.125), 0, 1), 0);
        // exact tie at a quarter turn from both candidates
        assert_eq!(infer_bit(u(0.375), 0, 1), 0);
    }

    /// For every φ on a 2^-10 grid, each position and each ρ within 1/8 of
    /// the true doubling, the inferred digit is the true digit.
    #[test]
    fn bit_inference_sweep() {
        let grid = 1u32 << 10;
        for v in 0..grid {
            let phi = v as f64 / grid as f64;
            for j in 1..=8u32 {
                let truth = u(phi * (1u64 << (j - 1)) as f64);
                let digit = |p: u32| ((v as u64) << (p - 1) >> 9 & 1) as u8;
                let (b, a1, a2) = (digit(j), digit(j + 1), digit(j + 2));
                for step in -63..=63 {
                    let rho = truth + u(step as f64 / 512.0);
                    assert!(circle_distance(rho, truth) < 0.125);
                    assert_eq!(infer_bit(rho, a1, a2), b, "v={v} j={j} step={step}");
                }
            }
        }
    }

    #[test]
    fn sharpen_examples() {
        let est = |o| OctantEstimate::new(o).unwrap();
        assert_eq!(sharpen_window(&[est(3)]).unwrap().value(), 0.375);
        assert!(sharpen_window(&[]).is_err());

        // φ = .10111, window over j = 1..3
        let phi = 0.71875;
        let octants: Vec<OctantEstimate> = (0..3)
            .map(|l| round_to_octant(u(phi * (1 << l) as f64)))
            .collect();
        let got = sharpen_window(&octants).unwrap();
        assert!(circle_distance(got, u(phi)) < 1.0 / 32.0);
    }

    /// Exhaustive: every 10-bit φ, windows of length ≤ 4, one octant moved to
    /// the runner-up octant. The result stays within 2^-(L+2).
    #[test]
    fn sharpen_tolerates_single_boundary_perturbation() {
        let grid = 1u32 << 10;
        for v in 0..grid {
            let phi = v as f64 / grid as f64;
            for len in 1..=4usize {
                let truth: Vec<UnitReal> = (0..len).map(|l| u(phi * (1u64 << l) as f64)).collect();
                let exact: Vec<OctantEstimate> =
                    truth.iter().map(|&x| round_to_octant(x)).collect();
                let tol = 1.0 / (1u64 << (len + 2)) as f64;
                assert!(circle_distance(sharpen_window(&exact).unwrap(), u(phi)) <= tol);
                for pos in 0..len {
                    let mut perturbed = exact.clone();
                    let o = exact[pos].octant();
                    let up = OctantEstimate::new((o + 1) % 8).unwrap();
                    let down = OctantEstimate::new((o + 7) % 8).unwrap();
                    perturbed[pos] = if circle_distance(up.value(), truth[pos])
                        <= circle_distance(down.value(), truth[pos])
                    {
                        up
                    } else {
                        down
                    };
                    assert!(circle_distance(perturbed[pos].value(), truth[pos]) <= 0.125);
                    let got = sharpen_window(&perturbed).unwrap();
                    assert!(
                        circle_distance(got, u(phi)) <= tol,
                        "v={v} len={len} pos={pos}"
                    );
                }
            }
        }
    }

    #[test]
    fn exact_circle_distance_check() {
        let a = DyadicPhase::parse("0111111").unwrap();
        let b = DyadicPhase::parse("1000000").unwrap();
        assert!(a.within_circle_distance(&b, 7 - 1));
        assert!(!a.within_circle_distance(&b, 7));
        assert!(b.within_circle_distance(&a, 6));
        let z = DyadicPhase::parse("0000").unwrap();
        let w = DyadicPhase::parse("1111").unwrap();
        // .1111 is 1/16 from 0 across the wrap
        assert!(z.within_circle_distance(&w, 3));
        assert!(!z.within_circle_distance(&w, 4));
    }
}
