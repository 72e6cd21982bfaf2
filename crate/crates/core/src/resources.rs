//! Circuit resource accounting and the sequential gate-list format.
//!
//! Every controlled `U^M` counts as one gate and one timestep. The adder
//! used by the parallel model is a black box whose cost is given by
//! [`CostConstants`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phase::{Angle, DyadicMultiple, MeasurementSpec, Multiple};

/// Iterated base-2 logarithm: applications of `log2` until the value is ≤ 1.
pub fn log_star(m: u64) -> u32 {
    let mut x = m as f64;
    let mut n = 0;
    while x > 1.0 {
        x = x.log2();
        n += 1;
    }
    n
}

/// `log*(2^bits)`, for numbers too large to hold.
pub fn log_star_pow2(bits: u64) -> u32 {
    if bits == 0 {
        0
    } else {
        1 + log_star(bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kitaev,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sequential,
    Parallel,
    Cluster,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Kitaev, Algorithm::Fast];
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Sequential, Model::Parallel, Model::Cluster];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Kitaev => "kitaev",
            Algorithm::Fast => "fast",
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Sequential => "sequential",
            Model::Parallel => "parallel",
            Model::Cluster => "cluster",
        })
    }
}

impl FromStr for Algorithm {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kitaev" => Ok(Algorithm::Kitaev),
            "fast" => Ok(Algorithm::Fast),
            _ => Err(invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl FromStr for Model {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Model::Sequential),
            "parallel" => Ok(Model::Parallel),
            "cluster" => Ok(Model::Cluster),
            _ => Err(invalid(format!("unknown model {s:?}"))),
        }
    }
}

/// Constants hidden inside the asymptotic classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConstants {
    /// Qubits in the eigenvector register.
    pub a: u64,
    /// Kitaev repetitions `s = ⌈κ·log2 m⌉`.
    pub kappa_kitaev: f64,
    /// Fast repetitions `s = ⌈κ'·log* m⌉`.
    pub kappa_fast: f64,
    /// Depth of one 3-2 adder layer.
    pub csa_depth: u64,
    /// Additive depth of the final carry-lookahead stage.
    pub cla_depth: u64,
    /// Adder ancillae per summand qubit.
    pub adder_width: u64,
    /// Adder gates per summand qubit.
    pub adder_size: u64,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            a: 1000,
            kappa_kitaev: 6.4,
            kappa_fast: 8.0,
            csa_depth: 1,
            cla_depth: 4,
            adder_width: 2,
            adder_size: 8,
        }
    }
}

impl CostConstants {
    fn validate(&self) -> Result<()> {
        let ints = [
            self.a,
            self.csa_depth,
            self.cla_depth,
            self.adder_width,
            self.adder_size,
        ];
        if ints.contains(&0) || !(self.kappa_kitaev > 0.0) || !(self.kappa_fast > 0.0) {
            return Err(invalid("cost constants must be positive"));
        }
        Ok(())
    }

    /// Repetitions per position for `m` bits.
    pub fn repetitions(&self, algorithm: Algorithm, m: u64) -> u64 {
        let s = match algorithm {
            Algorithm::Kitaev => self.kappa_kitaev * (m as f64).log2(),
            Algorithm::Fast => self.kappa_fast * log_star(m) as f64,
        };
        (s.ceil() as u64).max(1)
    }
}

/// Depth, width, and size of one circuit, next to its asymptotic classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceProfile {
    pub algorithm: Algorithm,
    pub model: Model,
    pub m: u64,
    pub s: u64,
    pub depth: u64,
    pub width: u64,
    pub size: u64,
    /// Asymptotic classes of depth, width, size, as LaTeX.
    pub classes: [&'static str; 3],
}

const M_LOG_M: &str = r"O(m\log(m))";
const LOG_M: &str = r"O(\log(m))";
const M_SQUARED: &str = r"O(m^2)";
const M_LOG_STAR: &str = r"O(m\log^*(m))";
const LOG_STAR: &str = r"O(\log^*(m))";

/// Asymptotic depth, width, size classes.
pub fn asymptotic_classes(algorithm: Algorithm, model: Model) -> [&'static str; 3] {
    use Algorithm::*;
    use Model::*;
    match (algorithm, model) {
        (Kitaev, Sequential) => [M_LOG_M, M_LOG_M, M_LOG_M],
        (Kitaev, Parallel) => [LOG_M, M_LOG_M, M_LOG_M],
        (Kitaev, Cluster) => [LOG_M, M_SQUARED, M_LOG_M],
        (Fast, Sequential) => [M_LOG_STAR, M_LOG_STAR, M_LOG_STAR],
        (Fast, Parallel) => [LOG_M, M_LOG_STAR, M_LOG_STAR],
        (Fast, Cluster) => [LOG_STAR, M_SQUARED, M_LOG_STAR],
    }
}

/// Gates per basic measurement: H, Z(θ), controlled-U^M, H, MEASURE.
pub const GATES_PER_MEASUREMENT: u64 = 5;

fn ceil_log2(x: u64) -> u64 {
    x.next_power_of_two().trailing_zeros() as u64
}

pub fn profile(
    algorithm: Algorithm,
    model: Model,
    m: u64,
    constants: &CostConstants,
) -> Result<ResourceProfile> {
    if m < 2 {
        return Err(invalid("m must be at least 2"));
    }
    let s = constants.repetitions(algorithm, m);
    profile_with_s(algorithm, model, m, s, constants)
}

/// Profile for an explicit repetition count `s`; the circuit holds
/// `2·m·s` basic measurements.
pub fn profile_with_s(
    algorithm: Algorithm,
    model: Model,
    m: u64,
    s: u64,
    constants: &CostConstants,
) -> Result<ResourceProfile> {
    constants.validate()?;
    if m < 1 || s < 1 {
        return Err(invalid("m and s must be at least 1"));
    }
    let overflow = || Error::Overflow("resource count");
    let n = m
        .checked_mul(s)
        .and_then(|x| x.checked_mul(2))
        .ok_or_else(overflow)?;
    let a = constants.a;
    let (depth, width, size) = match model {
        Model::Sequential => (
            n as u128 + 4,
            n as u128 + a as u128,
            GATES_PER_MEASUREMENT as u128 * n as u128,
        ),
        Model::Parallel => {
            let adder_depth =
                constants.csa_depth * ceil_log2(s) + ceil_log2(m) + constants.cla_depth;
            (
                2 * adder_depth as u128 + 5,
                (1 + constants.adder_width as u128) * n as u128 + a as u128,
                (4 + 2 * constants.adder_size as u128) * n as u128 + 1,
            )
        }
        Model::Cluster => (
            2 * s as u128 + 4,
            m as u128 * (2 * s as u128 + a as u128),
            GATES_PER_MEASUREMENT as u128 * n as u128,
        ),
    };
    let fit = |x: u128| u64::try_from(x).map_err(|_| overflow());
    let (depth, width, size) = (fit(depth)?, fit(width)?, fit(size)?);
    Ok(ResourceProfile {
        algorithm,
        model,
        m,
        s,
        depth,
        width,
        size,
        classes: asymptotic_classes(algorithm, model),
    })
}

fn angle_text(angle: Angle) -> String {
    match angle {
        Angle::Cos => "0".into(),
        Angle::Sin => "pi/2".into(),
        Angle::Radians(r) => format!("{r:?}"),
    }
}

fn parse_angle(text: &str) -> Result<Angle> {
    match text {
        "0" => Ok(Angle::Cos),
        "pi/2" => Ok(Angle::Sin),
        _ => text
            .parse::<f64>()
            .map(Angle::Radians)
            .map_err(|_| invalid(format!("bad angle {text:?}"))),
    }
}

fn parse_multiple(text: &str) -> Result<Multiple> {
    if text.contains('^') {
        let exps = text
            .split('+')
            .map(|term| {
                term.strip_prefix("2^")
                    .and_then(|e| e.parse::<u32>().ok())
                    .ok_or_else(|| invalid(format!("bad multiple {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Multiple::Dyadic(DyadicMultiple::new(exps)?))
    } else {
        text.parse::<u64>()
            .map(Multiple::Integer)
            .map_err(|_| invalid(format!("bad multiple {text:?}")))
    }
}

/// Gate list of the sequential circuit, one gate per line: every `H`, then a
/// `Z(θ)` and controlled `U^M` per ancilla, then every `H`, then every
/// `MEASURE`. Ancilla `q{i}` carries measurement `i`.
pub fn emit_sequential_circuit(m: usize, s: usize, specs: &[MeasurementSpec]) -> Result<String> {
    if specs.len() != m * s {
        return Err(invalid(format!(
            "{} specs supplied, m·s = {}",
            specs.len(),
            m * s
        )));
    }
    let mut out = String::new();
    for i in 0..specs.len() {
        out.push_str(&format!("H q{i}\n"));
    }
    for (i, spec) in specs.iter().enumerate() {
        out.push_str(&format!("Z({}) q{i}\n", angle_text(spec.angle)));
        out.push_str(&format!("CU^{} q{i} A\n", spec.multiple));
    }
    for i in 0..specs.len() {
        out.push_str(&format!("H q{i}\n"));
    }
    for i in 0..specs.len() {
        out.push_str(&format!("MEASURE q{i}\n"));
    }
    Ok(out)
}

/// Recovers the measurement specs from an emitted gate list.
pub fn parse_sequential_circuit(text: &str) -> Result<Vec<MeasurementSpec>> {
    let mut angles: Vec<Option<Angle>> = Vec::new();
    let mut specs = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        let gate = parts.next().unwrap_or_default();
        let qubit = parts
            .next()
            .and_then(|q| q.strip_prefix('q'))
            .and_then(|q| q.parse::<usize>().ok())
            .ok_or_else(|| invalid(format!("bad gate line {line:?}")))?;
        if let Some(theta) = gate.strip_prefix("Z(").and_then(|g| g.strip_suffix(')')) {
            if qubit != angles.len() {
                return Err(invalid(format!("out-of-order rotation on q{qubit}")));
            }
            angles.push(Some(parse_angle(theta)?));
        } else if let Some(multiple) = gate.strip_prefix("CU^") {
            let angle = angles
                .get_mut(qubit)
                .and_then(Option::take)
                .ok_or_else(|| invalid(format!("controlled gate without rotation on q{qubit}")))?;
            specs.push(MeasurementSpec {
                multiple: parse_multiple(multiple)?,
                angle,
            });
        } else if gate != "H" && gate != "MEASURE" {
            return Err(invalid(format!("unknown gate {gate:?}")));
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1), 0);
        assert_eq!(log_star(2), 1);
        assert_eq!(log_star(16), 3);
        assert_eq!(log_star(65536), 4);
        assert_eq!(log_star(65537), 5);
        assert_eq!(log_star_pow2(16), 4);
        assert_eq!(log_star_pow2(65536), 5);
        assert_eq!(log_star(u64::MAX), 5);
    }

    #[test]
    fn log_star_is_monotone_and_small() {
        let mut prev = 0;
        for m in (1..5000u64).chain((12..64).map(|b| 1u64 << b)) {
            let v = log_star(m);
            assert!(v >= prev);
            prev = v;
        }
        for bits in 0..=65536u64 {
            assert!(log_star_pow2(bits) <= 5);
        }
    }

    #[test]
    fn sequential_example() {
        let c = CostConstants::default();
        let p = profile(Algorithm::Kitaev, Model::Sequential, 1000, &c).unwrap();
        assert_eq!(p.s, 64);
        assert_eq!(p.width, 129_000);
        assert_eq!(p.size, 5 * 2 * 1000 * 64);
        assert_eq!(p.classes, [M_LOG_M; 3]);
    }

    #[test]
    fn fast_cluster_depth_tracks_log_star() {
        let c = CostConstants::default();
        let p = profile(Algorithm::Fast, Model::Cluster, 1 << 16, &c).unwrap();
        assert_eq!(p.s, (c.kappa_fast * 4.0) as u64);
        assert_eq!(p.depth, 2 * p.s + 4);
    }

    #[test]
    fn profiles_are_positive_and_ordered() {
        let c = CostConstants::default();
        for m in [2u64, 3, 1 << 10, 1 << 16, 1 << 30, 1 << 40] {
            for alg in Algorithm::ALL {
                for model in Model::ALL {
                    let p = profile(alg, model, m, &c).unwrap();
                    assert!(p.depth >= 1 && p.width >= 1 && p.size >= p.depth, "{p:?}");
                }
            }
            if m >= 1 << 10 {
                for model in Model::ALL {
                    let k = profile(Algorithm::Kitaev, model, m, &c).unwrap();
                    let f = profile(Algorithm::Fast, model, m, &c).unwrap();
                    assert!(f.size <= k.size);
                }
            }
        }
        assert!(profile(Algorithm::Fast, Model::Parallel, 1, &c).is_err());
        assert_eq!("cluster".parse::<Model>().unwrap(), Model::Cluster);
        assert!("mesh".parse::<Model>().is_err());
    }

    #[test]
    fn cluster_depth_ratio_follows_log_star_over_log() {
        let c = CostConstants::default();
        assert!(profile(Algorithm::Kitaev, Model::Cluster, 1 << 60, &c).is_err());
        let ratios: Vec<f64> = (10..=50)
            .step_by(5)
            .map(|b| {
                let m = 1u64 << b;
                let f = profile(Algorithm::Fast, Model::Cluster, m, &c)
                    .unwrap()
                    .depth as f64;
                let k = profile(Algorithm::Kitaev, Model::Cluster, m, &c)
                    .unwrap()
                    .depth as f64;
                (f / k) / (log_star(m) as f64 / b as f64)
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi / lo < 1.5, "{ratios:?}");
    }

    #[test]
    fn one_measurement_is_five_lines() {
        let spec = MeasurementSpec {
            multiple: Multiple::Integer(3),
            angle: Angle::Sin,
        };
        let text = emit_sequential_circuit(1, 1, std::slice::from_ref(&spec)).unwrap();
        assert_eq!(text, "H q0\nZ(pi/2) q0\nCU^3 q0 A\nH q0\nMEASURE q0\n");
        assert!(emit_sequential_circuit(2, 1, &[spec]).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = MeasurementSpec> {
        let multiple = prop_oneof![
            (1u64..u64::MAX).prop_map(Multiple::Integer),
            prop::collection::btree_set(0u32..5000, 1..6).prop_map(|e| {
                Multiple::Dyadic(DyadicMultiple::new(e.into_iter().collect()).unwrap())
            }),
        ];
        let angle = prop_oneof![
            Just(Angle::Cos),
            Just(Angle::Sin),
            (0.0..std::f64::consts::TAU).prop_map(Angle::Radians),
        ];
        (multiple, angle).prop_map(|(multiple, angle)| MeasurementSpec { multiple, angle })
    }

    proptest! {
        #[test]
        fn circuit_round_trip(m in 1usize..5, s in 1usize..5, pool in prop::collection::vec(arb_spec(), 16)) {
            let specs = &pool[..m * s];
            let text = emit_sequential_circuit(m, s, specs).unwrap();
            let n = m * s;
            prop_assert_eq!(text.lines().count(), 5 * n);
            for prefix in ["H ", "Z(", "CU^", "MEASURE "] {
                let count = text.lines().filter(|l| l.starts_with(prefix)).count();
                prop_assert_eq!(count, if prefix == "H " { 2 * n } else { n });
            }
            prop_assert_eq!(parse_sequential_circuit(&text).unwrap(), specs.to_vec());
        }
    }
}
