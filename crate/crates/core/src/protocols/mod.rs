//! Box-pair behaviours: the quantum reference model and the classical
//! simulations, each able to emit exact outcome distributions, sampled runs,
//! or both.

mod gisin;
mod ideal;
mod lowfid;
mod pcrit;
mod toner_bacon;

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{BitPair, BlochVector, PauliRotation, Vec3};

pub use gisin::{
    gisin_distribution, gisin_frame_randomized_run, gisin_frame_randomized_sample, gisin_hashed_distribution,
};
pub use ideal::{ideal_compensated_distribution, ideal_distribution};
pub use lowfid::{lowfid_distribution, LOWFID_DEFAULT_TOLERANCE};
pub use pcrit::{cap_map, pcrit_distribution, pcrit_map, CapLimits, CapStyle, DEFAULT_WZ};
pub use toner_bacon::toner_bacon_active_sample;

/// Bob's output `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    /// `sgn(x)` with `sgn(0) = +1`.
    pub fn of(x: f64) -> Sign {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// One run's outputs `(c0, c1, beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub bits: BitPair,
    pub beta: Sign,
}

impl Outcome {
    pub fn new(bits: BitPair, beta: Sign) -> Self {
        Outcome { bits, beta }
    }

    /// Position in the 8-entry table: bit pair major, `+1` before `-1`.
    pub fn index(self) -> usize {
        self.bits.index() * 2 + (self.beta == Sign::Minus) as usize
    }

    pub fn from_index(i: usize) -> Self {
        let beta = if i.is_multiple_of(2) { Sign::Plus } else { Sign::Minus };
        Outcome::new(BitPair::from_index(i / 2), beta)
    }

    pub fn all() -> impl Iterator<Item = Outcome> {
        (0..8).map(Outcome::from_index)
    }
}

/// Tolerance on the total probability of a distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// The eight probabilities `P(c0, c1, beta | a, b)` for one setting pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    probabilities: [f64; 8],
}

impl OutcomeDistribution {
    pub fn new(probabilities: [f64; 8]) -> Result<Self, Error> {
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "negative or non-finite probability in {probabilities:?}"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
        }
        Ok(OutcomeDistribution { probabilities })
    }

    pub fn uniform() -> Self {
        OutcomeDistribution {
            probabilities: [0.125; 8],
        }
    }

    /// Relative frequencies from counts. `None` if all counts are zero.
    pub fn from_counts(counts: &[u64; 8]) -> Option<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return None;
        }
        let probabilities = counts.map(|c| c as f64 / n as f64);
        Some(OutcomeDistribution { probabilities })
    }

    pub(crate) fn from_raw(probabilities: [f64; 8]) -> Self {
        OutcomeDistribution { probabilities }
    }

    pub fn probabilities(&self) -> &[f64; 8] {
        &self.probabilities
    }

    pub fn get(&self, bits: BitPair, beta: Sign) -> f64 {
        self.probabilities[Outcome::new(bits, beta).index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| (Outcome::from_index(i), p))
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// `P(c0, c1)` summed over `beta`.
    pub fn alice_marginal(&self) -> [f64; 4] {
        BitPair::ALL.map(|c| self.get(c, Sign::Plus) + self.get(c, Sign::Minus))
    }

    /// `<beta>` over all outcomes.
    pub fn bob_mean(&self) -> f64 {
        self.iter().map(|(o, p)| o.beta.value() * p).sum()
    }

    /// `<beta | c0, c1>`, or `None` if `P(c0, c1) = 0`.
    pub fn conditional_bob_mean(&self, bits: BitPair) -> Option<f64> {
        let plus = self.get(bits, Sign::Plus);
        let minus = self.get(bits, Sign::Minus);
        let total = plus + minus;
        (total > 0.0).then(|| (plus - minus) / total)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &OutcomeDistribution) -> f64 {
        self.probabilities
            .iter()
            .zip(other.probabilities.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Same distribution with every `beta` negated.
    pub fn flip_beta(&self) -> Self {
        let mut p = [0.0; 8];
        for (o, v) in self.iter() {
            p[Outcome::new(o.bits, o.beta.flip()).index()] = v;
        }
        OutcomeDistribution { probabilities: p }
    }
}

/// Distribution of the form `P(c, beta) = w_c (1 + beta v_c . b)/2`: Alice's
/// bits have weights `w_c` and Bob's output is linear in `b` with vector `v_c`
/// given those bits. Every exact protocol here has this form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    pub weights: [f64; 4],
    pub vectors: [Vec3; 4],
}

impl ConditionalModel {
    /// Uniform weights with vectors `v_c`.
    pub fn linear(vectors: [Vec3; 4]) -> Self {
        ConditionalModel {
            weights: [0.25; 4],
            vectors,
        }
    }

    pub fn distribution(&self, b: BlochVector) -> OutcomeDistribution {
        let mut p = [0.0; 8];
        for c in BitPair::ALL {
            let w = self.weights[c.index()];
            let m = self.vectors[c.index()].dot(b.vec()).clamp(-1.0, 1.0);
            p[Outcome::new(c, Sign::Plus).index()] = 0.5 * w * (1.0 + m);
            p[Outcome::new(c, Sign::Minus).index()] = 0.5 * w * (1.0 - m);
        }
        OutcomeDistribution::from_raw(p)
    }

    /// Compensated vector `A_c`: `R_c v_c` in separated mode, `v_c` when Bob's
    /// box already applied the correction.
    pub fn compensated(&self, bits: BitPair, mode: CompensationMode) -> Vec3 {
        let v = self.vectors[bits.index()];
        match mode {
            CompensationMode::Separated => PauliRotation::for_bits(bits).apply(v),
            CompensationMode::ActiveCompensation => v,
        }
    }

    /// `sum_c w_c (1 + A_c . a)/2`.
    pub fn fidelity(&self, a: BlochVector, mode: CompensationMode) -> f64 {
        BitPair::ALL
            .iter()
            .map(|&c| {
                let w = self.weights[c.index()];
                if w == 0.0 {
                    0.0
                } else {
                    w * 0.5 * (1.0 + self.compensated(c, mode).dot(a.vec()))
                }
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, b: BlochVector, rng: &mut R) -> Run {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut bits = BitPair::ALL[3];
        for c in BitPair::ALL {
            acc += self.weights[c.index()];
            if u < acc {
                bits = c;
                break;
            }
        }
        // guard against weights that sum to slightly under one
        if self.weights[bits.index()] == 0.0 {
            bits = BitPair::ALL
                .into_iter()
                .rev()
                .find(|c| self.weights[c.index()] > 0.0)
                .unwrap_or(bits);
        }
        let v = self.vectors[bits.index()];
        Run {
            outcome: Outcome::new(bits, sample_beta(v.dot(b.vec()), rng)),
            bob_vector: Some(v),
        }
    }
}

/// Draws `beta` with `<beta> = mean`.
pub(crate) fn sample_beta<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Sign {
    if rng.gen::<f64>() < 0.5 * (1.0 + mean) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Outputs of one run, plus the vector Bob's box used to produce `beta`
/// (`<beta> = v . b`) when the model has one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Run {
    pub outcome: Outcome,
    pub bob_vector: Option<Vec3>,
}

/// How Alice's two bits reach Bob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationMode {
    /// Bits are collected separately, after Bob's box produced `beta`.
    Separated,
    /// Bits are fed into Bob's box before it produces `beta`.
    ActiveCompensation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub exact: bool,
    pub sampling: bool,
}

/// A box pair strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Protocol {
    /// Teleportation through a Werner-type resource: Bob's vector is
    /// `lambda R_c a`.
    Ideal { lambda: f64 },
    /// Alice announces the tetrahedral quarter containing `a`; Bob holds `t00`.
    Gisin,
    /// Gisin with two bits of shared randomness hashing Alice's output.
    GisinHashed,
    /// Gisin with the tetrahedron frame drawn uniformly at random each run.
    GisinFrameRandomized,
    /// Perfect teleportation for `a` in `{x, y}`, uncorrelated otherwise.
    LowFidelity { tolerance: f64 },
    /// Teleports a component-capped version of `a`.
    PCrit(CapLimits),
    /// Two-bit classical simulation that needs the bits inside Bob's box.
    TonerBaconActive,
}

impl Protocol {
    pub fn ideal(lambda: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::LambdaOutOfRange(lambda));
        }
        Ok(Protocol::Ideal { lambda })
    }

    pub fn lowfid() -> Self {
        Protocol::LowFidelity {
            tolerance: LOWFID_DEFAULT_TOLERANCE,
        }
    }

    pub fn pcrit(wz: f64) -> Result<Self, Error> {
        Ok(Protocol::PCrit(CapLimits::uniform(wz)?))
    }

    pub fn pcrit_complementary(wz: f64) -> Result<Self, Error> {
        Ok(Protocol::PCrit(CapLimits::complementary(wz)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Ideal { .. } => "ideal",
            Protocol::Gisin => "gisin",
            Protocol::GisinHashed => "gisin-hashed",
            Protocol::GisinFrameRandomized => "gisin-frame",
            Protocol::LowFidelity { .. } => "lowfid",
            Protocol::PCrit(_) => "pcrit",
            Protocol::TonerBaconActive => "toner-bacon",
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        let exact = !matches!(self, Protocol::GisinFrameRandomized | Protocol::TonerBaconActive);
        Capabilities { exact, sampling: true }
    }

    pub fn supports_exact(&self) -> bool {
        self.capabilities().exact
    }

    pub fn mode(&self) -> CompensationMode {
        match self {
            Protocol::TonerBaconActive => CompensationMode::ActiveCompensation,
            _ => CompensationMode::Separated,
        }
    }

    /// Exact conditional model at Alice input `a`.
    pub fn conditional_model(&self, a: BlochVector) -> Result<ConditionalModel, Error> {
        match *self {
            Protocol::Ideal { lambda } => Ok(ideal::model(a, lambda)),
            Protocol::Gisin => Ok(gisin::plain_model(a)),
            Protocol::GisinHashed => Ok(gisin::hashed_model(a)),
            Protocol::LowFidelity { tolerance } => Ok(lowfid::model(a, tolerance)),
            Protocol::PCrit(caps) => Ok(pcrit::model(a, &caps)),
            Protocol::GisinFrameRandomized | Protocol::TonerBaconActive => Err(Error::ExactUnsupported(self.id())),
        }
    }

    pub fn distribution(&self, a: BlochVector, b: BlochVector) -> Result<OutcomeDistribution, Error> {
        Ok(self.conditional_model(a)?.distribution(b))
    }

    /// One run with fresh randomness.
    pub fn sample<R: Rng + ?Sized>(&self, a: BlochVector, b: BlochVector, rng: &mut R) -> Run {
        match self {
            Protocol::GisinFrameRandomized => gisin::frame_randomized_run(a, b, rng),
            Protocol::TonerBaconActive => Run {
                outcome: toner_bacon_active_sample(a, b, rng),
                bob_vector: None,
            },
            _ => self
                .conditional_model(a)
                .expect("exact-capable protocol")
                .sample(b, rng),
        }
    }

    /// Canonical string identifier, e.g. `ideal:lambda=0.8`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Ideal { lambda } => write!(f, "ideal:lambda={lambda}"),
            Protocol::LowFidelity { tolerance } if *tolerance != LOWFID_DEFAULT_TOLERANCE => {
                write!(f, "lowfid:tol={tolerance}")
            }
            Protocol::PCrit(caps) => match caps.style() {
                CapStyle::Uniform => write!(f, "pcrit:wz={}", caps.wz()),
                CapStyle::Complementary => {
                    write!(f, "pcrit:wz={},caps=complementary", caps.wz())
                }
            },
            other => f.write_str(other.name()),
        }
    }
}

impl From<Protocol> for String {
    fn from(p: Protocol) -> String {
        p.id()
    }
}

impl TryFrom<String> for Protocol {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

fn parse_number(key: &str, value: &str) -> Result<f64, Error> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::BadParameter(format!("{key}={value} is not a number")))
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, p),
            None => (s, ""),
        };
        let mut lambda = None;
        let mut wz = None;
        let mut tol = None;
        let mut complementary = false;
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::BadParameter(format!("expected key=value, got `{kv}`")))?;
            match (name, key.trim()) {
                ("ideal", "lambda") => lambda = Some(parse_number(key, value)?),
                ("pcrit", "wz") => wz = Some(parse_number(key, value)?),
                ("pcrit", "caps") => match value.trim() {
                    "uniform" => complementary = false,
                    "complementary" => complementary = true,
                    other => return Err(Error::BadParameter(format!("unknown caps style `{other}`"))),
                },
                ("lowfid", "tol") => tol = Some(parse_number(key, value)?),
                _ => {
                    return Err(Error::BadParameter(format!(
                        "parameter `{key}` not accepted by `{name}`"
                    )))
                }
            }
        }
        match name {
            "ideal" => Protocol::ideal(lambda.unwrap_or(1.0)),
            "gisin" => Ok(Protocol::Gisin),
            "gisin-hashed" => Ok(Protocol::GisinHashed),
            "gisin-frame" => Ok(Protocol::GisinFrameRandomized),
            "lowfid" => Ok(Protocol::LowFidelity {
                tolerance: tol.unwrap_or(LOWFID_DEFAULT_TOLERANCE),
            }),
            "pcrit" => {
                let wz = wz.unwrap_or(core::f64::consts::FRAC_1_SQRT_2);
                if complementary {
                    Protocol::pcrit_complementary(wz)
                } else {
                    Protocol::pcrit(wz)
                }
            }
            "toner-bacon" => Ok(Protocol::TonerBaconActive),
            _ => Err(Error::UnknownProtocol(s.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ids() {
        assert_eq!(
            "ideal:lambda=0.8".parse::<Protocol>().unwrap(),
            Protocol::Ideal { lambda: 0.8 }
        );
        assert_eq!("gisin".parse::<Protocol>().unwrap(), Protocol::Gisin);
        assert_eq!("gisin-hashed".parse::<Protocol>().unwrap(), Protocol::GisinHashed);
        assert_eq!(
            "gisin-frame".parse::<Protocol>().unwrap(),
            Protocol::GisinFrameRandomized
        );
        assert_eq!("lowfid".parse::<Protocol>().unwrap(), Protocol::lowfid());
        assert_eq!("toner-bacon".parse::<Protocol>().unwrap(), Protocol::TonerBaconActive);
        let p: Protocol = "pcrit:wz=0.72".parse().unwrap();
        assert_eq!(p, Protocol::pcrit(0.72).unwrap());
        assert_eq!(p.id(), "pcrit:wz=0.72");
        let q: Protocol = "pcrit:wz=0.75,caps=complementary".parse().unwrap();
        assert_eq!(q.id().parse::<Protocol>().unwrap(), q);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!("nope".parse::<Protocol>(), Err(Error::UnknownProtocol(_))));
        assert!(matches!(
            "ideal:lambda=1.5".parse::<Protocol>(),
            Err(Error::LambdaOutOfRange(_))
        ));
        assert!(matches!(
            "ideal:lambda=x".parse::<Protocol>(),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            "gisin:wz=0.7".parse::<Protocol>(),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            "pcrit:wz=0.5".parse::<Protocol>(),
            Err(Error::WzOutOfRange(_))
        ));
    }

    #[test]
    fn capabilities_and_modes() {
        assert!(!Protocol::TonerBaconActive.supports_exact());
        assert!(!Protocol::GisinFrameRandomized.supports_exact());
        assert!(Protocol::Gisin.supports_exact());
        assert_eq!(Protocol::TonerBaconActive.mode(), CompensationMode::ActiveCompensation);
        assert_eq!(Protocol::GisinHashed.mode(), CompensationMode::Separated);
        assert!(matches!(
            Protocol::TonerBaconActive.distribution(BlochVector::X, BlochVector::X),
            Err(Error::ExactUnsupported(_))
        ));
    }

    #[test]
    fn outcome_indexing() {
        for i in 0..8 {
            assert_eq!(Outcome::from_index(i).index(), i);
        }
        assert_eq!(Outcome::new(BitPair::new(false, true), Sign::Minus).index(), 3);
    }

    #[test]
    fn distribution_validation() {
        assert!(OutcomeDistribution::new([0.125; 8]).is_ok());
        assert!(OutcomeDistribution::new([0.1; 8]).is_err());
        let mut p = [0.125; 8];
        p[0] = -0.125;
        p[1] = 0.375;
        assert!(OutcomeDistribution::new(p).is_err());
    }
}
