//! Experiment tables, reconstruction of Bob's conditional vectors and the
//! checks that can be run on observed statistics alone.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{BitPair, BlochVector, PauliRotation, Vec3};
use crate::protocols::{Outcome, OutcomeDistribution, Protocol, Sign};

/// Tolerance on `|v| - 1` for vectors read from data.
pub const RECORD_UNIT_TOLERANCE: f64 = 1e-9;

/// Default rms threshold for the linearity check on sampled data.
pub const SAMPLED_LINEARITY_THRESHOLD: f64 = 0.05;
/// Threshold for the linearity check on exact distributions.
pub const EXACT_LINEARITY_THRESHOLD: f64 = 1e-9;
/// Marginal tolerance for exact distributions.
pub const EXACT_MARGINAL_TOLERANCE: f64 = 1e-9;

/// One run: inputs `(a, b)` and outputs `(c0, c1, beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub a: BlochVector,
    pub b: BlochVector,
    pub bits: BitPair,
    pub beta: Sign,
}

impl ExperimentRecord {
    pub fn new(a: BlochVector, b: BlochVector, outcome: Outcome) -> Self {
        ExperimentRecord {
            a,
            b,
            bits: outcome.bits,
            beta: outcome.beta,
        }
    }

    /// Builds a record from raw coordinates, accepting vectors within
    /// [`RECORD_UNIT_TOLERANCE`] of unit length.
    pub fn from_raw(a: [f64; 3], b: [f64; 3], c0: u8, c1: u8, beta: i8) -> Result<Self, Error> {
        let a = BlochVector::with_tolerance(Vec3::from_array(a), RECORD_UNIT_TOLERANCE)?;
        let b = BlochVector::with_tolerance(Vec3::from_array(b), RECORD_UNIT_TOLERANCE)?;
        if c0 > 1 || c1 > 1 {
            return Err(Error::InvalidArgument(format!("bits must be 0 or 1, got ({c0}, {c1})")));
        }
        let beta =
            Sign::from_i8(beta).ok_or_else(|| Error::InvalidArgument(format!("beta must be -1 or +1, got {beta}")))?;
        Ok(ExperimentRecord {
            a,
            b,
            bits: BitPair::from_bits(c0, c1),
            beta,
        })
    }

    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.bits, self.beta)
    }
}

/// A coordinate rounded to 12 significant digits: `mantissa * 10^(exponent - 11)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Rounded {
    mantissa: i64,
    exponent: i32,
}

fn round_12(x: f64) -> Rounded {
    if x == 0.0 || !x.is_finite() {
        return Rounded {
            mantissa: 0,
            exponent: 0,
        };
    }
    let mut exponent = libm::floor(libm::log10(x.abs())) as i32;
    let mut mantissa = libm::round(x.abs() * libm::pow(10.0, f64::from(11 - exponent))) as i64;
    if mantissa >= 1_000_000_000_000 {
        mantissa /= 10;
        exponent += 1;
    } else if mantissa < 100_000_000_000 {
        mantissa = libm::round(x.abs() * libm::pow(10.0, f64::from(12 - exponent))) as i64;
        exponent -= 1;
    }
    if x < 0.0 {
        mantissa = -mantissa;
    }
    Rounded { mantissa, exponent }
}

type VectorKey = [Rounded; 3];

fn vector_key(v: BlochVector) -> VectorKey {
    v.vec().to_array().map(round_12)
}

/// All records sharing one `(a, b)` setting pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingGroup {
    pub a: BlochVector,
    pub b: BlochVector,
    pub counts: [u64; 8],
    pub indices: Vec<usize>,
}

impl SettingGroup {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> OutcomeDistribution {
        OutcomeDistribution::from_counts(&self.counts).expect("groups are non-empty")
    }
}

/// A collection of runs, grouped by setting pair.
///
/// Settings are matched after rounding each coordinate to 12 significant
/// digits; real data must be binned onto repeated settings beforehand.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentTable {
    records: Vec<ExperimentRecord>,
    groups: BTreeMap<(VectorKey, VectorKey), SettingGroup>,
}

impl ExperimentTable {
    pub fn new(records: Vec<ExperimentRecord>) -> Self {
        let mut groups: BTreeMap<(VectorKey, VectorKey), SettingGroup> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let g = groups
                .entry((vector_key(r.a), vector_key(r.b)))
                .or_insert_with(|| SettingGroup {
                    a: r.a,
                    b: r.b,
                    counts: [0; 8],
                    indices: Vec::new(),
                });
            g.counts[r.outcome().index()] += 1;
            g.indices.push(i);
        }
        ExperimentTable { records, groups }
    }

    pub fn records(&self) -> &[ExperimentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn groups(&self) -> impl Iterator<Item = &SettingGroup> {
        self.groups.values()
    }

    pub fn group(&self, a: BlochVector, b: BlochVector) -> Option<&SettingGroup> {
        self.groups.get(&(vector_key(a), vector_key(b)))
    }

    /// Distinct Alice inputs, in key order.
    pub fn alice_inputs(&self) -> Vec<BlochVector> {
        let mut out: Vec<BlochVector> = Vec::new();
        let mut last: Option<VectorKey> = None;
        for ((ka, _), g) in &self.groups {
            if last != Some(*ka) {
                out.push(g.a);
                last = Some(*ka);
            }
        }
        out
    }

    /// Bob settings recorded together with Alice input `a`.
    pub fn b_settings_for(&self, a: BlochVector) -> Vec<BlochVector> {
        let ka = vector_key(a);
        self.groups
            .iter()
            .filter(|((k, _), _)| *k == ka)
            .map(|(_, g)| g.b)
            .collect()
    }

    /// Counts of Alice's bits for input `a`, pooled over every `b`.
    pub fn alice_counts(&self, a: BlochVector) -> [u64; 4] {
        let ka = vector_key(a);
        let mut out = [0u64; 4];
        for ((k, _), g) in &self.groups {
            if *k == ka {
                for c in BitPair::ALL {
                    out[c.index()] +=
                        g.counts[Outcome::new(c, Sign::Plus).index()] + g.counts[Outcome::new(c, Sign::Minus).index()];
                }
            }
        }
        out
    }

    /// Same table with every `beta` negated.
    pub fn flip_beta(&self) -> Self {
        ExperimentTable::new(
            self.records
                .iter()
                .map(|r| ExperimentRecord {
                    beta: r.beta.flip(),
                    ..*r
                })
                .collect(),
        )
    }
}

/// Relative frequencies of the eight outcomes at setting `(a, b)`.
pub fn empirical_distribution(
    table: &ExperimentTable,
    a: BlochVector,
    b: BlochVector,
) -> Result<OutcomeDistribution, Error> {
    table
        .group(a, b)
        .map(SettingGroup::distribution)
        .ok_or(Error::MissingSettings {
            a: a.into(),
            b: b.into(),
        })
}

/// Anything that yields `P(c0, c1, beta | a, b)`: an exact protocol or an
/// experiment table.
pub trait Statistics {
    fn distribution(&self, a: BlochVector, b: BlochVector) -> Result<OutcomeDistribution, Error>;

    /// `P(c0, c1 | a)`.
    fn alice_marginal(&self, a: BlochVector) -> Result<[f64; 4], Error>;

    /// Number of runs behind `P(c0, c1 | a)`; `None` for exact sources.
    fn alice_sample_count(&self, a: BlochVector) -> Option<u64>;

    fn is_exact(&self) -> bool;

    /// Raw outcome counts at `(a, b)`, for sampled sources.
    fn setting_counts(&self, _a: BlochVector, _b: BlochVector) -> Option<[u64; 8]> {
        None
    }
}

impl Statistics for Protocol {
    fn distribution(&self, a: BlochVector, b: BlochVector) -> Result<OutcomeDistribution, Error> {
        Protocol::distribution(self, a, b)
    }

    fn alice_marginal(&self, a: BlochVector) -> Result<[f64; 4], Error> {
        Ok(self.conditional_model(a)?.weights)
    }

    fn alice_sample_count(&self, _a: BlochVector) -> Option<u64> {
        None
    }

    fn is_exact(&self) -> bool {
        true
    }
}

impl Statistics for ExperimentTable {
    fn distribution(&self, a: BlochVector, b: BlochVector) -> Result<OutcomeDistribution, Error> {
        empirical_distribution(self, a, b)
    }

    fn alice_marginal(&self, a: BlochVector) -> Result<[f64; 4], Error> {
        let counts = self.alice_counts(a);
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::MissingSettings {
                a: a.into(),
                b: [f64::NAN; 3],
            });
        }
        Ok(counts.map(|c| c as f64 / n as f64))
    }

    fn alice_sample_count(&self, a: BlochVector) -> Option<u64> {
        Some(self.alice_counts(a).iter().sum())
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn setting_counts(&self, a: BlochVector, b: BlochVector) -> Option<[u64; 8]> {
        self.group(a, b).map(|g| g.counts)
    }
}

/// `+-x, +-y, +-z`.
pub fn default_b_settings() -> Vec<BlochVector> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        out.push(BlochVector::axis(axis));
        out.push(-BlochVector::axis(axis));
    }
    out
}

/// The six axis settings plus the eight cube diagonals. Off-axis settings
/// expose odd non-linearities that a `+-` axis pair cannot.
pub fn extended_b_settings() -> Vec<BlochVector> {
    let mut out = default_b_settings();
    let s = 0.577_350_269_189_625_8;
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                out.push(BlochVector::new_unchecked(Vec3::new(sx * s, sy * s, sz * s)));
            }
        }
    }
    out
}

/// Least-squares estimate of Bob's vector for one value of Alice's bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalVectorEstimate {
    pub bits: BitPair,
    /// Fitted `V` with `<beta | c, a, b> = V . b`.
    pub v: Vec3,
    /// Compensated vector `R_c V`.
    pub compensated: Vec3,
    /// Root-mean-square misfit of the linear model across settings.
    pub residual: f64,
    /// Runs behind the fit (zero for exact sources).
    pub count: u64,
    pub settings_used: usize,
}

/// Conditional vectors for all four bit pairs at one Alice input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFit {
    pub a: BlochVector,
    /// `P(c0, c1 | a)`.
    pub weights: [f64; 4],
    /// `None` where the bits never occur (or too few settings saw them).
    pub cells: [Option<ConditionalVectorEstimate>; 4],
}

impl ConditionalFit {
    pub fn max_residual(&self) -> f64 {
        self.cells.iter().flatten().map(|c| c.residual).fold(0.0, f64::max)
    }

    /// `sum_c P(c|a) (1 + A_c . a)/2` over the fitted cells.
    pub fn fidelity(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(|c| self.weights[c.bits.index()] * 0.5 * (1.0 + c.compensated.dot(self.a.vec())))
            .sum()
    }
}

pub(crate) fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = rhs[i];
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let pivot_row = aug[col];
        for (row, r) in aug.iter_mut().enumerate() {
            if row != col {
                let f = r[col] / pivot_row[col];
                for k in col..4 {
                    r[k] -= f * pivot_row[k];
                }
            }
        }
    }
    Some([aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]])
}

fn gram(settings: &[BlochVector]) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for b in settings {
        let v = b.vec().to_array();
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += v[i] * v[j];
            }
        }
    }
    g
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Whether the settings span three dimensions, judged by the Gram determinant
/// relative to its isotropic value.
fn spans_space(settings: &[BlochVector]) -> bool {
    if settings.len() < 3 {
        return false;
    }
    let g = gram(settings);
    let mean_eig = (g[0][0] + g[1][1] + g[2][2]) / 3.0;
    det3(g) > 1e-9 * mean_eig * mean_eig * mean_eig
}

const MIN_FIT_SETTINGS: usize = 4;

/// Fits `<beta | c0, c1, a, b> = V_c . b` across `b_settings` by least squares,
/// separately for each bit pair.
pub fn fit_conditional_vectors<S: Statistics + ?Sized>(
    source: &S,
    a: BlochVector,
    b_settings: &[BlochVector],
) -> Result<ConditionalFit, Error> {
    if b_settings.len() < MIN_FIT_SETTINGS {
        return Err(Error::InsufficientSettings {
            needed: MIN_FIT_SETTINGS,
            found: b_settings.len(),
        });
    }
    if !spans_space(b_settings) {
        return Err(Error::RankDeficient);
    }

    let dists = b_settings
        .iter()
        .map(|&b| source.distribution(a, b))
        .collect::<Result<Vec<_>, _>>()?;
    let counts: Vec<Option<[u64; 8]>> = b_settings.iter().map(|&b| source.setting_counts(a, b)).collect();

    let mut cells = [None; 4];
    for c in BitPair::ALL {
        let mut used = Vec::new();
        let mut means = Vec::new();
        let mut n_records = 0u64;
        for (k, d) in dists.iter().enumerate() {
            if let Some(m) = d.conditional_bob_mean(c) {
                used.push(b_settings[k]);
                means.push(m);
                if let Some(cnt) = counts[k] {
                    n_records += cnt[Outcome::new(c, Sign::Plus).index()] + cnt[Outcome::new(c, Sign::Minus).index()];
                }
            }
        }
        if used.len() < MIN_FIT_SETTINGS || !spans_space(&used) {
            continue;
        }
        let g = gram(&used);
        let mut rhs = Vec3::ZERO;
        for (b, m) in used.iter().zip(&means) {
            rhs += b.vec() * *m;
        }
        let v = Vec3::from_array(solve3(g, rhs.to_array()).ok_or(Error::RankDeficient)?);
        let sq: f64 = used
            .iter()
            .zip(&means)
            .map(|(b, m)| {
                let r = m - v.dot(b.vec());
                r * r
            })
            .sum();
        cells[c.index()] = Some(ConditionalVectorEstimate {
            bits: c,
            v,
            compensated: PauliRotation::for_bits(c).apply(v),
            residual: libm::sqrt(sq / used.len() as f64),
            count: n_records,
            settings_used: used.len(),
        });
    }

    Ok(ConditionalFit {
        a,
        weights: source.alice_marginal(a)?,
        cells,
    })
}

/// Pass/fail with the measured quantity and the threshold it was held to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Linearity of `<beta>` in `b`: passes iff every fitted cell's rms residual
/// is at most `threshold`.
pub fn check_linearity(fit: &ConditionalFit, threshold: f64) -> CheckResult {
    let residual = fit.max_residual();
    CheckResult {
        passed: residual <= threshold,
        value: residual,
        threshold,
    }
}

/// Per-input deviations of `P(c0, c1 | a)` from `1/4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub deviations: Vec<([f64; 3], [f64; 4])>,
}

fn marginal_deviation(marginal: [f64; 4]) -> [f64; 4] {
    marginal.map(|p| p - 0.25)
}

/// Checks `|P(c0, c1 | a) - 1/4| <= tolerance` for every cell and every `a`.
pub fn check_alice_marginal<S: Statistics + ?Sized>(
    source: &S,
    inputs: &[BlochVector],
    tolerance: f64,
) -> Result<MarginalCheck, Error> {
    let mut deviations = Vec::with_capacity(inputs.len());
    let mut max_deviation: f64 = 0.0;
    for &a in inputs {
        let dev = marginal_deviation(source.alice_marginal(a)?);
        max_deviation = dev.iter().fold(max_deviation, |m, d| m.max(d.abs()));
        deviations.push((a.into(), dev));
    }
    Ok(MarginalCheck {
        passed: max_deviation <= tolerance,
        max_deviation,
        tolerance,
        deviations,
    })
}

/// Marginal check on a single distribution.
pub fn check_distribution_marginal(dist: &OutcomeDistribution, tolerance: f64) -> MarginalCheck {
    let dev = marginal_deviation(dist.alice_marginal());
    let max_deviation = dev.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    MarginalCheck {
        passed: max_deviation <= tolerance,
        max_deviation,
        tolerance,
        deviations: alloc::vec![([f64::NAN; 3], dev)],
    }
}

/// Bob's marginal `<beta | a, b>` compared across Alice inputs at fixed `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingCheck {
    pub passed: bool,
    /// Largest deviation from the pooled mean, in standard errors.
    pub max_z: f64,
    pub max_deviation: f64,
    pub z_threshold: f64,
}

/// With the bits collected only after Bob's box has answered, Bob's marginal
/// cannot depend on Alice's input. A table where it does was produced with
/// information flowing into Bob's box, e.g. active compensation.
pub fn check_no_signaling(table: &ExperimentTable, z_threshold: f64) -> NoSignalingCheck {
    let mut by_b: BTreeMap<VectorKey, Vec<(f64, f64)>> = BTreeMap::new();
    for g in table.groups() {
        let n = g.total() as f64;
        let plus: u64 = BitPair::ALL
            .iter()
            .map(|&c| g.counts[Outcome::new(c, Sign::Plus).index()])
            .sum();
        let mean = (2.0 * plus as f64 - n) / n;
        by_b.entry(vector_key(g.b)).or_default().push((n, mean));
    }
    let mut max_z: f64 = 0.0;
    let mut max_deviation: f64 = 0.0;
    for entries in by_b.values().filter(|e| e.len() > 1) {
        let total: f64 = entries.iter().map(|(n, _)| n).sum();
        let pooled: f64 = entries.iter().map(|(n, m)| n * m).sum::<f64>() / total;
        let var = (1.0 - pooled * pooled).max(1.0 / total);
        for &(n, m) in entries {
            let dev = (m - pooled).abs();
            max_deviation = max_deviation.max(dev);
            max_z = max_z.max(dev / libm::sqrt(var / n));
        }
    }
    NoSignalingCheck {
        passed: max_z <= z_threshold,
        max_z,
        max_deviation,
        z_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BlochVector, T00};
    use crate::protocols::Protocol;
    use alloc::vec;

    fn rec(a: BlochVector, b: BlochVector, c0: u8, c1: u8, beta: Sign) -> ExperimentRecord {
        ExperimentRecord {
            a,
            b,
            bits: BitPair::from_bits(c0, c1),
            beta,
        }
    }

    #[test]
    fn point_mass_table() {
        let r = rec(BlochVector::X, BlochVector::Z, 0, 0, Sign::Plus);
        let t = ExperimentTable::new(vec![r; 4]);
        let d = empirical_distribution(&t, BlochVector::X, BlochVector::Z).unwrap();
        assert_eq!(d.get(BitPair::new(false, false), Sign::Plus), 1.0);
    }

    #[test]
    fn missing_settings() {
        let t = ExperimentTable::new(vec![rec(BlochVector::X, BlochVector::Z, 0, 1, Sign::Minus)]);
        assert!(matches!(
            empirical_distribution(&t, BlochVector::Y, BlochVector::Z),
            Err(Error::MissingSettings { .. })
        ));
    }

    #[test]
    fn grouping_covers_each_record_once() {
        let a2 = BlochVector::new(0.6, 0.8, 0.0).unwrap();
        let recs = vec![
            rec(BlochVector::X, BlochVector::Z, 0, 0, Sign::Plus),
            rec(a2, BlochVector::Z, 1, 0, Sign::Plus),
            rec(BlochVector::X, BlochVector::Z, 1, 1, Sign::Minus),
            rec(BlochVector::X, BlochVector::Y, 0, 1, Sign::Minus),
        ];
        let t = ExperimentTable::new(recs);
        let mut seen: Vec<usize> = t.groups().flat_map(|g| g.indices.iter().copied()).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(t.groups().count(), 3);
        assert_eq!(t.alice_inputs().len(), 2);
        assert_eq!(t.b_settings_for(BlochVector::X).len(), 2);
        assert_eq!(t.alice_counts(BlochVector::X), [1, 1, 0, 1]);
    }

    #[test]
    fn grouping_tolerates_last_digit_noise() {
        let a = BlochVector::new(0.6, 0.8, 0.0).unwrap();
        let a_noisy = BlochVector::with_tolerance(Vec3::new(0.6 + 1e-15, 0.8, 0.0), 1e-9).unwrap();
        let t = ExperimentTable::new(vec![
            rec(a, BlochVector::Z, 0, 0, Sign::Plus),
            rec(a_noisy, BlochVector::Z, 0, 0, Sign::Plus),
        ]);
        assert_eq!(t.groups().count(), 1);
    }

    #[test]
    fn round_12_digits() {
        assert_eq!(round_12(0.1), round_12(0.1 + 1e-17));
        assert_ne!(round_12(0.1), round_12(0.1 + 1e-11));
        assert_eq!(round_12(-0.25).mantissa, -250_000_000_000);
        assert_eq!(round_12(0.0), round_12(-0.0));
    }

    #[test]
    fn record_validation() {
        assert!(ExperimentRecord::from_raw([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0, 1, -1).is_ok());
        assert!(ExperimentRecord::from_raw([1.0 + 1e-10, 0.0, 0.0], [0.0, 0.0, 1.0], 0, 1, -1).is_ok());
        assert!(ExperimentRecord::from_raw([1.1, 0.0, 0.0], [0.0, 0.0, 1.0], 0, 1, -1).is_err());
        assert!(ExperimentRecord::from_raw([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 2, 1, -1).is_err());
        assert!(ExperimentRecord::from_raw([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0, 1, 0).is_err());
    }

    #[test]
    fn fit_recovers_ideal_vectors() {
        let a = BlochVector::new(0.48, 0.6, 0.64).unwrap();
        let fit = fit_conditional_vectors(&Protocol::Ideal { lambda: 1.0 }, a, &default_b_settings()).unwrap();
        for c in BitPair::ALL {
            let cell = fit.cells[c.index()].unwrap();
            let want = PauliRotation::for_bits(c).apply(a.vec());
            assert!(cell.v.max_abs_diff(want) < 1e-12);
            assert!(cell.compensated.max_abs_diff(a.vec()) < 1e-12);
            assert!(cell.residual < 1e-12);
        }
        assert!(check_linearity(&fit, EXACT_LINEARITY_THRESHOLD).passed);
    }

    #[test]
    fn fit_recovers_shrunk_vectors() {
        let a = BlochVector::new(0.0, 0.6, 0.8).unwrap();
        let fit = fit_conditional_vectors(&Protocol::Ideal { lambda: 0.8 }, a, &default_b_settings()).unwrap();
        for cell in fit.cells.iter().flatten() {
            assert!((cell.compensated.norm() - 0.8).abs() < 1e-12);
            assert!((cell.compensated * (1.0 / 0.8)).max_abs_diff(a.vec()) < 1e-12);
        }
    }

    #[test]
    fn fit_gisin_center() {
        let fit = fit_conditional_vectors(&Protocol::Gisin, T00, &default_b_settings()).unwrap();
        let cell = fit.cells[0].unwrap();
        assert!(cell.v.max_abs_diff(T00.vec()) < 1e-12);
        assert!(cell.compensated.max_abs_diff(T00.vec()) < 1e-12);
        assert!(fit.cells[1..].iter().all(Option::is_none));
        assert!(check_linearity(&fit, EXACT_LINEARITY_THRESHOLD).passed);
    }

    #[test]
    fn fit_errors() {
        let p = Protocol::Ideal { lambda: 1.0 };
        let three = vec![BlochVector::X, BlochVector::Y, BlochVector::Z];
        assert!(matches!(
            fit_conditional_vectors(&p, BlochVector::X, &three),
            Err(Error::InsufficientSettings { .. })
        ));
        let coplanar = vec![BlochVector::X, -BlochVector::X, BlochVector::Y, -BlochVector::Y];
        assert_eq!(
            fit_conditional_vectors(&p, BlochVector::X, &coplanar),
            Err(Error::RankDeficient)
        );
    }

    /// Exact-valued source with `<beta | c> = b_z^3` for every `c`.
    struct Cubic;

    impl Statistics for Cubic {
        fn distribution(&self, _a: BlochVector, b: BlochVector) -> Result<OutcomeDistribution, Error> {
            let m = b.z() * b.z() * b.z();
            let mut p = [0.0; 8];
            for c in BitPair::ALL {
                p[Outcome::new(c, Sign::Plus).index()] = 0.125 * (1.0 + m);
                p[Outcome::new(c, Sign::Minus).index()] = 0.125 * (1.0 - m);
            }
            OutcomeDistribution::new(p)
        }
        fn alice_marginal(&self, _a: BlochVector) -> Result<[f64; 4], Error> {
            Ok([0.25; 4])
        }
        fn alice_sample_count(&self, _a: BlochVector) -> Option<u64> {
            None
        }
        fn is_exact(&self) -> bool {
            true
        }
    }

    #[test]
    fn cubic_response_fails_linearity() {
        let fit = fit_conditional_vectors(&Cubic, BlochVector::X, &extended_b_settings()).unwrap();
        let check = check_linearity(&fit, SAMPLED_LINEARITY_THRESHOLD);
        assert!(!check.passed, "residual {}", check.value);
        // on the axis settings alone b_z^3 = b_z, so nothing is visible there
        let fit = fit_conditional_vectors(&Cubic, BlochVector::X, &default_b_settings()).unwrap();
        assert!(fit.max_residual() < 1e-12);
    }

    #[test]
    fn marginal_checks() {
        let inputs = [BlochVector::X, T00, BlochVector::new(0.0, 0.6, -0.8).unwrap()];
        let ok = check_alice_marginal(&Protocol::Ideal { lambda: 0.3 }, &inputs, EXACT_MARGINAL_TOLERANCE).unwrap();
        assert!(ok.passed && ok.max_deviation < 1e-15);
        let bad = check_alice_marginal(&Protocol::Gisin, &inputs, EXACT_MARGINAL_TOLERANCE).unwrap();
        assert!(!bad.passed);
        assert!((bad.max_deviation - 0.75).abs() < 1e-15);
        let hashed = check_alice_marginal(&Protocol::GisinHashed, &inputs, EXACT_MARGINAL_TOLERANCE).unwrap();
        assert!(hashed.passed);
        let d = Protocol::Gisin.distribution(T00, BlochVector::Z).unwrap();
        assert!(!check_distribution_marginal(&d, 1e-9).passed);
    }

    #[test]
    fn solve3_identity() {
        let m = [[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 8.0]];
        assert_eq!(solve3(m, [2.0, 4.0, 8.0]), Some([1.0, 1.0, 1.0]));
        assert_eq!(solve3([[0.0; 3]; 3], [1.0, 0.0, 0.0]), None);
    }

    #[test]
    fn signaling_detected() {
        let mut recs = Vec::new();
        // Bob copies a . b (for a = +-z, b = z) - only possible with input from Alice's side
        for _ in 0..500 {
            recs.push(rec(BlochVector::Z, BlochVector::Z, 0, 0, Sign::Plus));
            recs.push(rec(-BlochVector::Z, BlochVector::Z, 0, 0, Sign::Minus));
        }
        let t = ExperimentTable::new(recs);
        assert!(!check_no_signaling(&t, 5.0).passed);
        let mut recs = Vec::new();
        for i in 0..1000 {
            let beta = if i % 2 == 0 { Sign::Plus } else { Sign::Minus };
            recs.push(rec(BlochVector::Z, BlochVector::Z, 0, 0, beta));
            recs.push(rec(-BlochVector::Z, BlochVector::Z, 1, 0, beta.flip()));
        }
        assert!(check_no_signaling(&ExperimentTable::new(recs), 5.0).passed);
    }
}
