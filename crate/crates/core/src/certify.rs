//! CHSH from coarse-grained outputs, settings search, average fidelity and
//! the certification verdict.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::Error;
use crate::geometry::{diagonal_pair, sample_uniform_sphere, BitPair, BlochVector, PauliRotation, Vec3};
use crate::montecarlo::{accumulate_chunks, chunk_rng, estimate_mean, CompensatedSum, Executor, MeanAccumulator};
use crate::protocols::{CompensationMode, OutcomeDistribution, Protocol};
use crate::quadrature::gauss_legendre;
use crate::stats::{
    check_alice_marginal, check_no_signaling, extended_b_settings, fit_conditional_vectors, ExperimentRecord,
    ExperimentTable, MarginalCheck, Statistics, EXACT_LINEARITY_THRESHOLD, EXACT_MARGINAL_TOLERANCE,
    SAMPLED_LINEARITY_THRESHOLD,
};

/// Margin above 2 required before `|CHSH|` counts as a violation.
pub const CHSH_GUARD: f64 = 1e-9;

/// Standard errors allowed on sampled marginals and on the no-signaling test.
pub const SAMPLED_Z_THRESHOLD: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a0: BlochVector,
    pub a1: BlochVector,
    pub b0: BlochVector,
    pub b1: BlochVector,
}

impl ChshSettings {
    /// `a0 = x, a1 = y, b0 = (x + y)/sqrt(2), b1 = (x - y)/sqrt(2)`.
    pub fn canonical() -> Self {
        Self::for_axes(BlochVector::X, BlochVector::Y)
    }

    /// Alice on two orthogonal axes, Bob on their diagonals.
    pub fn for_axes(a0: BlochVector, a1: BlochVector) -> Self {
        let (b0, b1) = diagonal_pair(a0, a1);
        ChshSettings { a0, a1, b0, b1 }
    }

    pub fn alice(&self, j: usize) -> BlochVector {
        if j == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    pub fn bob(&self, k: usize) -> BlochVector {
        if k == 0 {
            self.b0
        } else {
            self.b1
        }
    }
}

/// How Alice's two bits become one `+-1` value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseGraining {
    /// `alpha = 2 c0 - 1`; picks out the x component of the compensated vector.
    Bit0,
    /// `alpha = 2 c1 - 1`; y component.
    Bit1,
    /// `alpha = 2 (c0 ^ c1) - 1`; z component.
    Parity,
}

impl CoarseGraining {
    pub const ALL: [CoarseGraining; 3] = [CoarseGraining::Bit0, CoarseGraining::Bit1, CoarseGraining::Parity];

    pub fn alpha(self, bits: BitPair) -> f64 {
        let bit = match self {
            CoarseGraining::Bit0 => bits.c0,
            CoarseGraining::Bit1 => bits.c1,
            CoarseGraining::Parity => bits.c0 ^ bits.c1,
        };
        if bit {
            1.0
        } else {
            -1.0
        }
    }

    /// Bloch axis whose component the coarse graining reads out.
    pub fn axis(self) -> usize {
        match self {
            CoarseGraining::Bit0 => 0,
            CoarseGraining::Bit1 => 1,
            CoarseGraining::Parity => 2,
        }
    }
}

/// `alpha = 2 c_j - 1` for Alice input `j`.
pub const CANONICAL_GRAININGS: [CoarseGraining; 2] = [CoarseGraining::Bit0, CoarseGraining::Bit1];

/// The three pairs of distinct coarse grainings.
pub const GRAINING_PAIRS: [[CoarseGraining; 2]; 3] = [
    [CoarseGraining::Bit0, CoarseGraining::Bit1],
    [CoarseGraining::Bit0, CoarseGraining::Parity],
    [CoarseGraining::Bit1, CoarseGraining::Parity],
];

/// `E = sum alpha beta P(c0, c1, beta)`.
pub fn correlator_with(dist: &OutcomeDistribution, graining: CoarseGraining) -> f64 {
    dist.iter()
        .map(|(o, p)| graining.alpha(o.bits) * o.beta.value() * p)
        .sum()
}

/// Correlator with `alpha = 2 c_j - 1`.
pub fn correlator(dist: &OutcomeDistribution, j: usize) -> f64 {
    correlator_with(dist, CANONICAL_GRAININGS[j.min(1)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlators {
    #[serde(rename = "E00")]
    pub e00: f64,
    #[serde(rename = "E01")]
    pub e01: f64,
    #[serde(rename = "E10")]
    pub e10: f64,
    #[serde(rename = "E11")]
    pub e11: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// `E00 + E01 + E10 - E11`, signed.
    pub value: f64,
    pub correlators: Correlators,
    pub settings: ChshSettings,
    pub grainings: [CoarseGraining; 2],
}

impl ChshResult {
    pub fn magnitude(&self) -> f64 {
        self.value.abs()
    }

    pub fn violates(&self) -> bool {
        self.value.abs() > 2.0 + CHSH_GUARD
    }
}

pub fn chsh<S: Statistics + ?Sized>(source: &S, settings: &ChshSettings) -> Result<ChshResult, Error> {
    chsh_with(source, settings, CANONICAL_GRAININGS)
}

/// CHSH with correlator `(j, k)` read from `(a_j, b_k)` through `grainings[j]`.
pub fn chsh_with<S: Statistics + ?Sized>(
    source: &S,
    settings: &ChshSettings,
    grainings: [CoarseGraining; 2],
) -> Result<ChshResult, Error> {
    let mut e = [[0.0; 2]; 2];
    for (j, row) in e.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let d = source.distribution(settings.alice(j), settings.bob(k))?;
            *cell = correlator_with(&d, grainings[j]);
        }
    }
    Ok(ChshResult {
        value: e[0][0] + e[0][1] + e[1][0] - e[1][1],
        correlators: Correlators {
            e00: e[0][0],
            e01: e[0][1],
            e10: e[1][0],
            e11: e[1][1],
        },
        settings: *settings,
        grainings,
    })
}

/// Largest `|CHSH|` over the canonical-style settings of each coarse-graining
/// pair: Alice on the two axes read out, Bob on their diagonals.
pub fn canonical_family_chsh<S: Statistics + ?Sized>(source: &S) -> Result<ChshResult, Error> {
    let mut best: Option<ChshResult> = None;
    for grainings in GRAINING_PAIRS {
        let settings = ChshSettings::for_axes(
            BlochVector::axis(grainings[0].axis()),
            BlochVector::axis(grainings[1].axis()),
        );
        let r = chsh_with(source, &settings, grainings)?;
        if best.is_none_or(|b| r.magnitude() > b.magnitude()) {
            best = Some(r);
        }
    }
    Ok(best.expect("three graining pairs"))
}

// ---------------------------------------------------------------------------
// settings search

pub const GRID_THETA: usize = 20;
pub const GRID_PHI: usize = 40;
pub const REFINE_MIN_STEP: f64 = 1e-6;
const REFINE_MAX_EVALUATIONS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRefine {
    /// Start 0 uses the canonical Alice settings, the rest draw them at random.
    pub starts: u64,
    pub seed: u64,
    /// Also refine Alice's settings after the grid stage.
    pub refine_alice: bool,
    pub grainings: [CoarseGraining; 2],
}

impl Default for GridRefine {
    fn default() -> Self {
        GridRefine {
            starts: 1,
            seed: 0,
            refine_alice: false,
            grainings: CANONICAL_GRAININGS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SettingsStrategy {
    Canonical,
    GridRefine(GridRefine),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsSearch {
    pub settings: ChshSettings,
    /// `|CHSH|` at `settings`.
    pub value: f64,
    pub starts: u64,
}

pub fn optimize_settings<S, E>(source: &S, strategy: SettingsStrategy, executor: &E) -> Result<ChshSettings, Error>
where
    S: Statistics + Sync + ?Sized,
    E: Executor + ?Sized,
{
    match strategy {
        SettingsStrategy::Canonical => Ok(ChshSettings::canonical()),
        SettingsStrategy::GridRefine(opts) => Ok(search_settings(source, &opts, executor)?.settings),
    }
}

/// Maximises `|CHSH|` by a coarse (theta, phi) grid on each of Bob's vectors,
/// then coordinate descent with a halving step, repeated from several Alice
/// starting points. The best start wins; ties go to the earlier start.
pub fn search_settings<S, E>(source: &S, opts: &GridRefine, executor: &E) -> Result<SettingsSearch, Error>
where
    S: Statistics + Sync + ?Sized,
    E: Executor + ?Sized,
{
    if !source.is_exact() {
        return Err(Error::ExactUnsupported(String::from(
            "settings search needs exact statistics",
        )));
    }
    let starts = opts.starts.max(1);
    let grid = spherical_grid();
    let results = executor.map_chunks(starts, |k| {
        let (a0, a1) = if k == 0 {
            (BlochVector::X, BlochVector::Y)
        } else {
            let mut rng = chunk_rng(opts.seed, k);
            (sample_uniform_sphere(&mut rng), sample_uniform_sphere(&mut rng))
        };
        search_from(source, a0, a1, &grid, opts)
    });
    let mut best: Option<(ChshSettings, f64)> = None;
    for r in results {
        let (s, v) = r?;
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((s, v));
        }
    }
    let (settings, value) = best.expect("at least one start");
    Ok(SettingsSearch {
        settings,
        value,
        starts,
    })
}

fn spherical_grid() -> Vec<(f64, f64)> {
    let mut g = Vec::with_capacity(GRID_THETA * GRID_PHI);
    for i in 0..GRID_THETA {
        for j in 0..GRID_PHI {
            g.push((
                PI * (i as f64 + 0.5) / GRID_THETA as f64,
                2.0 * PI * j as f64 / GRID_PHI as f64,
            ));
        }
    }
    g
}

fn search_from<S: Statistics + ?Sized>(
    source: &S,
    a0: BlochVector,
    a1: BlochVector,
    grid: &[(f64, f64)],
    opts: &GridRefine,
) -> Result<(ChshSettings, f64), Error> {
    let [g0, g1] = opts.grainings;
    let mut e0 = Vec::with_capacity(grid.len());
    let mut e1 = Vec::with_capacity(grid.len());
    for &(t, p) in grid {
        let b = BlochVector::from_angles(t, p);
        e0.push(correlator_with(&source.distribution(a0, b)?, g0));
        e1.push(correlator_with(&source.distribution(a1, b)?, g1));
    }

    // CHSH = [E0(b0) + E1(b0)] + [E0(b1) - E1(b1)], so b0 and b1 separate
    let mut start = [0.0; 4];
    let mut start_value = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let i0 = argmax(grid.len(), |i| sign * (e0[i] + e1[i]));
        let i1 = argmax(grid.len(), |i| sign * (e0[i] - e1[i]));
        let v = sign * (e0[i0] + e1[i0] + e0[i1] - e1[i1]);
        if v > start_value {
            start_value = v;
            start = [grid[i0].0, grid[i0].1, grid[i1].0, grid[i1].1];
        }
    }

    let (a0t, a0p) = a0.angles();
    let (a1t, a1p) = a1.angles();
    let mut params = [start[0], start[1], start[2], start[3], a0t, a0p, a1t, a1p];
    let n = if opts.refine_alice { 8 } else { 4 };
    let settings_of = |p: &[f64; 8]| ChshSettings {
        a0: if opts.refine_alice {
            BlochVector::from_angles(p[4], p[5])
        } else {
            a0
        },
        a1: if opts.refine_alice {
            BlochVector::from_angles(p[6], p[7])
        } else {
            a1
        },
        b0: BlochVector::from_angles(p[0], p[1]),
        b1: BlochVector::from_angles(p[2], p[3]),
    };
    let objective =
        |p: &[f64; 8]| -> Result<f64, Error> { Ok(chsh_with(source, &settings_of(p), opts.grainings)?.magnitude()) };

    let mut best = objective(&params)?;
    let mut step = PI / GRID_THETA as f64;
    let mut evaluations = 0;
    while step >= REFINE_MIN_STEP && evaluations < REFINE_MAX_EVALUATIONS {
        let mut improved = false;
        for k in 0..n {
            for dir in [1.0, -1.0] {
                let old = params[k];
                params[k] = old + dir * step;
                let v = objective(&params)?;
                evaluations += 1;
                if v > best + 1e-15 {
                    best = v;
                    improved = true;
                    break;
                }
                params[k] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((settings_of(&params), best))
}

fn argmax(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f(0);
    for i in 1..n {
        let v = f(i);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// fidelity

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMode {
    MonteCarlo,
    /// Deterministic product rule over the sphere using the protocol's exact
    /// map from `a` to compensated vectors.
    ExactMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub std_error: f64,
    #[serde(rename = "n")]
    pub sample_count: u64,
    pub mode: FidelityMode,
}

impl FidelityEstimate {
    pub fn sigmas_from(&self, target: f64, floor: f64) -> f64 {
        (self.value - target).abs() / (self.std_error + floor)
    }
}

/// Gauss–Legendre nodes in `z` for the exact-map rule.
pub const EXACT_MAP_Z_NODES: usize = 128;
/// Equally spaced azimuths for the exact-map rule.
pub const EXACT_MAP_PHI_NODES: usize = 256;

/// `F = int da/4pi sum_c P(c|a) (1 + A_c(a) . a)/2`.
///
/// Monte Carlo draws uniform `a` and, for protocols with an exact model,
/// evaluates the integrand exactly. Sample-only protocols are run once per
/// draw: the compensated hidden vector is used when the run exposes one,
/// otherwise the unbiased estimator `3 beta (R_c b) . a` with `b` uniform.
pub fn average_fidelity<E: Executor + ?Sized>(
    protocol: &Protocol,
    mode: FidelityMode,
    samples: u64,
    seed: u64,
    executor: &E,
) -> Result<FidelityEstimate, Error> {
    match mode {
        FidelityMode::ExactMap => exact_map_fidelity(protocol, executor),
        FidelityMode::MonteCarlo => {
            if samples == 0 {
                return Err(Error::InvalidArgument(String::from(
                    "Monte Carlo needs at least one sample",
                )));
            }
            let est = if protocol.supports_exact() {
                let cm = protocol.mode();
                estimate_mean(executor, samples, seed, |rng| {
                    let a = sample_uniform_sphere(rng);
                    protocol
                        .conditional_model(a)
                        .map(|m| m.fidelity(a, cm))
                        .unwrap_or(f64::NAN)
                })
            } else {
                estimate_mean(executor, samples, seed, |rng| sampled_fidelity(protocol, rng))
            };
            Ok(FidelityEstimate {
                value: est.value,
                std_error: est.std_error,
                sample_count: est.samples,
                mode,
            })
        }
    }
}

fn compensate(v: Vec3, bits: BitPair, mode: CompensationMode) -> Vec3 {
    match mode {
        CompensationMode::Separated => PauliRotation::for_bits(bits).apply(v),
        CompensationMode::ActiveCompensation => v,
    }
}

fn sampled_fidelity<R: Rng + ?Sized>(protocol: &Protocol, rng: &mut R) -> f64 {
    let a = sample_uniform_sphere(rng);
    let b = sample_uniform_sphere(rng);
    let run = protocol.sample(a, b, rng);
    let bits = run.outcome.bits;
    match run.bob_vector {
        Some(v) => 0.5 * (1.0 + compensate(v, bits, protocol.mode()).dot(a.vec())),
        None => {
            let rb = compensate(b.vec(), bits, protocol.mode());
            0.5 * (1.0 + 3.0 * run.outcome.beta.value() * rb.dot(a.vec()))
        }
    }
}

fn exact_map_fidelity<E: Executor + ?Sized>(protocol: &Protocol, executor: &E) -> Result<FidelityEstimate, Error> {
    if !protocol.supports_exact() {
        return Err(Error::ExactUnsupported(protocol.id()));
    }
    let (zs, ws) = gauss_legendre(EXACT_MAP_Z_NODES);
    let cm = protocol.mode();
    let rows = executor.map_chunks(EXACT_MAP_Z_NODES as u64, |i| {
        let z = zs[i as usize];
        let r = libm::sqrt((1.0 - z * z).max(0.0));
        let mut sum = CompensatedSum::default();
        for j in 0..EXACT_MAP_PHI_NODES {
            let phi = 2.0 * PI * (j as f64 + 0.5) / EXACT_MAP_PHI_NODES as f64;
            let (s, c) = libm::sincos(phi);
            let a = BlochVector::normalize(Vec3::new(r * c, r * s, z)).expect("unit by construction");
            sum.add(protocol.conditional_model(a)?.fidelity(a, cm));
        }
        Ok::<f64, Error>(ws[i as usize] * sum.value() / EXACT_MAP_PHI_NODES as f64)
    });
    let mut total = CompensatedSum::default();
    for r in rows {
        total.add(r?);
    }
    Ok(FidelityEstimate {
        // the z weights sum to 2
        value: 0.5 * total.value(),
        std_error: 0.0,
        sample_count: (EXACT_MAP_Z_NODES * EXACT_MAP_PHI_NODES) as u64,
        mode: FidelityMode::ExactMap,
    })
}

/// Fidelity from fitted compensated vectors, averaged over the table's Alice
/// inputs. Meaningful as a sphere average when those inputs were drawn
/// uniformly; the standard error is the spread across inputs.
pub fn table_fidelity(table: &ExperimentTable) -> Result<FidelityEstimate, Error> {
    let mut acc = MeanAccumulator::default();
    for a in table.alice_inputs() {
        let fit = fit_conditional_vectors(table, a, &table.b_settings_for(a))?;
        acc.push(fit.fidelity());
    }
    if acc.count() == 0 {
        return Err(Error::InsufficientSettings { needed: 1, found: 0 });
    }
    Ok(FidelityEstimate {
        value: acc.mean(),
        std_error: if acc.count() > 1 { acc.std_error() } else { 0.0 },
        sample_count: table.len() as u64,
        mode: FidelityMode::MonteCarlo,
    })
}

// ---------------------------------------------------------------------------
// simulation

/// Runs `runs_per_pair` times at every `(alice, bob)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub alice: Vec<BlochVector>,
    pub bob: Vec<BlochVector>,
    pub runs_per_pair: u64,
}

impl SimulationPlan {
    /// The CHSH inputs, with Bob on the CHSH settings plus enough extra
    /// directions for the linearity fit.
    pub fn for_certification(settings: &ChshSettings, runs_per_pair: u64) -> Self {
        let mut bob = alloc::vec![settings.b0, settings.b1];
        bob.extend(extended_b_settings());
        SimulationPlan {
            alice: alloc::vec![settings.a0, settings.a1],
            bob,
            runs_per_pair,
        }
    }

    pub fn pairs(&self) -> u64 {
        (self.alice.len() * self.bob.len()) as u64
    }
}

fn pair_seed(seed: u64, pair: u64) -> u64 {
    seed ^ (pair + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Records in plan order (Alice-major), reproducible for a fixed seed.
pub fn simulate_table<E: Executor + ?Sized>(
    protocol: &Protocol,
    plan: &SimulationPlan,
    seed: u64,
    executor: &E,
) -> ExperimentTable {
    let mut records = Vec::with_capacity((plan.pairs() * plan.runs_per_pair) as usize);
    let mut pair = 0;
    for &a in &plan.alice {
        for &b in &plan.bob {
            let chunks = accumulate_chunks(
                executor,
                plan.runs_per_pair,
                pair_seed(seed, pair),
                |rng, acc: &mut Vec<ExperimentRecord>| {
                    let run = protocol.sample(a, b, rng);
                    acc.push(ExperimentRecord::new(a, b, run.outcome));
                },
            );
            for c in chunks {
                records.extend(c);
            }
            pair += 1;
        }
    }
    ExperimentTable::new(records)
}

// ---------------------------------------------------------------------------
// certification

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    QuantumCertified,
    Inconclusive,
    AssumptionViolated,
}

impl Verdict {
    pub fn from_checks(chsh_violates: bool, checks_pass: bool) -> Self {
        match (checks_pass, chsh_violates) {
            (false, _) => Verdict::AssumptionViolated,
            (true, true) => Verdict::QuantumCertified,
            (true, false) => Verdict::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityCheck {
    pub passed: bool,
    pub max_residual: f64,
    pub threshold: f64,
    /// Worst cell residual at each Alice input.
    pub residuals: Vec<([f64; 3], f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub marginal: MarginalCheck,
    pub linearity: LinearityCheck,
}

impl Checks {
    pub fn passed(&self) -> bool {
        self.marginal.passed && self.linearity.passed
    }
}

/// Which fidelity thresholds the reported fidelity clears. The verdict itself
/// only uses CHSH and the two checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionNotes {
    /// Highest fidelity without violation when the observed vectors are a
    /// uniform stretch `lambda R_c a`.
    pub stretch_threshold: f64,
    /// Highest fidelity without violation when only uniform marginals and
    /// linear conditional statistics are assumed.
    pub consistency_threshold: f64,
    pub exceeds_stretch_threshold: bool,
    pub exceeds_consistency_threshold: bool,
}

impl AssumptionNotes {
    pub fn for_fidelity(f: f64) -> Self {
        let stretch_threshold = analytic::lambda_threshold_closed_form().1;
        let consistency_threshold = analytic::pcrit_total_fidelity_closed_form();
        AssumptionNotes {
            stretch_threshold,
            consistency_threshold,
            exceeds_stretch_threshold: f > stretch_threshold,
            exceeds_consistency_threshold: f > consistency_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub protocol: Option<String>,
    pub seed: u64,
    pub samples: u64,
    pub chsh: ChshResult,
    pub fidelity: FidelityEstimate,
    pub checks: Checks,
    pub assumptions: AssumptionNotes,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub settings: ChshSettings,
    /// Monte Carlo budget: fidelity samples, and for sample-only protocols
    /// the total number of simulated runs.
    pub samples: u64,
    pub seed: u64,
    pub fidelity_mode: FidelityMode,
    /// Random Alice inputs checked besides the CHSH inputs (exact sources).
    pub extra_inputs: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            settings: ChshSettings::canonical(),
            samples: 1_000_000,
            seed: 0,
            fidelity_mode: FidelityMode::MonteCarlo,
            extra_inputs: 16,
        }
    }
}

fn linearity_over<S: Statistics + ?Sized>(
    source: &S,
    inputs: &[BlochVector],
    b_settings: impl Fn(BlochVector) -> Vec<BlochVector>,
    threshold: f64,
) -> Result<LinearityCheck, Error> {
    let mut residuals = Vec::with_capacity(inputs.len());
    let mut max_residual: f64 = 0.0;
    for &a in inputs {
        let r = fit_conditional_vectors(source, a, &b_settings(a))?.max_residual();
        max_residual = max_residual.max(r);
        residuals.push((a.into(), r));
    }
    Ok(LinearityCheck {
        passed: max_residual <= threshold,
        max_residual,
        threshold,
        residuals,
    })
}

/// Certifies a protocol. Exact protocols are evaluated exactly; sample-only
/// ones are simulated into a table first and certified from that.
pub fn certify<E: Executor + ?Sized>(
    protocol: &Protocol,
    opts: &CertifyOptions,
    executor: &E,
) -> Result<CertificationReport, Error> {
    if protocol.mode() == CompensationMode::ActiveCompensation {
        return Err(Error::ActiveCompensation(format!(
            "protocol {} feeds Alice's bits into Bob's box",
            protocol.id()
        )));
    }

    let fidelity = average_fidelity(
        protocol,
        if protocol.supports_exact() {
            opts.fidelity_mode
        } else {
            FidelityMode::MonteCarlo
        },
        opts.samples,
        opts.seed,
        executor,
    )?;

    if !protocol.supports_exact() {
        let plan = SimulationPlan::for_certification(&opts.settings, 1);
        let runs = opts.samples.div_ceil(plan.pairs()).max(1);
        let plan = SimulationPlan {
            runs_per_pair: runs,
            ..plan
        };
        let table = simulate_table(protocol, &plan, pair_seed(opts.seed, u64::MAX - 1), executor);
        let mut report = certify_table(&table, opts)?;
        report.protocol = Some(protocol.id());
        report.fidelity = fidelity;
        report.assumptions = AssumptionNotes::for_fidelity(fidelity.value);
        return Ok(report);
    }

    let checks = protocol_checks(protocol, opts)?;
    let chsh = chsh(protocol, &opts.settings)?;
    let verdict = Verdict::from_checks(chsh.violates(), checks.passed());
    Ok(CertificationReport {
        protocol: Some(protocol.id()),
        seed: opts.seed,
        samples: opts.samples,
        chsh,
        fidelity,
        checks,
        assumptions: AssumptionNotes::for_fidelity(fidelity.value),
        verdict,
    })
}

/// Marginal tolerance for `n` sampled runs at one input: `z` binomial
/// standard errors of a `1/4` cell.
pub fn sampled_marginal_tolerance(n: u64, z: f64) -> f64 {
    z * libm::sqrt(0.1875 / n.max(1) as f64)
}

/// Marginal and linearity checks for an exact protocol at the CHSH inputs
/// plus `opts.extra_inputs` random ones.
pub fn protocol_checks(protocol: &Protocol, opts: &CertifyOptions) -> Result<Checks, Error> {
    let mut inputs = alloc::vec![opts.settings.a0, opts.settings.a1];
    let mut rng = chunk_rng(opts.seed, u64::MAX);
    inputs.extend((0..opts.extra_inputs).map(|_| sample_uniform_sphere(&mut rng)));
    Ok(Checks {
        marginal: check_alice_marginal(protocol, &inputs, EXACT_MARGINAL_TOLERANCE)?,
        linearity: linearity_over(protocol, &inputs, |_| extended_b_settings(), EXACT_LINEARITY_THRESHOLD)?,
    })
}

/// Marginal and linearity checks at every Alice input of a table, after
/// rejecting tables whose Bob statistics depend on Alice's input: that only
/// happens when the bits reach Bob's box.
pub fn table_checks(table: &ExperimentTable) -> Result<Checks, Error> {
    let signaling = check_no_signaling(table, SAMPLED_Z_THRESHOLD);
    if !signaling.passed {
        return Err(Error::ActiveCompensation(format!(
            "Bob's outcome statistics depend on Alice's input ({:.1} standard errors)",
            signaling.max_z
        )));
    }
    let inputs = table.alice_inputs();
    let n_min = inputs
        .iter()
        .filter_map(|&a| table.alice_sample_count(a))
        .min()
        .unwrap_or(0);
    Ok(Checks {
        marginal: check_alice_marginal(table, &inputs, sampled_marginal_tolerance(n_min, SAMPLED_Z_THRESHOLD))?,
        linearity: linearity_over(table, &inputs, |a| table.b_settings_for(a), SAMPLED_LINEARITY_THRESHOLD)?,
    })
}

/// Certifies recorded data; see [`table_checks`] for what gets rejected.
pub fn certify_table(table: &ExperimentTable, opts: &CertifyOptions) -> Result<CertificationReport, Error> {
    let checks = table_checks(table)?;
    let chsh = chsh(table, &opts.settings)?;
    let fidelity = table_fidelity(table)?;
    let verdict = Verdict::from_checks(chsh.violates(), checks.passed());
    Ok(CertificationReport {
        protocol: None,
        seed: opts.seed,
        samples: table.len() as u64,
        chsh,
        fidelity,
        checks,
        assumptions: AssumptionNotes::for_fidelity(fidelity.value),
        verdict,
    })
}

// ---------------------------------------------------------------------------
// W_z sweep

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub wz: f64,
    pub max_chsh: f64,
    pub fidelity: FidelityEstimate,
}

/// For each `W_z`: the capping protocol with z capped at `W_z` and x, y at
/// `sqrt(2) - W_z`, its largest `|CHSH|` over [`canonical_family_chsh`], and
/// its average fidelity.
pub fn wz_sweep<E: Executor + ?Sized>(
    wz_values: &[f64],
    mode: FidelityMode,
    samples: u64,
    seed: u64,
    executor: &E,
) -> Result<Vec<SweepRow>, Error> {
    wz_values
        .iter()
        .map(|&wz| {
            let p = Protocol::pcrit_complementary(wz)?;
            Ok(SweepRow {
                wz,
                max_chsh: canonical_family_chsh(&p)?.magnitude(),
                fidelity: average_fidelity(&p, mode, samples, seed, executor)?,
            })
        })
        .collect()
}

/// Row with the highest fidelity among those with `max_chsh <= 2` (plus the
/// guard band).
pub fn best_admissible(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .filter(|r| r.max_chsh <= 2.0 + CHSH_GUARD)
        .fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.fidelity.value >= r.fidelity.value => Some(b),
            _ => Some(r),
        })
}
