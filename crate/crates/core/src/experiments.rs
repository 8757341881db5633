//! End-to-end runs of the beam splitter, interferometer and CNOT-circuit
//! networks, with frequencies compared against the oracle.
//!
//! All randomness derives from one seed, split into independent ChaCha
//! streams: machine initialization ([`INIT_STREAM`]), input generation
//! ([`INPUT_STREAM`]) and stochastic output draws
//! ([`crate::network::SLM_STREAM`]).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dlm::{Alpha, Message};
use crate::network::{
    build_beam_splitter, build_cnot_circuit, build_mzi, Network, NetworkError, NodeId, OutputMode,
};
use crate::oracle;
use crate::transforms::Transform;

pub const INIT_STREAM: u64 = 0;
pub const INPUT_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("events per point must be at least 1")]
    NoEvents,
    #[error("discard fraction must lie in [0, 1), got {0}")]
    Discard(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("sweep step must be positive, got {0}")]
    Step(f64),
    #[error("no input drives given")]
    NoDrives,
    #[error("drive weights must be finite, non-negative and not all zero")]
    Weights,
    #[error("report has no oracle values")]
    NoOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: Alpha,
    pub events_per_point: usize,
    pub seed: u64,
    pub mode: OutputMode,
    /// Leading fraction of each point's events excluded from the counts.
    pub discard_fraction: f64,
    /// Draw fresh machines before every sweep point instead of carrying
    /// state over.
    pub reinit_per_point: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: Alpha::new(0.99).unwrap(),
            events_per_point: 10_000,
            seed: 0,
            mode: OutputMode::Deterministic,
            discard_fraction: 0.0,
            reinit_per_point: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.events_per_point == 0 {
            return Err(ExperimentError::NoEvents);
        }
        if !(0.0..1.0).contains(&self.discard_fraction) {
            return Err(ExperimentError::Discard(self.discard_fraction));
        }
        Ok(())
    }

    fn discarded(&self) -> usize {
        (self.events_per_point as f64 * self.discard_fraction).floor() as usize
    }
}

/// The three random streams of a run.
#[derive(Debug, Clone)]
pub struct Streams {
    pub init: ChaCha8Rng,
    pub input: ChaCha8Rng,
    pub slm_seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        init.set_stream(INIT_STREAM);
        let mut input = ChaCha8Rng::seed_from_u64(seed);
        input.set_stream(INPUT_STREAM);
        Streams {
            init,
            input,
            slm_seed: seed,
        }
    }
}

/// Counts of one group of channels, their relative frequencies and, when
/// known, the oracle's probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub oracle: Option<Vec<f64>>,
    pub max_deviation: Option<f64>,
}

impl FrequencyReport {
    pub fn new(counts: Vec<u64>, oracle: Option<Vec<f64>>) -> Self {
        let total: u64 = counts.iter().sum();
        let frequencies: Vec<f64> = counts
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect();
        let max_deviation = oracle.as_ref().map(|p| {
            frequencies
                .iter()
                .zip(p)
                .map(|(f, p)| (f - p).abs())
                .fold(0.0, f64::max)
        });
        FrequencyReport {
            counts,
            frequencies,
            oracle,
            max_deviation,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
}

/// Passes iff every frequency lies within `tolerance` of the oracle.
pub fn compare(report: &FrequencyReport, tolerance: f64) -> Result<Comparison, ExperimentError> {
    let max_deviation = report.max_deviation.ok_or(ExperimentError::NoOracle)?;
    Ok(Comparison {
        passed: max_deviation <= tolerance,
        max_deviation,
        tolerance,
    })
}

/// One kind of input event: sent on `channel` of the source with relative
/// weight `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    pub channel: usize,
    pub weight: f64,
    pub payload: Vec<f64>,
}

impl Drive {
    pub fn phase(channel: usize, weight: f64, psi_degrees: f64) -> Self {
        Drive {
            channel,
            weight,
            payload: Message::phase(channel, psi_degrees).payload,
        }
    }
}

fn pick<'a, R: Rng + ?Sized>(drives: &'a [Drive], total: f64, rng: &mut R) -> &'a Drive {
    // One draw per event, even for a single drive, so that runs with
    // different drive sets consume the input stream identically.
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for d in drives {
        acc += d.weight;
        if u < acc {
            return d;
        }
    }
    drives
        .iter()
        .rev()
        .find(|d| d.weight > 0.0)
        .unwrap_or(&drives[0])
}

/// Routes `events` input events into `source`, each drawn from `drives` in
/// proportion to their weights.
pub fn drive<R: Rng + ?Sized>(
    net: &mut Network,
    source: NodeId,
    drives: &[Drive],
    events: usize,
    input: &mut R,
) -> Result<(), ExperimentError> {
    if drives.is_empty() {
        return Err(ExperimentError::NoDrives);
    }
    let total: f64 = drives.iter().map(|d| d.weight).sum();
    if drives
        .iter()
        .any(|d| !d.weight.is_finite() || d.weight < 0.0)
        || total <= 0.0
        || !total.is_finite()
    {
        return Err(ExperimentError::Weights);
    }
    for _ in 0..events {
        let d = pick(drives, total, input);
        let msg = Message {
            event_type: d.channel,
            payload: d.payload.clone(),
        };
        net.route(msg, source)?;
    }
    Ok(())
}

/// Runs one sweep point: counters are reset, the leading discard fraction
/// of events is routed and then the counters are reset again.
pub fn run_point<R: Rng + ?Sized>(
    net: &mut Network,
    source: NodeId,
    drives: &[Drive],
    cfg: &ExperimentConfig,
    input: &mut R,
) -> Result<(), ExperimentError> {
    cfg.validate()?;
    let skip = cfg.discarded();
    net.reset_counters();
    drive(net, source, drives, skip, input)?;
    net.reset_counters();
    drive(net, source, drives, cfg.events_per_point - skip, input)?;
    Ok(())
}

fn source_of(net: &Network) -> NodeId {
    net.node_id("in")
        .expect("built-in networks have a source named `in`")
}

fn single(net: &Network, name: &str) -> u64 {
    net.counts(name).expect("built-in counter")[0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSplitterPoint {
    pub psi0: f64,
    pub psi1: f64,
    pub report: FrequencyReport,
}

/// Beam splitter sweep over `num_phase_pairs` random phase pairs. Each event
/// enters channel 0 with probability `p0` carrying `(cos psi0, sin psi0)`,
/// otherwise channel 1 with `(cos psi1, sin psi1)`.
pub fn run_beam_splitter(
    cfg: &ExperimentConfig,
    p0: f64,
    num_phase_pairs: usize,
) -> Result<Vec<BeamSplitterPoint>, ExperimentError> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(ExperimentError::Probability(p0));
    }
    let mut streams = Streams::new(cfg.seed);
    let mut net = build_beam_splitter(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
    let mut points = Vec::with_capacity(num_phase_pairs);
    for i in 0..num_phase_pairs {
        if cfg.reinit_per_point && i > 0 {
            net = build_beam_splitter(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
        }
        let psi0 = streams.input.random_range(0.0..360.0);
        let psi1 = streams.input.random_range(0.0..360.0);
        let point = beam_splitter_point(&mut net, cfg, p0, psi0, psi1, &mut streams.input)?;
        points.push(point);
    }
    Ok(points)
}

/// A single beam splitter point with fixed phases on an existing network.
pub fn beam_splitter_point<R: Rng + ?Sized>(
    net: &mut Network,
    cfg: &ExperimentConfig,
    p0: f64,
    psi0: f64,
    psi1: f64,
    input: &mut R,
) -> Result<BeamSplitterPoint, ExperimentError> {
    let drives = [Drive::phase(0, p0, psi0), Drive::phase(1, 1.0 - p0, psi1)];
    let src = source_of(net);
    run_point(net, src, &drives, cfg, input)?;
    let a0 = Complex64::from_polar(p0.sqrt(), psi0.to_radians());
    let a1 = Complex64::from_polar((1.0 - p0).sqrt(), psi1.to_radians());
    let (b0, b1) = oracle::bs_output(a0, a1).expect("amplitudes are normalized");
    let report = FrequencyReport::new(
        vec![single(net, "n0"), single(net, "n1")],
        Some(vec![b0.norm_sqr(), b1.norm_sqr()]),
    );
    Ok(BeamSplitterPoint { psi0, psi1, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MziPoint {
    pub phi0: f64,
    pub phi1: f64,
    pub psi0: f64,
    /// `N0`, `N1` at the first beam splitter.
    pub first: FrequencyReport,
    /// `N2`, `N3` at the interferometer outputs.
    pub output: FrequencyReport,
}

impl MziPoint {
    pub fn max_deviation(&self) -> f64 {
        self.first
            .max_deviation
            .unwrap_or(0.0)
            .max(self.output.max_deviation.unwrap_or(0.0))
    }
}

/// Interferometer sweep: `phi0` runs from 0 in steps of `phi0_step` degrees
/// up to (excluding) 360, with `phi1` fixed. Only input channel 0 receives
/// events, with a fresh random phase per point.
pub fn run_mzi(
    cfg: &ExperimentConfig,
    phi1: f64,
    phi0_step: f64,
) -> Result<Vec<MziPoint>, ExperimentError> {
    cfg.validate()?;
    if !(phi0_step > 0.0 && phi0_step.is_finite()) {
        return Err(ExperimentError::Step(phi0_step));
    }
    let num_points = (360.0 / phi0_step - 1e-9).ceil() as usize;
    let mut streams = Streams::new(cfg.seed);
    let mut net = build_mzi(
        cfg.alpha,
        0.0,
        phi1,
        cfg.mode,
        &mut streams.init,
        streams.slm_seed,
    )?;
    let mut points = Vec::with_capacity(num_points);
    for i in 0..num_points {
        let phi0 = i as f64 * phi0_step;
        if cfg.reinit_per_point && i > 0 {
            net = build_mzi(
                cfg.alpha,
                phi0,
                phi1,
                cfg.mode,
                &mut streams.init,
                streams.slm_seed,
            )?;
        }
        net.set_passive_transform("r0", Transform::plane_rotation(phi0))?;
        let psi0 = streams.input.random_range(0.0..360.0);
        points.push(mzi_point(
            &mut net,
            cfg,
            phi0,
            phi1,
            psi0,
            &mut streams.input,
        )?);
    }
    Ok(points)
}

/// A single interferometer point on an existing network whose passive
/// rotations already match `phi0` and `phi1`.
pub fn mzi_point<R: Rng + ?Sized>(
    net: &mut Network,
    cfg: &ExperimentConfig,
    phi0: f64,
    phi1: f64,
    psi0: f64,
    input: &mut R,
) -> Result<MziPoint, ExperimentError> {
    let src = source_of(net);
    run_point(net, src, &[Drive::phase(0, 1.0, psi0)], cfg, input)?;
    let a0 = Complex64::from_polar(1.0, psi0.to_radians());
    let zero = Complex64::new(0.0, 0.0);
    let (c0, c1) = oracle::bs_output(a0, zero).expect("normalized");
    let (b0, b1) = oracle::mzi_output(a0, zero, phi0, phi1).expect("normalized");
    Ok(MziPoint {
        phi0,
        phi1,
        psi0,
        first: FrequencyReport::new(
            vec![single(net, "n0"), single(net, "n1")],
            Some(vec![c0.norm_sqr(), c1.norm_sqr()]),
        ),
        output: FrequencyReport::new(
            vec![single(net, "n2"), single(net, "n3")],
            Some(vec![b0.norm_sqr(), b1.norm_sqr()]),
        ),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnotRow {
    pub qubit1: bool,
    pub qubit2: bool,
    pub report: FrequencyReport,
}

/// Basis inputs in table order: 00, 10, 01, 11 (qubit 1 first).
pub const CNOT_TABLE_ORDER: [(bool, bool); 4] =
    [(false, false), (true, false), (false, true), (true, true)];

/// Feeds the basis state `|qubit1 qubit2>` (event type `qubit1 + 2 qubit2`,
/// payload `(1, 0)`) into a freshly initialized CNOT circuit.
pub fn run_cnot_circuit(
    cfg: &ExperimentConfig,
    qubit1: bool,
    qubit2: bool,
) -> Result<FrequencyReport, ExperimentError> {
    cfg.validate()?;
    let mut streams = Streams::new(cfg.seed);
    let mut net = build_cnot_circuit(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
    cnot_row(
        &mut net,
        cfg,
        cfg.events_per_point,
        qubit1,
        qubit2,
        &mut streams.input,
    )
    .map(|r| r.report)
}

/// All four basis inputs in table order with `events_per_point` events each.
pub fn run_cnot_table(cfg: &ExperimentConfig) -> Result<Vec<CnotRow>, ExperimentError> {
    let mut blocks = run_cnot_blocks(cfg, &[cfg.events_per_point])?;
    Ok(blocks.pop().unwrap_or_default())
}

/// Runs the table once per entry of `blocks`, each block feeding that many
/// events per basis input. The machines are initialized once and carried
/// through every row and block unless `reinit_per_point` is set, in which
/// case each row starts from freshly drawn machines.
pub fn run_cnot_blocks(
    cfg: &ExperimentConfig,
    blocks: &[usize],
) -> Result<Vec<Vec<CnotRow>>, ExperimentError> {
    cfg.validate()?;
    if blocks.contains(&0) {
        return Err(ExperimentError::NoEvents);
    }
    let mut streams = Streams::new(cfg.seed);
    let mut net = build_cnot_circuit(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
    let mut first = true;
    let mut out = Vec::with_capacity(blocks.len());
    for &events in blocks {
        let mut rows = Vec::with_capacity(4);
        for (q1, q2) in CNOT_TABLE_ORDER {
            if cfg.reinit_per_point && !first {
                net = build_cnot_circuit(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
            }
            first = false;
            rows.push(cnot_row(&mut net, cfg, events, q1, q2, &mut streams.input)?);
        }
        out.push(rows);
    }
    Ok(out)
}

fn cnot_row<R: Rng + ?Sized>(
    net: &mut Network,
    cfg: &ExperimentConfig,
    events: usize,
    q1: bool,
    q2: bool,
    input: &mut R,
) -> Result<CnotRow, ExperimentError> {
    let k = q1 as usize + 2 * q2 as usize;
    let src = source_of(net);
    let drives = [Drive {
        channel: k,
        weight: 1.0,
        payload: vec![1.0, 0.0],
    }];
    let point_cfg = ExperimentConfig {
        events_per_point: events,
        ..cfg.clone()
    };
    run_point(net, src, &drives, &point_cfg, input)?;
    let counts = net.counts("out").expect("circuit sink");
    Ok(CnotRow {
        qubit1: q1,
        qubit2: q2,
        report: FrequencyReport::new(counts, Some(oracle::cnot_circuit_probabilities(q1, q2))),
    })
}
