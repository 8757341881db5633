//! Line-oriented text format for networks.
//!
//! ```text
//! # comment
//! param alpha 0.99
//! param mode deterministic
//! param seed 7
//! param events 10000
//! param discard 0.5
//! source in 2 len 2
//! proc bs1 beamsplitter
//! proc h hadamard-lift 1
//! proc t custom 2 1  0 1  1 0  ...
//! passive r0 rotation 30
//! passive p custom 2  0 -1 1 0 channels 1
//! wire in.0 -> bs1.0
//! sink d0 from bs1.0 bs1.1
//! tap n0 on bs1.0
//! drive in.0 weight 0.5 phase 30
//! drive in.1 payload 1 0
//! ```
//!
//! Processor kinds: `beamsplitter` and `hadamard` (two event types),
//! `hadamard-lift 1|2` and `cnot` (four event types) and
//! `custom NE NM` followed by the `(NE NM)^2` matrix entries row by row.
//! Processors are initialized in declaration order.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dlm::{Alpha, Message, Shape};
use crate::experiments::{
    run_point, Drive, ExperimentConfig, ExperimentError, FrequencyReport, Streams,
};
use crate::network::{
    Network, NetworkBuilder, NetworkError, NodeId, NodeKind, OutputMode, Processor,
};
use crate::oracle;
use crate::report::ReportRow;
use crate::transforms::{Qubit, Transform};

/// Upper bound on channel counts and message lengths.
pub const MAX_CHANNELS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct NetlistError {
    pub line: usize,
    pub column: usize,
    pub kind: ErrorKind,
    pub message: String,
}

impl NetlistError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        NetlistError {
            line,
            column,
            kind: ErrorKind::Syntax,
            message: message.into(),
        }
    }

    fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        NetlistError {
            line: pos.0,
            column: pos.1,
            kind: ErrorKind::Semantic,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortRef {
    pub node: String,
    pub channel: usize,
}

impl PortRef {
    pub fn new(node: &str, channel: usize) -> Self {
        PortRef {
            node: node.to_string(),
            channel,
        }
    }

    fn pair(&self) -> (&str, usize) {
        (&self.node, self.channel)
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.channel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Alpha(f64),
    Mode(OutputMode),
    Seed(u64),
    Events(usize),
    Discard(f64),
}

impl Param {
    fn key(&self) -> &'static str {
        match self {
            Param::Alpha(_) => "alpha",
            Param::Mode(_) => "mode",
            Param::Seed(_) => "seed",
            Param::Events(_) => "events",
            Param::Discard(_) => "discard",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcKind {
    BeamSplitter,
    Hadamard,
    HadamardLift(Qubit),
    Cnot,
    Custom {
        event_types: usize,
        message_len: usize,
        entries: Vec<f64>,
    },
}

impl ProcKind {
    fn shape(&self) -> (usize, usize) {
        match self {
            ProcKind::BeamSplitter | ProcKind::Hadamard => (2, 2),
            ProcKind::HadamardLift(_) | ProcKind::Cnot => (4, 2),
            ProcKind::Custom {
                event_types,
                message_len,
                ..
            } => (*event_types, *message_len),
        }
    }

    fn transform(&self) -> Result<Transform, String> {
        Ok(match self {
            ProcKind::BeamSplitter => Transform::beam_splitter(),
            ProcKind::Hadamard => Transform::hadamard(),
            ProcKind::HadamardLift(q) => {
                Transform::lift_single_qubit(&oracle::hadamard(), *q).map_err(|e| e.to_string())?
            }
            ProcKind::Cnot => Transform::cnot(),
            ProcKind::Custom {
                event_types,
                message_len,
                entries,
            } => Transform::from_rows(event_types * message_len, entries)
                .map_err(|e| e.to_string())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PassiveKind {
    Rotation(f64),
    Custom { dim: usize, entries: Vec<f64> },
}

impl PassiveKind {
    fn transform(&self) -> Result<Transform, String> {
        match self {
            PassiveKind::Rotation(deg) => Ok(Transform::plane_rotation(*deg)),
            PassiveKind::Custom { dim, entries } => {
                Transform::from_rows(*dim, entries).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriveInput {
    Phase(f64),
    Payload(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Param(Param),
    Source {
        name: String,
        channels: usize,
        message_len: usize,
    },
    Proc {
        name: String,
        kind: ProcKind,
    },
    Passive {
        name: String,
        kind: PassiveKind,
        channels: usize,
    },
    Wire {
        from: PortRef,
        to: PortRef,
    },
    Sink {
        name: String,
        from: Vec<PortRef>,
    },
    Tap {
        name: String,
        on: PortRef,
    },
    Drive {
        port: PortRef,
        weight: f64,
        input: DriveInput,
    },
}

fn write_reals(f: &mut fmt::Formatter<'_>, values: &[f64]) -> fmt::Result {
    for v in values {
        write!(f, " {v}")?;
    }
    Ok(())
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Param(p) => {
                write!(f, "param {} ", p.key())?;
                match p {
                    Param::Alpha(v) | Param::Discard(v) => write!(f, "{v}"),
                    Param::Mode(m) => write!(f, "{m}"),
                    Param::Seed(s) => write!(f, "{s}"),
                    Param::Events(n) => write!(f, "{n}"),
                }
            }
            Statement::Source {
                name,
                channels,
                message_len,
            } => {
                write!(f, "source {name} {channels}")?;
                if *message_len != 2 {
                    write!(f, " len {message_len}")?;
                }
                Ok(())
            }
            Statement::Proc { name, kind } => {
                write!(f, "proc {name} ")?;
                match kind {
                    ProcKind::BeamSplitter => f.write_str("beamsplitter"),
                    ProcKind::Hadamard => f.write_str("hadamard"),
                    ProcKind::HadamardLift(q) => write!(f, "hadamard-lift {}", q.bit() + 1),
                    ProcKind::Cnot => f.write_str("cnot"),
                    ProcKind::Custom {
                        event_types,
                        message_len,
                        entries,
                    } => {
                        write!(f, "custom {event_types} {message_len}")?;
                        write_reals(f, entries)
                    }
                }
            }
            Statement::Passive {
                name,
                kind,
                channels,
            } => {
                write!(f, "passive {name} ")?;
                match kind {
                    PassiveKind::Rotation(deg) => write!(f, "rotation {deg}")?,
                    PassiveKind::Custom { dim, entries } => {
                        write!(f, "custom {dim}")?;
                        write_reals(f, entries)?;
                    }
                }
                if *channels != 1 {
                    write!(f, " channels {channels}")?;
                }
                Ok(())
            }
            Statement::Wire { from, to } => write!(f, "wire {from} -> {to}"),
            Statement::Sink { name, from } => {
                write!(f, "sink {name} from")?;
                for p in from {
                    write!(f, " {p}")?;
                }
                Ok(())
            }
            Statement::Tap { name, on } => write!(f, "tap {name} on {on}"),
            Statement::Drive {
                port,
                weight,
                input,
            } => {
                write!(f, "drive {port}")?;
                if *weight != 1.0 {
                    write!(f, " weight {weight}")?;
                }
                match input {
                    DriveInput::Phase(deg) => write!(f, " phase {deg}"),
                    DriveInput::Payload(v) => {
                        f.write_str(" payload")?;
                        write_reals(f, v)
                    }
                }
            }
        }
    }
}

/// Line and column, both starting at 1. `(0, 0)` for statements that were
/// not parsed from text.
type Pos = (usize, usize);

/// Positions of the tokens of one statement.
#[derive(Debug, Clone, Default)]
struct Span {
    line: usize,
    columns: Vec<usize>,
}

impl Span {
    fn at(&self, token: usize) -> Pos {
        let col = self
            .columns
            .get(token)
            .or(self.columns.last())
            .copied()
            .unwrap_or(0);
        (self.line, col)
    }
}

/// Parsed netlist. Equality ignores source positions.
#[derive(Debug, Clone, Default)]
pub struct NetlistDocument {
    pub statements: Vec<Statement>,
    spans: Vec<Span>,
}

impl PartialEq for NetlistDocument {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl fmt::Display for NetlistDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (i, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                out.push(Token {
                    text: &line[b..i],
                    col: c,
                });
            }
        } else if start.is_none() {
            start = Some((i, col));
        }
    }
    if let Some((b, c)) = start {
        out.push(Token {
            text: &line[b..],
            col: c,
        });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    next: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.tokens
            .get(self.next)
            .map(|t| t.col)
            .unwrap_or(self.end_col)
    }

    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::syntax(self.line, self.col(), message)
    }

    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.next).map(|t| t.text)
    }

    fn take(&mut self, what: &str) -> Result<&'a str, NetlistError> {
        let t = self
            .peek()
            .ok_or_else(|| self.err(format!("expected {what}")))?;
        self.next += 1;
        Ok(t)
    }

    fn back_err(&self, message: impl Into<String>) -> NetlistError {
        let col = self.tokens[self.next - 1].col;
        NetlistError::syntax(self.line, col, message)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), NetlistError> {
        match self.peek() {
            Some(t) if t == kw => {
                self.next += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected `{kw}`, found `{t}`"))),
            None => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<String, NetlistError> {
        let t = self.take("a name")?;
        if is_ident(t) {
            Ok(t.to_string())
        } else {
            Err(self.back_err(format!("invalid name `{t}`")))
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, NetlistError> {
        let t = self.take(what)?;
        t.parse()
            .map_err(|_| self.back_err(format!("expected {what}, found `{t}`")))
    }

    fn bounded(&mut self, what: &str, min: usize) -> Result<usize, NetlistError> {
        let n = self.count(what)?;
        if n < min || n > MAX_CHANNELS {
            return Err(self.back_err(format!("{what} must lie in {min}..={MAX_CHANNELS}")));
        }
        Ok(n)
    }

    fn real(&mut self, what: &str) -> Result<f64, NetlistError> {
        let t = self.take(what)?;
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.back_err(format!("expected {what}, found `{t}`"))),
        }
    }

    fn reals(&mut self, n: usize, what: &str) -> Result<Vec<f64>, NetlistError> {
        (0..n).map(|_| self.real(what)).collect()
    }

    fn port(&mut self) -> Result<PortRef, NetlistError> {
        let t = self.take("a port `node.channel`")?;
        let (node, ch) = t
            .rsplit_once('.')
            .ok_or_else(|| self.back_err(format!("expected `node.channel`, found `{t}`")))?;
        if !is_ident(node) {
            return Err(self.back_err(format!("invalid name `{node}`")));
        }
        let channel = ch
            .parse()
            .map_err(|_| self.back_err(format!("invalid channel `{ch}`")))?;
        Ok(PortRef {
            node: node.to_string(),
            channel,
        })
    }

    fn done(&self) -> Result<(), NetlistError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected `{t}`"))),
        }
    }
}

fn parse_statement(c: &mut Cursor<'_>) -> Result<Statement, NetlistError> {
    let head = c.take("a statement")?;
    let stmt = match head {
        "param" => {
            let key = c.take("a parameter name")?;
            let p = match key {
                "alpha" => {
                    let v = c.real("alpha")?;
                    Alpha::new(v).map_err(|e| c.back_err(e.to_string()))?;
                    Param::Alpha(v)
                }
                "mode" => match c.take("a mode")? {
                    "deterministic" => Param::Mode(OutputMode::Deterministic),
                    "stochastic" => Param::Mode(OutputMode::Stochastic),
                    m => return Err(c.back_err(format!("unknown mode `{m}`"))),
                },
                "seed" => {
                    let t = c.take("a seed")?;
                    Param::Seed(
                        t.parse()
                            .map_err(|_| c.back_err(format!("invalid seed `{t}`")))?,
                    )
                }
                "events" => {
                    let n = c.count("an event count")?;
                    if n == 0 {
                        return Err(c.back_err("event count must be positive"));
                    }
                    Param::Events(n)
                }
                "discard" => {
                    let v = c.real("a discard fraction")?;
                    if !(0.0..1.0).contains(&v) {
                        return Err(c.back_err("discard fraction must lie in [0, 1)"));
                    }
                    Param::Discard(v)
                }
                k => return Err(c.back_err(format!("unknown parameter `{k}`"))),
            };
            Statement::Param(p)
        }
        "source" => {
            let name = c.ident()?;
            let channels = c.bounded("a channel count", 1)?;
            let message_len = if c.peek() == Some("len") {
                c.next += 1;
                c.bounded("a message length", 1)?
            } else {
                2
            };
            Statement::Source {
                name,
                channels,
                message_len,
            }
        }
        "proc" => {
            let name = c.ident()?;
            let kind = match c.take("a processor kind")? {
                "beamsplitter" => ProcKind::BeamSplitter,
                "hadamard" => ProcKind::Hadamard,
                "hadamard-lift" => match c.take("a qubit")? {
                    "1" => ProcKind::HadamardLift(Qubit::First),
                    "2" => ProcKind::HadamardLift(Qubit::Second),
                    q => return Err(c.back_err(format!("qubit must be 1 or 2, found `{q}`"))),
                },
                "cnot" => ProcKind::Cnot,
                "custom" => {
                    let event_types = c.bounded("an event type count", 2)?;
                    let message_len = c.bounded("a message length", 1)?;
                    let d = event_types
                        .checked_mul(message_len)
                        .and_then(|d| d.checked_mul(d))
                        .filter(|&n| n <= c.tokens.len())
                        .ok_or_else(|| c.back_err("matrix entries missing"))?;
                    ProcKind::Custom {
                        event_types,
                        message_len,
                        entries: c.reals(d, "a matrix entry")?,
                    }
                }
                k => return Err(c.back_err(format!("unknown processor kind `{k}`"))),
            };
            Statement::Proc { name, kind }
        }
        "passive" => {
            let name = c.ident()?;
            let kind = match c.take("a passive kind")? {
                "rotation" => PassiveKind::Rotation(c.real("an angle")?),
                "custom" => {
                    let dim = c.bounded("a dimension", 1)?;
                    let n = dim
                        .checked_mul(dim)
                        .filter(|&n| n <= c.tokens.len())
                        .ok_or_else(|| c.back_err("matrix entries missing"))?;
                    PassiveKind::Custom {
                        dim,
                        entries: c.reals(n, "a matrix entry")?,
                    }
                }
                k => return Err(c.back_err(format!("unknown passive kind `{k}`"))),
            };
            let channels = if c.peek() == Some("channels") {
                c.next += 1;
                c.bounded("a channel count", 1)?
            } else {
                1
            };
            Statement::Passive {
                name,
                kind,
                channels,
            }
        }
        "wire" => {
            let from = c.port()?;
            c.keyword("->")?;
            let to = c.port()?;
            Statement::Wire { from, to }
        }
        "sink" => {
            let name = c.ident()?;
            c.keyword("from")?;
            let mut from = vec![c.port()?];
            while c.peek().is_some() {
                from.push(c.port()?);
            }
            Statement::Sink { name, from }
        }
        "tap" => {
            let name = c.ident()?;
            c.keyword("on")?;
            Statement::Tap {
                name,
                on: c.port()?,
            }
        }
        "drive" => {
            let port = c.port()?;
            let weight = if c.peek() == Some("weight") {
                c.next += 1;
                let w = c.real("a weight")?;
                if w < 0.0 {
                    return Err(c.back_err("weight must not be negative"));
                }
                w
            } else {
                1.0
            };
            let input = match c.take("`phase` or `payload`")? {
                "phase" => DriveInput::Phase(c.real("an angle")?),
                "payload" => {
                    let mut v = vec![c.real("a payload component")?];
                    while c.peek().is_some() {
                        v.push(c.real("a payload component")?);
                    }
                    DriveInput::Payload(v)
                }
                t => return Err(c.back_err(format!("expected `phase` or `payload`, found `{t}`"))),
            };
            Statement::Drive {
                port,
                weight,
                input,
            }
        }
        h => return Err(c.back_err(format!("unknown statement `{h}`"))),
    };
    c.done()?;
    Ok(stmt)
}

/// Parses and validates a netlist. Structural problems (unknown nodes,
/// channel or dimension mismatches, cycles, unwired outputs, duplicate
/// names, bad drives) are reported with the position of the offending
/// statement.
pub fn parse_netlist(text: &str) -> Result<NetlistDocument, NetlistError> {
    let doc = parse_syntax(text)?;
    doc.validate()?;
    Ok(doc)
}

/// Parses without structural validation.
pub fn parse_syntax(text: &str) -> Result<NetlistDocument, NetlistError> {
    let mut doc = NetlistDocument::default();
    let mut params: HashMap<&'static str, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let columns: Vec<usize> = tokens.iter().map(|t| t.col).collect();
        let mut c = Cursor {
            tokens,
            next: 0,
            line: i + 1,
            end_col: line.chars().count() + 1,
        };
        let stmt = parse_statement(&mut c)?;
        if let Statement::Param(p) = &stmt {
            if let Some(prev) = params.insert(p.key(), i + 1) {
                return Err(NetlistError::syntax(
                    i + 1,
                    columns[1],
                    format!("parameter `{}` already set on line {prev}", p.key()),
                ));
            }
        }
        doc.statements.push(stmt);
        doc.spans.push(Span {
            line: i + 1,
            columns,
        });
    }
    Ok(doc)
}

/// Where the pieces of a network came from, for error positions.
#[derive(Default)]
struct Origins {
    wires: Vec<Pos>,
    taps: Vec<Pos>,
    names: Vec<(String, Pos)>,
}

impl Origins {
    fn node(&self, name: &str) -> Pos {
        self.names
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
            .unwrap_or((0, 0))
    }

    fn duplicate(&self, name: &str) -> Pos {
        self.names
            .iter()
            .filter(|(n, _)| n == name)
            .nth(1)
            .map(|(_, p)| *p)
            .unwrap_or_else(|| self.node(name))
    }

    fn locate(&self, e: &NetworkError) -> Pos {
        use NetworkError::*;
        let first = self.names.first().map(|(_, p)| *p).unwrap_or((1, 1));
        match e {
            UnknownNode { wire, .. }
            | ChannelOutOfRange { wire, .. }
            | WireFromSink { wire, .. }
            | WireIntoSource { wire, .. }
            | MessageLenMismatch { wire, .. }
            | EventTypeCount { wire, .. }
            | DuplicateRoute { wire, .. }
            | Cycle { wire, .. } => self.wires.get(*wire).copied().unwrap_or(first),
            TapUnknownNode { tap, .. } | TapChannel { tap, .. } => {
                self.taps.get(*tap).copied().unwrap_or(first)
            }
            DuplicateName(name) => self.duplicate(name),
            Unwired { node, .. } => self.node(node),
            NoSource => (1, 1),
            _ => first,
        }
    }
}

impl NetlistDocument {
    pub fn new(statements: Vec<Statement>) -> Self {
        let spans = vec![Span::default(); statements.len()];
        NetlistDocument { statements, spans }
    }

    fn span(&self, i: usize) -> Span {
        self.spans.get(i).cloned().unwrap_or_default()
    }

    /// Run configuration from the `param` statements, defaults elsewhere.
    pub fn config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        for s in &self.statements {
            if let Statement::Param(p) = s {
                match p {
                    Param::Alpha(v) => cfg.alpha = Alpha::new(*v).unwrap_or(cfg.alpha),
                    Param::Mode(m) => cfg.mode = *m,
                    Param::Seed(v) => cfg.seed = *v,
                    Param::Events(n) => cfg.events_per_point = *n,
                    Param::Discard(v) => cfg.discard_fraction = *v,
                }
            }
        }
        cfg
    }

    /// Checks that the document describes a valid network with usable
    /// drives.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let cfg = self.config();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = self.build(cfg.alpha, cfg.mode, &mut rng, 0)?;
        self.drives(&net)?;
        Ok(())
    }

    /// Builds the network. Processors draw their machines from `init` in
    /// declaration order.
    pub fn build<R: Rng + ?Sized>(
        &self,
        alpha: Alpha,
        mode: OutputMode,
        init: &mut R,
        slm_seed: u64,
    ) -> Result<Network, NetlistError> {
        let mut b = NetworkBuilder::new();
        let mut o = Origins::default();
        for (i, s) in self.statements.iter().enumerate() {
            let span = self.span(i);
            match s {
                Statement::Param(_) | Statement::Drive { .. } => {}
                Statement::Source {
                    name,
                    channels,
                    message_len,
                } => {
                    o.names.push((name.clone(), span.at(1)));
                    b.source(name, *channels, *message_len);
                }
                Statement::Proc { name, kind } => {
                    o.names.push((name.clone(), span.at(1)));
                    let t = kind
                        .transform()
                        .map_err(|m| NetlistError::semantic(span.at(2), m))?;
                    let (ne, nm) = kind.shape();
                    let shape = Shape::new(ne, nm)
                        .map_err(|e| NetlistError::semantic(span.at(2), e.to_string()))?;
                    let p = Processor::random(init, alpha, shape, t, mode)
                        .map_err(|e| NetlistError::semantic(span.at(2), e.to_string()))?;
                    b.processor(name, p);
                }
                Statement::Passive {
                    name,
                    kind,
                    channels,
                } => {
                    o.names.push((name.clone(), span.at(1)));
                    let t = kind
                        .transform()
                        .map_err(|m| NetlistError::semantic(span.at(2), m))?;
                    b.passive(name, t, *channels);
                }
                Statement::Wire { from, to } => {
                    o.wires.push(span.at(1));
                    b.wire(from.pair(), to.pair());
                }
                Statement::Sink { name, from } => {
                    o.names.push((name.clone(), span.at(1)));
                    let ports: Vec<(&str, usize)> = from.iter().map(PortRef::pair).collect();
                    o.wires.extend((0..ports.len()).map(|k| span.at(3 + k)));
                    b.sink(name, &ports);
                }
                Statement::Tap { name, on } => {
                    o.names.push((name.clone(), span.at(1)));
                    o.taps.push(span.at(3));
                    b.tap(name, on.pair());
                }
            }
        }
        b.build(slm_seed)
            .map_err(|e| NetlistError::semantic(o.locate(&e), e.to_string()))
    }

    /// The source all drives feed and the drives themselves.
    pub fn drives(&self, net: &Network) -> Result<Option<(NodeId, Vec<Drive>)>, NetlistError> {
        let mut source: Option<(NodeId, String)> = None;
        let mut drives = Vec::new();
        for (i, s) in self.statements.iter().enumerate() {
            let Statement::Drive {
                port,
                weight,
                input,
            } = s
            else {
                continue;
            };
            let pos = self.span(i).at(1);
            let err = |m: String| NetlistError::semantic(pos, m);
            let id = net
                .node_id(&port.node)
                .ok_or_else(|| err(format!("unknown node `{}`", port.node)))?;
            let NodeKind::Source {
                channels,
                message_len,
            } = net.node(id).kind
            else {
                return Err(err(format!("`{}` is not a source", port.node)));
            };
            match &source {
                Some((_, other)) if *other != port.node => {
                    return Err(err(format!(
                        "all drives must feed one source, `{other}` already driven"
                    )));
                }
                None => source = Some((id, port.node.clone())),
                _ => {}
            }
            if port.channel >= channels {
                return Err(err(format!(
                    "`{}` has no channel {}",
                    port.node, port.channel
                )));
            }
            let payload = match input {
                DriveInput::Phase(deg) => Message::phase(port.channel, *deg).payload,
                DriveInput::Payload(v) => v.clone(),
            };
            if payload.len() != message_len {
                return Err(err(format!(
                    "payload has {} components, `{}` carries {message_len}",
                    payload.len(),
                    port.node
                )));
            }
            Message::new(port.channel, payload.clone()).map_err(|e| err(e.to_string()))?;
            drives.push(Drive {
                channel: port.channel,
                weight: *weight,
                payload,
            });
        }
        if !drives.is_empty() && drives.iter().all(|d| d.weight == 0.0) {
            let pos = self.span(self.statements.len() - 1).at(0);
            return Err(NetlistError::semantic(pos, "all drive weights are zero"));
        }
        Ok(source.map(|(id, _)| (id, drives)))
    }

    /// Builds the network from `cfg.seed` and routes `cfg.events_per_point`
    /// events from the drives. One row per sink, then per tap.
    pub fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, RunError> {
        cfg.validate()?;
        let mut streams = Streams::new(cfg.seed);
        let mut net = self.build(cfg.alpha, cfg.mode, &mut streams.init, streams.slm_seed)?;
        let (src, drives) = self.drives(&net)?.ok_or(ExperimentError::NoDrives)?;
        run_point(&mut net, src, &drives, cfg, &mut streams.input)?;
        Ok(net
            .counters()
            .into_iter()
            .map(|(name, counts)| ReportRow::new(&name, &[], &FrequencyReport::new(counts, None)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BS: &str = "\
source in 2
proc bs beamsplitter   # the splitter
wire in.0 -> bs.0
wire in.1 -> bs.1
sink n0 from bs.0
sink n1 from bs.1
";

    fn err(text: &str) -> NetlistError {
        parse_netlist(text).unwrap_err()
    }

    #[test]
    fn empty_file_has_no_source() {
        let e = err("");
        assert_eq!(e.message, "no source declared");
        assert_eq!(err("# nothing\n\n").message, "no source declared");
    }

    #[test]
    fn parses_beam_splitter() {
        let doc = parse_netlist(BS).unwrap();
        assert_eq!(doc.statements.len(), 6);
        assert_eq!(
            doc.statements[1],
            Statement::Proc {
                name: "bs".into(),
                kind: ProcKind::BeamSplitter
            }
        );
    }

    #[test]
    fn self_wire_is_a_cycle() {
        let e = err(&format!("{BS}wire bs.0 -> bs.0\n"));
        assert_eq!((e.line, e.column, e.kind), (7, 6, ErrorKind::Semantic));
        assert!(e.message.contains("cycle"), "{e}");
    }

    #[test]
    fn dangling_wire_position() {
        let e = err(&BS.replace("wire in.1 -> bs.1", "wire in.1 -> bx.1"));
        assert_eq!((e.line, e.column), (4, 6));
        assert!(e.message.contains("unknown node `bx`"));
    }

    #[test]
    fn sink_port_position() {
        let e = err(&BS.replace("sink n1 from bs.1", "sink n1 from bs.7"));
        assert_eq!((e.line, e.column), (6, 14));
    }

    #[test]
    fn duplicate_name_points_at_second() {
        let e = err(&format!("{BS}tap bs on bs.0\n"));
        assert_eq!((e.line, e.column), (7, 5));
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn unwired_output_points_at_node() {
        let e = err(&BS.replace("sink n1 from bs.1\n", ""));
        assert_eq!(e.line, 2);
        assert!(e.message.contains("not wired"));
    }

    #[test]
    fn dimension_mismatch() {
        let e = err(&BS.replace("source in 2", "source in 2 len 3"));
        assert_eq!(e.line, 3);
        assert!(e.message.contains("message length"), "{e}");
    }

    #[test]
    fn syntax_errors() {
        let e = err("source in two\n");
        assert_eq!((e.line, e.column, e.kind), (1, 11, ErrorKind::Syntax));
        let e = err("\n  wire a.0 b.0\n");
        assert_eq!((e.line, e.column), (2, 12));
        assert!(err("param alpha 1.5").message.contains("alpha"));
        assert!(err("param alpha 0.9\nparam alpha 0.8")
            .message
            .contains("already set"));
        assert!(err("proc p custom 2 1 1 0 0")
            .message
            .contains("matrix entry"));
        assert!(err("proc p custom 60000 60000 1")
            .message
            .contains("missing"));
        assert!(err("proc p custom 2 1 1 0 0 NaN")
            .message
            .contains("matrix entry"));
        assert!(err("sink s from").message.contains("port"));
        let e = err("wire a.0 -> b.0 c");
        assert_eq!((e.line, e.column), (1, 17));
    }

    #[test]
    fn non_orthogonal_custom() {
        let e = err(&BS.replace("beamsplitter", "custom 2 2 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 2"));
        assert_eq!((e.line, e.column), (2, 9));
        assert!(e.message.contains("orthogonal"));
    }

    #[test]
    fn drives_are_checked() {
        assert!(parse_netlist(&format!(
            "{BS}drive in.0 phase 30\ndrive in.1 weight 0.5 payload 0.6 0.8\n"
        ))
        .is_ok());
        let e = err(&format!("{BS}drive bs.0 phase 0\n"));
        assert!(e.message.contains("not a source"));
        let e = err(&format!("{BS}drive in.0 payload 1 1\n"));
        assert_eq!(e.line, 7);
        let e = err(&format!("{BS}drive in.2 phase 0\n"));
        assert!(e.message.contains("no channel"));
    }

    #[test]
    fn print_round_trips() {
        let text = format!(
            "param alpha 0.995\nparam mode stochastic\nparam seed 3\nparam events 50\nparam discard 0.25\n{BS}\
             passive r custom 2 0 -1 1 0 channels 3\ndrive in.0 weight 0.3 phase 12.5\n"
        );
        let doc = parse_syntax(&text).unwrap();
        let printed = doc.to_string();
        assert_eq!(parse_syntax(&printed).unwrap(), doc);
        assert_eq!(parse_syntax(&printed).unwrap().to_string(), printed);
    }

    #[test]
    fn config_from_params() {
        let doc = parse_syntax("param events 7\nparam mode stochastic\n").unwrap();
        let c = doc.config();
        assert_eq!(c.events_per_point, 7);
        assert_eq!(c.mode, OutputMode::Stochastic);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn run_counts_every_event() {
        let doc = parse_netlist(&format!("{BS}drive in.0 phase 0\n")).unwrap();
        let cfg = ExperimentConfig {
            events_per_point: 300,
            ..Default::default()
        };
        let rows = doc.run(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows.iter().map(|r| r.counts[0]).sum::<u64>(), 300);
        assert!(matches!(
            parse_netlist(BS).unwrap().run(&cfg),
            Err(RunError::Experiment(ExperimentError::NoDrives))
        ));
    }
}
