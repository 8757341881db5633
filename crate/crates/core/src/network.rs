//! Processors and event-routing networks.
//!
//! A [`Processor`] chains a learning machine, an orthogonal transform and a
//! second learning machine. A [`Network`] wires processors, passive payload
//! transforms, sources and sinks into an acyclic graph through which exactly
//! one message travels at a time.

use std::collections::HashMap;
use std::fmt;

use petgraph::algo::{has_path_connecting, toposort};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dlm::{Alpha, DlmError, DlmState, Emission, Message, Shape};
use crate::oracle;
use crate::transforms::{Qubit, Transform};

/// ChaCha stream used for stochastic output draws.
pub const SLM_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OutputMode {
    #[default]
    Deterministic,
    Stochastic,
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Deterministic => "deterministic",
            OutputMode::Stochastic => "stochastic",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error(transparent)]
    Dlm(#[from] DlmError),
    #[error("transform of dimension {transform} does not fit machines of dimension {machine}")]
    TransformDim { transform: usize, machine: usize },
    #[error("machines of a processor must share a shape")]
    ShapeMismatch,
    #[error("stochastic output needs a random draw")]
    MissingDraw,
    #[error("deterministic output takes no random draw")]
    UnexpectedDraw,
    #[error("no source declared")]
    NoSource,
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("wire {wire}: unknown node `{name}`")]
    UnknownNode { wire: usize, name: String },
    #[error("wire {wire}: `{node}` has no channel {channel} ({available} available)")]
    ChannelOutOfRange {
        wire: usize,
        node: String,
        channel: usize,
        available: usize,
    },
    #[error("wire {wire}: sink `{node}` has no outputs")]
    WireFromSink { wire: usize, node: String },
    #[error("wire {wire}: source `{node}` has no inputs")]
    WireIntoSource { wire: usize, node: String },
    #[error("wire {wire}: message length {from} does not match {to}")]
    MessageLenMismatch { wire: usize, from: usize, to: usize },
    #[error("wire {wire}: processors with {from} and {to} event types cannot be connected")]
    EventTypeCount { wire: usize, from: usize, to: usize },
    #[error("wire {wire}: output {node}.{channel} is already wired")]
    DuplicateRoute {
        wire: usize,
        node: String,
        channel: usize,
    },
    #[error("wire {wire} closes a cycle through `{node}`")]
    Cycle { wire: usize, node: String },
    #[error("output {node}.{channel} is not wired")]
    Unwired { node: String, channel: usize },
    #[error("tap {tap}: unknown node `{name}`")]
    TapUnknownNode { tap: usize, name: String },
    #[error("tap {tap}: `{node}` has no output channel {channel}")]
    TapChannel {
        tap: usize,
        node: String,
        channel: usize,
    },
    #[error("`{0}` is not a source")]
    NotASource(String),
    #[error("`{0}` is not a passive node")]
    NotPassive(String),
    #[error("no node named `{0}`")]
    NoSuchNode(String),
    #[error("source `{node}` has {channels} channels, message has event type {event_type}")]
    SourceChannel {
        node: String,
        channels: usize,
        event_type: usize,
    },
}

/// A machine, a transform stage and a second machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Processor {
    dlm1: DlmState,
    transform: Transform,
    dlm2: DlmState,
    mode: OutputMode,
}

impl Processor {
    pub fn new(
        dlm1: DlmState,
        transform: Transform,
        dlm2: DlmState,
        mode: OutputMode,
    ) -> Result<Self, NetworkError> {
        if dlm1.shape() != dlm2.shape() {
            return Err(NetworkError::ShapeMismatch);
        }
        if transform.dim() != dlm1.dim() {
            return Err(NetworkError::TransformDim {
                transform: transform.dim(),
                machine: dlm1.dim(),
            });
        }
        Ok(Processor {
            dlm1,
            transform,
            dlm2,
            mode,
        })
    }

    /// Processor with both machines drawn uniformly from the unit sphere,
    /// first machine first.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        alpha: Alpha,
        shape: Shape,
        transform: Transform,
        mode: OutputMode,
    ) -> Result<Self, NetworkError> {
        let dlm1 = DlmState::random(rng, alpha, shape);
        let dlm2 = DlmState::random(rng, alpha, shape);
        Self::new(dlm1, transform, dlm2, mode)
    }

    pub fn shape(&self) -> Shape {
        self.dlm1.shape()
    }

    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn first(&self) -> &DlmState {
        &self.dlm1
    }

    pub fn second(&self) -> &DlmState {
        &self.dlm2
    }

    /// Runs one event through the pipeline. `draw` must be present exactly
    /// when the processor is in stochastic mode.
    pub fn process_event(
        &mut self,
        msg: &Message,
        draw: Option<f64>,
    ) -> Result<Emission, NetworkError> {
        match (self.mode, draw) {
            (OutputMode::Stochastic, None) => return Err(NetworkError::MissingDraw),
            (OutputMode::Deterministic, Some(_)) => return Err(NetworkError::UnexpectedDraw),
            _ => {}
        }
        let target = self.dlm1.build_target(msg)?;
        self.dlm1.learn(&target);
        let transformed = self.transform.apply(self.dlm1.values());
        let rule = self.dlm2.learn(&transformed);
        Ok(match draw {
            Some(r) => self.dlm2.stochastic_output(r),
            None => self.dlm2.deterministic_output(rule),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// An output (or input) channel of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Port {
    pub node: NodeId,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Source {
        channels: usize,
        message_len: usize,
    },
    Processor(Processor),
    /// Applies its transform to the payload; channel `c` in leaves on `c`.
    Passive {
        transform: Transform,
        channels: usize,
    },
    Sink {
        counts: Vec<u64>,
    },
}

impl NodeKind {
    fn inputs(&self) -> usize {
        match self {
            NodeKind::Source { .. } => 0,
            NodeKind::Processor(p) => p.shape().num_event_types(),
            NodeKind::Passive { channels, .. } => *channels,
            NodeKind::Sink { counts } => counts.len(),
        }
    }

    fn outputs(&self) -> usize {
        match self {
            NodeKind::Source { channels, .. } => *channels,
            NodeKind::Processor(p) => p.shape().num_event_types(),
            NodeKind::Passive { channels, .. } => *channels,
            NodeKind::Sink { .. } => 0,
        }
    }

    fn message_len(&self) -> Option<usize> {
        match self {
            NodeKind::Source { message_len, .. } => Some(*message_len),
            NodeKind::Processor(p) => Some(p.shape().message_len()),
            NodeKind::Passive { transform, .. } => Some(transform.dim()),
            NodeKind::Sink { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Source { .. } => "source",
            NodeKind::Processor(_) => "processor",
            NodeKind::Passive { .. } => "passive",
            NodeKind::Sink { .. } => "sink",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

/// A non-consuming counter on an output port.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub name: String,
    pub port: Port,
    pub count: u64,
}

/// Where a routed message ended up.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub sink: NodeId,
    pub channel: usize,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq)]
struct WireSpec {
    from: (String, usize),
    to: (String, usize),
}

#[derive(Debug, Clone, PartialEq)]
struct TapSpec {
    name: String,
    port: (String, usize),
}

/// Collects nodes and wires by name; [`NetworkBuilder::build`] validates
/// the graph.
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    wires: Vec<WireSpec>,
    taps: Vec<TapSpec>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn source(&mut self, name: &str, channels: usize, message_len: usize) -> &mut Self {
        self.node(
            name,
            NodeKind::Source {
                channels,
                message_len,
            },
        )
    }

    pub fn processor(&mut self, name: &str, processor: Processor) -> &mut Self {
        self.node(name, NodeKind::Processor(processor))
    }

    pub fn passive(&mut self, name: &str, transform: Transform, channels: usize) -> &mut Self {
        self.node(
            name,
            NodeKind::Passive {
                transform,
                channels,
            },
        )
    }

    /// A sink whose channel `i` is fed by `from[i]`.
    pub fn sink(&mut self, name: &str, from: &[(&str, usize)]) -> &mut Self {
        self.node(
            name,
            NodeKind::Sink {
                counts: vec![0; from.len()],
            },
        );
        for (i, port) in from.iter().enumerate() {
            self.wire(*port, (name, i));
        }
        self
    }

    pub fn node(&mut self, name: &str, kind: NodeKind) -> &mut Self {
        self.nodes.push(Node {
            name: name.to_string(),
            kind,
        });
        self
    }

    pub fn wire(&mut self, from: (&str, usize), to: (&str, usize)) -> &mut Self {
        self.wires.push(WireSpec {
            from: (from.0.to_string(), from.1),
            to: (to.0.to_string(), to.1),
        });
        self
    }

    pub fn tap(&mut self, name: &str, on: (&str, usize)) -> &mut Self {
        self.taps.push(TapSpec {
            name: name.to_string(),
            port: (on.0.to_string(), on.1),
        });
        self
    }

    /// Number of wires added so far; wire errors refer to this ordinal.
    pub fn wire_count(&self) -> usize {
        self.wires.len()
    }

    pub fn build(self, slm_seed: u64) -> Result<Network, NetworkError> {
        let mut index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.name.clone(), NodeId(i)).is_some() {
                return Err(NetworkError::DuplicateName(n.name.clone()));
            }
        }
        for t in &self.taps {
            if index.contains_key(&t.name) {
                return Err(NetworkError::DuplicateName(t.name.clone()));
            }
        }
        for (i, t) in self.taps.iter().enumerate() {
            if self.taps[..i].iter().any(|o| o.name == t.name) {
                return Err(NetworkError::DuplicateName(t.name.clone()));
            }
        }
        if !self
            .nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Source { .. }))
        {
            return Err(NetworkError::NoSource);
        }

        let mut routes: HashMap<Port, Port> = HashMap::new();
        let mut graph = DiGraph::<usize, usize>::new();
        let gidx: Vec<_> = (0..self.nodes.len()).map(|i| graph.add_node(i)).collect();
        for (w, spec) in self.wires.iter().enumerate() {
            let lookup = |name: &String| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| NetworkError::UnknownNode {
                        wire: w,
                        name: name.clone(),
                    })
            };
            let from = lookup(&spec.from.0)?;
            let to = lookup(&spec.to.0)?;
            let (fnode, tnode) = (&self.nodes[from.0], &self.nodes[to.0]);
            if matches!(fnode.kind, NodeKind::Sink { .. }) {
                return Err(NetworkError::WireFromSink {
                    wire: w,
                    node: fnode.name.clone(),
                });
            }
            if matches!(tnode.kind, NodeKind::Source { .. }) {
                return Err(NetworkError::WireIntoSource {
                    wire: w,
                    node: tnode.name.clone(),
                });
            }
            if spec.from.1 >= fnode.kind.outputs() {
                return Err(NetworkError::ChannelOutOfRange {
                    wire: w,
                    node: fnode.name.clone(),
                    channel: spec.from.1,
                    available: fnode.kind.outputs(),
                });
            }
            if spec.to.1 >= tnode.kind.inputs() {
                return Err(NetworkError::ChannelOutOfRange {
                    wire: w,
                    node: tnode.name.clone(),
                    channel: spec.to.1,
                    available: tnode.kind.inputs(),
                });
            }
            if let (Some(a), Some(b)) = (fnode.kind.message_len(), tnode.kind.message_len()) {
                if a != b {
                    return Err(NetworkError::MessageLenMismatch {
                        wire: w,
                        from: a,
                        to: b,
                    });
                }
            }
            if let (NodeKind::Processor(a), NodeKind::Processor(b)) = (&fnode.kind, &tnode.kind) {
                let (ea, eb) = (a.shape().num_event_types(), b.shape().num_event_types());
                if ea != eb {
                    return Err(NetworkError::EventTypeCount {
                        wire: w,
                        from: ea,
                        to: eb,
                    });
                }
            }
            if from == to {
                return Err(NetworkError::Cycle {
                    wire: w,
                    node: fnode.name.clone(),
                });
            }
            let out = Port {
                node: from,
                channel: spec.from.1,
            };
            let inp = Port {
                node: to,
                channel: spec.to.1,
            };
            if routes.insert(out, inp).is_some() {
                return Err(NetworkError::DuplicateRoute {
                    wire: w,
                    node: fnode.name.clone(),
                    channel: spec.from.1,
                });
            }
            graph.add_edge(gidx[from.0], gidx[to.0], w);
        }

        if let Err(cycle) = toposort(&graph, None) {
            let n = cycle.node_id();
            let wire = graph
                .edges_directed(n, petgraph::Direction::Outgoing)
                .filter_map(|e| {
                    use petgraph::visit::EdgeRef;
                    let back = e.target() == n || has_path_connecting(&graph, e.target(), n, None);
                    back.then(|| *e.weight())
                })
                .min()
                .unwrap_or(0);
            return Err(NetworkError::Cycle {
                wire,
                node: self.nodes[graph[n]].name.clone(),
            });
        }

        for (i, n) in self.nodes.iter().enumerate() {
            for c in 0..n.kind.outputs() {
                if !routes.contains_key(&Port {
                    node: NodeId(i),
                    channel: c,
                }) {
                    return Err(NetworkError::Unwired {
                        node: n.name.clone(),
                        channel: c,
                    });
                }
            }
        }

        let mut taps = Vec::with_capacity(self.taps.len());
        for (t, spec) in self.taps.into_iter().enumerate() {
            let node = *index
                .get(&spec.port.0)
                .ok_or_else(|| NetworkError::TapUnknownNode {
                    tap: t,
                    name: spec.port.0.clone(),
                })?;
            if spec.port.1 >= self.nodes[node.0].kind.outputs() {
                return Err(NetworkError::TapChannel {
                    tap: t,
                    node: spec.port.0.clone(),
                    channel: spec.port.1,
                });
            }
            taps.push(Tap {
                name: spec.name,
                port: Port {
                    node,
                    channel: spec.port.1,
                },
                count: 0,
            });
        }

        let mut slm_rng = ChaCha8Rng::seed_from_u64(slm_seed);
        slm_rng.set_stream(SLM_STREAM);
        Ok(Network {
            nodes: self.nodes,
            index,
            routes,
            taps,
            slm_rng,
            routed: 0,
        })
    }
}

/// A validated, acyclic event-routing network.
///
/// Routing is sequential: [`Network::route`] carries one message from a
/// source to a sink before it returns.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    index: HashMap<String, NodeId>,
    routes: HashMap<Port, Port>,
    taps: Vec<Tap>,
    slm_rng: ChaCha8Rng,
    routed: u64,
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    /// Destination of an output port.
    pub fn route_of(&self, port: Port) -> Option<Port> {
        self.routes.get(&port).copied()
    }

    /// All routes, sorted by source port.
    pub fn routes(&self) -> Vec<(Port, Port)> {
        let mut r: Vec<_> = self.routes.iter().map(|(a, b)| (*a, *b)).collect();
        r.sort_by_key(|(p, _)| (p.node, p.channel));
        r
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn processor(&self, name: &str) -> Option<&Processor> {
        match &self.nodes[self.node_id(name)?.0].kind {
            NodeKind::Processor(p) => Some(p),
            _ => None,
        }
    }

    pub fn processors(&self) -> impl Iterator<Item = (&str, &Processor)> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Processor(p) => Some((n.name.as_str(), p)),
            _ => None,
        })
    }

    pub fn count_kind(&self, label: &str) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind.label() == label)
            .count()
    }

    /// Replaces the transform of a passive node, e.g. to sweep a phase.
    pub fn set_passive_transform(
        &mut self,
        name: &str,
        new: Transform,
    ) -> Result<(), NetworkError> {
        let id = self
            .node_id(name)
            .ok_or_else(|| NetworkError::NoSuchNode(name.to_string()))?;
        match &mut self.nodes[id.0].kind {
            NodeKind::Passive { transform, .. } => {
                if transform.dim() != new.dim() {
                    return Err(NetworkError::TransformDim {
                        transform: new.dim(),
                        machine: transform.dim(),
                    });
                }
                *transform = new;
                Ok(())
            }
            _ => Err(NetworkError::NotPassive(name.to_string())),
        }
    }

    /// Counts of a sink (one per channel) or a tap (single entry).
    pub fn counts(&self, name: &str) -> Option<Vec<u64>> {
        if let Some(id) = self.node_id(name) {
            if let NodeKind::Sink { counts } = &self.nodes[id.0].kind {
                return Some(counts.clone());
            }
            return None;
        }
        self.taps
            .iter()
            .find(|t| t.name == name)
            .map(|t| vec![t.count])
    }

    /// Every counter in declaration order: sinks first, then taps.
    pub fn counters(&self) -> Vec<(String, Vec<u64>)> {
        let sinks = self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Sink { counts } => Some((n.name.clone(), counts.clone())),
            _ => None,
        });
        let taps = self.taps.iter().map(|t| (t.name.clone(), vec![t.count]));
        sinks.chain(taps).collect()
    }

    pub fn reset_counters(&mut self) {
        for n in &mut self.nodes {
            if let NodeKind::Sink { counts } = &mut n.kind {
                counts.iter_mut().for_each(|c| *c = 0);
            }
        }
        self.taps.iter_mut().for_each(|t| t.count = 0);
        self.routed = 0;
    }

    /// Number of messages delivered since construction or the last reset.
    pub fn routed(&self) -> u64 {
        self.routed
    }

    /// Carries `msg` from source `entry` to a sink. The message's event type
    /// selects the source channel; on every wire the event type becomes the
    /// destination channel.
    pub fn route(&mut self, msg: Message, entry: NodeId) -> Result<Delivery, NetworkError> {
        let name = &self.nodes[entry.0].name;
        let NodeKind::Source {
            channels,
            message_len,
        } = self.nodes[entry.0].kind
        else {
            return Err(NetworkError::NotASource(name.clone()));
        };
        if msg.event_type >= channels {
            return Err(NetworkError::SourceChannel {
                node: name.clone(),
                channels,
                event_type: msg.event_type,
            });
        }
        if msg.payload.len() != message_len {
            return Err(DlmError::LengthMismatch {
                expected: message_len,
                actual: msg.payload.len(),
            }
            .into());
        }

        let mut message = msg;
        let mut out = Port {
            node: entry,
            channel: message.event_type,
        };
        // The graph is acyclic, so a walk visits each node at most once.
        for _ in 0..=self.nodes.len() {
            self.record_taps(out);
            let dest = self.routes[&out];
            message.event_type = dest.channel;
            let draw = match &self.nodes[dest.node.0].kind {
                NodeKind::Processor(p) if p.mode() == OutputMode::Stochastic => {
                    Some(self.slm_rng.random::<f64>())
                }
                _ => None,
            };
            match &mut self.nodes[dest.node.0].kind {
                NodeKind::Processor(p) => {
                    let emission = p.process_event(&message, draw)?;
                    message = emission.message;
                    out = Port {
                        node: dest.node,
                        channel: message.event_type,
                    };
                }
                NodeKind::Passive { transform, .. } => {
                    message.payload = transform.apply(&message.payload);
                    out = dest;
                }
                NodeKind::Sink { counts } => {
                    counts[dest.channel] += 1;
                    self.routed += 1;
                    return Ok(Delivery {
                        sink: dest.node,
                        channel: dest.channel,
                        message,
                    });
                }
                NodeKind::Source { .. } => unreachable!("sources have no inputs"),
            }
        }
        unreachable!("validated networks are acyclic")
    }

    fn record_taps(&mut self, port: Port) {
        for t in &mut self.taps {
            if t.port == port {
                t.count += 1;
            }
        }
    }
}

/// Beam splitter network: source `in` (2 channels) into processor `bs`,
/// outputs counted by sinks `n0` and `n1`.
pub fn build_beam_splitter<R: Rng + ?Sized>(
    alpha: Alpha,
    mode: OutputMode,
    init: &mut R,
    slm_seed: u64,
) -> Result<Network, NetworkError> {
    let shape = Shape::new(2, 2)?;
    let mut b = NetworkBuilder::new();
    b.source("in", 2, 2)
        .processor(
            "bs",
            Processor::random(init, alpha, shape, Transform::beam_splitter(), mode)?,
        )
        .wire(("in", 0), ("bs", 0))
        .wire(("in", 1), ("bs", 1))
        .sink("n0", &[("bs", 0)])
        .sink("n1", &[("bs", 1)]);
    b.build(slm_seed)
}

/// Interferometer network: `in -> bs1 -> {r0, r1} -> bs2 -> {n2, n3}`, with
/// taps `n0`, `n1` on the outputs of `bs1`.
pub fn build_mzi<R: Rng + ?Sized>(
    alpha: Alpha,
    phi0: f64,
    phi1: f64,
    mode: OutputMode,
    init: &mut R,
    slm_seed: u64,
) -> Result<Network, NetworkError> {
    let shape = Shape::new(2, 2)?;
    let bs1 = Processor::random(init, alpha, shape, Transform::beam_splitter(), mode)?;
    let bs2 = Processor::random(init, alpha, shape, Transform::beam_splitter(), mode)?;
    let mut b = NetworkBuilder::new();
    b.source("in", 2, 2)
        .processor("bs1", bs1)
        .passive("r0", Transform::plane_rotation(phi0), 1)
        .passive("r1", Transform::plane_rotation(phi1), 1)
        .processor("bs2", bs2)
        .wire(("in", 0), ("bs1", 0))
        .wire(("in", 1), ("bs1", 1))
        .wire(("bs1", 0), ("r0", 0))
        .wire(("bs1", 1), ("r1", 0))
        .wire(("r0", 0), ("bs2", 0))
        .wire(("r1", 0), ("bs2", 1))
        .sink("n2", &[("bs2", 0)])
        .sink("n3", &[("bs2", 1)])
        .tap("n0", ("bs1", 0))
        .tap("n1", ("bs1", 1));
    b.build(slm_seed)
}

/// Names of the processors of the reversed-control CNOT circuit, in order.
pub const CNOT_CIRCUIT_STAGES: [&str; 5] = ["h1a", "h2a", "cnot", "h1b", "h2b"];

/// Hadamards on both qubits, CNOT, Hadamards on both qubits, as five
/// processors over four event types. Output counted by the four-channel
/// sink `out`.
pub fn build_cnot_circuit<R: Rng + ?Sized>(
    alpha: Alpha,
    mode: OutputMode,
    init: &mut R,
    slm_seed: u64,
) -> Result<Network, NetworkError> {
    let shape = Shape::new(4, 2)?;
    let h = oracle::hadamard();
    let h1 = Transform::lift_single_qubit(&h, Qubit::First).expect("hadamard is unitary");
    let h2 = Transform::lift_single_qubit(&h, Qubit::Second).expect("hadamard is unitary");
    let transforms = [h1.clone(), h2.clone(), Transform::cnot(), h1, h2];

    let mut b = NetworkBuilder::new();
    b.source("in", 4, 2);
    let mut prev = "in";
    for (name, t) in CNOT_CIRCUIT_STAGES.iter().zip(transforms) {
        b.processor(name, Processor::random(init, alpha, shape, t, mode)?);
        for k in 0..4 {
            b.wire((prev, k), (name, k));
        }
        prev = name;
    }
    b.sink("out", &[(prev, 0), (prev, 1), (prev, 2), (prev, 3)]);
    b.build(slm_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn alpha(a: f64) -> Alpha {
        Alpha::new(a).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn processor_rejects_mismatched_transform() {
        let mut r = rng(1);
        let shape = Shape::new(2, 2).unwrap();
        let err = Processor::random(
            &mut r,
            alpha(0.9),
            shape,
            Transform::cnot(),
            OutputMode::Deterministic,
        )
        .unwrap_err();
        assert_eq!(
            err,
            NetworkError::TransformDim {
                transform: 8,
                machine: 4
            }
        );
        let a = DlmState::random(&mut r, alpha(0.9), shape);
        let b = DlmState::random(&mut r, alpha(0.9), Shape::new(4, 1).unwrap());
        assert_eq!(
            Processor::new(a, Transform::identity(4), b, OutputMode::Deterministic).unwrap_err(),
            NetworkError::ShapeMismatch
        );
    }

    #[test]
    fn processor_draw_must_match_mode() {
        let mut r = rng(2);
        let shape = Shape::new(2, 2).unwrap();
        let mut p = Processor::random(
            &mut r,
            alpha(0.9),
            shape,
            Transform::beam_splitter(),
            OutputMode::Deterministic,
        )
        .unwrap();
        assert_eq!(
            p.process_event(&Message::phase(0, 0.0), Some(0.5)),
            Err(NetworkError::UnexpectedDraw)
        );
        let mut p = Processor::random(
            &mut r,
            alpha(0.9),
            shape,
            Transform::beam_splitter(),
            OutputMode::Stochastic,
        )
        .unwrap();
        assert_eq!(
            p.process_event(&Message::phase(0, 0.0), None),
            Err(NetworkError::MissingDraw)
        );
    }

    #[test]
    fn beam_splitter_single_input_splits_evenly() {
        let mut r = rng(3);
        let shape = Shape::new(2, 2).unwrap();
        let mut p = Processor::random(
            &mut r,
            alpha(0.99),
            shape,
            Transform::beam_splitter(),
            OutputMode::Deterministic,
        )
        .unwrap();
        let msg = Message::phase(0, 0.0);
        let zeros = (0..10_000)
            .filter(|_| p.process_event(&msg, None).unwrap().message.event_type == 0)
            .count();
        assert_abs_diff_eq!(zeros as f64 / 10_000.0, 0.5, epsilon = 0.02);
    }

    #[test]
    fn identity_processor_settles_on_input_type() {
        let mut r = rng(4);
        let shape = Shape::new(2, 2).unwrap();
        let mut p = Processor::random(
            &mut r,
            alpha(0.99),
            shape,
            Transform::identity(4),
            OutputMode::Deterministic,
        )
        .unwrap();
        let msg = Message::phase(0, 30.0);
        for _ in 0..2_000 {
            p.process_event(&msg, None).unwrap();
        }
        let zeros = (0..2_000)
            .filter(|_| p.process_event(&msg, None).unwrap().message.event_type == 0)
            .count();
        assert!(zeros as f64 / 2_000.0 > 0.98, "{zeros}");
    }

    #[test]
    fn processors_are_deterministic() {
        let run = || {
            let mut r = rng(5);
            let shape = Shape::new(2, 2).unwrap();
            let mut p = Processor::random(
                &mut r,
                alpha(0.99),
                shape,
                Transform::beam_splitter(),
                OutputMode::Deterministic,
            )
            .unwrap();
            (0..500)
                .map(|i| {
                    p.process_event(&Message::phase(i % 2, i as f64), None)
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mzi_structure() {
        let net = build_mzi(
            alpha(0.99),
            0.0,
            0.0,
            OutputMode::Deterministic,
            &mut rng(6),
            0,
        )
        .unwrap();
        assert_eq!(net.nodes().len(), 7);
        assert_eq!(net.count_kind("processor"), 2);
        assert_eq!(net.count_kind("passive"), 2);
        assert_eq!(net.counters().len(), 4);
        let bs1 = net.node_id("bs1").unwrap();
        assert_eq!(
            net.route_of(Port {
                node: bs1,
                channel: 0
            }),
            Some(Port {
                node: net.node_id("r0").unwrap(),
                channel: 0
            })
        );
    }

    #[test]
    fn mzi_balanced_arms_send_everything_to_n3() {
        let mut net = build_mzi(
            alpha(0.99),
            0.0,
            0.0,
            OutputMode::Deterministic,
            &mut rng(7),
            0,
        )
        .unwrap();
        let src = net.node_id("in").unwrap();
        for _ in 0..10_000 {
            net.route(Message::phase(0, 25.0), src).unwrap();
        }
        let n2 = net.counts("n2").unwrap()[0] as f64;
        let n3 = net.counts("n3").unwrap()[0] as f64;
        assert_abs_diff_eq!(n2 / (n2 + n3), 0.0, epsilon = 0.02);
        let n0 = net.counts("n0").unwrap()[0] as f64;
        let n1 = net.counts("n1").unwrap()[0] as f64;
        assert_eq!(n0 + n1, 10_000.0);
        assert_eq!(n2 + n3, 10_000.0);
        assert_eq!(net.routed(), 10_000);
    }

    #[test]
    fn passive_node_rotates_payload() {
        let mut b = NetworkBuilder::new();
        b.source("in", 1, 2)
            .passive("r", Transform::plane_rotation(30.0), 1)
            .wire(("in", 0), ("r", 0))
            .sink("out", &[("r", 0)]);
        let mut net = b.build(0).unwrap();
        let d = net
            .route(Message::phase(0, 15.0), net.node_id("in").unwrap())
            .unwrap();
        let expected = Message::phase(0, 45.0).payload;
        assert_abs_diff_eq!(d.message.payload[0], expected[0], epsilon = 1e-15);
        assert_abs_diff_eq!(d.message.payload[1], expected[1], epsilon = 1e-15);
        assert_eq!(d.sink, net.node_id("out").unwrap());
    }

    #[test]
    fn cnot_circuit_structure() {
        let net =
            build_cnot_circuit(alpha(0.99), OutputMode::Deterministic, &mut rng(8), 0).unwrap();
        assert_eq!(net.count_kind("processor"), 5);
        assert_eq!(net.processors().count() * 2, 10);
        for (_, p) in net.processors() {
            assert_eq!(p.transform().dim(), 8);
            assert!(p.transform().orthogonality_defect() < 1e-12);
        }
    }

    #[test]
    fn cnot_circuit_learns_basis_input() {
        let mut net =
            build_cnot_circuit(alpha(0.99), OutputMode::Deterministic, &mut rng(9), 0).unwrap();
        let src = net.node_id("in").unwrap();
        // |q1=0, q2=1> -> |11>
        for _ in 0..200 {
            net.route(Message::phase(2, 0.0), src).unwrap();
        }
        net.reset_counters();
        for _ in 0..200 {
            net.route(Message::phase(2, 0.0), src).unwrap();
        }
        let counts = net.counts("out").unwrap();
        assert!(counts[3] as f64 / 200.0 > 0.95, "{counts:?}");
    }

    fn tiny() -> NetworkBuilder {
        let mut r = rng(10);
        let shape = Shape::new(2, 2).unwrap();
        let mut b = NetworkBuilder::new();
        b.source("in", 2, 2).processor(
            "p",
            Processor::random(
                &mut r,
                alpha(0.9),
                shape,
                Transform::beam_splitter(),
                OutputMode::Deterministic,
            )
            .unwrap(),
        );
        b
    }

    #[test]
    fn builder_diagnostics() {
        assert_eq!(
            NetworkBuilder::new().build(0).unwrap_err(),
            NetworkError::NoSource
        );

        let mut b = tiny();
        b.wire(("in", 0), ("p", 0)).wire(("in", 1), ("p", 1));
        assert_eq!(
            b.clone().build(0).unwrap_err(),
            NetworkError::Unwired {
                node: "p".into(),
                channel: 0
            }
        );

        let mut c = b.clone();
        c.wire(("p", 0), ("p", 0)).sink("s", &[("p", 1)]);
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::Cycle { wire: 2, .. }
        ));

        let mut c = b.clone();
        c.wire(("p", 2), ("nowhere", 0));
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::UnknownNode { wire: 2, .. }
        ));

        let mut c = b.clone();
        c.wire(("p", 2), ("in", 0));
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::WireIntoSource { .. }
        ));

        let mut c = b.clone();
        c.wire(("p", 2), ("p", 0));
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::ChannelOutOfRange { channel: 2, .. }
        ));

        let mut c = b.clone();
        c.sink("s", &[("p", 0), ("p", 0), ("p", 1)]);
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::DuplicateRoute { wire: 3, .. }
        ));

        let mut c = b.clone();
        c.passive("r", Transform::identity(3), 1)
            .wire(("p", 0), ("r", 0));
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::MessageLenMismatch { from: 2, to: 3, .. }
        ));

        let mut c = b.clone();
        c.source("p", 1, 2);
        assert_eq!(
            c.build(0).unwrap_err(),
            NetworkError::DuplicateName("p".into())
        );

        let mut c = b;
        c.sink("s", &[("p", 0), ("p", 1)]).tap("t", ("p", 5));
        assert!(matches!(
            c.build(0).unwrap_err(),
            NetworkError::TapChannel { .. }
        ));
    }

    #[test]
    fn processors_with_different_event_counts_cannot_connect() {
        let mut r = rng(11);
        let mut b = tiny();
        let wide = Processor::random(
            &mut r,
            alpha(0.9),
            Shape::new(4, 2).unwrap(),
            Transform::cnot(),
            OutputMode::Deterministic,
        )
        .unwrap();
        b.processor("w", wide)
            .wire(("in", 0), ("p", 0))
            .wire(("in", 1), ("p", 1))
            .wire(("p", 0), ("w", 0));
        assert!(matches!(
            b.build(0).unwrap_err(),
            NetworkError::EventTypeCount { from: 2, to: 4, .. }
        ));
    }

    #[test]
    fn route_checks_entry() {
        let mut net =
            build_beam_splitter(alpha(0.9), OutputMode::Deterministic, &mut rng(12), 0).unwrap();
        let bs = net.node_id("bs").unwrap();
        assert!(matches!(
            net.route(Message::phase(0, 0.0), bs),
            Err(NetworkError::NotASource(_))
        ));
        let src = net.node_id("in").unwrap();
        assert!(matches!(
            net.route(Message::phase(2, 0.0), src),
            Err(NetworkError::SourceChannel { .. })
        ));
    }

    #[test]
    fn passive_transform_swap() {
        let mut net = build_mzi(
            alpha(0.9),
            0.0,
            0.0,
            OutputMode::Deterministic,
            &mut rng(13),
            0,
        )
        .unwrap();
        assert!(net
            .set_passive_transform("r0", Transform::plane_rotation(10.0))
            .is_ok());
        assert!(matches!(
            net.set_passive_transform("bs1", Transform::plane_rotation(10.0)),
            Err(NetworkError::NotPassive(_))
        ));
        assert!(net
            .set_passive_transform("r0", Transform::identity(4))
            .is_err());
    }
}
