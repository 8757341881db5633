//! Event-by-event simulation of quantum interference with networks of
//! deterministic learning machines.
//!
//! * [`dlm`]: the learning machine itself.
//! * [`transforms`]: orthogonal transformation stages.
//! * [`network`]: processors and acyclic event-routing networks.
//! * [`oracle`]: conventional quantum-theory predictions.
//! * [`experiments`]: beam splitter, interferometer and CNOT-circuit runs.
//! * [`netlist`]: text description of networks.
//! * [`report`]: CSV output.

pub mod dlm;
pub mod experiments;
pub mod netlist;
pub mod network;
pub mod oracle;
pub mod report;
pub mod transforms;

pub use dlm::{Alpha, CandidateRule, DlmError, DlmState, Emission, Message, Shape, Sign};
pub use network::{Network, NetworkBuilder, NetworkError, OutputMode, Processor};
pub use transforms::{Qubit, Transform, TransformError};
