//! Deterministic learning machines.
//!
//! A machine holds a unit vector of `N_e * N_m` reals, split into `N_e`
//! blocks of `N_m` components, one block per event type. On every input it
//! evaluates `2 * N_e * N_m` candidate states, each obtained by scaling all
//! components by `alpha` and replacing a single component `x_j` by
//! `±sqrt(1 - alpha^2 + alpha^2 x_j^2)`, and moves to the candidate with the
//! largest overlap with the target vector. Every candidate lies on the unit
//! sphere, so the norm is conserved by construction.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tolerance used when validating message payload norms.
pub const PAYLOAD_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DlmError {
    #[error("learning parameter must satisfy 0 < alpha < 1, got {0}")]
    InvalidAlpha(f64),
    #[error("a machine needs at least 2 event types and a message length of at least 1 (got {num_event_types} x {message_len})")]
    InvalidShape {
        num_event_types: usize,
        message_len: usize,
    },
    #[error("expected a vector of length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("vector must have unit norm, got {0}")]
    NotUnit(f64),
    #[error("event type {event_type} is out of range for {num_event_types} event types")]
    EventTypeOutOfRange {
        event_type: usize,
        num_event_types: usize,
    },
    #[error("vector contains non-finite components")]
    NonFinite,
}

/// The learning parameter `alpha`, restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, DlmError> {
        if value > 0.0 && value < 1.0 {
            Ok(Alpha(value))
        } else {
            Err(DlmError::InvalidAlpha(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Block layout of an internal vector: `num_event_types` blocks of
/// `message_len` components each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    num_event_types: usize,
    message_len: usize,
}

impl Shape {
    pub fn new(num_event_types: usize, message_len: usize) -> Result<Self, DlmError> {
        if num_event_types < 2 || message_len < 1 {
            return Err(DlmError::InvalidShape {
                num_event_types,
                message_len,
            });
        }
        Ok(Shape {
            num_event_types,
            message_len,
        })
    }

    pub fn num_event_types(self) -> usize {
        self.num_event_types
    }

    pub fn message_len(self) -> usize {
        self.message_len
    }

    /// Total dimension `N_e * N_m` of the internal vector.
    pub fn dim(self) -> usize {
        self.num_event_types * self.message_len
    }

    /// Component range belonging to event type `k`.
    pub fn block(self, k: usize) -> std::ops::Range<usize> {
        k * self.message_len..(k + 1) * self.message_len
    }

    /// Event type whose block contains component `index`.
    pub fn block_of(self, index: usize) -> usize {
        index / self.message_len
    }
}

/// Sign in front of the square root of a candidate rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// One of the `2D` update rules of a machine of dimension `D`.
///
/// The `Ord` ordering (index first, `Plus` before `Minus`) is the
/// tie-breaking order used by [`DlmState::select_rule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateRule {
    pub index: usize,
    pub sign: Sign,
}

impl CandidateRule {
    pub fn new(index: usize, sign: Sign) -> Self {
        CandidateRule { index, sign }
    }

    /// All `2 * dim` rules in tie-breaking order.
    pub fn all(dim: usize) -> impl Iterator<Item = CandidateRule> {
        (0..dim).flat_map(|index| {
            [Sign::Plus, Sign::Minus]
                .into_iter()
                .map(move |sign| CandidateRule { index, sign })
        })
    }
}

/// A typed message travelling on a wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub event_type: usize,
    pub payload: Vec<f64>,
}

impl Message {
    /// Builds a message, checking that the payload is a unit vector.
    pub fn new(event_type: usize, payload: Vec<f64>) -> Result<Self, DlmError> {
        if payload.iter().any(|v| !v.is_finite()) {
            return Err(DlmError::NonFinite);
        }
        let norm = norm(&payload);
        if (norm - 1.0).abs() > PAYLOAD_NORM_TOLERANCE {
            return Err(DlmError::NotUnit(norm));
        }
        Ok(Message {
            event_type,
            payload,
        })
    }

    /// Two-component message `(cos psi, sin psi)` with `psi` in degrees.
    pub fn phase(event_type: usize, psi_degrees: f64) -> Self {
        let (s, c) = psi_degrees.to_radians().sin_cos();
        Message {
            event_type,
            payload: vec![c, s],
        }
    }
}

/// Output message of a machine together with a degeneracy flag.
///
/// `degenerate` is set when the selected block of the internal vector had
/// zero norm and the first basis vector of the block was sent instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub message: Message,
    pub degenerate: bool,
}

/// Internal state of a deterministic learning machine.
#[derive(Debug, Clone, PartialEq)]
pub struct DlmState {
    values: Vec<f64>,
    alpha: Alpha,
    shape: Shape,
}

impl DlmState {
    /// Wraps an explicit unit vector. Fails if the length does not match the
    /// shape or the norm deviates from one by more than `1e-12`.
    pub fn new(values: Vec<f64>, alpha: Alpha, shape: Shape) -> Result<Self, DlmError> {
        if values.len() != shape.dim() {
            return Err(DlmError::LengthMismatch {
                expected: shape.dim(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DlmError::NonFinite);
        }
        let n = norm(&values);
        if (n - 1.0).abs() > 1e-12 {
            return Err(DlmError::NotUnit(n));
        }
        Ok(DlmState {
            values,
            alpha,
            shape,
        })
    }

    /// Draws the internal vector uniformly from the unit sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, alpha: Alpha, shape: Shape) -> Self {
        loop {
            let mut values: Vec<f64> = (0..shape.dim())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = norm(&values);
            if n > 1e-6 {
                values.iter_mut().for_each(|v| *v /= n);
                return DlmState {
                    values,
                    alpha,
                    shape,
                };
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Squared norm of the block of event type `k`.
    pub fn block_mass(&self, k: usize) -> f64 {
        self.values[self.shape.block(k)].iter().map(|v| v * v).sum()
    }

    fn replacement(&self, index: usize) -> f64 {
        let a = self.alpha.get();
        let x = self.values[index];
        (1.0 - a * a + a * a * x * x).sqrt()
    }

    /// The candidate internal vector produced by `rule`.
    pub fn candidate_state(&self, rule: CandidateRule) -> Vec<f64> {
        let a = self.alpha.get();
        let mut w: Vec<f64> = self.values.iter().map(|x| a * x).collect();
        w[rule.index] = rule.sign.value() * self.replacement(rule.index);
        w
    }

    /// Target vector for an input message: the internal vector with the
    /// block of the message's event type overwritten by its payload.
    pub fn build_target(&self, msg: &Message) -> Result<Vec<f64>, DlmError> {
        let k = msg.event_type;
        if k >= self.shape.num_event_types() {
            return Err(DlmError::EventTypeOutOfRange {
                event_type: k,
                num_event_types: self.shape.num_event_types(),
            });
        }
        if msg.payload.len() != self.shape.message_len() {
            return Err(DlmError::LengthMismatch {
                expected: self.shape.message_len(),
                actual: msg.payload.len(),
            });
        }
        let mut target = self.values.clone();
        target[self.shape.block(k)].copy_from_slice(&msg.payload);
        Ok(target)
    }

    /// Cost `C = -w . target` of a single candidate.
    pub fn cost(&self, rule: CandidateRule, target: &[f64]) -> f64 {
        let a = self.alpha.get();
        let mut overlap = 0.0;
        for (i, (x, t)) in self.values.iter().zip(target).enumerate() {
            let w = if i == rule.index {
                rule.sign.value() * self.replacement(i)
            } else {
                a * x
            };
            overlap += w * t;
        }
        -overlap
    }

    /// Costs of all `2D` candidates, in tie-breaking order.
    pub fn costs(&self, target: &[f64]) -> Vec<(CandidateRule, f64)> {
        CandidateRule::all(self.dim())
            .map(|rule| (rule, self.cost(rule, target)))
            .collect()
    }

    /// The rule with minimal cost. Ties go to the lowest index, `Plus`
    /// before `Minus`.
    ///
    /// # Panics
    ///
    /// Panics if `target` does not have the machine's dimension.
    pub fn select_rule(&self, target: &[f64]) -> CandidateRule {
        assert_eq!(target.len(), self.dim(), "target dimension mismatch");
        let mut best = CandidateRule::new(0, Sign::Plus);
        let mut best_cost = f64::INFINITY;
        for rule in CandidateRule::all(self.dim()) {
            let c = self.cost(rule, target);
            if c < best_cost {
                best = rule;
                best_cost = c;
            }
        }
        best
    }

    /// Selects the best rule for `target` and moves to its candidate state.
    pub fn learn(&mut self, target: &[f64]) -> CandidateRule {
        let rule = self.select_rule(target);
        let a = self.alpha.get();
        let replaced = rule.sign.value() * self.replacement(rule.index);
        self.values.iter_mut().for_each(|v| *v *= a);
        self.values[rule.index] = replaced;
        rule
    }

    fn block_message(&self, k: usize) -> Emission {
        let block = &self.values[self.shape.block(k)];
        let n = norm(block);
        if n > 0.0 {
            Emission {
                message: Message {
                    event_type: k,
                    payload: block.iter().map(|v| v / n).collect(),
                },
                degenerate: false,
            }
        } else {
            log::warn!(
                "event type {k} selected with a zero-norm block; emitting first basis vector"
            );
            let mut payload = vec![0.0; self.shape.message_len()];
            payload[0] = 1.0;
            Emission {
                message: Message {
                    event_type: k,
                    payload,
                },
                degenerate: true,
            }
        }
    }

    /// Output of a machine after it applied `rule`: the event type is the
    /// block the rule touched, the payload that block, normalized.
    pub fn deterministic_output(&self, rule: CandidateRule) -> Emission {
        self.block_message(self.shape.block_of(rule.index))
    }

    /// Output chosen by comparing the block masses against a uniform draw in
    /// `[0, 1)`: event type `k` covers `[sum_{i<k} p_i, sum_{i<=k} p_i)`.
    pub fn stochastic_output(&self, draw: f64) -> Emission {
        let last = self.shape.num_event_types() - 1;
        let mut upper = 0.0;
        let mut chosen = last;
        for k in 0..last {
            upper += self.block_mass(k);
            if draw < upper {
                chosen = k;
                break;
            }
        }
        self.block_message(chosen)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
