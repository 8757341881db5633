//! Quantum-theory reference values.
//!
//! Everything here is the conventional state-vector calculation the event
//! networks are checked against. Two-qubit basis states are indexed by
//! `q1 + 2 q2`, with the first qubit as the least significant bit. Angles are
//! in degrees.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::transforms::{lift, unitarity_defect, Qubit, UNITARITY_TOLERANCE};

pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state is not normalized (sum of |a|^2 = {0})")]
    Unnormalized(f64),
    #[error("gate is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("gate of dimension {gate} cannot act on a state of dimension {state}")]
    DimensionMismatch { gate: usize, state: usize },
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(1/sqrt2) [[1, i], [i, 1]]`.
pub fn beam_splitter_unitary() -> DMatrix<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)])
}

/// `(1/sqrt2) [[1, 1], [1, -1]]`.
pub fn hadamard() -> DMatrix<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

/// `diag(e^{i phi0}, e^{i phi1})`.
pub fn phase_shifts(phi0: f64, phi1: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![
        Complex64::from_polar(1.0, phi0.to_radians()),
        Complex64::from_polar(1.0, phi1.to_radians()),
    ]))
}

/// Interferometer unitary: beam splitter, phase shifts, beam splitter.
pub fn mzi_unitary(phi0: f64, phi1: f64) -> DMatrix<Complex64> {
    let bs = beam_splitter_unitary();
    &bs * phase_shifts(phi0, phi1) * &bs
}

/// Two-qubit CNOT: flips the other qubit when `control` is set.
pub fn cnot(control: Qubit) -> DMatrix<Complex64> {
    let target_bit = 1 - control.bit();
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..4usize {
        let j = if (i >> control.bit()) & 1 == 1 {
            i ^ (1 << target_bit)
        } else {
            i
        };
        m[(j, i)] = c(1.0, 0.0);
    }
    m
}

/// Hadamards on both qubits, CNOT controlled by the first qubit, Hadamards
/// on both qubits again.
pub fn reversed_cnot_circuit() -> DMatrix<Complex64> {
    let hh = lift(&hadamard(), Qubit::First) * lift(&hadamard(), Qubit::Second);
    &hh * cnot(Qubit::First) * &hh
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, OracleError> {
        let total: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !total.is_finite() || (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(OracleError::Unnormalized(total));
        }
        Ok(QuantumState { amplitudes })
    }

    /// Computational basis state `index` of an `n`-dimensional space.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        QuantumState { amplitudes }
    }

    /// Two-qubit basis state `|q1 q2>`, index `q1 + 2 q2`.
    pub fn two_qubit(q1: bool, q2: bool) -> Self {
        Self::basis(4, q1 as usize + 2 * q2 as usize)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// A gate on the two-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single {
        unitary: DMatrix<Complex64>,
        target: Qubit,
    },
    Cnot {
        control: Qubit,
    },
    Full(DMatrix<Complex64>),
}

impl Gate {
    pub fn matrix(&self) -> DMatrix<Complex64> {
        match self {
            Gate::Single { unitary, target } => lift(unitary, *target),
            Gate::Cnot { control } => cnot(*control),
            Gate::Full(m) => m.clone(),
        }
    }
}

pub fn apply_unitary(
    state: &QuantumState,
    u: &DMatrix<Complex64>,
) -> Result<QuantumState, OracleError> {
    let n = state.amplitudes.len();
    if u.nrows() != n || u.ncols() != n {
        return Err(OracleError::DimensionMismatch {
            gate: u.nrows(),
            state: n,
        });
    }
    let dev = unitarity_defect(u);
    if dev > UNITARITY_TOLERANCE {
        return Err(OracleError::NotUnitary(dev));
    }
    let out = u * DVector::from_column_slice(&state.amplitudes);
    Ok(QuantumState {
        amplitudes: out.iter().copied().collect(),
    })
}

pub fn apply_gate(state: &QuantumState, gate: &Gate) -> Result<QuantumState, OracleError> {
    if let Gate::Single { unitary, .. } = gate {
        if unitary.nrows() != 2 || unitary.ncols() != 2 {
            return Err(OracleError::DimensionMismatch {
                gate: unitary.nrows(),
                state: 2,
            });
        }
    }
    apply_unitary(state, &gate.matrix())
}

pub fn probabilities(state: &QuantumState) -> Vec<f64> {
    state.probabilities()
}

/// Beam splitter output amplitudes `(b0, b1)`.
pub fn bs_output(a0: Complex64, a1: Complex64) -> Result<(Complex64, Complex64), OracleError> {
    let out = apply_unitary(&QuantumState::new(vec![a0, a1])?, &beam_splitter_unitary())?;
    Ok((out.amplitudes[0], out.amplitudes[1]))
}

/// Closed form of `|b0|^2` for inputs `a0 = sqrt(p0) e^{i psi0}`,
/// `a1 = sqrt(1 - p0) e^{i psi1}`:
/// `(1 + 2 sqrt(p0 (1 - p0)) sin(psi0 - psi1)) / 2`.
pub fn bs_probability(p0: f64, psi0: f64, psi1: f64) -> f64 {
    (1.0 + 2.0 * (p0 * (1.0 - p0)).sqrt() * (psi0 - psi1).to_radians().sin()) / 2.0
}

/// Interferometer output amplitudes `(b0, b1)`.
pub fn mzi_output(
    a0: Complex64,
    a1: Complex64,
    phi0: f64,
    phi1: f64,
) -> Result<(Complex64, Complex64), OracleError> {
    let out = apply_unitary(&QuantumState::new(vec![a0, a1])?, &mzi_unitary(phi0, phi1))?;
    Ok((out.amplitudes[0], out.amplitudes[1]))
}

/// Closed form of `|b0|^2` for the interferometer with an empty second
/// input: `sin^2((phi0 - phi1) / 2)`.
pub fn mzi_probability(phi0: f64, phi1: f64) -> f64 {
    ((phi0 - phi1).to_radians() / 2.0).sin().powi(2)
}

/// Output distribution of the reversed-control CNOT circuit for a basis
/// input.
pub fn cnot_circuit_probabilities(q1: bool, q2: bool) -> Vec<f64> {
    let gates = [
        Gate::Single {
            unitary: hadamard(),
            target: Qubit::First,
        },
        Gate::Single {
            unitary: hadamard(),
            target: Qubit::Second,
        },
        Gate::Cnot {
            control: Qubit::First,
        },
        Gate::Single {
            unitary: hadamard(),
            target: Qubit::First,
        },
        Gate::Single {
            unitary: hadamard(),
            target: Qubit::Second,
        },
    ];
    let mut state = QuantumState::two_qubit(q1, q2);
    for g in &gates {
        state = apply_gate(&state, g).expect("circuit gates are unitary");
    }
    state.probabilities()
}
