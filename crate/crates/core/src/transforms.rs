//! Orthogonal transformation stages.
//!
//! Complex amplitudes are stored as interleaved real pairs,
//! `a_k = x_{2k} + i x_{2k+1}`, so an `n x n` unitary acts on a real vector
//! of length `2n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Entrywise tolerance for `T T^t = I` on constructed transforms.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;
/// Entrywise tolerance for user-supplied real matrices.
pub const INPUT_ORTHOGONALITY_TOLERANCE: f64 = 1e-9;
/// Entrywise tolerance for `U U^* = I` on complex inputs.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),
    #[error("single-qubit gate must be 2x2, got {0}x{0}")]
    NotSingleQubit(usize),
    #[error("expected {expected} entries, got {actual}")]
    EntryCount { expected: usize, actual: usize },
}

/// One of the two qubits of the two-qubit register. `First` is the least
/// significant bit of the basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    First,
    Second,
}

impl Qubit {
    pub fn bit(self) -> usize {
        match self {
            Qubit::First => 0,
            Qubit::Second => 1,
        }
    }
}

/// A real orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    matrix: DMatrix<f64>,
}

impl Transform {
    pub fn identity(dim: usize) -> Self {
        Transform {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps an arbitrary square matrix after checking orthogonality.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, TransformError> {
        if !matrix.is_square() {
            return Err(TransformError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let dev = orthogonality_defect(&matrix);
        if dev > INPUT_ORTHOGONALITY_TOLERANCE {
            return Err(TransformError::NotOrthogonal(dev));
        }
        Ok(Transform { matrix })
    }

    /// Builds a `dim x dim` transform from row-major entries.
    pub fn from_rows(dim: usize, entries: &[f64]) -> Result<Self, TransformError> {
        if entries.len() != dim * dim {
            return Err(TransformError::EntryCount {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Plane rotation by `phi` degrees.
    pub fn plane_rotation(phi_degrees: f64) -> Self {
        let (s, c) = phi_degrees.to_radians().sin_cos();
        Transform {
            matrix: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    /// Beam splitter stage: a 45 degree rotation of the pair `(x0, x3)` and
    /// another of the pair `(x2, x1)`.
    pub fn beam_splitter() -> Self {
        let mut m = DMatrix::identity(4, 4);
        rotate_pair(&mut m, 0, 3, 45.0);
        rotate_pair(&mut m, 2, 1, 45.0);
        Transform { matrix: m }
    }

    /// Hadamard stage on a single-qubit (two event type) message.
    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let entries = [
            h, 0.0, h, 0.0,
            0.0, h, 0.0, h,
            h, 0.0, -h, 0.0,
            0.0, h, 0.0, -h,
        ];
        Transform {
            matrix: DMatrix::from_row_slice(4, 4, &entries),
        }
    }

    /// CNOT stage with the first qubit as control: swaps components
    /// `(x2, x3)` with `(x6, x7)`.
    pub fn cnot() -> Self {
        let mut m = DMatrix::identity(8, 8);
        m.swap_rows(2, 6);
        m.swap_rows(3, 7);
        Transform { matrix: m }
    }

    /// Real embedding of a complex unitary: every entry `a + bi` becomes
    /// the block `[[a, -b], [b, a]]`.
    pub fn embed_unitary(u: &DMatrix<Complex64>) -> Result<Self, TransformError> {
        if !u.is_square() {
            return Err(TransformError::NotSquare {
                rows: u.nrows(),
                cols: u.ncols(),
            });
        }
        let dev = unitarity_defect(u);
        if dev > UNITARITY_TOLERANCE {
            return Err(TransformError::NotUnitary(dev));
        }
        Ok(Transform { matrix: embed(u) })
    }

    /// Lifts a single-qubit gate to the two-qubit register and embeds it.
    pub fn lift_single_qubit(
        u: &DMatrix<Complex64>,
        target: Qubit,
    ) -> Result<Self, TransformError> {
        if u.nrows() != 2 || u.ncols() != 2 {
            return Err(TransformError::NotSingleQubit(u.nrows().max(u.ncols())));
        }
        let dev = unitarity_defect(u);
        if dev > UNITARITY_TOLERANCE {
            return Err(TransformError::NotUnitary(dev));
        }
        Self::embed_unitary(&lift(u, target))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Applies the transform to `x`.
    ///
    /// # Panics
    ///
    /// Panics if `x.len() != self.dim()`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "transform dimension mismatch");
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Transform) -> Transform {
        Transform {
            matrix: &self.matrix * &first.matrix,
        }
    }

    /// Largest entrywise deviation of `T T^t` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.matrix)
    }
}

fn rotate_pair(m: &mut DMatrix<f64>, i: usize, j: usize, degrees: f64) {
    let (s, c) = degrees.to_radians().sin_cos();
    m[(i, i)] = c;
    m[(i, j)] = -s;
    m[(j, i)] = s;
    m[(j, j)] = c;
}

fn embed(u: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = u[(r, c)];
            m[(2 * r, 2 * c)] = z.re;
            m[(2 * r, 2 * c + 1)] = -z.im;
            m[(2 * r + 1, 2 * c)] = z.im;
            m[(2 * r + 1, 2 * c + 1)] = z.re;
        }
    }
    m
}

/// `u` acting on `target` of a two-qubit register, identity on the other.
pub(crate) fn lift(u: &DMatrix<Complex64>, target: Qubit) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    match target {
        // Basis index = q1 + 2 q2; the Kronecker factor on the right acts on
        // the least significant bit.
        Qubit::First => id.kronecker(u),
        Qubit::Second => u.kronecker(&id),
    }
}

fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let p = m * m.transpose();
    let id = DMatrix::<f64>::identity(m.nrows(), m.nrows());
    (p - id).amax()
}

pub(crate) fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let p = u * u.adjoint();
    let id = DMatrix::<Complex64>::identity(u.nrows(), u.nrows());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Interleaves complex amplitudes into a real vector.
pub fn to_real(amplitudes: &[Complex64]) -> Vec<f64> {
    amplitudes.iter().flat_map(|a| [a.re, a.im]).collect()
}

/// Inverse of [`to_real`].
///
/// # Panics
///
/// Panics on odd-length input.
pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    assert!(
        x.len().is_multiple_of(2),
        "interleaved vector must have even length"
    );
    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}
