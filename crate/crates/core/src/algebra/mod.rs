//! Small dense complex linear algebra: matrices, qubit states, Bloch vectors,
//! Pauli operators and a Hermitian eigensolver.

mod eigen;
mod matrix;
mod state;

pub use eigen::{hermitian_eigen, HermitianEigen, MAX_DIM};
pub use matrix::ComplexMatrix;
pub use state::{
    bloch_from_state, pauli, paulis, random_state, state_from_bloch, BlochVector, StateVector,
    NORM_TOLERANCE,
};
pub(crate) use state::bloch_unchecked;
