//! Spectral toolkit for the two-dimensional PT-symmetric oscillators
//! `H = p_x² + p_y² + x² + y² + ig·W` with `W = x y²` (complex cubic) or
//! `W = x y² − x³/3` (complex Hénon-Heiles).

pub mod basis;
pub mod field;
pub mod eigen;
pub mod hamiltonian;
pub mod hp;
pub mod pade;
pub mod perturb;
pub mod sweep;

pub use basis::{BasisState, Model, Parity, TruncationScheme};
pub use field::FieldElement;
pub use hp::{Hp, Scalar};
