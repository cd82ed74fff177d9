//! Regular commutator preimages in compact semisimple Lie algebras.
//!
//! Given `A, B` in a compact semisimple Lie algebra `g`, [`solver::solve_commutator`]
//! finds a regular element `X` and `Y_A, Y_B` with `[X, Y_A] = A` and
//! `[X, Y_B] = B`. It rotates a Cartan subalgebra with a sequence of
//! `so(3)` rotations until it is orthogonal to both targets, then inverts
//! `ad(X)` root plane by root plane.

pub mod algebra;
pub mod cartan;
pub mod error;
pub mod numerics;
pub mod rotate;
pub mod solver;

pub use algebra::{build_algebra, AlgebraSpec, Element, LieAlgebra};
pub use error::{LieError, Result};
