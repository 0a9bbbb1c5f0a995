//! Moment (Lasserre–Parrilo) relaxations of free semialgebraic sets.
//!
//! The crate decides whether a tuple of symmetric matrices lies in the level-`d`
//! moment relaxation of `D_p = {X : p(X) ⪰ 0}`, extracts separating functionals
//! and representing tuples, and ships the bent TV screen computations as
//! runnable scenarios.

pub mod error;
pub mod gns;
pub mod io;
pub mod matops;
pub mod moments;
pub mod ncpoly;
pub mod pencils;
pub mod relax;
pub mod scenarios;
pub mod sdp;

pub use error::{Error, Result};
pub use matops::{BlockMatrix, Mat};
pub use ncpoly::{enumerate_words, eval_poly, eval_word, parse_poly, MatrixPoly, MatrixTuple, Word};
