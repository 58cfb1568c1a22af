//! Ancilla-free circuit synthesis for qudits.
//!
//! Circuits are lists of controlled one-qudit gates (see [`circuit`]). The
//! synthesizers produce them from a target state, an isometry or a unitary,
//! and [`lowering`] rewrites them into two-qudit gates or the
//! `{local, CINC, CINC^-1}` library.

pub mod circuit;
pub mod club;
pub mod counts;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lowering;
pub mod random;
pub mod state_synth;
pub mod unitary_synth;
pub mod verify;

pub use error::{Result, SynthError};
