//! Simulation of networks of parametrically pumped Kerr cavities (the Kerr
//! Ising model): exact spectra of the closed network, entanglement of its
//! ground and steady states, conditional homodyne trajectories, and the
//! semiclassical thermal-noise baseline they are compared against.
//!
//! Units: hbar = k_B = 1. Quadratures use `X = (a + a^dagger)/sqrt(2)`.

// Negated comparisons are how argument checks reject NaN; index loops
// follow the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classical;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod noise;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
