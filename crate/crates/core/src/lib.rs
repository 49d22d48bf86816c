//! Long-range random-field Ising models.
//!
//! The crate provides
//!
//! * [`model`]: instances, the Hamiltonian and the JSON instance format;
//! * [`exact`]: exhaustive ground states, low-energy sets and spectra;
//! * [`gadget`]: the eight-spin logical spin and its effective coupling law;
//! * [`approx`]: pruned approximation graphs, tree decompositions and the
//!   decomposition dynamic program behind the 1D approximation scheme;
//! * [`reduction`]: the pipeline compiling maximum-independent-set instances
//!   into square-grid antiferromagnetic long-range models, and decoding back;
//! * [`verify`]: brute-force checks of every quantitative map bound.

// `!(x > y)` is deliberate: NaN must fail every guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod exact;
pub mod gadget;
pub mod instances;
pub mod model;
pub mod reduction;
pub mod sum;
pub mod verify;

pub use exact::{GroundStates, LowEnergySet, SolveError, SolverOptions};
pub use model::{Coupling, Edge, EnergyBreakdown, IsingModel, ModelError, Spin, SpinState};
