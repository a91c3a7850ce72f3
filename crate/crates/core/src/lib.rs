//! The rational Calogero-Moser system and its hierarchy, in continuous,
//! discrete and semi-discrete time.
//!
//! * [`hierarchy`]: phase states, the Hamiltonians `H2` and `H3`, Lax
//!   matrices and their invariants.
//! * [`flows`]: commuting flows along paths in `(t2, t3)`, Poisson brackets,
//!   Lagrangians and the Noether charge.
//! * [`discrete`]: the lattice equations of motion, corner equations,
//!   plaquettes and their closure.
//! * [`semidiscrete`]: chains of lattice shifts moving in a continuous time.
//! * [`suite`]: every identity above as a residual with a tolerance.
//!
//! ```
//! use calogero::flows::{evolve_path, PathSpec};
//! use calogero::hierarchy::{hamiltonian, FlowIndex, PhaseState};
//!
//! let start = PhaseState::new(vec![-2.0, 2.0], vec![0.0, 0.0]).unwrap();
//! let traj = evolve_path(&start, &PathSpec::new([1.0, 0.0], 1.0).unwrap(), 1e-3).unwrap();
//! let e0 = hamiltonian(FlowIndex::T2, &start).unwrap();
//! let e1 = hamiltonian(FlowIndex::T2, &traj.last().state).unwrap();
//! assert!((e0 - e1).abs() < 1e-10);
//! ```
//!
//! A guide with longer worked examples lives in `book/`.

pub mod error;
pub mod hierarchy;
pub mod numerics;
pub mod flows;
pub mod discrete;
pub mod semidiscrete;
pub mod sampling;
pub mod suite;

pub use error::{Error, Result};
