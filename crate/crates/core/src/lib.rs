//! Compositional solver for string diagrams of open Markov decision processes.
//!
//! An open MDP is an MDP with entrance and exit ports. Diagrams of open MDPs
//! are built from sequential composition, sum, and trace (feedback loops).
//! Instead of flattening a diagram into one monolithic MDP, the solver
//! computes a Pareto front of reachability/reward pairs per component and
//! composes fronts, which keeps the cost proportional to the number of
//! distinct components rather than the number of global positions.
//!
//! The crate is `no_std` (with `alloc`); parsing, file formats and the CLI
//! live in the companion `compmdp` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod expr;
pub mod flatten;
pub mod model;
pub mod randgen;
pub mod selftest;
pub mod semantics;
pub mod termination;

pub use model::{Arity, OpenMdp, RoMc, RoMdp, Scheduler, Target, ValidationError, ValidationReport};

pub mod linalg;
pub mod mc;
