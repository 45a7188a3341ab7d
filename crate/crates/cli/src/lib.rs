//! DSL, file formats, benchmark generators and CLI for the compositional
//! MDP solver in `compmdp-core`.

pub use compmdp_core as core;

pub mod dsl;
pub mod export;
pub mod families;
pub mod ops;
