//! Orbit-finite data monoids and the guarded MSO logic they capture.
//!
//! * [`nominal`]: data values, renamings and data words.
//! * [`presentation`]: finite term presentations of orbit-finite monoids.
//! * [`analysis`]: memory, Green's relations and aperiodicity.
//! * [`morphism`]: recognizers, emptiness and syntactic quotients.
//! * [`logic`]: guarded MSO formulas, evaluation and rigidity checks.
//! * [`compile`]: rigidly guarded formulas to orbit-finite monoids.
//! * [`fma`]: finite memory automata and the bridge from monoids.
//! * [`msoclassic`]: classical MSO to automata and data satisfiability.

pub mod analysis;
pub mod compile;
pub mod error;
pub mod fixtures;
pub mod fma;
pub mod logic;
pub mod morphism;
pub mod msoclassic;
pub mod nominal;
pub mod presentation;

pub use error::{Error, Result};
