//! Co-evolution of candidate programs and assertion tests.
//!
//! A population of programs and a population of assertions are evolved
//! against each other: programs are scored by consensus over the tests they
//! pass, tests by how much high-fitness programs agree with them and how
//! well they split the population. A text-completion provider supplies the
//! generative operators; a process sandbox supplies the pass/fail matrix.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod operators;
pub mod provider;
pub mod sandbox;
pub mod text;
pub mod types;

pub use error::{Error, Result};
pub use matrix::EvalMatrix;
pub use types::{CandidateProgram, Problem, ProgramOrigin, PromptKind, TestCase, TestOrigin};
