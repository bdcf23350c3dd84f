//! RoPE fingerprints of DNA strings.
//!
//! A DNA string of length `N` is mapped to a normalized complex vector whose
//! entries are sums of unit phasors, one per s-mer occurrence, rotated by the
//! occurrence position. The squared overlap (fidelity) between two such
//! vectors tracks the Levenshtein distance between the strings, which makes
//! the vectors usable as classical sketches and as quantum states.
//!
//! The crate is organized by capability:
//!
//! - [`seqio`] 2-bit packed sequences, FASTA/FASTQ-lite, random DNA and mutation.
//! - [`rope`] the encodings themselves and fidelities between them.
//! - [`lev`] exact and banded Levenshtein distance (the ground truth).
//! - [`calib`] fidelity to mutation-rate curves, RMSE and fragment thresholds.
//! - [`rotormap`] reference index, batched scan and sliding refinement.
//! - [`angular`] state-preparation circuits built from encodings, plus a dense simulator.
//! - [`auth`] the one-way DNA authentication protocol and its shot budget.
//! - [`cli`] the `rotormap` binary's subcommands.
//!
//! Every capability has a runnable program under `examples/`.

pub mod angular;
pub mod auth;
pub mod calib;
pub mod cli;
pub mod error;
pub mod lev;
pub mod rng;
pub mod rope;
pub mod rotormap;
pub mod seqio;
pub mod stats;

pub use error::{Error, Result};
pub use rope::{FactorMode, RopeEncoding, RopeParams};
pub use seqio::{DnaSequence, MutationSpec};
