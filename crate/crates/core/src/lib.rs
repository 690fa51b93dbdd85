//! Core library of the shiftlab workbench.
//!
//! The crate is organized around a small set of objects from symbolic
//! dynamics over one-sided shift spaces:
//!
//! - [`dyadic`]: exact arithmetic on dyadic rationals `m / 2^e`, the number
//!   type every boundary-sensitive computation runs on;
//! - [`words`]: finite words, the weighted metric, quantization, and symbol
//!   streams;
//! - [`speclang`]: the small text format describing shift systems;
//! - [`subshifts`]: language oracles for the built-in system families and
//!   transfer graphs (finite-type approximations);
//! - [`prediction`]: extension counting, determinism detection, and
//!   predictor/forcing-word search;
//! - [`entropy`]: complexity tables, entropy estimation, exact entropy of a
//!   transfer graph, and separated-set machinery;
//! - [`partitions`]: entropy of finite partitions and the Rohlin metric;
//! - [`markers`]: marker families with prescribed self-shift behaviour;
//! - [`noninv`]: the staged construction of a non-invertible
//!   positive-entropy-like stream with verifiable internal structure.

pub mod dyadic;
pub mod entropy;
pub mod markers;
pub mod noninv;
pub mod partitions;
pub mod prediction;
pub mod speclang;
pub mod subshifts;
pub mod words;

pub use dyadic::Dyadic;
pub use subshifts::LanguageOracle;
pub use words::{RealWord, Symbol, SymbolStream, Word};
