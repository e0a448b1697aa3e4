//! Spectral-operator calculus on discrete spectra.

pub mod counterexamples;
pub mod error;
pub mod falsify;
pub mod evaluator;
pub mod function;
pub mod growth;
pub mod ingestion;
pub mod majorization;
pub mod numeric;
pub mod spectrum;

pub use error::{Error, Result};
pub use function::{eval_function, generalized_inverse, FunctionSpec, Interval};
pub use spectrum::{CutoffLimit, DiscreteSpectrum};
