//! Exact logical composition of diffusion guidance.
//!
//! Boolean queries over atomic predicates are compiled into typed guidance
//! circuits whose AND/OR nodes carry conditional-independence or
//! mutual-exclusivity guarantees. Evaluating a circuit bottom-up turns
//! per-atom posteriors and score differences into the exact posterior and
//! score of the whole query, and the same recursion composes discrete
//! transition kernels. Two analytic testbeds (a block-product Gaussian
//! mixture under a variance-preserving forward process, and a finite-state
//! discrete diffusion) supply exact atomic inputs and brute-force oracles.

pub mod calculus;
pub mod circuit;
pub mod cli;
pub mod compiler;
pub mod error;
pub mod formula;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod testbed;

pub use calculus::{
    atomic_coefficients, eval, eval_transition, AtomInput, AtomicInputs, CoefficientVector, DiscreteAtomInput,
    DiscreteAtomicInputs, EvalFlags, EvalOptions, GuidanceOutput, LogPosterior, TransitionOutput,
};
pub use circuit::{validate_structure, GuidanceCircuit, NodeStatus, ValidationReport};
pub use compiler::{check_equivalence, compile, compile_categorical, compile_taxonomy};
pub use error::{Error, Result};
pub use formula::{parse_formula, AtomId, AtomRegistry, Formula, OrKind, World};
pub use model::{CategoricalModel, DistributionModel, Event, FeasibleWorldSet, TaxonomyModel};
