//! Context-sensitive knowledge networks.
//!
//! Concepts live in explicit contexts (`King # Thailand`), are related by
//! categorical relations that drive inheritance (AKO, PARTOF, EQV, SC) and by
//! qualitative-probabilistic interactions (`a p + - c i`). A knowledge base
//! is parsed from the `.ckn` declaration language, compiled once with all
//! inheritance materialized, frozen, and then queried:
//!
//! * [`query`] answers categorical reachability and net-interaction queries.
//! * [`formulate`] extracts a qualitative decision-model skeleton.

pub mod algebra;
pub mod compiler;
pub mod dsl;
pub mod formulate;
pub mod model;
pub mod query;
pub mod snapshot;

pub use algebra::{chain, parallel, QualInfluence, Sign, TemporalPrecedence};
pub use compiler::{compile, Compilation, CompileOptions, CompileReport, CompiledKb, FrozenKb};
pub use dsl::{parse, serialize, SourceKb};
pub use model::{Assertion, Atom, Categorizer, ConceptPath, Interaction};
