//! Question answering over knowledge graphs with typed programs.
//!
//! The pipeline: a question is decoded into a short register program, the
//! program is executed against an indexed triple store, and token-level
//! disagreement across an ensemble of decoders is used to spot questions
//! that do not have a single defensible reading.

pub mod dsl;
pub mod evalkit;
pub mod interp;
pub mod kg;
pub mod logio;
pub mod recovery;
pub mod surrogate;
pub mod synthgen;
pub mod uncertainty;

pub use dsl::{parse_program, Program};
pub use interp::{exec_program, ExecutionTrace, Value};
pub use kg::KnowledgeGraph;
