//! Multiparty session types with existential branching: a single receiver
//! waits on several candidate senders and synchronises with whichever one
//! acts first.
//!
//! The crate covers the whole pipeline: parsing, projection of global types,
//! the typing context semantics and its consistency check, type checking of
//! processes, a static progress analysis, an interpreter with an exhaustive
//! explorer, and generators for channel/mutex/rwlock models.

pub mod calculus;
pub mod encodings;
pub mod gen;
pub mod parser;
pub mod pretty;
pub mod progress;
pub mod projection;
pub mod reducer;
pub mod semantics;
pub mod typecheck;
pub mod types;

pub use calculus::{Channel, Literal, Payload, Process, Role};
pub use parser::{parse_global, parse_local, parse_process, ParseError, SourceFile};
pub use types::{DomainSet, GlobalType, LocalType, Sort, TypeExpr};
