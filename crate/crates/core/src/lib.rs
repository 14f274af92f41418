//! Privacy-by-design architecture workbench.
//!
//! Architectures are agents that hold typed constructors and exchange
//! atomic-typed messages over declared channels. The crate checks traces
//! against privacy constraints, synthesizes certified-interface extensions
//! that enforce negative constraints by construction, verifies the partition
//! conditions behind those guarantees, and searches bounded trace spaces for
//! counterexamples and witnesses.

pub mod architecture;
pub mod calculus;
pub mod cli;
pub mod constraints;
pub mod explorer;
pub mod fixtures;
pub mod frontend;
pub mod report;
pub mod synthesis;
pub mod trace;
pub mod verify;

pub use architecture::{AgentId, AgentKind, Architecture};
pub use calculus::{AtomicType, ConstructorDecl, Name, TermExpr, TypeExpr, TypeSystem};
pub use constraints::{Constraint, LocalSend, NegCreate, NegPossess, Positive};
pub use report::{VerdictReport, Violation};
pub use trace::{Event, KnowledgeState, Trace};
