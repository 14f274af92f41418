//! Text formats: the `.parch` architecture language, trace, partition and
//! grant files, and DOT export.

mod dot;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

use crate::architecture::Architecture;
use crate::calculus::TypeSystem;
use crate::constraints::{Constraint, LocalSend, NegCreate, NegPossess, Positive};
use crate::synthesis::{Algorithm, SynthesisConfig};

pub use dot::{check_dot, export_dot, DotStats};
pub use parser::{parse_grants, parse_partition, parse_spec, parse_term, parse_trace, parse_type};
pub use printer::{print_grants, print_partition, print_spec, print_trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{line}:{col}: {message}")]
    Resolve { line: usize, col: usize, message: String },
}

/// Overrides a document may carry for synthesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DocOptions {
    pub algorithm: Option<Algorithm>,
    pub cap: Option<usize>,
}

impl DocOptions {
    /// Applies the overrides on top of `base`.
    pub fn apply(&self, mut base: SynthesisConfig) -> SynthesisConfig {
        if let Some(a) = self.algorithm {
            base.algorithm = a;
        }
        if let Some(c) = self.cap {
            base.m_family_cap = c;
        }
        base
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecDocument {
    pub architecture: Architecture,
    pub constraints: Vec<Constraint>,
    pub options: DocOptions,
}

impl SpecDocument {
    pub fn new(architecture: Architecture) -> Self {
        SpecDocument {
            architecture,
            constraints: Vec::new(),
            options: DocOptions::default(),
        }
    }

    pub fn type_system(&self) -> &TypeSystem {
        &self.architecture.type_system
    }

    pub fn neg_create(&self) -> Vec<NegCreate> {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::NegCreate(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn neg_possess(&self) -> Vec<NegPossess> {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::NegPossess(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn positives(&self) -> Vec<Positive> {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::Positive(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn locals(&self) -> Vec<LocalSend> {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::LocalSend(l) => Some(l.clone()),
                _ => None,
            })
            .collect()
    }
}
