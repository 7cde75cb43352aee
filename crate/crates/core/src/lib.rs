//! Environment-based categorial-grammar parsing.
//!
//! Every chart item carries the relation it denotes in a finite environment
//! of entities, computed bottom-up with natural join and projection. The
//! basic parser handles single-category lexicons; the extended parser adds
//! multi-component items for generalized quantifiers and conjunction of
//! quantified constituents.

pub mod basic;
pub mod category;
pub mod denotation;
pub mod environment;
pub mod extended;
pub mod forest;
pub mod grammar;
pub mod input;
pub mod verify;

pub use basic::{BasicChart, ParseError, ProbTable};
pub use category::{parse_category, Category};
pub use denotation::{QuantifierRegistry, Relation};
pub use environment::{load_environment, Environment};
pub use extended::{ExtChart, ExtItem};
pub use forest::{ForestDump, Rule, Tree};
pub use grammar::{load_lexicon, Grammar};
pub use input::{load_lattice, InputChart};
pub use verify::verify_dump;
