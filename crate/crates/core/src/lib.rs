//! Sequential model-based diagnosis over propositional diagnosis problem instances.

pub mod bench;
pub mod conflict;
pub mod dpi;
pub mod dynamichs;
pub mod formula;
pub mod generate;
pub mod hstree;
pub mod query;
pub mod reasoner;
pub mod session;
