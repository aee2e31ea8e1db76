pub mod literal;
pub mod program;
pub mod solver;
pub mod query;
pub mod explain;
pub mod harness;
pub mod actor;
pub mod orchestrator;
pub mod benchmark;
pub mod config;
