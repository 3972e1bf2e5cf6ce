//! Command-line front end: configuration, the scenario runner, dataset
//! generation with pinned answers, and the REPL.

pub mod config;
pub mod corpus;
pub mod datagen;
pub mod render;
pub mod repl;
pub mod scenario;
