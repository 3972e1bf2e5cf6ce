pub mod assets;
pub mod agents;
pub mod contract;
pub mod dataquery;
pub mod nlu;
pub mod orchestrator;
pub mod process;
pub mod rules;
pub mod testkit;
