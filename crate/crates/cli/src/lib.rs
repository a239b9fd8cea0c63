//! Scenario-file front end for `oscmeas`.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_scenario, Issue, ScenarioFile};
pub use run::{execute, load, CliError, Command, Options, Summary};
