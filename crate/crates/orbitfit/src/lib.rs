//! Scenario runner, artifact formats and configuration for `orbitfit-core`.
//!
//! Each scenario is a pure function of its [`ScenarioConfig`]: rerunning a
//! config reproduces every CSV byte for byte. `summary.json` additionally
//! carries the wall-clock time.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod scenario;

pub use config::{parse_config, RawConfig, Scenario, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use scenario::{run_batch, run_scenario, Check, ScenarioReport};
