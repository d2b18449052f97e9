//! Mission configuration and run logs.

mod config;
mod log;

pub use config::{ConfigError, MissionConfig, SceneSource};
pub use log::{MissionLog, TerminalStatus, TickRow, CSV_HEADER, EXIT_CONFIG};
