//! Oracles, instance files, generators and the solve/bench front end behind the `ssapx` binary.

pub mod app;
pub mod generate;
pub mod instance;
pub mod oracles;

pub use app::{CliError, ExitCode};
pub use instance::{InstanceFile, Problem};
