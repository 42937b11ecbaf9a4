//! Configuration, commands and the real-time replay stream behind the
//! `capglove` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod stream;

pub use config::{PipelineConfig, Task};
pub use error::{PipelineError, Result};
