//! Command-line and HTTP front ends for `compound-bo` campaigns. Both work
//! on the same directory of JSONL event logs.

pub mod cli;
pub mod error;
pub mod server;
pub mod store;

pub use error::{ApiError, ErrorCode};
pub use store::Store;
