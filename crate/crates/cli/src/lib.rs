//! Library half of the `hcsolve` command: configuration parsing, the
//! run loop with its CSV/snapshot artifacts, and the verification suite.
//! The binary in `main.rs` is a thin argument-handling shell over this.

pub mod config;
pub mod runner;
pub mod verify;

use hcsolve_core::error::CoreError;

/// Process exit code for an error raised while a run is executing.
///
/// Config problems are caught before `runner::run` and map to 2 at the
/// call site; here Newton failures map to 3, capacity/budget trips to 4,
/// and anything else to 5.
pub fn run_exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::SolveFailed { .. } => 3,
        CoreError::Capacity { .. } => 4,
        _ => 5,
    }
}
