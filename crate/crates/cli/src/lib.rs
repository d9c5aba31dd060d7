//! Command implementations behind the `sculpt` binary: preprocessing,
//! training, sampling, evaluation and gradient checking.

pub mod commands;
pub mod config;
pub mod data;
pub mod model;

pub use config::RunConfig;

/// Process exit status for a failed command.
pub fn exit_code(error: &sculpt::SculptError) -> i32 {
    if error.is_input_error() {
        2
    } else {
        1
    }
}
