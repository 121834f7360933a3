//! Command-line front end of the NLI planner.

pub mod commands;
pub mod report;
pub mod schema;

use nli_planner::ErrorClass;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Exit code for an error raised by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<nli_planner::Error>() {
            return match e.class() {
                ErrorClass::Validation | ErrorClass::Io => EXIT_VALIDATION,
                ErrorClass::Numeric => EXIT_NUMERIC,
            };
        }
        if cause.is::<commands::UsageError>() {
            return EXIT_USAGE;
        }
    }
    EXIT_VALIDATION
}
