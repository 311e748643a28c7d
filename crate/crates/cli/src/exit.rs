//! Process exit codes. Every failure class gets its own code.

use convspec::Error;

use crate::CliError;

pub const OK: u8 = 0;
/// Bad flags; clap also uses 2.
pub const USAGE: u8 = 2;
pub const PARSE: u8 = 3;
pub const DOMAIN: u8 = 4;
pub const HORIZON: u8 = 5;
pub const GUARD: u8 = 6;
pub const TILT: u8 = 7;
pub const EXHAUSTED: u8 = 8;
pub const CONDITIONING: u8 = 9;
pub const VERIFY: u8 = 10;
pub const IO: u8 = 11;
pub const DATA: u8 = 12;
pub const INTERNAL: u8 = 70;

pub fn code(err: &CliError) -> u8 {
    match err {
        CliError::Core(e) => match e {
            Error::Parse { .. } => PARSE,
            Error::Domain(_) | Error::InconsistentModel(_) | Error::Family(_) | Error::TailUnknown(_) => DOMAIN,
            Error::Horizon { .. } => HORIZON,
            Error::Size { .. } => GUARD,
            Error::TiltDivergence { .. } => TILT,
            Error::Budget { .. } => EXHAUSTED,
            Error::ConditioningImpossible { .. } => CONDITIONING,
            Error::InsufficientData(_) => DATA,
            Error::Internal(_) => INTERNAL,
        },
        CliError::Usage(_) => USAGE,
        CliError::Exhausted { .. } => EXHAUSTED,
        CliError::Verify(_) => VERIFY,
        CliError::Io { .. } => IO,
    }
}
