//! Library side of the `anyparse` command: loading inputs, driving the
//! producer from a consumer loop, and writing reports.

pub mod config;
pub mod report;
pub mod run;
pub mod script;

pub use config::{CliError, Format, Mode, RunConfig, Until};
pub use run::{cmd_check, cmd_parse, cmd_replay, replay};
pub use script::{parse_script, Action, ConsumerScript, ScriptError, Step};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// `check` found at least one error.
    pub const CHECK_FAILED: u8 = 1;
    /// Bad flags or script.
    pub const CONFIG: u8 = 2;
    /// A grammar, lexicon, lattice or script could not be read or parsed.
    pub const LOAD: u8 = 3;
    /// The deadline passed before the consumer saw any result.
    pub const VOID: u8 = 4;
}
