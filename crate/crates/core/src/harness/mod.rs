//! Command implementations behind the `qheat` binary.
//!
//! Every command validates its whole configuration before computing anything
//! and maps failures onto a fixed set of exit codes.

mod config;
mod simulate;
mod sweep;
mod verify;

use std::path::Path;

pub use config::{
    set_param, sweepable_params, IntegratorSection, OutputConfig, ScenarioConfig, WindowConfig,
};
pub use simulate::{run_simulate, simulate, SimulationOutcome, SimulationSummary};
pub use sweep::{parse_grid, run_sweep, sweep, SweepOutcome, SweepPoint, SweepSpec};
pub use verify::{run_verify, verify, Tolerance, VerifyReport, VerifyRow};

pub const EXIT_OK: i32 = 0;
/// A verification row failed.
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BOUNDARY: i32 = 3;
pub const EXIT_INSTABILITY: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_INTERNAL: i32 = 6;

/// Environment variable capping the number of sweep workers.
pub const WORKERS_ENV: &str = "QHEAT_WORKERS";

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> crate::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub(crate) fn to_json_pretty<T: serde::Serialize>(value: &T) -> crate::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
