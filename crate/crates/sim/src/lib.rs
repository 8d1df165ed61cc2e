//! Monte-Carlo experiments for the hybrid transceiver designs in `hybridmm`:
//! seeded sweeps, large-array probes and CSV/JSON output.

pub mod error;
pub mod output;
pub mod probe;
pub mod run;
pub mod spec;

pub use error::{Result, SimError};
pub use output::{emit, read_csv, write_csv, CsvRow, Format, CSV_HEADER};
pub use probe::{run_asymptotic_probe, run_probe, ProbeRow, ProbeSpec};
pub use run::{run_experiment, run_experiment_with, run_scheme, Feasibility, Parallelism, SimRecord, TrialResult};
pub use spec::{ChannelSpec, ExperimentSpec, Preset, Scheme, SolverSpec, Sweep, SweepAxis, SystemSpec};
