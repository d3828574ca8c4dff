//! Monte-Carlo experiments, metrics and result output.

pub mod experiment;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod spec;

pub use experiment::{run_experiment, HarnessError, ResultRow, ORACLE_TOLERANCE};
pub use metrics::{ber, nmse, MetricError, Summary};
pub use output::{emit_csv, emit_plot_script, read_csv, OutputError};
pub use rng::{stream_rng, Stream};
pub use spec::{ExperimentKind, ExperimentSpec, SimulationFile, SpecError};
