//! Experiment orchestration for the `noisy-sort` library: parameter grids,
//! parallel replicates with derived seeds, CSV results and summaries, and
//! uncertainty-region bitmaps.

pub mod error;
pub mod output;
pub mod regions;
pub mod run;
pub mod spec;

pub use error::{HarnessError, Result};
pub use output::{loglog_slope, summarize, ResultRow, SummaryRow};
pub use regions::emit_regions;
pub use run::{run_experiment, ExperimentOutput};
pub use spec::{ExperimentKind, ExperimentSpec};
