//! Scenario runner, metrics and plot-data emission for the hawkeye
//! simulator. The `hawkeye` binary wraps this crate.

pub mod compare;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use compare::{compare_baseline, BaselineReport};
pub use error::{HarnessError, Result};
pub use metrics::{ErrorStats, MetricsReport};
pub use plot::{emit_plot_data, PlotKind};
pub use run::{run_scenario, write_run, RunOutput};
pub use scenario::{Overrides, Scenario};
pub use sweep::run_sweep;
