//! Replicated experiments: TOML configs, parallel replication runs,
//! aggregation with theory overlays, sweeps, and CSV/SVG output.

mod config;
mod output;
mod runner;

pub use config::{ExperimentConfig, NamedVariant, SpeedupTableSpec, DEFAULT_MONTE_CARLO_SAMPLES};
pub use output::{
    bound_rows, emit_outputs, emit_sweep, iteration_rows, read_curve_file, read_wallclock_curve, write_speedup,
    write_summary, write_sweep_table, write_wallclock_curve, Formats, SUMMARY_HEADER, WALLCLOCK_HEADER,
};
pub use runner::{
    run_experiment, speedup_rows, sweep, sweep_point, BoundKind, BoundOverlay, Curve, ExperimentResult,
    IterationColumns, ReplicationSummary, SpeedupRow, SweepAxis, VariantResult, MAX_SNAPSHOT_VALUES,
};
