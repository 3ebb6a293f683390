//! Configuration, repeated runs, table and sweep reproduction, CSV output.

mod config;
mod csv_out;
mod presets;
mod runs;

pub use config::{load_config, ExperimentConfig, DEFAULT_TABLE_M};
pub use csv_out::{emit_csv, format_number, read_csv};
pub use presets::{CustomNoise, GChoice, MarketModel};
pub use runs::{
    repeat_runs, repeat_with, reported_value, run_convergence, run_seed, run_table, solve_once, sweep_config,
    sweep_point, table_time_indices, write_sweep, write_table, RunStats, SweepRow, TableRow,
};
