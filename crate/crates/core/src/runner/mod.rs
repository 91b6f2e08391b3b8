//! Configuration-driven runs: TOML in, CSV and JSON artifacts plus a
//! checksummed manifest out.

mod config;
mod fitcli;
mod manifest;
mod pipeline;
mod table;

pub use config::{
    load_config, parse_config, parse_pair, FitConfig, InitialStateConfig, Limits, MeasurementConfig, ModelConfig,
    Observable, PropagationConfig, RunConfig, TimeGrid,
};
pub use fitcli::{fit_table, FitModel, FitReport};
pub use manifest::{
    csv_schemas, inventory, sha256_hex, DriftSummary, FileRecord, RunManifest, StageRecord, StageStatus,
    CSV_SCHEMA_VERSION, MANIFEST_FILE,
};
pub use pipeline::*;
pub use table::{parse_table, read_table, CsvTable};
