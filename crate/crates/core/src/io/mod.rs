//! Configuration, field files, reports and command dispatch.

pub mod config;
pub mod field_file;
pub mod report;
pub mod run;

pub use config::{parse_config, Command, RunConfig};
pub use field_file::{read_field, write_field, Encoding, FieldFile};
pub use report::{Report, Table};
pub use run::run;
