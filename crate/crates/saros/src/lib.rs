//! File formats, reports and the command-line driver around `saros-core`.

pub mod cli;
pub mod model_io;
pub mod report;
pub mod run;
pub mod tsv;

pub use cli::{parse_config, RunConfig};
pub use run::{main_with_args, run, CliError, ErrorKind};
