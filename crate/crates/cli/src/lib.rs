//! Command-line front end: IFS spec files, run reports and CSV series.

pub mod cli;
pub mod report;
pub mod spec;

pub use cli::run;
pub use spec::{load_spec, IfsSpecFile, SpecError};
