//! Model bundles, command-line workflows and the HTTP API.

pub mod bundle;
pub mod cli;
pub mod input;
pub mod server;

pub use bundle::{BundleError, ModelBundle, FORMAT_VERSION};
pub use cli::{run, CliError};
pub use server::{router, AppState};
