//! Command-line workflows.

use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use cdss_core::aggregation::Scheme;
use cdss_core::dataset::{load_csv, make_split_plan, BuiltinDataset, Dataset, Schema};
use cdss_core::evaluation::{run_experiment, summary_line, write_report};
use cdss_core::pipeline::{train_model, PipelineConfig};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bundle::{BundleError, ModelBundle};
use crate::input::{parse_instance, InputError};
use crate::server::{serve, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        Self::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cdss", version, about = "Decision-set clinical decision support with personalized rule voting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a whole dataset and write a model bundle.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Bundle file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated stratified cross-validation with report files.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Directory for the JSON and CSV report files.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Score one patient with a saved bundle.
    Predict {
        #[arg(long, env = "CDSS_BUNDLE")]
        bundle: PathBuf,
        /// JSON object keyed by feature name, JSON array, comma list, or a
        /// file holding any of those.
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "personalized")]
        scheme: Scheme,
    },
    /// Serve the HTTP API for one bundle.
    Serve {
        #[arg(long, env = "CDSS_BUNDLE")]
        bundle: PathBuf,
        #[arg(long, env = "CDSS_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory of static UI assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Seconds between checks for a changed bundle file; 0 disables reloading.
        #[arg(long, default_value_t = 0)]
        reload_interval: u64,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `heart`, `breast`, `mammo`, or a path to a headerless CSV file.
    #[arg(long)]
    pub dataset: String,
    /// Column schema (JSON); required for CSV paths.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Pipeline configuration (JSON); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k_target: Option<usize>,
}

/// A dataset with the schema it was read with and a short name for reports.
pub struct LoadedData {
    pub name: String,
    pub schema: Schema,
    pub dataset: Dataset,
}

impl DataArgs {
    pub fn load(&self) -> Result<LoadedData, CliError> {
        let data = |e: cdss_core::DataError| CliError::Data(e.to_string());
        if let Ok(builtin) = self.dataset.parse::<BuiltinDataset>() {
            if !Path::new(&self.dataset).exists() {
                let schema = match &self.schema {
                    Some(p) => Schema::from_path(p).map_err(data)?,
                    None => builtin.schema(),
                };
                let dataset =
                    cdss_core::dataset::dataset_from_csv_str(builtin.raw_csv(), &schema).map_err(data)?;
                return Ok(LoadedData { name: builtin.name().to_string(), schema, dataset });
            }
        }
        let path = Path::new(&self.dataset);
        let Some(schema_path) = &self.schema else {
            return Err(CliError::Usage(format!(
                "--schema is required when --dataset is a file ({}); built-in names are heart, breast, mammo",
                self.dataset
            )));
        };
        let schema = Schema::from_path(schema_path).map_err(data)?;
        let dataset = load_csv(path, &schema).map_err(data)?;
        let name = schema
            .name
            .clone()
            .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into());
        Ok(LoadedData { name, schema, dataset })
    }
}

impl ModelArgs {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Data(format!("invalid config {}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        if let Some(k) = self.k_target {
            if k == 0 {
                return Err(CliError::Usage("--k-target must be at least 1".into()));
            }
            config.induction.k_target = k;
        }
        Ok(config)
    }
}

fn read_input(arg: &str) -> Result<String, CliError> {
    let trimmed = arg.trim_start();
    let looks_inline = trimmed.starts_with('{') || trimmed.starts_with('[') || trimmed.contains(',');
    let path = Path::new(arg);
    if !looks_inline && path.is_file() {
        return std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {arg}: {e}")));
    }
    Ok(arg.to_string())
}

/// Runs one parsed command, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    match cli.command {
        Command::Train { data, model, out: path } => {
            let config = model.config()?;
            let loaded = data.load()?;
            let training = train_model(&loaded.dataset, &config).map_err(|e| CliError::Runtime(e.to_string()))?;
            let bundle = ModelBundle::new(loaded.schema, &loaded.dataset, training, &config);
            bundle.save(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(
                out,
                "wrote {} ({} rules, fingerprint {})",
                path.display(),
                bundle.model.decision_set.len(),
                bundle.fingerprint()
            )
            .map_err(io)?;
        }
        Command::Evaluate { data, model, folds, repeats, report_dir } => {
            if folds < 2 || repeats < 1 {
                return Err(CliError::Usage("--folds must be at least 2 and --repeats at least 1".into()));
            }
            let config = model.config()?;
            let loaded = data.load()?;
            let plan = make_split_plan(&loaded.dataset, repeats, folds, config.seed())
                .map_err(|e| CliError::Data(e.to_string()))?;
            let report = run_experiment(&loaded.name, &loaded.dataset, &plan, &config)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(out, "{}", summary_line(&report)).map_err(io)?;
            if let Some(dir) = report_dir {
                for f in write_report(&report, &dir).map_err(|e| CliError::Runtime(e.to_string()))? {
                    writeln!(out, "wrote {}", f.display()).map_err(io)?;
                }
            }
        }
        Command::Predict { bundle, input, scheme } => {
            let bundle = ModelBundle::load(&bundle)?;
            let instance = parse_instance(&bundle, &read_input(&input)?)?;
            let result = bundle.predict(&instance, scheme).map_err(|e| CliError::Data(e.to_string()))?;
            let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(out, "{text}").map_err(io)?;
        }
        Command::Serve { bundle, port, host, static_dir, reload_interval } => {
            let state = Arc::new(AppState::from_path(&bundle)?);
            let reload = (reload_interval > 0).then(|| Duration::from_secs(reload_interval));
            let runtime = tokio::runtime::Runtime::new().map_err(io)?;
            runtime.block_on(serve(state, SocketAddr::new(host, port), static_dir, reload)).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors go to `err` as one human-readable line.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
