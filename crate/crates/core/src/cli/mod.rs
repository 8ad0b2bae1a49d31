//! Command-line front end: configuration, study orchestration and
//! artifact emission.

pub mod config;
pub mod output;
pub mod render;
pub mod studies;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::PcsError;

pub use config::RunConfig;
use output::{RunStatus, Sidecar};

/// Exit status for a run whose cells all succeeded.
pub const EXIT_SUCCESS: u8 = 0;
/// Exit status when some or all cells failed, or the run could not finish.
pub const EXIT_FAILURE: u8 = 1;
/// Exit status for invalid configuration or usage.
pub const EXIT_CONFIG: u8 = 2;

/// Errors of the command-line layer.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Compute(#[from] PcsError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{file}: missing columns {columns}")]
    MissingColumns { file: String, columns: String },

    #[error("nothing to plot: {0}")]
    EmptyPlot(String),

    #[error("plot error: {0}")]
    Render(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

/// A reproduction study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Study {
    Spectrum,
    ThreePhoton,
    MaskStudy,
    PvrSurface,
    WindowOpt,
}

impl Study {
    pub const ALL: [Study; 5] = [
        Study::Spectrum,
        Study::ThreePhoton,
        Study::MaskStudy,
        Study::PvrSurface,
        Study::WindowOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Spectrum => "spectrum",
            Study::ThreePhoton => "three-photon",
            Study::MaskStudy => "mask-study",
            Study::PvrSurface => "pvr-surface",
            Study::WindowOpt => "window-opt",
        }
    }

    /// Whether the study averages over the coupling distribution.
    pub fn uses_ensemble(self) -> bool {
        matches!(self, Study::Spectrum | Study::WindowOpt)
    }
}

/// Outcome of [`run_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub study: Study,
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub cells: usize,
    pub failed: usize,
    pub status: RunStatus,
    /// The study had already been completed with the same configuration.
    pub skipped: bool,
}

impl StudyReport {
    pub fn exit_code(&self) -> u8 {
        match self.status {
            RunStatus::Complete => EXIT_SUCCESS,
            RunStatus::Partial | RunStatus::Failed => EXIT_FAILURE,
        }
    }
}

/// Runs `study` and writes its tables and metadata sidecar to `out_dir`.
///
/// A study already completed there with the same resolved configuration is
/// left untouched unless `force` is set. Tables are written before the
/// sidecar, which therefore marks completion.
pub fn run_study(study: Study, config: &RunConfig, out_dir: &Path, force: bool) -> Result<StudyReport, CliError> {
    config.validate(study)?;
    let resolved = config.resolved();
    let config_json = serde_json::to_value(&resolved)?;
    let sidecar_path = Sidecar::path(out_dir, study.name());
    if !force {
        if let Some(prev) = Sidecar::read(&sidecar_path) {
            if prev.completes(out_dir, &config_json) {
                return Ok(StudyReport {
                    study,
                    dir: out_dir.to_path_buf(),
                    files: prev.files.iter().map(|f| out_dir.join(f)).collect(),
                    cells: prev.cells,
                    failed: 0,
                    status: RunStatus::Complete,
                    skipped: true,
                });
            }
        }
    }
    let workers = resolved
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let output = pool.install(|| studies::compute(study, &resolved))?;
    fs::create_dir_all(out_dir)?;
    let _ = fs::remove_file(&sidecar_path);
    let mut files = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        output::write_atomic(&path, bytes)?;
        files.push(path);
    }
    let failed = output.failures.len();
    let status = if failed == 0 {
        RunStatus::Complete
    } else if failed < output.cells {
        RunStatus::Partial
    } else {
        RunStatus::Failed
    };
    Sidecar {
        study: study.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config_json,
        files: output.files.iter().map(|(n, _)| n.clone()).collect(),
        cells: output.cells,
        status,
        failures: output.failures,
        summary: output.summary,
    }
    .write(&sidecar_path)?;
    Ok(StudyReport {
        study,
        dir: out_dir.to_path_buf(),
        files,
        cells: output.cells,
        failed,
        status,
        skipped: false,
    })
}

#[derive(Debug, Parser)]
#[command(name = "pcs-sim", version, about = "Photon coincidence spectroscopy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ensemble two-photon spectrum over the scan detuning.
    Spectrum(StudyArgs),
    /// Three-photon moments at a single coupling.
    ThreePhoton(StudyArgs),
    /// Three-photon spectra with single dressed transitions removed.
    MaskStudy(StudyArgs),
    /// Peak-to-valley ratio over coupling and window time.
    PvrSurface(StudyArgs),
    /// Optimal window times over a list of atomic decay rates.
    WindowOpt(StudyArgs),
    /// Draw SVG plots of study tables.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "PCS_SIM_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; all logical cores by default.
    #[arg(long)]
    workers: Option<usize>,
    /// Recompute even if the study has already been completed.
    #[arg(long)]
    force: bool,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// CSV tables written by a study.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Directory for the plots; next to each table by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn study_command(study: Study, args: StudyArgs) -> Result<u8, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    let dir = config.output_dir(args.out.as_deref());
    let report = run_study(study, &config, &dir, args.force)?;
    if report.skipped {
        eprintln!(
            "{}: already complete in {} (use --force to recompute)",
            study.name(),
            dir.display()
        );
        return Ok(EXIT_SUCCESS);
    }
    for f in &report.files {
        eprintln!("{}: wrote {}", study.name(), f.display());
    }
    if report.failed > 0 {
        eprintln!(
            "{}: {} of {} cells failed; see {}",
            study.name(),
            report.failed,
            report.cells,
            Sidecar::path(&dir, study.name()).display()
        );
    }
    if !args.no_plots {
        for f in report.files.iter().filter(|f| f.extension().is_some_and(|x| x == "csv")) {
            if f.file_name().is_some_and(|n| n == "window_fit.csv") {
                continue;
            }
            match render::render_file(f, &dir) {
                Ok(svgs) => svgs.iter().for_each(|s| eprintln!("{}: wrote {}", study.name(), s.display())),
                Err(e) => eprintln!("{}: plot skipped: {e}", study.name()),
            }
        }
    }
    Ok(report.exit_code())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Spectrum(a) => study_command(Study::Spectrum, a),
        Command::ThreePhoton(a) => study_command(Study::ThreePhoton, a),
        Command::MaskStudy(a) => study_command(Study::MaskStudy, a),
        Command::PvrSurface(a) => study_command(Study::PvrSurface, a),
        Command::WindowOpt(a) => study_command(Study::WindowOpt, a),
        Command::Render(a) => render::render_plots(&a.files, a.out.as_deref()).map(|svgs| {
            svgs.iter().for_each(|s| eprintln!("render: wrote {}", s.display()));
            EXIT_SUCCESS
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pcs-sim: {e}");
            e.exit_code()
        }
    }
}
