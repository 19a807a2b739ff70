//! `mzsim` command-line front end.

mod figures;
mod format;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mzsim_core::bayes::{sensitivity_experiment_with, ExperimentConfig, DEFAULT_GRID, DEFAULT_LEVEL, MAX_GRID};
use mzsim_core::outcome::{outcome_probability, outcome_table};
use mzsim_core::sensitivity::{crlb, error_propagation_sensitivity, fisher_analytic, fisher_information_detailed};
use mzsim_core::states::{InputSpec, TruncationPolicy, DEFAULT_HARD_CAP, DEFAULT_TAIL_TOLERANCE};

pub use figures::{emit_figure_data, Figure};
pub use format::sig;
use format::Header;

const DIGITS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mzsim_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "mzsim",
    version,
    propagate_version = true,
    about = "Mach-Zehnder phase estimation with coherent and squeezed-vacuum inputs"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Output photon-count distribution, or one probability with --n-c/--n-d
    Prob(ProbArgs),
    /// Numeric and analytic Fisher information
    Fisher(FisherArgs),
    /// Cramér-Rao bound 1/√(pF)
    Crlb(CrlbArgs),
    /// Error-propagation sensitivity
    Epf(EpfArgs),
    /// Monte Carlo Bayesian sensitivity
    Bayes(BayesArgs),
    /// Sensitivity against squeezing strength at θ=π/2
    Fig2a(Fig2aArgs),
    /// Sensitivity against the true phase
    Fig2b(Fig2bArgs),
    /// Fixed-budget scans and the c/N_T fit
    Fig3(Fig3Args),
    /// Relative-number, phase and NOON-overlap distributions
    Noon(NoonArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TruncationArgs {
    /// Discarded tail mass allowed per input mode
    #[arg(long, default_value_t = DEFAULT_TAIL_TOLERANCE, value_parser = unit_open)]
    pub tail_tol: f64,
    /// Largest photon number kept per mode
    #[arg(long, default_value_t = DEFAULT_HARD_CAP, value_parser = at_least_one_usize)]
    pub hard_cap: usize,
}

impl TruncationArgs {
    fn policy(&self) -> CliResult<TruncationPolicy> {
        Ok(TruncationPolicy::new(self.tail_tol, self.hard_cap)?)
    }

    fn json(&self) -> serde_json::Value {
        json!({"tail_tolerance": self.tail_tol, "hard_cap": self.hard_cap})
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct StateArgs {
    /// Coherent intensity |α|²
    #[arg(long, value_parser = non_negative)]
    pub alpha2: f64,
    /// Squeezing strength
    #[arg(long, value_parser = non_negative)]
    pub r: f64,
    #[command(flatten)]
    pub truncation: TruncationArgs,
}

impl StateArgs {
    fn spec(&self) -> CliResult<InputSpec> {
        Ok(InputSpec::from_alpha2(self.alpha2, self.r)?.with_truncation(self.truncation.policy()?))
    }
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ProbArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Phase shift in radians
    #[arg(long, value_parser = angle)]
    pub theta: f64,
    #[arg(long, requires = "n_d")]
    pub n_c: Option<u32>,
    #[arg(long, requires = "n_c")]
    pub n_d: Option<u32>,
    /// Write the table here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct FisherArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, value_parser = angle)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CrlbArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Number of measurements
    #[arg(long, value_parser = at_least_one_u64)]
    pub p: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct EpfArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long, value_parser = angle)]
    pub theta: f64,
    #[arg(long, value_parser = at_least_one_u64)]
    pub p: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BayesOptions {
    /// Initial posterior grid size on [0, π]
    #[arg(long, default_value_t = DEFAULT_GRID, value_parser = grid_size)]
    pub grid: usize,
    /// Largest grid size reached by refinement
    #[arg(long, default_value_t = MAX_GRID, value_parser = grid_size)]
    pub max_grid: usize,
    /// Posterior mass inside the reported interval
    #[arg(long, default_value_t = DEFAULT_LEVEL, value_parser = unit_open)]
    pub level: f64,
}

impl BayesOptions {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            grid_size: self.grid,
            max_grid_size: self.max_grid,
            level: self.level,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BayesArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// True phase shift
    #[arg(long, value_parser = angle)]
    pub theta: f64,
    #[arg(long, value_parser = at_least_one_usize)]
    pub p: usize,
    #[arg(long, default_value_t = 100, value_parser = at_least_one_usize)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub options: BayesOptions,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct Fig2aArgs {
    #[arg(long, default_value_t = 10.0, value_parser = non_negative)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 1000, value_parser = at_least_one_usize)]
    pub p: usize,
    /// Trials per point; 0 leaves the Bayesian columns empty
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0, value_parser = non_negative)]
    pub r_max: f64,
    /// Uniform intervals on [0, r_max]; the balance point sinh²r = |α|² is always added
    #[arg(long, default_value_t = 30, value_parser = at_least_one_usize)]
    pub r_steps: usize,
    #[command(flatten)]
    pub options: BayesOptions,
    #[command(flatten)]
    pub truncation: TruncationArgs,
    #[arg(long, default_value = "fig2a.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct Fig2bArgs {
    #[arg(long, default_value_t = 10.0, value_parser = non_negative)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub r: f64,
    #[arg(long, default_value_t = 1000, value_parser = at_least_one_usize)]
    pub p: usize,
    /// Trials per point; 0 leaves the Bayesian columns empty
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Interior points θ = kπ/(n+1), k = 1..n
    #[arg(long, default_value_t = 29, value_parser = at_least_one_usize)]
    pub theta_steps: usize,
    #[command(flatten)]
    pub options: BayesOptions,
    #[command(flatten)]
    pub truncation: TruncationArgs,
    #[arg(long, default_value = "fig2b.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct Fig3Args {
    /// Total photon budgets N_T
    #[arg(long, value_delimiter = ',', default_value = "300,600,1200", value_parser = positive)]
    pub budgets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10,15,20,25,30,40,50,60,80,100", value_parser = at_least_one_usize)]
    pub p_values: Vec<usize>,
    #[arg(long, default_value_t = 400, value_parser = at_least_one_usize)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit at this p instead of the common optimum of the scans
    #[arg(long, value_parser = at_least_one_usize)]
    pub p_opt: Option<usize>,
    /// Skip scan points whose n̄ = N_T/p exceeds this
    #[arg(long, default_value_t = 100.0, value_parser = positive)]
    pub max_mean_photons: f64,
    /// Theta at which the experiments run
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2, value_parser = angle)]
    pub theta: f64,
    #[command(flatten)]
    pub options: BayesOptions,
    #[arg(long, default_value_t = 1e-8, value_parser = unit_open)]
    pub tail_tol: f64,
    #[arg(long, default_value_t = 8192, value_parser = at_least_one_usize)]
    pub hard_cap: usize,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct NoonArgs {
    #[arg(long, default_value_t = 20.0, value_parser = positive)]
    pub n_bar: f64,
    /// Photon-number sector; defaults to n̄ rounded
    #[arg(long)]
    pub total_n: Option<usize>,
    /// Points of the split grid |α|²/n̄ on [0, 1]
    #[arg(long, default_value_t = 41, value_parser = at_least_two)]
    pub split_points: usize,
    /// Points of the phase grid on [0, 2π); defaults to 16(N+1)
    #[arg(long)]
    pub phi_points: Option<usize>,
    #[command(flatten)]
    pub truncation: TruncationArgs,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be non-negative, got {s}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn angle(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if (0.0..=std::f64::consts::PI).contains(&x) {
        Ok(x)
    } else {
        Err(format!("must lie in [0, π] radians, got {s}"))
    }
}

fn unit_open(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("must lie in (0, 1), got {s}"))
    }
}

fn parse_usize(s: &str, min: usize) -> Result<usize, String> {
    let n: usize = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))?;
    if n >= min {
        Ok(n)
    } else {
        Err(format!("must be at least {min}, got {s}"))
    }
}

fn at_least_one_usize(s: &str) -> Result<usize, String> {
    parse_usize(s, 1)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    parse_usize(s, 2)
}

fn at_least_one_u64(s: &str) -> Result<u64, String> {
    parse_usize(s, 1).map(|n| n as u64)
}

fn grid_size(s: &str) -> Result<usize, String> {
    parse_usize(s, mzsim_core::bayes::MIN_GRID)
}

fn thread_count() -> CliResult<usize> {
    match std::env::var("MZSIM_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("MZSIM_THREADS: `{v}` is not a non-negative integer"))),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{line}");
            return 2;
        }
    };
    match execute(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(config: &RunConfig) -> CliResult<()> {
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("MZSIM_THREADS: {e}")))?;
    pool.install(|| dispatch(&config.command))
}

fn dispatch(command: &Command) -> CliResult<()> {
    let stdout = io::stdout();
    match command {
        Command::Prob(a) => prob(a),
        Command::Fisher(a) => {
            let spec = a.state.spec()?;
            let est = fisher_information_detailed(&spec, a.theta)?;
            let analytic = fisher_analytic(&spec);
            let gap = (est.value - analytic).abs() / analytic;
            scalars(
                a.format,
                &[("numeric", est.value), ("analytic", analytic), ("relative_gap", gap)],
                &mut stdout.lock(),
            )
        }
        Command::Crlb(a) => {
            let value = crlb(&a.state.spec()?, a.p)?;
            scalars(a.format, &[("crlb", value)], &mut stdout.lock())
        }
        Command::Epf(a) => {
            let value = error_propagation_sensitivity(&a.state.spec()?, a.theta, a.p)?;
            scalars(a.format, &[("ep_sensitivity", value)], &mut stdout.lock())
        }
        Command::Bayes(a) => {
            let spec = a.state.spec()?;
            let res = sensitivity_experiment_with(&spec, a.theta, a.p, a.trials, a.seed, a.options.config())?;
            let bound = crlb(&spec, a.p as u64)?;
            scalars(
                a.format,
                &[
                    ("delta_theta", res.delta_theta),
                    ("dispersion", res.dispersion),
                    ("map_phase", res.map_phase),
                    ("crlb", bound),
                    ("ratio", res.delta_theta / bound),
                    ("mean_photons", res.mean_photons),
                    ("grid_size", res.grid_size as f64),
                    ("multimodal_trials", res.multimodal_trials as f64),
                ],
                &mut stdout.lock(),
            )
        }
        Command::Fig2a(_) => emit_figure_data(Figure::Fig2a, command).map(report),
        Command::Fig2b(_) => emit_figure_data(Figure::Fig2b, command).map(report),
        Command::Fig3(_) => emit_figure_data(Figure::Fig3, command).map(report),
        Command::Noon(_) => emit_figure_data(Figure::Fig4, command).map(report),
    }
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn scalars<W: Write>(format: OutputFormat, values: &[(&str, f64)], out: &mut W) -> CliResult<()> {
    let path = Path::new("<stdout>");
    let text = match format {
        OutputFormat::Json => {
            let map: serde_json::Map<String, serde_json::Value> = values
                .iter()
                .map(|(k, v)| {
                    let v = if v.is_finite() {
                        json!(v)
                    } else {
                        json!(format::sig(*v, DIGITS))
                    };
                    (k.to_string(), v)
                })
                .collect();
            format!("{}\n", serde_json::Value::Object(map))
        }
        OutputFormat::Csv if values.len() == 1 => format!("{}\n", format::sig(values[0].1, DIGITS)),
        OutputFormat::Csv => values
            .iter()
            .map(|(k, v)| format!("{k},{}\n", format::sig(*v, DIGITS)))
            .collect(),
    };
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn prob(a: &ProbArgs) -> CliResult<()> {
    let spec = a.state.spec()?;
    let stdout = io::stdout();
    if let (Some(n_c), Some(n_d)) = (a.n_c, a.n_d) {
        let p = outcome_probability(&spec, a.theta, n_c, n_d)?;
        return scalars(a.format, &[("prob", p)], &mut stdout.lock());
    }
    let table = outcome_table(&spec, a.theta)?;
    let mut body = Vec::new();
    match a.format {
        OutputFormat::Csv => {
            let header = Header::new("prob", a, None, Some(a.state.truncation.json()));
            body.extend_from_slice(header.render().as_bytes());
            table.write_csv(&mut body).expect("writing to memory");
        }
        OutputFormat::Json => {
            let rows: Vec<_> = table.iter().map(|(c, d, p)| json!([c, d, p])).collect();
            let doc = json!({
                "theta": a.theta,
                "kept_mass": table.kept_mass(),
                "columns": ["n_c", "n_d", "prob"],
                "rows": rows,
            });
            body = format!("{doc}\n").into_bytes();
        }
    }
    match &a.output {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::io(path, e)),
        None => stdout
            .lock()
            .write_all(&body)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}
