//! `mco-lab`: seeded, machine-readable experiments over Monte Carlo
//! objectives.
//!
//! Usage: `mco-lab <experiment> --seed N [--reps N] [--out PATH] [--plot]
//! [--config FILE] [experiment flags]`. Exit status 0 on success, 1 for
//! usage errors (unknown experiment, missing seed, bad flags or config
//! file), 2 for runtime errors (library or I/O failures). Results land in
//! a CSV whose bytes depend only on the configuration, except for one
//! wall-time metadata line; `--plot` additionally writes an SVG chart.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use mco_lab::config::{self, FileConfig, ResolvedConfig, UsageError};
use mco_lab::experiments::{self, PlotSpec};
use mco_lab::plot::{self, Series};
use mco_lab::table::{Cell, ResultTable};

#[derive(Parser, Debug)]
#[command(
    name = "mco-lab",
    version,
    about = "Seeded experiments over Monte Carlo objectives",
    after_help = "Experiments: sample-monotonicity, id-counterexample, majorization, \
                  negative-dependence, variance-heuristic, log-stable, khat, \
                  fdiv-monotonicity"
)]
struct Cli {
    /// Experiment name (see the list below).
    experiment: String,
    /// RNG seed; required, so every run is reproducible.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications (default depends on the experiment).
    #[arg(long)]
    reps: Option<usize>,
    /// Output CSV path (default `<experiment>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot next to the CSV.
    #[arg(long)]
    plot: bool,
    /// JSON file with the same keys as the flags; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Particle counts for sample-monotonicity (comma separated).
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// Log-scale parameter of the log-normal marginal.
    #[arg(long)]
    sigma: Option<f64>,
    /// Weight atoms for id-counterexample (comma separated).
    #[arg(long, value_delimiter = ',')]
    atoms: Option<Vec<f64>>,
    /// Number of particles for majorization / negative-dependence.
    #[arg(long)]
    k: Option<usize>,
    /// Interpolation steps for majorization.
    #[arg(long)]
    steps: Option<usize>,
    /// Random coefficient draws for majorization.
    #[arg(long)]
    dirichlet: Option<usize>,
    /// Correlation grid for negative-dependence (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho_grid: Option<Vec<f64>>,
    /// Scale grid for variance-heuristic (comma separated).
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    /// Stability index of the log-stable weight family.
    #[arg(long)]
    stability: Option<f64>,
    /// Target mean of the log-stable weight family.
    #[arg(long)]
    mean: Option<f64>,
    /// Observations to synthesize for khat.
    #[arg(long)]
    obs: Option<usize>,
    /// Importance draws per observation for khat.
    #[arg(long)]
    samples: Option<usize>,
    /// Largest particle count for fdiv-monotonicity.
    #[arg(long)]
    k_max: Option<usize>,
}

impl Cli {
    fn into_parts(self) -> (String, Option<PathBuf>, FileConfig) {
        let flags = FileConfig {
            seed: self.seed,
            reps: self.reps,
            out: self.out,
            plot: if self.plot { Some(true) } else { None },
            k_list: self.k_list,
            sigma: self.sigma,
            atoms: self.atoms,
            k: self.k,
            steps: self.steps,
            dirichlet: self.dirichlet,
            rho_grid: self.rho_grid,
            sigma_grid: self.sigma_grid,
            stability: self.stability,
            mean: self.mean,
            obs: self.obs,
            samples: self.samples,
            k_max: self.k_max,
        };
        (self.experiment, self.config, flags)
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let (experiment, config_path, flags) = cli.into_parts();

    let file = match config_path.map(load_config_file).transpose() {
        Ok(file) => file.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let resolved = match config::resolve(&experiment, flags, file) {
        Ok(resolved) => resolved,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    match execute(&resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load_config_file(path: PathBuf) -> Result<FileConfig, UsageError> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("invalid config file {}: {e}", path.display())))
}

fn execute(config: &ResolvedConfig) -> Result<(), String> {
    let started = Instant::now();
    let (mut table, spec) =
        experiments::run(config).map_err(|e| format!("experiment failed: {e}"))?;

    let echo = serde_json::to_string(config).expect("config serializes");
    let mut metadata = vec![
        ("tool".to_string(), format!("mco-lab v{}", env!("CARGO_PKG_VERSION"))),
        ("experiment".to_string(), config.experiment.clone()),
        ("config".to_string(), echo),
    ];
    metadata.append(&mut table.metadata);
    // The wall-time line comes last so reruns differ in exactly one line.
    metadata.push((
        "wall_time_ms".to_string(),
        started.elapsed().as_millis().to_string(),
    ));
    table.metadata = metadata;

    std::fs::write(&config.out, table.to_csv())
        .map_err(|e| format!("cannot write {}: {e}", config.out.display()))?;
    println!(
        "{}: {} rows -> {}",
        config.experiment,
        table.rows.len(),
        config.out.display()
    );

    if config.plot {
        let svg_path = config.out.with_extension("svg");
        let svg = plot::render_svg(
            &config.experiment,
            spec.x,
            spec.y,
            &extract_series(&table, &spec),
        );
        std::fs::write(&svg_path, svg)
            .map_err(|e| format!("cannot write {}: {e}", svg_path.display()))?;
        println!("plot -> {}", svg_path.display());
    }
    Ok(())
}

/// Group table rows into plot series according to the experiment's
/// [`PlotSpec`].
fn extract_series(table: &ResultTable, spec: &PlotSpec) -> Vec<Series> {
    let col = |name: &str| table.column_index(name).expect("plot column exists");
    let x_idx = col(spec.x);
    let y_idx = col(spec.y);
    let se_idx = spec.se.map(col);
    let series_idx = spec.series.map(col);

    let mut series: Vec<Series> = Vec::new();
    for row in &table.rows {
        let label = match series_idx {
            Some(idx) => match &row[idx] {
                Cell::Text(s) => s.clone(),
                Cell::Number(n) => n.to_string(),
            },
            None => spec.y.to_string(),
        };
        let slot = match series.iter_mut().find(|s| s.label == label) {
            Some(slot) => slot,
            None => {
                series.push(Series {
                    label,
                    points: Vec::new(),
                });
                series.last_mut().expect("just pushed")
            }
        };
        let number = |idx: usize| row[idx].as_number().map(|n| n.as_f64());
        if let (Some(x), Some(y)) = (number(x_idx), number(y_idx)) {
            let se = se_idx.and_then(number);
            slot.points.push((x, y, se));
        }
    }
    series
}
