//! Experiment configuration: defaults, JSON file values, then flag
//! overrides, resolved into one echoable struct.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Every runnable experiment, in the order shown by error messages.
pub const EXPERIMENTS: [&str; 8] = [
    "sample-monotonicity",
    "id-counterexample",
    "majorization",
    "negative-dependence",
    "variance-heuristic",
    "log-stable",
    "khat",
    "fdiv-monotonicity",
];

/// Optional values read from a `--config` JSON file. Flags override these;
/// these override the built-in defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub k_list: Option<Vec<usize>>,
    pub sigma: Option<f64>,
    pub atoms: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub steps: Option<usize>,
    pub dirichlet: Option<usize>,
    pub rho_grid: Option<Vec<f64>>,
    pub sigma_grid: Option<Vec<f64>>,
    pub stability: Option<f64>,
    pub mean: Option<f64>,
    pub obs: Option<usize>,
    pub samples: Option<usize>,
    pub k_max: Option<usize>,
}

/// The fully resolved configuration; serialized verbatim into the output
/// metadata so every file records how it was produced.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub seed: u64,
    pub reps: usize,
    pub out: PathBuf,
    pub plot: bool,
    pub k_list: Vec<usize>,
    pub sigma: f64,
    pub atoms: Vec<f64>,
    pub k: usize,
    pub steps: usize,
    pub dirichlet: usize,
    pub rho_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub stability: f64,
    pub mean: f64,
    pub obs: usize,
    pub samples: usize,
    pub k_max: usize,
}

/// A problem with the invocation itself (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn resolve(
    experiment: &str,
    flags: FileConfig,
    file: FileConfig,
) -> Result<ResolvedConfig, UsageError> {
    if !EXPERIMENTS.contains(&experiment) {
        return Err(UsageError(format!(
            "unknown experiment `{experiment}`; valid names: {}",
            EXPERIMENTS.join(", ")
        )));
    }
    let pick = |a: Option<u64>, b: Option<u64>| a.or(b);
    let seed = pick(flags.seed, file.seed).ok_or_else(|| {
        UsageError("--seed is required (there is no wall-clock default)".into())
    })?;
    let default_reps = match experiment {
        "log-stable" => 1_000_000,
        _ => 100_000,
    };
    let config = ResolvedConfig {
        experiment: experiment.to_string(),
        seed,
        reps: flags.reps.or(file.reps).unwrap_or(default_reps),
        out: flags
            .out
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv"))),
        plot: flags.plot.or(file.plot).unwrap_or(false),
        k_list: flags
            .k_list
            .or(file.k_list)
            .unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64]),
        sigma: flags.sigma.or(file.sigma).unwrap_or(1.0),
        atoms: flags.atoms.or(file.atoms).unwrap_or_else(|| vec![1.0, 3.0]),
        k: flags.k.or(file.k).unwrap_or(match experiment {
            "negative-dependence" => 2,
            _ => 4,
        }),
        steps: flags.steps.or(file.steps).unwrap_or(6),
        dirichlet: flags.dirichlet.or(file.dirichlet).unwrap_or(20),
        rho_grid: flags
            .rho_grid
            .or(file.rho_grid)
            .unwrap_or_else(|| vec![-0.9, -0.5, 0.0, 0.5, 0.9]),
        sigma_grid: flags
            .sigma_grid
            .or(file.sigma_grid)
            .unwrap_or_else(|| vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0]),
        stability: flags.stability.or(file.stability).unwrap_or(0.5),
        mean: flags.mean.or(file.mean).unwrap_or(1.0),
        obs: flags.obs.or(file.obs).unwrap_or(50),
        samples: flags.samples.or(file.samples).unwrap_or(10_000),
        k_max: flags.k_max.or(file.k_max).unwrap_or(4),
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ResolvedConfig) -> Result<(), UsageError> {
    let fail = |message: String| Err(UsageError(message));
    if config.reps < 100 {
        return fail(format!("--reps must be at least 100, got {}", config.reps));
    }
    if config.experiment == "log-stable" && config.reps < 1_000 {
        return fail(format!(
            "--reps must be at least 1000 for log-stable (running means start there), got {}",
            config.reps
        ));
    }
    if config.k_list.is_empty() || config.k_list.iter().any(|&k| k == 0) {
        return fail("--k-list needs at least one positive entry".into());
    }
    if config.k < 2 {
        return fail(format!("--k must be at least 2, got {}", config.k));
    }
    if config.steps < 2 {
        return fail(format!("--steps must be at least 2, got {}", config.steps));
    }
    if config.atoms.len() < 2 || config.atoms.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return fail("--atoms needs at least two positive finite values".into());
    }
    if config.rho_grid.is_empty() {
        return fail("--rho-grid needs at least one correlation".into());
    }
    if config.sigma_grid.is_empty() || config.sigma_grid.iter().any(|&s| !(s > 0.0)) {
        return fail("--sigma-grid needs positive scales".into());
    }
    if !(config.sigma > 0.0) || !config.sigma.is_finite() {
        return fail(format!("--sigma must be positive, got {}", config.sigma));
    }
    if !(config.stability > 0.0 && config.stability < 1.0) {
        return fail(format!(
            "--stability must lie strictly between 0 and 1, got {}",
            config.stability
        ));
    }
    if !(config.mean > 0.0) || !config.mean.is_finite() {
        return fail(format!("--mean must be positive, got {}", config.mean));
    }
    if config.obs == 0 {
        return fail("--obs must be positive".into());
    }
    if config.samples < 25 {
        return fail(format!(
            "--samples must be at least 25 for a tail fit, got {}",
            config.samples
        ));
    }
    if config.k_max == 0 {
        return fail("--k-max must be positive".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let flags = FileConfig {
            seed: Some(9),
            reps: Some(5_000),
            ..FileConfig::default()
        };
        let file = FileConfig {
            seed: Some(1),
            reps: Some(100),
            sigma: Some(0.5),
            ..FileConfig::default()
        };
        let config = resolve("sample-monotonicity", flags, file).unwrap();
        assert_eq!(config.seed, 9, "flag seed wins");
        assert_eq!(config.reps, 5_000, "flag reps wins");
        assert_eq!(config.sigma, 0.5, "file value beats the default");
    }

    #[test]
    fn seed_is_mandatory() {
        let err = resolve(
            "sample-monotonicity",
            FileConfig::default(),
            FileConfig::default(),
        )
        .unwrap_err();
        assert!(err.0.contains("--seed"), "message names the flag: {}", err.0);
    }

    #[test]
    fn unknown_experiment_lists_the_valid_names() {
        let err = resolve("nonsense", FileConfig::default(), FileConfig::default()).unwrap_err();
        for name in EXPERIMENTS {
            assert!(err.0.contains(name), "message must list {name}: {}", err.0);
        }
    }
}
