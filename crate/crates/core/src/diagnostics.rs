//! Empirical stochastic-order and tail diagnostics.
//!
//! *Convex order.* For equal-mean variables, X precedes Y in the convex
//! order iff E[(X−t)_+] ≤ E[(Y−t)_+] for every threshold t — the stop-loss
//! transform characterization. [`convex_order_test`] estimates both curves
//! on a shared grid and bootstraps the difference to decide whether observed
//! crossings exceed sampling noise.
//!
//! *Tail shape.* [`pareto_khat`] fits a generalized Pareto distribution to
//! the largest weights by the Zhang–Stephens profile-posterior method; a
//! fitted shape k̂ above 1/2 flags (potentially) infinite weight variance,
//! the regime where importance-sampling standard errors stop being
//! trustworthy.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::RandomStream;

/// Pointwise estimates of t ↦ E[(X−t)_+] with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct StopLossCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Outcome of the bootstrap dominance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// No grid point shows a confident reversal.
    Consistent,
    /// At least two adjacent grid points reverse beyond the bootstrap band.
    Violated,
    /// Only isolated reversals — not enough to call either way.
    Inconclusive,
}

/// Verdict plus the grid points where dominance failed beyond the band.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub verdict: Verdict,
    pub violation_points: Vec<f64>,
    /// The one-sided bootstrap level the bands were built at.
    pub confidence: f64,
}

/// Fitted generalized-Pareto tail shape of a weight sample.
#[derive(Debug, Clone, PartialEq)]
pub struct KhatResult {
    /// Posterior-mean shape estimate (−∞ when `degenerate`).
    pub khat: f64,
    /// Number of positive exceedances used by the fit.
    pub tail_count: usize,
    /// Order statistic the tail was measured above.
    pub threshold: f64,
    /// True when all weights are equal, leaving no tail to fit.
    pub degenerate: bool,
}

/// Mean, variance, and variance-of-log of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub mean: f64,
    pub variance: f64,
    pub variance_of_log: f64,
}

fn require_sorted_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            message: "need at least one threshold".into(),
        });
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            message: "thresholds must be nondecreasing".into(),
        });
    }
    Ok(())
}

/// Sorted copy plus suffix sums of x and x², so that tail means above any
/// threshold cost one binary search.
struct SuffixTable {
    sorted: Vec<f64>,
    suffix_x: Vec<f64>,
    suffix_x2: Vec<f64>,
}

impl SuffixTable {
    fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
        let n = sorted.len();
        let mut suffix_x = vec![0.0; n + 1];
        let mut suffix_x2 = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix_x[i] = suffix_x[i + 1] + sorted[i];
            suffix_x2[i] = suffix_x2[i + 1] + sorted[i] * sorted[i];
        }
        Self {
            sorted,
            suffix_x,
            suffix_x2,
        }
    }

    fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Index of the first sample strictly above t.
    fn tail_start(&self, t: f64) -> usize {
        self.sorted.partition_point(|&x| x <= t)
    }

    /// (mean of (x−t)_+, standard error).
    fn stop_loss_at(&self, t: f64) -> (f64, f64) {
        let n = self.n() as f64;
        let pos = self.tail_start(t);
        let count = (self.n() - pos) as f64;
        let mean = (self.suffix_x[pos] - t * count) / n;
        let second = (self.suffix_x2[pos] - 2.0 * t * self.suffix_x[pos] + t * t * count) / n;
        let var = (second - mean * mean).max(0.0);
        let se = if self.n() >= 2 {
            (var / (n - 1.0)).sqrt()
        } else {
            f64::INFINITY
        };
        (mean, se)
    }

    /// Stop-loss value of a bootstrap resample given per-index multiplicities.
    fn resampled_stop_loss(&self, counts: &[f64], suffix_cx: &[f64], suffix_c: &[f64], t: f64) -> f64 {
        debug_assert_eq!(counts.len(), self.n());
        let pos = self.tail_start(t);
        (suffix_cx[pos] - t * suffix_c[pos]) / self.n() as f64
    }
}

/// Estimate t ↦ E[(X−t)_+] on a grid, with per-point standard errors.
pub fn stop_loss_curve(samples: &[f64], t_grid: &[f64]) -> Result<StopLossCurve> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            what: "stop-loss curve",
            needed: 1,
            have: 0,
        });
    }
    require_sorted_grid(t_grid)?;
    let table = SuffixTable::new(samples);
    let mut values = Vec::with_capacity(t_grid.len());
    let mut std_errors = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (v, se) = table.stop_loss_at(t);
        values.push(v);
        std_errors.push(se);
    }
    Ok(StopLossCurve {
        t_grid: t_grid.to_vec(),
        values,
        std_errors,
    })
}

/// The default threshold grid: 64 empirical quantiles of the pooled samples
/// spanning 1%–99%, plus the pooled mean, sorted and deduplicated.
pub fn default_t_grid(samples_low: &[f64], samples_high: &[f64]) -> Result<Vec<f64>> {
    let mut pooled: Vec<f64> = samples_low.iter().chain(samples_high).cloned().collect();
    if pooled.is_empty() {
        return Err(Error::InsufficientData {
            what: "threshold grid",
            needed: 1,
            have: 0,
        });
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = pooled.len();
    let mut grid = Vec::with_capacity(65);
    for j in 0..64 {
        let q = 0.01 + 0.98 * j as f64 / 63.0;
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        grid.push(pooled[idx]);
    }
    grid.push(pooled.iter().sum::<f64>() / n as f64);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    Ok(grid)
}

/// Bootstrap test of stop-loss dominance for two equal-mean samples.
///
/// `Consistent`: the low sample's curve sits below the high sample's at
/// every grid point, up to a one-sided percentile band at `level`.
/// `Violated`: the reverse inequality exceeds the band at two or more
/// adjacent grid points. Isolated exceedances give `Inconclusive`.
///
/// Errors when the sample means differ by more than three joint standard
/// errors — dominance of stop-loss curves characterizes the convex order
/// only in the equal-mean regime.
pub fn convex_order_test(
    samples_low: &[f64],
    samples_high: &[f64],
    t_grid: &[f64],
    bootstrap_rounds: usize,
    level: f64,
    stream: &RandomStream,
) -> Result<OrderVerdict> {
    if samples_low.is_empty() || samples_high.is_empty() {
        return Err(Error::InsufficientData {
            what: "convex order test",
            needed: 1,
            have: 0,
        });
    }
    require_sorted_grid(t_grid)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter {
            name: "level",
            message: format!("bootstrap level must lie in (0,1), got {level}"),
        });
    }
    if bootstrap_rounds < 2 {
        return Err(Error::InvalidParameter {
            name: "bootstrap_rounds",
            message: "need at least 2 bootstrap rounds".into(),
        });
    }

    let low = SuffixTable::new(samples_low);
    let high = SuffixTable::new(samples_high);

    let stats = |table: &SuffixTable| {
        let n = table.n() as f64;
        let mean = table.suffix_x[0] / n;
        let var = (table.suffix_x2[0] / n - mean * mean).max(0.0);
        (mean, var / n)
    };
    let (mean_low, se2_low) = stats(&low);
    let (mean_high, se2_high) = stats(&high);
    let joint_se = (se2_low + se2_high).sqrt();
    if (mean_low - mean_high).abs() > 3.0 * joint_se {
        return Err(Error::MeanMismatch {
            mean_a: mean_low,
            mean_b: mean_high,
            limit: 3.0 * joint_se,
            context: "convex order requires equal means",
        });
    }

    // Bootstrap rounds resample multiplicities over the sorted arrays, so
    // tail sums need no per-round sorting. Each round's difference curve is
    // a pure function of (stream key, round index).
    let round_curves: Vec<Vec<f64>> = exec::map_indexed(bootstrap_rounds, |b| {
        let mut rng = stream.substream(b as u64);
        let resample = |table: &SuffixTable, rng: &mut RandomStream| {
            let n = table.n();
            let mut counts = vec![0.0f64; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
            let mut suffix_cx = vec![0.0; n + 1];
            let mut suffix_c = vec![0.0; n + 1];
            for i in (0..n).rev() {
                suffix_cx[i] = suffix_cx[i + 1] + counts[i] * table.sorted[i];
                suffix_c[i] = suffix_c[i + 1] + counts[i];
            }
            (counts, suffix_cx, suffix_c)
        };
        let (c_low, cx_low, cc_low) = resample(&low, &mut rng);
        let (c_high, cx_high, cc_high) = resample(&high, &mut rng);
        t_grid
            .iter()
            .map(|&t| {
                low.resampled_stop_loss(&c_low, &cx_low, &cc_low, t)
                    - high.resampled_stop_loss(&c_high, &cx_high, &cc_high, t)
            })
            .collect()
    });

    // One-sided lower percentile of the bootstrapped difference at each t:
    // a point is an exceedance when even that lower bound is positive.
    let lower_idx = (((1.0 - level) * bootstrap_rounds as f64).floor() as usize)
        .min(bootstrap_rounds - 1);
    let mut exceed = vec![false; t_grid.len()];
    let mut column = vec![0.0f64; bootstrap_rounds];
    for (ti, flag) in exceed.iter_mut().enumerate() {
        for (b, curve) in round_curves.iter().enumerate() {
            column[b] = curve[ti];
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite differences"));
        *flag = column[lower_idx] > 0.0;
    }

    let violation_points: Vec<f64> = t_grid
        .iter()
        .zip(&exceed)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    let has_adjacent = exceed.windows(2).any(|w| w[0] && w[1]);
    let verdict = if violation_points.is_empty() {
        Verdict::Consistent
    } else if has_adjacent {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(OrderVerdict {
        verdict,
        violation_points,
        confidence: level,
    })
}

/// How many of the largest weights the tail fit uses: min(⌈0.2·S⌉, ⌈3√S⌉).
fn tail_size(s: usize) -> usize {
    let a = (0.2 * s as f64).ceil() as usize;
    let b = (3.0 * (s as f64).sqrt()).ceil() as usize;
    a.min(b)
}

/// Fit a generalized Pareto shape to the largest weights (Zhang–Stephens
/// profile posterior mean over the transformed parameter b = k/σ, with the
/// standard shrinkage of the shape toward 1/2 at small tail counts).
pub fn pareto_khat(weights: &[f64]) -> Result<KhatResult> {
    let s = weights.len();
    if s < 25 {
        return Err(Error::InsufficientData {
            what: "Pareto tail fit",
            needed: 25,
            have: s,
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "weights",
            message: "tail fitting needs finite nonnegative weights".into(),
        });
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("weights must not contain NaN"));
    // Weights that agree to a relative 1e-12 are constant for all tail
    // purposes: the remaining spread is arithmetic rounding (e.g. exact
    // posterior proposals evaluated in log domain), not tail structure.
    let spread = sorted[s - 1] - sorted[0];
    if spread <= 1e-12 * sorted[s - 1].max(f64::MIN_POSITIVE) {
        return Ok(KhatResult {
            khat: f64::NEG_INFINITY,
            tail_count: 0,
            threshold: sorted[s - 1],
            degenerate: true,
        });
    }
    let m = tail_size(s);
    let threshold = sorted[s - m - 1];
    let exceedances: Vec<f64> = sorted[s - m..]
        .iter()
        .map(|x| x - threshold)
        .filter(|y| *y > 0.0)
        .collect();
    let n = exceedances.len();
    if n < 5 {
        return Err(Error::InsufficientData {
            what: "positive tail exceedances",
            needed: 5,
            have: n,
        });
    }
    let y_max = *exceedances.last().expect("nonempty tail");
    let quartile = exceedances[(n as f64 / 4.0 + 0.5).floor() as usize - 1];

    let grid_size = 30 + (n as f64).sqrt().floor() as usize;
    let mut b_grid = Vec::with_capacity(grid_size);
    let mut log_profile = Vec::with_capacity(grid_size);
    for j in 1..=grid_size {
        let b = 1.0 / y_max
            + (1.0 - (grid_size as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quartile);
        if b == 0.0 {
            continue;
        }
        let k: f64 =
            exceedances.iter().map(|y| (-b * y).ln_1p()).sum::<f64>() / n as f64;
        let log_likelihood = n as f64 * ((-b / k).ln() - k - 1.0);
        b_grid.push(b);
        log_profile.push(log_likelihood);
    }

    let max_ll = log_profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut posterior: Vec<f64> = log_profile.iter().map(|ll| (ll - max_ll).exp()).collect();
    let total: f64 = posterior.iter().sum();
    for w in &mut posterior {
        *w /= total;
    }
    // Drop negligible grid weights and renormalize, then average b.
    let cutoff = 10.0 * f64::EPSILON;
    let kept: f64 = posterior.iter().filter(|w| **w >= cutoff).sum();
    let b_post: f64 = b_grid
        .iter()
        .zip(&posterior)
        .filter(|(_, w)| **w >= cutoff)
        .map(|(b, w)| b * w / kept)
        .sum();

    let khat_raw: f64 =
        exceedances.iter().map(|y| (-b_post * y).ln_1p()).sum::<f64>() / n as f64;
    let khat = (n as f64 * khat_raw + 5.0) / (n as f64 + 10.0);
    Ok(KhatResult {
        khat,
        tail_count: n,
        threshold,
        degenerate: false,
    })
}

/// Sample mean, variance (n−1 divisor), and variance of the log sample.
pub fn variance_report(samples: &[f64]) -> Result<VarianceReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            what: "variance report",
            needed: 1,
            have: 0,
        });
    }
    if samples.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "samples",
            message: "variance reports need strictly positive finite samples".into(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let log_mean = logs.iter().sum::<f64>() / n;
    let (variance, variance_of_log) = if samples.len() >= 2 {
        (
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0),
            logs.iter()
                .map(|l| (l - log_mean) * (l - log_mean))
                .sum::<f64>()
                / (n - 1.0),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(VarianceReport {
        mean,
        variance,
        variance_of_log,
    })
}
