//! Joint distributions of K positive weights with a common marginal mean.
//!
//! Five dependence regimes are covered:
//!
//! * [`JointSampler::Iid`] — independent draws from one marginal;
//! * [`JointSampler::ExchangeableMixture`] — draw a mixture component once
//!   per row, then i.i.d. within the row (exchangeable but dependent);
//! * [`JointSampler::GaussianCopula`] — arbitrary marginals coupled through
//!   a correlated Gaussian vector (negative or positive dependence);
//! * [`JointSampler::Antithetic`] — the countermonotone pair at K = 2, the
//!   most negatively dependent coupling for fixed marginals;
//! * [`JointSampler::RepeatPattern`] — rows built by indexing a small set of
//!   base draws, e.g. (x, y, x): identically distributed but not
//!   exchangeable once an index repeats.
//!
//! Sampling is pure: row r of the output is a function of the sampler, the
//! stream key, and r alone, so results are independent of evaluation order
//! and thread count.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;
use crate::models::{LnSampler, ScalarModel};
use crate::rng::RandomStream;
use crate::special::normal_cdf;

/// Relative tolerance when checking that base models share one mean.
const MEAN_MATCH_TOLERANCE: f64 = 1e-10;

/// A correlation matrix together with a factor B satisfying B·Bᵀ = C,
/// used to color standard normal vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    equicorrelation: Option<f64>,
}

impl CorrelationMatrix {
    /// Validate symmetry, unit diagonal, and positive semidefiniteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let k = matrix.nrows();
        if k == 0 || matrix.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k.max(1),
                got: matrix.ncols(),
            });
        }
        for i in 0..k {
            if (matrix[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::NotPositiveDefinite {
                    kind: "semi",
                    message: format!("diagonal entry ({i},{i}) = {} is not 1", matrix[(i, i)]),
                });
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite {
                        kind: "semi",
                        message: format!("matrix is not symmetric at ({i},{j})"),
                    });
                }
            }
        }
        let eigen = nalgebra::SymmetricEigen::new(matrix.clone());
        let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::NotPositiveDefinite {
                kind: "semi",
                message: format!("smallest eigenvalue {min_eig} is negative"),
            });
        }
        let sqrt_vals = DVector::from_iterator(
            k,
            eigen.eigenvalues.iter().map(|l| l.max(0.0).sqrt()),
        );
        let factor = &eigen.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);

        let mut equicorrelation = None;
        if k >= 2 {
            let rho = matrix[(0, 1)];
            let all_equal = (0..k).all(|i| {
                (0..k).all(|j| i == j || (matrix[(i, j)] - rho).abs() <= 1e-12)
            });
            if all_equal {
                equicorrelation = Some(rho);
            }
        } else {
            equicorrelation = Some(0.0);
        }
        Ok(Self {
            matrix,
            factor,
            equicorrelation,
        })
    }

    /// The K×K matrix with 1 on the diagonal and ρ everywhere else;
    /// requires ρ ∈ [−1/(K−1), 1] for positive semidefiniteness.
    pub fn equicorrelated(k: usize, rho: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                message: "need at least one coordinate".into(),
            });
        }
        let lower = if k >= 2 { -1.0 / (k as f64 - 1.0) } else { 0.0 };
        if k >= 2 && !(rho >= lower - 1e-15 && rho <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                message: format!(
                    "equicorrelation must lie in [{lower}, 1] for K = {k}, got {rho}"
                ),
            });
        }
        let matrix = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho });
        Self::new(matrix)
    }

    /// Matrix dimension K.
    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    /// The common off-diagonal value, when the matrix is equicorrelated.
    pub fn equicorrelation(&self) -> Option<f64> {
        self.equicorrelation
    }

    /// Borrow the correlation matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// A joint law of K strictly positive weights sharing one marginal mean.
#[derive(Debug, Clone, PartialEq)]
pub enum JointSampler {
    /// K independent copies of `marginal`.
    Iid { marginal: ScalarModel, k: usize },
    /// Pick a component by its probability once per row, then draw the row
    /// i.i.d. from it (exchangeable, dependent across coordinates).
    ExchangeableMixture {
        components: Vec<(ScalarModel, f64)>,
        k: usize,
    },
    /// Correlated Gaussian vector pushed through Φ and the marginal quantile.
    GaussianCopula {
        marginal: ScalarModel,
        correlation: CorrelationMatrix,
    },
    /// Countermonotone pair (F⁻¹(U), F⁻¹(1−U)); K is fixed to 2.
    Antithetic { marginal: ScalarModel },
    /// Row k equals the base draw at `pattern[k]`; repeated indices create
    /// identically distributed but non-exchangeable rows.
    RepeatPattern {
        base_models: Vec<ScalarModel>,
        pattern: Vec<usize>,
    },
}

fn require_finite_positive_mean(model: &ScalarModel) -> Result<f64> {
    match model.mean().finite() {
        Some(m) if m > 0.0 => Ok(m),
        _ => Err(Error::NotFinite {
            what: "marginal mean (weight samplers need a finite positive mean)",
        }),
    }
}

fn require_quantile_support(model: &ScalarModel, context: &'static str) -> Result<()> {
    if matches!(model, ScalarModel::LogStable { .. }) {
        return Err(Error::InvalidParameter {
            name: "marginal",
            message: format!("{context} requires a marginal with a quantile function; the log-stable family has none"),
        });
    }
    Ok(())
}

impl JointSampler {
    /// K independent copies of `marginal`.
    pub fn iid(marginal: ScalarModel, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                message: "need at least one weight per row".into(),
            });
        }
        require_finite_positive_mean(&marginal)?;
        Ok(Self::Iid { marginal, k })
    }

    /// Scale mixture: component drawn once per row with the given
    /// probabilities, then K i.i.d. draws from it.
    pub fn exchangeable_mixture(components: Vec<(ScalarModel, f64)>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                message: "need at least one weight per row".into(),
            });
        }
        if components.is_empty() {
            return Err(Error::InvalidParameter {
                name: "components",
                message: "need at least one mixture component".into(),
            });
        }
        let mut total = 0.0;
        for (model, p) in &components {
            require_finite_positive_mean(model)?;
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "components",
                    message: format!("component probabilities must be nonnegative, got {p}"),
                });
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "components",
                message: format!("component probabilities sum to {total}, expected 1"),
            });
        }
        Ok(Self::ExchangeableMixture { components, k })
    }

    /// Gaussian copula with an arbitrary correlation matrix.
    pub fn gaussian_copula(marginal: ScalarModel, correlation: CorrelationMatrix) -> Result<Self> {
        require_finite_positive_mean(&marginal)?;
        require_quantile_support(&marginal, "the Gaussian copula transform")?;
        Ok(Self::GaussianCopula {
            marginal,
            correlation,
        })
    }

    /// Gaussian copula with the equicorrelated matrix at the given ρ.
    pub fn equicorrelated_copula(marginal: ScalarModel, k: usize, rho: f64) -> Result<Self> {
        Self::gaussian_copula(marginal, CorrelationMatrix::equicorrelated(k, rho)?)
    }

    /// Countermonotone pair at K = 2.
    pub fn antithetic(marginal: ScalarModel) -> Result<Self> {
        require_finite_positive_mean(&marginal)?;
        require_quantile_support(&marginal, "antithetic coupling")?;
        Ok(Self::Antithetic { marginal })
    }

    /// Rows assembled by indexing fresh base draws with `pattern`.
    pub fn repeat_pattern(base_models: Vec<ScalarModel>, pattern: Vec<usize>) -> Result<Self> {
        if base_models.is_empty() || pattern.is_empty() {
            return Err(Error::InvalidParameter {
                name: "pattern",
                message: "need at least one base model and one pattern index".into(),
            });
        }
        for &idx in &pattern {
            if idx >= base_models.len() {
                return Err(Error::InvalidParameter {
                    name: "pattern",
                    message: format!(
                        "index {idx} is out of range for {} base models",
                        base_models.len()
                    ),
                });
            }
        }
        let first_mean = require_finite_positive_mean(&base_models[0])?;
        for model in &base_models[1..] {
            let m = require_finite_positive_mean(model)?;
            if (m - first_mean).abs() > MEAN_MATCH_TOLERANCE * first_mean.abs().max(m.abs()) {
                return Err(Error::MeanMismatch {
                    mean_a: first_mean,
                    mean_b: m,
                    limit: MEAN_MATCH_TOLERANCE,
                    context: "repeat-pattern base models must share one mean",
                });
            }
        }
        Ok(Self::RepeatPattern {
            base_models,
            pattern,
        })
    }

    /// Number of weights per row.
    pub fn k(&self) -> usize {
        match self {
            Self::Iid { k, .. } | Self::ExchangeableMixture { k, .. } => *k,
            Self::GaussianCopula { correlation, .. } => correlation.k(),
            Self::Antithetic { .. } => 2,
            Self::RepeatPattern { pattern, .. } => pattern.len(),
        }
    }

    /// log μ, the common log marginal mean of every coordinate.
    pub fn marginal_log_mean_of_weights(&self) -> Result<f64> {
        match self {
            Self::Iid { marginal, .. }
            | Self::GaussianCopula { marginal, .. }
            | Self::Antithetic { marginal } => Ok(require_finite_positive_mean(marginal)?.ln()),
            Self::ExchangeableMixture { components, .. } => {
                let mut mixture_mean = 0.0;
                for (model, p) in components {
                    mixture_mean += p * require_finite_positive_mean(model)?;
                }
                Ok(mixture_mean.ln())
            }
            Self::RepeatPattern { base_models, .. } => {
                let first = require_finite_positive_mean(&base_models[0])?;
                for model in &base_models[1..] {
                    let m = require_finite_positive_mean(model)?;
                    if (m - first).abs() > MEAN_MATCH_TOLERANCE * first.abs().max(m.abs()) {
                        return Err(Error::MeanMismatch {
                            mean_a: first,
                            mean_b: m,
                            limit: MEAN_MATCH_TOLERANCE,
                            context: "repeat-pattern base models must share one mean",
                        });
                    }
                }
                Ok(first.ln())
            }
        }
    }

    /// Whether permutation invariance of the joint law is certified by the
    /// construction. Conservative for [`Self::RepeatPattern`]: any repeated
    /// index reports false, as does any pair of distinct referenced models.
    pub fn is_exchangeable(&self) -> bool {
        match self {
            Self::Iid { .. } | Self::ExchangeableMixture { .. } | Self::Antithetic { .. } => true,
            Self::GaussianCopula { correlation, .. } => {
                correlation.equicorrelation().is_some()
            }
            Self::RepeatPattern {
                base_models,
                pattern,
            } => {
                let mut seen = vec![false; base_models.len()];
                for &idx in pattern {
                    if seen[idx] {
                        return false;
                    }
                    seen[idx] = true;
                }
                pattern
                    .iter()
                    .all(|&idx| base_models[idx] == base_models[pattern[0]])
            }
        }
    }

    /// Human-readable description recorded as matrix provenance.
    pub fn descriptor(&self) -> String {
        match self {
            Self::Iid { marginal, k } => format!("iid({}, K={k})", marginal.family_name()),
            Self::ExchangeableMixture { components, k } => format!(
                "exchangeable-mixture({} components, K={k})",
                components.len()
            ),
            Self::GaussianCopula {
                marginal,
                correlation,
            } => match correlation.equicorrelation() {
                Some(rho) => format!(
                    "gaussian-copula({}, K={}, rho={rho})",
                    marginal.family_name(),
                    correlation.k()
                ),
                None => format!(
                    "gaussian-copula({}, K={}, general correlation)",
                    marginal.family_name(),
                    correlation.k()
                ),
            },
            Self::Antithetic { marginal } => {
                format!("antithetic({})", marginal.family_name())
            }
            Self::RepeatPattern {
                base_models,
                pattern,
            } => format!(
                "repeat-pattern({} base models, pattern {:?})",
                base_models.len(),
                pattern
            ),
        }
    }

    /// Draw `reps` rows of (log w₁, …, log w_K). Row r depends only on the
    /// sampler, the stream key, and r, so two calls with equal-keyed streams
    /// return identical matrices and row generation parallelizes freely.
    pub fn sample_log_weights(
        &self,
        stream: &RandomStream,
        reps: usize,
    ) -> Result<LogWeightMatrix> {
        if reps == 0 {
            return Err(Error::InvalidParameter {
                name: "reps",
                message: "need at least one replication".into(),
            });
        }
        let k = self.k();
        let rows: Vec<Vec<f64>> = match self {
            Self::Iid { marginal, .. } => {
                let sampler = marginal.ln_sampler();
                exec::map_indexed(reps, |r| {
                    let mut rng = stream.substream(r as u64);
                    (0..k).map(|_| sampler.sample_ln(&mut rng)).collect()
                })
            }
            Self::ExchangeableMixture { components, .. } => {
                let samplers: Vec<LnSampler> =
                    components.iter().map(|(m, _)| m.ln_sampler()).collect();
                let cum: Vec<f64> = components
                    .iter()
                    .scan(0.0, |acc, (_, p)| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect();
                exec::map_indexed(reps, |r| {
                    let mut rng = stream.substream(r as u64);
                    let u: f64 = rand_distr::OpenClosed01.sample(&mut rng);
                    let idx = cum.partition_point(|&c| c < u).min(samplers.len() - 1);
                    (0..k).map(|_| samplers[idx].sample_ln(&mut rng)).collect()
                })
            }
            Self::GaussianCopula {
                marginal,
                correlation,
            } => {
                let factor = &correlation.factor;
                let log_normal_params = match marginal {
                    ScalarModel::LogNormal { location, scale } => Some((*location, *scale)),
                    _ => None,
                };
                exec::map_indexed(reps, |r| {
                    let mut rng = stream.substream(r as u64);
                    let z = DVector::from_iterator(
                        k,
                        (0..k).map(|_| {
                            let v: f64 = StandardNormal.sample(&mut rng);
                            v
                        }),
                    );
                    let y = factor * z;
                    match log_normal_params {
                        // Φ then quantile cancel exactly for a log-normal
                        // marginal: log w = location + scale·y.
                        Some((location, scale)) => {
                            y.iter().map(|yi| location + scale * yi).collect()
                        }
                        None => y
                            .iter()
                            .map(|yi| {
                                let u = normal_cdf(*yi)
                                    .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                                marginal
                                    .quantile(u)
                                    .expect("quantile support was validated")
                                    .max(f64::MIN_POSITIVE)
                                    .ln()
                            })
                            .collect(),
                    }
                })
            }
            Self::Antithetic { marginal } => {
                let log_normal_params = match marginal {
                    ScalarModel::LogNormal { location, scale } => Some((*location, *scale)),
                    _ => None,
                };
                exec::map_indexed(reps, |r| {
                    let mut rng = stream.substream(r as u64);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    match log_normal_params {
                        Some((location, scale)) => {
                            vec![location + scale * z, location - scale * z]
                        }
                        None => {
                            let u1 = normal_cdf(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                            let u2 =
                                normal_cdf(-z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                            vec![
                                marginal
                                    .quantile(u1)
                                    .expect("quantile support was validated")
                                    .max(f64::MIN_POSITIVE)
                                    .ln(),
                                marginal
                                    .quantile(u2)
                                    .expect("quantile support was validated")
                                    .max(f64::MIN_POSITIVE)
                                    .ln(),
                            ]
                        }
                    }
                })
            }
            Self::RepeatPattern {
                base_models,
                pattern,
            } => {
                let samplers: Vec<LnSampler> =
                    base_models.iter().map(|m| m.ln_sampler()).collect();
                exec::map_indexed(reps, |r| {
                    let mut rng = stream.substream(r as u64);
                    let draws: Vec<f64> =
                        samplers.iter().map(|s| s.sample_ln(&mut rng)).collect();
                    pattern.iter().map(|&idx| draws[idx]).collect()
                })
            }
        };

        let mut entries = Vec::with_capacity(reps * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            entries.extend(row);
        }
        debug_assert!(
            entries.iter().all(|e| e.is_finite()),
            "log-weights must be finite"
        );
        Ok(LogWeightMatrix {
            entries,
            reps,
            k,
            provenance: self.descriptor(),
            root_key: stream.key(),
        })
    }
}

/// Row-major matrix of log-weights: `reps` rows of K entries each, tagged
/// with the sampler description and root stream key that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightMatrix {
    entries: Vec<f64>,
    reps: usize,
    k: usize,
    provenance: String,
    root_key: u64,
}

impl LogWeightMatrix {
    /// Number of replications (rows).
    pub fn reps(&self) -> usize {
        self.reps
    }

    /// Number of weights per row.
    pub fn k(&self) -> usize {
        self.k
    }

    /// One replication's log-weights.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.k..(r + 1) * self.k]
    }

    /// Copy of column `c` across replications.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.reps).map(|r| self.entries[r * self.k + c]).collect()
    }

    /// Sampler description recorded at creation.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Root stream key recorded at creation.
    pub fn root_key(&self) -> u64 {
        self.root_key
    }
}

/// Two equicorrelated copula samplers with one marginal, ordered by
/// dependence: the lower-ρ member is the more negatively dependent one.
/// For Gaussian copulas with identical marginals, componentwise ordering of
/// the correlation matrices orders the joint laws in the supermodular sense,
/// which is what makes this pair a valid dependence-comparison instrument.
pub fn sm_ordered_pair(
    marginal: &ScalarModel,
    k: usize,
    rho_low: f64,
    rho_high: f64,
) -> Result<(JointSampler, JointSampler)> {
    if !(rho_low <= rho_high) {
        return Err(Error::InvalidParameter {
            name: "rho",
            message: format!("need rho_low <= rho_high, got {rho_low} > {rho_high}"),
        });
    }
    let low = JointSampler::equicorrelated_copula(marginal.clone(), k, rho_low)?;
    let high = JointSampler::equicorrelated_copula(marginal.clone(), k, rho_high)?;
    Ok((low, high))
}

/// The identically-distributed-but-not-exchangeable counterexample pair:
/// rows (x, y) at K = 2 versus rows (x, y, x) at K = 3, with x, y i.i.d.
/// draws from `atom_model`.
pub fn exch_counterexample(atom_model: &ScalarModel) -> Result<(JointSampler, JointSampler)> {
    let two = JointSampler::repeat_pattern(
        vec![atom_model.clone(), atom_model.clone()],
        vec![0, 1],
    )?;
    let three = JointSampler::repeat_pattern(
        vec![atom_model.clone(), atom_model.clone()],
        vec![0, 1, 0],
    )?;
    Ok((two, three))
}
