//! Estimation of log-average-weight objectives and their gaps.
//!
//! For a joint weight law Q with common marginal mean μ and a coefficient
//! vector α on the simplex, the objective is
//!
//! ```text
//! L_α(Q) = E_Q[ log Σ_k α_k w_k ]  ≤  log μ        (Jensen)
//! ```
//!
//! with the uniform-coefficient special case L_K(Q) = E[log((1/K)Σ w_k)].
//! The gap log μ − L_α(Q) is the quantity the rest of the crate orders:
//! larger K (exchangeable Q), more negative dependence, and more spread-out
//! α all shrink it.
//!
//! Estimates average per-replication values of log Σ α_k w_k, computed by
//! log-sum-exp so weights spanning hundreds of orders of magnitude are safe.
//! Replications map over independent substreams and are reduced in index
//! order, so results are bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::exec;
use crate::models::ScalarModel;
use crate::rng::RandomStream;
use crate::samplers::{JointSampler, LogWeightMatrix};
use crate::simplex::SimplexVector;

/// Monte Carlo estimate of one objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct McoEstimate {
    /// Mean of the per-replication values of log Σ α_k w_k, in nats.
    pub value: f64,
    /// Sample standard deviation of those values divided by √reps;
    /// infinite when reps = 1.
    pub std_error: f64,
    /// Number of replications averaged.
    pub reps: usize,
}

impl McoEstimate {
    /// Aggregate per-replication values in index order.
    pub(crate) fn from_values(values: &[f64]) -> Self {
        let reps = values.len();
        let mean = values.iter().sum::<f64>() / reps as f64;
        let std_error = if reps >= 2 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (reps as f64 - 1.0)).sqrt() / (reps as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            value: mean,
            std_error,
            reps,
        }
    }
}

/// An estimate set against the exact log marginal mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// log μ, the exact upper bound on the objective.
    pub log_mu: f64,
    /// The estimate being compared.
    pub mco: McoEstimate,
    /// log μ − estimate; nonnegative in expectation.
    pub gap: f64,
    /// 3·std_error, the half-width used in every monotonicity comparison.
    pub gap_ci_halfwidth: f64,
}

/// One point of a K-sweep: the estimate and its gap at a given K.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCurvePoint {
    pub k: usize,
    pub estimate: McoEstimate,
    pub gap: GapReport,
}

/// log Σ_k α_k·exp(row_k) by log-sum-exp; `ln_alpha` entries of −∞ (zero
/// coefficients) are skipped.
pub(crate) fn weighted_log_average(ln_alpha: &[f64], row: &[f64]) -> f64 {
    debug_assert_eq!(ln_alpha.len(), row.len());
    let mut max = f64::NEG_INFINITY;
    for (la, x) in ln_alpha.iter().zip(row) {
        if la.is_finite() {
            max = max.max(la + x);
        }
    }
    debug_assert!(max.is_finite(), "at least one coefficient is positive");
    let mut sum = 0.0;
    for (la, x) in ln_alpha.iter().zip(row) {
        if la.is_finite() {
            sum += (la + x - max).exp();
        }
    }
    max + sum.ln()
}

/// Estimate L_α from an already-sampled weight matrix (the common-random-
/// numbers path: evaluating several α on one matrix pairs their noise, which
/// shrinks the variance of estimated *differences*).
pub fn mco_weighted_on(matrix: &LogWeightMatrix, alpha: &SimplexVector) -> Result<McoEstimate> {
    if alpha.len() != matrix.k() {
        return Err(Error::DimensionMismatch {
            expected: matrix.k(),
            got: alpha.len(),
        });
    }
    let ln_alpha: Vec<f64> = alpha.coefficients().iter().map(|a| a.ln()).collect();
    let values = exec::map_indexed(matrix.reps(), |r| {
        weighted_log_average(&ln_alpha, matrix.row(r))
    });
    Ok(McoEstimate::from_values(&values))
}

/// Per-replication values of R_α = Σ_k α_k w_k in the natural domain — the
/// quantity whose convex-order behaviour the objective tracks. Row order is
/// preserved, so the output is reproducible for a fixed matrix.
pub fn natural_weight_averages(
    matrix: &LogWeightMatrix,
    alpha: &SimplexVector,
) -> Result<Vec<f64>> {
    if alpha.len() != matrix.k() {
        return Err(Error::DimensionMismatch {
            expected: matrix.k(),
            got: alpha.len(),
        });
    }
    let ln_alpha: Vec<f64> = alpha.coefficients().iter().map(|a| a.ln()).collect();
    Ok(exec::map_indexed(matrix.reps(), |r| {
        weighted_log_average(&ln_alpha, matrix.row(r)).exp()
    }))
}

/// Estimate L_α(Q) with `reps` independent replications.
pub fn mco_weighted(
    sampler: &JointSampler,
    alpha: &SimplexVector,
    reps: usize,
    stream: &RandomStream,
) -> Result<McoEstimate> {
    if reps < 2 {
        return Err(Error::InvalidParameter {
            name: "reps",
            message: format!("need at least 2 replications for a standard error, got {reps}"),
        });
    }
    let matrix = sampler.sample_log_weights(stream, reps)?;
    mco_weighted_on(&matrix, alpha)
}

/// Estimate L_K(Q) = L_α(Q) at uniform α; `k` must match the sampler width.
pub fn mco_uniform(
    sampler: &JointSampler,
    k: usize,
    reps: usize,
    stream: &RandomStream,
) -> Result<McoEstimate> {
    if k != sampler.k() {
        return Err(Error::DimensionMismatch {
            expected: sampler.k(),
            got: k,
        });
    }
    mco_weighted(sampler, &SimplexVector::uniform(k)?, reps, stream)
}

/// Walk every joint atom of a finitely-supported product law.
fn for_each_product_atom(
    atom_sets: &[(&[f64], &[f64])],
    mut visit: impl FnMut(&[f64], f64),
) {
    let m = atom_sets.len();
    let mut idx = vec![0usize; m];
    let mut draws = vec![0.0f64; m];
    loop {
        let mut prob = 1.0;
        for (j, &slot) in idx.iter().enumerate() {
            let (atoms, probs) = atom_sets[j];
            prob *= probs[slot];
            draws[j] = atoms[slot];
        }
        visit(&draws, prob);
        // odometer increment
        let mut j = 0;
        loop {
            if j == m {
                return;
            }
            idx[j] += 1;
            if idx[j] < atom_sets[j].0.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn finite_support_parts(model: &ScalarModel) -> Result<(&[f64], &[f64])> {
    match model {
        ScalarModel::FiniteSupport { atoms, probs } => Ok((atoms, probs)),
        other => Err(Error::EnumerationUnsupported {
            reason: format!(
                "exact enumeration needs finite-support base models, got {}",
                other.family_name()
            ),
        }),
    }
}

const ENUMERATION_LIMIT: f64 = 1e6;

fn check_support_budget(sizes: impl Iterator<Item = usize>) -> Result<()> {
    let total: f64 = sizes.map(|s| s as f64).product();
    if total > ENUMERATION_LIMIT {
        return Err(Error::SupportOverflow {
            size: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Exact L_α(Q) by exhausting the joint support of a finitely-supported
/// sampler. Supports i.i.d., repeat-pattern, and exchangeable-mixture
/// samplers; the joint support may not exceed 10⁶ atoms.
pub fn mco_exact_finite(sampler: &JointSampler, alpha: &SimplexVector) -> Result<f64> {
    if alpha.len() != sampler.k() {
        return Err(Error::DimensionMismatch {
            expected: sampler.k(),
            got: alpha.len(),
        });
    }
    let a = alpha.coefficients();
    match sampler {
        JointSampler::Iid { marginal, k } => {
            let (atoms, probs) = finite_support_parts(marginal)?;
            check_support_budget(std::iter::repeat(atoms.len()).take(*k))?;
            let sets: Vec<(&[f64], &[f64])> = vec![(atoms, probs); *k];
            let mut total = 0.0;
            for_each_product_atom(&sets, |draws, prob| {
                let s: f64 = a.iter().zip(draws).map(|(ai, wi)| ai * wi).sum();
                total += prob * s.ln();
            });
            Ok(total)
        }
        JointSampler::RepeatPattern {
            base_models,
            pattern,
        } => {
            let parts: Vec<(&[f64], &[f64])> = base_models
                .iter()
                .map(finite_support_parts)
                .collect::<Result<_>>()?;
            check_support_budget(parts.iter().map(|(atoms, _)| atoms.len()))?;
            let mut total = 0.0;
            for_each_product_atom(&parts, |draws, prob| {
                let s: f64 = a
                    .iter()
                    .zip(pattern)
                    .map(|(ai, &idx)| ai * draws[idx])
                    .sum();
                total += prob * s.ln();
            });
            Ok(total)
        }
        JointSampler::ExchangeableMixture { components, k } => {
            let mut total = 0.0;
            for (model, p) in components {
                if *p == 0.0 {
                    continue;
                }
                let component = JointSampler::iid(model.clone(), *k)?;
                total += p * mco_exact_finite(&component, alpha)?;
            }
            Ok(total)
        }
        JointSampler::GaussianCopula { .. } | JointSampler::Antithetic { .. } => {
            Err(Error::EnumerationUnsupported {
                reason: "continuous couplings (copula, antithetic) have no finite joint support"
                    .into(),
            })
        }
    }
}

/// Set an estimate against the sampler's closed-form log μ.
pub fn gap(estimate: &McoEstimate, sampler: &JointSampler) -> Result<GapReport> {
    let log_mu = sampler.marginal_log_mean_of_weights()?;
    Ok(GapReport {
        log_mu,
        gap: log_mu - estimate.value,
        gap_ci_halfwidth: 3.0 * estimate.std_error,
        mco: estimate.clone(),
    })
}

/// Sweep K: estimate L_K for each entry of `k_list`, each configuration on
/// its own substream (keyed by K) so the estimates are independent.
pub fn monotonicity_curve(
    family: impl Fn(usize) -> Result<JointSampler>,
    k_list: &[usize],
    reps: usize,
    stream: &RandomStream,
) -> Result<Vec<GapCurvePoint>> {
    let mut points = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let sampler = family(k)?;
        let sub = stream.substream(k as u64);
        let estimate = mco_uniform(&sampler, k, reps, &sub)?;
        let gap = gap(&estimate, &sampler)?;
        points.push(GapCurvePoint { k, estimate, gap });
    }
    Ok(points)
}

/// The variance heuristic for the gap of L_1: Var(R) / (2·E[R]²), the
/// second-order Taylor approximation of log μ − E[log R] around μ. Errors
/// when the variance is infinite — exactly the regime where the heuristic
/// is meaningless.
pub fn second_order_gap(model: &ScalarModel) -> Result<f64> {
    let variance = model.variance().finite().ok_or(Error::NotFinite {
        what: "variance (the second-order heuristic needs a finite variance)",
    })?;
    let mean = model.mean().finite().ok_or(Error::NotFinite {
        what: "mean (the second-order heuristic needs a finite mean)",
    })?;
    Ok(variance / (2.0 * mean * mean))
}
