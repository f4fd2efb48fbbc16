//! Monte Carlo objectives and the geometry of their tightness.
//!
//! Averaging K importance weights w_k = p(x, z_k)/q(z_k | x) inside a
//! logarithm gives the Monte Carlo objective
//!
//! L_α(Q) = E[ log Σ_k α_k w_k ],   α on the simplex,
//!
//! a lower bound on log μ = log E[w] by Jensen's inequality. This crate
//! studies when making the average "bigger" — more particles, less
//! dependence between them, more even coefficients — provably tightens the
//! bound, and ships the estimators, exact finite-case oracles, and
//! diagnostics needed to check those orderings empirically:
//!
//! * [`models`] — scalar weight distributions with closed-form means,
//!   log-means, and quantiles, including heavy-tailed families whose
//!   variance (or even log-mean) is infinite.
//! * [`simplex`] — coefficient vectors, the majorization preorder, and
//!   chains interpolating between uniform and point-mass weights.
//! * [`samplers`] — joint weight samplers: i.i.d., exchangeable mixtures,
//!   Gaussian copulas with tunable correlation, antithetic pairs, and
//!   deliberately identically-distributed-but-dependent counterexamples.
//! * [`mco`] — the objective estimators, exact finite-support evaluation,
//!   gap reports against log μ, and particle-count sweeps.
//! * [`diagnostics`] — stop-loss curves and a bootstrap convex-order test,
//!   generalized-Pareto tail shape estimation, variance summaries.
//! * [`lvm`] — exactly solvable latent-variable models (linear-Gaussian and
//!   finite-alphabet) for calibrating importance-weighted bounds end to
//!   end, with exact expected f-divergences of the plug-in estimator.
//!
//! Everything that consumes randomness takes a [`rng::RandomStream`];
//! results are bit-identical for a fixed root seed regardless of thread
//! count, because work is split over deterministic substreams and reduced
//! in index order (see [`exec`]).

pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod extreal;
pub mod lvm;
pub mod mco;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod simplex;
pub mod special;
pub mod stable;

pub use diagnostics::{
    convex_order_test, default_t_grid, pareto_khat, stop_loss_curve, variance_report, KhatResult,
    OrderVerdict, StopLossCurve, VarianceReport, Verdict,
};
pub use error::{Error, Result};
pub use extreal::ExtendedReal;
pub use lvm::{
    expected_f_divergence, iwvi_gap_curve, khat_per_observation, log_weight, DiscreteLvm,
    FDivergence, LatentModel, LinearGaussianLvm, Point, Proposal, ProposalBuilder,
};
pub use mco::{
    gap, mco_exact_finite, mco_uniform, mco_weighted, mco_weighted_on, monotonicity_curve,
    natural_weight_averages, second_order_gap, GapCurvePoint, GapReport, McoEstimate,
};
pub use models::{
    heuristic_equivalence_check, match_lognormal_to_invgamma, EquivalenceReport, ScalarModel,
};
pub use rng::RandomStream;
pub use samplers::{
    exch_counterexample, sm_ordered_pair, CorrelationMatrix, JointSampler, LogWeightMatrix,
};
pub use simplex::{
    interpolation_chain, padded_uniform_chain, precedes_m, sample_dirichlet, SimplexVector,
    SIMPLEX_TOLERANCE,
};
