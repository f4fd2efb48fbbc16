//! Probability vectors on the simplex and the majorization pre-order.
//!
//! A weight vector `a` precedes `b` (written `a ⪯ b` here) when, after
//! sorting both in decreasing order, every prefix sum of `a` is dominated by
//! the corresponding prefix sum of `b`. Under this direction the uniform
//! vector (1/K, …, 1/K) is the minimum and any point mass the maximum, so
//! "more spread out" coefficient vectors sit lower in the order.

use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Absolute tolerance for simplex membership and prefix-sum comparisons.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector {
    coefficients: Vec<f64>,
}

impl SimplexVector {
    /// Validate and wrap a coefficient vector.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                message: "simplex vectors need at least one entry".into(),
            });
        }
        let mut total = 0.0;
        for &c in &coefficients {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    message: format!("entries must be nonnegative finite reals, got {c}"),
                });
            }
            total += c;
        }
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                message: format!("entries sum to {total}, expected 1 within {SIMPLEX_TOLERANCE}"),
            });
        }
        Ok(Self { coefficients })
    }

    /// The uniform vector (1/K, …, 1/K).
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                message: "need at least one coordinate".into(),
            });
        }
        Ok(Self {
            coefficients: vec![1.0 / k as f64; k],
        })
    }

    /// The point mass on coordinate 0, padded with zeros to length K.
    pub fn point_mass(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "K",
                message: "need at least one coordinate".into(),
            });
        }
        let mut c = vec![0.0; k];
        c[0] = 1.0;
        Ok(Self { coefficients: c })
    }

    /// Number of coordinates.
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    /// There is always at least one coordinate.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Borrow the coefficients.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Prefix sums of the coefficients sorted in decreasing order.
    fn decreasing_prefix_sums(&self) -> Vec<f64> {
        let mut sorted = self.coefficients.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
        sorted
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }
}

/// Majorization test: true iff every decreasing-sorted prefix sum of `a` is
/// ≤ the corresponding prefix sum of `b` (absolute tolerance 1e-12, so ties
/// are ordered both ways — this is a pre-order, not a strict order).
pub fn precedes_m(a: &SimplexVector, b: &SimplexVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let pa = a.decreasing_prefix_sums();
    let pb = b.decreasing_prefix_sums();
    Ok(pa
        .iter()
        .zip(&pb)
        .all(|(x, y)| *x <= *y + SIMPLEX_TOLERANCE))
}

/// The chain uniform(K), (1/(K−1),…,1/(K−1),0), …, (1,0,…,0), all padded to
/// length K; consecutive entries are ordered by [`precedes_m`].
pub fn padded_uniform_chain(k: usize) -> Result<Vec<SimplexVector>> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "K",
            message: format!("the padded chain needs K >= 2, got {k}"),
        });
    }
    let mut chain = Vec::with_capacity(k);
    for m in (1..=k).rev() {
        let mut c = vec![0.0; k];
        for slot in c.iter_mut().take(m) {
            *slot = 1.0 / m as f64;
        }
        chain.push(SimplexVector::new(c)?);
    }
    Ok(chain)
}

/// Linear interpolation from uniform(K) to the point mass: v_t = (1−t)·u + t·e₁
/// for `steps` equispaced values of t in [0, 1]. Prefix sums are affine and
/// increasing in t, so consecutive vectors are ordered by [`precedes_m`].
pub fn interpolation_chain(k: usize, steps: usize) -> Result<Vec<SimplexVector>> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "K",
            message: format!("interpolation needs K >= 2, got {k}"),
        });
    }
    if steps < 2 {
        return Err(Error::InvalidParameter {
            name: "steps",
            message: format!("need at least 2 interpolation steps, got {steps}"),
        });
    }
    let uniform = 1.0 / k as f64;
    let mut chain = Vec::with_capacity(steps);
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let mut c = vec![(1.0 - t) * uniform; k];
        c[0] += t;
        chain.push(SimplexVector::new(c)?);
    }
    Ok(chain)
}

/// One draw from the symmetric Dirichlet with the given concentration.
pub fn sample_dirichlet(
    k: usize,
    concentration: f64,
    stream: &mut RandomStream,
) -> Result<SimplexVector> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "K",
            message: "need at least one coordinate".into(),
        });
    }
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(Error::InvalidParameter {
            name: "concentration",
            message: format!("must be a positive finite real, got {concentration}"),
        });
    }
    if k == 1 {
        return SimplexVector::new(vec![1.0]);
    }
    let gamma = rand_distr::Gamma::new(concentration, 1.0).expect("validated concentration");
    // Normalized independent gamma draws; regenerate in the measure-zero
    // event that every draw underflows to zero.
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(stream)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            let c: Vec<f64> = draws.iter().map(|d| d / total).collect();
            return SimplexVector::new(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_point_mass_shapes() {
        assert_eq!(SimplexVector::uniform(1).unwrap().coefficients(), &[1.0]);
        assert_eq!(
            SimplexVector::uniform(4).unwrap().coefficients(),
            &[0.25, 0.25, 0.25, 0.25]
        );
        assert_eq!(
            SimplexVector::point_mass(3).unwrap().coefficients(),
            &[1.0, 0.0, 0.0]
        );
        assert!(SimplexVector::uniform(0).is_err());
    }

    #[test]
    fn membership_is_validated() {
        assert!(SimplexVector::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err(), "sum exceeds one");
        assert!(SimplexVector::new(vec![1.5, -0.5]).is_err(), "negative entry");
        assert!(SimplexVector::new(vec![]).is_err(), "empty vector");
        assert!(
            SimplexVector::new(vec![0.5, 0.5 + 5e-13]).is_ok(),
            "tolerance admits rounding-level slack"
        );
    }

    #[test]
    fn majorization_reference_pairs() {
        let half = SimplexVector::new(vec![0.5, 0.5]).unwrap();
        let two_thirds = SimplexVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(
            precedes_m(&half, &two_thirds).unwrap(),
            "(1/2,1/2) precedes (2/3,1/3)"
        );
        assert!(
            !precedes_m(&two_thirds, &half).unwrap(),
            "the reverse direction must fail"
        );

        let third = SimplexVector::uniform(3).unwrap();
        let point = SimplexVector::point_mass(3).unwrap();
        assert!(precedes_m(&third, &point).unwrap(), "uniform precedes point mass");

        let a = SimplexVector::new(vec![0.6, 0.4]).unwrap();
        let b = SimplexVector::new(vec![0.5, 0.5]).unwrap();
        assert!(!precedes_m(&a, &b).unwrap(), "(0.6,0.4) does not precede uniform");
    }

    #[test]
    fn majorization_is_reflexive_and_permutation_invariant() {
        let a = SimplexVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let a_perm = SimplexVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert!(precedes_m(&a, &a).unwrap(), "reflexive");
        assert!(precedes_m(&a, &a_perm).unwrap(), "permutations are equivalent");
        assert!(precedes_m(&a_perm, &a).unwrap(), "both directions for permutations");
    }

    #[test]
    fn majorization_rejects_length_mismatch() {
        let a = SimplexVector::uniform(2).unwrap();
        let b = SimplexVector::uniform(3).unwrap();
        assert!(precedes_m(&a, &b).is_err());
    }

    #[test]
    fn padded_chain_matches_reference() {
        let chain = padded_uniform_chain(3).unwrap();
        assert_eq!(chain.len(), 3, "chain length equals K");
        assert_eq!(chain[0].coefficients(), &[1.0 / 3.0; 3]);
        assert_eq!(chain[1].coefficients(), &[0.5, 0.5, 0.0]);
        assert_eq!(chain[2].coefficients(), &[1.0, 0.0, 0.0]);
        for pair in chain.windows(2) {
            assert!(
                precedes_m(&pair[0], &pair[1]).unwrap(),
                "consecutive chain entries must be ordered"
            );
        }
        assert!(padded_uniform_chain(1).is_err());
    }

    #[test]
    fn interpolation_chain_matches_reference() {
        let chain = interpolation_chain(2, 3).unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[0].coefficients(), &[0.5, 0.5]);
        assert_eq!(chain[1].coefficients(), &[0.75, 0.25]);
        assert_eq!(chain[2].coefficients(), &[1.0, 0.0]);
        let long = interpolation_chain(4, 6).unwrap();
        assert_eq!(long[0].coefficients(), SimplexVector::uniform(4).unwrap().coefficients());
        for pair in long.windows(2) {
            assert!(
                precedes_m(&pair[0], &pair[1]).unwrap(),
                "interpolation steps must be ordered"
            );
        }
        assert!(interpolation_chain(2, 1).is_err());
    }

    #[test]
    fn dirichlet_draws_are_valid_and_bounded_below_by_uniform() {
        let mut stream = RandomStream::from_seed(7);
        for k in [2usize, 4, 8] {
            let uniform = SimplexVector::uniform(k).unwrap();
            for _ in 0..50 {
                let draw = sample_dirichlet(k, 1.0, &mut stream).unwrap();
                assert_eq!(draw.len(), k);
                assert!(
                    precedes_m(&uniform, &draw).unwrap(),
                    "uniform must precede every draw"
                );
                let point = SimplexVector::point_mass(k).unwrap();
                assert!(
                    precedes_m(&draw, &point).unwrap(),
                    "every draw must precede the point mass"
                );
            }
        }
    }

    #[test]
    fn high_concentration_draws_concentrate_at_uniform() {
        let mut stream = RandomStream::from_seed(8);
        let k = 4;
        let mut mad = 0.0;
        let rounds = 100;
        for _ in 0..rounds {
            let draw = sample_dirichlet(k, 1e4, &mut stream).unwrap();
            mad += draw
                .coefficients()
                .iter()
                .map(|c| (c - 0.25).abs())
                .sum::<f64>()
                / k as f64;
        }
        mad /= rounds as f64;
        assert!(
            mad < 0.01,
            "mean absolute deviation from uniform should fall below 0.01, got {mad}"
        );
    }

    #[test]
    fn mutual_precedence_implies_permutation() {
        let a = SimplexVector::new(vec![0.1, 0.6, 0.3]).unwrap();
        let b = SimplexVector::new(vec![0.3, 0.1, 0.6]).unwrap();
        assert!(precedes_m(&a, &b).unwrap() && precedes_m(&b, &a).unwrap());
        let mut sa = a.coefficients().to_vec();
        let mut sb = b.coefficients().to_vec();
        sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
        sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() <= SIMPLEX_TOLERANCE);
        }
    }
}
