//! Extended real numbers: finite values plus symbolic ±∞.
//!
//! Moment computations routinely produce +∞ (heavy-tailed variances) and −∞
//! (divergent log-means). [`ExtendedReal`] carries those cases explicitly;
//! NaN is rejected at construction so it can never propagate silently.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// A real number extended with +∞ and −∞. NaN is forbidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    /// Wrap an `f64`, mapping IEEE infinities to the symbolic variants.
    ///
    /// # Panics
    /// Panics on NaN: producing NaN is a logic error in this crate.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN is not a valid extended real");
        if x == f64::INFINITY {
            ExtendedReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(x)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The value as an `f64`, with the symbolic infinities mapped to IEEE ±∞.
    pub fn as_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(x) => x,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            _ => None,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl Neg for ExtendedReal {
    type Output = ExtendedReal;
    fn neg(self) -> ExtendedReal {
        match self {
            ExtendedReal::NegInf => ExtendedReal::PosInf,
            ExtendedReal::Finite(x) => ExtendedReal::Finite(-x),
            ExtendedReal::PosInf => ExtendedReal::NegInf,
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    /// Measure-theoretic addition: finite + (−∞) = −∞, finite + ∞ = ∞.
    ///
    /// # Panics
    /// Panics on the indeterminate form ∞ + (−∞).
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        use ExtendedReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => {
                panic!("indeterminate form: (+∞) + (−∞)")
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
        }
    }
}

impl Sub for ExtendedReal {
    type Output = ExtendedReal;
    fn sub(self, rhs: ExtendedReal) -> ExtendedReal {
        self + (-rhs)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => write!(f, "-inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInf => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::ExtendedReal::{self, *};

    #[test]
    fn arithmetic_follows_measure_conventions() {
        assert_eq!(Finite(1.0) + NegInf, NegInf);
        assert_eq!(Finite(1.0) + PosInf, PosInf);
        assert_eq!(Finite(2.0) + Finite(3.0), Finite(5.0));
        assert_eq!(PosInf - Finite(1e308), PosInf);
        assert_eq!(-NegInf, PosInf);
    }

    #[test]
    #[should_panic(expected = "indeterminate")]
    fn opposite_infinities_panic() {
        let _ = PosInf + NegInf;
    }

    #[test]
    #[should_panic(expected = "NaN")]
    fn nan_is_rejected() {
        let _ = ExtendedReal::from_f64(f64::NAN);
    }

    #[test]
    fn ordering_and_display() {
        assert!(NegInf < Finite(-1e300));
        assert!(Finite(1e300) < PosInf);
        assert_eq!(PosInf.to_string(), "inf");
        assert_eq!(NegInf.to_string(), "-inf");
        assert_eq!(Finite(0.5).to_string(), "0.5");
        assert_eq!(ExtendedReal::from_f64(f64::INFINITY), PosInf);
    }
}
