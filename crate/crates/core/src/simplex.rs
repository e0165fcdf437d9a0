use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointError {
    #[error("expected {expected} coordinates, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("point is not on the simplex: {reason}")]
    NotOnSimplex { reason: String },
}

/// A point of the n-simplex in barycentric coordinates.
///
/// Coordinates are nonnegative and sum to one (exactly for rational
/// scalars, after renormalization for floats).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BarycentricPoint<S> {
    coords: Vec<S>,
}

impl<S: Scalar> BarycentricPoint<S> {
    /// Validates `coords` as a point of the `n`-simplex.
    ///
    /// Float inputs may carry tiny negative entries or a sum slightly off
    /// one; these are clamped and renormalized. Rational inputs must be
    /// exact already.
    pub fn new(n: usize, coords: Vec<S>) -> Result<Self, PointError> {
        if coords.len() != n + 1 {
            return Err(PointError::WrongArity {
                expected: n + 1,
                got: coords.len(),
            });
        }
        let floor = -S::negative_slack();
        if let Some(bad) = coords.iter().find(|c| **c < floor) {
            return Err(PointError::NotOnSimplex {
                reason: format!("negative coordinate {bad}"),
            });
        }
        let sum = coords.iter().fold(S::zero(), |a, c| a + c.clone());
        if (sum.clone() - S::one()).abs() > S::sum_slack() {
            return Err(PointError::NotOnSimplex {
                reason: format!("coordinates sum to {sum}"),
            });
        }
        if S::EXACT {
            return Ok(Self { coords });
        }
        let clamped: Vec<S> = coords
            .into_iter()
            .map(|c| S::max_of(c, S::zero()))
            .collect();
        let total = clamped.iter().fold(S::zero(), |a, c| a + c.clone());
        Ok(Self {
            coords: clamped.into_iter().map(|c| c / total.clone()).collect(),
        })
    }

    /// Builds a point without validation. Callers guarantee the invariant.
    pub(crate) fn from_raw(coords: Vec<S>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    /// The barycenter of the n-simplex.
    pub fn barycenter(n: usize) -> Self {
        Self {
            coords: vec![S::from_ratio(1, n as i64 + 1); n + 1],
        }
    }

    /// The corner `e_k`.
    pub fn corner(n: usize, k: usize) -> Self {
        let mut coords = vec![S::zero(); n + 1];
        coords[k] = S::one();
        Self { coords }
    }

    /// Indices with a positive coordinate.
    pub fn carrier(&self) -> Vec<usize> {
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > S::zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_f64(&self) -> BarycentricPoint<f64> {
        BarycentricPoint {
            coords: self.coords.iter().map(Scalar::to_f64).collect(),
        }
    }
}

/// Convenience constructor: the dimension is taken from the input length.
pub fn make_point<S: Scalar>(coords: Vec<S>) -> Result<BarycentricPoint<S>, PointError> {
    if coords.len() < 2 {
        return Err(PointError::WrongArity {
            expected: 2,
            got: coords.len(),
        });
    }
    let n = coords.len() - 1;
    BarycentricPoint::new(n, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn unit_vector_is_a_corner() {
        let p = BarycentricPoint::new(2, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, BarycentricPoint::corner(2, 0));
        assert_eq!(p.carrier(), vec![0]);
    }

    #[test]
    fn thirds_are_the_barycenter() {
        let third = Rational::from_ratio(1, 3);
        let p = BarycentricPoint::new(2, vec![third.clone(), third.clone(), third]).unwrap();
        assert_eq!(p, BarycentricPoint::barycenter(2));
    }

    #[test]
    fn off_simplex_sum_is_rejected() {
        let err = BarycentricPoint::new(2, vec![0.5, 0.6, 0.1]).unwrap_err();
        assert!(matches!(err, PointError::NotOnSimplex { .. }));
    }

    #[test]
    fn arity_is_checked() {
        let err = BarycentricPoint::new(2, vec![0.5, 0.5]).unwrap_err();
        assert_eq!(err, PointError::WrongArity { expected: 3, got: 2 });
        assert!(make_point(vec![1.0]).is_err());
    }

    #[test]
    fn tiny_float_noise_is_cleaned() {
        let p = BarycentricPoint::new(2, vec![-1e-13, 0.5, 0.5 + 1e-13]).unwrap();
        assert_eq!(p.coords()[0], 0.0);
        let sum: f64 = p.coords().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!(BarycentricPoint::new(2, vec![-1e-6, 0.5, 0.5 + 1e-6]).is_err());
    }

    #[test]
    fn rationals_must_be_exact() {
        let r = |a, b| Rational::from_ratio(a, b);
        assert!(BarycentricPoint::new(1, vec![r(1, 3), r(2, 3)]).is_ok());
        assert!(BarycentricPoint::new(1, vec![r(1, 3), r(2, 3) + r(1, 1_000_000_000_000)]).is_err());
    }
}
