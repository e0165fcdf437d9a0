use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sample_in_simplex, FixedPointError};
use crate::mapspec::SimplexMap;
use crate::scalar::max_norm_dist;
use crate::simplex::BarycentricPoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ModulusKind {
    /// `|f(x) - f(y)| <= L |x - y|` in the max-norm.
    Lipschitz(f64),
    /// Pairs `(eps, delta)`: `|x - y| <= delta` implies `|f(x) - f(y)| <= eps`.
    /// Sorted by `eps`; `delta` is nondecreasing.
    Table(Vec<(f64, f64)>),
}

/// Uniform-continuity data for a map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Modulus {
    pub kind: ModulusKind,
    /// Set when the modulus was estimated from samples rather than declared.
    pub heuristic: bool,
}

impl Modulus {
    pub fn lipschitz(l: f64) -> Self {
        Self {
            kind: ModulusKind::Lipschitz(l),
            heuristic: false,
        }
    }

    pub fn try_lipschitz(l: f64) -> Result<Self, FixedPointError> {
        if !(l.is_finite() && l >= 0.0) {
            return Err(FixedPointError::InvalidModulus(format!(
                "Lipschitz constant {l} must be finite and nonnegative"
            )));
        }
        Ok(Self::lipschitz(l))
    }

    pub fn table(mut pairs: Vec<(f64, f64)>) -> Result<Self, FixedPointError> {
        if pairs.is_empty() {
            return Err(FixedPointError::InvalidModulus("empty table".into()));
        }
        if pairs
            .iter()
            .any(|&(e, d)| !(e > 0.0 && d > 0.0 && e.is_finite() && d.is_finite()))
        {
            return Err(FixedPointError::InvalidModulus(
                "table entries must be positive and finite".into(),
            ));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(FixedPointError::InvalidModulus(
                "delta must not decrease as eps grows".into(),
            ));
        }
        Ok(Self {
            kind: ModulusKind::Table(pairs),
            heuristic: false,
        })
    }

    /// Parses `eps:delta,eps:delta,...`.
    pub fn parse_table(text: &str) -> Result<Self, FixedPointError> {
        let pairs = text
            .split(',')
            .map(|item| {
                let (e, d) = item.split_once(':').ok_or_else(|| {
                    FixedPointError::InvalidModulus(format!("expected eps:delta, got '{item}'"))
                })?;
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| {
                        FixedPointError::InvalidModulus(format!("'{s}' is not a number"))
                    })
                };
                Ok((parse(e)?, parse(d)?))
            })
            .collect::<Result<Vec<_>, FixedPointError>>()?;
        Self::table(pairs)
    }

    /// Upper bound on `|f(x) - f(y)|` when `|x - y| <= d`.
    pub fn variation(&self, d: f64) -> f64 {
        match &self.kind {
            ModulusKind::Lipschitz(l) => (l * d).min(1.0),
            ModulusKind::Table(pairs) => pairs
                .iter()
                .find(|&&(_, delta)| delta >= d)
                .map_or(1.0, |&(eps, _)| eps.min(1.0)),
        }
    }

    /// Distance that keeps image differences within `eps`, if certified.
    pub fn delta(&self, eps: f64) -> Option<f64> {
        match &self.kind {
            ModulusKind::Lipschitz(l) if *l == 0.0 => Some(1.0),
            ModulusKind::Lipschitz(l) => Some(eps / l),
            ModulusKind::Table(pairs) => pairs
                .iter()
                .filter(|&&(e, _)| e <= eps)
                .map(|&(_, d)| d)
                .next_back(),
        }
    }

    /// Residual guaranteed at any point of a fully labeled cell of
    /// max-norm diameter `h` in dimension `n`: `n (h + ω(h))`.
    pub fn residual_bound(&self, n: usize, h: f64) -> f64 {
        n as f64 * (h + self.variation(h))
    }

    /// Largest mesh (up to 1) whose residual bound is below `eps`, or
    /// `None` when the modulus cannot certify `eps` at any mesh.
    pub fn mesh_for(&self, n: usize, eps: f64) -> Option<f64> {
        let ok = |h: f64| self.residual_bound(n, h) < eps;
        if ok(1.0) {
            return Some(1.0);
        }
        if let ModulusKind::Lipschitz(l) = self.kind {
            let h = eps / (n as f64 * (1.0 + l)) * (1.0 - 1e-9);
            return ok(h).then_some(h);
        }
        if !ok(f64::MIN_POSITIVE) {
            return None;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// Estimates a Lipschitz constant from random nearby pairs. The result is
/// flagged heuristic: sampling cannot certify uniform continuity.
pub fn estimate_modulus<F>(f: &F, samples: usize, seed: u64) -> Result<Modulus, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners: Vec<Vec<f64>> = (0..=n)
        .map(|k| BarycentricPoint::<f64>::corner(n, k).into_coords())
        .collect();
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let x = sample_in_simplex(&corners, &mut rng);
        let step = 10f64.powf(rng.random_range(-4.0..-1.0));
        let y: Vec<f64> = x
            .iter()
            .map(|xi| xi + step * rng.random_range(-1.0..1.0))
            .map(|v| v.max(0.0))
            .collect();
        let s: f64 = y.iter().sum();
        let y: Vec<f64> = y.into_iter().map(|v| v / s).collect();
        let d = max_norm_dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let px = BarycentricPoint::from_raw(x);
        let py = BarycentricPoint::from_raw(y);
        let fx = f.eval(&px)?;
        let fy = f.eval(&py)?;
        worst = worst.max(max_norm_dist(fx.coords(), fy.coords()) / d);
    }
    Ok(Modulus {
        kind: ModulusKind::Lipschitz(1.25 * worst.max(1e-6)),
        heuristic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::parse_map;

    #[test]
    fn lipschitz_variation_and_delta() {
        let m = Modulus::lipschitz(2.0);
        assert_eq!(m.variation(0.1), 0.2);
        assert_eq!(m.delta(0.2), Some(0.1));
        assert_eq!(m.residual_bound(2, 0.25), 2.0 * (0.25 + 0.5));
    }

    #[test]
    fn table_lookup() {
        let m = Modulus::parse_table("0.1:0.05, 0.5:0.2, 0.01:0.001").unwrap();
        assert_eq!(m.variation(0.04), 0.1);
        assert_eq!(m.variation(0.001), 0.01);
        assert_eq!(m.variation(0.5), 1.0);
        assert_eq!(m.delta(0.2), Some(0.05));
        assert_eq!(m.delta(0.001), None);
        assert!(Modulus::parse_table("0.1:0.5, 0.2:0.1").is_err());
        assert!(Modulus::parse_table("0.1").is_err());
        assert!(Modulus::parse_table("0:0.1").is_err());
    }

    #[test]
    fn mesh_meets_the_bound() {
        for m in [Modulus::lipschitz(1.0), Modulus::parse_table("0.001:0.001,0.1:0.1").unwrap()] {
            for eps in [0.5, 0.05, 0.004] {
                let h = m.mesh_for(3, eps).unwrap();
                assert!(m.residual_bound(3, h) < eps);
                assert!(m.residual_bound(3, h * 1.01) >= eps || h == 1.0);
            }
        }
        let table = Modulus::parse_table("0.001:0.001").unwrap();
        assert_eq!(table.mesh_for(3, 0.003), None);
    }

    #[test]
    fn estimate_is_flagged_and_sane() {
        let f = parse_map("rotate", 2).unwrap();
        let m = estimate_modulus(&f, 500, 1).unwrap();
        assert!(m.heuristic);
        let ModulusKind::Lipschitz(l) = m.kind else { panic!() };
        assert!((1.0..2.0).contains(&l), "{l}");
    }
}
