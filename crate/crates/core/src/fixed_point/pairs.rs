use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{eval_checked, sample_in_simplex, FixedPointError};
use crate::grid::SubdivisionGrid;
use crate::mapspec::SimplexMap;
use crate::scalar::max_norm_dist;

/// The sampled pair that attains the infimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual_x: f64,
    pub residual_y: f64,
    pub distance: f64,
    /// `max(residual_x, residual_y)`.
    pub value: f64,
}

/// Over the corners of a cell, its barycenter and `samples` uniform random
/// points, finds the pair at least `delta` apart minimizing the larger of
/// the two residuals.
pub(crate) fn pair_search<F>(
    f: &F,
    corners: &[Vec<f64>],
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<Option<PairSample>, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = corners.to_vec();
    let dim = corners[0].len();
    let mut center = vec![0.0; dim];
    for c in corners {
        for (o, x) in center.iter_mut().zip(c) {
            *o += x / corners.len() as f64;
        }
    }
    points.push(center);
    points.extend((0..samples).map(|_| sample_in_simplex(corners, &mut rng)));

    let mut scored: Vec<(f64, Vec<f64>)> = points
        .into_iter()
        .map(|p| {
            let fp = eval_checked(f, &p)?;
            Ok((max_norm_dist(&fp, &p), p))
        })
        .collect::<Result<_, FixedPointError>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sorted by residual, the first j with a partner far enough below it
    // fixes the minimum of max(res_i, res_j).
    for j in 1..scored.len() {
        if let Some(i) = (0..j).find(|&i| max_norm_dist(&scored[i].1, &scored[j].1) >= delta) {
            let (ri, x) = &scored[i];
            let (rj, y) = &scored[j];
            return Ok(Some(PairSample {
                x: x.clone(),
                y: y.clone(),
                residual_x: *ri,
                residual_y: *rj,
                distance: max_norm_dist(x, y),
                value: *rj,
            }));
        }
    }
    Ok(None)
}

/// The sampled pair attaining
/// `inf { max(|f(x) - x|, |f(y) - y|) : x, y in cell, |x - y| >= delta }`.
pub fn sampled_pair_witness<F>(
    f: &F,
    grid: &SubdivisionGrid,
    cell: usize,
    delta: f64,
    samples: usize,
) -> Result<PairSample, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let corners: Vec<Vec<f64>> = grid
        .cell(cell)
        .iter()
        .map(|&v| grid.vertex_point::<f64>(v as usize).into_coords())
        .collect();
    pair_search(f, &corners, delta, samples, cell as u64)?
        .ok_or(FixedPointError::EmptyPairSet { delta })
}

/// Value of [`sampled_pair_witness`].
pub fn sampled_pair_infimum<F>(
    f: &F,
    grid: &SubdivisionGrid,
    cell: usize,
    delta: f64,
    samples: usize,
) -> Result<f64, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    sampled_pair_witness(f, grid, cell, delta, samples).map(|p| p.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::parse_map;

    #[test]
    fn identity_pairs_are_free() {
        let f = parse_map("identity", 2).unwrap();
        let g = SubdivisionGrid::new(2, 4).unwrap();
        assert_eq!(sampled_pair_infimum(&f, &g, 3, 0.2, 16).unwrap(), 0.0);
    }

    #[test]
    fn empty_when_delta_exceeds_the_cell() {
        let f = parse_map("identity", 2).unwrap();
        let g = SubdivisionGrid::new(2, 4).unwrap();
        assert_eq!(
            sampled_pair_infimum(&f, &g, 0, 0.3, 16),
            Err(FixedPointError::EmptyPairSet { delta: 0.3 })
        );
    }

    #[test]
    fn matches_brute_force_over_the_same_points() {
        let f = parse_map("g0 = x1; g1 = x2; g2 = x0", 2).unwrap();
        let g = SubdivisionGrid::new(2, 3).unwrap();
        let corners: Vec<Vec<f64>> = g
            .cell(4)
            .iter()
            .map(|&v| g.vertex_point::<f64>(v as usize).into_coords())
            .collect();
        let best = pair_search(&f, &corners, 0.1, 30, 9).unwrap().unwrap();
        assert!(best.distance >= 0.1);

        // Regenerate the same points and take the minimum over all pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = corners.clone();
        pts.push((0..3).map(|i| corners.iter().map(|c| c[i]).sum::<f64>() / 3.0).collect());
        pts.extend((0..30).map(|_| sample_in_simplex(&corners, &mut rng)));
        let res = |p: &Vec<f64>| {
            let q = eval_checked(&f, p).unwrap();
            max_norm_dist(&q, p)
        };
        let mut brute = f64::INFINITY;
        for i in 0..pts.len() {
            for j in 0..i {
                if max_norm_dist(&pts[i], &pts[j]) >= 0.1 {
                    brute = brute.min(res(&pts[i]).max(res(&pts[j])));
                }
            }
        }
        assert_eq!(best.value, brute);
    }
}
