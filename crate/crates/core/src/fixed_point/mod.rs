//! Approximate fixed points and their iterative refinement.
//!
//! [`approx_fixed_point`] picks the coarsest grid whose fully labeled cells
//! are guaranteed to hold an `eps`-fixed point. [`refine_fixed_point`] then
//! halves the target residual level by level, each time subdividing only a
//! small sub-simplex (a "window") around the previous iterate.

mod modulus;
mod pairs;
mod window;

use serde::Serialize;
use thiserror::Error;

pub use modulus::{estimate_modulus, Modulus, ModulusKind};
pub use pairs::{sampled_pair_infimum, sampled_pair_witness, PairSample};

use crate::grid::{cell_budget_from_env, GridError, SubdivisionGrid};
use crate::labeling::sperner_label;
use crate::mapspec::{MapError, SimplexMap};
use crate::scalar::max_norm_dist;
use crate::simplex::BarycentricPoint;
use crate::sperner::{door_walk, SpernerError, Strategy, EXHAUSTIVE_LIMIT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("map leaves the simplex at {point:?}")]
    MapRange { point: Vec<f64> },
    #[error(transparent)]
    Sperner(#[from] SpernerError),
    #[error("no sampled pair is at least {delta} apart")]
    EmptyPairSet { delta: f64 },
    #[error("not converged after {levels} levels (residual {residual:e})")]
    NotConverged { levels: usize, residual: f64 },
}

impl FixedPointError {
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, FixedPointError::Grid(GridError::ResourceLimit { .. }))
    }
}

/// `max_i |f(x)_i - x_i|`.
pub fn residual<F>(f: &F, x: &BarycentricPoint<f64>) -> Result<f64, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let fx = eval_checked(f, x.coords())?;
    Ok(max_norm_dist(&fx, x.coords()))
}

fn eval_checked<F>(f: &F, x: &[f64]) -> Result<Vec<f64>, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let y = f.eval(&BarycentricPoint::from_raw(x.to_vec()))?.into_coords();
    let sum: f64 = y.iter().sum();
    if y.len() != x.len() || y.iter().any(|v| !(*v >= -1e-9)) || (sum - 1.0).abs() > 1e-9 {
        return Err(FixedPointError::MapRange { point: x.to_vec() });
    }
    Ok(y)
}

/// Uniform sample from the simplex spanned by `corners`.
pub(crate) fn sample_in_simplex<R: rand::Rng + ?Sized>(corners: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = corners
        .iter()
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    let dim = corners[0].len();
    let mut out = vec![0.0; dim];
    for (c, wi) in corners.iter().zip(&w) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o += ci * wi / total;
        }
    }
    out
}

/// A vertex of a fully labeled cell with the smallest residual found.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ApproxFixedPoint {
    pub point: BarycentricPoint<f64>,
    pub residual: f64,
    pub cell: usize,
    pub m: usize,
    /// Residual guaranteed by the modulus on this grid, when one was given.
    pub bound: Option<f64>,
}

/// Every vertex of a grid with its image and residual.
pub(crate) struct Scan {
    pub points: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub labels: Vec<usize>,
}

pub(crate) fn scan_grid<F>(f: &F, grid: &SubdivisionGrid) -> Result<Scan, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let one = |v: usize| -> Result<(Vec<f64>, Vec<f64>), FixedPointError> {
        let p = grid.vertex_point::<f64>(v).into_coords();
        let y = eval_checked(f, &p)?;
        Ok((p, y))
    };
    #[cfg(feature = "parallel")]
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = {
        use rayon::prelude::*;
        (0..grid.num_vertices())
            .into_par_iter()
            .map(one)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.num_vertices())
        .map(one)
        .collect::<Result<_, _>>()?;
    let mut scan = Scan {
        points: Vec::with_capacity(pairs.len()),
        images: Vec::with_capacity(pairs.len()),
        residuals: Vec::with_capacity(pairs.len()),
        labels: Vec::with_capacity(pairs.len()),
    };
    for (p, y) in pairs {
        let label = sperner_label(&p, &y).ok_or_else(|| FixedPointError::MapRange { point: p.clone() })?;
        scan.residuals.push(max_norm_dist(&p, &y));
        scan.labels.push(label);
        scan.points.push(p);
        scan.images.push(y);
    }
    Ok(scan)
}

fn cell_is_full(grid: &SubdivisionGrid, c: usize, labels: &[usize]) -> bool {
    let mut seen = vec![false; grid.n() + 1];
    grid.cell(c).iter().all(|&v| {
        let l = labels[v as usize];
        l <= grid.n() && !std::mem::replace(&mut seen[l], true)
    })
}

fn best_vertex(grid: &SubdivisionGrid, c: usize, scan: &Scan) -> (usize, f64) {
    grid.cell(c)
        .iter()
        .map(|&v| (v as usize, scan.residuals[v as usize]))
        .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Best vertex over the fully labeled cells of `grid`.
///
/// With [`Strategy::Path`] (or `Auto` on large grids) only the cell reached
/// by the door walk is inspected.
pub fn approx_fixed_point_on_grid<F>(
    f: &F,
    grid: &SubdivisionGrid,
    strategy: Strategy,
) -> Result<ApproxFixedPoint, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    if f.dim() != grid.n() {
        return Err(MapError::Dimension {
            expected: grid.n(),
            got: f.dim(),
        }
        .into());
    }
    let scan = scan_grid(f, grid)?;
    let exhaustive = match strategy {
        Strategy::Exhaustive => true,
        Strategy::Path => false,
        Strategy::Auto => grid.num_cells() <= EXHAUSTIVE_LIMIT,
    };
    let cells: Vec<usize> = if exhaustive {
        (0..grid.num_cells())
            .filter(|&c| cell_is_full(grid, c, &scan.labels))
            .collect()
    } else {
        let lab = crate::labeling::Labeling::new(grid, scan.labels.clone())
            .expect("labels come from the grid's own vertices");
        vec![door_walk(grid, &lab)?.cell]
    };
    let mut best: Option<(usize, usize, f64)> = None;
    for c in cells {
        let (v, r) = best_vertex(grid, c, &scan);
        if best.is_none_or(|b| r < b.2) {
            best = Some((c, v, r));
        }
    }
    let (cell, v, r) = best.ok_or(SpernerError::SearchExhausted)?;
    Ok(ApproxFixedPoint {
        point: BarycentricPoint::from_raw(scan.points[v].clone()),
        residual: r,
        cell,
        m: grid.m(),
        bound: None,
    })
}

/// Smallest subdivision count `m` with `n (1/m + ω(1/m)) < eps`.
pub fn subdivision_for(n: usize, eps: f64, modulus: &Modulus) -> Option<usize> {
    let ok = |m: usize| modulus.residual_bound(n, 1.0 / m as f64) < eps;
    let mut hi = 1usize;
    while !ok(hi) {
        hi = hi.checked_mul(2)?;
        if hi as u64 > 1 << 40 {
            return None;
        }
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// An `eps`-approximate fixed point from a single global grid.
pub fn approx_fixed_point<F>(f: &F, eps: f64, modulus: &Modulus) -> Result<ApproxFixedPoint, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    approx_fixed_point_with_budget(f, eps, modulus, cell_budget_from_env())
}

pub fn approx_fixed_point_with_budget<F>(
    f: &F,
    eps: f64,
    modulus: &Modulus,
    budget: u64,
) -> Result<ApproxFixedPoint, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FixedPointError::InvalidTolerance(eps));
    }
    let n = f.dim();
    let m = subdivision_for(n, eps, modulus).ok_or(GridError::ResourceLimit {
        n,
        m: usize::MAX,
        cells: u128::MAX,
        budget,
    })?;
    let grid = SubdivisionGrid::with_budget(n, m, budget)?;
    let mut out = approx_fixed_point_on_grid(f, &grid, Strategy::Auto)?;
    out.bound = Some(modulus.residual_bound(n, 1.0 / m as f64));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub tol: f64,
    /// Minimum separation of a non-contraction witness pair.
    pub delta_check: f64,
    /// Residual below which a cell is searched for a witness pair.
    pub witness_floor: f64,
    pub max_levels: usize,
    /// Random samples per cell in the witness search.
    pub samples: usize,
    pub seed: u64,
    /// Budget for global grids, used when a window has to grow to the
    /// whole simplex.
    pub cell_budget: u64,
    /// Upper bound on cells per window.
    pub window_cells: usize,
}

impl RefineOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            delta_check: 10.0 * tol,
            witness_floor: tol * 1e-3,
            max_levels: 200,
            samples: 48,
            seed: 0x5eed,
            cell_budget: cell_budget_from_env(),
            window_cells: 300_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FixedPointStatus {
    Converged,
    NonContractionWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub level: usize,
    /// Residual targeted at this level.
    pub eps: f64,
    /// Subdivisions per side of the grid used at this level.
    pub m: usize,
    /// Side of the window relative to the whole simplex.
    pub window: f64,
    /// Max-norm diameter of a cell.
    pub mesh: f64,
    pub point: Vec<f64>,
    pub residual: f64,
}

/// Two far-apart points that are both almost fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual_x: f64,
    pub residual_y: f64,
    pub distance: f64,
    pub delta: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FixedPointResult {
    pub status: FixedPointStatus,
    pub point: BarycentricPoint<f64>,
    pub residual: f64,
    pub trace: Vec<TraceEntry>,
    pub witness: Option<Witness>,
    /// True when the modulus driving the mesh was estimated, not declared.
    pub heuristic_modulus: bool,
}

/// Refines toward a fixed point until two consecutive iterates are within
/// `tol` and the residual is at most `tol`.
///
/// Stops early with [`FixedPointStatus::NonContractionWitness`] when a cell
/// holds two points at least `delta_check` apart whose residuals are both
/// below `witness_floor`.
pub fn refine_fixed_point<F>(
    f: &F,
    modulus: &Modulus,
    opts: &RefineOptions,
) -> Result<FixedPointResult, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    window::refine(f, modulus, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::parse_map;

    #[test]
    fn subdivision_is_minimal() {
        let m = Modulus::lipschitz(1.0);
        // n (1/m)(1 + 1) < eps  <=>  m > 2n/eps
        assert_eq!(subdivision_for(2, 0.1, &m), Some(41));
        assert_eq!(subdivision_for(1, 0.5, &m), Some(5));
        assert_eq!(subdivision_for(3, 1e-300, &m), None);
    }

    #[test]
    fn identity_has_zero_residual() {
        let f = parse_map("identity", 3).unwrap();
        for eps in [0.5, 0.1] {
            let a = approx_fixed_point(&f, eps, &Modulus::lipschitz(1.0)).unwrap();
            assert_eq!(a.residual, 0.0);
        }
    }

    #[test]
    fn rotation_meets_the_bound() {
        let f = parse_map("rotate", 2).unwrap();
        let a = approx_fixed_point(&f, 0.05, &Modulus::lipschitz(1.0)).unwrap();
        assert!(a.residual < 0.05);
        assert!(a.residual <= a.bound.unwrap());
    }

    #[test]
    fn budget_gives_resource_limit() {
        let f = parse_map("rotate", 3).unwrap();
        let err = approx_fixed_point_with_budget(&f, 1e-3, &Modulus::lipschitz(1.0), 1000).unwrap_err();
        assert!(err.is_resource_limit(), "{err:?}");
    }

    #[test]
    fn path_and_exhaustive_both_bound() {
        let f = parse_map("g0 = x1^2 + 0.1; g1 = x2; g2 = x0", 2).unwrap();
        let g = SubdivisionGrid::new(2, 40).unwrap();
        let bound = Modulus::lipschitz(2.0).residual_bound(2, 1.0 / 40.0);
        for s in [Strategy::Exhaustive, Strategy::Path] {
            let a = approx_fixed_point_on_grid(&f, &g, s).unwrap();
            assert!(a.residual <= bound, "{s:?} {}", a.residual);
        }
    }

    #[test]
    fn sampled_simplex_points_are_inside() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let corners = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.5, 0.5]];
        for _ in 0..200 {
            let p = sample_in_simplex(&corners, &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|c| *c >= 0.0));
            assert!(p[2] <= p[1] + 1e-15);
        }
    }
}
