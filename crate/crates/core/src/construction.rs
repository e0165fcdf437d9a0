//! Piecewise-affine map built from a labeling, and the exact check that its
//! fixed points sit at barycenters of fully labeled cells.
//!
//! At a vertex `v` with label `l`, the map moves `τ` of mass out of
//! coordinate `l` and spreads it evenly (`τ/n` each) over the other
//! coordinates. Elsewhere the map is extended affinely on each cell. On a
//! fully labeled cell the only fixed point is the cell's barycenter; on a
//! cell missing label `i`, coordinate `i` is pushed up by the constant
//! `τ/n`, so no point of that cell is fixed.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::fixed_point::{refine_fixed_point, FixedPointError, FixedPointStatus, Modulus, RefineOptions};
use crate::grid::SubdivisionGrid;
use crate::labeling::{check_admissible, is_fully_labeled, Labeling, Violation};
use crate::mapspec::{MapError, SimplexMap};
use crate::scalar::{format_rational, max_norm_dist, Rational, Scalar};
use crate::simplex::BarycentricPoint;
use crate::sperner::{all_fully_labeled, find_fully_labeled, SpernerError, Strategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructionError {
    #[error("labeling is not admissible ({} violations)", .0.len())]
    Inadmissible(Vec<Violation>),
    #[error("labeling does not belong to this grid")]
    GridMismatch,
    #[error("tau = {tau} must be below {bound}")]
    TauTooLarge { tau: String, bound: String },
    #[error("tau = {0} must be positive")]
    TauNotPositive(String),
    #[error("no exact fixed point found: {0}")]
    NoFixedPointFound(String),
    #[error("round trip mismatch: {0}")]
    RoundTripMismatch(String),
    #[error(transparent)]
    Sperner(#[from] SpernerError),
    #[error(transparent)]
    Solver(#[from] FixedPointError),
}

/// The vertex images of the construction, stored exactly and as floats.
#[derive(Debug)]
pub struct VertexMap {
    grid: Arc<SubdivisionGrid>,
    labeling: Labeling,
    tau: Rational,
    images: Vec<Vec<Rational>>,
    images_f64: Vec<Vec<f64>>,
}

impl VertexMap {
    /// Largest admissible bound for tau: `min_v v_{l(v)}`.
    pub fn tau_bound(grid: &SubdivisionGrid, lab: &Labeling) -> Rational {
        let min = grid
            .vertices()
            .zip(lab.labels())
            .map(|(a, &l)| a[l])
            .min()
            .unwrap_or(0);
        Rational::from_ratio(min as i64, grid.m() as i64)
    }

    /// Builds the vertex images. `tau` defaults to half of
    /// [`VertexMap::tau_bound`].
    pub fn build(
        grid: Arc<SubdivisionGrid>,
        labeling: Labeling,
        tau: Option<Rational>,
    ) -> Result<Self, ConstructionError> {
        if !labeling.matches(&grid) {
            return Err(ConstructionError::GridMismatch);
        }
        let violations = check_admissible(&grid, &labeling);
        if !violations.is_empty() {
            return Err(ConstructionError::Inadmissible(violations));
        }
        let bound = Self::tau_bound(&grid, &labeling);
        let tau = tau.unwrap_or_else(|| bound.clone() / Rational::from_int(2));
        if tau <= Rational::from_int(0) {
            return Err(ConstructionError::TauNotPositive(format_rational(&tau)));
        }
        if tau >= bound {
            return Err(ConstructionError::TauTooLarge {
                tau: format_rational(&tau),
                bound: format_rational(&bound),
            });
        }
        let n = grid.n();
        let m = grid.m() as i64;
        let spread = tau.clone() / Rational::from_int(n as i64);
        let images: Vec<Vec<Rational>> = grid
            .vertices()
            .zip(labeling.labels())
            .map(|(a, &l)| {
                a.iter()
                    .enumerate()
                    .map(|(j, &aj)| {
                        let x = Rational::from_ratio(aj as i64, m);
                        if j == l {
                            x - tau.clone()
                        } else {
                            x + spread.clone()
                        }
                    })
                    .collect()
            })
            .collect();
        let images_f64 = images
            .iter()
            .map(|img| img.iter().map(Scalar::to_f64).collect())
            .collect();
        Ok(Self {
            grid,
            labeling,
            tau,
            images,
            images_f64,
        })
    }

    pub fn grid(&self) -> &SubdivisionGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<SubdivisionGrid> {
        Arc::clone(&self.grid)
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn tau(&self) -> &Rational {
        &self.tau
    }

    /// Exact image of vertex `v`.
    pub fn image(&self, v: usize) -> &[Rational] {
        &self.images[v]
    }

    /// Max-norm Lipschitz bound `1 + (1 + 1/n) τ m`.
    pub fn lipschitz_bound(&self) -> f64 {
        let n = self.grid.n() as f64;
        1.0 + (1.0 + 1.0 / n) * self.tau.to_f64() * self.grid.m() as f64
    }

    fn eval_with<S: Scalar>(&self, p: &BarycentricPoint<S>, images: &[Vec<S>]) -> Result<BarycentricPoint<S>, MapError> {
        let n = self.grid.n();
        if p.dim() != n {
            return Err(MapError::Dimension {
                expected: n,
                got: p.dim(),
            });
        }
        let loc = self.grid.locate(p);
        let mut out = vec![S::zero(); n + 1];
        for (&v, w) in self.grid.cell(loc.cell).iter().zip(&loc.weights) {
            for (o, y) in out.iter_mut().zip(&images[v as usize]) {
                *o = o.clone() + w.clone() * y.clone();
            }
        }
        Ok(BarycentricPoint::from_raw(out))
    }
}

impl SimplexMap<Rational> for VertexMap {
    fn dim(&self) -> usize {
        self.grid.n()
    }

    fn eval(&self, p: &BarycentricPoint<Rational>) -> Result<BarycentricPoint<Rational>, MapError> {
        self.eval_with(p, &self.images)
    }
}

impl SimplexMap<f64> for VertexMap {
    fn dim(&self) -> usize {
        self.grid.n()
    }

    fn eval(&self, p: &BarycentricPoint<f64>) -> Result<BarycentricPoint<f64>, MapError> {
        self.eval_with(p, &self.images_f64)
    }
}

/// Evaluates the affine extension at `p`.
pub fn eval_constructed<S>(vm: &VertexMap, p: &BarycentricPoint<S>) -> Result<BarycentricPoint<S>, MapError>
where
    S: Scalar,
    VertexMap: SimplexMap<S>,
{
    SimplexMap::<S>::eval(vm, p)
}

/// Displacement `f_i(z) - z_i` of one coordinate over a cell, as an affine
/// function of the cell weights: `Σ_j coefficients[j] * λ_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateDisplacement {
    /// No vertex carries the label: constant `τ/n` everywhere on the cell.
    Absent { value: Rational },
    /// Exactly one vertex (position `vertex` in the cell) carries the label.
    Single {
        vertex: usize,
        coefficients: Vec<Rational>,
    },
    /// Several vertices carry the label. Reported with the same affine
    /// formula but without a closed-form bound.
    Multiple {
        vertices: Vec<usize>,
        coefficients: Vec<Rational>,
    },
}

impl CoordinateDisplacement {
    pub fn at(&self, weights: &[Rational]) -> Rational {
        match self {
            CoordinateDisplacement::Absent { value } => value.clone(),
            CoordinateDisplacement::Single { coefficients, .. }
            | CoordinateDisplacement::Multiple { coefficients, .. } => coefficients
                .iter()
                .zip(weights)
                .fold(Rational::from_int(0), |acc, (c, w)| acc + c.clone() * w.clone()),
        }
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self, CoordinateDisplacement::Multiple { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDisplacement {
    pub cell: usize,
    pub coordinates: Vec<CoordinateDisplacement>,
}

/// Describes `f(z) - z` on a cell, coordinate by coordinate.
pub fn displacement_on_cell(vm: &VertexMap, cell: usize) -> CellDisplacement {
    let n = vm.grid.n();
    let vs = vm.grid.cell(cell);
    let down = -vm.tau.clone();
    let up = vm.tau.clone() / Rational::from_int(n as i64);
    let coordinates = (0..=n)
        .map(|i| {
            let carriers: Vec<usize> = vs
                .iter()
                .enumerate()
                .filter(|(_, &v)| vm.labeling.label(v as usize) == i)
                .map(|(k, _)| k)
                .collect();
            let coefficients: Vec<Rational> = (0..vs.len())
                .map(|k| if carriers.contains(&k) { down.clone() } else { up.clone() })
                .collect();
            match carriers.len() {
                0 => CoordinateDisplacement::Absent { value: up.clone() },
                1 => CoordinateDisplacement::Single {
                    vertex: carriers[0],
                    coefficients,
                },
                _ => CoordinateDisplacement::Multiple {
                    vertices: carriers,
                    coefficients,
                },
            }
        })
        .collect();
    CellDisplacement { cell, coordinates }
}

/// The exact fixed point: the barycenter of the first fully labeled cell,
/// checked to satisfy `f(z) = z` with zero error.
pub fn fixed_point_of_construction(
    vm: &VertexMap,
) -> Result<(BarycentricPoint<Rational>, usize), ConstructionError> {
    let cell = find_fully_labeled(&vm.grid, &vm.labeling, Strategy::Exhaustive)
        .map_err(|e| ConstructionError::NoFixedPointFound(e.to_string()))?;
    let z = vm.grid.cell_barycenter::<Rational>(cell);
    let fz = eval_constructed(vm, &z).map_err(|e| ConstructionError::NoFixedPointFound(e.to_string()))?;
    if fz != z {
        return Err(ConstructionError::NoFixedPointFound(format!(
            "f(z) != z at the barycenter of cell {cell}"
        )));
    }
    Ok((z, cell))
}

/// Options for [`roundtrip_check`].
#[derive(Debug, Clone)]
pub struct RoundTripOptions {
    pub tau: Option<Rational>,
    /// Target tolerance for the floating-point solver.
    pub tol: f64,
    /// Largest final residual accepted from the solver.
    pub max_residual: f64,
}

impl Default for RoundTripOptions {
    fn default() -> Self {
        Self {
            tau: None,
            tol: 1e-7,
            max_residual: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundTripReport {
    pub tau: String,
    /// Exact fixed point, one `p/q` string per coordinate.
    pub fixed_point: Vec<String>,
    /// Vertex ids of the exact fixed point's cell.
    pub cell: Vec<u32>,
    pub exact: bool,
    pub solver: SolverLeg,
    /// Both legs ended in the same cell.
    pub same_cell: bool,
    pub fully_labeled_count: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverLeg {
    pub point: Vec<f64>,
    pub residual: f64,
    pub levels: usize,
    /// Fully labeled cell credited to the solver's point.
    pub cell: Vec<u32>,
    /// Max-norm distance from the solver's point to that cell's barycenter.
    pub distance_to_barycenter: f64,
}

/// Runs both directions of the equivalence on one labeling: the exact
/// construction, and the floating-point solver applied to the same map.
pub fn roundtrip_check(
    grid: Arc<SubdivisionGrid>,
    lab: Labeling,
    opts: &RoundTripOptions,
) -> Result<RoundTripReport, ConstructionError> {
    let vm = VertexMap::build(Arc::clone(&grid), lab, opts.tau.clone())?;
    let (z, exact_cell) = fixed_point_of_construction(&vm)?;

    let modulus = Modulus::lipschitz(vm.lipschitz_bound());
    let refine = RefineOptions::new(opts.tol);
    let result = refine_fixed_point(&vm, &modulus, &refine)?;
    let mismatch = |msg: String| ConstructionError::RoundTripMismatch(msg);
    if result.status != FixedPointStatus::Converged {
        return Err(mismatch(format!(
            "solver did not converge: {:?} at {:?}",
            result.status,
            result.point.coords()
        )));
    }
    if result.residual > opts.max_residual {
        return Err(mismatch(format!(
            "solver residual {} exceeds {}",
            result.residual, opts.max_residual
        )));
    }

    // Credit the solver with the nearest fully labeled cell within one
    // lattice step of its point.
    let x = result.point.coords();
    let step = 1.0 / grid.m() as f64;
    let located = grid.locate(&result.point).cell;
    let candidates = all_fully_labeled(&grid, vm.labeling());
    let nearest = candidates
        .iter()
        .map(|&c| {
            let b = grid.cell_barycenter::<f64>(c);
            (c, max_norm_dist(x, b.coords()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let (solver_cell, dist) = match nearest {
        Some((c, d)) if is_fully_labeled(&grid, located, vm.labeling()) && c == located => (c, d),
        Some((c, d)) if d <= step => (c, d),
        other => {
            return Err(mismatch(format!(
                "solver point {x:?} (cell {located}) is not within one lattice step of a fully labeled cell; nearest {other:?}"
            )))
        }
    };

    Ok(RoundTripReport {
        tau: format_rational(vm.tau()),
        fixed_point: z.coords().iter().map(format_rational).collect(),
        cell: grid.cell(exact_cell).to_vec(),
        exact: true,
        solver: SolverLeg {
            point: x.to_vec(),
            residual: result.residual,
            levels: result.trace.len(),
            cell: grid.cell(solver_cell).to_vec(),
            distance_to_barycenter: dist,
        },
        same_cell: solver_cell == exact_cell,
        fully_labeled_count: candidates.len(),
    })
}
