//! Equal m-fold subdivision of the n-simplex.
//!
//! Vertices are the lattice points `a / m` with `a` a tuple of n+1
//! nonnegative integers summing to `m`. Cells come from the staircase
//! (Freudenthal/Kuhn) triangulation of the order region
//! `m >= s_1 >= ... >= s_n >= 0`, where `s_j = a_j + ... + a_n`. A cell is a
//! base point `b` (nonincreasing, entries in `0..m`) plus an ordering of the
//! axes in which it is walked; inside a run of equal `b` entries the axes
//! must be walked in increasing order. There are exactly `m^n` such cells.
//!
//! Vertices are indexed in lexicographic order of their integer
//! coordinates, and each cell lists its vertex indices in increasing order,
//! which is the same as lexicographic order of the coordinates.

use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::simplex::BarycentricPoint;

/// Default upper bound on `m^n`.
pub const DEFAULT_CELL_BUDGET: u64 = 10_000_000;

/// Environment variable that overrides [`DEFAULT_CELL_BUDGET`] in front ends.
pub const CELL_BUDGET_ENV: &str = "FIXSIM_CELL_BUDGET";

/// Cell budget from `FIXSIM_CELL_BUDGET`, falling back to the default.
pub fn cell_budget_from_env() -> u64 {
    std::env::var(CELL_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CELL_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("subdivision count must be at least 1")]
    InvalidCount,
    #[error("a grid with n={n}, m={m} needs {cells} cells, over the budget of {budget}")]
    ResourceLimit {
        n: usize,
        m: usize,
        cells: u128,
        budget: u64,
    },
    #[error("grid file does not match the subdivision for n={n}, m={m}")]
    Mismatch { n: usize, m: usize },
}

/// Number of cells `m^n`, saturating.
pub fn cell_count(n: usize, m: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.saturating_mul(m as u128);
    }
    acc
}

/// `C(a, k)` with saturation; only used for small, in-budget arguments.
pub fn binomial(a: u64, k: u64) -> u64 {
    if k > a {
        return 0;
    }
    let k = k.min(a - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (a - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

/// Result of [`SubdivisionGrid::locate`]: a containing cell and the
/// barycentric weights of the point with respect to that cell's vertices,
/// in the cell's canonical vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Location<S> {
    pub cell: usize,
    pub weights: Vec<S>,
}

#[derive(Debug)]
struct Incidence {
    offsets: Vec<usize>,
    cells: Vec<u32>,
}

#[derive(Debug)]
pub struct SubdivisionGrid {
    n: usize,
    m: usize,
    vertices: Vec<u32>,
    cells: Vec<u32>,
    incidence: OnceLock<Incidence>,
}

impl SubdivisionGrid {
    pub fn new(n: usize, m: usize) -> Result<Self, GridError> {
        Self::with_budget(n, m, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(n: usize, m: usize, budget: u64) -> Result<Self, GridError> {
        if n == 0 {
            return Err(GridError::InvalidDimension);
        }
        if m == 0 {
            return Err(GridError::InvalidCount);
        }
        let cells = cell_count(n, m);
        if cells > budget as u128 || m > u32::MAX as usize {
            return Err(GridError::ResourceLimit {
                n,
                m,
                cells,
                budget,
            });
        }
        let mut grid = SubdivisionGrid {
            n,
            m,
            vertices: Vec::new(),
            cells: Vec::with_capacity(cells as usize * (n + 1)),
            incidence: OnceLock::new(),
        };
        grid.enumerate_vertices();
        grid.enumerate_cells();
        debug_assert_eq!(grid.num_cells() as u128, cells);
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len() / (self.n + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.n + 1)
    }

    /// Integer coordinates of vertex `v` (summing to `m`).
    pub fn vertex(&self, v: usize) -> &[u32] {
        let w = self.n + 1;
        &self.vertices[v * w..(v + 1) * w]
    }

    /// Vertex indices of cell `c`, ascending.
    pub fn cell(&self, c: usize) -> &[u32] {
        let w = self.n + 1;
        &self.cells[c * w..(c + 1) * w]
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.vertices.chunks_exact(self.n + 1)
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.cells.chunks_exact(self.n + 1)
    }

    /// Splits the cell index range into `parts` contiguous, disjoint ranges.
    pub fn cell_ranges(&self, parts: usize) -> Vec<Range<usize>> {
        let total = self.num_cells();
        let parts = parts.clamp(1, total.max(1));
        let step = total.div_ceil(parts);
        (0..total)
            .step_by(step.max(1))
            .map(|s| s..(s + step).min(total))
            .collect()
    }

    /// The embedded point `a / m` of a vertex.
    pub fn vertex_point<S: Scalar>(&self, v: usize) -> BarycentricPoint<S> {
        let m = self.m as i64;
        BarycentricPoint::from_raw(
            self.vertex(v)
                .iter()
                .map(|&a| S::from_ratio(a as i64, m))
                .collect(),
        )
    }

    /// Barycenter of a cell.
    pub fn cell_barycenter<S: Scalar>(&self, c: usize) -> BarycentricPoint<S> {
        let mut sums = vec![0i64; self.n + 1];
        for &v in self.cell(c) {
            for (s, &a) in sums.iter_mut().zip(self.vertex(v as usize)) {
                *s += a as i64;
            }
        }
        let den = self.m as i64 * (self.n as i64 + 1);
        BarycentricPoint::from_raw(sums.into_iter().map(|s| S::from_ratio(s, den)).collect())
    }

    /// Combines weights over a cell's vertices into a point.
    pub fn combine<S: Scalar>(&self, c: usize, weights: &[S]) -> Vec<S> {
        let m = S::from_int(self.m as i64);
        let mut out = vec![S::zero(); self.n + 1];
        for (&v, w) in self.cell(c).iter().zip(weights) {
            for (o, &a) in out.iter_mut().zip(self.vertex(v as usize)) {
                *o = o.clone() + w.clone() * S::from_int(a as i64);
            }
        }
        out.into_iter().map(|o| o / m.clone()).collect()
    }

    /// Index of the vertex with the given integer coordinates.
    pub fn vertex_index(&self, a: &[u32]) -> Option<usize> {
        if a.len() != self.n + 1 || a.iter().map(|&x| x as u64).sum::<u64>() != self.m as u64 {
            return None;
        }
        Some(self.rank(a))
    }

    fn rank(&self, a: &[u32]) -> usize {
        // Lexicographic rank among compositions of m into n+1 parts.
        let mut idx: u64 = 0;
        let mut rem = self.m as u64;
        for (i, &ai) in a.iter().take(self.n).enumerate() {
            let k = (self.n - i) as u64;
            let ai = ai as u64;
            idx += binomial(rem + k, k) - binomial(rem - ai + k, k);
            rem -= ai;
        }
        idx as usize
    }

    fn enumerate_vertices(&mut self) {
        let n = self.n;
        let mut cur = vec![0u32; n + 1];
        fn rec(pos: usize, rem: u32, n: usize, cur: &mut Vec<u32>, out: &mut Vec<u32>) {
            if pos == n {
                cur[n] = rem;
                out.extend_from_slice(cur);
                return;
            }
            for v in 0..=rem {
                cur[pos] = v;
                rec(pos + 1, rem - v, n, cur, out);
            }
        }
        let mut out = Vec::with_capacity(binomial((self.m + n) as u64, n as u64) as usize * (n + 1));
        rec(0, self.m as u32, n, &mut cur, &mut out);
        self.vertices = out;
    }

    fn enumerate_cells(&mut self) {
        let n = self.n;
        let m = self.m as u32;
        let mut base = vec![0u32; n];
        let mut order = Vec::with_capacity(n);
        let mut used = vec![false; n];
        let mut cells = std::mem::take(&mut self.cells);
        let mut scratch = vec![0u32; n + 1];
        let mut ids = Vec::with_capacity(n + 1);
        // Nonincreasing base sequences m-1 >= b_1 >= ... >= b_n >= 0.
        fn bases(pos: usize, hi: u32, base: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
            if pos == base.len() {
                visit(base);
                return;
            }
            for v in 0..=hi {
                base[pos] = v;
                bases(pos + 1, v, base, visit);
            }
        }
        let mut visit = |b: &[u32]| {
            walk_orders(b, &mut order, &mut used, &mut |ord: &[usize]| {
                ids.clear();
                let mut s: Vec<u32> = b.to_vec();
                ids.push(self.rank(s_to_a(&s, m, &mut scratch)) as u32);
                for &axis in ord {
                    s[axis] += 1;
                    ids.push(self.rank(s_to_a(&s, m, &mut scratch)) as u32);
                }
                ids.sort_unstable();
                cells.extend_from_slice(&ids);
            });
        };
        bases(0, m - 1, &mut base, &mut visit);
        self.cells = cells;
    }

    fn incidence(&self) -> &Incidence {
        self.incidence.get_or_init(|| {
            let nv = self.num_vertices();
            let mut counts = vec![0usize; nv + 1];
            for &v in &self.cells {
                counts[v as usize + 1] += 1;
            }
            for i in 0..nv {
                counts[i + 1] += counts[i];
            }
            let mut fill = counts.clone();
            let mut cells = vec![0u32; self.cells.len()];
            for (c, vs) in self.cells().enumerate() {
                for &v in vs {
                    cells[fill[v as usize]] = c as u32;
                    fill[v as usize] += 1;
                }
            }
            Incidence {
                offsets: counts,
                cells,
            }
        })
    }

    /// Cells incident to vertex `v`, ascending.
    pub fn cells_of_vertex(&self, v: usize) -> &[u32] {
        let inc = self.incidence();
        &inc.cells[inc.offsets[v]..inc.offsets[v + 1]]
    }

    /// All cells containing every vertex in `face`, ascending.
    pub fn cells_containing(&self, face: &[u32]) -> Vec<usize> {
        let Some(&pivot) = face
            .iter()
            .min_by_key(|&&v| self.cells_of_vertex(v as usize).len())
        else {
            return (0..self.num_cells()).collect();
        };
        self.cells_of_vertex(pivot as usize)
            .iter()
            .map(|&c| c as usize)
            .filter(|&c| {
                let vs = self.cell(c);
                face.iter().all(|v| vs.binary_search(v).is_ok())
            })
            .collect()
    }

    /// The cell sharing the facet of `c` opposite its vertex at position
    /// `pos`, if that facet is interior.
    pub fn neighbor(&self, c: usize, pos: usize) -> Option<usize> {
        let face: Vec<u32> = self
            .cell(c)
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != pos)
            .map(|(_, &v)| v)
            .collect();
        self.cells_containing(&face).into_iter().find(|&o| o != c)
    }

    /// Locates `p` in the subdivision.
    ///
    /// Points on shared faces belong to several cells; the smallest cell
    /// index among them is returned.
    pub fn locate<S: Scalar>(&self, p: &BarycentricPoint<S>) -> Location<S> {
        let n = self.n;
        assert_eq!(p.dim(), n, "point dimension does not match grid");
        let m = S::from_int(self.m as i64);
        let coords = p.coords();

        // s_j = m * (p_j + ... + p_n), j = 1..n, clamped to [0, m].
        let mut s = vec![S::zero(); n];
        let mut acc = S::zero();
        for j in (1..=n).rev() {
            acc = acc + coords[j].clone();
            let v = acc.clone() * m.clone();
            s[j - 1] = S::min_of(S::max_of(v, S::zero()), m.clone());
        }
        let top = self.m as i64 - 1;
        let base: Vec<i64> = s.iter().map(|x| x.floor_i64().clamp(0, top)).collect();
        let frac: Vec<S> = s
            .iter()
            .zip(&base)
            .map(|(x, &b)| x.clone() - S::from_int(b))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            frac[j]
                .partial_cmp(&frac[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        // Walk the staircase collecting (vertex id, weight).
        let mut walk: Vec<(u32, S)> = Vec::with_capacity(n + 1);
        let mut cur: Vec<u32> = base.iter().map(|&b| b as u32).collect();
        let mut scratch = vec![0u32; n + 1];
        let m32 = self.m as u32;
        let first = S::one() - frac[order[0]].clone();
        walk.push((self.rank(s_to_a(&cur, m32, &mut scratch)) as u32, first));
        for k in 0..n {
            cur[order[k]] += 1;
            let w = if k + 1 < n {
                frac[order[k]].clone() - frac[order[k + 1]].clone()
            } else {
                frac[order[k]].clone()
            };
            walk.push((self.rank(s_to_a(&cur, m32, &mut scratch)) as u32, w));
        }

        let mut face: Vec<u32> = walk
            .iter()
            .filter(|(_, w)| *w > S::zero())
            .map(|(v, _)| *v)
            .collect();
        face.sort_unstable();
        face.dedup();
        let cell = self
            .cells_containing(&face)
            .into_iter()
            .next()
            .expect("staircase cell must contain its own face");
        let weights = self
            .cell(cell)
            .iter()
            .map(|v| {
                walk.iter()
                    .filter(|(id, w)| id == v && *w > S::zero())
                    .fold(S::zero(), |a, (_, w)| a + w.clone())
            })
            .collect();
        Location { cell, weights }
    }

    /// Largest max-norm distance between two vertices of a common cell.
    pub fn cell_diameter<S: Scalar>(&self) -> S {
        let mut widest = 0u32;
        for vs in self.cells() {
            for (i, &u) in vs.iter().enumerate() {
                for &v in &vs[i + 1..] {
                    let d = self
                        .vertex(u as usize)
                        .iter()
                        .zip(self.vertex(v as usize))
                        .map(|(a, b)| a.abs_diff(*b))
                        .max()
                        .unwrap_or(0);
                    widest = widest.max(d);
                }
            }
        }
        S::from_ratio(widest as i64, self.m as i64)
    }

    pub fn to_json(&self) -> GridJson {
        GridJson {
            n: self.n,
            m: self.m,
            vertices: self.vertices().map(<[u32]>::to_vec).collect(),
            cells: self.cells().map(<[u32]>::to_vec).collect(),
        }
    }

    /// Rebuilds a grid from its JSON form, checking it matches the
    /// canonical subdivision.
    pub fn from_json(json: &GridJson, budget: u64) -> Result<Self, GridError> {
        let grid = Self::with_budget(json.n, json.m, budget)?;
        let same = json.vertices.len() == grid.num_vertices()
            && json.cells.len() == grid.num_cells()
            && json.vertices.iter().zip(grid.vertices()).all(|(a, b)| a == b)
            && json.cells.iter().zip(grid.cells()).all(|(a, b)| a == b);
        if !same {
            return Err(GridError::Mismatch {
                n: json.n,
                m: json.m,
            });
        }
        Ok(grid)
    }
}

/// Converts staircase coordinates `s_1..s_n` into integer barycentric
/// coordinates.
fn s_to_a<'a>(s: &[u32], m: u32, out: &'a mut [u32]) -> &'a [u32] {
    let n = s.len();
    out[0] = m - s[0];
    for j in 1..n {
        out[j] = s[j - 1] - s[j];
    }
    out[n] = s[n - 1];
    out
}

/// Visits every axis ordering compatible with the runs of equal entries in
/// `base` (within a run, axes appear in increasing order).
fn walk_orders(
    base: &[u32],
    order: &mut Vec<usize>,
    used: &mut [bool],
    visit: &mut dyn FnMut(&[usize]),
) {
    let n = base.len();
    if order.len() == n {
        visit(order);
        return;
    }
    for i in 0..n {
        if used[i] || (i > 0 && base[i - 1] == base[i] && !used[i - 1]) {
            continue;
        }
        used[i] = true;
        order.push(i);
        walk_orders(base, order, used, visit);
        order.pop();
        used[i] = false;
    }
}

/// Serialized grid: `{"n", "m", "vertices", "cells"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub n: usize,
    pub m: usize,
    pub vertices: Vec<Vec<u32>>,
    pub cells: Vec<Vec<u32>>,
}
