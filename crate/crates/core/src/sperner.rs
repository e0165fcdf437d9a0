//! Counting and finding fully labeled cells.

use serde::Serialize;
use thiserror::Error;

use crate::grid::SubdivisionGrid;
use crate::labeling::{is_fully_labeled, Labeling};

/// Above this many cells [`Strategy::Auto`] walks doors instead of scanning.
pub const EXHAUSTIVE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpernerError {
    #[error("no fully labeled cell found (is the labeling admissible?)")]
    SearchExhausted,
    #[error("door path revisited cell {0}")]
    Revisit(usize),
    #[error("labeling does not belong to this grid")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    Exhaustive,
    Path,
    #[default]
    Auto,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "path" => Ok(Strategy::Path),
            "auto" => Ok(Strategy::Auto),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

fn check_grid(grid: &SubdivisionGrid, lab: &Labeling) -> Result<(), SpernerError> {
    if lab.matches(grid) {
        Ok(())
    } else {
        Err(SpernerError::GridMismatch)
    }
}

/// Number of fully labeled cells, by scanning every cell.
pub fn count_fully_labeled(grid: &SubdivisionGrid, lab: &Labeling) -> u64 {
    let count_range = |r: std::ops::Range<usize>| {
        r.filter(|&c| is_fully_labeled(grid, c, lab)).count() as u64
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.cell_ranges(rayon::current_num_threads() * 4)
            .into_par_iter()
            .map(count_range)
            .sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_range(0..grid.num_cells())
    }
}

/// Every fully labeled cell, ascending.
pub fn all_fully_labeled(grid: &SubdivisionGrid, lab: &Labeling) -> Vec<usize> {
    (0..grid.num_cells())
        .filter(|&c| is_fully_labeled(grid, c, lab))
        .collect()
}

/// A completed door-to-door walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DoorWalk {
    pub cell: usize,
    /// Cells entered across all walks, including dead ends.
    pub visited: usize,
    /// Boundary doors tried before success.
    pub starts: usize,
}

/// Finds a fully labeled cell.
pub fn find_fully_labeled(
    grid: &SubdivisionGrid,
    lab: &Labeling,
    strategy: Strategy,
) -> Result<usize, SpernerError> {
    check_grid(grid, lab)?;
    let strategy = match strategy {
        Strategy::Auto if grid.num_cells() <= EXHAUSTIVE_LIMIT => Strategy::Exhaustive,
        Strategy::Auto => Strategy::Path,
        s => s,
    };
    match strategy {
        Strategy::Exhaustive => (0..grid.num_cells())
            .find(|&c| is_fully_labeled(grid, c, lab))
            .ok_or(SpernerError::SearchExhausted),
        _ => door_walk(grid, lab).map(|w| w.cell),
    }
}

/// Walks from boundary doors on the face `x_n = 0` (facets labeled
/// `0..n-1`) through interior doors until a fully labeled cell is reached.
///
/// Boundary doors are tried in lexicographic order of their vertex ids; a
/// walk that leaves through another boundary door consumes that door too.
/// Walks never share cells, so at most `m^n` cells are entered.
pub fn door_walk(grid: &SubdivisionGrid, lab: &Labeling) -> Result<DoorWalk, SpernerError> {
    check_grid(grid, lab)?;
    let n = grid.n();
    let is_door = |face: &[u32]| {
        let mut seen = vec![false; n];
        face.iter().all(|&v| {
            let l = lab.label(v as usize);
            l < n && !std::mem::replace(&mut seen[l], true)
        })
    };

    let mut starts: Vec<(Vec<u32>, usize)> = Vec::new();
    for (c, vs) in grid.cells().enumerate() {
        let face: Vec<u32> = vs
            .iter()
            .copied()
            .filter(|&v| grid.vertex(v as usize)[n] == 0)
            .collect();
        if face.len() == n && is_door(&face) {
            starts.push((face, c));
        }
    }
    starts.sort();

    let mut visited = vec![false; grid.num_cells()];
    let mut used = vec![false; starts.len()];
    let mut entered = 0usize;
    for (k, (face, first)) in starts.iter().enumerate() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let mut cell = *first;
        let mut entry: Vec<u32> = face.clone();
        loop {
            if std::mem::replace(&mut visited[cell], true) {
                return Err(SpernerError::Revisit(cell));
            }
            entered += 1;
            let vs = grid.cell(cell);
            let fresh = *vs
                .iter()
                .find(|v| entry.binary_search(v).is_err())
                .expect("entry face is a facet of the cell");
            let label = lab.label(fresh as usize);
            if label >= n {
                if is_fully_labeled(grid, cell, lab) {
                    return Ok(DoorWalk {
                        cell,
                        visited: entered,
                        starts: k + 1,
                    });
                }
                return Err(SpernerError::SearchExhausted);
            }
            let twin = *entry
                .iter()
                .find(|&&v| lab.label(v as usize) == label)
                .expect("door carries every label below n");
            let pos = vs.iter().position(|&v| v == twin).unwrap();
            let mut exit: Vec<u32> = vs.iter().copied().filter(|&v| v != twin).collect();
            exit.sort_unstable();
            match grid.neighbor(cell, pos) {
                Some(next) => {
                    cell = next;
                    entry = exit;
                }
                None => {
                    if let Ok(j) = starts.binary_search_by(|(f, _)| f.cmp(&exit)) {
                        used[j] = true;
                    }
                    break;
                }
            }
        }
    }
    Err(SpernerError::SearchExhausted)
}
