//! Vertex labelings of a subdivision and the Sperner admissibility rules.
//!
//! A labeling is admissible when every corner `e_k` carries label `k` and
//! every other vertex carries the index of a positive coordinate (the
//! vertex then lies on a face spanned by corners that include its label).
//! Interior vertices may carry any label in `0..=n`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::SubdivisionGrid;
use crate::mapspec::{MapError, SimplexMap};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "camelCase")]
pub enum Violation {
    /// Label outside `0..=n`.
    OutOfRange { vertex: Vec<u32>, label: usize },
    /// Corner `e_k` not labeled `k`.
    Corner {
        vertex: Vec<u32>,
        expected: usize,
        label: usize,
    },
    /// Label names a corner that does not span the vertex's face.
    OffCarrier { vertex: Vec<u32>, label: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::OutOfRange { vertex, label } => {
                write!(f, "vertex {vertex:?}: label {label} out of range")
            }
            Violation::Corner {
                vertex,
                expected,
                label,
            } => write!(f, "corner {vertex:?}: labeled {label}, must be {expected}"),
            Violation::OffCarrier { vertex, label } => {
                write!(f, "vertex {vertex:?}: label {label} is not a corner of its face")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("expected {expected} labels, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("labeling is for n={got_n}, m={got_m} but the grid has n={n}, m={m}")]
    GridMismatch {
        n: usize,
        m: usize,
        got_n: usize,
        got_m: usize,
    },
    #[error("vertex {0:?} is not a lattice point of the grid")]
    UnknownVertex(Vec<u32>),
    #[error("vertex {0:?} is labeled more than once")]
    DuplicateVertex(Vec<u32>),
    #[error("vertex {0:?} has no label")]
    MissingVertex(Vec<u32>),
    #[error("map output at vertex {vertex:?} is not on the simplex")]
    MapRange { vertex: Vec<u32> },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Labels indexed by grid vertex index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    n: usize,
    m: usize,
    labels: Vec<usize>,
}

impl Labeling {
    pub fn new(grid: &SubdivisionGrid, labels: Vec<usize>) -> Result<Self, LabelError> {
        if labels.len() != grid.num_vertices() {
            return Err(LabelError::WrongLength {
                expected: grid.num_vertices(),
                got: labels.len(),
            });
        }
        Ok(Self {
            n: grid.n(),
            m: grid.m(),
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn matches(&self, grid: &SubdivisionGrid) -> bool {
        self.n == grid.n() && self.m == grid.m()
    }

    pub fn to_json(&self, grid: &SubdivisionGrid) -> LabelingJson {
        LabelingJson {
            n: self.n,
            m: self.m,
            labels: grid
                .vertices()
                .zip(&self.labels)
                .map(|(v, &l)| VertexLabel { v: v.to_vec(), l })
                .collect(),
        }
    }

    /// Reads a labeling file. Entries may appear in any order but every
    /// vertex must be labeled exactly once.
    pub fn from_json(grid: &SubdivisionGrid, json: &LabelingJson) -> Result<Self, LabelError> {
        if json.n != grid.n() || json.m != grid.m() {
            return Err(LabelError::GridMismatch {
                n: grid.n(),
                m: grid.m(),
                got_n: json.n,
                got_m: json.m,
            });
        }
        let mut labels: Vec<Option<usize>> = vec![None; grid.num_vertices()];
        for entry in &json.labels {
            let idx = grid
                .vertex_index(&entry.v)
                .ok_or_else(|| LabelError::UnknownVertex(entry.v.clone()))?;
            if labels[idx].replace(entry.l).is_some() {
                return Err(LabelError::DuplicateVertex(entry.v.clone()));
            }
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| LabelError::MissingVertex(grid.vertex(i).to_vec())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(grid, labels)
    }
}

/// Labeling file: `{"n", "m", "labels": [{"v": [...], "l": k}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingJson {
    pub n: usize,
    pub m: usize,
    pub labels: Vec<VertexLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexLabel {
    pub v: Vec<u32>,
    pub l: usize,
}

/// Lists every violation of the labeling rules; empty means admissible.
pub fn check_admissible(grid: &SubdivisionGrid, lab: &Labeling) -> Vec<Violation> {
    let n = grid.n();
    let mut out = Vec::new();
    for (a, &label) in grid.vertices().zip(lab.labels()) {
        if label > n {
            out.push(Violation::OutOfRange {
                vertex: a.to_vec(),
                label,
            });
            continue;
        }
        let support: Vec<usize> = (0..=n).filter(|&i| a[i] > 0).collect();
        if support.len() == 1 {
            if label != support[0] {
                out.push(Violation::Corner {
                    vertex: a.to_vec(),
                    expected: support[0],
                    label,
                });
            }
        } else if a[label] == 0 {
            out.push(Violation::OffCarrier {
                vertex: a.to_vec(),
                label,
            });
        }
    }
    out
}

/// Standard Sperner label of `v` under a map with image `fv`: the smallest
/// index with a positive coordinate that the map does not increase.
pub fn sperner_label<S: Scalar>(v: &[S], fv: &[S]) -> Option<usize> {
    v.iter()
        .zip(fv)
        .position(|(x, y)| *x > S::zero() && *y <= *x)
}

fn on_simplex<S: Scalar>(p: &[S], n: usize) -> bool {
    p.len() == n + 1
        && p.iter().all(|c| *c >= -S::negative_slack())
        && (p.iter().fold(S::zero(), |a, c| a + c.clone()) - S::one()).abs() <= S::sum_slack()
}

fn label_vertex<S, F>(grid: &SubdivisionGrid, f: &F, v: usize) -> Result<usize, LabelError>
where
    S: Scalar,
    F: SimplexMap<S> + ?Sized,
{
    let p = grid.vertex_point::<S>(v);
    let q = f.eval(&p)?;
    let range_err = || LabelError::MapRange {
        vertex: grid.vertex(v).to_vec(),
    };
    if !on_simplex(q.coords(), grid.n()) {
        return Err(range_err());
    }
    sperner_label(p.coords(), q.coords()).ok_or_else(range_err)
}

/// Labels every vertex with [`sperner_label`] of the map.
pub fn label_from_function<S, F>(grid: &SubdivisionGrid, f: &F) -> Result<Labeling, LabelError>
where
    S: Scalar,
    F: SimplexMap<S> + ?Sized,
{
    #[cfg(feature = "parallel")]
    let labels = {
        use rayon::prelude::*;
        (0..grid.num_vertices())
            .into_par_iter()
            .map(|v| label_vertex(grid, f, v))
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let labels = (0..grid.num_vertices())
        .map(|v| label_vertex(grid, f, v))
        .collect::<Result<Vec<_>, _>>()?;
    Labeling::new(grid, labels)
}

/// True when the cell's labels are exactly `{0, ..., n}`.
pub fn is_fully_labeled(grid: &SubdivisionGrid, cell: usize, lab: &Labeling) -> bool {
    let n = grid.n();
    let mut seen = vec![false; n + 1];
    for &v in grid.cell(cell) {
        let l = lab.label(v as usize);
        if l > n || seen[l] {
            return false;
        }
        seen[l] = true;
    }
    true
}

/// Draws each vertex label uniformly from the indices of its positive
/// coordinates; the result is always admissible.
pub fn random_admissible<R: Rng + ?Sized>(grid: &SubdivisionGrid, rng: &mut R) -> Labeling {
    let labels = grid
        .vertices()
        .map(|a| {
            let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
            support[rng.random_range(0..support.len())]
        })
        .collect();
    Labeling {
        n: grid.n(),
        m: grid.m(),
        labels,
    }
}

/// Number of admissible labelings of `grid` (product of carrier sizes).
pub fn count_admissible(grid: &SubdivisionGrid) -> u128 {
    grid.vertices()
        .map(|a| a.iter().filter(|&&x| x > 0).count() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Iterates over every admissible labeling of `grid`.
pub fn admissible_labelings(grid: &SubdivisionGrid) -> impl Iterator<Item = Labeling> + '_ {
    let supports: Vec<Vec<usize>> = grid
        .vertices()
        .map(|a| (0..a.len()).filter(|&i| a[i] > 0).collect())
        .collect();
    let mut digits = vec![0usize; supports.len()];
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let lab = Labeling {
            n: grid.n(),
            m: grid.m(),
            labels: digits.iter().zip(&supports).map(|(&d, s)| s[d]).collect(),
        };
        // Odometer increment.
        done = true;
        for (d, s) in digits.iter_mut().zip(&supports) {
            *d += 1;
            if *d < s.len() {
                done = false;
                break;
            }
            *d = 0;
        }
        Some(lab)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapspec::{Builtin, MapSpec};
    use crate::scalar::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labeling_with(grid: &SubdivisionGrid, set: &[(&[u32], usize)]) -> Labeling {
        let mut lab = random_admissible(grid, &mut ChaCha8Rng::seed_from_u64(0));
        for (v, l) in set {
            lab.labels[grid.vertex_index(v).unwrap()] = *l;
        }
        lab
    }

    #[test]
    fn corner_labeled_with_its_index_is_fine() {
        let g = SubdivisionGrid::new(2, 2).unwrap();
        let lab = labeling_with(&g, &[(&[2, 0, 0], 0)]);
        assert!(check_admissible(&g, &lab).is_empty());
    }

    #[test]
    fn edge_vertex_off_its_face_is_flagged() {
        let g = SubdivisionGrid::new(2, 2).unwrap();
        let lab = labeling_with(&g, &[(&[1, 1, 0], 2)]);
        assert_eq!(
            check_admissible(&g, &lab),
            vec![Violation::OffCarrier {
                vertex: vec![1, 1, 0],
                label: 2
            }]
        );
    }

    #[test]
    fn interior_vertex_takes_any_label() {
        let g = SubdivisionGrid::new(2, 3).unwrap();
        for l in 0..3 {
            let lab = labeling_with(&g, &[(&[1, 1, 1], l)]);
            assert!(check_admissible(&g, &lab).is_empty());
        }
    }

    #[test]
    fn corner_and_range_violations() {
        let g = SubdivisionGrid::new(2, 2).unwrap();
        let lab = labeling_with(&g, &[(&[0, 2, 0], 0), (&[1, 0, 1], 7)]);
        let v = check_admissible(&g, &lab);
        assert_eq!(v.len(), 2);
        assert!(v.contains(&Violation::Corner {
            vertex: vec![0, 2, 0],
            expected: 1,
            label: 0
        }));
        assert!(v.contains(&Violation::OutOfRange {
            vertex: vec![1, 0, 1],
            label: 7
        }));
    }

    #[test]
    fn identity_labels_smallest_positive_index() {
        let g = SubdivisionGrid::new(2, 4).unwrap();
        let lab = label_from_function::<f64, _>(&g, &MapSpec::Builtin(Builtin::Identity { n: 2 })).unwrap();
        for (a, &l) in g.vertices().zip(lab.labels()) {
            assert_eq!(l, a.iter().position(|&x| x > 0).unwrap());
        }
    }

    #[test]
    fn pull_labels_first_corner_zero() {
        let g = SubdivisionGrid::new(2, 3).unwrap();
        let f = MapSpec::Builtin(Builtin::Pull { n: 2, t: 0.3 });
        let lab = label_from_function::<f64, _>(&g, &f).unwrap();
        assert_eq!(lab.label(g.vertex_index(&[3, 0, 0]).unwrap()), 0);
        assert!(check_admissible(&g, &lab).is_empty());
    }

    #[test]
    fn fully_labeled_cells() {
        let g = SubdivisionGrid::new(1, 1).unwrap();
        let lab = Labeling::new(&g, vec![1, 0]).unwrap();
        // Vertex 0 is (0,1), vertex 1 is (1,0).
        assert!(check_admissible(&g, &lab).is_empty());
        assert!(is_fully_labeled(&g, 0, &lab));

        let g = SubdivisionGrid::new(2, 1).unwrap();
        let lab = Labeling::new(&g, vec![0, 1, 2]).unwrap();
        assert!(is_fully_labeled(&g, 0, &lab));
        let lab = Labeling::new(&g, vec![0, 0, 1]).unwrap();
        assert!(!is_fully_labeled(&g, 0, &lab));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let g = SubdivisionGrid::new(2, 3).unwrap();
        let lab = random_admissible(&g, &mut ChaCha8Rng::seed_from_u64(9));
        let mut json = lab.to_json(&g);
        json.labels.reverse();
        assert_eq!(Labeling::from_json(&g, &json).unwrap(), lab);

        let mut dup = json.clone();
        dup.labels.push(dup.labels[0].clone());
        assert!(matches!(
            Labeling::from_json(&g, &dup),
            Err(LabelError::DuplicateVertex(_))
        ));
        let mut missing = json.clone();
        missing.labels.pop();
        assert!(matches!(
            Labeling::from_json(&g, &missing),
            Err(LabelError::MissingVertex(_))
        ));
        let mut bad = json;
        bad.labels[0].v = vec![9, 9, 9];
        assert!(matches!(
            Labeling::from_json(&g, &bad),
            Err(LabelError::UnknownVertex(_))
        ));
    }

    #[test]
    fn admissible_enumeration_counts() {
        let g = SubdivisionGrid::new(2, 2).unwrap();
        assert_eq!(count_admissible(&g), 8);
        let all: Vec<_> = admissible_labelings(&g).collect();
        assert_eq!(all.len(), 8);
        assert!(all.iter().all(|l| check_admissible(&g, l).is_empty()));
        let g = SubdivisionGrid::new(2, 3).unwrap();
        assert_eq!(admissible_labelings(&g).count(), 192);
    }

    #[test]
    fn exact_labeling_rule() {
        let r = |a, b| Rational::from_ratio(a, b);
        let v = [r(1, 2), r(1, 2), r(0, 1)];
        let fv = [r(2, 3), r(1, 3), r(0, 1)];
        assert_eq!(sperner_label(&v, &fv), Some(1));
    }
}
