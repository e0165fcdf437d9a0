//! Level-by-level refinement on shrinking windows.
//!
//! A window is the sub-simplex `anchor + r Δ`. Its vertices are labeled by
//! the map retracted into the window, and a fully labeled cell is accepted
//! only if every vertex label is also a valid label for the map itself
//! (`f_i(p) <= p_i`). Accepted cells therefore carry the same residual
//! guarantee as cells of a global grid with the same mesh.

use std::collections::HashMap;

use super::pairs::pair_search;
use super::{
    eval_checked, FixedPointError, FixedPointResult, FixedPointStatus, Modulus, RefineOptions,
    TraceEntry, Witness,
};
use crate::grid::SubdivisionGrid;
use crate::mapspec::SimplexMap;
use crate::scalar::max_norm_dist;
use crate::simplex::BarycentricPoint;
use crate::sperner::SpernerError;

/// Cells searched for a witness pair per level.
const WITNESS_CELLS: usize = 8;
/// Window side in units of the previous residual, per dimension.
const WINDOW_FACTOR: f64 = 4.0;
/// Smallest window, in cells per side.
const MIN_CELLS_PER_SIDE: usize = 8;

struct Outcome {
    best: Option<(Vec<f64>, f64)>,
    witness: Option<Witness>,
}

/// Window weights `mu` on the simplex with `x - r mu >= 0`, as close to
/// the barycenter as that allows.
pub(super) fn center_weights(x: &[f64], r: f64) -> Vec<f64> {
    let caps: Vec<f64> = x.iter().map(|xi| xi.max(0.0) / r).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| caps[i].total_cmp(&caps[j]));
    let mut mu = vec![0.0; x.len()];
    let mut remaining = 1.0;
    for (k, &i) in order.iter().enumerate() {
        let share = remaining / (x.len() - k) as f64;
        if caps[i] < share {
            mu[i] = caps[i];
            remaining -= caps[i];
        } else {
            for &j in &order[k..] {
                mu[j] = share;
            }
            break;
        }
    }
    mu
}

fn label_in_window(a: &[u32], q: f64, w: &[f64]) -> usize {
    let pos: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    let wn: Vec<f64> = pos.iter().map(|v| v / total).collect();
    let u: Vec<f64> = a.iter().map(|&ai| ai as f64 / q).collect();
    crate::labeling::sperner_label(&u, &wn).unwrap_or_else(|| {
        // Rounding can push every image coordinate above `u`; take the
        // least increased one.
        (0..u.len())
            .filter(|&i| a[i] > 0)
            .min_by(|&i, &j| (wn[i] - u[i]).total_cmp(&(wn[j] - u[j])))
            .expect("some coordinate is positive")
    })
}

fn run_level<F>(
    f: &F,
    grid: &SubdivisionGrid,
    anchor: &[f64],
    r: f64,
    opts: &RefineOptions,
    seed: u64,
) -> Result<Outcome, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    let n = grid.n();
    let q = grid.m() as f64;
    let point = |v: usize| -> Vec<f64> {
        grid.vertex(v)
            .iter()
            .zip(anchor)
            .map(|(&ai, c)| c + r * (ai as f64 / q))
            .collect()
    };
    let one = |v: usize| -> Result<(Vec<f64>, f64, usize, Vec<bool>), FixedPointError> {
        let p = point(v);
        let y = eval_checked(f, &p)?;
        let w: Vec<f64> = y.iter().zip(anchor).map(|(yi, c)| (yi - c) / r).collect();
        let inside = w.iter().all(|wi| *wi >= 0.0);
        let label = label_in_window(grid.vertex(v), q, &w);
        let honest: Vec<bool> = (0..=n).map(|i| inside || y[i] <= p[i]).collect();
        Ok((p.clone(), max_norm_dist(&y, &p), label, honest))
    };
    #[cfg(feature = "parallel")]
    let verts: Vec<_> = {
        use rayon::prelude::*;
        (0..grid.num_vertices())
            .into_par_iter()
            .map(one)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let verts: Vec<_> = (0..grid.num_vertices()).map(one).collect::<Result<_, _>>()?;

    let mut best: Option<(usize, f64)> = None;
    let mut low: Vec<(f64, usize)> = Vec::new();
    let mut seen = vec![false; n + 1];
    for (c, vs) in grid.cells().enumerate() {
        let min_res = vs
            .iter()
            .map(|&v| verts[v as usize].1)
            .fold(f64::INFINITY, f64::min);
        if min_res < opts.witness_floor {
            low.push((min_res, c));
        }
        seen.iter_mut().for_each(|s| *s = false);
        let accepted = vs.iter().all(|&v| {
            let (_, _, l, honest) = &verts[v as usize];
            honest[*l] && !std::mem::replace(&mut seen[*l], true)
        });
        if !accepted {
            continue;
        }
        for &v in vs {
            let res = verts[v as usize].1;
            if best.is_none_or(|(_, b)| res < b) {
                best = Some((v as usize, res));
            }
        }
    }

    low.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, c) in low.iter().take(WITNESS_CELLS) {
        let corners: Vec<Vec<f64>> = grid.cell(c).iter().map(|&v| verts[v as usize].0.clone()).collect();
        let Some(pair) = pair_search(f, &corners, opts.delta_check, opts.samples, seed ^ c as u64)? else {
            continue;
        };
        if pair.value < opts.witness_floor {
            return Ok(Outcome {
                best: best.map(|(v, res)| (verts[v].0.clone(), res)),
                witness: Some(Witness {
                    x: pair.x,
                    y: pair.y,
                    residual_x: pair.residual_x,
                    residual_y: pair.residual_y,
                    distance: pair.distance,
                    delta: opts.delta_check,
                    floor: opts.witness_floor,
                }),
            });
        }
    }
    Ok(Outcome {
        best: best.map(|(v, res)| (verts[v].0.clone(), res)),
        witness: None,
    })
}

fn finish(
    status: FixedPointStatus,
    x: Vec<f64>,
    residual: f64,
    trace: Vec<TraceEntry>,
    witness: Option<Witness>,
    modulus: &Modulus,
) -> FixedPointResult {
    FixedPointResult {
        status,
        point: BarycentricPoint::from_raw(x),
        residual,
        trace,
        witness,
        heuristic_modulus: modulus.heuristic,
    }
}

pub(super) fn refine<F>(
    f: &F,
    modulus: &Modulus,
    opts: &RefineOptions,
) -> Result<FixedPointResult, FixedPointError>
where
    F: SimplexMap<f64> + ?Sized,
{
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(FixedPointError::InvalidTolerance(opts.tol));
    }
    let n = f.dim();
    let origin = vec![0.0; n + 1];

    let g0 = SubdivisionGrid::with_budget(n, 4, opts.cell_budget)?;
    let out = run_level(f, &g0, &origin, 1.0, opts, opts.seed)?;
    let (mut x, mut res) = out.best.ok_or(SpernerError::SearchExhausted)?;
    let mut trace = vec![TraceEntry {
        level: 0,
        eps: modulus.residual_bound(n, 0.25),
        m: 4,
        window: 1.0,
        mesh: 0.25,
        point: x.clone(),
        residual: res,
    }];
    if let Some(w) = out.witness {
        return Ok(finish(FixedPointStatus::NonContractionWitness, x, res, trace, Some(w), modulus));
    }

    let mut k = if res > 0.0 {
        (-res.log2()).ceil().max(1.0) as usize
    } else {
        (-opts.tol.log2()).ceil().max(1.0) as usize
    };
    let cells = opts.window_cells.min(opts.cell_budget.min(usize::MAX as u64) as usize);
    let q_cap = ((cells as f64).powf(1.0 / n as f64).floor() as usize).max(2);
    let mut grids: HashMap<usize, SubdivisionGrid> = HashMap::new();

    for level in 1..=opts.max_levels {
        let target = 0.5f64.powi(k as i32);
        let h = modulus
            .mesh_for(n, target)
            .ok_or(FixedPointError::NotConverged { levels: level - 1, residual: res })?;
        let mut r = (WINDOW_FACTOR * (n + 1) as f64 * res)
            .clamp(MIN_CELLS_PER_SIDE as f64 * h, q_cap as f64 * h)
            .min(1.0);
        // Mesh actually used; coarser than `h` once the window outgrows
        // `q_cap` cells per side.
        let mut mesh_cap = h;
        let seed = opts.seed.wrapping_add(level as u64);
        let (next, m_used, mesh) = loop {
            let q = ((r / mesh_cap).ceil() as usize).max(1);
            if let std::collections::hash_map::Entry::Vacant(e) = grids.entry(q) {
                e.insert(SubdivisionGrid::with_budget(n, q, opts.cell_budget)?);
            }
            let g = &grids[&q];
            let out = if r >= 1.0 {
                run_level(f, g, &origin, 1.0, opts, seed)?
            } else {
                let mu = center_weights(&x, r);
                let anchor: Vec<f64> = x.iter().zip(&mu).map(|(xi, m)| (xi - r * m).max(0.0)).collect();
                run_level(f, g, &anchor, r, opts, seed)?
            };
            let mesh = r / q as f64;
            if let Some(w) = out.witness {
                let (bx, br) = out.best.unwrap_or((x.clone(), res));
                trace.push(TraceEntry {
                    level,
                    eps: target.max(modulus.residual_bound(n, mesh)),
                    m: q,
                    window: r,
                    mesh,
                    point: bx.clone(),
                    residual: br,
                });
                return Ok(finish(FixedPointStatus::NonContractionWitness, bx, br, trace, Some(w), modulus));
            }
            if let Some(b) = out.best {
                break (b, q, mesh);
            }
            if r >= 1.0 {
                return Err(SpernerError::SearchExhausted.into());
            }
            r = (r * 4.0).min(1.0);
            mesh_cap = mesh_cap.max(r / q_cap as f64);
        };
        let step = max_norm_dist(&next.0, &x);
        (x, res) = next;
        let reached = mesh <= h;
        trace.push(TraceEntry {
            level,
            eps: if reached { target } else { modulus.residual_bound(n, mesh) },
            m: m_used,
            window: r,
            mesh,
            point: x.clone(),
            residual: res,
        });
        if step <= opts.tol && res <= opts.tol {
            return Ok(finish(FixedPointStatus::Converged, x, res, trace, None, modulus));
        }
        if reached {
            k += 1;
        }
    }
    Err(FixedPointError::NotConverged {
        levels: opts.max_levels,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::refine_fixed_point;
    use crate::mapspec::parse_map;

    #[test]
    fn center_weights_respect_caps() {
        let mu = center_weights(&[0.5, 0.3, 0.2], 0.1);
        assert!(mu.iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-15));
        let mu = center_weights(&[0.0, 0.01, 0.99], 0.1);
        assert_eq!(mu[0], 0.0);
        assert!((mu[1] - 0.1).abs() < 1e-12);
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_converges_to_the_barycenter() {
        for (n, text) in [(2, "rotate"), (3, "rotate k=1"), (3, "rotate k=3")] {
            let f = parse_map(text, n).unwrap();
            let out = refine_fixed_point(&f, &Modulus::lipschitz(1.0), &RefineOptions::new(1e-6)).unwrap();
            assert_eq!(out.status, FixedPointStatus::Converged, "{text} n={n}");
            let b = 1.0 / (n + 1) as f64;
            for c in out.point.coords() {
                assert!((c - b).abs() <= 1e-6, "{text} n={n}: {:?}", out.point.coords());
            }
            for w in out.trace.windows(2) {
                assert!(w[1].residual <= w[1].eps);
            }
        }
    }

    #[test]
    fn identity_gives_a_witness() {
        let f = parse_map("identity", 2).unwrap();
        let out = refine_fixed_point(&f, &Modulus::lipschitz(1.0), &RefineOptions::new(1e-6)).unwrap();
        assert_eq!(out.status, FixedPointStatus::NonContractionWitness);
        let w = out.witness.unwrap();
        assert!(w.distance >= w.delta);
    }

    #[test]
    fn boundary_fixed_point() {
        // Moves half of x1 and x2 onto x0; the fixed point is the corner e0.
        let f = parse_map("g0 = x0 + 0.5*x1 + 0.5*x2; g1 = 0.5*x1; g2 = 0.5*x2", 2).unwrap();
        let out = refine_fixed_point(&f, &Modulus::lipschitz(1.0), &RefineOptions::new(1e-7)).unwrap();
        assert_eq!(out.status, FixedPointStatus::Converged);
        assert!(out.residual <= 1e-7);
        assert!(out.point.coords()[0] > 1.0 - 1e-6);
    }
}
