//! SVG pictures of 2-dimensional subdivisions.

use std::fmt::Write;

use thiserror::Error;

use crate::grid::SubdivisionGrid;
use crate::labeling::{is_fully_labeled, Labeling};

pub const WIDTH: f64 = 1000.0;
pub const HEIGHT: f64 = 866.0;
const MARGIN: f64 = 40.0;
const LABEL_COLORS: [&str; 3] = ["#d1495b", "#00798c", "#edae49"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("only 2-dimensional grids can be rendered, got n = {0}")]
    UnsupportedDimension(usize),
    #[error("labeling does not belong to this grid")]
    GridMismatch,
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Extra point drawn as a cross, e.g. a solver result.
    pub marker: Option<Vec<f64>>,
    /// Hide vertex labels on dense grids.
    pub hide_labels: bool,
}

/// Screen position of a barycentric point: e0 bottom left, e1 bottom
/// right, e2 at the top.
pub fn project(p: &[f64]) -> (f64, f64) {
    (WIDTH * (p[1] + 0.5 * p[2]), HEIGHT * (1.0 - p[2]))
}

pub fn render_svg(
    grid: &SubdivisionGrid,
    labeling: Option<&Labeling>,
    opts: &RenderOptions,
) -> Result<String, RenderError> {
    if grid.n() != 2 {
        return Err(RenderError::UnsupportedDimension(grid.n()));
    }
    if labeling.is_some_and(|l| !l.matches(grid)) {
        return Err(RenderError::GridMismatch);
    }
    let pos: Vec<(f64, f64)> = (0..grid.num_vertices())
        .map(|v| project(grid.vertex_point::<f64>(v).coords()))
        .collect();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="{} {} {} {}">"#,
        -MARGIN,
        -MARGIN,
        WIDTH + 2.0 * MARGIN,
        HEIGHT + 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        "<style>.cell{{fill:none;stroke:#444;stroke-width:1.5}}.full{{fill:#9ccfd8;fill-opacity:.75}}\
         .label{{font:bold 22px sans-serif;text-anchor:middle;dominant-baseline:central}}</style>"
    );
    for (c, vs) in grid.cells().enumerate() {
        let full = labeling.is_some_and(|l| is_fully_labeled(grid, c, l));
        let pts: Vec<String> = vs
            .iter()
            .map(|&v| {
                let (x, y) = pos[v as usize];
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let class = if full { "cell full" } else { "cell" };
        let _ = writeln!(s, r#"<polygon class="{class}" data-cell="{c}" points="{}"/>"#, pts.join(" "));
    }
    if let Some(lab) = labeling {
        let radius = (150.0 / grid.m() as f64).clamp(3.0, 16.0);
        for (v, &(x, y)) in pos.iter().enumerate() {
            let l = lab.label(v);
            let color = LABEL_COLORS[l.min(2)];
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius:.1}" fill="{color}"/>"#);
            if !opts.hide_labels {
                let _ = writeln!(s, r#"<text class="label" x="{x:.2}" y="{y:.2}">{l}</text>"#);
            }
        }
    }
    if let Some(p) = &opts.marker {
        let (x, y) = project(p);
        let _ = writeln!(
            s,
            r##"<path class="marker" d="M{} {}L{} {}M{} {}L{} {}" stroke="#111" stroke-width="4"/>"##,
            x - 12.0,
            y - 12.0,
            x + 12.0,
            y + 12.0,
            x - 12.0,
            y + 12.0,
            x + 12.0,
            y - 12.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::label_from_function;
    use crate::mapspec::parse_map;

    #[test]
    fn labeled_grid() {
        let g = SubdivisionGrid::new(2, 4).unwrap();
        let f = parse_map("rotate", 2).unwrap();
        let lab = label_from_function::<f64, _>(&g, &f).unwrap();
        let svg = render_svg(&g, Some(&lab), &RenderOptions::default()).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 16);
        assert_eq!(svg.matches(r#"class="label""#).count(), 15);
        assert!(svg.contains(r#"width="1000" height="866""#));
        let full = crate::sperner::count_fully_labeled(&g, &lab) as usize;
        assert_eq!(svg.matches("cell full").count(), full);
    }

    #[test]
    fn mesh_only_and_dimension() {
        let g = SubdivisionGrid::new(2, 3).unwrap();
        let svg = render_svg(&g, None, &RenderOptions::default()).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 9);
        assert!(!svg.contains("<text"));
        let g3 = SubdivisionGrid::new(3, 2).unwrap();
        assert_eq!(
            render_svg(&g3, None, &RenderOptions::default()),
            Err(RenderError::UnsupportedDimension(3))
        );
    }

    #[test]
    fn corners_project_to_the_triangle() {
        assert_eq!(project(&[1.0, 0.0, 0.0]), (0.0, HEIGHT));
        assert_eq!(project(&[0.0, 1.0, 0.0]), (WIDTH, HEIGHT));
        assert_eq!(project(&[0.0, 0.0, 1.0]), (WIDTH / 2.0, 0.0));
    }
}
