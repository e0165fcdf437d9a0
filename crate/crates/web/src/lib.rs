//! wasm-bindgen bindings for the browser demo in `www/`.

use std::sync::Arc;

use fixsim::construction::fixed_point_of_construction;
use fixsim::labeling::{label_from_function, random_admissible};
use fixsim::scalar::format_rational;
use fixsim::sperner::count_fully_labeled;
use fixsim::{
    parse_map, refine_fixed_point, render_svg, Modulus, RefineOptions, RenderOptions, SubdivisionGrid,
    VertexMap,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest m the page will draw.
const MAX_M: usize = 60;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn grid(m: usize) -> Result<SubdivisionGrid, JsValue> {
    if m == 0 || m > MAX_M {
        return Err(err(format!("m must be between 1 and {MAX_M}")));
    }
    SubdivisionGrid::new(2, m).map_err(err)
}

/// Labels the m-grid of the triangle by `map` and returns
/// `{"svg", "fullyLabeled"}` as JSON.
#[wasm_bindgen]
pub fn label_map(map: &str, m: usize) -> Result<String, JsValue> {
    let f = parse_map(map, 2).map_err(err)?;
    let g = grid(m)?;
    let lab = label_from_function::<f64, _>(&g, &f).map_err(err)?;
    let opts = RenderOptions {
        marker: None,
        hide_labels: m > 24,
    };
    let svg = render_svg(&g, Some(&lab), &opts).map_err(err)?;
    Ok(json!({ "svg": svg, "fullyLabeled": count_fully_labeled(&g, &lab) }).to_string())
}

/// Refines to tolerance `tol` and returns the solver result plus an SVG of
/// the labeled m-grid with the point marked.
#[wasm_bindgen]
pub fn solve(map: &str, lipschitz: f64, tol: f64, m: usize) -> Result<String, JsValue> {
    let f = parse_map(map, 2).map_err(err)?;
    let l = if lipschitz > 0.0 {
        lipschitz
    } else {
        f.declared_lipschitz()
            .ok_or_else(|| err("expression maps need a Lipschitz constant"))?
    };
    let modulus = Modulus::try_lipschitz(l).map_err(err)?;
    let mut opts = RefineOptions::new(tol);
    opts.cell_budget = 1_000_000;
    opts.window_cells = 50_000;
    let result = refine_fixed_point(&f, &modulus, &opts).map_err(err)?;
    let g = grid(m)?;
    let lab = label_from_function::<f64, _>(&g, &f).map_err(err)?;
    let ropts = RenderOptions {
        marker: Some(result.point.coords().to_vec()),
        hide_labels: m > 24,
    };
    let svg = render_svg(&g, Some(&lab), &ropts).map_err(err)?;
    Ok(json!({ "svg": svg, "result": result }).to_string())
}

/// Draws a random admissible labeling, builds its piecewise-linear map and
/// returns the exact fixed point with an SVG marking it.
#[wasm_bindgen]
pub fn random_converse(m: usize, seed: u64) -> Result<String, JsValue> {
    let g = Arc::new(grid(m)?);
    let lab = random_admissible(&g, &mut ChaCha8Rng::seed_from_u64(seed));
    let vm = VertexMap::build(Arc::clone(&g), lab, None).map_err(err)?;
    let (z, cell) = fixed_point_of_construction(&vm).map_err(err)?;
    let opts = RenderOptions {
        marker: Some(z.to_f64().into_coords()),
        hide_labels: m > 24,
    };
    let svg = render_svg(&g, Some(vm.labeling()), &opts).map_err(err)?;
    Ok(json!({
        "svg": svg,
        "tau": format_rational(vm.tau()),
        "fixedPoint": z.coords().iter().map(format_rational).collect::<Vec<_>>(),
        "cell": g.cell(cell),
        "exact": true,
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn label_and_solve() {
        let v = parse(&label_map("rotate", 6).unwrap());
        assert!(v["svg"].as_str().unwrap().starts_with("<svg"));
        assert_eq!(v["fullyLabeled"].as_u64().unwrap() % 2, 1);
        let v = parse(&solve("rotate", 0.0, 1e-6, 8).unwrap());
        assert_eq!(v["result"]["status"], "Converged");
        assert!(v["svg"].as_str().unwrap().contains("marker"));
    }

    #[test]
    fn converse_point_is_exact() {
        let v = parse(&random_converse(5, 7).unwrap());
        assert_eq!(v["exact"], true);
        assert_eq!(v["fixedPoint"].as_array().unwrap().len(), 3);
    }
}
