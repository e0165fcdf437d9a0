use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fixsim::construction::{fixed_point_of_construction, ConstructionError};
use fixsim::fixed_point::{
    approx_fixed_point_with_budget, estimate_modulus, FixedPointError, FixedPointResult,
};
use fixsim::grid::{cell_budget_from_env, GridError, CELL_BUDGET_ENV};
use fixsim::labeling::{label_from_function, random_admissible, LabelError, LabelingJson};
use fixsim::mapspec::eval_map_exact;
use fixsim::scalar::{format_rational, max_norm_dist, parse_rational};
use fixsim::sperner::count_fully_labeled;
use fixsim::{
    find_fully_labeled, parse_map, refine_fixed_point, render_svg, roundtrip_check,
    FixedPointStatus, Labeling, MapSpec, Modulus, Rational, RefineOptions, RenderOptions,
    RoundTripOptions, Strategy, SubdivisionGrid, VertexMap,
};
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "fixsim", version, about = "Sperner labelings and approximate fixed points on the simplex")]
struct Cli {
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use exact rational arithmetic where the command supports it.
    #[arg(long, global = true)]
    rational: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the subdivision of the n-simplex into m^n cells.
    Grid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a grid from a map, or draw a random admissible labeling.
    Label {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        map: MapSource,
        /// Draw a random admissible labeling instead of labeling a map.
        #[arg(long, conflicts_with_all = ["map", "map_file"])]
        random_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a fully labeled cell of a labeling.
    Sperner {
        #[arg(long)]
        labeling: PathBuf,
        /// auto, exhaustive or path.
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate a fixed point of a map.
    Fixpoint {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        map: MapSource,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, conflicts_with_all = ["modulus_table", "estimate_modulus"])]
        lipschitz: Option<f64>,
        /// Modulus table "eps:delta,eps:delta,...".
        #[arg(long, conflicts_with = "estimate_modulus")]
        modulus_table: Option<String>,
        /// Estimate a Lipschitz constant by sampling (heuristic).
        #[arg(long)]
        estimate_modulus: bool,
        /// Solve on one global grid sized for this residual instead of refining.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the piecewise-linear map of a labeling and its exact fixed point.
    Converse {
        #[arg(long)]
        labeling: PathBuf,
        /// Displacement as p/q; defaults to half the admissible bound.
        #[arg(long)]
        tau: Option<String>,
        /// Also run the floating-point solver on the constructed map.
        #[arg(long)]
        solve: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a 2-dimensional grid or labeling as SVG.
    Render {
        #[arg(long, required_unless_present = "labeling")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "labeling")]
        m: Option<usize>,
        #[arg(long, conflicts_with_all = ["n", "m"])]
        labeling: Option<PathBuf>,
        #[command(flatten)]
        map: MapSource,
        /// Point to mark, as comma-separated barycentric coordinates.
        #[arg(long, value_delimiter = ',')]
        marker: Option<Vec<f64>>,
        #[arg(long)]
        hide_labels: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct MapSource {
    /// Map text: a builtin or "g0 = ...; g1 = ...".
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    map_file: Option<PathBuf>,
}

enum Failure {
    Invalid(String, Option<Value>),
    Resource(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(..) => 2,
            Failure::Resource(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        match e {
            GridError::ResourceLimit { .. } => Failure::Resource(e.to_string()),
            _ => Failure::Invalid(e.to_string(), None),
        }
    }
}

impl From<LabelError> for Failure {
    fn from(e: LabelError) -> Self {
        Failure::Invalid(e.to_string(), None)
    }
}

impl From<FixedPointError> for Failure {
    fn from(e: FixedPointError) -> Self {
        match e {
            FixedPointError::Grid(g) => g.into(),
            FixedPointError::InvalidTolerance(_)
            | FixedPointError::InvalidModulus(_)
            | FixedPointError::Map(_)
            | FixedPointError::MapRange { .. } => Failure::Invalid(e.to_string(), None),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<ConstructionError> for Failure {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Inadmissible(v) => Failure::Invalid(
                format!("labeling is not admissible ({} violations)", v.len()),
                Some(json!({ "violations": v })),
            ),
            ConstructionError::GridMismatch
            | ConstructionError::TauTooLarge { .. }
            | ConstructionError::TauNotPositive(_) => Failure::Invalid(e.to_string(), None),
            ConstructionError::Solver(s) => s.into(),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into(), None)
}

fn budget() -> Result<u64, Failure> {
    match std::env::var(CELL_BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|b| b.is_finite() && *b >= 1.0)
            .map(|b| b as u64)
            .ok_or_else(|| invalid(format!("{CELL_BUDGET_ENV} must be a positive number, got '{v}'"))),
        Err(_) => Ok(cell_budget_from_env()),
    }
}

fn grid(n: usize, m: usize) -> Result<SubdivisionGrid, Failure> {
    Ok(SubdivisionGrid::with_budget(n, m, budget()?)?)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_map(src: &MapSource, n: usize) -> Result<Option<MapSpec>, Failure> {
    let text = match (&src.map, &src.map_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => read(p)?,
        (None, None) => return Ok(None),
    };
    parse_map(&text, n)
        .map(Some)
        .map_err(|e| invalid(e.to_string()))
}

fn require_map(src: &MapSource, n: usize) -> Result<MapSpec, Failure> {
    load_map(src, n)?.ok_or_else(|| invalid("one of --map or --map-file is required"))
}

fn load_labeling(path: &Path) -> Result<(Arc<SubdivisionGrid>, Labeling), Failure> {
    let json: LabelingJson =
        serde_json::from_str(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let g = Arc::new(grid(json.n, json.m)?);
    let lab = Labeling::from_json(&g, &json)?;
    Ok((g, lab))
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Other(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    emit_text(&text, out)
}

/// Exact residual of a float point, read as the nearest rational point.
fn exact_residual(f: &MapSpec, point: &[f64]) -> Result<Rational, Failure> {
    let raw: Vec<Rational> = point
        .iter()
        .map(|&x| Rational::from_float(x).unwrap_or_else(Rational::zero))
        .collect();
    let sum = raw.iter().fold(Rational::zero(), |a, b| a + b);
    let p: Vec<Rational> = raw.into_iter().map(|x| x / sum.clone()).collect();
    let p = fixsim::make_point(p).map_err(|e| Failure::Other(e.to_string()))?;
    let fp = eval_map_exact(f, &p).map_err(|e| invalid(e.to_string()))?;
    Ok(max_norm_dist(fp.coords(), p.coords()).abs())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Grid { n, m, out } => {
            let g = grid(n, m)?;
            eprintln!("grid n={n} m={m}: {} vertices, {} cells", g.num_vertices(), g.num_cells());
            emit(&g.to_json(), out.as_deref())?;
        }
        Command::Label { n, m, map, random_seed, out } => {
            let g = grid(n, m)?;
            let lab = match random_seed {
                Some(seed) => random_admissible(&g, &mut ChaCha8Rng::seed_from_u64(seed)),
                None => {
                    let f = require_map(&map, n)?;
                    if cli.rational {
                        label_from_function::<Rational, _>(&g, &f)?
                    } else {
                        label_from_function::<f64, _>(&g, &f)?
                    }
                }
            };
            emit(&lab.to_json(&g), out.as_deref())?;
        }
        Command::Sperner { labeling, strategy, out } => {
            let (g, lab) = load_labeling(&labeling)?;
            let count = count_fully_labeled(&g, &lab);
            let first = find_fully_labeled(&g, &lab, strategy).map_err(|e| Failure::Other(e.to_string()))?;
            eprintln!("{count} fully labeled cells");
            emit(&json!({ "count": count, "firstCell": g.cell(first) }), out.as_deref())?;
        }
        Command::Fixpoint {
            n,
            map,
            tol,
            lipschitz,
            modulus_table,
            estimate_modulus: estimate,
            eps,
            out,
        } => {
            let f = require_map(&map, n)?;
            let modulus = match (lipschitz, modulus_table, estimate) {
                (Some(l), _, _) => Modulus::try_lipschitz(l)?,
                (_, Some(t), _) => Modulus::parse_table(&t)?,
                (_, _, true) => estimate_modulus(&f, 4096, 0x5eed)?,
                _ => match f.declared_lipschitz() {
                    Some(l) => Modulus::lipschitz(l),
                    None => {
                        return Err(invalid(
                            "expression maps need --lipschitz, --modulus-table or --estimate-modulus",
                        ))
                    }
                },
            };
            if modulus.heuristic {
                eprintln!("warning: modulus is a sampled estimate, bounds are heuristic");
            }
            if let Some(eps) = eps {
                let a = approx_fixed_point_with_budget(&f, eps, &modulus, budget()?)?;
                let mut v = json!({
                    "status": "Converged",
                    "point": a.point,
                    "residual": a.residual,
                    "trace": [{ "m": a.m, "residual": a.residual }],
                    "witness": null,
                    "bound": a.bound,
                });
                if cli.rational {
                    v["exactResidual"] = json!(format_rational(&exact_residual(&f, a.point.coords())?));
                }
                emit(&v, out.as_deref())?;
                return Ok(0);
            }
            let mut opts = RefineOptions::new(tol);
            opts.cell_budget = budget()?;
            let result: FixedPointResult = refine_fixed_point(&f, &modulus, &opts)?;
            let mut v = serde_json::to_value(&result).map_err(|e| Failure::Other(e.to_string()))?;
            if cli.rational {
                v["exactResidual"] = json!(format_rational(&exact_residual(&f, result.point.coords())?));
            }
            eprintln!(
                "{:?} after {} levels, residual {:e}",
                result.status,
                result.trace.len(),
                result.residual
            );
            emit(&v, out.as_deref())?;
            if result.status == FixedPointStatus::NonContractionWitness {
                return Ok(3);
            }
        }
        Command::Converse { labeling, tau, solve, out } => {
            let (g, lab) = load_labeling(&labeling)?;
            let tau = tau
                .map(|t| parse_rational(&t).ok_or_else(|| invalid(format!("tau must be p/q, got '{t}'"))))
                .transpose()?;
            if solve {
                let opts = RoundTripOptions { tau, ..Default::default() };
                emit(&roundtrip_check(g, lab, &opts)?, out.as_deref())?;
            } else {
                let vm = VertexMap::build(Arc::clone(&g), lab, tau)?;
                let (z, cell) = fixed_point_of_construction(&vm)?;
                emit(
                    &json!({
                        "tau": format_rational(vm.tau()),
                        "fixedPoint": z.coords().iter().map(format_rational).collect::<Vec<_>>(),
                        "cell": g.cell(cell),
                        "exact": true,
                        "lipschitz": vm.lipschitz_bound(),
                    }),
                    out.as_deref(),
                )?;
            }
        }
        Command::Render { n, m, labeling, map, marker, hide_labels, out } => {
            let (g, lab) = match labeling {
                Some(p) => {
                    let (g, lab) = load_labeling(&p)?;
                    (g, Some(lab))
                }
                None => {
                    let (n, m) = (n.unwrap_or(0), m.unwrap_or(0));
                    let g = Arc::new(grid(n, m)?);
                    let lab = match load_map(&map, n)? {
                        Some(f) => Some(label_from_function::<f64, _>(&g, &f)?),
                        None => None,
                    };
                    (g, lab)
                }
            };
            let opts = RenderOptions { marker, hide_labels };
            let svg = render_svg(&g, lab.as_ref(), &opts).map_err(|e| invalid(e.to_string()))?;
            emit_text(&svg, out.as_deref())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let code = f.code();
            let (msg, detail) = match f {
                Failure::Invalid(m, d) => (m, d),
                Failure::Resource(m) | Failure::Other(m) => (m, None),
            };
            eprintln!("error: {msg}");
            if let Some(d) = detail {
                println!("{}", serde_json::to_string_pretty(&d).unwrap_or_default());
            }
            ExitCode::from(code)
        }
    }
}
