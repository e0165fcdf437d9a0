//! Self-maps of the simplex as runtime values.
//!
//! A map is either a builtin family, a list of component expressions, or a
//! piecewise-affine map built from a labeling file. Expression maps are
//! turned into self-maps by clamping negative components to zero and
//! dividing by the component sum, so the formula the user writes is only
//! followed up to that normalization.

mod expr;
mod parser;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

pub use expr::{BinOp, Expr};

use crate::construction::VertexMap;
use crate::grid::{cell_budget_from_env, SubdivisionGrid};
use crate::labeling::{Labeling, LabelingJson};
use crate::scalar::{parse_rational, Rational, Scalar};
use num_traits::{One, Signed, Zero};
use crate::simplex::BarycentricPoint;

/// Component sums at or below this are rejected by [`eval_map`].
pub const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("map has {got} components, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error("unknown builtin map '{0}'")]
    UnknownBuiltin(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("map output cannot be normalized: {0}")]
    DegenerateOutput(String),
    #[error("map is {got}-dimensional, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot load constructed map: {0}")]
    Load(String),
}

/// A self-map of the n-simplex evaluated in scalar type `S`.
pub trait SimplexMap<S: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, p: &BarycentricPoint<S>) -> Result<BarycentricPoint<S>, MapError>;
}

impl<S: Scalar, F: SimplexMap<S> + Send + ?Sized> SimplexMap<S> for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, p: &BarycentricPoint<S>) -> Result<BarycentricPoint<S>, MapError> {
        (**self).eval(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Identity { n: usize },
    /// Cyclic shift `out_i = x_{i - shift mod (n+1)}`.
    Rotate { n: usize, shift: usize },
    /// `(1 - t) x + t b` with `b` the barycenter.
    Pull { n: usize, t: f64 },
}

impl Builtin {
    pub fn dim(&self) -> usize {
        match *self {
            Builtin::Identity { n } | Builtin::Rotate { n, .. } | Builtin::Pull { n, .. } => n,
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Builtin::Identity { .. } => x.to_vec(),
            Builtin::Rotate { n, shift } => {
                let k = n + 1;
                (0..k).map(|i| x[(i + k - shift % k) % k]).collect()
            }
            Builtin::Pull { n, t } => {
                let b = 1.0 / (n as f64 + 1.0);
                x.iter().map(|xi| (1.0 - t) * xi + t * b).collect()
            }
        }
    }

    fn apply_exact(&self, x: &[Rational]) -> Result<Vec<Rational>, MapError> {
        match *self {
            Builtin::Identity { .. } => Ok(x.to_vec()),
            Builtin::Rotate { n, shift } => {
                let k = n + 1;
                Ok((0..k).map(|i| x[(i + k - shift % k) % k].clone()).collect())
            }
            Builtin::Pull { n, t } => {
                let t = Rational::from_float(t)
                    .ok_or_else(|| MapError::BadParameter(format!("pull t={t} is not finite")))?;
                let b = Rational::from_ratio(1, n as i64 + 1);
                let keep = Rational::one() - t.clone();
                Ok(x.iter().map(|xi| keep.clone() * xi + t.clone() * b.clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprMap {
    n: usize,
    components: Vec<Expr>,
}

impl ExprMap {
    /// Builds a map from `n + 1` component expressions.
    pub fn new(n: usize, components: Vec<Expr>) -> Result<Self, MapError> {
        if components.len() != n + 1 {
            return Err(MapError::Arity {
                expected: n + 1,
                got: components.len(),
            });
        }
        if let Some(i) = components.iter().filter_map(Expr::max_var).max() {
            if i > n {
                return Err(MapError::Dimension {
                    expected: n,
                    got: i,
                });
            }
        }
        Ok(Self { n, components })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Raw component values before normalization.
    pub fn raw(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|e| e.eval(x)).collect()
    }
}

#[derive(Debug, Clone)]
pub enum MapSpec {
    Builtin(Builtin),
    Expression(ExprMap),
    Constructed {
        source: String,
        map: Arc<VertexMap>,
    },
}

impl MapSpec {
    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Builtin(b) => b.dim(),
            MapSpec::Expression(e) => e.n,
            MapSpec::Constructed { map, .. } => map.grid().n(),
        }
    }

    /// Max-norm Lipschitz constant known for the map, if any.
    pub fn declared_lipschitz(&self) -> Option<f64> {
        match self {
            MapSpec::Builtin(_) => Some(1.0),
            MapSpec::Expression(_) => None,
            MapSpec::Constructed { map, .. } => Some(map.lipschitz_bound()),
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapSpec::Builtin(Builtin::Identity { .. }) => write!(f, "identity"),
            MapSpec::Builtin(Builtin::Rotate { shift, .. }) => write!(f, "rotate k={shift}"),
            MapSpec::Builtin(Builtin::Pull { t, .. }) => write!(f, "pull t={t}"),
            MapSpec::Expression(e) => {
                for (i, c) in e.components.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "g{i} = {c}")?;
                }
                Ok(())
            }
            MapSpec::Constructed { source, map } => write!(
                f,
                "constructed file={source} tau={}",
                crate::scalar::format_rational(map.tau())
            ),
        }
    }
}

/// Clamps negative components to zero and divides by the sum.
pub fn normalize(raw: Vec<f64>) -> Result<Vec<f64>, MapError> {
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(MapError::DegenerateOutput(format!("component evaluates to {bad}")));
    }
    let clamped: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= DEGENERATE_SUM {
        return Err(MapError::DegenerateOutput(format!(
            "clamped components sum to {sum}"
        )));
    }
    Ok(clamped.into_iter().map(|v| v / sum).collect())
}

/// Exact counterpart of [`normalize`].
pub fn normalize_exact(raw: Vec<Rational>) -> Result<Vec<Rational>, MapError> {
    let clamped: Vec<Rational> = raw
        .into_iter()
        .map(|v| if v.is_negative() { Rational::zero() } else { v })
        .collect();
    let sum = clamped.iter().fold(Rational::zero(), |a, b| a + b);
    if sum.is_zero() {
        return Err(MapError::DegenerateOutput("clamped components sum to 0".into()));
    }
    Ok(clamped.into_iter().map(|v| v / sum.clone()).collect())
}

/// Exact evaluation in rational arithmetic. Expression constants enter at
/// their binary floating-point value.
pub fn eval_map_exact(
    spec: &MapSpec,
    p: &BarycentricPoint<Rational>,
) -> Result<BarycentricPoint<Rational>, MapError> {
    let n = spec.dim();
    if p.dim() != n {
        return Err(MapError::Dimension {
            expected: n,
            got: p.dim(),
        });
    }
    match spec {
        MapSpec::Builtin(b) => Ok(BarycentricPoint::from_raw(b.apply_exact(p.coords())?)),
        MapSpec::Expression(e) => {
            let raw = e
                .components
                .iter()
                .map(|c| c.eval_exact(p.coords()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| MapError::DegenerateOutput("division by zero".into()))?;
            Ok(BarycentricPoint::from_raw(normalize_exact(raw)?))
        }
        MapSpec::Constructed { map, .. } => SimplexMap::<Rational>::eval(map.as_ref(), p),
    }
}

impl SimplexMap<Rational> for MapSpec {
    fn dim(&self) -> usize {
        MapSpec::dim(self)
    }

    fn eval(&self, p: &BarycentricPoint<Rational>) -> Result<BarycentricPoint<Rational>, MapError> {
        eval_map_exact(self, p)
    }
}

/// Evaluates a map at `p`. Builtins and constructed maps already land on
/// the simplex; expression output goes through [`normalize`].
pub fn eval_map(spec: &MapSpec, p: &BarycentricPoint<f64>) -> Result<BarycentricPoint<f64>, MapError> {
    let n = spec.dim();
    if p.dim() != n {
        return Err(MapError::Dimension {
            expected: n,
            got: p.dim(),
        });
    }
    match spec {
        MapSpec::Builtin(b) => Ok(BarycentricPoint::from_raw(b.apply(p.coords()))),
        MapSpec::Expression(e) => Ok(BarycentricPoint::from_raw(normalize(e.raw(p.coords()))?)),
        MapSpec::Constructed { map, .. } => SimplexMap::<f64>::eval(map.as_ref(), p),
    }
}

impl SimplexMap<f64> for MapSpec {
    fn dim(&self) -> usize {
        MapSpec::dim(self)
    }

    fn eval(&self, p: &BarycentricPoint<f64>) -> Result<BarycentricPoint<f64>, MapError> {
        eval_map(self, p)
    }
}

fn params<'a>(words: impl Iterator<Item = &'a str>) -> Result<Vec<(&'a str, &'a str)>, MapError> {
    words
        .map(|w| {
            w.split_once('=')
                .ok_or_else(|| MapError::BadParameter(format!("expected key=value, got '{w}'")))
        })
        .collect()
}

fn reject_unknown(name: &str, ps: &[(&str, &str)], allowed: &[&str]) -> Result<(), MapError> {
    match ps.iter().find(|(k, _)| !allowed.contains(k)) {
        Some((k, _)) => Err(MapError::BadParameter(format!("'{name}' takes no parameter '{k}'"))),
        None => Ok(()),
    }
}

/// Parses a map description for dimension `n`.
///
/// Accepts either a component list (`g0 = x1; g1 = x2; g2 = x0`) or a
/// builtin: `identity`, `rotate [k=<shift>]`, `pull t=<num>`,
/// `constructed file=<labeling.json> [tau=<p/q>]`.
pub fn parse_map(text: &str, n: usize) -> Result<MapSpec, MapError> {
    if n == 0 {
        return Err(MapError::BadParameter("dimension must be at least 1".into()));
    }
    if parser::is_component_list(text) {
        let comps = parser::parse_components(text, n)?;
        return Ok(MapSpec::Expression(ExprMap { n, components: comps }));
    }
    let mut words = text.split_whitespace();
    let name = words.next().unwrap_or("");
    let ps = params(words)?;
    let get = |key: &str| ps.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    match name {
        "identity" => {
            reject_unknown(name, &ps, &[])?;
            Ok(MapSpec::Builtin(Builtin::Identity { n }))
        }
        "rotate" => {
            reject_unknown(name, &ps, &["k"])?;
            let shift = match get("k") {
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| MapError::BadParameter(format!("rotate k must be a nonnegative integer, got '{v}'")))?,
                None => 1,
            };
            Ok(MapSpec::Builtin(Builtin::Rotate { n, shift }))
        }
        "pull" => {
            reject_unknown(name, &ps, &["t"])?;
            let t: f64 = get("t")
                .ok_or_else(|| MapError::BadParameter("pull needs t=<number>".into()))?
                .parse()
                .map_err(|_| MapError::BadParameter("pull t must be a number".into()))?;
            if !(0.0..=1.0).contains(&t) {
                return Err(MapError::BadParameter(format!("pull t={t} must lie in [0, 1]")));
            }
            Ok(MapSpec::Builtin(Builtin::Pull { n, t }))
        }
        "constructed" => {
            reject_unknown(name, &ps, &["file", "tau"])?;
            let file = get("file")
                .ok_or_else(|| MapError::BadParameter("constructed needs file=<path>".into()))?;
            let tau = get("tau")
                .map(|t| {
                    parse_rational(t)
                        .ok_or_else(|| MapError::BadParameter(format!("tau '{t}' is not a rational")))
                })
                .transpose()?;
            let map = load_constructed(Path::new(file), tau)?;
            if map.grid().n() != n {
                return Err(MapError::Dimension {
                    expected: n,
                    got: map.grid().n(),
                });
            }
            Ok(MapSpec::Constructed {
                source: file.to_string(),
                map: Arc::new(map),
            })
        }
        other => Err(MapError::UnknownBuiltin(other.to_string())),
    }
}

fn load_constructed(path: &Path, tau: Option<crate::scalar::Rational>) -> Result<VertexMap, MapError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MapError::Load(format!("{}: {e}", path.display())))?;
    let json: LabelingJson =
        serde_json::from_str(&text).map_err(|e| MapError::Load(format!("{}: {e}", path.display())))?;
    let grid = SubdivisionGrid::with_budget(json.n, json.m, cell_budget_from_env())
        .map_err(|e| MapError::Load(e.to_string()))?;
    let lab = Labeling::from_json(&grid, &json).map_err(|e| MapError::Load(e.to_string()))?;
    VertexMap::build(Arc::new(grid), lab, tau).map_err(|e| MapError::Load(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> BarycentricPoint<f64> {
        BarycentricPoint::new(c.len() - 1, c.to_vec()).unwrap()
    }

    #[test]
    fn rotation_from_components() {
        let spec = parse_map("g0=x1; g1=x2; g2=x0", 2).unwrap();
        let out = eval_map(&spec, &pt(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!(out.coords(), &[0.3, 0.5, 0.2]);
    }

    #[test]
    fn builtin_rotate_shifts_right() {
        let spec = parse_map("rotate", 2).unwrap();
        let out = eval_map(&spec, &pt(&[0.2, 0.3, 0.5])).unwrap();
        // (x0, x1, x2) -> (x2, x0, x1)
        assert_eq!(out.coords(), &[0.5, 0.2, 0.3]);
        let spec = parse_map("rotate k=2", 2).unwrap();
        let out = eval_map(&spec, &pt(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!(out.coords(), &[0.3, 0.5, 0.2]);
    }

    #[test]
    fn too_few_components() {
        assert_eq!(
            parse_map("g0=x0", 2).unwrap_err(),
            MapError::Arity { expected: 3, got: 1 }
        );
    }

    #[test]
    fn pull_lookup() {
        let spec = parse_map("pull t=0.3", 2).unwrap();
        assert!(matches!(spec, MapSpec::Builtin(Builtin::Pull { n: 2, t }) if t == 0.3));
        assert!(matches!(parse_map("pull", 2), Err(MapError::BadParameter(_))));
        assert!(matches!(parse_map("pull t=2", 2), Err(MapError::BadParameter(_))));
        assert!(matches!(parse_map("pull s=0.1", 2), Err(MapError::BadParameter(_))));
    }

    #[test]
    fn unknown_builtin() {
        assert_eq!(
            parse_map("spiral", 2).unwrap_err(),
            MapError::UnknownBuiltin("spiral".into())
        );
    }

    #[test]
    fn identity_is_exact() {
        let spec = parse_map("identity", 2).unwrap();
        let p = pt(&[0.2, 0.3, 0.5]);
        assert_eq!(eval_map(&spec, &p).unwrap(), p);
    }

    #[test]
    fn squares_are_normalized() {
        let spec = parse_map("g0 = x0^2; g1 = x1^2; g2 = x2^2", 2).unwrap();
        let out = eval_map(&spec, &pt(&[0.5, 0.5, 0.0])).unwrap();
        assert_eq!(out.coords(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn zero_map_is_degenerate() {
        let spec = parse_map("g0=0; g1=0; g2=0", 2).unwrap();
        assert!(matches!(
            eval_map(&spec, &pt(&[0.2, 0.3, 0.5])),
            Err(MapError::DegenerateOutput(_))
        ));
        let spec = parse_map("g0=1/x2; g1=0; g2=0", 2).unwrap();
        assert!(matches!(
            eval_map(&spec, &pt(&[0.5, 0.5, 0.0])),
            Err(MapError::DegenerateOutput(_))
        ));
    }

    #[test]
    fn negative_components_clamp() {
        let spec = parse_map("g0 = x0 - 0.5; g1 = x1; g2 = x2", 2).unwrap();
        let out = eval_map(&spec, &pt(&[0.25, 0.25, 0.5])).unwrap();
        assert_eq!(out.coords(), &[0.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn display_reparses() {
        for text in ["identity", "rotate k=2", "pull t=0.25", "g0 = x1; g1 = x0 * (1 - x1)^2"] {
            let n = if text.starts_with('g') { 1 } else { 2 };
            let spec = parse_map(text, n).unwrap();
            let again = parse_map(&spec.to_string(), n).unwrap();
            assert_eq!(spec.to_string(), again.to_string());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let spec = parse_map("identity", 2).unwrap();
        assert!(matches!(
            eval_map(&spec, &pt(&[0.5, 0.5])),
            Err(MapError::Dimension { .. })
        ));
    }

    #[test]
    fn exact_evaluation() {
        let r = |a, b| Rational::from_ratio(a, b);
        let p = BarycentricPoint::new(2, vec![r(1, 2), r(1, 3), r(1, 6)]).unwrap();
        let rot = parse_map("rotate", 2).unwrap();
        assert_eq!(eval_map_exact(&rot, &p).unwrap().coords(), &[r(1, 6), r(1, 2), r(1, 3)]);
        let pull = parse_map("pull t=0.5", 2).unwrap();
        assert_eq!(eval_map_exact(&pull, &p).unwrap().coords(), &[r(5, 12), r(1, 3), r(1, 4)]);
        let e = parse_map("g0 = x0^2; g1 = x1 - 1; g2 = max(x2, 0.25)", 2).unwrap();
        // raw (1/4, -2/3, 1/4) clamps to (1/4, 0, 1/4).
        assert_eq!(eval_map_exact(&e, &p).unwrap().coords(), &[r(1, 2), r(0, 1), r(1, 2)]);
        let bad = parse_map("g0 = 1 / (x0 - x0); g1 = x1; g2 = x2", 2).unwrap();
        assert!(matches!(eval_map_exact(&bad, &p), Err(MapError::DegenerateOutput(_))));
    }
}
