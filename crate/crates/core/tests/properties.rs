use std::sync::Arc;

use fixsim::construction::{displacement_on_cell, fixed_point_of_construction, CoordinateDisplacement};
use fixsim::fixed_point::{approx_fixed_point_on_grid, Modulus};
use fixsim::labeling::{check_admissible, label_from_function, random_admissible};
use fixsim::mapspec::{eval_map, BinOp, Expr, ExprMap};
use fixsim::sperner::count_fully_labeled;
use fixsim::{make_point, parse_map, MapSpec, Rational, Scalar, SubdivisionGrid, VertexMap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n + 1).prop_filter_map("degenerate", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.into_iter().map(|x| x / s).collect())
    })
}

fn expr(n: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-5.0f64..5.0).prop_map(Expr::Const),
        (0..=n).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div)
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
            (inner.clone(), -3i32..4).prop_map(|(e, k)| Expr::Pow(Box::new(e), k)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Min(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Max(Box::new(a), Box::new(b))),
        ]
    })
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn printed_maps_parse_back(comps in prop::collection::vec(expr(2), 3),
                               pts in prop::collection::vec(simplex_point(2), 100)) {
        let spec = MapSpec::Expression(ExprMap::new(2, comps.clone()).unwrap());
        let text = spec.to_string();
        let back = parse_map(&text, 2).unwrap();
        let MapSpec::Expression(back) = back else { panic!("not an expression map") };
        let orig = ExprMap::new(2, comps).unwrap();
        for p in &pts {
            for (a, b) in orig.raw(p).iter().zip(back.raw(p)) {
                prop_assert!(close(*a, b), "{text}: {a} vs {b}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn locate_reconstructs_the_point(n in 1usize..5, m in 1usize..9, seed in any::<u64>()) {
        let g = SubdivisionGrid::new(n, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let w: Vec<f64> = (0..=n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let s: f64 = w.iter().sum();
            let p = make_point(w.into_iter().map(|x| x / s).collect()).unwrap();
            let loc = g.locate(&p);
            prop_assert!(loc.weights.iter().all(|w| *w >= 0.0));
            prop_assert!((loc.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let back = g.combine(loc.cell, &loc.weights);
            for (a, b) in back.iter().zip(p.coords()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expression_output_is_on_the_simplex(comps in prop::collection::vec(expr(3), 4), p in simplex_point(3)) {
        let spec = MapSpec::Expression(ExprMap::new(3, comps).unwrap());
        let x = make_point(p).unwrap();
        if let Ok(y) = eval_map(&spec, &x) {
            prop_assert!(y.coords().iter().all(|c| *c >= 0.0));
            prop_assert!((y.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let again = eval_map(&spec, &x).unwrap();
            prop_assert_eq!(y.coords(), again.coords());
        }
    }

    #[test]
    fn map_labelings_are_admissible(seed in any::<u64>(), n in 1usize..4, m in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps: Vec<String> = (0..=n)
            .map(|i| {
                let a: f64 = rand::Rng::random_range(&mut rng, 0.1..2.0);
                let j = rand::Rng::random_range(&mut rng, 0..=n);
                format!("g{i} = {a} * x{i}^2 + x{j} + 0.01")
            })
            .collect();
        let f = parse_map(&comps.join("; "), n).unwrap();
        let g = SubdivisionGrid::new(n, m).unwrap();
        let lab = label_from_function::<f64, _>(&g, &f).unwrap();
        prop_assert!(check_admissible(&g, &lab).is_empty());
        prop_assert_eq!(count_fully_labeled(&g, &lab) % 2, 1);
    }

    #[test]
    fn construction_displacement_is_tau_over_n(seed in any::<u64>(), n in 1usize..4, m in 1usize..5) {
        let g = Arc::new(SubdivisionGrid::new(n, m).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lab = random_admissible(&g, &mut rng);
        let vm = VertexMap::build(Arc::clone(&g), lab, None).unwrap();
        let expected = vm.tau().clone() / Rational::from_int(n as i64);
        for c in 0..g.num_cells() {
            for d in displacement_on_cell(&vm, c).coordinates {
                if let CoordinateDisplacement::Absent { value } = d {
                    prop_assert_eq!(value, expected.clone());
                }
            }
        }
        let (z, cell) = fixed_point_of_construction(&vm).unwrap();
        prop_assert!(fixsim::labeling::is_fully_labeled(&g, cell, vm.labeling()));
        prop_assert_eq!(z, g.cell_barycenter::<Rational>(cell));
    }
}

/// Residual bound on fully labeled cells against a brute-force scan of all
/// vertices of all fully labeled cells.
#[test]
fn residual_bound_holds_on_every_fully_labeled_vertex() {
    let f = parse_map("g0 = x1^2 + 0.2; g1 = x2 + 0.1*x0; g2 = x0", 2).unwrap();
    let l = 2.0;
    for m in [5, 10, 20, 40] {
        let g = SubdivisionGrid::new(2, m).unwrap();
        let lab = label_from_function::<f64, _>(&g, &f).unwrap();
        let bound = Modulus::lipschitz(l).residual_bound(2, 1.0 / m as f64);
        let mut best = f64::INFINITY;
        for c in 0..g.num_cells() {
            if !fixsim::labeling::is_fully_labeled(&g, c, &lab) {
                continue;
            }
            for &v in g.cell(c) {
                let p = g.vertex_point::<f64>(v as usize);
                let r = fixsim::fixed_point::residual(&f, &p).unwrap();
                assert!(r <= bound, "m={m} cell {c}: {r} > {bound}");
                best = best.min(r);
            }
        }
        let a = approx_fixed_point_on_grid(&f, &g, fixsim::Strategy::Exhaustive).unwrap();
        assert_eq!(a.residual, best);
    }
}
