use hybrid_stability::fields::{boundary_trace, BoundaryTrace, Grid, ScalarField};
use hybrid_stability::forward::{assemble, eigen_gap, solve_dirichlet, SolveMethod, SolverOptions};
use hybrid_stability::Error;
use nalgebra::DMatrix;

fn max_err(u: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = u.grid();
    (0..g.len())
        .map(|i| {
            let (x, y) = g.coords(i);
            (u.values()[i] - exact(x, y)).abs()
        })
        .fold(0.0, f64::max)
}

fn cos_product_error(n: usize) -> f64 {
    let g = Grid::unit_square(n).unwrap();
    let q = ScalarField::constant(&g, 2.0).unwrap();
    let trace = BoundaryTrace::from_fn(&g, |x, y| x.cos() * y.cos());
    let u = solve_dirichlet(&q, &trace, &SolverOptions::default())
        .unwrap()
        .u;
    max_err(&u, |x, y| x.cos() * y.cos())
}

#[test]
fn manufactured_cos_product_converges_at_second_order() {
    let e: Vec<f64> = [17, 33, 65].iter().map(|&n| cos_product_error(n)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}, errors {e:?}");
    }
}

#[test]
fn manufactured_sine_in_one_dimension() {
    // u = sin x solves u'' + u = 0; the 3-point scheme has error O(h²)
    let mut prev: Option<f64> = None;
    for n in [33, 65, 129] {
        let g = Grid::interval(n, 1.0).unwrap();
        let q = ScalarField::constant(&g, 1.0).unwrap();
        let trace = BoundaryTrace::from_fn(&g, |x, _| x.sin());
        let u = solve_dirichlet(&q, &trace, &SolverOptions::default())
            .unwrap()
            .u;
        let err = max_err(&u, |x, _| x.sin());
        assert!(err < 0.1 * g.h * g.h, "n = {n}: {err}");
        if let Some(p) = prev {
            let order = (p / err).log2();
            assert!((1.9..=2.1).contains(&order), "order {order}");
        }
        prev = Some(err);
    }
}

#[test]
fn assembly_matches_hand_built_five_point_matrix() {
    let g = Grid::unit_square(5).unwrap();
    let q = ScalarField::from_fn(&g, |x, y| 1.0 + x + 2.0 * y).unwrap();
    let trace = BoundaryTrace::from_fn(&g, |x, y| 3.0 * x - y + 0.5);
    let asm = assemble(&q, &trace, None).unwrap();

    // unknowns are interior nodes (i, j) in 1..=3, row-major
    let inv = 16.0;
    let id = |i: usize, j: usize| (j - 1) * 3 + (i - 1);
    let mut a = DMatrix::<f64>::zeros(9, 9);
    let mut b = [0.0; 9];
    for j in 1..=3 {
        for i in 1..=3 {
            let r = id(i, j);
            let (x, y) = (i as f64 * 0.25, j as f64 * 0.25);
            a[(r, r)] = 1.0 + x + 2.0 * y - 4.0 * inv;
            for (ii, jj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if (1..=3).contains(&ii) && (1..=3).contains(&jj) {
                    a[(r, id(ii, jj))] = inv;
                } else {
                    b[r] -= inv * (3.0 * ii as f64 * 0.25 - jj as f64 * 0.25 + 0.5);
                }
            }
        }
    }
    let m = asm.op.matrix();
    assert_eq!(m.dim(), 9);
    for r in 0..9 {
        assert!(m.row(r).count() <= 5);
        for c in 0..9 {
            assert!((m.get(r, c) - a[(r, c)]).abs() < 1e-12, "({r}, {c})");
        }
        assert!((asm.load[r] - b[r]).abs() < 1e-12, "load {r}");
    }
    assert!(m.asymmetry() <= 1e-14);
}

#[test]
fn eigen_gap_matches_dense_symmetric_eigensolver() {
    let g = Grid::unit_square(12).unwrap();
    let q = ScalarField::from_fn(&g, |x, y| 20.0 + 10.0 * (3.0 * x).sin() * y).unwrap();
    let trace = boundary_trace(&q);
    let dense = assemble(&q, &trace, None).unwrap().op.matrix().to_dense();
    let oracle = dense
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(f64::INFINITY, f64::min);
    let est = eigen_gap(&q, &SolverOptions::default());
    assert!(est.converged);
    assert!(
        (est.gap - oracle).abs() <= 1e-8 * oracle.max(1.0),
        "{} vs {oracle}",
        est.gap
    );
}

#[test]
fn eigen_gap_of_interval_laplacian_is_closed_form() {
    let n = 41;
    let g = Grid::interval(n, 1.0).unwrap();
    let h = g.h;
    let q = ScalarField::constant(&g, 0.0).unwrap();
    let exact = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
    let est = eigen_gap(&q, &SolverOptions::default());
    assert!((est.gap - exact).abs() <= 1e-9 * exact);
}

#[test]
fn planted_eigenvalue_shift_is_recovered() {
    let g = Grid::unit_square(17).unwrap();
    let h = g.h;
    let lambda1 = 4.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
    let q = ScalarField::constant(&g, lambda1 + 0.01).unwrap();
    let est = eigen_gap(&q, &SolverOptions::default());
    assert!((est.gap - 0.01).abs() < 1e-6, "{}", est.gap);
}

#[test]
fn exact_resonance_is_reported_near_singular() {
    let g = Grid::unit_square(17).unwrap();
    let h = g.h;
    let lambda1 = 4.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
    let q = ScalarField::constant(&g, lambda1).unwrap();
    let trace = BoundaryTrace::from_fn(&g, |x, y| 1.0 + x * y);
    match solve_dirichlet(&q, &trace, &SolverOptions::default()) {
        Err(Error::NearSingular { gap, threshold, .. }) => assert!(gap < threshold),
        other => panic!(
            "expected NearSingular, got {:?}",
            other.map(|r| r.residual_linf)
        ),
    }
}

#[test]
fn zero_data_gives_degenerate_zero_solution() {
    // the discrete first eigenvalue differs from 2π², so the operator is regular
    let g = Grid::unit_square(17).unwrap();
    let q = ScalarField::constant(&g, 2.0 * std::f64::consts::PI.powi(2)).unwrap();
    let rep = solve_dirichlet(&q, &BoundaryTrace::zero(&g), &SolverOptions::default()).unwrap();
    assert!(rep.degenerate);
    assert_eq!(rep.method, SolveMethod::Trivial);
    assert!(rep.u.values().iter().all(|&v| v == 0.0));
}

#[test]
fn mismatched_grids_are_rejected() {
    let q = ScalarField::constant(&Grid::unit_square(9).unwrap(), 1.0).unwrap();
    let trace = BoundaryTrace::zero(&Grid::unit_square(5).unwrap());
    assert!(matches!(
        assemble(&q, &trace, None),
        Err(Error::GridMismatch)
    ));
}
