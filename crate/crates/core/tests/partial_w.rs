mod support;

use ndarray::{array, Array2};
use partial_ot::{lift_plan, solve_exact_ot, solve_partial_w, CostMatrix, Histogram, PartialProblem};
use proptest::prelude::*;
use rand::Rng;

fn problem(p: &[f64], q: &[f64], c: &Array2<f64>, s: f64) -> PartialProblem {
    PartialProblem::new(
        Histogram::new(p.to_vec()).unwrap(),
        Histogram::new(q.to_vec()).unwrap(),
        CostMatrix::new(c.clone()).unwrap(),
        s,
    )
    .unwrap()
}

#[test]
fn half_mass_example_matches_oracle() {
    let c = array![[1.0, 2.0], [3.0, 4.0]];
    let reference = support::partial_w_lp(&[0.5, 0.5], &[0.5, 0.5], &c, 0.5);
    assert!((reference - 0.5).abs() < 1e-12);
    let sol = solve_partial_w(&problem(&[0.5, 0.5], &[0.5, 0.5], &c, 0.5)).unwrap();
    assert!((sol.partial_cost - reference).abs() < 1e-12);
    assert_eq!(sol.plan.entries(), &array![[0.5, 0.0], [0.0, 0.0]]);
}

#[test]
fn full_mass_collapses_to_balanced() {
    let mut rng = support::rng(5);
    for _ in 0..20 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let p = support::rational_weights(&mut rng, n, 1.0);
        let q = support::rational_weights(&mut rng, m, 1.0);
        let c = support::random_cost(&mut rng, n, m);
        let partial = solve_partial_w(&problem(&p, &q, &c, 1.0)).unwrap();
        let full = solve_exact_ot(
            &Histogram::new(p).unwrap(),
            &Histogram::new(q).unwrap(),
            &CostMatrix::new(c).unwrap(),
        )
        .unwrap();
        assert!((partial.partial_cost - full.objective()).abs() < 1e-9);
    }
}

#[test]
fn matches_dense_lp_with_exact_offsets() {
    let mut rng = support::rng(21);
    for trial in 0..100 {
        let (n, m) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let tp = rng.random_range(1..=3) as f64 * 0.5;
        let tq = rng.random_range(1..=3) as f64 * 0.5;
        let p = support::rational_weights(&mut rng, n, tp);
        let q = support::rational_weights(&mut rng, m, tq);
        let c = support::random_cost(&mut rng, n, m);
        let s = [0.2, 0.5, 0.8][trial % 3] * tp.min(tq);
        let reference = support::partial_w_lp(&p, &q, &c, s);
        for xi in [0.0, 0.1, 1.0] {
            let prob = problem(&p, &q, &c, s).with_xi(xi).unwrap();
            let sol = solve_partial_w(&prob).unwrap();
            assert!((sol.partial_cost - reference).abs() < 1e-8);
            assert!(sol.corner.abs() <= 1e-10);
            let offset = xi * (tp + tq - 2.0 * s);
            assert!((sol.extended_objective - sol.partial_cost - offset).abs() < 1e-9);
            assert!(sol.plan.partial_residual(&p, &q, s) < 1e-9);
        }
    }
}

#[test]
fn lifted_plan_is_balanced_feasible() {
    let mut rng = support::rng(8);
    for _ in 0..30 {
        let (n, m) = (rng.random_range(1..=7), rng.random_range(1..=7));
        let p = support::rational_weights(&mut rng, n, 1.0);
        let q = support::rational_weights(&mut rng, m, 1.5);
        let c = support::random_cost(&mut rng, n, m);
        let prob = problem(&p, &q, &c, 0.6).with_xi(0.4).unwrap();
        let sol = solve_partial_w(&prob).unwrap();
        let lifted = lift_plan(&sol.plan, &prob).unwrap();
        let ext = partial_ot::extend(&prob).unwrap();
        assert!(lifted.marginal_residual(ext.p_bar.weights(), ext.q_bar.weights()) < 1e-9);
        assert!((lifted.objective() - sol.extended_objective).abs() < 1e-9);
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Array2<f64>)> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(1u32..10, n),
            prop::collection::vec(1u32..10, m),
            prop::collection::vec(0.0f64..10.0, n * m),
        )
            .prop_map(move |(a, b, c)| {
                let (sa, sb): (u32, u32) = (a.iter().sum(), b.iter().sum());
                (
                    a.iter().map(|&k| k as f64 / sa as f64).collect(),
                    b.iter().map(|&k| 1.3 * k as f64 / sb as f64).collect(),
                    Array2::from_shape_vec((n, m), c).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn restricted_objective_ignores_xi((p, q, c) in instance(), frac in 0.0f64..1.0, xi in -2.0f64..2.0) {
        let base = solve_partial_w(&problem(&p, &q, &c, frac)).unwrap();
        let shifted = solve_partial_w(&problem(&p, &q, &c, frac).with_xi(xi).unwrap()).unwrap();
        prop_assert!((base.partial_cost - shifted.partial_cost).abs() < 1e-9);
        prop_assert!(shifted.corner <= 1e-10);
    }

    #[test]
    fn cost_is_monotone_in_mass((p, q, c) in instance(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = solve_partial_w(&problem(&p, &q, &c, lo)).unwrap();
        let large = solve_partial_w(&problem(&p, &q, &c, hi)).unwrap();
        prop_assert!(small.partial_cost <= large.partial_cost + 1e-9);
        prop_assert!((large.mass_transported() - hi).abs() < 1e-9);
    }

    #[test]
    fn penalty_choice_does_not_change_optimum((p, q, c) in instance(), frac in 0.0f64..1.0, extra in 0.01f64..50.0) {
        let prob = problem(&p, &q, &c, frac);
        let max = prob.cost().max_entry();
        let base = solve_partial_w(&prob).unwrap();
        let other = solve_partial_w(&prob.clone().with_penalty(max + extra).unwrap()).unwrap();
        prop_assert!((base.partial_cost - other.partial_cost).abs() < 1e-9);
    }
}
