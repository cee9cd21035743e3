mod support;

use ndarray::Array2;
use partial_ot::{
    barycenter2, build_init, euclidean_cost, init_barycenter2, multi_start, solve_exact_ot, solve_partial_gw,
    CostMatrix, FwOptions, GwProblem, Histogram, InitClouds, InitKind, InitStrategy, PointCloud,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn blobs(rng: &mut impl Rng, sizes: [usize; 2], centers: [[f64; 2]; 2], sd: f64) -> PointCloud {
    let noise = Normal::new(0.0, sd).unwrap();
    let mut rows = Vec::new();
    for (size, c) in sizes.iter().zip(centers) {
        for _ in 0..*size {
            rows.push(vec![c[0] + noise.sample(rng), c[1] + noise.sample(rng)]);
        }
    }
    PointCloud::from_rows(&rows).unwrap()
}

fn atom_cost(x: &Array2<f64>, a: [f64; 2], b: [f64; 2]) -> Array2<f64> {
    Array2::from_shape_fn((2, x.nrows()), |(k, i)| {
        let atom = if k == 0 { a } else { b };
        (atom[0] - x[[i, 0]]).powi(2) + (atom[1] - x[[i, 1]]).powi(2)
    })
}

#[test]
fn barycenter_matches_grid_search() {
    let mut rng = support::rng(17);
    let cloud = blobs(&mut rng, [3, 5], [[0.0, 0.0], [6.0, 2.0]], 0.3);
    let w = vec![1.0 / 8.0; 8];
    let prior = 3.0 / 8.0;
    let bary = barycenter2(&cloud, &Histogram::new(w.clone()).unwrap(), prior, 4, 50).unwrap();
    let fitted = *bary.objective_trace.last().unwrap();

    let h = 0.5;
    let x = cloud.points();
    let nodes: Vec<[f64; 2]> = (-4..=16)
        .flat_map(|i| (-4..=8).map(move |j| [i as f64 * h, j as f64 * h]))
        .collect();
    let b = [prior, 1.0 - prior];
    let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
    for &a in &nodes {
        for &c in &nodes {
            let v = support::exact_ot_lp(&b, &w, &atom_cost(x, a, c));
            if v < best.0 {
                best = (v, a, c);
            }
        }
    }
    // Snapping each atom to the grid moves it at most h/√2, which costs at
    // most h²/2 in W₂² given the optimal coupling.
    assert!(fitted <= best.0 + 1e-9, "fitted {fitted} grid {}", best.0);
    assert!(best.0 <= fitted + h * h / 2.0 + 1e-9);
    let grid_plan = solve_exact_ot(
        &Histogram::new(b.to_vec()).unwrap(),
        &Histogram::new(w.clone()).unwrap(),
        &CostMatrix::new(atom_cost(x, best.1, best.2)).unwrap(),
    )
    .unwrap();
    let assigned = |c: &Array2<f64>| -> Vec<bool> { (0..8).map(|i| c[[0, i]] > 0.5 / 8.0).collect() };
    assert_eq!(assigned(&bary.coupling), assigned(grid_plan.entries()));
    assert_eq!(
        assigned(&bary.coupling),
        vec![true, true, true, false, false, false, false, false]
    );
}

#[test]
fn separated_blobs_put_the_start_on_the_prior_cluster() {
    let mut rng = support::rng(2);
    let source = blobs(&mut rng, [6, 10], [[0.0, 0.0], [10.0, 0.0]], 0.5);
    let p = Histogram::uniform(16, 1.0);
    let q = Histogram::uniform(4, 6.0 / 16.0);
    let t = init_barycenter2(&source, &p, &q, 6.0 / 16.0, 8, 50).unwrap();
    let rows = t.row_marginals();
    for (i, r) in rows.iter().enumerate() {
        let expect = if i < 6 { 1.0 / 16.0 } else { 0.0 };
        assert!((r - expect).abs() < 1e-12, "row {i} carries {r}");
    }
}

/// Equal atom masses put the atoms' midpoint on the cloud mean; which
/// side holds the prior atom is up to the seed.
#[test]
fn symmetric_cloud_gives_symmetric_atoms() {
    let cloud = PointCloud::from_rows(&[vec![-2.0, 0.0], vec![-2.0, 1.0], vec![2.0, 0.0], vec![2.0, 1.0]]).unwrap();
    let w = Histogram::uniform(4, 1.0);
    let mut sides = std::collections::BTreeSet::new();
    for seed in 0..16 {
        let bary = barycenter2(&cloud, &w, 0.5, seed, 50).unwrap();
        let (a, b) = (bary.atoms.row(0), bary.atoms.row(1));
        assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1] - 1.0).abs() < 1e-12);
        if *bary.objective_trace.last().unwrap() < 0.25 + 1e-12 {
            assert!((a[0].abs() - 2.0).abs() < 1e-12);
            sides.insert(a[0] > 0.0);
        }
    }
    assert_eq!(sides.len(), 2, "both clusters should win for some seed");
}

#[test]
fn identical_points_exhaust_reseeds() {
    let cloud = PointCloud::from_rows(&vec![vec![0.5, -1.0]; 5]).unwrap();
    let p = Histogram::uniform(5, 1.0);
    let q = Histogram::uniform(2, 0.5);
    assert!(matches!(
        init_barycenter2(&cloud, &p, &q, 0.4, 0, 50),
        Err(partial_ot::Error::DegenerateCluster(_))
    ));
}

struct Setup {
    prob: GwProblem,
    source: PointCloud,
    target: PointCloud,
}

fn setup(rng: &mut impl Rng, n: usize, m: usize, frac: f64) -> Setup {
    let source = PointCloud::new(support::random_points(rng, n, 2), None).unwrap();
    let target = PointCloud::new(support::random_points(rng, m, 2), None).unwrap();
    let p = Histogram::new(support::rational_weights(rng, n, 1.0)).unwrap();
    let q = Histogram::new(support::rational_weights(rng, m, 1.0)).unwrap();
    let cs = euclidean_cost(&source, &source, 2.0).unwrap();
    let ct = euclidean_cost(&target, &target, 2.0).unwrap();
    let prob = GwProblem::new(cs, ct, p, q, frac).unwrap();
    Setup { prob, source, target }
}

impl Setup {
    fn clouds(&self) -> Option<InitClouds<'_>> {
        Some(InitClouds {
            source: &self.source,
            target: &self.target,
            exponent: 2.0,
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_start_is_feasible(seed in any::<u64>(), n in 2usize..9, m in 2usize..9, frac in 0.05f64..1.0) {
        let mut rng = support::rng(seed);
        let s = setup(&mut rng, n, m, frac);
        for kind in InitKind::ALL {
            let t = build_init(&InitStrategy::new(kind, seed), &s.prob, s.clouds()).unwrap();
            let r = t.partial_residual(s.prob.p().weights(), s.prob.q().weights(), frac);
            prop_assert!(r <= 1e-9, "{kind}: residual {r}");
        }
    }

    #[test]
    fn lloyd_objective_never_increases(seed in any::<u64>(), n in 3usize..30, prior in 0.05f64..0.95) {
        let mut rng = support::rng(seed);
        let cloud = PointCloud::new(support::random_points(&mut rng, n, 3), None).unwrap();
        let w = Histogram::new(support::rational_weights(&mut rng, n, 1.0)).unwrap();
        let bary = barycenter2(&cloud, &w, prior, seed, 50).unwrap();
        for pair in bary.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "{} then {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn starts_are_deterministic(seed in any::<u64>()) {
        let mut rng = support::rng(seed);
        let s = setup(&mut rng, 7, 5, 0.6);
        for kind in InitKind::ALL {
            let st = InitStrategy::new(kind, seed);
            let a = build_init(&st, &s.prob, s.clouds()).unwrap();
            let b = build_init(&st, &s.prob, s.clouds()).unwrap();
            prop_assert_eq!(a.entries(), b.entries());
        }
    }
}

#[test]
fn multi_start_picks_the_lowest_loss() {
    let mut rng = support::rng(23);
    let s = setup(&mut rng, 12, 9, 0.5);
    let opts = FwOptions::default();
    let strategies = [
        InitStrategy::new(InitKind::OuterProduct, 1),
        InitStrategy::new(InitKind::Barycenter2, 1),
        InitStrategy::new(InitKind::PartialW, 1),
    ];
    let all = multi_start(&s.prob, &strategies, s.clouds(), opts).unwrap();
    let manual: Vec<f64> = strategies
        .iter()
        .map(|st| {
            let init = build_init(st, &s.prob, s.clouds()).unwrap();
            solve_partial_gw(&s.prob, &init, opts).unwrap().loss()
        })
        .collect();
    assert_eq!(all.losses, manual.iter().map(|&l| Some(l)).collect::<Vec<_>>());
    let best = manual.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(all.best.loss(), best);
    assert_eq!(all.best_index, manual.iter().position(|&l| l == best).unwrap());
}

#[test]
fn single_and_duplicate_strategies() {
    let mut rng = support::rng(29);
    let s = setup(&mut rng, 8, 6, 0.4);
    let opts = FwOptions::default();
    let st = InitStrategy::new(InitKind::Barycenter2, 5);
    let direct = solve_partial_gw(&s.prob, &build_init(&st, &s.prob, s.clouds()).unwrap(), opts).unwrap();
    let one = multi_start(&s.prob, &[st], s.clouds(), opts).unwrap();
    assert_eq!(one.best.loss_trace, direct.loss_trace);
    assert_eq!(one.best.plan.entries(), direct.plan.entries());
    let two = multi_start(&s.prob, &[st, st], s.clouds(), opts).unwrap();
    assert_eq!(two.losses[0], two.losses[1]);
    assert_eq!(two.best_index, 0);
}

#[test]
fn failed_strategies_are_recorded() {
    let mut rng = support::rng(31);
    let s = setup(&mut rng, 5, 4, 0.5);
    let strategies = [
        InitStrategy::new(InitKind::PartialW, 0),
        InitStrategy::new(InitKind::OuterProduct, 0),
    ];
    let r = multi_start(&s.prob, &strategies, None, FwOptions::default()).unwrap();
    assert!(r.losses[0].is_none() && r.errors[0].is_some());
    assert_eq!(r.best_index, 1);
    assert!(multi_start(&s.prob, &strategies[..1], None, FwOptions::default()).is_err());
    assert!(multi_start(&s.prob, &[], None, FwOptions::default()).is_err());
}
