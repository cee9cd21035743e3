//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's solvers: every value is computed
//! from first principles so it can serve as an independent check.

#![allow(dead_code)]

use ndarray::{s, Array2};
use partial_ot::{CostMatrix, Histogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PIVOT_EPS: f64 = 1e-11;

/// Dense LP `min cᵀx` subject to `A_eq x = b_eq`, `A_le x ≤ b_le`, `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub c: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

/// Two-phase tableau simplex with Bland's rule. `None` when infeasible.
pub fn solve_lp(lp: &Lp) -> Option<(f64, Vec<f64>)> {
    let nv = lp.c.len();
    let ns = lp.le.len();
    let rows = lp.eq.len() + ns;
    let na = rows;
    let width = nv + ns + na + 1;
    let rhs = width - 1;
    let mut t = vec![vec![0.0; width]; rows];
    let mut basis = vec![0usize; rows];

    let all_rows = lp
        .eq
        .iter()
        .map(|r| (r, None))
        .chain(lp.le.iter().enumerate().map(|(k, r)| (r, Some(nv + k))));
    for (r, ((coef, b), slack)) in all_rows.enumerate() {
        assert_eq!(coef.len(), nv);
        t[r][..nv].copy_from_slice(coef);
        if let Some(sl) = slack {
            t[r][sl] = 1.0;
        }
        t[r][rhs] = *b;
        if *b < 0.0 {
            for v in t[r].iter_mut() {
                *v = -*v;
            }
        }
        t[r][nv + ns + r] = 1.0;
        basis[r] = nv + ns + r;
    }

    let mut phase1 = vec![0.0; width - 1];
    for a in nv + ns..nv + ns + na {
        phase1[a] = 1.0;
    }
    let any = vec![true; width - 1];
    run_bland(&mut t, &mut basis, &phase1, &any);
    let infeas: f64 = (0..rows).filter(|&r| basis[r] >= nv + ns).map(|r| t[r][rhs]).sum();
    if infeas > 1e-9 {
        return None;
    }
    for r in 0..rows {
        if basis[r] >= nv + ns {
            if let Some(j) = (0..nv + ns).find(|&j| t[r][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, r, j);
            }
        }
    }

    let mut phase2 = vec![0.0; width - 1];
    phase2[..nv].copy_from_slice(&lp.c);
    let mut allowed = vec![true; width - 1];
    for a in allowed.iter_mut().skip(nv + ns) {
        *a = false;
    }
    run_bland(&mut t, &mut basis, &phase2, &allowed);

    let mut x = vec![0.0; nv];
    for r in 0..rows {
        if basis[r] < nv {
            x[basis[r]] = t[r][rhs];
        }
    }
    let obj = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Some((obj, x))
}

fn run_bland(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: &[bool]) {
    let rows = t.len();
    let rhs = t[0].len() - 1;
    for _ in 0..100_000 {
        let entering = (0..rhs).find(|&j| {
            allowed[j] && !basis.contains(&j) && {
                let rc = cost[j] - (0..rows).map(|r| cost[basis[r]] * t[r][j]).sum::<f64>();
                rc < -1e-12
            }
        });
        let Some(j) = entering else { return };
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..rows {
            if t[r][j] > PIVOT_EPS {
                let ratio = t[r][rhs] / t[r][j];
                let better = match best {
                    None => true,
                    Some((b, _, bidx)) => ratio < b - 1e-14 || (ratio <= b + 1e-14 && basis[r] < bidx),
                };
                if better {
                    best = Some((ratio, r, basis[r]));
                }
            }
        }
        let Some((_, r, _)) = best else {
            panic!("oracle LP is unbounded");
        };
        pivot(t, basis, r, j);
    }
    panic!("oracle simplex did not terminate");
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, j: usize) {
    let piv = t[r][j];
    for v in t[r].iter_mut() {
        *v /= piv;
    }
    let pivot_row = t[r].clone();
    for (k, row) in t.iter_mut().enumerate() {
        if k != r {
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = j;
}

/// Optimal value of balanced OT by the dense LP.
pub fn exact_ot_lp(p: &[f64], q: &[f64], c: &Array2<f64>) -> f64 {
    let (n, m) = c.dim();
    let mut lp = Lp {
        c: c.iter().copied().collect(),
        ..Default::default()
    };
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        row[i * m..(i + 1) * m].fill(1.0);
        lp.eq.push((row, p[i]));
    }
    for j in 0..m {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        lp.eq.push((row, q[j]));
    }
    solve_lp(&lp).expect("balanced OT is feasible").0
}

/// Optimal value of partial OT: `T1 ≤ p`, `Tᵀ1 ≤ q`, `1ᵀT1 = s`.
pub fn partial_w_lp(p: &[f64], q: &[f64], c: &Array2<f64>, s: f64) -> f64 {
    restricted_lp(p, q, c, s, None).expect("partial OT is feasible")
}

/// Partial OT with rows in `active` forced to ship exactly `p_i` and all
/// other rows forced empty. `None` when the column capacities are too small.
pub fn pu_restricted_lp(p: &[f64], q: &[f64], c: &Array2<f64>, active: &[bool]) -> Option<f64> {
    let s: f64 = p.iter().zip(active).filter(|(_, a)| **a).map(|(w, _)| w).sum();
    restricted_lp(p, q, c, s, Some(active))
}

fn restricted_lp(p: &[f64], q: &[f64], c: &Array2<f64>, s: f64, active: Option<&[bool]>) -> Option<f64> {
    let (n, m) = c.dim();
    let mut lp = Lp {
        c: c.iter().copied().collect(),
        ..Default::default()
    };
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        row[i * m..(i + 1) * m].fill(1.0);
        match active {
            None => lp.le.push((row, p[i])),
            Some(a) if a[i] => lp.eq.push((row, p[i])),
            Some(_) => lp.eq.push((row, 0.0)),
        }
    }
    for j in 0..m {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        lp.le.push((row, q[j]));
    }
    lp.eq.push((vec![1.0; n * m], s));
    solve_lp(&lp).map(|r| r.0)
}

/// Minimum of `⟨C, T⟩` over all vertices of the transportation polytope,
/// found by solving every square basis of `n + m − 1` cells.
pub fn exact_ot_vertices(p: &[f64], q: &[f64], c: &Array2<f64>) -> f64 {
    let (n, m) = c.dim();
    let k = n + m - 1;
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(k);
    combinations(cells.len(), k, 0, &mut pick, &mut |subset| {
        // Equations: all n row sums and the first m − 1 column sums.
        let mut a = vec![vec![0.0; k + 1]; k];
        for (var, &idx) in subset.iter().enumerate() {
            let (i, j) = cells[idx];
            a[i][var] = 1.0;
            if j + 1 < m {
                a[n + j][var] = 1.0;
            }
        }
        for i in 0..n {
            a[i][k] = p[i];
        }
        for j in 0..m - 1 {
            a[n + j][k] = q[j];
        }
        if let Some(x) = gauss_solve(a) {
            if x.iter().all(|v| *v >= -1e-12) {
                let obj: f64 = subset.iter().zip(&x).map(|(&idx, v)| c[cells[idx]] * v).sum();
                best = best.min(obj);
            }
        }
    });
    best
}

fn combinations(n: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(n, k, i + 1, pick, f);
        pick.pop();
    }
}

fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..k).map(|r| a[r][k] / a[r][r]).collect())
}

/// `(M∘T)_ij = Σ_kl ½(Cs_ik − Ct_jl)² T_kl` by direct summation.
pub fn gw_contraction_brute(cs: &Array2<f64>, ct: &Array2<f64>, t: &Array2<f64>) -> Array2<f64> {
    let (n, m) = t.dim();
    Array2::from_shape_fn((n, m), |(i, j)| {
        let mut acc = 0.0;
        for k in 0..n {
            for l in 0..m {
                let d = cs[[i, k]] - ct[[j, l]];
                acc += 0.5 * d * d * t[[k, l]];
            }
        }
        acc
    })
}

/// `J(T) = Σ_ijkl ½(Cs_ik − Ct_jl)² T_ij T_kl` by direct summation.
pub fn gw_loss_brute(cs: &Array2<f64>, ct: &Array2<f64>, t: &Array2<f64>) -> f64 {
    let (n, m) = t.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..m {
            for k in 0..n {
                for l in 0..m {
                    let d = cs[[i, k]] - ct[[j, l]];
                    acc += 0.5 * d * d * t[[i, j]] * t[[k, l]];
                }
            }
        }
    }
    acc
}

/// Best restricted objective over all row subsets of size `k`, and the
/// lexicographically first subset attaining it.
pub fn pu_subset_oracle(p: &[f64], q: &[f64], c: &Array2<f64>, k: usize) -> (f64, Vec<usize>) {
    let n = p.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut pick = Vec::with_capacity(k);
    combinations(n, k, 0, &mut pick, &mut |subset| {
        let mut active = vec![false; n];
        for &i in subset {
            active[i] = true;
        }
        if let Some(v) = pu_restricted_lp(p, q, c, &active) {
            if v < best.0 - 1e-12 {
                best = (v, subset.to_vec());
            }
        }
    });
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights `k_i / denom` with integer `k_i ∈ [1, 9]`, rescaled to `total`.
pub fn rational_weights(rng: &mut impl Rng, len: usize, total: f64) -> Vec<f64> {
    let ks: Vec<u32> = (0..len).map(|_| rng.random_range(1..10)).collect();
    let denom: u32 = ks.iter().sum();
    ks.iter().map(|&k| total * k as f64 / denom as f64).collect()
}

pub fn random_cost(rng: &mut impl Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..10.0))
}

pub fn random_points(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0))
}

/// Pairwise Euclidean distances between the rows of `x`.
pub fn distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, k)| {
        x.row(i)
            .iter()
            .zip(x.row(k))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// Best GW loss over plans that send each row of a `k`-subset onto a
/// distinct target column with the full row weight, when `p_i = q_j`
/// makes such permutation plans feasible. Returns the first subset reaching
/// the minimum; a minimum of zero certifies a global optimum since the loss
/// is nonnegative.
pub fn pu_gw_subset_oracle(p: &[f64], q: &[f64], cs: &Array2<f64>, ct: &Array2<f64>, k: usize) -> Vec<usize> {
    let (n, m) = (p.len(), q.len());
    assert_eq!(m, k, "permutation plans need one column per transported row");
    assert!(p.iter().chain(q).all(|&w| (w - p[0]).abs() < 1e-12));
    let mut best = (f64::INFINITY, Vec::new());
    let mut pick = Vec::with_capacity(k);
    combinations(n, k, 0, &mut pick, &mut |subset| {
        for perm in permutations(k) {
            let mut t = Array2::zeros((n, m));
            for (r, &i) in subset.iter().enumerate() {
                t[[i, perm[r]]] = p[i];
            }
            let v = gw_loss_brute(cs, ct, &t);
            if v < best.0 - 1e-12 {
                best = (v, subset.to_vec());
            }
        }
    });
    assert!(best.0.abs() < 1e-12, "no zero-loss subset, oracle is not certified");
    best.1
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// A plan of mass `s ≤ ‖p‖/2, ‖q‖/2` strictly inside `Π^u(p, q)` that is
/// not a product. Product plans make the GW gradient additive, which
/// hides every direction with zero row and column sums.
pub fn interior_plan(rng: &mut impl Rng, p: &[f64], q: &[f64], s: f64) -> Array2<f64> {
    let scale = s / (p.iter().sum::<f64>() * q.iter().sum::<f64>());
    // Entries within ±30% of the product keep every margin below 13/7 of
    // the product's, which stays under p and q for s at half mass.
    let t = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| {
        scale * p[i] * q[j] * rng.random_range(0.7..1.3)
    });
    let total = t.sum();
    t * (s / total)
}

/// Balanced GW on `[[Cs, ξ1], [ξ1ᵀ, A]]` and `[[Ct, ξ1], [ξ1ᵀ, A]]` by
/// Frank-Wolfe with brute-force contractions, best of several starts.
/// Returns the corner mass, the restricted mass and `s`.
pub fn naive_dummy_gw() -> (f64, f64, f64) {
    let xs = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 2.0, 6.0]).unwrap();
    let xt = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 2.0]).unwrap();
    let (cs, ct) = (distances(&xs), distances(&xt));
    let (n, m, s, xi) = (4, 3, 0.5, 0.0);
    let a = 2.0 * 6.0 + 1.0;
    let extend = |c: &Array2<f64>, k: usize| {
        let mut e = Array2::from_elem((k + 1, k + 1), xi);
        e.slice_mut(s![..k, ..k]).assign(c);
        e[[k, k]] = a;
        e
    };
    let (cs_bar, ct_bar) = (extend(&cs, n), extend(&ct, m));
    let mut p_bar = vec![0.25; n];
    p_bar.push(1.0 - s);
    let mut q_bar = vec![1.0 / 3.0; m];
    q_bar.push(1.0 - s);
    let (hp, hq) = (
        Histogram::new(p_bar.clone()).unwrap(),
        Histogram::new(q_bar.clone()).unwrap(),
    );

    let contract = |t: &Array2<f64>| gw_contraction_brute(&cs_bar, &ct_bar, t);
    let loss = |t: &Array2<f64>| partial_ot::frobenius(&contract(t), t);
    let lmo = |g: &Array2<f64>| {
        let shift = g.iter().fold(0.0f64, |acc, v| acc.min(*v));
        let c = CostMatrix::new(g.mapv(|v| v - shift)).unwrap();
        partial_ot::solve_exact_ot(&hp, &hq, &c).unwrap().into_entries()
    };

    // Starts: the product coupling and the partial-W-like start that
    // matches the first three points and sends the rest to the dummies.
    let product = Array2::from_shape_fn((n + 1, m + 1), |(i, j)| p_bar[i] * q_bar[j]);
    let mut matched = Array2::zeros((n + 1, m + 1));
    for k in 0..m {
        matched[[k, k]] = s / m as f64;
        matched[[k, m]] = 0.25 - s / m as f64;
        matched[[n, k]] = 1.0 / 3.0 - s / m as f64;
    }
    matched[[n - 1, m]] = 0.25;
    let dummy_row_left = (1.0 - s) - matched.row(n).sum();
    matched[[n, m]] = dummy_row_left;

    let mut best: Option<(f64, Array2<f64>)> = None;
    for mut t in [product, matched] {
        for _ in 0..500 {
            let g = contract(&t);
            let t_tilde = lmo(&g);
            let e = &t_tilde - &t;
            let gap = 2.0 * partial_ot::frobenius(&g, &(-&e));
            if gap <= 1e-12 {
                break;
            }
            let me = contract(&e);
            let gamma = partial_ot::gw::step_size(partial_ot::frobenius(&me, &e), 2.0 * partial_ot::frobenius(&me, &t));
            if gamma == 0.0 {
                break;
            }
            t = &t + &(&e * gamma);
        }
        let l = loss(&t);
        if best.as_ref().is_none_or(|(b, _)| l < *b) {
            best = Some((l, t));
        }
    }
    let (_, t) = best.unwrap();
    (t[[n, m]], t.slice(s![..n, ..m]).sum(), s)
}
