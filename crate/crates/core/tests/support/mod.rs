//! Brute-force references for the integration and acceptance tests.
//!
//! Everything here is written from first principles and deliberately calls
//! none of the crate's algorithms: path sums by explicit enumeration, linear
//! systems by Gaussian elimination, hull distances by enumerating faces.

#![allow(dead_code)]

use rand::Rng;

pub type Rows = Vec<Vec<(usize, f64)>>;

/// Random stochastic rows over `n` states with one to three successors each.
/// With `dyadic`, probabilities are multiples of 1/4, so that path
/// probabilities tie exactly.
pub fn random_rows(rng: &mut impl Rng, n: usize, dyadic: bool) -> Rows {
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=3.min(n));
            let mut succ: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                succ.swap(i, j);
            }
            succ.truncate(k);
            succ.sort_unstable();
            let weights: Vec<f64> = if dyadic {
                // split four quarters among k successors, each at least one
                let mut q = vec![1usize; k];
                for _ in k..4 {
                    q[rng.gen_range(0..k)] += 1;
                }
                q.into_iter().map(|x| x as f64 / 4.0).collect()
            } else {
                let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            };
            succ.into_iter().zip(weights).collect()
        })
        .collect()
}

pub fn random_mask(rng: &mut impl Rng, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.gen_bool(p)).collect()
}

pub fn prob(rows: &Rows, from: usize, to: usize) -> f64 {
    rows[from].iter().filter(|(t, _)| *t == to).map(|(_, p)| p).sum()
}

/// Every path from `start` of at most `hops` steps that minimally satisfies
/// `left U right`: the last state is in `right`, all earlier ones are in
/// `left` and not in `right`. Returned with their probabilities.
pub fn minimal_paths(rows: &Rows, left: &[bool], right: &[bool], start: usize, hops: usize) -> Vec<(Vec<usize>, f64)> {
    fn walk(
        rows: &Rows,
        left: &[bool],
        right: &[bool],
        hops: usize,
        path: &mut Vec<usize>,
        p: f64,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        let s = *path.last().unwrap();
        if right[s] {
            out.push((path.clone(), p));
            return;
        }
        if !left[s] || path.len() > hops {
            return;
        }
        for &(t, q) in &rows[s] {
            if q > 0.0 {
                path.push(t);
                walk(rows, left, right, hops, path, p * q, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(rows, left, right, hops, &mut vec![start], 1.0, &mut out);
    out
}

/// Paths by nonincreasing probability, exact ties in lexicographic order.
pub fn sort_paths(paths: &mut [(Vec<usize>, f64)]) {
    paths.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when the matrix is numerically singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(r);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * y;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `E[sum_t gamma^t f(s_t)]` from `start` by solving `(I - gamma P) X = F`.
pub fn discounted_features(rows: &Rows, features: &[Vec<f64>], gamma: f64, start: usize) -> Vec<f64> {
    let n = rows.len();
    let d = features[0].len();
    let mut m = vec![vec![0.0; n]; n];
    for (s, row) in rows.iter().enumerate() {
        m[s][s] += 1.0;
        for &(t, p) in row {
            m[s][t] -= gamma * p;
        }
    }
    (0..d)
        .map(|j| {
            let col: Vec<f64> = features.iter().map(|f| f[j]).collect();
            solve_linear(m.clone(), col).expect("I - gamma P is invertible")[start]
        })
        .collect()
}

/// Exact Euclidean distance from `target` to the convex hull of `points`,
/// by projecting onto the affine hull of every subset of at most `dim + 1`
/// points and keeping the projections that land inside their simplex.
pub fn hull_distance_exact(points: &[Vec<f64>], target: &[f64]) -> f64 {
    let dim = target.len();
    let n = points.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() > dim + 1 {
            continue;
        }
        let k = idx.len();
        // minimise |sum l_i p_i - t|^2 s.t. sum l_i = 1 (KKT system)
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        let mut b = vec![0.0; k + 1];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r][c] = dot(&points[i], &points[j]);
            }
            a[r][k] = 1.0;
            a[k][r] = 1.0;
            b[r] = dot(&points[i], target);
        }
        b[k] = 1.0;
        let Some(sol) = solve_linear(a, b) else {
            continue;
        };
        if sol[..k].iter().any(|&l| l < -1e-12) {
            continue;
        }
        let mut x = vec![0.0; dim];
        for (r, &i) in idx.iter().enumerate() {
            for (xd, pd) in x.iter_mut().zip(&points[i]) {
                *xd += sol[r] * pd;
            }
        }
        let d = x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        best = best.min(d);
    }
    best
}

/// `max_{||w|| <= 1} min_i w . v_i` in two dimensions by scanning `steps`
/// unit directions (and `w = 0`).
pub fn grid_search_margin_2d(vectors: &[Vec<f64>], steps: usize) -> (f64, [f64; 2]) {
    let mut best = (0.0, [0.0, 0.0]);
    for i in 0..steps {
        let th = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
        let w = [th.cos(), th.sin()];
        let m = vectors
            .iter()
            .map(|v| w[0] * v[0] + w[1] * v[1])
            .fold(f64::INFINITY, f64::min);
        if m > best.0 {
            best = (m, w);
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-agent grid move, coded from the movement rules: stay, left and
/// right are certain; down and up succeed with `success`, otherwise the
/// agent stays; moves off the grid stay put. Returns the distribution over
/// cells as a dense vector.
pub fn grid_move(side: usize, cell: usize, action: usize, success: f64) -> Vec<f64> {
    let (r, c) = (cell / side, cell % side);
    let mut out = vec![0.0; side * side];
    let (target, p) = match action {
        0 => (Some((r, c)), 1.0),
        1 => (c.checked_sub(1).map(|c| (r, c)), 1.0),
        2 => ((r + 1 < side).then_some((r + 1, c)), success),
        3 => ((c + 1 < side).then_some((r, c + 1)), 1.0),
        4 => (r.checked_sub(1).map(|r| (r, c)), success),
        _ => panic!("no such action"),
    };
    match target {
        Some((tr, tc)) => {
            out[tr * side + tc] += p;
            out[cell] += 1.0 - p;
        }
        None => out[cell] = 1.0,
    }
    out
}
