//! Small deterministic optimizers used throughout: golden section, simplex
//! projection, simplex grids, and a minimum-norm-point solver for polytopes.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimize a unimodal `f` on `[a, b]`; returns `(argmin, min)`.
///
/// `+∞` values are allowed and treated as ordinary (large) values.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 400 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    let (fa, fb) = (f(a), f(b));
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((c, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Maximize a unimodal `f` on `[a, b]`; returns `(argmax, max)`.
pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|t| -f(t), a, b, tol);
    (x, -v)
}

/// Minimize `f` over `[a, b]`: scan `n` equispaced points, then golden section
/// between the neighbours of the best sample.
pub fn scan_then_golden(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, tol: f64) -> (f64, f64) {
    assert!(n >= 2);
    let h = (b - a) / (n - 1) as f64;
    let (mut best_i, mut best_v) = (0, f64::INFINITY);
    for i in 0..n {
        let v = f(a + h * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = a + h * best_i.saturating_sub(1) as f64;
    let hi = a + h * (best_i + 1).min(n - 1) as f64;
    let (x, v) = golden_min(&f, lo, hi, tol);
    if v <= best_v {
        (x, v)
    } else {
        (a + h * best_i as f64, best_v)
    }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for a predicate that is
/// false then true. Stops once the bracket is narrower than `tol(x)`.
pub fn bisect_threshold(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        if hi - lo <= tol(hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// All points of the simplex `Δ_{m−1}` whose coordinates are multiples of `1/k`.
pub fn simplex_grid(m: usize, k: usize) -> Vec<Vec<f64>> {
    crate::space::compositions(k, m)
        .into_iter()
        .map(|c| c.into_iter().map(|ci| ci as f64 / k as f64).collect())
        .collect()
}

/// Maximize `f` over the simplex: grid with spacing `1/k`, then a pattern
/// search over the moves `s(e_i − e_j)` with the step halved until `min_step`.
pub fn simplex_maximize(f: impl Fn(&[f64]) -> f64, m: usize, k: usize, min_step: f64) -> (Vec<f64>, f64) {
    let mut best = vec![1.0 / m as f64; m];
    let mut best_v = f(&best);
    for p in simplex_grid(m, k) {
        let v = f(&p);
        if v > best_v {
            best_v = v;
            best = p;
        }
    }
    if m == 1 {
        return (best, best_v);
    }
    let mut step = 1.0 / k as f64;
    while step >= min_step {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let s = step.min(best[j]);
                    if s <= 0.0 {
                        continue;
                    }
                    let mut cand = best.clone();
                    cand[i] += s;
                    cand[j] -= s;
                    if cand[j] < 0.0 {
                        cand[j] = 0.0;
                    }
                    let v = f(&cand);
                    if v > best_v {
                        best_v = v;
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }
    (best, best_v)
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot = a[col].clone();
        for row in col + 1..n {
            let factor = a[row][col] / pivot[col];
            if factor != 0.0 {
                for (x, p) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= factor * p;
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Point of `conv(points)` closest to the origin (Wolfe's algorithm).
///
/// Returns the convex weights and the point.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    let d = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let combine = |set: &[usize], lam: &[f64]| {
        let mut x = vec![0.0; d];
        for (&s, &l) in set.iter().zip(lam) {
            for (xi, pi) in x.iter_mut().zip(&points[s]) {
                *xi += l * pi;
            }
        }
        x
    };
    let start = (0..k).min_by(|&i, &j| dot(&points[i], &points[i]).total_cmp(&dot(&points[j], &points[j]))).unwrap();
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..(50 * (k + d) + 100) {
        let xx = dot(&x, &x);
        let j = (0..k).min_by(|&a, &b| dot(&x, &points[a]).total_cmp(&dot(&x, &points[b]))).unwrap();
        if xx - dot(&x, &points[j]) <= 1e-15 * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            // affine minimizer over the current corral
            let s = set.len();
            let mut a = vec![vec![0.0; s + 1]; s + 1];
            for r in 0..s {
                for c in 0..s {
                    a[r][c] = dot(&points[set[r]], &points[set[c]]);
                }
                a[r][s] = 1.0;
                a[s][r] = 1.0;
            }
            let mut rhs = vec![0.0; s + 1];
            rhs[s] = 1.0;
            let alpha = match solve_linear(a, rhs) {
                Some(sol) => sol[..s].to_vec(),
                None => {
                    // affinely dependent corral: drop the newest point
                    set.pop();
                    lam.pop();
                    break;
                }
            };
            if alpha.iter().all(|&v| v > 1e-14) {
                lam = alpha;
                x = combine(&set, &lam);
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let keep: Vec<usize> = (0..set.len()).filter(|&i| lam[i] > 1e-14).collect();
            set = keep.iter().map(|&i| set[i]).collect();
            lam = keep.iter().map(|&i| lam[i]).collect();
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
            x = combine(&set, &lam);
        }
    }
    let mut weights = vec![0.0; k];
    for (&s, &l) in set.iter().zip(&lam) {
        weights[s] += l;
    }
    (weights, x)
}
