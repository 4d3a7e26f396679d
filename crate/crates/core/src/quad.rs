//! Double-exponential quadrature: tanh-sinh on finite intervals, exp-sinh on
//! half lines, sinh-sinh on the real line. Level doubling until two
//! successive estimates agree.

use std::f64::consts::FRAC_PI_2;

const MAX_LEVEL: u32 = 11;
const MIN_LEVEL: u32 = 4;

/// Node `(x, weight)` at a point `t` of the transformed variable.
type Rule<'a> = dyn Fn(f64) -> Option<(f64, f64)> + 'a;

fn refine(f: &dyn Fn(f64) -> f64, rule: &Rule, t_max: f64, rel_tol: f64, abs_tol: f64, max_level: u32) -> f64 {
    let term = |t: f64| -> f64 {
        match rule(t) {
            Some((x, w)) if w > 0.0 => {
                let v = w * f(x);
                // overflow in the far tail where the weight has underflowed
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let mut h = 0.5;
    let n0 = (t_max / h) as i64;
    let mut sum: f64 = (-n0..=n0).map(|k| term(k as f64 * h)).sum();
    let mut estimate = sum * h;
    for level in 1..=max_level {
        h *= 0.5;
        let n = (t_max / h) as i64;
        let fresh: f64 = (-n..=n).filter(|k| k % 2 != 0).map(|k| term(k as f64 * h)).sum();
        sum += fresh;
        let next = sum * h;
        let converged = (next - estimate).abs() <= rel_tol * next.abs() + abs_tol;
        estimate = next;
        if converged && level >= MIN_LEVEL {
            break;
        }
    }
    estimate
}

/// `∫_a^b f`, where either end may be infinite.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate_tol(&f, a, b, rel_tol, 1e-300, MAX_LEVEL)
}

fn integrate_tol(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_level: u32) -> f64 {
    assert!(!(a.is_nan() || b.is_nan()));
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate_tol(f, b, a, rel_tol, abs_tol, max_level);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => {
            let hw = 0.5 * (b - a);
            let rule = move |t: f64| {
                let u = FRAC_PI_2 * t.sinh();
                let cu = u.cosh();
                // distance to the nearer endpoint, computed without cancellation
                let gap = hw * 2.0 / (1.0 + (2.0 * u.abs()).exp());
                let x = if t >= 0.0 { b - gap } else { a + gap };
                let w = hw * FRAC_PI_2 * t.cosh() / (cu * cu);
                if gap <= 0.0 {
                    None
                } else {
                    Some((x, w))
                }
            };
            refine(f, &rule, 3.5, rel_tol, abs_tol, max_level)
        }
        (true, false) => {
            let rule = move |t: f64| {
                let e = (FRAC_PI_2 * t.sinh()).exp();
                let x = a + e;
                (e > 0.0 && x.is_finite()).then(|| (x, FRAC_PI_2 * t.cosh() * e))
            };
            refine(f, &rule, 4.5, rel_tol, abs_tol, max_level)
        }
        (false, true) => {
            let rule = move |t: f64| {
                let e = (FRAC_PI_2 * t.sinh()).exp();
                let x = b - e;
                (e > 0.0 && x.is_finite()).then(|| (x, FRAC_PI_2 * t.cosh() * e))
            };
            refine(f, &rule, 4.5, rel_tol, abs_tol, max_level)
        }
        (false, false) => {
            let rule = |t: f64| {
                let u = FRAC_PI_2 * t.sinh();
                let x = u.sinh();
                x.is_finite().then(|| (x, FRAC_PI_2 * t.cosh() * u.cosh()))
            };
            refine(f, &rule, 4.0, rel_tol, abs_tol, max_level)
        }
    }
}

/// `∫ f` over `[a, b]` split at interior `breaks` (kinks of the integrand).
/// Pieces share an absolute tolerance scaled by a coarse pass, so a piece
/// that is zero up to rounding does not force full refinement.
pub fn integrate_pieces(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b && x.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut edges = vec![a];
    edges.extend(pts);
    edges.push(b);
    let scale: f64 = edges.windows(2).map(|w| integrate_tol(&f, w[0], w[1], rel_tol, 0.0, 0).abs()).sum();
    let abs_tol = (rel_tol * scale).max(1e-300);
    edges.windows(2).map(|w| integrate_tol(&f, w[0], w[1], rel_tol, abs_tol, MAX_LEVEL)).sum()
}
