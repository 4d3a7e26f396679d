//! Exact discrete optimal transport by the transportation simplex method.
//!
//! Northwest-corner start, MODI potentials, Bland's rule for both entering and
//! leaving cells. Degenerate bases keep their zero-flow cells explicitly, so
//! the basis is always a spanning tree of `R + C − 1` cells. Infinite costs are
//! handled lexicographically: a cost is the pair (number of forbidden cells,
//! finite cost), which is big-M without the rounding.

use std::collections::VecDeque;
use std::ops::{Add, Sub};

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
struct Lex(f64, f64);

impl Add for Lex {
    type Output = Lex;
    fn add(self, o: Lex) -> Lex {
        Lex(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, o: Lex) -> Lex {
        Lex(self.0 - o.0, self.1 - o.1)
    }
}

impl Lex {
    fn of(c: f64) -> Lex {
        if c.is_infinite() {
            Lex(1.0, 0.0)
        } else {
            Lex(0.0, c)
        }
    }

    fn negative(self, tol: f64) -> bool {
        self.0 < -0.5 || (self.0.abs() < 0.5 && self.1 < -tol)
    }
}

/// Optimal plan between `supply` (rows) and `demand` (columns).
#[derive(Clone, Debug)]
pub struct TransportPlan {
    /// Optimal cost; `+∞` when every coupling charges a forbidden cell.
    pub cost: f64,
    pub flow: Vec<Vec<f64>>,
    /// Row and column potentials of the finite part at optimality.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// Solve `min Σ c_ij π_ij` over couplings of `supply` and `demand`.
///
/// Both marginals must have equal mass; costs must be `≥ 0` or `+∞`.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> TransportPlan {
    let r = supply.len();
    let c = demand.len();
    assert!(r > 0 && c > 0 && cost.len() == r && cost.iter().all(|row| row.len() == c));
    let scale = cost.iter().flatten().filter(|x| x.is_finite()).fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-12 * (1.0 + scale);
    let lc: Vec<Vec<Lex>> = cost.iter().map(|row| row.iter().map(|&x| Lex::of(x)).collect()).collect();

    let mut flow = vec![vec![0.0; c]; r];
    let mut basic = vec![vec![false; c]; r];
    // northwest corner
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]).max(0.0);
            flow[i][j] = q;
            basic[i][j] = true;
            s[i] -= q;
            d[j] -= q;
            if i == r - 1 && j == c - 1 {
                break;
            }
            if i == r - 1 {
                j += 1;
            } else if j == c - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut pivots = 0;
    let (mut u, mut v);
    loop {
        (u, v) = potentials(&basic, &lc);
        let entering = (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .find(|&(i, j)| !basic[i][j] && (lc[i][j] - u[i] - v[j]).negative(tol));
        let Some((ei, ej)) = entering else { break };
        if pivots > 100 * (r + c) * (r + c) + 1000 {
            log::warn!("transportation simplex hit its pivot limit");
            break;
        }
        pivots += 1;

        let path = tree_path(&basic, ei, r + ej);
        // path edges alternate −, +, −, … starting from the cell next to column ej
        let cells: Vec<(usize, usize)> = path
            .windows(2)
            .map(|w| if w[0] < r { (w[0], w[1] - r) } else { (w[1], w[0] - r) })
            .collect();
        let k = cells.len();
        let minus: Vec<(usize, usize)> = (0..k).filter(|&t| (k - 1 - t).is_multiple_of(2)).map(|t| cells[t]).collect();
        let plus: Vec<(usize, usize)> = (0..k).filter(|&t| (k - 1 - t) % 2 == 1).map(|t| cells[t]).collect();
        let theta = minus.iter().map(|&(i, j)| flow[i][j]).fold(f64::INFINITY, f64::min);
        let leaving = *minus
            .iter()
            .filter(|&&(i, j)| flow[i][j] <= theta)
            .min_by_key(|&&(i, j)| i * c + j)
            .expect("cycle has a minus cell");
        flow[ei][ej] += theta;
        basic[ei][ej] = true;
        for &(i, j) in &plus {
            flow[i][j] += theta;
        }
        for &(i, j) in &minus {
            flow[i][j] = (flow[i][j] - theta).max(0.0);
        }
        flow[leaving.0][leaving.1] = 0.0;
        basic[leaving.0][leaving.1] = false;
    }

    let mut total = 0.0;
    let mut forbidden = 0.0;
    for i in 0..r {
        for j in 0..c {
            if cost[i][j].is_infinite() {
                forbidden += flow[i][j];
            } else {
                total += flow[i][j] * cost[i][j];
            }
        }
    }
    let cost_value = if forbidden > 1e-12 { f64::INFINITY } else { total };
    TransportPlan {
        cost: cost_value,
        flow,
        u: u.iter().map(|x| x.1).collect(),
        v: v.iter().map(|x| x.1).collect(),
        pivots,
    }
}

fn potentials(basic: &[Vec<bool>], lc: &[Vec<Lex>]) -> (Vec<Lex>, Vec<Lex>) {
    let r = basic.len();
    let c = basic[0].len();
    let mut u = vec![None; r];
    let mut v = vec![None; c];
    u[0] = Some(Lex::default());
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if node < r {
            let ui = u[node].unwrap();
            for j in 0..c {
                if basic[node][j] && v[j].is_none() {
                    v[j] = Some(lc[node][j] - ui);
                    queue.push_back(r + j);
                }
            }
        } else {
            let j = node - r;
            let vj = v[j].unwrap();
            for i in 0..r {
                if basic[i][j] && u[i].is_none() {
                    u[i] = Some(lc[i][j] - vj);
                    queue.push_back(i);
                }
            }
        }
    }
    (
        u.into_iter().map(|x| x.expect("basis spans every row")).collect(),
        v.into_iter().map(|x| x.expect("basis spans every column")).collect(),
    )
}

/// Node path in the basis tree from row `from` to node `to` (columns offset by `R`).
fn tree_path(basic: &[Vec<bool>], from: usize, to: usize) -> Vec<usize> {
    let r = basic.len();
    let c = basic[0].len();
    let mut parent = vec![usize::MAX; r + c];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        let nbrs: Vec<usize> = if node < r {
            (0..c).filter(|&j| basic[node][j]).map(|j| r + j).collect()
        } else {
            (0..r).filter(|&i| basic[i][node - r]).collect()
        };
        for nb in nbrs {
            if parent[nb] == usize::MAX {
                parent[nb] = node;
                queue.push_back(nb);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    path
}
