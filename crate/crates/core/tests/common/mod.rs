#![allow(dead_code)]

use obedience::game::{ActionCounts, GameSpec, RewardTables, TransitionKernel};

/// One-shot game from payoff matrices indexed `[u1][u2]`.
pub fn matrix_game(designer: &[Vec<f64>], agent1: &[Vec<f64>], agent2: &[Vec<f64>]) -> GameSpec {
    let (n1, n2) = (agent1.len(), agent1[0].len());
    let flat = |m: &[Vec<f64>]| vec![vec![m.iter().flatten().copied().collect::<Vec<_>>()]];
    GameSpec {
        horizon: 1,
        states: vec![vec!["s".into()]; 2],
        actions: vec![vec![ActionCounts::new(n1, n2)]],
        kernel: TransitionKernel {
            rows: vec![vec![vec![vec![(0, 1.0)]; n1 * n2]]],
        },
        rewards: RewardTables {
            designer: flat(designer),
            agent1: flat(agent1),
            agent2: flat(agent2),
        },
        initial: vec![1.0],
    }
}

/// C=0, D=1 with T=5, R=3, P=1, S=0; the designer gets the sum.
pub fn prisoners_dilemma() -> GameSpec {
    let a1 = vec![vec![3.0, 0.0], vec![5.0, 1.0]];
    let a2 = vec![vec![3.0, 5.0], vec![0.0, 1.0]];
    let d = vec![vec![6.0, 5.0], vec![5.0, 2.0]];
    matrix_game(&d, &a1, &a2)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            if x.is_nan() && y.is_nan() {
                continue;
            }
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Best correlated equilibrium of a one-state, one-stage game, found by
/// enumerating every vertex of the polytope.
pub fn ce_vertex_optimum(spec: &GameSpec) -> f64 {
    let counts = spec.actions[0][0];
    let (n1, n2) = (counts.agent1, counts.agent2);
    let n = n1 * n2;
    let r0 = &spec.rewards.designer[0][0];
    let r1 = &spec.rewards.agent1[0][0];
    let r2 = &spec.rewards.agent2[0][0];

    // Inequalities a.g <= 0.
    let mut ineq: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut row = vec![0.0; n];
        row[k] = -1.0;
        ineq.push(row);
    }
    for a in 0..n1 {
        for dev in (0..n1).filter(|&d| d != a) {
            let mut row = vec![0.0; n];
            for b in 0..n2 {
                row[a * n2 + b] = r1[dev * n2 + b] - r1[a * n2 + b];
            }
            ineq.push(row);
        }
    }
    for b in 0..n2 {
        for dev in (0..n2).filter(|&d| d != b) {
            let mut row = vec![0.0; n];
            for a in 0..n1 {
                row[a * n2 + b] = r2[a * n2 + dev] - r2[a * n2 + b];
            }
            ineq.push(row);
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut chosen = Vec::with_capacity(n - 1);
    combinations(ineq.len(), n - 1, 0, &mut chosen, &mut |set| {
        let mut a: Vec<Vec<f64>> = set.iter().map(|&i| ineq[i].clone()).collect();
        a.push(vec![1.0; n]);
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let Some(g) = solve_square(a, b) else { return };
        let feasible = ineq
            .iter()
            .all(|row| row.iter().zip(&g).map(|(c, v)| c * v).sum::<f64>() <= 1e-10);
        if feasible {
            best = best.max(g.iter().zip(r0).map(|(p, r)| p * r).sum());
        }
    });
    best
}

fn combinations(m: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for i in start..=m - (k - chosen.len()) {
        chosen.push(i);
        combinations(m, k, i + 1, chosen, visit);
        chosen.pop();
    }
}
