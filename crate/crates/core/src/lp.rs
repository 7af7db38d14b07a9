//! Dense two-phase primal simplex for the small linear programs used
//! throughout the crate.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    c^T x
//! subject to  A_eq x  = b_eq
//!             A_le x <= b_le
//!             lower <= x <= upper
//! ```
//!
//! Lower bounds may be finite or `-inf`, upper bounds finite or `+inf`.
//! Finite bounds are handled by shifting the variable; a finite upper bound
//! becomes an extra row. Free variables keep a single tableau column whose
//! sign is flipped when the objective wants them to decrease; once basic
//! they never block a ratio test.
//!
//! Pivoting follows Bland's rule (smallest eligible column enters, smallest
//! basic index leaves on ratio ties), so a solve is a deterministic function
//! of its input.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted by the ratio test.
pub const PIVOT_TOL: f64 = 1e-10;

const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row has {got} coefficients, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite coefficient in {what}")]
    NonFinite { what: &'static str },
    #[error("variable {index} out of range ({num_vars} variables)")]
    VariableIndex { index: usize, num_vars: usize },
    #[error("invalid bounds [{lower}, {upper}] for variable {index}")]
    Bounds { index: usize, lower: f64, upper: f64 },
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

/// A dense linear program in maximization form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<Vec<f64>>,
    le_rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), LpError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LpError::NonFinite { what })
    }
}

impl LinearProgram {
    /// New program with the given objective; every variable starts with
    /// bounds `[0, +inf)`.
    pub fn new(objective: Vec<f64>) -> Result<Self, LpError> {
        check_finite(&objective, "objective")?;
        let n = objective.len();
        Ok(Self {
            objective,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.eq_rows.len() + self.le_rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq_rows.iter().map(Vec::as_slice).zip(self.eq_rhs.iter().copied())
    }

    pub fn le_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.le_rows.iter().map(Vec::as_slice).zip(self.le_rhs.iter().copied())
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        (self.lower[index], self.upper[index])
    }

    fn check_row(&self, row: &[f64], rhs: f64) -> Result<(), LpError> {
        if row.len() != self.num_vars() {
            return Err(LpError::Dimension {
                expected: self.num_vars(),
                got: row.len(),
            });
        }
        check_finite(row, "constraint row")?;
        check_finite(&[rhs], "right-hand side")
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> Result<(), LpError> {
        self.check_row(&row, rhs)?;
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        Ok(())
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> Result<(), LpError> {
        self.check_row(&row, rhs)?;
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        Ok(())
    }

    /// Adds `row . x >= rhs`, stored as `-row . x <= -rhs`.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> Result<(), LpError> {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn set_bounds(&mut self, index: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if index >= self.num_vars() {
            return Err(LpError::VariableIndex {
                index,
                num_vars: self.num_vars(),
            });
        }
        if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::Bounds { index, lower, upper });
        }
        self.lower[index] = lower;
        self.upper[index] = upper;
        Ok(())
    }

    pub fn set_free(&mut self, index: usize) -> Result<(), LpError> {
        self.set_bounds(index, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let mut worst = 0.0f64;
        for (row, rhs) in self.eq_constraints() {
            worst = worst.max((dot(row) - rhs).abs());
        }
        for (row, rhs) in self.le_constraints() {
            worst = worst.max(dot(row) - rhs);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row_str = |row: &[f64]| row.iter().map(|v| format!("{v:>12.6}")).collect::<Vec<_>>().join(" ");
        writeln!(f, "max  {}", row_str(&self.objective))?;
        for (row, rhs) in self.eq_constraints() {
            writeln!(f, "eq   {} = {rhs:.6}", row_str(row))?;
        }
        for (row, rhs) in self.le_constraints() {
            writeln!(f, "le   {} <= {rhs:.6}", row_str(row))?;
        }
        for j in 0..self.num_vars() {
            writeln!(f, "x{j}  in [{}, {}]", self.lower[j], self.upper[j])?;
        }
        Ok(())
    }
}

/// Affine map from a tableau column back to a model variable:
/// `x = offset + sign * y`.
#[derive(Clone, Copy)]
struct VarMap {
    offset: f64,
    sign: f64,
    free: bool,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x (cols + 1)`; last entry of each row is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
    free: Vec<bool>,
    /// Columns flipped to `-y` while nonbasic; undone at extraction.
    flipped: Vec<bool>,
    active: Vec<bool>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, reduced: &mut [f64], obj: &mut f64) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * w + pc];
            if factor != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[pc] = 0.0;
                if !self.free[self.basis[r]] && row[self.cols].abs() < 1e-13 {
                    row[self.cols] = 0.0;
                }
            }
        }
        let factor = reduced[pc];
        if factor != 0.0 {
            for (d, pv) in reduced.iter_mut().zip(&pivot_row[..self.cols]) {
                *d -= factor * pv;
            }
            reduced[pc] = 0.0;
            *obj += factor * pivot_row[self.cols];
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn flip_column(&mut self, c: usize, reduced: &mut [f64], cost: &mut [f64]) {
        let w = self.cols + 1;
        for r in 0..self.rows {
            self.data[r * w + c] = -self.data[r * w + c];
        }
        reduced[c] = -reduced[c];
        cost[c] = -cost[c];
        self.flipped[c] = !self.flipped[c];
    }

    fn reduced_costs(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut reduced = cost.to_vec();
        let mut obj = 0.0;
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, d) in reduced.iter_mut().enumerate() {
                    *d -= cb * self.at(r, c);
                }
                obj += cb * self.rhs(r);
            }
        }
        (reduced, obj)
    }

    /// Maximizes `cost . y` over the current basis using Bland's rule.
    fn optimize(&mut self, cost: &mut [f64]) -> Result<Outcome, LpError> {
        let (mut reduced, mut obj) = self.reduced_costs(cost);
        let mut is_basic = vec![false; self.cols];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::PivotLimit(MAX_PIVOTS));
            }
            let entering = (0..self.cols).find(|&c| {
                self.active[c]
                    && !is_basic[c]
                    && (reduced[c] > OPTIMALITY_TOL || (self.free[c] && reduced[c] < -OPTIMALITY_TOL))
            });
            let Some(pc) = entering else {
                return Ok(Outcome::Optimal);
            };
            if reduced[pc] < 0.0 {
                self.flip_column(pc, &mut reduced, cost);
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                if self.free[self.basis[r]] {
                    continue;
                }
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[r] < self.basis[br] {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            is_basic[self.basis[pr]] = false;
            is_basic[pc] = true;
            self.pivot(pr, pc, &mut reduced, &mut obj);
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves `lp` with the two-phase primal simplex method.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::NAN,
        iterations,
    };

    // Column transforms and upper-bound rows.
    let mut maps = Vec::with_capacity(n);
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo > hi {
            return Ok(infeasible(0));
        }
        let map = match (lo.is_finite(), hi.is_finite()) {
            (true, _) => {
                if hi.is_finite() {
                    bound_rows.push((j, hi - lo));
                }
                VarMap {
                    offset: lo,
                    sign: 1.0,
                    free: false,
                }
            }
            (false, true) => VarMap {
                offset: hi,
                sign: -1.0,
                free: false,
            },
            (false, false) => VarMap {
                offset: 0.0,
                sign: 1.0,
                free: true,
            },
        };
        maps.push(map);
    }

    // Rows in transformed variables: (coefficients, rhs, is_equality).
    let transform = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut shift = 0.0;
        let coeffs = row
            .iter()
            .zip(&maps)
            .map(|(a, m)| {
                shift += a * m.offset;
                a * m.sign
            })
            .collect();
        (coeffs, rhs - shift)
    };
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (row, rhs) in lp.eq_constraints() {
        let (c, b) = transform(row, rhs);
        rows.push((c, b, true));
    }
    for (row, rhs) in lp.le_constraints() {
        let (c, b) = transform(row, rhs);
        rows.push((c, b, false));
    }
    for &(j, width) in &bound_rows {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        rows.push((c, width, false));
    }

    let m = rows.len();
    let num_slack = rows.iter().filter(|r| !r.2).count();
    let num_art = rows.iter().filter(|(_, b, eq)| *eq || *b < 0.0).count();
    let cols = n + num_slack + num_art;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let (mut slack_col, mut art_col) = (n, n + num_slack);
    for (r, (coeffs, rhs, eq)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        let line = &mut data[r * w..(r + 1) * w];
        for (v, a) in line.iter_mut().zip(coeffs) {
            *v = sign * a;
        }
        line[cols] = sign * rhs;
        let mut basic = None;
        if !eq {
            line[slack_col] = sign;
            if sign > 0.0 {
                basic = Some(slack_col);
            }
            slack_col += 1;
        }
        if basic.is_none() {
            line[art_col] = 1.0;
            basic = Some(art_col);
            art_col += 1;
        }
        basis[r] = basic.unwrap();
    }

    let mut free = vec![false; cols];
    for (j, map) in maps.iter().enumerate() {
        free[j] = map.free;
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        data,
        basis,
        free,
        flipped: vec![false; cols],
        active: vec![true; cols],
        pivots: 0,
    };
    let is_art = |c: usize| c >= n + num_slack;

    if num_art > 0 {
        let mut cost: Vec<f64> = (0..cols).map(|c| if is_art(c) { -1.0 } else { 0.0 }).collect();
        tab.optimize(&mut cost)?;
        let scale = rows.iter().fold(1.0f64, |acc, r| acc.max(r.1.abs()));
        let residual: f64 = (0..tab.rows)
            .filter(|&r| is_art(tab.basis[r]))
            .map(|r| tab.rhs(r).abs())
            .sum();
        if residual > FEASIBILITY_TOL * scale {
            return Ok(infeasible(tab.pivots));
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        let mut r = 0;
        while r < tab.rows {
            if is_art(tab.basis[r]) {
                let pc = (0..n + num_slack).find(|&c| tab.at(r, c).abs() > PIVOT_TOL);
                match pc {
                    Some(pc) => {
                        let mut scratch = vec![0.0; cols];
                        let mut obj = 0.0;
                        tab.pivot(r, pc, &mut scratch, &mut obj);
                    }
                    None => {
                        tab.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for c in n + num_slack..cols {
            tab.active[c] = false;
        }
    }

    let mut cost = vec![0.0; cols];
    for j in 0..n {
        cost[j] = lp.objective[j] * maps[j].sign;
        if tab.flipped[j] {
            cost[j] = -cost[j];
        }
    }
    if let Outcome::Unbounded = tab.optimize(&mut cost)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::INFINITY,
            iterations: tab.pivots,
        });
    }

    let mut y = vec![0.0; cols];
    for r in 0..tab.rows {
        y[tab.basis[r]] = tab.rhs(r);
    }
    let x: Vec<f64> = (0..n)
        .map(|j| {
            let yj = if tab.flipped[j] { -y[j] } else { y[j] };
            let mut v = maps[j].offset + maps[j].sign * yj;
            // Snap roundoff at a bound back onto it.
            if v < lp.lower[j] && v > lp.lower[j] - FEASIBILITY_TOL {
                v = lp.lower[j];
            }
            if v > lp.upper[j] && v < lp.upper[j] + FEASIBILITY_TOL {
                v = lp.upper[j];
            }
            v
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.evaluate(&x),
        x,
        iterations: tab.pivots,
    })
}
