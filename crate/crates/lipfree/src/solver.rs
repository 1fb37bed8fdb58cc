//! Dense two-phase simplex.
//!
//! Small, deterministic, and self-contained. Entering columns are chosen by
//! Bland's rule (lowest eligible index) and leaving rows break ratio ties by
//! lowest basic variable index, so the method cannot cycle and identical
//! inputs always produce bit-identical solutions. Free variables are split
//! into positive and negative parts; finite bounds become shifted variables
//! plus an upper-bound row.
//!
//! Everything downstream runs on programs with a few hundred variables at
//! most, so no sparsity, scaling, or refactorization is attempted.

use serde::{Deserialize, Serialize};

/// Feasibility and optimality threshold.
pub const FEAS_EPS: f64 = 1e-9;

/// Entries at or below this magnitude are numerically zero. A pivot that
/// would have to use such an entry is reported as instability instead of
/// being silently taken.
pub const PIVOT_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Le, rhs }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Eq, rhs }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, relation: Relation::Ge, rhs }
    }
}

/// A maximization problem over box-constrained variables. Bounds may be
/// infinite on either side.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub maximize: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// nvars variables, all free, no constraints yet.
    pub fn new(nvars: usize) -> Self {
        Self {
            maximize: vec![0.0; nvars],
            constraints: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); nvars],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value, recomputed from `point`; 0 when not optimal.
    pub value: f64,
    /// One optimal assignment; empty when not optimal.
    pub point: Vec<f64>,
}

impl LpSolution {
    /// Unwraps an optimum, converting any other status into an error.
    pub fn expect_optimal(self, what: &'static str) -> Result<(f64, Vec<f64>), SolverError> {
        match self.status {
            LpStatus::Optimal => Ok((self.value, self.point)),
            status => Err(SolverError::NotOptimal { what, status }),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerically unstable pivot of magnitude {pivot:e}")]
    Unstable { pivot: f64 },
    #[error("{what}: expected an optimum, solver returned {status:?}")]
    NotOptimal { what: &'static str, status: LpStatus },
}

/// How an original variable maps into the nonnegative standard form.
enum VarMap {
    /// x = base + sign * y.
    Shift { col: usize, base: f64, sign: f64 },
    /// x = y_pos - y_neg.
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize, obj: &mut [f64]) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][j];
            if f != 0.0 {
                for c in 0..self.ncols {
                    self.rows[i][c] -= f * self.rows[r][c];
                }
                self.rhs[i] -= f * self.rhs[r];
            }
        }
        let f = obj[j];
        if f != 0.0 {
            for c in 0..self.ncols {
                obj[c] -= f * self.rows[r][c];
            }
        }
        self.basis[r] = j;
    }

    /// Bland iteration until no reduced cost exceeds FEAS_EPS. `allowed`
    /// limits the entering columns (used to bar artificials in phase 2).
    fn run(&mut self, obj: &mut [f64], allowed: usize) -> Result<LpStatus, SolverError> {
        let cap = 2000 + 200 * (self.rows.len() + self.ncols);
        for _ in 0..cap {
            let enter = (0..allowed).find(|&j| obj[j] > FEAS_EPS);
            let Some(j) = enter else {
                return Ok(LpStatus::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            let mut near_zero: f64 = 0.0;
            for r in 0..self.rows.len() {
                let a = self.rows[r][j];
                if a > PIVOT_MIN {
                    let ratio = self.rhs[r].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((best, br)) => {
                            ratio < br || (ratio == br && self.basis[r] < self.basis[best])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                } else if a > 0.0 {
                    near_zero = near_zero.max(a);
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, j, obj),
                None if near_zero > 0.0 => {
                    // The only way forward is a pivot below resolution.
                    return Err(SolverError::Unstable { pivot: near_zero });
                }
                None => return Ok(LpStatus::Unbounded),
            }
        }
        Err(SolverError::Unstable { pivot: 0.0 })
    }
}

fn validate(lp: &LinearProgram) -> Result<(), SolverError> {
    let n = lp.maximize.len();
    if lp.bounds.len() != n {
        return Err(SolverError::Malformed(format!(
            "{} bounds for {} variables",
            lp.bounds.len(),
            n
        )));
    }
    if lp.maximize.iter().any(|c| !c.is_finite()) {
        return Err(SolverError::Malformed("non-finite objective".into()));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(SolverError::Malformed(format!("bad bounds for variable {j}")));
        }
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(SolverError::Malformed(format!("row {i} has wrong width")));
        }
        if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
            return Err(SolverError::Malformed(format!("row {i} has non-finite entries")));
        }
    }
    Ok(())
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    validate(lp)?;
    let nvars = lp.maximize.len();

    // Map variables into nonnegative columns; collect bound rows.
    let mut maps = Vec::with_capacity(nvars);
    let mut ycols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // y_col <= cap
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ycols, base: lo, sign: 1.0 });
            if hi.is_finite() {
                bound_rows.push((ycols, hi - lo));
            }
            ycols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Shift { col: ycols, base: hi, sign: -1.0 });
            ycols += 1;
        } else {
            maps.push(VarMap::Split { pos: ycols, neg: ycols + 1 });
            ycols += 2;
        }
    }

    // Rewrite every row in y-space with rhs >= 0.
    struct Row {
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; ycols];
        let mut rhs = c.rhs;
        for (j, &cf) in c.coeffs.iter().enumerate() {
            if cf == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, base, sign } => {
                    coeffs[col] += cf * sign;
                    rhs -= cf * base;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += cf;
                    coeffs[neg] -= cf;
                }
            }
        }
        rows.push(Row { coeffs, relation: c.relation, rhs });
    }
    for &(col, cap) in &bound_rows {
        let mut coeffs = vec![0.0; ycols];
        coeffs[col] = 1.0;
        rows.push(Row { coeffs, relation: Relation::Le, rhs: cap });
    }
    for row in rows.iter_mut() {
        if row.rhs < 0.0 {
            row.rhs = -row.rhs;
            for v in row.coeffs.iter_mut() {
                *v = -*v;
            }
            row.relation = match row.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    // Column layout: [y | slack/surplus | artificial].
    let nslack = rows
        .iter()
        .filter(|r| !matches!(r.relation, Relation::Eq))
        .count();
    let nart = rows
        .iter()
        .filter(|r| !matches!(r.relation, Relation::Le))
        .count();
    let ncols = ycols + nslack + nart;
    let mut t = Tableau {
        rows: Vec::with_capacity(rows.len()),
        rhs: Vec::with_capacity(rows.len()),
        basis: Vec::with_capacity(rows.len()),
        ncols,
    };
    let mut next_slack = ycols;
    let mut next_art = ycols + nslack;
    let mut artificials: Vec<usize> = Vec::new();
    for row in &rows {
        let mut r = vec![0.0; ncols];
        r[..ycols].copy_from_slice(&row.coeffs);
        let basic = match row.relation {
            Relation::Le => {
                r[next_slack] = 1.0;
                next_slack += 1;
                next_slack - 1
            }
            Relation::Ge => {
                r[next_slack] = -1.0;
                next_slack += 1;
                r[next_art] = 1.0;
                next_art += 1;
                artificials.push(next_art - 1);
                next_art - 1
            }
            Relation::Eq => {
                r[next_art] = 1.0;
                next_art += 1;
                artificials.push(next_art - 1);
                next_art - 1
            }
        };
        t.rows.push(r);
        t.rhs.push(row.rhs);
        t.basis.push(basic);
    }

    if !artificials.is_empty() {
        // Phase 1: maximize minus the sum of artificials.
        let mut obj = vec![0.0; ncols];
        for &a in &artificials {
            obj[a] = -1.0;
        }
        for r in 0..t.rows.len() {
            let f = obj[t.basis[r]];
            if f != 0.0 {
                for c in 0..ncols {
                    obj[c] -= f * t.rows[r][c];
                }
            }
        }
        match t.run(&mut obj, ncols)? {
            LpStatus::Optimal => {}
            // A bounded-above objective cannot be unbounded; treat as instability.
            LpStatus::Unbounded => return Err(SolverError::Unstable { pivot: 0.0 }),
            LpStatus::Infeasible => unreachable!(),
        }
        let infeas: f64 = (0..t.rows.len())
            .filter(|&r| artificials.contains(&t.basis[r]))
            .map(|r| t.rhs[r].max(0.0))
            .sum();
        if infeas > FEAS_EPS {
            return Ok(LpSolution { status: LpStatus::Infeasible, value: 0.0, point: Vec::new() });
        }
        // Drive leftover artificials out of the basis, dropping redundant rows.
        let mut r = 0;
        while r < t.rows.len() {
            if artificials.contains(&t.basis[r]) {
                let col = (0..ycols + nslack).find(|&c| t.rows[r][c].abs() > PIVOT_MIN);
                match col {
                    Some(c) => {
                        let mut dummy = vec![0.0; ncols];
                        t.pivot(r, c, &mut dummy);
                        r += 1;
                    }
                    None => {
                        t.rows.swap_remove(r);
                        t.rhs.swap_remove(r);
                        t.basis.swap_remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    // Phase 2 over the real objective; artificial columns may not re-enter.
    let mut obj = vec![0.0; ncols];
    for (j, &cf) in lp.maximize.iter().enumerate() {
        if cf == 0.0 {
            continue;
        }
        match maps[j] {
            VarMap::Shift { col, sign, .. } => obj[col] += cf * sign,
            VarMap::Split { pos, neg } => {
                obj[pos] += cf;
                obj[neg] -= cf;
            }
        }
    }
    for r in 0..t.rows.len() {
        let f = obj[t.basis[r]];
        if f != 0.0 {
            for c in 0..ncols {
                obj[c] -= f * t.rows[r][c];
            }
        }
    }
    match t.run(&mut obj, ycols + nslack)? {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => {
            return Ok(LpSolution { status: LpStatus::Unbounded, value: 0.0, point: Vec::new() })
        }
        LpStatus::Infeasible => unreachable!(),
    }

    let mut y = vec![0.0; ncols];
    for r in 0..t.rows.len() {
        y[t.basis[r]] = t.rhs[r];
    }
    let mut point = vec![0.0; nvars];
    for (j, map) in maps.iter().enumerate() {
        point[j] = match *map {
            VarMap::Shift { col, base, sign } => base + sign * y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        };
    }
    let value = lp
        .maximize
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .sum();
    Ok(LpSolution { status: LpStatus::Optimal, value, point })
}
