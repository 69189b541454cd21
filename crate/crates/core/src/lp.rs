//! Bounded-variable revised simplex for small dense linear programs.
//!
//! Problems are stated as `min c'x  s.t.  A x {<=,=,>=} b,  l <= x <= u` with
//! infinite bounds allowed. Rows are held sparsely because the centralized
//! fleet problem is mostly zeros, but the basis inverse is kept explicitly in
//! dense column-major form. Duals follow the sensitivity convention
//! `y_i = d(objective)/d(b_i)`.

use std::io::{self, Write};

use thiserror::Error;

/// Relation of a constraint row to its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    InvertedBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("simplex did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values. Empty unless `Optimal`.
    pub x: Vec<f64>,
    /// One dual per row, `d objective / d rhs`. Empty unless `Optimal`.
    pub duals: Vec<f64>,
    /// Reduced costs of the structural variables. Empty unless `Optimal`.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// `None` picks a limit proportional to the problem size.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
            refactor_interval: 120,
            bland_after: 50,
        }
    }
}

impl SolveOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            feasibility_tol: tol,
            optimality_tol: tol,
            ..Self::default()
        }
    }
}

/// A linear program in general form.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a program from dense data, validating every dimension.
    pub fn from_dense(
        objective: Vec<f64>,
        matrix: Vec<Vec<f64>>,
        senses: Vec<Sense>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        if matrix.len() != senses.len() || matrix.len() != rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} matrix rows, {} senses, {} right-hand sides",
                matrix.len(),
                senses.len(),
                rhs.len()
            )));
        }
        if lower.len() != n || upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} objective entries but {} lower / {} upper bounds",
                n,
                lower.len(),
                upper.len()
            )));
        }
        let mut rows = Vec::with_capacity(matrix.len());
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect(),
            );
        }
        let lp = Self {
            objective,
            lower,
            upper,
            rows,
            senses,
            rhs,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// Adds a row; repeated column indices are summed.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for &(j, v) in coeffs {
            match row.iter_mut().find(|(k, _)| *k == j) {
                Some(entry) => entry.1 += v,
                None => row.push((j, v)),
            }
        }
        row.retain(|(_, v)| *v != 0.0);
        row.sort_by_key(|(j, _)| *j);
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.rhs[row] = rhs;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for &(j, v) in &self.rows[i] {
            out[j] = v;
        }
        out
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension("bounds length differs from objective".into()));
        }
        if self.rows.len() != self.senses.len() || self.rows.len() != self.rhs.len() {
            return Err(LpError::Dimension("row, sense and rhs counts differ".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n {
                    return Err(LpError::Dimension(format!(
                        "row {i} references column {j} of {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(LpError::NonFinite(format!("row {i}, column {j}")));
                }
            }
            if !self.rhs[i].is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {i}")));
            }
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::NonFinite(format!("objective of column {j}")));
            }
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::InvertedBounds {
                    var: j,
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        solve(self, &SolveOptions::default())
    }

    /// Writes the program as a plain-text dense tableau.
    pub fn write_text<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# linear program: {} rows x {} columns", self.num_rows(), self.num_vars())?;
        write!(w, "min")?;
        for c in &self.objective {
            write!(w, " {c}")?;
        }
        writeln!(w)?;
        for i in 0..self.num_rows() {
            write!(w, "r{i}:")?;
            for v in self.dense_row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w, " {} {}", self.senses[i].symbol(), self.rhs[i])?;
        }
        for j in 0..self.num_vars() {
            writeln!(w, "x{j} in [{}, {}]", self.lower[j], self.upper[j])?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ViolationKind {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Signed amount. Inequality violations are positive; equality rows carry
    /// `activity - rhs`.
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.amount.abs())
            .fold(0.0, f64::max)
    }
}

/// Lists every row and bound the point violates by more than `tol`.
pub fn check_feasible(
    lp: &LinearProgram,
    point: &[f64],
    tol: f64,
) -> Result<FeasibilityReport, LpError> {
    if point.len() != lp.num_vars() {
        return Err(LpError::Dimension(format!(
            "point has {} entries, program has {} variables",
            point.len(),
            lp.num_vars()
        )));
    }
    let mut violations = Vec::new();
    for i in 0..lp.num_rows() {
        let act = lp.row_activity(i, point);
        let b = lp.rhs[i];
        let amount = match lp.senses[i] {
            Sense::Le => (act - b).max(0.0),
            Sense::Ge => (b - act).max(0.0),
            Sense::Eq => act - b,
        };
        if amount.abs() > tol {
            violations.push(Violation {
                kind: ViolationKind::Row(i),
                amount,
            });
        }
    }
    for (j, &v) in point.iter().enumerate() {
        if lp.lower[j] - v > tol {
            violations.push(Violation {
                kind: ViolationKind::Lower(j),
                amount: lp.lower[j] - v,
            });
        }
        if v - lp.upper[j] > tol {
            violations.push(Violation {
                kind: ViolationKind::Upper(j),
                amount: v - lp.upper[j],
            });
        }
    }
    Ok(FeasibilityReport { violations })
}

pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut simplex = Simplex::new(lp, *opts);
    simplex.run(lp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    is_artificial: Vec<bool>,
    basis: Vec<usize>,
    /// Column-major basis inverse: `binv[j * m + i] = B^{-1}[i][j]`.
    binv: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    b: Vec<f64>,
    opts: SolveOptions,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram, opts: SolveOptions) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in row {
                cols[j].push((i, v));
            }
        }
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        let mut x = vec![0.0; n];
        let mut state = vec![VarState::AtLower; n];
        for j in 0..n {
            if lo[j].is_finite() {
                x[j] = lo[j];
                state[j] = VarState::AtLower;
            } else if up[j].is_finite() {
                x[j] = up[j];
                state[j] = VarState::AtUpper;
            } else {
                x[j] = 0.0;
                state[j] = VarState::Free;
            }
        }
        // Residual each logical must absorb with structurals at their bounds.
        let mut resid = lp.rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, v) in col {
                    resid[i] -= v * x[j];
                }
            }
        }
        let mut is_artificial = vec![false; n];
        let mut basis = vec![usize::MAX; m];
        let mut diag = vec![1.0; m];
        let mut artificials = Vec::new();
        for i in 0..m {
            let (slo, sup) = match lp.senses[i] {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            let j = cols.len();
            cols.push(vec![(i, 1.0)]);
            lo.push(slo);
            up.push(sup);
            is_artificial.push(false);
            let r = resid[i];
            if r >= slo && r <= sup {
                x.push(r);
                state.push(VarState::Basic);
                basis[i] = j;
            } else {
                let clamped = r.clamp(slo, sup);
                x.push(clamped);
                state.push(if clamped == slo {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                });
                artificials.push((i, r - clamped));
            }
        }
        for (i, gap) in artificials {
            let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            let j = cols.len();
            cols.push(vec![(i, sign)]);
            lo.push(0.0);
            up.push(f64::INFINITY);
            x.push(gap.abs());
            state.push(VarState::Basic);
            is_artificial.push(true);
            basis[i] = j;
            diag[i] = sign;
        }
        let total = cols.len();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / diag[i];
        }
        let cost = (0..total)
            .map(|j| if is_artificial[j] { 1.0 } else { 0.0 })
            .collect();
        let max_iterations = opts
            .max_iterations
            .unwrap_or(20 * (m + total) + 10_000);
        Self {
            m,
            n_struct: n,
            cols,
            cost,
            lo,
            up,
            x,
            state,
            is_artificial,
            basis,
            binv,
            y: vec![0.0; m],
            d: vec![0.0; total],
            b: lp.rhs.clone(),
            opts,
            iterations: 0,
            max_iterations,
            since_refactor: 0,
        }
    }

    fn run(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let has_artificials = self.is_artificial.iter().any(|&a| a);
        if has_artificials {
            self.compute_duals();
            self.run_phase()?;
            let infeasibility: f64 = (0..self.cols.len())
                .filter(|&j| self.is_artificial[j])
                .map(|j| self.x[j].abs())
                .sum();
            let scale = self.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            if infeasibility > self.opts.feasibility_tol * scale {
                return Ok(self.non_optimal(LpStatus::Infeasible));
            }
            self.drive_out_artificials()?;
        }
        for j in 0..self.cols.len() {
            self.cost[j] = if j < self.n_struct { lp.objective[j] } else { 0.0 };
        }
        self.compute_duals();
        match self.run_phase()? {
            PhaseEnd::Unbounded => Ok(self.non_optimal(LpStatus::Unbounded)),
            PhaseEnd::Optimal => {
                let x: Vec<f64> = self.x[..self.n_struct].to_vec();
                let objective = lp.objective_value(&x);
                self.price_all();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    objective,
                    duals: self.y.clone(),
                    reduced_costs: self.d[..self.n_struct].to_vec(),
                    x,
                    iterations: self.iterations,
                })
            }
        }
    }

    fn non_optimal(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            iterations: self.iterations,
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        for k in 0..m {
            let col = &self.binv[k * m..(k + 1) * m];
            self.y[k] = cb.iter().zip(col).map(|(c, v)| c * v).sum();
        }
    }

    fn price(&self, j: usize) -> f64 {
        let mut dj = self.cost[j];
        for &(i, v) in &self.cols[j] {
            dj -= self.y[i] * v;
        }
        dj
    }

    fn price_all(&mut self) {
        for j in 0..self.cols.len() {
            self.d[j] = if self.state[j] == VarState::Basic {
                0.0
            } else {
                self.price(j)
            };
        }
    }

    /// Recomputes basic values from the nonbasic ones: `x_B = B^{-1}(b - N x_N)`.
    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.cols.len() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    r[i] -= v * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (k, &rk) in r.iter().enumerate() {
            if rk != 0.0 {
                let col = &self.binv[k * m..(k + 1) * m];
                for (acc, v) in xb.iter_mut().zip(col) {
                    *acc += rk * v;
                }
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, v) in &self.cols[j] {
            let col = &self.binv[k * m..(k + 1) * m];
            for (acc, b) in alpha.iter_mut().zip(col) {
                *acc += v * b;
            }
        }
        alpha
    }

    /// Gauss-Jordan inversion of the current basis with partial pivoting.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Row-major working copies with tracked nonzero column spans.
        let mut a = vec![0.0; m * m];
        let mut a_span = vec![(usize::MAX, 0usize); m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + r] = v;
                let s = &mut a_span[i];
                s.0 = s.0.min(r);
                s.1 = s.1.max(r + 1);
            }
        }
        let mut inv = vec![0.0; m * m];
        let mut inv_span = vec![(0usize, 0usize); m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
            inv_span[i] = (i, i + 1);
        }
        for k in 0..m {
            let mut p = k;
            let mut best = a[k * m + k].abs();
            for i in k + 1..m {
                let v = a[i * m + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-13 {
                return Err(LpError::SingularBasis);
            }
            if p != k {
                for c in 0..m {
                    a.swap(k * m + c, p * m + c);
                    inv.swap(k * m + c, p * m + c);
                }
                a_span.swap(k, p);
                inv_span.swap(k, p);
            }
            let piv = a[k * m + k];
            let (alo, ahi) = (a_span[k].0.max(k), a_span[k].1);
            for c in alo..ahi {
                a[k * m + c] /= piv;
            }
            let (ilo, ihi) = inv_span[k];
            for c in ilo..ihi {
                inv[k * m + c] /= piv;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = a[i * m + k];
                if f == 0.0 {
                    continue;
                }
                let (row_k, row_i) = if i < k {
                    let (lo_part, hi_part) = a.split_at_mut(k * m);
                    (&hi_part[..m], &mut lo_part[i * m..(i + 1) * m])
                } else {
                    let (lo_part, hi_part) = a.split_at_mut(i * m);
                    (&lo_part[k * m..(k + 1) * m], &mut hi_part[..m])
                };
                for c in alo..ahi {
                    row_i[c] -= f * row_k[c];
                }
                row_i[k] = 0.0;
                let s = &mut a_span[i];
                s.0 = s.0.min(alo);
                s.1 = s.1.max(ahi);
                let (inv_k, inv_i) = if i < k {
                    let (lo_part, hi_part) = inv.split_at_mut(k * m);
                    (&hi_part[..m], &mut lo_part[i * m..(i + 1) * m])
                } else {
                    let (lo_part, hi_part) = inv.split_at_mut(i * m);
                    (&lo_part[k * m..(k + 1) * m], &mut hi_part[..m])
                };
                for c in ilo..ihi {
                    inv_i[c] -= f * inv_k[c];
                }
                let s = &mut inv_span[i];
                s.0 = s.0.min(ilo);
                s.1 = s.1.max(ihi);
            }
        }
        // inv is row-major B^{-1}; store column-major.
        for i in 0..m {
            for j in 0..m {
                self.binv[j * m + i] = inv[i * m + j];
            }
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        let nz: Vec<usize> = (0..m).filter(|&i| i != r && alpha[i] != 0.0).collect();
        for j in 0..m {
            let col = &mut self.binv[j * m..(j + 1) * m];
            let v = col[r];
            if v == 0.0 {
                continue;
            }
            let v = v / ar;
            col[r] = v;
            for &i in &nz {
                col[i] -= alpha[i] * v;
            }
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        let _ = leaving;
        self.since_refactor += 1;
    }

    fn eligible(&self, j: usize, dj: f64) -> bool {
        let tol = self.opts.optimality_tol;
        match self.state[j] {
            VarState::Basic => false,
            VarState::AtLower => dj < -tol && self.up[j] > self.lo[j],
            VarState::AtUpper => dj > tol && self.up[j] > self.lo[j],
            VarState::Free => dj.abs() > tol,
        }
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, LpError> {
        let mut degenerate_streak = 0usize;
        let mut verified = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::NonConvergence {
                    iterations: self.iterations,
                });
            }
            if self.since_refactor >= self.opts.refactor_interval {
                self.refactor()?;
                self.compute_basic_values();
                self.compute_duals();
            }
            let bland = degenerate_streak >= self.opts.bland_after;
            // Pricing: Dantzig with lowest-index ties, Bland when cycling is suspected.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if self.state[j] == VarState::Basic || self.up[j] == self.lo[j] {
                    continue;
                }
                let dj = self.price(j);
                if !self.eligible(j, dj) {
                    continue;
                }
                if bland {
                    entering = Some((j, dj));
                    break;
                }
                match entering {
                    Some((_, best)) if dj.abs() <= best.abs() => {}
                    _ => entering = Some((j, dj)),
                }
            }
            let Some((q, dq)) = entering else {
                if verified || self.since_refactor == 0 {
                    return Ok(PhaseEnd::Optimal);
                }
                // Confirm optimality on a fresh factorization before stopping.
                self.refactor()?;
                self.compute_basic_values();
                self.compute_duals();
                verified = true;
                continue;
            };
            verified = false;
            self.iterations += 1;

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);
            let mut t_best = self.up[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_alpha = 0.0_f64;
            for r in 0..self.m {
                let a = alpha[r];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let rate = -dir * a;
                let j = self.basis[r];
                let (limit, to_upper) = if rate < 0.0 {
                    if !self.lo[j].is_finite() {
                        continue;
                    }
                    ((self.x[j] - self.lo[j]).max(0.0) / -rate, false)
                } else {
                    if !self.up[j].is_finite() {
                        continue;
                    }
                    ((self.up[j] - self.x[j]).max(0.0) / rate, true)
                };
                let better = if limit < t_best - 1e-12 {
                    true
                } else if limit <= t_best + 1e-12 {
                    match leave {
                        None => false,
                        Some((lr, _)) => {
                            if bland {
                                j < self.basis[lr]
                            } else {
                                a.abs() > best_alpha
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    t_best = limit;
                    leave = Some((r, to_upper));
                    best_alpha = a.abs();
                }
            }
            if !t_best.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            let t = t_best;
            if t <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            if t != 0.0 {
                self.x[q] += dir * t;
                for r in 0..self.m {
                    if alpha[r] != 0.0 {
                        let j = self.basis[r];
                        self.x[j] -= dir * t * alpha[r];
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    if dir > 0.0 {
                        self.x[q] = self.up[q];
                        self.state[q] = VarState::AtUpper;
                    } else {
                        self.x[q] = self.lo[q];
                        self.state[q] = VarState::AtLower;
                    }
                }
                Some((r, to_upper)) => {
                    let j = self.basis[r];
                    if to_upper {
                        self.x[j] = self.up[j];
                        self.state[j] = VarState::AtUpper;
                    } else {
                        self.x[j] = self.lo[j];
                        self.state[j] = VarState::AtLower;
                    }
                    let m = self.m;
                    let theta = dq / alpha[r];
                    for k in 0..m {
                        let rho = self.binv[k * m + r];
                        if rho != 0.0 {
                            self.y[k] += theta * rho;
                        }
                    }
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }

    /// Pivots basic artificials at zero out of the basis where possible and
    /// fixes every artificial at zero for phase two.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        for r in 0..m {
            let j = self.basis[r];
            if !self.is_artificial[j] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for q in 0..self.cols.len() {
                if self.state[q] == VarState::Basic || self.is_artificial[q] {
                    continue;
                }
                let a: f64 = self.cols[q]
                    .iter()
                    .map(|&(i, v)| v * self.binv[i * m + r])
                    .sum();
                if a.abs() > 1e-7 && best.is_none_or(|(_, b)| a.abs() > b.abs()) {
                    best = Some((q, a));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                self.x[j] = 0.0;
                self.state[j] = VarState::AtLower;
                self.pivot(r, q, &alpha);
            }
        }
        for j in 0..self.cols.len() {
            if self.is_artificial[j] {
                self.lo[j] = 0.0;
                self.up[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = VarState::AtLower;
                }
            }
        }
        self.refactor()?;
        self.compute_basic_values();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(lower: f64, upper: f64, cost: f64) -> LinearProgram {
        let mut lp = LinearProgram::new();
        lp.add_var(cost, lower, upper);
        lp
    }

    #[test]
    fn single_active_constraint() {
        let mut lp = single(0.0, 10.0, 1.0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_objective_equality() {
        let mut lp = single(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row(&[(0, 1.0)], Sense::Eq, 5.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 5.0).abs() < 1e-12);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = single(0.0, 1.0, 1.0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = single(0.0, f64::INFINITY, -1.0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 2.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_mixed_senses() {
        // min -x - 2y  s.t. x + y <= 4, x - y >= -2, y free, x in [0, 3]
        let mut lp = LinearProgram::new();
        lp.add_var(-1.0, 0.0, 3.0);
        lp.add_var(-2.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Sense::Le, 4.0);
        lp.add_row(&[(0, 1.0), (1, -1.0)], Sense::Ge, -2.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
        assert!((sol.objective + 7.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 10.0);
        lp.add_var(2.0, 0.0, 10.0);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        lp.add_row(&[(0, 2.0), (1, 2.0)], Sense::Eq, 6.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_errors_are_structural() {
        let err = LinearProgram::from_dense(
            vec![1.0, 2.0],
            vec![vec![1.0]],
            vec![Sense::Le],
            vec![1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap_err();
        assert!(matches!(err, LpError::Dimension(_)));
        let mut lp = single(2.0, 1.0, 1.0);
        lp.add_row(&[(0, 1.0)], Sense::Le, 1.0);
        assert!(matches!(
            lp.solve().unwrap_err(),
            LpError::InvertedBounds { .. }
        ));
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut lp = LinearProgram::new();
        for _ in 0..3 {
            lp.add_var(-1.0, 0.0, 1.0);
        }
        lp.add_row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Ge, 1.0);
        lp.add_row(&[(0, 1.0), (1, 2.0)], Sense::Le, 1.5);
        let opts = SolveOptions {
            max_iterations: Some(0),
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&lp, &opts),
            Err(LpError::NonConvergence { .. })
        ));
    }

    #[test]
    fn feasibility_report() {
        let mut lp = single(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 1.0);
        assert!(check_feasible(&lp, &[1.0], 1e-9).unwrap().is_feasible());
        let report = check_feasible(&lp, &[0.5], 1e-9).unwrap();
        assert_eq!(
            report.violations,
            vec![Violation {
                kind: ViolationKind::Row(0),
                amount: 0.5
            }]
        );
        assert!(check_feasible(&lp, &[0.5, 1.0], 1e-9).is_err());
    }

    #[test]
    fn text_dump_lists_rows_and_bounds() {
        let mut lp = single(0.0, 10.0, 1.0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 1.0);
        let mut buf = Vec::new();
        lp.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("r0: 1 >= 1"));
        assert!(text.contains("x0 in [0, 10]"));
    }
}
