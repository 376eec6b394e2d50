use crate::{Basis, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense, VarStatus};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Switch to Bland's rule after this many consecutive degenerate pivots.
    pub degenerate_threshold: usize,
    pub refactor_every: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            degenerate_threshold: 50,
            refactor_every: 64,
            max_iterations: None,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with_hint(lp, None, &SolverOptions::default())
}

/// Solve starting from `hint` when it describes a nonsingular basis of the
/// right shape; otherwise start from the all-slack basis.
pub fn solve_with_hint(
    lp: &LinearProgram,
    hint: Option<&Basis>,
    opts: &SolverOptions,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::new(lp, opts);
    let warm = match hint {
        Some(b) => s.load_basis(b),
        None => false,
    };
    if !warm {
        s.slack_basis();
    }
    let status = s.run()?;
    Ok(s.extract(lp, status))
}

struct Simplex<'a> {
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    /// Structural columns, column-major: `cols[j * m + r]`.
    cols: Vec<f64>,
    rhs: Vec<f64>,
    /// Minimization costs over structurals then slacks.
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basic: Vec<usize>,
    /// Dense basis inverse, row-major.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let m = lp.num_constraints();
        let n = lp.num_vars();
        let mut cols = vec![0.0; n * m];
        for (r, row) in lp.constraints.iter().enumerate() {
            for (j, &a) in row.coeffs.iter().enumerate() {
                cols[j * m + r] = a;
            }
        }
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();
        cost.resize(n + m, 0.0);
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for row in &lp.constraints {
            let (l, h) = match row.relation {
                Relation::LessEq => (0.0, f64::INFINITY),
                Relation::GreaterEq => (f64::NEG_INFINITY, 0.0),
                Relation::Equal => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        Self {
            opts,
            m,
            n,
            cols,
            rhs: lp.constraints.iter().map(|r| r.rhs).collect(),
            cost,
            lo,
            hi,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            basic: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn resting_status(&self, j: usize, preferred: VarStatus) -> VarStatus {
        let (l, h) = (self.lo[j], self.hi[j]);
        match preferred {
            VarStatus::AtUpper if h.is_finite() => VarStatus::AtUpper,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if h.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        }
    }

    fn place_nonbasic(&mut self, j: usize, st: VarStatus) {
        self.status[j] = st;
        self.x[j] = match st {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            _ => 0.0,
        };
    }

    fn slack_basis(&mut self) {
        for j in 0..self.n {
            let st = self.resting_status(j, VarStatus::AtLower);
            self.place_nonbasic(j, st);
        }
        self.basic.clear();
        for r in 0..self.m {
            self.status[self.n + r] = VarStatus::Basic;
            self.basic.push(self.n + r);
        }
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.m {
            self.binv[r * self.m + r] = 1.0;
        }
        self.recompute_basics();
        self.since_refactor = 0;
    }

    fn load_basis(&mut self, hint: &Basis) -> bool {
        if hint.status.len() != self.n + self.m
            || hint.status.iter().filter(|s| **s == VarStatus::Basic).count() != self.m
        {
            return false;
        }
        self.basic.clear();
        for j in 0..self.n + self.m {
            match hint.status[j] {
                VarStatus::Basic => {
                    self.status[j] = VarStatus::Basic;
                    self.basic.push(j);
                }
                st => {
                    let st = self.resting_status(j, st);
                    self.place_nonbasic(j, st);
                }
            }
        }
        if self.refactor().is_err() {
            return false;
        }
        self.recompute_basics();
        true
    }

    fn column_dot(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            let col = &self.cols[j * self.m..(j + 1) * self.m];
            col.iter().zip(y).map(|(a, b)| a * b).sum()
        } else {
            y[j - self.n]
        }
    }

    /// α = B⁻¹ A_j
    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        if j < self.n {
            let col = &self.cols[j * m..(j + 1) * m];
            for (i, o) in out.iter_mut().enumerate() {
                let row = &self.binv[i * m..(i + 1) * m];
                *o = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        } else {
            let r = j - self.n;
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.binv[i * m + r];
            }
        }
    }

    /// yᵀ = c_Bᵀ B⁻¹
    fn btran(&self, cb: &[f64], y: &mut [f64]) {
        let m = self.m;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yr, b) in y.iter_mut().zip(row) {
                    *yr += c * b;
                }
            }
        }
    }

    fn basis_matrix(&self) -> Vec<f64> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (c, &j) in self.basic.iter().enumerate() {
            if j < self.n {
                for r in 0..m {
                    b[r * m + c] = self.cols[j * m + r];
                }
            } else {
                b[(j - self.n) * m + c] = 1.0;
            }
        }
        b
    }

    /// Inverts the basis. Basic slacks are unit columns, so only the block
    /// of structural columns on rows without a basic slack needs a
    /// Gauss-Jordan inversion (with partial pivoting). With `x_S` the
    /// structural part and `R` those rows, `x_S = A_RS⁻¹ b_R` and each basic
    /// slack of row `r` is `b_r − A_rS x_S`.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut slack_row_covered = vec![false; m];
        let mut structural = Vec::new();
        for (c, &j) in self.basic.iter().enumerate() {
            if j < self.n {
                structural.push(c);
            } else {
                slack_row_covered[j - self.n] = true;
            }
        }
        let rows: Vec<usize> = (0..m).filter(|&r| !slack_row_covered[r]).collect();
        let k = structural.len();
        if rows.len() != k {
            return Err(LpError::Numerical {
                reason: "basis has a repeated slack".into(),
                iterations: self.iterations,
                condition: f64::INFINITY,
            });
        }
        // a = A_RS (k×k, row-major); inv starts as the identity.
        let mut a = vec![0.0; k * k];
        for (cc, &c) in structural.iter().enumerate() {
            let col = &self.cols[self.basic[c] * m..(self.basic[c] + 1) * m];
            for (rr, &r) in rows.iter().enumerate() {
                a[rr * k + cc] = col[r];
            }
        }
        let mut inv = vec![0.0; k * k];
        for i in 0..k {
            inv[i * k + i] = 1.0;
        }
        for c in 0..k {
            let (p, best) = (c..k)
                .map(|r| (r, a[r * k + c].abs()))
                .fold((c, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best < 1e-11 {
                return Err(LpError::Numerical {
                    reason: format!("singular basis (pivot {best:.3e} in column {c})"),
                    iterations: self.iterations,
                    condition: f64::INFINITY,
                });
            }
            if p != c {
                for t in 0..k {
                    a.swap(p * k + t, c * k + t);
                    inv.swap(p * k + t, c * k + t);
                }
            }
            let piv = a[c * k + c];
            for t in 0..k {
                a[c * k + t] /= piv;
                inv[c * k + t] /= piv;
            }
            for r in 0..k {
                if r != c {
                    let f = a[r * k + c];
                    if f != 0.0 {
                        for t in 0..k {
                            a[r * k + t] -= f * a[c * k + t];
                            inv[r * k + t] -= f * inv[c * k + t];
                        }
                    }
                }
            }
        }
        // inv row cc maps b_R to the structural basic in position
        // structural[cc].
        let mut binv = vec![0.0; m * m];
        for (cc, &c) in structural.iter().enumerate() {
            for (rr, &r) in rows.iter().enumerate() {
                binv[c * m + r] = inv[cc * k + rr];
            }
        }
        for (c, &j) in self.basic.iter().enumerate() {
            if j < self.n {
                continue;
            }
            let r0 = j - self.n;
            binv[c * m + r0] = 1.0;
            for (cc, &sc) in structural.iter().enumerate() {
                let coef = self.cols[self.basic[sc] * m + r0];
                if coef != 0.0 {
                    for (rr, &r) in rows.iter().enumerate() {
                        binv[c * m + r] -= coef * inv[cc * k + rr];
                    }
                }
            }
        }
        self.binv = binv;
        self.since_refactor = 0;
        Ok(())
    }

    fn condition_estimate(&self) -> f64 {
        let m = self.m;
        if m == 0 {
            return 1.0;
        }
        let b = self.basis_matrix();
        let norm1 = |mat: &[f64]| {
            (0..m)
                .map(|c| (0..m).map(|r| mat[r * m + c].abs()).sum::<f64>())
                .fold(0.0f64, f64::max)
        };
        norm1(&b) * norm1(&self.binv)
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                let v = self.x[j];
                if j < self.n {
                    for r in 0..m {
                        resid[r] -= self.cols[j * m + r] * v;
                    }
                } else {
                    resid[j - self.n] -= v;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&resid).map(|(a, b)| a * b).sum();
            self.x[self.basic[i]] = v;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        (self.lo[j] - v).max(v - self.hi[j]).max(0.0)
    }

    fn numerical(&self, reason: impl Into<String>) -> LpError {
        LpError::Numerical {
            reason: reason.into(),
            iterations: self.iterations,
            condition: self.condition_estimate(),
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let m = self.m;
        let total = self.n + self.m;
        let max_iter = self
            .opts
            .max_iterations
            .unwrap_or(200 * (total + 10).max(m + 10));
        let ftol = self.opts.feasibility_tol;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut degenerate_streak = 0usize;
        let mut verified = false;

        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit(max_iter));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                self.recompute_basics();
            }

            let phase_one = self.basic.iter().any(|&b| self.infeasibility(b) > ftol);
            for (i, &b) in self.basic.iter().enumerate() {
                cb[i] = if phase_one {
                    let v = self.x[b];
                    if v < self.lo[b] - ftol {
                        -1.0
                    } else if v > self.hi[b] + ftol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[b]
                };
            }
            self.btran(&cb, &mut y);

            let bland = degenerate_streak >= self.opts.degenerate_threshold;
            let mut entering: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.column_dot(&y, j);
                let dir = match st {
                    VarStatus::AtLower if d < -self.opts.optimality_tol => 1.0,
                    VarStatus::AtUpper if d > self.opts.optimality_tol => -1.0,
                    VarStatus::Free if d.abs() > self.opts.optimality_tol => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                // Confirm against a fresh factorization before declaring.
                if !verified && self.since_refactor > 0 {
                    self.refactor()?;
                    self.recompute_basics();
                    verified = true;
                    continue;
                }
                return Ok(if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                });
            };
            verified = false;

            self.ftran(q, &mut alpha);
            let mut step = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let b = self.basic[i];
                let rate = -dir * a;
                let v = self.x[b];
                let (limit, to_upper) = if rate > 0.0 {
                    if phase_one && v < self.lo[b] - ftol {
                        ((self.lo[b] - v) / rate, false)
                    } else if v > self.hi[b] + ftol || !self.hi[b].is_finite() {
                        continue;
                    } else {
                        ((self.hi[b] - v).max(0.0) / rate, true)
                    }
                } else {
                    let r = -rate;
                    if phase_one && v > self.hi[b] + ftol {
                        ((v - self.hi[b]) / r, true)
                    } else if v < self.lo[b] - ftol || !self.lo[b].is_finite() {
                        continue;
                    } else {
                        ((v - self.lo[b]).max(0.0) / r, false)
                    }
                };
                // Ties with a bound flip keep the flip (no pivot needed).
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((li, _)) if limit <= step + 1e-12 => {
                        if bland {
                            b < self.basic[li]
                        } else {
                            a.abs() > leave_pivot
                        }
                    }
                    _ => false,
                };
                if better {
                    step = limit.min(step);
                    leave = Some((i, to_upper));
                    leave_pivot = a.abs();
                }
            }

            if !step.is_finite() {
                if phase_one {
                    return Err(self.numerical("unbounded ray during feasibility phase"));
                }
                return Ok(LpStatus::Unbounded);
            }

            self.iterations += 1;
            if step <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            self.x[q] += dir * step;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.basic[i];
                    self.x[b] -= dir * step * a;
                }
            }
            match leave {
                None => {
                    let st = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.place_nonbasic(q, st);
                }
                Some((r, to_upper)) => {
                    let b = self.basic[r];
                    let st = if to_upper {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.place_nonbasic(b, st);
                    self.status[q] = VarStatus::Basic;
                    self.basic[r] = q;
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        for (off, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + off];
            if f != 0.0 {
                row.iter_mut().zip(prow.iter()).for_each(|(v, pv)| *v -= f * pv);
            }
        }
        self.since_refactor += 1;
    }

    fn extract(&self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let m = self.m;
        let primal: Vec<f64> = self.x[..self.n].to_vec();
        let maximize = lp.sense == Sense::Maximize;
        let sign = if maximize { -1.0 } else { 1.0 };
        let basis = Some(Basis {
            status: self.status.clone(),
        });
        match status {
            LpStatus::Optimal => {
                let cb: Vec<f64> = self.basic.iter().map(|&b| self.cost[b]).collect();
                let mut y = vec![0.0; m];
                self.btran(&cb, &mut y);
                // Lagrangian lower bound for the internal minimization.
                let mut bound: f64 = y.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
                for j in 0..self.n + m {
                    let d = self.cost[j] - self.column_dot(&y, j);
                    let (l, h) = (self.lo[j], self.hi[j]);
                    let term = if d > 0.0 {
                        if l.is_finite() {
                            d * l
                        } else if d <= self.opts.optimality_tol {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else if d < 0.0 {
                        if h.is_finite() {
                            d * h
                        } else if d >= -self.opts.optimality_tol {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        0.0
                    };
                    bound += term;
                }
                LpSolution {
                    status,
                    objective: lp.objective_value(&primal),
                    primal,
                    dual: y.iter().map(|v| sign * v).collect(),
                    dual_bound: sign * bound,
                    basis,
                    iterations: self.iterations,
                }
            }
            LpStatus::Infeasible => LpSolution {
                status,
                objective: if maximize {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                },
                primal,
                dual: vec![0.0; m],
                dual_bound: if maximize {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                },
                basis,
                iterations: self.iterations,
            },
            LpStatus::Unbounded => LpSolution {
                status,
                objective: if maximize {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                primal,
                dual: vec![0.0; m],
                dual_bound: if maximize {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                basis,
                iterations: self.iterations,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp1(sense: Sense, c: &[f64]) -> LinearProgram {
        LinearProgram::new(sense, c.to_vec())
    }

    #[test]
    fn single_upper_bound() {
        let mut lp = lp1(Sense::Maximize, &[1.0]);
        lp.add_constraint(vec![1.0], Relation::LessEq, 3.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.dual[0] - 1.0).abs() < 1e-12);
        assert!((s.dual_bound - 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_and_sum() {
        let mut lp = lp1(Sense::Maximize, &[1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::LessEq, 1.0);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_rows() {
        let mut lp = lp1(Sense::Minimize, &[1.0, 0.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::GreaterEq, 3.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::LessEq, 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = lp1(Sense::Maximize, &[1.0, -1.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::GreaterEq, -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y, x - y = 1, x + y ≥ -4, both free.
        let mut lp = lp1(Sense::Minimize, &[1.0, 1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![1.0, -1.0], Relation::Equal, 1.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::GreaterEq, -4.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-9);
        assert!(lp.max_violation(&s.primal) < 1e-9);
    }

    #[test]
    fn no_rows() {
        let mut lp = lp1(Sense::Maximize, &[2.0, -1.0]);
        lp.set_bounds(0, -1.0, 4.0);
        lp.set_bounds(1, -2.0, 5.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 10.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_matches_cold() {
        let mut lp = lp1(Sense::Maximize, &[3.0, 2.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0, 1.0], Relation::LessEq, 4.0);
        lp.add_constraint(vec![1.0, 3.0, 0.0], Relation::LessEq, 6.0);
        lp.add_constraint(vec![2.0, 0.0, 1.0], Relation::GreaterEq, 1.0);
        lp.set_bounds(0, 0.0, 3.0);
        let cold = solve(&lp).unwrap();
        lp.set_bounds(0, 0.0, 2.0);
        let recold = solve(&lp).unwrap();
        let warm = solve_with_hint(&lp, cold.basis.as_ref(), &SolverOptions::default()).unwrap();
        assert!((warm.objective - recold.objective).abs() < 1e-9);
    }

    #[test]
    fn mismatched_hint_falls_back() {
        let mut lp = lp1(Sense::Maximize, &[1.0]);
        lp.add_constraint(vec![1.0], Relation::LessEq, 3.0);
        let bogus = Basis {
            status: vec![VarStatus::Basic; 5],
        };
        let s = solve_with_hint(&lp, Some(&bogus), &SolverOptions::default()).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = lp1(Sense::Maximize, &[1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::LessEq, 3.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
        let mut lp = lp1(Sense::Maximize, &[1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance; Dantzig pricing alone can cycle.
        let mut lp = lp1(Sense::Minimize, &[-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::LessEq, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::LessEq, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::LessEq, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
