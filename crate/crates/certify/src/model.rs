//! Mixed-integer models with complementarity pairs and bilinear terms.

use rcert_lp::{LinearProgram, Relation, Sense};

/// Affine function `c + Σ coef[v]·x_v`. Missing trailing coefficients are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    pub coef: Vec<f64>,
    pub constant: f64,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Self {
            coef: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        let mut coef = vec![0.0; v + 1];
        coef[v] = 1.0;
        Self { coef, constant: 0.0 }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Expr, scale: f64) {
        if other.coef.len() > self.coef.len() {
            self.coef.resize(other.coef.len(), 0.0);
        }
        for (a, b) in self.coef.iter_mut().zip(&other.coef) {
            *a += scale * b;
        }
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, s: f64) -> Expr {
        Expr {
            coef: self.coef.iter().map(|c| c * s).collect(),
            constant: self.constant * s,
        }
    }

    pub fn plus_constant(mut self, c: f64) -> Expr {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Range over the box `[lower, upper]`.
    pub fn interval(&self, lower: &[f64], upper: &[f64]) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (v, &a) in self.coef.iter().enumerate() {
            if a > 0.0 {
                lo += a * lower[v];
                hi += a * upper[v];
            } else if a < 0.0 {
                lo += a * upper[v];
                hi += a * lower[v];
            }
        }
        (lo, hi)
    }

    pub fn is_constant(&self) -> bool {
        self.coef.iter().all(|&c| c == 0.0)
    }

    fn sparse(&self) -> Vec<(usize, f64)> {
        self.coef
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(v, &c)| (v, c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `w = x · y` over bounded `x`, `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bilinear {
    pub w: usize,
    pub x: usize,
    pub y: usize,
}

/// Maximize a linear objective over continuous and binary variables subject
/// to linear rows, `x·y = 0` complementarity pairs (both nonnegative) and
/// `w = x·y` bilinear equalities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    pub binaries: Vec<usize>,
    pub complementarity: Vec<(usize, usize)>,
    pub bilinear: Vec<Bilinear>,
    pub objective: Expr,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.lower.len() - 1
    }

    pub fn add_binary(&mut self) -> usize {
        let v = self.add_var(0.0, 1.0);
        self.binaries.push(v);
        v
    }

    /// Adds `expr (rel) 0`.
    pub fn add_expr_row(&mut self, expr: &Expr, relation: Relation) {
        self.rows.push(Row {
            terms: expr.sparse(),
            relation,
            rhs: -expr.constant,
        });
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row {
            terms,
            relation,
            rhs,
        });
    }

    pub fn add_complementarity(&mut self, x: usize, y: usize) {
        self.complementarity.push((x, y));
    }

    pub fn add_bilinear(&mut self, w: usize, x: usize, y: usize) {
        self.bilinear.push(Bilinear { w, x, y });
    }

    /// Every variable that enters a big-M, complementarity or bilinear term
    /// must have finite bounds.
    pub fn validate(&self) -> Result<(), String> {
        for (v, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(format!("variable {v} has bounds [{l}, {u}]"));
            }
        }
        let finite = |v: usize| self.lower[v].is_finite() && self.upper[v].is_finite();
        for &(x, y) in &self.complementarity {
            if !finite(x) || !finite(y) || self.lower[x] < 0.0 || self.lower[y] < 0.0 {
                return Err(format!("complementarity pair ({x}, {y}) needs finite nonnegative bounds"));
            }
        }
        for b in &self.bilinear {
            if !finite(b.x) || !finite(b.y) {
                return Err(format!("bilinear factors of {} must be bounded", b.w));
            }
        }
        Ok(())
    }

    /// LP relaxation over the box `[lower, upper]`: binaries relaxed,
    /// complementarity pairs replaced by `x/x̄ + y/ȳ ≤ 1`, bilinear terms by
    /// McCormick envelopes. The objective constant is not included.
    ///
    /// The row count does not depend on the box, so bases carry over
    /// between boxes.
    pub fn relaxation(&self, lower: &[f64], upper: &[f64]) -> LinearProgram {
        let n = self.num_vars();
        let mut obj = self.objective.coef.clone();
        obj.resize(n, 0.0);
        let mut lp = LinearProgram::new(Sense::Maximize, obj);
        lp.lower = lower.to_vec();
        lp.upper = upper.to_vec();
        for row in &self.rows {
            let mut coeffs = vec![0.0; n];
            for &(v, a) in &row.terms {
                coeffs[v] += a;
            }
            lp.add_constraint(coeffs, row.relation, row.rhs);
        }
        for &(x, y) in &self.complementarity {
            let mut coeffs = vec![0.0; n];
            if upper[x] > 0.0 && upper[y] > 0.0 {
                coeffs[x] = 1.0 / upper[x];
                coeffs[y] = 1.0 / upper[y];
            }
            lp.add_constraint(coeffs, Relation::LessEq, 1.0);
        }
        for b in &self.bilinear {
            let (xl, xu, yl, yu) = (lower[b.x], upper[b.x], lower[b.y], upper[b.y]);
            // w ≥ xl·y + yl·x − xl·yl and w ≥ xu·y + yu·x − xu·yu.
            for (xa, ya, rel) in [
                (xl, yl, Relation::GreaterEq),
                (xu, yu, Relation::GreaterEq),
                (xu, yl, Relation::LessEq),
                (xl, yu, Relation::LessEq),
            ] {
                let mut coeffs = vec![0.0; n];
                coeffs[b.w] += 1.0;
                coeffs[b.y] -= xa;
                coeffs[b.x] -= ya;
                lp.add_constraint(coeffs, rel, -xa * ya);
            }
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_arithmetic() {
        let mut e = Expr::var(2).scaled(3.0).plus_constant(1.0);
        e.add_scaled(&Expr::var(0), -2.0);
        assert_eq!(e.eval(&[1.0, 5.0, 2.0]), 1.0 + 6.0 - 2.0);
        assert_eq!(e.interval(&[0.0, 0.0, -1.0], &[1.0, 1.0, 1.0]), (-4.0, 4.0));
        assert!(Expr::constant(4.0).is_constant());
    }

    #[test]
    fn mccormick_is_exact_at_corners() {
        let mut m = MipModel::new();
        let x = m.add_var(0.5, 2.0);
        let y = m.add_var(-1.0, 3.0);
        let w = m.add_var(-10.0, 10.0);
        m.add_bilinear(w, x, y);
        let lp = m.relaxation(&m.lower, &m.upper);
        for (xv, yv) in [(0.5, -1.0), (2.0, -1.0), (0.5, 3.0), (2.0, 3.0)] {
            let mut pt = vec![xv, yv, xv * yv];
            assert!(lp.max_violation(&pt) < 1e-12);
            pt[2] += 1e-3;
            assert!(lp.max_violation(&pt) > 0.0);
        }
    }
}
