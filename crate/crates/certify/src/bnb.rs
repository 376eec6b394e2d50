//! Best-first branch-and-bound over LP relaxations of a [`MipModel`].
//!
//! Every node is a sub-box of the variable bounds. Its relaxation relaxes
//! binaries to `[0, 1]`, replaces complementarity pairs by their secant and
//! bilinear terms by McCormick envelopes over the node box. Node bounds come
//! from the LP's Lagrangian dual bound, which stays valid under rounding.
//!
//! The reported upper bound is `max(incumbent, open node bounds, bounds of
//! nodes closed without a certificate of exactness)`. A pruned node's bound
//! is at most the incumbent value, so the upper bound is sound whether or
//! not the incumbent is actually attained.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rcert_lp::{solve_with_hint, Basis, LpStatus, SolverOptions};

use crate::model::MipModel;

/// Supplies attainable objective values from relaxation solutions.
pub trait Heuristic {
    /// Starting incumbent, if any.
    fn initial(&mut self) -> Option<(f64, Vec<f64>)> {
        None
    }

    /// Attainable `(objective, point)` derived from a node's LP primal.
    fn improve(&mut self, primal: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Absolute gap at which the search stops.
    pub tolerance: f64,
    pub node_limit: usize,
    /// A binary is fractional when its distance to {0, 1} exceeds this.
    pub integrality_tol: f64,
    /// A complementarity pair is violated when `min(x, y)` exceeds this.
    pub complementarity_tol: f64,
    /// A bilinear term is violated when `|w − x·y|` exceeds this.
    pub bilinear_tol: f64,
    pub solver: SolverOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            node_limit: 200_000,
            integrality_tol: 1e-6,
            complementarity_tol: 1e-7,
            bilinear_tol: 1e-7,
            solver: SolverOptions {
                max_iterations: Some(100_000),
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    /// Upper bound within tolerance of the incumbent.
    Complete,
    /// Stopped at the node limit, or closed nodes left a gap.
    Incomplete,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    /// Sound upper bound on the model's maximum, objective constant included.
    pub upper_bound: f64,
    /// Best attainable value found; `-∞` if none.
    pub incumbent_value: f64,
    /// Point reported with the incumbent: the heuristic's point, or the LP
    /// primal without a heuristic.
    pub incumbent: Option<Vec<f64>>,
    pub nodes: usize,
    /// LP solves that failed; those nodes keep their parent's bound.
    pub lp_failures: usize,
}

impl BnbResult {
    pub fn gap(&self) -> f64 {
        (self.upper_bound - self.incumbent_value).max(0.0)
    }
}

struct Node {
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Highest bound first, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

enum Branch {
    /// Fix the variable to 0 or to 1.
    Binary(usize),
    /// Fix either member of the pair to zero.
    Pair(usize, usize),
    /// Split the variable's interval at the point.
    Split(usize, f64),
}

fn choose_branch(model: &MipModel, x: &[f64], lower: &[f64], upper: &[f64], opts: &BnbOptions) -> Option<Branch> {
    let mut best: Option<(f64, usize)> = None;
    for &b in &model.binaries {
        let frac = x[b].min(1.0 - x[b]);
        if frac > opts.integrality_tol && best.is_none_or(|(f, _)| frac > f) {
            best = Some((frac, b));
        }
    }
    if let Some((_, b)) = best {
        return Some(Branch::Binary(b));
    }
    let mut best: Option<(f64, usize)> = None;
    for (p, &(a, b)) in model.complementarity.iter().enumerate() {
        let v = x[a].min(x[b]);
        if v > opts.complementarity_tol && best.is_none_or(|(f, _)| v > f) {
            best = Some((v, p));
        }
    }
    if let Some((_, p)) = best {
        let (a, b) = model.complementarity[p];
        return Some(Branch::Pair(a, b));
    }
    let mut best: Option<(f64, usize)> = None;
    for (t, bl) in model.bilinear.iter().enumerate() {
        let v = (x[bl.w] - x[bl.x] * x[bl.y]).abs();
        if v > opts.bilinear_tol && best.is_none_or(|(f, _)| v > f) {
            best = Some((v, t));
        }
    }
    let (_, t) = best?;
    let bl = model.bilinear[t];
    let width = |v: usize| upper[v] - lower[v];
    let v = if width(bl.x) >= width(bl.y) { bl.x } else { bl.y };
    let mid = 0.5 * (lower[v] + upper[v]);
    // An interval too narrow to split leaves nothing to branch on.
    if mid <= lower[v] || mid >= upper[v] {
        return None;
    }
    Some(Branch::Split(v, mid))
}

/// Maximizes `model`'s objective. `heuristic` turns relaxation solutions
/// into attainable values; without one, LP solutions that satisfy every
/// integrality, complementarity and bilinear condition are used directly.
pub fn branch_and_bound(model: &MipModel, opts: &BnbOptions, mut heuristic: Option<&mut dyn Heuristic>) -> BnbResult {
    let constant = model.objective.constant;
    let mut incumbent_value = f64::NEG_INFINITY;
    let mut incumbent = None;
    if let Some((v, p)) = heuristic.as_deref_mut().and_then(|h| h.initial()) {
        incumbent_value = v;
        incumbent = Some(p);
    }
    let mut closed_ub = f64::NEG_INFINITY;
    let mut nodes = 0;
    let mut lp_failures = 0;
    let mut next_id = 1;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        id: 0,
        lower: model.lower.clone(),
        upper: model.upper.clone(),
        basis: None,
    });

    let mut open_ub = f64::NEG_INFINITY;
    while let Some(node) = heap.pop() {
        if node.bound <= incumbent_value + opts.tolerance {
            open_ub = node.bound;
            break;
        }
        if nodes >= opts.node_limit {
            open_ub = node.bound;
            break;
        }
        nodes += 1;
        let lp = model.relaxation(&node.lower, &node.upper);
        let mut sol = solve_with_hint(&lp, node.basis.as_ref(), &opts.solver);
        if sol.is_err() && node.basis.is_some() {
            sol = solve_with_hint(&lp, None, &opts.solver);
        }
        let sol = match sol {
            Ok(s) if s.status == LpStatus::Infeasible => continue,
            Ok(s) if s.status == LpStatus::Optimal && s.dual_bound.is_finite() => s,
            _ => {
                // Nothing better than the parent's bound is known here.
                lp_failures += 1;
                closed_ub = closed_ub.max(node.bound);
                continue;
            }
        };
        let bound = node.bound.min(sol.dual_bound + constant);
        if bound <= incumbent_value {
            continue;
        }
        let x = &sol.primal;
        let branch = choose_branch(model, x, &node.lower, &node.upper, opts);
        match heuristic.as_deref_mut() {
            Some(h) => {
                if let Some((v, p)) = h.improve(x) {
                    if v > incumbent_value {
                        incumbent_value = v;
                        incumbent = Some(p);
                    }
                }
            }
            None => {
                let v = sol.objective + constant;
                if branch.is_none() && v > incumbent_value {
                    incumbent_value = v;
                    incumbent = Some(x.clone());
                }
            }
        }
        let Some(branch) = branch else {
            closed_ub = closed_ub.max(bound);
            continue;
        };
        let children: [(Vec<f64>, Vec<f64>); 2] = match branch {
            Branch::Binary(b) => {
                let (mut l0, mut u0) = (node.lower.clone(), node.upper.clone());
                u0[b] = 0.0;
                l0[b] = 0.0;
                let (mut l1, mut u1) = (node.lower, node.upper);
                l1[b] = 1.0;
                u1[b] = 1.0;
                [(l0, u0), (l1, u1)]
            }
            Branch::Pair(a, b) => {
                let (la, mut ua) = (node.lower.clone(), node.upper.clone());
                ua[a] = 0.0;
                let (lb, mut ub) = (node.lower, node.upper);
                ub[b] = 0.0;
                [(la, ua), (lb, ub)]
            }
            Branch::Split(v, mid) => {
                let (ll, mut ul) = (node.lower.clone(), node.upper.clone());
                ul[v] = mid;
                let (mut lr, ur) = (node.lower, node.upper);
                lr[v] = mid;
                [(ll, ul), (lr, ur)]
            }
        };
        for (lower, upper) in children {
            // Fixing a pair member to zero can empty a box that spatial
            // branching moved away from zero.
            if lower.iter().zip(&upper).any(|(l, u)| l > u) {
                continue;
            }
            heap.push(Node {
                bound,
                id: next_id,
                lower,
                upper,
                basis: sol.basis.clone(),
            });
            next_id += 1;
        }
    }

    let upper_bound = incumbent_value.max(open_ub).max(closed_ub);
    let status = if upper_bound - incumbent_value <= opts.tolerance {
        BnbStatus::Complete
    } else {
        BnbStatus::Incomplete
    };
    BnbResult {
        status,
        upper_bound,
        incumbent_value,
        incumbent,
        nodes,
        lp_failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Expr;
    use rcert_lp::Relation;

    #[test]
    fn pure_lp_is_one_node() {
        let mut m = MipModel::new();
        let x = m.add_var(0.0, 3.0);
        let y = m.add_var(0.0, 3.0);
        m.add_row(vec![(x, 1.0), (y, 1.0)], Relation::LessEq, 4.0);
        let mut obj = Expr::var(x).scaled(2.0).plus_constant(0.5);
        obj.add_scaled(&Expr::var(y), 1.0);
        m.objective = obj;
        let r = branch_and_bound(&m, &BnbOptions::default(), None);
        assert_eq!(r.nodes, 1);
        assert_eq!(r.status, BnbStatus::Complete);
        assert!((r.upper_bound - 7.5).abs() < 1e-9);
        assert!(r.gap() < 1e-9);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        let w = [3.0, 4.0, 5.0, 2.0, 6.0];
        let v = [4.0, 5.0, 7.0, 2.5, 8.0];
        let cap = 10.0;
        let mut m = MipModel::new();
        let xs: Vec<usize> = (0..5).map(|_| m.add_binary()).collect();
        m.add_row(xs.iter().zip(&w).map(|(&x, &a)| (x, a)).collect(), Relation::LessEq, cap);
        let mut obj = Expr::constant(0.0);
        for (&x, &c) in xs.iter().zip(&v) {
            obj.add_scaled(&Expr::var(x), c);
        }
        m.objective = obj;
        let mut best = 0.0f64;
        for mask in 0..32u32 {
            let (mut tw, mut tv) = (0.0, 0.0);
            for i in 0..5 {
                if mask >> i & 1 == 1 {
                    tw += w[i];
                    tv += v[i];
                }
            }
            if tw <= cap {
                best = best.max(tv);
            }
        }
        let opts = BnbOptions {
            tolerance: 1e-9,
            ..BnbOptions::default()
        };
        let r = branch_and_bound(&m, &opts, None);
        assert_eq!(r.status, BnbStatus::Complete);
        assert!((r.upper_bound - best).abs() < 1e-7);
        assert!((r.incumbent_value - best).abs() < 1e-7);
    }

    #[test]
    fn complementarity_pair_is_enforced() {
        // Without the pair the optimum would be 3 at (1, 1).
        let mut m = MipModel::new();
        let x = m.add_var(0.0, 1.0);
        let y = m.add_var(0.0, 1.0);
        m.add_complementarity(x, y);
        let mut obj = Expr::var(x);
        obj.add_scaled(&Expr::var(y), 2.0);
        m.objective = obj;
        let opts = BnbOptions {
            tolerance: 1e-9,
            ..BnbOptions::default()
        };
        let r = branch_and_bound(&m, &opts, None);
        assert!((r.upper_bound - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spatial_branching_closes_the_envelope_gap() {
        // max x − x² on [0, 1] via w = x·y, y = x: optimum 1/4, root
        // relaxation 1/2.
        let mut m = MipModel::new();
        let x = m.add_var(0.0, 1.0);
        let y = m.add_var(0.0, 1.0);
        let w = m.add_var(0.0, 1.0);
        m.add_bilinear(w, x, y);
        m.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Equal, 0.0);
        let mut obj = Expr::var(x);
        obj.add_scaled(&Expr::var(w), -1.0);
        m.objective = obj;
        let opts = BnbOptions {
            tolerance: 1e-6,
            ..BnbOptions::default()
        };
        let r = branch_and_bound(&m, &opts, None);
        assert_eq!(r.status, BnbStatus::Complete);
        assert!(r.upper_bound >= 0.25 - 1e-9 && r.upper_bound < 0.25 + 2e-6, "{}", r.upper_bound);
        assert!(r.nodes > 1);
    }

    #[test]
    fn node_limit_keeps_a_valid_bound() {
        let mut m = MipModel::new();
        let xs: Vec<usize> = (0..12).map(|_| m.add_binary()).collect();
        m.add_row(xs.iter().map(|&x| (x, 2.0)).collect(), Relation::LessEq, 11.0);
        let mut obj = Expr::constant(0.0);
        for &x in &xs {
            obj.add_scaled(&Expr::var(x), 1.0);
        }
        m.objective = obj;
        let opts = BnbOptions {
            node_limit: 3,
            ..BnbOptions::default()
        };
        let r = branch_and_bound(&m, &opts, None);
        assert_eq!(r.status, BnbStatus::Incomplete);
        assert!(r.upper_bound >= 5.0);
        assert_eq!(r.nodes, 3);
    }
}
