//! Exact MIP encoding of one agent's utility over its misreport box.
//!
//! Variables are the agent's bids plus one variable per nonlinear quantity.
//! Affine quantities are substituted as expressions, so layers whose ReLUs
//! are all stable add no variables at all.

use rcert_core::bounds::{is_stable, NeuronBounds};
use rcert_core::{hard_sigmoid, AuctionNet, BidProfile, IrMode};
use rcert_lp::Relation;

use crate::model::{Expr, MipModel};
use crate::planet::affine_exprs;
use crate::CertifyError;

/// How sparsemax complementarity `z ⊥ μ` is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplementarityMode {
    /// One indicator binary per pair with big-M from the bounds.
    #[default]
    Indicator,
    /// Kept as a pair and resolved by branching.
    Branching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub elide_stable: bool,
    pub complementarity: ComplementarityMode,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            elide_stable: true,
            complementarity: ComplementarityMode::Indicator,
        }
    }
}

/// The network condition decided by a binary variable or complementarity
/// pair. A binary at 1 (or the pair's first member free) means the
/// condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switch {
    /// Trunk pre-activation is positive.
    Relu { layer: usize, neuron: usize },
    /// Allocation of `row` in item column `item` is positive.
    Support { item: usize, row: usize },
    /// `q/4 + 1/2 > piece` for the agent's payment pre-activation `q`.
    HardSigmoid { piece: usize },
    /// Clipped payment: `q > 0`.
    ClipLow,
    /// Clipped payment: `max(q, 0) > Σ_j a_ij b_ij`.
    ClipHigh,
}

/// Encoded model plus the map back to network quantities.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub model: MipModel,
    pub agent: usize,
    /// Variable of each of the agent's bids.
    pub bids: Vec<usize>,
    pub binaries: Vec<(usize, Switch)>,
    /// Complementarity pairs (by index into `model.complementarity`) in
    /// branching mode.
    pub pairs: Vec<(usize, Switch)>,
    /// The agent's allocation of each item.
    pub allocation: Vec<Expr>,
    pub payment: Expr,
    /// Bilinear factors other than bids, for consistency tightening.
    pub factors: Vec<usize>,
    /// Trunk ReLUs encoded with a binary.
    pub unstable_relus: usize,
}

struct Encoder<'a> {
    m: MipModel,
    opts: EncodeOptions,
    binaries: Vec<(usize, Switch)>,
    pairs: Vec<(usize, Switch)>,
    bounds: &'a NeuronBounds,
}

impl Encoder<'_> {
    /// `relu(pre)` with pre-activation bounds `[l, u]`.
    fn relu(&mut self, pre: &Expr, l: f64, u: f64, switch: Switch) -> Expr {
        if self.opts.elide_stable && is_stable(l, u) {
            return if l > 0.0 { pre.clone() } else { Expr::constant(0.0) };
        }
        let h = self.m.add_var(0.0, u.max(0.0));
        let d = self.m.add_binary();
        self.binaries.push((d, switch));
        let hv = Expr::var(h);
        // h ≥ pre
        let mut e = hv.clone();
        e.add_scaled(pre, -1.0);
        self.m.add_expr_row(&e, Relation::GreaterEq);
        // h ≤ pre − l(1 − δ)
        let mut e = hv.clone();
        e.add_scaled(pre, -1.0);
        e.add_scaled(&Expr::var(d), -l);
        e.constant += l;
        self.m.add_expr_row(&e, Relation::LessEq);
        // h ≤ u δ
        let mut e = hv;
        e.add_scaled(&Expr::var(d), -u.max(0.0));
        self.m.add_expr_row(&e, Relation::LessEq);
        Expr::var(h)
    }

    /// Equality row `var = e`; returns `var`.
    fn define(&mut self, e: &Expr, lo: f64, hi: f64) -> usize {
        let v = self.m.add_var(lo, hi);
        let mut row = Expr::var(v);
        row.add_scaled(e, -1.0);
        self.m.add_expr_row(&row, Relation::Equal);
        v
    }

    /// Sparsemax of one item column through its optimality conditions:
    /// `z_r − s_r + λ − μ_r = 0`, `Σ z_r = 1`, `z ⊥ μ`. The multiplier of
    /// `z_r ≤ 1` is zero at the canonical solution and is left out.
    fn sparsemax(&mut self, item: usize, scores: &[Expr], lo: &[f64], hi: &[f64]) -> Vec<Expr> {
        let rows = scores.len();
        let max_lo = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_hi = hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lam_lo, lam_hi) = (max_lo - 1.0, max_hi - 1.0 / rows as f64);
        let lam = self.m.add_var(lam_lo, lam_hi);
        let mut total = Expr::constant(-1.0);
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let z_hi = (hi[r] - lam_lo).min(1.0);
            let z_lo = (lo[r] - lam_hi).max(0.0);
            let mu_hi = lam_hi - lo[r];
            // s_r − λ
            let mut gap = scores[r].clone();
            gap.add_scaled(&Expr::var(lam), -1.0);
            if z_hi <= 0.0 {
                // Never in the support: λ ≥ s_r.
                self.m.add_expr_row(&gap, Relation::LessEq);
                out.push(Expr::constant(0.0));
                continue;
            }
            if mu_hi <= 0.0 || z_lo > 0.0 {
                // Always in the support: z = s_r − λ ≥ 0.
                let z = self.define(&gap, z_lo, z_hi);
                total.add_scaled(&Expr::var(z), 1.0);
                out.push(Expr::var(z));
                continue;
            }
            let z = self.m.add_var(0.0, z_hi);
            let mu = self.m.add_var(0.0, mu_hi);
            // z − μ = s_r − λ
            let mut st = Expr::var(z);
            st.add_scaled(&Expr::var(mu), -1.0);
            st.add_scaled(&gap, -1.0);
            self.m.add_expr_row(&st, Relation::Equal);
            let switch = Switch::Support { item, row: r };
            match self.opts.complementarity {
                ComplementarityMode::Indicator => {
                    let sigma = self.m.add_binary();
                    self.binaries.push((sigma, switch));
                    self.m
                        .add_row(vec![(z, 1.0), (sigma, -z_hi)], Relation::LessEq, 0.0);
                    self.m
                        .add_row(vec![(mu, 1.0), (sigma, mu_hi)], Relation::LessEq, mu_hi);
                }
                ComplementarityMode::Branching => {
                    self.pairs.push((self.m.complementarity.len(), switch));
                    self.m.add_complementarity(z, mu);
                }
            }
            total.add_scaled(&Expr::var(z), 1.0);
            out.push(Expr::var(z));
        }
        self.m.add_expr_row(&total, Relation::Equal);
        out
    }

    /// `w = a · b` for a nonnegative allocation expression and a bid.
    fn product(&mut self, a: &Expr, bid: usize, factors: &mut Vec<usize>) -> Expr {
        if a.is_constant() && a.constant == 0.0 {
            return Expr::constant(0.0);
        }
        let x = match single_var(a) {
            Some(v) => v,
            None => {
                let (lo, hi) = a.interval(&self.m.lower, &self.m.upper);
                self.define(a, lo.max(0.0), hi.min(1.0))
            }
        };
        factors.push(x);
        let (lo, hi) = product_range(
            (self.m.lower[x], self.m.upper[x]),
            (self.m.lower[bid], self.m.upper[bid]),
        );
        let w = self.m.add_var(lo, hi);
        self.m.add_bilinear(w, x, bid);
        Expr::var(w)
    }

    fn bounds_of(&self, v: usize) -> (f64, f64) {
        (self.m.lower[v], self.m.upper[v])
    }

    fn unbounded_check(&self) -> Result<(), CertifyError> {
        if self.bounds.is_finite() {
            Ok(())
        } else {
            Err(CertifyError::UnboundedNeuron)
        }
    }
}

fn single_var(e: &Expr) -> Option<usize> {
    if e.constant != 0.0 {
        return None;
    }
    let mut found = None;
    for (v, &c) in e.coef.iter().enumerate() {
        if c != 0.0 {
            if c != 1.0 || found.is_some() {
                return None;
            }
            found = Some(v);
        }
    }
    found
}

fn product_range(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Encodes `max u_agent(b, v_-agent)` over the agent's bid row in `[0, 1]^k`
/// with the agent's true valuation row from `profile`. `bounds` must be
/// sound for that box.
pub fn encode(
    net: &AuctionNet,
    profile: &BidProfile,
    agent: usize,
    bounds: &NeuronBounds,
    opts: EncodeOptions,
) -> Result<Encoding, CertifyError> {
    net.check_bids(profile)?;
    if !net.is_piecewise_linear() {
        return Err(CertifyError::NotPiecewiseLinear);
    }
    let c = &net.config;
    let (n, k, rows) = (c.n_agents, c.n_items, c.alloc_rows());
    if agent >= n {
        return Err(CertifyError::Agent(agent));
    }
    let mut enc = Encoder {
        m: MipModel::new(),
        opts,
        binaries: Vec::new(),
        pairs: Vec::new(),
        bounds,
    };
    enc.unbounded_check()?;

    let bids: Vec<usize> = (0..k).map(|_| enc.m.add_var(0.0, 1.0)).collect();
    let mut post: Vec<Expr> = (0..n * k)
        .map(|idx| {
            if idx / k == agent {
                Expr::var(bids[idx % k])
            } else {
                Expr::constant(profile.values[idx])
            }
        })
        .collect();

    let mut unstable_relus = 0;
    for (l, layer) in net.trunk.iter().enumerate() {
        let pre = affine_exprs(layer, &post);
        let b = &bounds.trunk[l];
        post = pre
            .iter()
            .enumerate()
            .map(|(o, e)| {
                let before = enc.binaries.len();
                let out = enc.relu(e, b.lower[o], b.upper[o], Switch::Relu { layer: l, neuron: o });
                unstable_relus += enc.binaries.len() - before;
                out
            })
            .collect();
    }

    let scores = affine_exprs(&net.allocation, &post);
    let mut allocation = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<Expr> = (0..rows).map(|r| scores[r * k + j].clone()).collect();
        let lo: Vec<f64> = (0..rows).map(|r| bounds.allocation.lower[r * k + j]).collect();
        let hi: Vec<f64> = (0..rows).map(|r| bounds.allocation.upper[r * k + j]).collect();
        let z = enc.sparsemax(j, &col, &lo, &hi);
        allocation.push(z[agent].clone());
    }

    let q = affine_exprs(&net.payment, &post).swap_remove(agent);
    let (q_lo, q_hi) = (bounds.payment.lower[agent], bounds.payment.upper[agent]);
    let mut factors = Vec::new();
    let mut value_expr = || -> Expr {
        let mut y = Expr::constant(0.0);
        for j in 0..k {
            let w = enc.product(&allocation[j], bids[j], &mut factors);
            y.add_scaled(&w, 1.0);
        }
        y
    };
    let payment = match (c.ir_mode, net.clip_payments) {
        (IrMode::Fractional, _) => {
            let y_expr = value_expr();
            let g = q.scaled(0.25).plus_constant(0.5);
            let (g_lo, g_hi) = (0.25 * q_lo + 0.5, 0.25 * q_hi + 0.5);
            let r0 = enc.relu(&g, g_lo, g_hi, Switch::HardSigmoid { piece: 0 });
            let r1 = enc.relu(&g.clone().plus_constant(-1.0), g_lo - 1.0, g_hi - 1.0, Switch::HardSigmoid { piece: 1 });
            let mut frac = r0;
            frac.add_scaled(&r1, -1.0);
            let frac_var = enc.define(&frac, hard_sigmoid(q_lo), hard_sigmoid(q_hi));
            let (y_lo, y_hi) = y_expr.interval(&enc.m.lower, &enc.m.upper);
            let y = enc.define(&y_expr, y_lo.max(0.0), y_hi);
            factors.push(frac_var);
            factors.push(y);
            let (p_lo, p_hi) = product_range(enc.bounds_of(frac_var), enc.bounds_of(y));
            let p = enc.m.add_var(p_lo, p_hi);
            enc.m.add_bilinear(p, frac_var, y);
            Expr::var(p)
        }
        (IrMode::PenaltyFree, true) => {
            let y = value_expr();
            let (y_lo, y_hi) = y.interval(&enc.m.lower, &enc.m.upper);
            let e = enc.relu(&q, q_lo, q_hi, Switch::ClipLow);
            let (e_lo, e_hi) = (q_lo.max(0.0), q_hi.max(0.0));
            let mut excess = e.clone();
            excess.add_scaled(&y, -1.0);
            let over = enc.relu(&excess, e_lo - y_hi, e_hi - y_lo, Switch::ClipHigh);
            let mut p = e;
            p.add_scaled(&over, -1.0);
            p
        }
        (IrMode::PenaltyFree, false) => q,
    };

    let mut objective = payment.scaled(-1.0);
    for (j, a) in allocation.iter().enumerate() {
        objective.add_scaled(a, profile.get(agent, j));
    }
    enc.m.objective = objective;
    enc.m.validate().map_err(CertifyError::Encoding)?;
    Ok(Encoding {
        model: enc.m,
        agent,
        bids,
        binaries: enc.binaries,
        pairs: enc.pairs,
        allocation,
        payment,
        factors,
        unstable_relus,
    })
}

impl Switch {
    /// Whether the condition holds at the network's own evaluation.
    pub fn holds(&self, net: &AuctionNet, t: &rcert_core::Trace, agent: usize) -> bool {
        let k = net.config.n_items;
        match *self {
            Switch::Relu { layer, neuron } => t.trunk_pre[layer][neuron] > 0.0,
            Switch::Support { item, row } => t.alloc_full[row * k + item] > 0.0,
            Switch::HardSigmoid { piece } => 0.25 * t.pay_pre[agent] + 0.5 > piece as f64,
            Switch::ClipLow => t.pay_pre[agent] > 0.0,
            Switch::ClipHigh => t.pay_pre[agent].max(0.0) > t.alloc_value[agent],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcert_core::activation::sparsemax_threshold;
    use rcert_core::{sparsemax, AuctionConfig, InputBox};

    use crate::planet::planet_bounds;

    fn column_encoder(bounds: &NeuronBounds, mode: ComplementarityMode) -> Encoder<'_> {
        Encoder {
            m: MipModel::new(),
            opts: EncodeOptions {
                elide_stable: true,
                complementarity: mode,
            },
            binaries: Vec::new(),
            pairs: Vec::new(),
            bounds,
        }
    }

    fn no_bounds() -> NeuronBounds {
        let empty = || rcert_core::LayerBounds {
            lower: vec![],
            upper: vec![],
        };
        NeuronBounds {
            trunk: vec![],
            allocation: empty(),
            payment: empty(),
            fallbacks: 0,
        }
    }

    #[test]
    fn sparsemax_kkt_reconstruction() {
        let s = [1.5, 0.3];
        let z = sparsemax(&s);
        let (tau, _) = sparsemax_threshold(&s);
        assert_eq!(z, vec![1.0, 0.0]);
        // Closed-form multipliers: λ = τ, μ_r = max(τ − s_r, 0).
        let mu: Vec<f64> = s.iter().map(|x| (tau - x).max(0.0)).collect();
        let nb = no_bounds();
        for mode in [ComplementarityMode::Indicator, ComplementarityMode::Branching] {
            let mut enc = column_encoder(&nb, mode);
            let s0 = enc.m.add_var(0.0, 2.0);
            let s1 = enc.m.add_var(-1.0, 1.0);
            let out = enc.sparsemax(0, &[Expr::var(s0), Expr::var(s1)], &[0.0, -1.0], &[2.0, 1.0]);
            // Creation order: λ, then (z, μ[, σ]) per row.
            let lam = 2;
            let per_row = if mode == ComplementarityMode::Indicator { 3 } else { 2 };
            let row_vars = |r: usize| lam + 1 + r * per_row;
            assert_eq!(enc.m.num_vars(), lam + 1 + 2 * per_row);
            let mut x = vec![0.0; enc.m.num_vars()];
            x[s0] = s[0];
            x[s1] = s[1];
            x[lam] = tau;
            for r in 0..2 {
                let v = row_vars(r);
                x[v] = z[r];
                x[v + 1] = mu[r];
                if per_row == 3 {
                    x[v + 2] = if z[r] > 0.0 { 1.0 } else { 0.0 };
                }
                assert_eq!(out[r].eval(&x), z[r]);
            }
            let lp = enc.m.relaxation(&enc.m.lower, &enc.m.upper);
            assert!(lp.max_violation(&x) < 1e-12, "{}", lp.max_violation(&x));
            for &(a, b) in &enc.m.complementarity {
                assert_eq!(x[a] * x[b], 0.0);
            }
        }
    }

    #[test]
    fn pinned_scores_fix_the_support() {
        let nb = no_bounds();
        let mut enc = column_encoder(&nb, ComplementarityMode::Indicator);
        let s = [Expr::constant(1.5), Expr::constant(0.3)];
        let out = enc.sparsemax(0, &s, &[1.5, 0.3], &[1.5, 0.3]);
        assert!(enc.binaries.is_empty());
        assert_eq!(out[1], Expr::constant(0.0));
    }

    #[test]
    fn refuses_smooth_heads_and_bad_agent() {
        let c = AuctionConfig::new(1, 2, vec![3], IrMode::Fractional);
        let t = AuctionNet::teacher(&c, 0).unwrap();
        let v = BidProfile::new(1, 2, vec![0.5, 0.5]).unwrap();
        let b = planet_bounds(&t, &InputBox::misreports(&v, 0));
        assert!(matches!(
            encode(&t, &v, 0, &b, EncodeOptions::default()),
            Err(CertifyError::NotPiecewiseLinear)
        ));
        let net = AuctionNet::new(&c, 0).unwrap();
        assert!(matches!(
            encode(&net, &v, 1, &b, EncodeOptions::default()),
            Err(CertifyError::Agent(1))
        ));
        let mut inf = b.clone();
        inf.trunk[0].upper[0] = f64::INFINITY;
        assert!(matches!(
            encode(&net, &v, 0, &inf, EncodeOptions::default()),
            Err(CertifyError::UnboundedNeuron)
        ));
    }
}
