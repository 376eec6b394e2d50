//! LP-based tightening of neuron bounds over the triangle relaxation.

use rcert_core::bounds::{InputBox, LayerBounds, NeuronBounds};
use rcert_core::{ibp_bounds, AuctionNet, DenseLayer};
use rcert_lp::{solve_with_hint, Basis, LinearProgram, LpStatus, Relation, Sense, SolverOptions};

use crate::model::{Expr, MipModel};

/// Outward padding applied to every LP-derived bound.
fn pad(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

/// Inputs as expressions: fixed coordinates become constants, free ones
/// become variables of `model`.
pub(crate) fn input_exprs(model: &mut MipModel, input: &InputBox) -> Vec<Expr> {
    input
        .lower
        .iter()
        .zip(&input.upper)
        .map(|(&lo, &hi)| {
            if lo == hi {
                Expr::constant(lo)
            } else {
                Expr::var(model.add_var(lo, hi))
            }
        })
        .collect()
}

pub(crate) fn affine_exprs(layer: &DenseLayer, inputs: &[Expr]) -> Vec<Expr> {
    (0..layer.outputs())
        .map(|o| {
            let mut e = Expr::constant(layer.biases[o]);
            for (w, x) in layer.row(o).iter().zip(inputs) {
                if *w != 0.0 {
                    e.add_scaled(x, *w);
                }
            }
            e
        })
        .collect()
}

struct Tightener {
    opts: SolverOptions,
    basis: Option<Basis>,
    fallbacks: usize,
}

impl Tightener {
    /// Sound range of `e` over the relaxation `lp`, intersected with the
    /// fallback interval `(lo, hi)`.
    fn range(&mut self, lp: &mut LinearProgram, e: &Expr, lo: f64, hi: f64) -> (f64, f64) {
        if e.is_constant() {
            return (e.constant, e.constant);
        }
        let n = lp.num_vars();
        let mut coef = e.coef.clone();
        coef.resize(n, 0.0);
        lp.objective = coef;
        let mut out = [lo, hi];
        for (slot, sense) in [(0, Sense::Minimize), (1, Sense::Maximize)] {
            lp.sense = sense;
            match solve_with_hint(lp, self.basis.as_ref(), &self.opts) {
                Ok(sol) if sol.status == LpStatus::Optimal => {
                    let b = sol.dual_bound + e.constant;
                    if b.is_finite() {
                        out[slot] = if slot == 0 {
                            out[slot].max(b - pad(b))
                        } else {
                            out[slot].min(b + pad(b))
                        };
                    }
                    self.basis = sol.basis;
                }
                _ => {
                    self.fallbacks += 1;
                    self.basis = None;
                }
            }
        }
        if out[0] > out[1] {
            // Rounding pushed the bounds past each other; keep the fallback.
            return (lo, hi);
        }
        (out[0], out[1])
    }
}

/// Adds the triangle relaxation of `relu(pre)` to `model` and returns the
/// post-activation expression.
fn relu_relaxation(model: &mut MipModel, pre: &Expr, l: f64, u: f64) -> Expr {
    if u <= 0.0 {
        return Expr::constant(0.0);
    }
    if l >= 0.0 {
        return pre.clone();
    }
    let h = model.add_var(0.0, u);
    let hv = Expr::var(h);
    // h ≥ pre
    let mut e = hv.clone();
    e.add_scaled(pre, -1.0);
    model.add_expr_row(&e, Relation::GreaterEq);
    // h ≤ u (pre − l) / (u − l)
    let s = u / (u - l);
    let mut e = hv;
    e.add_scaled(pre, -s);
    e.constant += s * l;
    model.add_expr_row(&e, Relation::LessEq);
    Expr::var(h)
}

fn to_lp(model: &MipModel) -> LinearProgram {
    model.relaxation(&model.lower, &model.upper)
}

/// Neuron bounds tightened layer by layer: each pre-activation is minimized
/// and maximized over the triangle relaxation of all earlier layers, then
/// intersected with its interval-propagation bound.
pub fn planet_bounds(net: &AuctionNet, input: &InputBox) -> NeuronBounds {
    let ibp = ibp_bounds(net, input);
    let mut model = MipModel::new();
    let mut post = input_exprs(&mut model, input);
    let mut t = Tightener {
        opts: SolverOptions::default(),
        basis: None,
        fallbacks: 0,
    };
    let mut trunk = Vec::with_capacity(net.trunk.len());
    for (l, layer) in net.trunk.iter().enumerate() {
        let pre = affine_exprs(layer, &post);
        let fallback = &ibp.trunk[l];
        let bounds = if l == 0 {
            // Exact over the input box.
            let (lower, upper) = pre
                .iter()
                .enumerate()
                .map(|(o, e)| {
                    let (lo, hi) = e.interval(&model.lower, &model.upper);
                    (lo.max(fallback.lower[o]), hi.min(fallback.upper[o]))
                })
                .unzip();
            LayerBounds { lower, upper }
        } else {
            tighten_all(&mut t, &model, &pre, fallback)
        };
        post = pre
            .iter()
            .enumerate()
            .map(|(o, e)| relu_relaxation(&mut model, e, bounds.lower[o], bounds.upper[o]))
            .collect();
        trunk.push(bounds);
    }
    let alloc = affine_exprs(&net.allocation, &post);
    let allocation = tighten_all(&mut t, &model, &alloc, &ibp.allocation);
    let pay = affine_exprs(&net.payment, &post);
    let payment = tighten_all(&mut t, &model, &pay, &ibp.payment);
    NeuronBounds {
        trunk,
        allocation,
        payment,
        fallbacks: t.fallbacks,
    }
}

fn tighten_all(t: &mut Tightener, model: &MipModel, exprs: &[Expr], fallback: &LayerBounds) -> LayerBounds {
    let mut lp = to_lp(model);
    t.basis = None;
    let (lower, upper) = exprs
        .iter()
        .enumerate()
        .map(|(o, e)| t.range(&mut lp, e, fallback.lower[o], fallback.upper[o]))
        .unzip();
    LayerBounds { lower, upper }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rcert_core::{AuctionConfig, IrMode};

    #[test]
    fn single_layer_is_exact() {
        let c = AuctionConfig::new(1, 2, vec![5], IrMode::Fractional);
        let net = AuctionNet::new(&c, 3).unwrap();
        let bx = InputBox::unit(2);
        let b = planet_bounds(&net, &bx);
        // The first layer's range over a box is attained at a corner.
        for o in 0..5 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for corner in [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
                let v = net.trace(&corner).trunk_pre[0][o];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!((b.trunk[0].lower[o] - lo).abs() < 1e-12);
            assert!((b.trunk[0].upper[o] - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn tighter_than_ibp_and_sound() {
        let c = AuctionConfig::new(2, 2, vec![8, 6], IrMode::PenaltyFree);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..3 {
            let net = AuctionNet::new(&c, seed).unwrap();
            let bx = InputBox::unit(4);
            let planet = planet_bounds(&net, &bx);
            let ibp = ibp_bounds(&net, &bx);
            assert_eq!(planet.fallbacks, 0);
            assert!(planet.is_subset_of(&ibp, 0.0));
            for _ in 0..2000 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                assert!(planet.contains_trace(&net.trace(&x), 0.0));
            }
        }
    }

    #[test]
    fn stable_neurons_unchanged() {
        let c = AuctionConfig::new(1, 2, vec![3, 2], IrMode::Fractional);
        let mut net = AuctionNet::new(&c, 1).unwrap();
        // Large positive biases keep the first layer active over the box.
        net.trunk[0].biases = vec![10.0; 3];
        let bx = InputBox::unit(2);
        let planet = planet_bounds(&net, &bx);
        let ibp = ibp_bounds(&net, &bx);
        assert!(planet.is_subset_of(&ibp, 0.0));
        assert!(ibp.trunk[0].is_subset_of(&planet.trunk[0], 1e-12));
    }
}
