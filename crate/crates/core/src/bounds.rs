//! Interval bounds on pre-activations over an axis-aligned input box, and
//! the ReLU-stability regularizer built on them.

use crate::net::{AuctionNet, BidProfile, DenseLayer, LayerGrad, NetGradient};

/// A neuron whose interval clears zero by this margin on one side is stable.
pub const STABILITY_EPS: f64 = 1e-9;

pub fn is_stable(lower: f64, upper: f64) -> bool {
    lower >= STABILITY_EPS || upper <= -STABILITY_EPS
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBox {
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    /// Other agents fixed at `profile`, `agent`'s row free over `[0, 1]`.
    pub fn misreports(profile: &BidProfile, agent: usize) -> Self {
        let mut b = Self::point(&profile.values);
        let k = profile.n_items;
        for j in 0..k {
            b.lower[agent * k + j] = 0.0;
            b.upper[agent * k + j] = 1.0;
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LayerBounds {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, values: &[f64], tol: f64) -> bool {
        values
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l - tol <= *v && *v <= *u + tol)
    }

    pub fn is_subset_of(&self, other: &LayerBounds, tol: f64) -> bool {
        (0..self.len()).all(|i| {
            self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol
        })
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn unstable(&self) -> usize {
        (0..self.len())
            .filter(|&i| !is_stable(self.lower[i], self.upper[i]))
            .count()
    }
}

/// Pre-activation intervals for every trunk neuron and both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub trunk: Vec<LayerBounds>,
    /// Allocation scores, `rows × k`.
    pub allocation: LayerBounds,
    /// Payment head pre-activations.
    pub payment: LayerBounds,
    /// Neurons where tightening failed and the seed interval was kept.
    pub fallbacks: usize,
}

impl NeuronBounds {
    pub fn layers(&self) -> impl Iterator<Item = &LayerBounds> {
        self.trunk
            .iter()
            .chain(std::iter::once(&self.allocation))
            .chain(std::iter::once(&self.payment))
    }

    pub fn unstable_relus(&self) -> usize {
        self.trunk.iter().map(LayerBounds::unstable).sum()
    }

    /// True if the trace of a concrete input lies within every interval.
    pub fn contains_trace(&self, trace: &crate::net::Trace, tol: f64) -> bool {
        self.trunk
            .iter()
            .zip(&trace.trunk_pre)
            .all(|(b, v)| b.contains(v, tol))
            && self.allocation.contains(&trace.scores, tol)
            && self.payment.contains(&trace.pay_pre, tol)
    }

    pub fn is_subset_of(&self, other: &NeuronBounds, tol: f64) -> bool {
        self.layers()
            .zip(other.layers())
            .all(|(a, b)| a.is_subset_of(b, tol))
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(LayerBounds::is_finite)
    }
}

/// Interval image of `[lo, hi]` under an affine layer, in center/radius form.
pub fn affine_interval(layer: &DenseLayer, lo: &[f64], hi: &[f64]) -> LayerBounds {
    let center: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let radius: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).collect();
    let mut lower = Vec::with_capacity(layer.outputs());
    let mut upper = Vec::with_capacity(layer.outputs());
    for o in 0..layer.outputs() {
        let row = layer.row(o);
        let c: f64 = layer.biases[o] + row.iter().zip(&center).map(|(w, v)| w * v).sum::<f64>();
        let r: f64 = row.iter().zip(&radius).map(|(w, v)| w.abs() * v).sum();
        lower.push(c - r);
        upper.push(c + r);
    }
    LayerBounds { lower, upper }
}

pub(crate) fn relu_interval(b: &LayerBounds) -> (Vec<f64>, Vec<f64>) {
    (
        b.lower.iter().map(|v| v.max(0.0)).collect(),
        b.upper.iter().map(|v| v.max(0.0)).collect(),
    )
}

/// Interval bound propagation through the trunk and both heads.
pub fn ibp_bounds(net: &AuctionNet, input: &InputBox) -> NeuronBounds {
    let mut lo = input.lower.clone();
    let mut hi = input.upper.clone();
    let mut trunk = Vec::with_capacity(net.trunk.len());
    for layer in &net.trunk {
        let b = affine_interval(layer, &lo, &hi);
        (lo, hi) = relu_interval(&b);
        trunk.push(b);
    }
    NeuronBounds {
        trunk,
        allocation: affine_interval(&net.allocation, &lo, &hi),
        payment: affine_interval(&net.payment, &lo, &hi),
        fallbacks: 0,
    }
}

fn neuron_penalty(l: f64, u: f64) -> f64 {
    -(1.0 + l * u).tanh()
}

/// `Σ −tanh(1 + l·u)` over trunk ReLU pre-activation intervals.
pub fn stability_penalty(bounds: &NeuronBounds) -> f64 {
    bounds
        .trunk
        .iter()
        .flat_map(|b| b.lower.iter().zip(&b.upper))
        .map(|(&l, &u)| neuron_penalty(l, u))
        .sum()
}

/// Evaluates the stability penalty of the IBP bounds over `input` and adds
/// `scale ×` its parameter gradient into `grad`. Returns the penalty.
pub fn stability_penalty_grad(
    net: &AuctionNet,
    input: &InputBox,
    scale: f64,
    grad: &mut NetGradient,
) -> f64 {
    let depth = net.trunk.len();
    let mut centers = Vec::with_capacity(depth);
    let mut radii = Vec::with_capacity(depth);
    let mut pre = Vec::with_capacity(depth);
    let mut lo = input.lower.clone();
    let mut hi = input.upper.clone();
    for layer in &net.trunk {
        centers.push(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect::<Vec<_>>());
        radii.push(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect::<Vec<_>>());
        let b = affine_interval(layer, &lo, &hi);
        (lo, hi) = relu_interval(&b);
        pre.push(b);
    }

    let mut value = 0.0;
    // Adjoints of the post-activation interval flowing back from above.
    let mut d_post_lo: Vec<f64> = vec![0.0; net.trunk[depth - 1].outputs()];
    let mut d_post_hi = d_post_lo.clone();
    for l in (0..depth).rev() {
        let layer = &net.trunk[l];
        let b = &pre[l];
        let width = layer.outputs();
        let mut d_c = vec![0.0; width];
        let mut d_r = vec![0.0; width];
        for o in 0..width {
            let (lw, up) = (b.lower[o], b.upper[o]);
            value += neuron_penalty(lw, up);
            let sech2 = 1.0 - (1.0 + lw * up).tanh().powi(2);
            let mut d_l = -sech2 * up * scale;
            let mut d_u = -sech2 * lw * scale;
            if lw > 0.0 {
                d_l += d_post_lo[o];
            }
            if up > 0.0 {
                d_u += d_post_hi[o];
            }
            d_c[o] = d_l + d_u;
            d_r[o] = d_u - d_l;
        }
        let (c, r) = (&centers[l], &radii[l]);
        let lg: &mut LayerGrad = &mut grad.trunk[l];
        let n_in = layer.inputs;
        for o in 0..width {
            lg.biases[o] += d_c[o];
            for i in 0..n_in {
                let w = layer.weights[o * n_in + i];
                lg.weights[o * n_in + i] += d_c[o] * c[i] + d_r[o] * r[i] * w.signum();
            }
        }
        if l > 0 {
            let mut dc_in = vec![0.0; n_in];
            let mut dr_in = vec![0.0; n_in];
            for o in 0..width {
                for i in 0..n_in {
                    let w = layer.weights[o * n_in + i];
                    dc_in[i] += w * d_c[o];
                    dr_in[i] += w.abs() * d_r[o];
                }
            }
            d_post_lo = dc_in.iter().zip(&dr_in).map(|(c, r)| 0.5 * (c - r)).collect();
            d_post_hi = dc_in.iter().zip(&dr_in).map(|(c, r)| 0.5 * (c + r)).collect();
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, AuctionConfig, IrMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_on_unit_interval() {
        let layer = DenseLayer {
            inputs: 1,
            weights: vec![1.0],
            biases: vec![0.0],
            activation: Activation::Identity,
        };
        let b = affine_interval(&layer, &[0.0], &[1.0]);
        assert_eq!((b.lower[0], b.upper[0]), (0.0, 1.0));
    }

    #[test]
    fn difference_of_inputs() {
        let layer = DenseLayer {
            inputs: 2,
            weights: vec![1.0, -1.0],
            biases: vec![0.5],
            activation: Activation::Relu,
        };
        let b = affine_interval(&layer, &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!((b.lower[0], b.upper[0]), (-0.5, 1.5));
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(neuron_penalty(-1.0, 1.0), 0.0);
        assert!((neuron_penalty(2.0, 2.0) + 5f64.tanh()).abs() < 1e-15);
        assert!(neuron_penalty(2.0, 2.0) < -0.9999);
    }

    #[test]
    fn monte_carlo_soundness() {
        let c = AuctionConfig::new(2, 2, vec![16, 8], IrMode::Fractional);
        let net = AuctionNet::new(&c, 21).unwrap();
        let bx = InputBox::unit(4);
        let b = ibp_bounds(&net, &bx);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            assert!(b.contains_trace(&net.trace(&x), 0.0));
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let c = AuctionConfig::new(2, 2, vec![6, 5], IrMode::Fractional);
        let net = AuctionNet::new(&c, 8).unwrap();
        let bx = InputBox::misreports(
            &BidProfile::new(2, 2, vec![0.2, 0.7, 0.4, 0.9]).unwrap(),
            1,
        );
        let mut g = NetGradient::zeros_like(&net);
        let v = stability_penalty_grad(&net, &bx, 1.0, &mut g);
        assert!((v - stability_penalty(&ibp_bounds(&net, &bx))).abs() < 1e-12);
        let flat = net.flat_params();
        let analytic = g.flat();
        let h = 1e-6;
        // Only trunk parameters influence the penalty.
        let trunk_len: usize = net.trunk.iter().map(|l| l.weights.len() + l.biases.len()).sum();
        for p in 0..trunk_len {
            let mut plus = net.clone();
            let mut f = flat.clone();
            f[p] += h;
            plus.set_flat_params(&f);
            let mut minus = net.clone();
            f[p] -= 2.0 * h;
            minus.set_flat_params(&f);
            let fd = (stability_penalty(&ibp_bounds(&plus, &bx))
                - stability_penalty(&ibp_bounds(&minus, &bx)))
                / (2.0 * h);
            let err = (fd - analytic[p]).abs();
            assert!(err <= 1e-4 * fd.abs().max(analytic[p].abs()) + 1e-8, "param {p}: {fd} vs {}", analytic[p]);
        }
        assert!(analytic[trunk_len..].iter().all(|&v| v == 0.0));
    }
}
