//! The auction network: a shared ReLU trunk feeding an allocation head
//! (column-wise sparsemax over agents plus an optional dummy "unallocated"
//! row) and a payment head.
//!
//! Bids are flattened row-major, `x[i * k + j] = b_ij`. Allocation scores
//! are laid out the same way over `rows × k`, with the dummy row last.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{
    hard_sigmoid, hard_sigmoid_slope, sigmoid, softmax, sparsemax, sparsemax_support,
    sparsemax_vjp,
};
use crate::error::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrMode {
    /// Payment = hard_sigmoid(head) · value of the allocation at the bids.
    Fractional,
    /// Payment is emitted directly; IR is encouraged by a training penalty.
    PenaltyFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
    Sparsemax,
    HardSigmoid,
    /// Teacher networks only; not representable in the certifier.
    Softmax,
    /// Teacher networks only; not representable in the certifier.
    Sigmoid,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sparsemax => "sparsemax",
            Activation::HardSigmoid => "hard_sigmoid",
            Activation::Softmax => "softmax",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            "sparsemax" => Activation::Sparsemax,
            "hard_sigmoid" => Activation::HardSigmoid,
            "softmax" => Activation::Softmax,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub n_agents: usize,
    pub n_items: usize,
    pub trunk_widths: Vec<usize>,
    pub ir_mode: IrMode,
    #[serde(default = "default_true")]
    pub allow_dummy_agent: bool,
}

impl AuctionConfig {
    pub fn new(n_agents: usize, n_items: usize, trunk_widths: Vec<usize>, ir_mode: IrMode) -> Self {
        Self {
            n_agents,
            n_items,
            trunk_widths,
            ir_mode,
            allow_dummy_agent: true,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.n_agents == 0 || self.n_items == 0 {
            return Err(NetError::Config("need at least one agent and one item".into()));
        }
        if self.trunk_widths.is_empty() || self.trunk_widths.contains(&0) {
            return Err(NetError::Config(
                "trunk_widths must be a nonempty list of positive widths".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.n_agents * self.n_items
    }

    /// Rows of the allocation score grid: agents, then the dummy row.
    pub fn alloc_rows(&self) -> usize {
        self.n_agents + usize::from(self.allow_dummy_agent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    /// Uniform Glorot initialization, zero biases.
    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            biases: vec![0.0; outputs],
            activation,
        }
    }

    pub fn outputs(&self) -> usize {
        self.biases.len()
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.inputs + i]
    }

    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.biases
            .iter()
            .enumerate()
            .map(|(o, &b)| b + self.row(o).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    fn validate(&self, what: &str) -> Result<(), NetError> {
        if self.weights.len() != self.inputs * self.outputs() {
            return Err(NetError::Config(format!(
                "{what}: {} weights for a {}x{} layer",
                self.weights.len(),
                self.outputs(),
                self.inputs
            )));
        }
        if self
            .weights
            .iter()
            .chain(&self.biases)
            .any(|v| !v.is_finite())
        {
            return Err(NetError::Config(format!("{what}: non-finite parameter")));
        }
        Ok(())
    }
}

/// A valuation or bid profile: `n_agents × n_items`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    pub n_agents: usize,
    pub n_items: usize,
    pub values: Vec<f64>,
}

impl BidProfile {
    pub fn new(n_agents: usize, n_items: usize, values: Vec<f64>) -> Result<Self, NetError> {
        if values.len() != n_agents * n_items {
            return Err(NetError::Shape {
                expected: n_agents * n_items,
                found: values.len(),
            });
        }
        Ok(Self {
            n_agents,
            n_items,
            values,
        })
    }

    pub fn zeros(n_agents: usize, n_items: usize) -> Self {
        Self {
            n_agents,
            n_items,
            values: vec![0.0; n_agents * n_items],
        }
    }

    pub fn get(&self, agent: usize, item: usize) -> f64 {
        self.values[agent * self.n_items + item]
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.values[agent * self.n_items..(agent + 1) * self.n_items]
    }

    pub fn with_row(&self, agent: usize, row: &[f64]) -> Self {
        let mut out = self.clone();
        out.values[agent * self.n_items..(agent + 1) * self.n_items].copy_from_slice(row);
        out
    }

    /// True when every entry lies in the valuation support `[0, 1]`.
    pub fn in_support(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub n_agents: usize,
    pub n_items: usize,
    /// Real agents only, `n × k`.
    pub allocation: Vec<f64>,
    /// Dummy-row share per item; empty without a dummy agent.
    pub unallocated: Vec<f64>,
    /// `p̃` per agent in Fractional mode.
    pub frac_payment: Option<Vec<f64>>,
    pub payment: Vec<f64>,
    /// Utility taking the bids as valuations.
    pub utility: Vec<f64>,
}

impl Outcome {
    pub fn alloc(&self, agent: usize, item: usize) -> f64 {
        self.allocation[agent * self.n_items + item]
    }

    pub fn revenue(&self) -> f64 {
        self.payment.iter().sum()
    }

    /// Additive utility of `agent` for this outcome under `valuation`.
    pub fn utility_under(&self, valuation: &BidProfile, agent: usize) -> f64 {
        utility(self, valuation, agent)
    }
}

/// `Σ_j a_ij v_ij − p_i`.
pub fn utility(outcome: &Outcome, valuation: &BidProfile, agent: usize) -> f64 {
    (0..outcome.n_items)
        .map(|j| outcome.alloc(agent, j) * valuation.get(agent, j))
        .sum::<f64>()
        - outcome.payment[agent]
}

/// Intermediate values of one forward pass, kept for differentiation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Vec<f64>,
    pub trunk_pre: Vec<Vec<f64>>,
    pub trunk_post: Vec<Vec<f64>>,
    /// Allocation scores, `rows × k`.
    pub scores: Vec<f64>,
    /// Column-normalized allocation including the dummy row.
    pub alloc_full: Vec<f64>,
    pub pay_pre: Vec<f64>,
    /// `p̃` in Fractional mode, the raw (pre-clip) payment otherwise.
    pub pay_act: Vec<f64>,
    /// `Σ_j a_ij b_ij` per agent.
    pub alloc_value: Vec<f64>,
    pub payment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionNet {
    pub config: AuctionConfig,
    pub trunk: Vec<DenseLayer>,
    pub allocation: DenseLayer,
    pub payment: DenseLayer,
    /// Clamp payments into `[0, Σ_j a_ij b_ij]` (PenaltyFree export).
    pub clip_payments: bool,
}

impl AuctionNet {
    fn build(
        config: &AuctionConfig,
        mut layer: impl FnMut(usize, usize, Activation) -> DenseLayer,
        alloc_act: Activation,
        pay_act: Activation,
    ) -> Result<Self, NetError> {
        config.validate()?;
        let mut trunk = Vec::new();
        let mut width = config.input_dim();
        for &w in &config.trunk_widths {
            trunk.push(layer(width, w, Activation::Relu));
            width = w;
        }
        let allocation = layer(width, config.alloc_rows() * config.n_items, alloc_act);
        let payment = layer(width, config.n_agents, pay_act);
        Ok(Self {
            config: config.clone(),
            trunk,
            allocation,
            payment,
            clip_payments: false,
        })
    }

    fn payment_activation(config: &AuctionConfig) -> Activation {
        match config.ir_mode {
            IrMode::Fractional => Activation::HardSigmoid,
            IrMode::PenaltyFree => Activation::Identity,
        }
    }

    /// Glorot-initialized network with sparsemax allocation.
    pub fn new(config: &AuctionConfig, seed: u64) -> Result<Self, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(
            config,
            |i, o, a| DenseLayer::glorot(i, o, a, &mut rng),
            Activation::Sparsemax,
            Self::payment_activation(config),
        )
    }

    pub fn zeros(config: &AuctionConfig) -> Result<Self, NetError> {
        Self::build(
            config,
            DenseLayer::zeros,
            Activation::Sparsemax,
            Self::payment_activation(config),
        )
    }

    /// Network with the original smooth heads (softmax allocation, sigmoid
    /// fractional payment), used as a distillation teacher.
    pub fn teacher(config: &AuctionConfig, seed: u64) -> Result<Self, NetError> {
        let mut config = config.clone();
        config.ir_mode = IrMode::Fractional;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(
            &config,
            |i, o, a| DenseLayer::glorot(i, o, a, &mut rng),
            Activation::Softmax,
            Activation::Sigmoid,
        )
    }

    pub fn from_parts(
        config: AuctionConfig,
        trunk: Vec<DenseLayer>,
        allocation: DenseLayer,
        payment: DenseLayer,
        clip_payments: bool,
    ) -> Result<Self, NetError> {
        let net = Self {
            config,
            trunk,
            allocation,
            payment,
            clip_payments,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let c = &self.config;
        c.validate()?;
        if self.trunk.len() != c.trunk_widths.len() {
            return Err(NetError::Config("trunk depth differs from config".into()));
        }
        let mut width = c.input_dim();
        for (l, (layer, &w)) in self.trunk.iter().zip(&c.trunk_widths).enumerate() {
            layer.validate(&format!("trunk layer {l}"))?;
            if layer.inputs != width || layer.outputs() != w {
                return Err(NetError::Config(format!("trunk layer {l} has wrong shape")));
            }
            if layer.activation != Activation::Relu {
                return Err(NetError::Config(format!("trunk layer {l} must be relu")));
            }
            width = w;
        }
        self.allocation.validate("allocation head")?;
        self.payment.validate("payment head")?;
        if self.allocation.inputs != width
            || self.allocation.outputs() != c.alloc_rows() * c.n_items
        {
            return Err(NetError::Config("allocation head has wrong shape".into()));
        }
        if self.payment.inputs != width || self.payment.outputs() != c.n_agents {
            return Err(NetError::Config("payment head has wrong shape".into()));
        }
        if !matches!(
            self.allocation.activation,
            Activation::Sparsemax | Activation::Softmax
        ) {
            return Err(NetError::Config(
                "allocation head must be sparsemax or softmax".into(),
            ));
        }
        let pay_ok = match c.ir_mode {
            IrMode::Fractional => matches!(
                self.payment.activation,
                Activation::HardSigmoid | Activation::Sigmoid
            ),
            IrMode::PenaltyFree => self.payment.activation == Activation::Identity,
        };
        if !pay_ok {
            return Err(NetError::Config(format!(
                "payment activation {} does not match ir mode {:?}",
                self.payment.activation.tag(),
                c.ir_mode
            )));
        }
        if self.clip_payments && c.ir_mode != IrMode::PenaltyFree {
            return Err(NetError::Config(
                "payment clipping applies to PenaltyFree networks only".into(),
            ));
        }
        Ok(())
    }

    /// True when every activation is piecewise linear.
    pub fn is_piecewise_linear(&self) -> bool {
        self.allocation.activation == Activation::Sparsemax
            && self.payment.activation != Activation::Sigmoid
    }

    pub fn relu_count(&self) -> usize {
        self.config.trunk_widths.iter().sum()
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Trunk layers, then the allocation head, then the payment head.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk
            .iter()
            .chain(std::iter::once(&self.allocation))
            .chain(std::iter::once(&self.payment))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.trunk
            .iter_mut()
            .chain(std::iter::once(&mut self.allocation))
            .chain(std::iter::once(&mut self.payment))
    }

    pub fn forward(&self, bids: &BidProfile) -> Result<Outcome, NetError> {
        self.check_bids(bids)?;
        Ok(self.outcome(&self.trace(&bids.values)))
    }

    pub fn check_bids(&self, bids: &BidProfile) -> Result<(), NetError> {
        if bids.n_agents != self.config.n_agents || bids.n_items != self.config.n_items {
            return Err(NetError::Config(format!(
                "bid profile is {}x{} but the network expects {}x{}",
                bids.n_agents, bids.n_items, self.config.n_agents, self.config.n_items
            )));
        }
        Ok(())
    }

    /// Forward pass over a flattened input of length `n·k`.
    pub fn trace(&self, x: &[f64]) -> Trace {
        let c = &self.config;
        let (n, k, rows) = (c.n_agents, c.n_items, c.alloc_rows());
        let mut trunk_pre = Vec::with_capacity(self.trunk.len());
        let mut trunk_post = Vec::with_capacity(self.trunk.len());
        let mut h = x.to_vec();
        for layer in &self.trunk {
            let pre = layer.affine(&h);
            h = pre.iter().map(|&v| v.max(0.0)).collect();
            trunk_pre.push(pre);
            trunk_post.push(h.clone());
        }

        let scores = self.allocation.affine(&h);
        let mut alloc_full = vec![0.0; rows * k];
        let mut column = vec![0.0; rows];
        for j in 0..k {
            for r in 0..rows {
                column[r] = scores[r * k + j];
            }
            let z = match self.allocation.activation {
                Activation::Softmax => softmax(&column),
                _ => sparsemax(&column),
            };
            for r in 0..rows {
                alloc_full[r * k + j] = z[r];
            }
        }

        let pay_pre = self.payment.affine(&h);
        let pay_act: Vec<f64> = pay_pre
            .iter()
            .map(|&v| match self.payment.activation {
                Activation::HardSigmoid => hard_sigmoid(v),
                Activation::Sigmoid => sigmoid(v),
                _ => v,
            })
            .collect();
        let alloc_value: Vec<f64> = (0..n)
            .map(|i| (0..k).map(|j| alloc_full[i * k + j] * x[i * k + j]).sum())
            .collect();
        let payment = (0..n)
            .map(|i| match c.ir_mode {
                IrMode::Fractional => pay_act[i] * alloc_value[i],
                IrMode::PenaltyFree if self.clip_payments => {
                    pay_act[i].max(0.0).min(alloc_value[i])
                }
                IrMode::PenaltyFree => pay_act[i],
            })
            .collect();
        Trace {
            input: x.to_vec(),
            trunk_pre,
            trunk_post,
            scores,
            alloc_full,
            pay_pre,
            pay_act,
            alloc_value,
            payment,
        }
    }

    pub fn outcome(&self, t: &Trace) -> Outcome {
        let c = &self.config;
        let (n, k) = (c.n_agents, c.n_items);
        let allocation = t.alloc_full[..n * k].to_vec();
        let unallocated = if c.allow_dummy_agent {
            t.alloc_full[n * k..].to_vec()
        } else {
            Vec::new()
        };
        let utility = (0..n)
            .map(|i| t.alloc_value[i] - t.payment[i])
            .collect();
        Outcome {
            n_agents: n,
            n_items: k,
            allocation,
            unallocated,
            frac_payment: (c.ir_mode == IrMode::Fractional).then(|| t.pay_act.clone()),
            payment: t.payment.clone(),
            utility,
        }
    }

    /// Reverse-mode pass. `d_alloc` (real agents, `n × k`) and `d_payment`
    /// are adjoints of a scalar loss; parameter gradients are accumulated
    /// into `grad` when given. Returns the gradient with respect to the
    /// flattened bids.
    pub fn backward(
        &self,
        t: &Trace,
        d_alloc: &[f64],
        d_payment: &[f64],
        mut grad: Option<&mut NetGradient>,
    ) -> Vec<f64> {
        let c = &self.config;
        let (n, k, rows) = (c.n_agents, c.n_items, c.alloc_rows());
        let x = &t.input;
        let mut d_input = vec![0.0; n * k];
        let mut d_full = vec![0.0; rows * k];
        d_full[..n * k].copy_from_slice(d_alloc);
        let mut d_pay_pre = vec![0.0; n];

        for i in 0..n {
            let dp = d_payment[i];
            if dp == 0.0 {
                continue;
            }
            let mut d_value = 0.0;
            let mut d_act = 0.0;
            match c.ir_mode {
                IrMode::Fractional => {
                    d_act = dp * t.alloc_value[i];
                    d_value = dp * t.pay_act[i];
                }
                IrMode::PenaltyFree if self.clip_payments => {
                    let q = t.pay_act[i];
                    if q < 0.0 {
                    } else if q > t.alloc_value[i] {
                        d_value = dp;
                    } else {
                        d_act = dp;
                    }
                }
                IrMode::PenaltyFree => d_act = dp,
            }
            if d_value != 0.0 {
                for j in 0..k {
                    let idx = i * k + j;
                    d_full[idx] += d_value * x[idx];
                    d_input[idx] += d_value * t.alloc_full[idx];
                }
            }
            let v = t.pay_pre[i];
            d_pay_pre[i] = d_act
                * match self.payment.activation {
                    Activation::HardSigmoid => hard_sigmoid_slope(v),
                    Activation::Sigmoid => {
                        let s = t.pay_act[i];
                        s * (1.0 - s)
                    }
                    _ => 1.0,
                };
        }

        let mut d_scores = vec![0.0; rows * k];
        let mut col = vec![0.0; rows];
        let mut up = vec![0.0; rows];
        let mut out = vec![0.0; rows];
        for j in 0..k {
            if (0..rows).all(|r| d_full[r * k + j] == 0.0) {
                continue;
            }
            for r in 0..rows {
                col[r] = t.scores[r * k + j];
                up[r] = d_full[r * k + j];
            }
            match self.allocation.activation {
                Activation::Softmax => {
                    let dot: f64 = (0..rows).map(|r| t.alloc_full[r * k + j] * up[r]).sum();
                    for r in 0..rows {
                        out[r] = t.alloc_full[r * k + j] * (up[r] - dot);
                    }
                }
                _ => {
                    let support = sparsemax_support(&col);
                    sparsemax_vjp(&support, &up, &mut out);
                }
            }
            for r in 0..rows {
                d_scores[r * k + j] = out[r];
            }
        }

        let last = t.trunk_post.last().expect("nonempty trunk");
        let mut d_h = vec![0.0; last.len()];
        accumulate_layer(
            &self.allocation,
            last,
            &d_scores,
            &mut d_h,
            grad.as_deref_mut().map(|g| &mut g.allocation),
        );
        accumulate_layer(
            &self.payment,
            last,
            &d_pay_pre,
            &mut d_h,
            grad.as_deref_mut().map(|g| &mut g.payment),
        );

        for l in (0..self.trunk.len()).rev() {
            let pre = &t.trunk_pre[l];
            let d_pre: Vec<f64> = d_h
                .iter()
                .zip(pre)
                .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
                .collect();
            let input = if l == 0 { x } else { &t.trunk_post[l - 1] };
            let mut d_in = vec![0.0; input.len()];
            let lg = grad.as_deref_mut().map(|g| &mut g.trunk[l]);
            accumulate_layer(&self.trunk[l], input, &d_pre, &mut d_in, lg);
            d_h = d_in;
        }
        for (d, g) in d_input.iter_mut().zip(&d_h) {
            *d += g;
        }
        d_input
    }
}

/// Adds `Wᵀ d_out` into `d_in` and, when asked, the parameter gradient.
fn accumulate_layer(
    layer: &DenseLayer,
    input: &[f64],
    d_out: &[f64],
    d_in: &mut [f64],
    grad: Option<&mut LayerGrad>,
) {
    for (o, &g) in d_out.iter().enumerate() {
        if g != 0.0 {
            for (di, w) in d_in.iter_mut().zip(layer.row(o)) {
                *di += g * w;
            }
        }
    }
    if let Some(lg) = grad {
        accumulate_params(lg, input, d_out);
    }
}

fn accumulate_params(lg: &mut LayerGrad, input: &[f64], d_out: &[f64]) {
    let width = input.len();
    for (o, &g) in d_out.iter().enumerate() {
        if g != 0.0 {
            lg.biases[o] += g;
            for (w, &v) in lg.weights[o * width..(o + 1) * width].iter_mut().zip(input) {
                *w += g * v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter gradient with the same layout as [`AuctionNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub trunk: Vec<LayerGrad>,
    pub allocation: LayerGrad,
    pub payment: LayerGrad,
}

impl NetGradient {
    pub fn zeros_like(net: &AuctionNet) -> Self {
        let z = |l: &DenseLayer| LayerGrad {
            weights: vec![0.0; l.weights.len()],
            biases: vec![0.0; l.biases.len()],
        };
        Self {
            trunk: net.trunk.iter().map(z).collect(),
            allocation: z(&net.allocation),
            payment: z(&net.payment),
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerGrad> {
        self.trunk
            .iter()
            .chain(std::iter::once(&self.allocation))
            .chain(std::iter::once(&self.payment))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerGrad> {
        self.trunk
            .iter_mut()
            .chain(std::iter::once(&mut self.allocation))
            .chain(std::iter::once(&mut self.payment))
    }

    /// All entries in layer order, weights before biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn add_scaled(&mut self, other: &NetGradient, scale: f64) {
        for (a, b) in self.layers_mut().zip(other.layers()) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

impl AuctionNet {
    /// All parameters in the order used by [`NetGradient::flat`].
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in self.layers_mut() {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = *it.next().expect("parameter vector too short");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, k: usize, mode: IrMode) -> AuctionConfig {
        AuctionConfig::new(n, k, vec![8, 6], mode)
    }

    #[test]
    fn zero_network_fractional_one_by_two() {
        let c = AuctionConfig::new(1, 2, vec![4], IrMode::Fractional);
        let net = AuctionNet::zeros(&c).unwrap();
        let out = net
            .forward(&BidProfile::new(1, 2, vec![1.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(out.allocation, vec![0.5, 0.5]);
        assert_eq!(out.unallocated, vec![0.5, 0.5]);
        assert_eq!(out.frac_payment, Some(vec![0.5]));
        assert_eq!(out.payment, vec![0.5]);
        assert_eq!(out.utility, vec![0.5]);
    }

    #[test]
    fn zero_bids_pay_nothing() {
        let c = cfg(2, 3, IrMode::Fractional);
        let net = AuctionNet::new(&c, 3).unwrap();
        let out = net.forward(&BidProfile::zeros(2, 3)).unwrap();
        assert!(out.payment.iter().all(|&p| p == 0.0));
        assert!(out.utility.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn utility_examples() {
        let out = Outcome {
            n_agents: 1,
            n_items: 2,
            allocation: vec![0.5, 0.5],
            unallocated: vec![],
            frac_payment: None,
            payment: vec![0.6],
            utility: vec![],
        };
        let v = BidProfile::new(1, 2, vec![1.0, 1.0]).unwrap();
        assert!((utility(&out, &v, 0) - 0.4).abs() < 1e-15);
        let out = Outcome {
            allocation: vec![1.0, 0.0],
            payment: vec![0.3],
            ..out
        };
        let v = BidProfile::new(1, 2, vec![0.3, 0.9]).unwrap();
        assert_eq!(utility(&out, &v, 0), 0.0);
        let out = Outcome {
            allocation: vec![0.0, 0.0],
            payment: vec![0.0],
            ..out
        };
        assert_eq!(utility(&out, &v, 0), 0.0);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let net = AuctionNet::new(&cfg(2, 2, IrMode::Fractional), 0).unwrap();
        let err = net.forward(&BidProfile::zeros(1, 2)).unwrap_err();
        assert!(matches!(err, NetError::Config(_)));
        assert!(BidProfile::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(AuctionNet::new(&AuctionConfig::new(0, 2, vec![4], IrMode::Fractional), 0).is_err());
        assert!(AuctionNet::new(&AuctionConfig::new(1, 2, vec![], IrMode::Fractional), 0).is_err());
        let mut net = AuctionNet::new(&cfg(1, 2, IrMode::Fractional), 0).unwrap();
        net.clip_payments = true;
        assert!(net.validate().is_err());
    }

    /// Straight-line evaluation written independently of `trace`.
    fn reference_forward(net: &AuctionNet, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = &net.config;
        let (n, k, rows) = (c.n_agents, c.n_items, c.alloc_rows());
        let mut h = x.to_vec();
        for layer in &net.trunk {
            let mut next = vec![0.0; layer.outputs()];
            for o in 0..layer.outputs() {
                let mut s = layer.biases[o];
                for i in 0..layer.inputs {
                    s += layer.weights[o * layer.inputs + i] * h[i];
                }
                next[o] = if s > 0.0 { s } else { 0.0 };
            }
            h = next;
        }
        let head = |l: &DenseLayer| -> Vec<f64> {
            (0..l.outputs())
                .map(|o| l.biases[o] + (0..l.inputs).map(|i| l.weights[o * l.inputs + i] * h[i]).sum::<f64>())
                .collect()
        };
        let s = head(&net.allocation);
        let mut a = vec![0.0; n * k];
        for j in 0..k {
            let col: Vec<f64> = (0..rows).map(|r| s[r * k + j]).collect();
            // Threshold by scanning every candidate support size.
            let mut sorted = col.clone();
            sorted.sort_by(|p, q| q.partial_cmp(p).unwrap());
            let mut tau = 0.0;
            for size in 1..=rows {
                let t = (sorted[..size].iter().sum::<f64>() - 1.0) / size as f64;
                if sorted[size - 1] > t {
                    tau = t;
                }
            }
            for i in 0..n {
                a[i * k + j] = (col[i] - tau).max(0.0);
            }
        }
        let q = head(&net.payment);
        let p = (0..n)
            .map(|i| {
                let value: f64 = (0..k).map(|j| a[i * k + j] * x[i * k + j]).sum();
                match c.ir_mode {
                    IrMode::Fractional => (0.25 * q[i] + 0.5).clamp(0.0, 1.0) * value,
                    IrMode::PenaltyFree => q[i],
                }
            })
            .collect();
        (a, p)
    }

    #[test]
    fn forward_matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (seed, mode) in [(1, IrMode::Fractional), (2, IrMode::PenaltyFree)] {
            let net = AuctionNet::new(&cfg(2, 3, mode), seed).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
                let out = net.forward(&BidProfile::new(2, 3, x.clone()).unwrap()).unwrap();
                let (a, p) = reference_forward(&net, &x);
                for (u, v) in out.allocation.iter().zip(&a) {
                    assert!((u - v).abs() <= 1e-12);
                }
                for (u, v) in out.payment.iter().zip(&p) {
                    assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn columns_sum_to_one_with_dummy() {
        let net = AuctionNet::new(&cfg(3, 2, IrMode::Fractional), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let out = net.forward(&BidProfile::new(3, 2, x).unwrap()).unwrap();
            for j in 0..2 {
                let s: f64 = (0..3).map(|i| out.alloc(i, j)).sum::<f64>() + out.unallocated[j];
                assert!((s - 1.0).abs() <= 1e-9);
            }
            assert!(out.utility.iter().all(|&u| u >= 0.0));
        }
    }

    #[test]
    fn constant_loss_has_zero_input_gradient() {
        let net = AuctionNet::new(&cfg(2, 2, IrMode::Fractional), 9).unwrap();
        let t = net.trace(&[0.3, 0.6, 0.1, 0.9]);
        let g = net.backward(&t, &[0.0; 4], &[0.0; 2], None);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_at_kink_is_deterministic() {
        // Zero network: every sparsemax column sits on a tie-free support,
        // every ReLU pre-activation is exactly zero.
        let net = AuctionNet::zeros(&cfg(1, 2, IrMode::Fractional)).unwrap();
        let t = net.trace(&[0.5, 0.5]);
        let a = net.backward(&t, &[1.0, -1.0], &[1.0], None);
        let b = net.backward(&t, &[1.0, -1.0], &[1.0], None);
        assert_eq!(a, b);
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut net = AuctionNet::new(&cfg(2, 2, IrMode::PenaltyFree), 4).unwrap();
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.num_params());
        let doubled: Vec<f64> = flat.iter().map(|v| 2.0 * v).collect();
        net.set_flat_params(&doubled);
        assert_eq!(net.flat_params(), doubled);
    }
}
