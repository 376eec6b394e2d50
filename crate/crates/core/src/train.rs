//! Augmented-Lagrangian training against gradient-ascent misreports.
//!
//! Each batch finds a misreport per (profile, agent) by projected gradient
//! ascent on the agent's utility, then descends
//!
//! ```text
//! −Σ_i p_i + Σ_i λ_i rgt_i + (ρ/2)(Σ_i rgt_i)² [+ Σ_i μ_i irv_i²]
//!   [+ w_stab · stability] [+ w_distill · MSE(student, teacher)]
//! ```
//!
//! averaged over the batch, with Adam. Multipliers grow on fixed batch
//! periods.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{stability_penalty_grad, InputBox};
use crate::data::Dataset;
use crate::error::TrainError;
use crate::net::{AuctionConfig, AuctionNet, BidProfile, IrMode, NetGradient, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub misreport_steps_train: usize,
    pub misreport_lr: f64,
    pub misreport_steps_eval: usize,
    pub lambda_init: f64,
    pub rho_rgt_init: f64,
    pub rho_rgt_inc: f64,
    pub lambda_update_period: usize,
    pub mu_init: f64,
    pub rho_irv: f64,
    pub rho_irv_inc: f64,
    pub mu_update_period: usize,
    /// Fixed amount added to every `μ_i` at each IR multiplier update.
    pub mu_step: f64,
    pub stability_weight: f64,
    pub distill_weight: f64,
    pub seed: u64,
    /// Run on a single worker. Results are identical either way because
    /// reductions always happen in a fixed order.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 500,
            epochs: 80,
            lr: 5e-3,
            misreport_steps_train: 25,
            misreport_lr: 0.02,
            misreport_steps_eval: 1000,
            lambda_init: 5.0,
            rho_rgt_init: 1.0,
            rho_rgt_inc: 0.5,
            lambda_update_period: 6,
            mu_init: 5.0,
            rho_irv: 1.0,
            rho_irv_inc: 0.0,
            mu_update_period: 5,
            mu_step: 5.0,
            stability_weight: 0.0,
            distill_weight: 1.0 / 400.0,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("lr", self.lr),
            ("misreport_lr", self.misreport_lr),
            ("rho_rgt_init", self.rho_rgt_init),
            ("rho_irv", self.rho_irv),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrainError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("rho_rgt_inc", self.rho_rgt_inc),
            ("rho_irv_inc", self.rho_irv_inc),
            ("mu_step", self.mu_step),
            ("lambda_init", self.lambda_init),
            ("mu_init", self.mu_init),
            ("stability_weight", self.stability_weight),
            ("distill_weight", self.distill_weight),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TrainError::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.batch_size == 0 || self.lambda_update_period == 0 || self.mu_update_period == 0 {
            return Err(TrainError::Config(
                "batch_size and update periods must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-agent Lagrange multipliers and the quadratic penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub rho_rgt: f64,
    pub mu: Vec<f64>,
    pub rho_irv: f64,
}

impl Multipliers {
    pub fn new(n_agents: usize, cfg: &TrainConfig) -> Self {
        Self {
            lambda: vec![cfg.lambda_init; n_agents],
            rho_rgt: cfg.rho_rgt_init,
            mu: vec![cfg.mu_init; n_agents],
            rho_irv: cfg.rho_irv,
        }
    }

    /// `λ_i += ρ·rgt_i`, then `ρ += ρ_inc`.
    pub fn update_regret(&mut self, mean_regret: &[f64], rho_inc: f64) {
        for (l, r) in self.lambda.iter_mut().zip(mean_regret) {
            *l += self.rho_rgt * r.max(0.0);
        }
        self.rho_rgt += rho_inc;
    }

    /// `μ_i += ρ_irv·irv_i + step`, then `ρ_irv += ρ_irv_inc`.
    pub fn update_irv(&mut self, mean_irv: &[f64], rho_inc: f64, step: f64) {
        for (m, v) in self.mu.iter_mut().zip(mean_irv) {
            *m += self.rho_irv * v.max(0.0) + step;
        }
        self.rho_irv += rho_inc;
    }

    pub fn mean_lambda(&self) -> f64 {
        self.lambda.iter().sum::<f64>() / self.lambda.len() as f64
    }
}

/// Utility of `agent` with valuation row `values` at flattened bids `x`.
fn agent_utility(net: &AuctionNet, t: &Trace, agent: usize, values: &[f64]) -> f64 {
    let k = net.config.n_items;
    (0..k)
        .map(|j| t.alloc_full[agent * k + j] * values[j])
        .sum::<f64>()
        - t.payment[agent]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Misreport {
    pub bid: Vec<f64>,
    pub utility: f64,
    pub truthful_utility: f64,
}

impl Misreport {
    pub fn regret(&self) -> f64 {
        (self.utility - self.truthful_utility).max(0.0)
    }
}

/// Projected gradient ascent on `agent`'s utility over its own bid row,
/// other rows held at truth. Starts at the truthful row and returns the
/// best iterate seen.
pub fn misreport_search(
    net: &AuctionNet,
    profile: &BidProfile,
    agent: usize,
    steps: usize,
    lr: f64,
) -> Misreport {
    misreport_search_from(net, profile, agent, profile.row(agent), steps, lr)
}

/// As [`misreport_search`], starting from `start` instead of the truth.
pub fn misreport_search_from(
    net: &AuctionNet,
    profile: &BidProfile,
    agent: usize,
    start: &[f64],
    steps: usize,
    lr: f64,
) -> Misreport {
    let c = &net.config;
    let (n, k) = (c.n_agents, c.n_items);
    let values = profile.row(agent);
    let truth = net.trace(&profile.values);
    let truthful_utility = agent_utility(net, &truth, agent, values);
    let mut best = Misreport {
        bid: values.to_vec(),
        utility: truthful_utility,
        truthful_utility,
    };
    let mut x = profile.with_row(agent, start).values;
    let mut d_alloc = vec![0.0; n * k];
    d_alloc[agent * k..(agent + 1) * k].copy_from_slice(values);
    let mut d_pay = vec![0.0; n];
    d_pay[agent] = -1.0;
    for step in 0..=steps {
        let t = net.trace(&x);
        let u = agent_utility(net, &t, agent, values);
        if u > best.utility {
            best.utility = u;
            best.bid.copy_from_slice(&x[agent * k..(agent + 1) * k]);
        }
        if step == steps {
            break;
        }
        let g = net.backward(&t, &d_alloc, &d_pay, None);
        for j in 0..k {
            let idx = agent * k + j;
            x[idx] = (x[idx] + lr * g[idx]).clamp(0.0, 1.0);
        }
    }
    best
}

/// Empirical regret: gain of the best misreport found by `steps` of ascent.
pub fn regret_hat(net: &AuctionNet, profile: &BidProfile, agent: usize, steps: usize, lr: f64) -> f64 {
    misreport_search(net, profile, agent, steps, lr).regret()
}

/// `max(p_i − Σ_j a_ij b_ij, 0)` at truthful bids; zero by construction in
/// Fractional mode.
pub fn irv(net: &AuctionNet, profile: &BidProfile, agent: usize) -> f64 {
    if net.config.ir_mode == IrMode::Fractional {
        return 0.0;
    }
    let t = net.trace(&profile.values);
    (t.payment[agent] - t.alloc_value[agent]).max(0.0)
}

/// One profile's augmented Lagrangian from its payments, regrets and IR
/// violations.
pub fn lagrangian_value(payments: &[f64], regrets: &[f64], irvs: &[f64], m: &Multipliers) -> f64 {
    let revenue: f64 = payments.iter().sum();
    let total_rgt: f64 = regrets.iter().sum();
    let lin: f64 = m.lambda.iter().zip(regrets).map(|(l, r)| l * r).sum();
    let ir: f64 = m.mu.iter().zip(irvs).map(|(u, v)| u * v * v).sum();
    -revenue + lin + 0.5 * m.rho_rgt * total_rgt * total_rgt + ir
}

/// Batch-mean Lagrangian with misreports found by `steps` of ascent. The IR
/// term only appears for PenaltyFree networks.
pub fn lagrangian_loss(
    net: &AuctionNet,
    batch: &[BidProfile],
    m: &Multipliers,
    steps: usize,
    lr: f64,
) -> f64 {
    let n = net.config.n_agents;
    let total: f64 = batch
        .iter()
        .map(|v| {
            let t = net.trace(&v.values);
            let regrets: Vec<f64> = (0..n)
                .map(|i| regret_hat(net, v, i, steps, lr))
                .collect();
            let irvs: Vec<f64> = (0..n).map(|i| irv(net, v, i)).collect();
            lagrangian_value(&t.payment, &regrets, &irvs, m)
        })
        .sum();
    total / batch.len() as f64
}

/// Student/teacher outputs concatenated: real-agent allocations, then payments.
fn distill_outputs(t: &Trace, n: usize, k: usize) -> impl Iterator<Item = f64> + '_ {
    t.alloc_full[..n * k].iter().chain(&t.payment).copied()
}

/// `weight ×` mean squared difference of the concatenated outputs.
pub fn distill_loss(
    teacher: &AuctionNet,
    student: &AuctionNet,
    batch: &[BidProfile],
    weight: f64,
) -> Result<f64, TrainError> {
    check_distill_shapes(teacher, student)?;
    let (n, k) = (student.config.n_agents, student.config.n_items);
    let dim = (n * k + n) as f64;
    let total: f64 = batch
        .iter()
        .map(|v| {
            let ts = student.trace(&v.values);
            let tt = teacher.trace(&v.values);
            distill_outputs(&ts, n, k)
                .zip(distill_outputs(&tt, n, k))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / dim
        })
        .sum();
    Ok(weight * total / batch.len() as f64)
}

fn check_distill_shapes(teacher: &AuctionNet, student: &AuctionNet) -> Result<(), TrainError> {
    let (a, b) = (&teacher.config, &student.config);
    if a.n_agents != b.n_agents || a.n_items != b.n_items {
        return Err(TrainError::Config(format!(
            "teacher is {}x{} but student is {}x{}",
            a.n_agents, a.n_items, b.n_agents, b.n_items
        )));
    }
    Ok(())
}

/// Marks a trained PenaltyFree network to clamp payments into
/// `[0, Σ_j a_ij b_ij]`.
pub fn clip_payments(net: &AuctionNet) -> Result<AuctionNet, TrainError> {
    if net.config.ir_mode != IrMode::PenaltyFree {
        return Err(TrainError::Config(
            "payment clipping needs a PenaltyFree network".into(),
        ));
    }
    let mut out = net.clone();
    out.clip_payments = true;
    Ok(out)
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// One row of the training log, aggregated over an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub revenue: f64,
    pub mean_regret: f64,
    pub max_regret: f64,
    pub mean_irv: f64,
    pub loss: f64,
    pub mean_lambda: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub net: AuctionNet,
    pub log: Vec<LogRow>,
    pub multipliers: Multipliers,
}

struct SampleStats {
    grad: NetGradient,
    loss: f64,
    revenue: f64,
    regret: Vec<f64>,
    irv: Vec<f64>,
}

impl SampleStats {
    fn zeros(net: &AuctionNet) -> Self {
        let n = net.config.n_agents;
        Self {
            grad: NetGradient::zeros_like(net),
            loss: 0.0,
            revenue: 0.0,
            regret: vec![0.0; n],
            irv: vec![0.0; n],
        }
    }

    fn absorb(&mut self, other: SampleStats) {
        self.grad.add_scaled(&other.grad, 1.0);
        self.loss += other.loss;
        self.revenue += other.revenue;
        for (a, b) in self.regret.iter_mut().zip(&other.regret) {
            *a += b;
        }
        for (a, b) in self.irv.iter_mut().zip(&other.irv) {
            *a += b;
        }
    }
}

struct BatchContext<'a> {
    net: &'a AuctionNet,
    cfg: &'a TrainConfig,
    mult: &'a Multipliers,
    teacher: Option<&'a AuctionNet>,
    scale: f64,
}

impl BatchContext<'_> {
    /// Loss contribution and gradient of one profile, pre-scaled by `scale`.
    fn sample(&self, v: &BidProfile, stats: &mut SampleStats, max_regret: &mut f64) {
        let net = self.net;
        let (n, k) = (net.config.n_agents, net.config.n_items);
        let truth = net.trace(&v.values);
        let mut regrets = vec![0.0; n];
        let mut mis_traces = Vec::with_capacity(n);
        for i in 0..n {
            let m = misreport_search(
                net,
                v,
                i,
                self.cfg.misreport_steps_train,
                self.cfg.misreport_lr,
            );
            regrets[i] = m.regret();
            *max_regret = max_regret.max(regrets[i]);
            mis_traces.push((v.with_row(i, &m.bid).values, regrets[i] > 0.0));
        }
        let penalize_ir = net.config.ir_mode == IrMode::PenaltyFree;
        let irvs: Vec<f64> = (0..n)
            .map(|i| {
                if penalize_ir {
                    (truth.payment[i] - truth.alloc_value[i]).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut loss = lagrangian_value(&truth.payment, &regrets, &irvs, self.mult);
        let total_rgt: f64 = regrets.iter().sum();

        let mut d_alloc = vec![0.0; n * k];
        let mut d_pay = vec![-1.0; n];
        for i in 0..n {
            if regrets[i] > 0.0 {
                let g = self.mult.lambda[i] + self.mult.rho_rgt * total_rgt;
                d_pay[i] += g;
                for j in 0..k {
                    d_alloc[i * k + j] -= g * v.get(i, j);
                }
            }
            if irvs[i] > 0.0 {
                let g = 2.0 * self.mult.mu[i] * irvs[i];
                d_pay[i] += g;
                for j in 0..k {
                    d_alloc[i * k + j] -= g * v.get(i, j);
                }
            }
        }
        if let Some(teacher) = self.teacher {
            let tt = teacher.trace(&v.values);
            let dim = (n * k + n) as f64;
            let w = self.cfg.distill_weight;
            let mut sq = 0.0;
            for idx in 0..n * k {
                let diff = truth.alloc_full[idx] - tt.alloc_full[idx];
                sq += diff * diff;
                d_alloc[idx] += w * 2.0 * diff / dim;
            }
            for i in 0..n {
                let diff = truth.payment[i] - tt.payment[i];
                sq += diff * diff;
                d_pay[i] += w * 2.0 * diff / dim;
            }
            loss += w * sq / dim;
        }
        scale_in_place(&mut d_alloc, self.scale);
        scale_in_place(&mut d_pay, self.scale);
        net.backward(&truth, &d_alloc, &d_pay, Some(&mut stats.grad));

        for (i, (x, active)) in mis_traces.iter().enumerate() {
            if !active {
                continue;
            }
            let g = (self.mult.lambda[i] + self.mult.rho_rgt * total_rgt) * self.scale;
            let t = net.trace(x);
            let mut da = vec![0.0; n * k];
            let mut dp = vec![0.0; n];
            for j in 0..k {
                da[i * k + j] = g * v.get(i, j);
            }
            dp[i] = -g;
            net.backward(&t, &da, &dp, Some(&mut stats.grad));
        }

        stats.loss += loss * self.scale;
        stats.revenue += truth.payment.iter().sum::<f64>();
        for i in 0..n {
            stats.regret[i] += regrets[i];
            stats.irv[i] += irvs[i];
        }
    }
}

fn scale_in_place(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

/// Samples per work unit. Fixed so the reduction order never depends on
/// the number of threads.
const CHUNK: usize = 16;

/// Train a freshly initialized network (seeded from `cfg.seed`).
pub fn train(auction: &AuctionConfig, cfg: &TrainConfig, data: &Dataset) -> Result<Trained, TrainError> {
    let net = AuctionNet::new(auction, cfg.seed)?;
    train_from(net, cfg, data, None)
}

/// Train a network with the original smooth heads, for use as a teacher.
pub fn train_teacher(
    auction: &AuctionConfig,
    cfg: &TrainConfig,
    data: &Dataset,
) -> Result<Trained, TrainError> {
    let net = AuctionNet::teacher(auction, cfg.seed)?;
    train_from(net, cfg, data, None)
}

/// Train a PenaltyFree student with a distillation term toward `teacher`.
pub fn train_distilled(
    auction: &AuctionConfig,
    cfg: &TrainConfig,
    data: &Dataset,
    teacher: &AuctionNet,
) -> Result<Trained, TrainError> {
    if auction.ir_mode != IrMode::PenaltyFree {
        return Err(TrainError::Config("distillation students must be PenaltyFree".into()));
    }
    let net = AuctionNet::new(auction, cfg.seed)?;
    check_distill_shapes(teacher, &net)?;
    train_from(net, cfg, data, Some(teacher))
}

pub fn train_from(
    mut net: AuctionNet,
    cfg: &TrainConfig,
    data: &Dataset,
    teacher: Option<&AuctionNet>,
) -> Result<Trained, TrainError> {
    cfg.validate()?;
    net.validate()?;
    if data.n_agents != net.config.n_agents || data.n_items != net.config.n_items {
        return Err(TrainError::Config("dataset shape differs from the network".into()));
    }
    if data.is_empty() {
        return Err(TrainError::Config("empty dataset".into()));
    }
    let n = net.config.n_agents;
    let mut mult = Multipliers::new(n, cfg);
    let mut adam = Adam::new(net.num_params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut batches_done = 0usize;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(if cfg.deterministic { 1 } else { 0 })
        .build()
        .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut ep_revenue = 0.0;
        let mut ep_regret = 0.0;
        let mut ep_max_regret: f64 = 0.0;
        let mut ep_irv = 0.0;
        let mut ep_loss = 0.0;
        let mut ep_samples = 0usize;
        let mut ep_batches = 0usize;

        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&BidProfile> = idx.iter().map(|&i| &data.profiles[i]).collect();
            let ctx = BatchContext {
                net: &net,
                cfg,
                mult: &mult,
                teacher,
                scale: 1.0 / batch.len() as f64,
            };
            let chunks: Vec<(SampleStats, f64)> = pool.install(|| {
                batch
                    .par_chunks(CHUNK)
                    .map(|chunk| {
                        let mut s = SampleStats::zeros(&net);
                        let mut mx = 0.0;
                        for v in chunk {
                            ctx.sample(v, &mut s, &mut mx);
                        }
                        (s, mx)
                    })
                    .collect()
            });
            let mut stats = SampleStats::zeros(&net);
            let mut max_regret: f64 = 0.0;
            for (s, mx) in chunks {
                stats.absorb(s);
                max_regret = max_regret.max(mx);
            }

            if cfg.stability_weight > 0.0 {
                stability_term(&net, cfg, &batch, &mut stats);
            }
            if !stats.loss.is_finite() || !stats.grad.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: stats.loss,
                });
            }

            let mut params = net.flat_params();
            adam.step(&mut params, &stats.grad.flat());
            net.set_flat_params(&params);

            let bs = batch.len() as f64;
            let mean_regret: Vec<f64> = stats.regret.iter().map(|r| r / bs).collect();
            let mean_irv: Vec<f64> = stats.irv.iter().map(|r| r / bs).collect();
            batches_done += 1;
            if batches_done % cfg.lambda_update_period == 0 {
                mult.update_regret(&mean_regret, cfg.rho_rgt_inc);
            }
            if net.config.ir_mode == IrMode::PenaltyFree && batches_done % cfg.mu_update_period == 0 {
                mult.update_irv(&mean_irv, cfg.rho_irv_inc, cfg.mu_step);
            }

            ep_revenue += stats.revenue;
            ep_regret += stats.regret.iter().sum::<f64>();
            ep_irv += stats.irv.iter().sum::<f64>();
            ep_max_regret = ep_max_regret.max(max_regret);
            ep_loss += stats.loss;
            ep_samples += batch.len();
            ep_batches += 1;
        }

        let s = ep_samples as f64;
        log.push(LogRow {
            epoch,
            revenue: ep_revenue / s,
            mean_regret: ep_regret / (s * n as f64),
            max_regret: ep_max_regret,
            mean_irv: ep_irv / (s * n as f64),
            loss: ep_loss / ep_batches as f64,
            mean_lambda: mult.mean_lambda(),
            rho: mult.rho_rgt,
        });
    }
    Ok(Trained {
        net,
        log,
        multipliers: mult,
    })
}

/// Adds the stability penalty over every (profile, agent) misreport box.
fn stability_term(net: &AuctionNet, cfg: &TrainConfig, batch: &[&BidProfile], stats: &mut SampleStats) {
    let n = net.config.n_agents;
    if n == 1 {
        // The misreport box is the whole valuation support for every profile.
        let bx = InputBox::unit(net.config.input_dim());
        let p = stability_penalty_grad(net, &bx, cfg.stability_weight, &mut stats.grad);
        stats.loss += cfg.stability_weight * p;
        return;
    }
    let scale = cfg.stability_weight / (batch.len() * n) as f64;
    for v in batch {
        for i in 0..n {
            let bx = InputBox::misreports(v, i);
            let p = stability_penalty_grad(net, &bx, scale, &mut stats.grad);
            stats.loss += scale * p;
        }
    }
}

/// Revenue, regret and IR-violation statistics over a profile set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub revenue_mean: f64,
    pub revenue_std: f64,
    /// Per (profile, agent) pairs, profile-major.
    pub regrets: Vec<f64>,
    pub irvs: Vec<f64>,
    pub revenues: Vec<f64>,
}

impl EvalReport {
    pub fn regret_mean(&self) -> f64 {
        mean(&self.regrets)
    }

    pub fn regret_std(&self) -> f64 {
        std_dev(&self.regrets)
    }

    pub fn regret_max(&self) -> f64 {
        self.regrets.iter().copied().fold(0.0, f64::max)
    }

    /// Fraction of (profile, agent) pairs with a positive IR violation.
    pub fn irv_rate(&self) -> f64 {
        if self.irvs.is_empty() {
            return 0.0;
        }
        self.irvs.iter().filter(|&&v| v > 0.0).count() as f64 / self.irvs.len() as f64
    }

    pub fn irv_mean(&self) -> f64 {
        mean(&self.irvs)
    }

    /// Mean violation over violating pairs only.
    pub fn irv_mean_violating(&self) -> f64 {
        let v: Vec<f64> = self.irvs.iter().copied().filter(|&v| v > 0.0).collect();
        if v.is_empty() {
            0.0
        } else {
            mean(&v)
        }
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Truthful revenue plus empirical regret of every agent under `steps` of
/// misreport ascent.
pub fn evaluate(net: &AuctionNet, profiles: &[BidProfile], steps: usize, lr: f64) -> EvalReport {
    let n = net.config.n_agents;
    let rows: Vec<(f64, Vec<f64>, Vec<f64>)> = profiles
        .par_iter()
        .map(|v| {
            let t = net.trace(&v.values);
            let regrets = (0..n).map(|i| regret_hat(net, v, i, steps, lr)).collect();
            let irvs = (0..n).map(|i| irv(net, v, i)).collect();
            (t.payment.iter().sum(), regrets, irvs)
        })
        .collect();
    let revenues: Vec<f64> = rows.iter().map(|r| r.0).collect();
    EvalReport {
        revenue_mean: mean(&revenues),
        revenue_std: std_dev(&revenues),
        regrets: rows.iter().flat_map(|r| r.1.iter().copied()).collect(),
        irvs: rows.iter().flat_map(|r| r.2.iter().copied()).collect(),
        revenues,
    }
}
