//! Per-profile regret certificates.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use rcert_core::train::{misreport_search, misreport_search_from};
use rcert_core::{ibp_bounds, AuctionNet, BidProfile, InputBox};
use rcert_lp::{solve_with_hint, LinearProgram, LpStatus, Sense, SolverOptions};

use crate::bnb::{branch_and_bound, BnbOptions, BnbStatus, Heuristic};
use crate::encode::{encode, EncodeOptions, Encoding};
use crate::planet::planet_bounds;
use crate::CertifyError;

/// Source of the neuron bounds used for big-M constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMethod {
    #[default]
    Planet,
    Interval,
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub bnb: BnbOptions,
    pub encode: EncodeOptions,
    pub bounds: BoundMethod,
    /// Ascent steps used to polish each relaxation solution into an
    /// incumbent misreport.
    pub polish_steps: usize,
    pub polish_lr: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            bnb: BnbOptions::default(),
            encode: EncodeOptions::default(),
            bounds: BoundMethod::Planet,
            polish_steps: 50,
            polish_lr: 0.02,
        }
    }
}

impl CertifyOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.bnb.tolerance = tolerance;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub profile: BidProfile,
    pub agent: usize,
    pub truthful_utility: f64,
    /// Proven upper bound on the agent's utility over all misreports.
    pub certified_max_utility: f64,
    pub certified_regret: f64,
    /// Best misreport found and its utility.
    pub incumbent_misreport: Vec<f64>,
    pub incumbent_utility: f64,
    /// `certified_max_utility − incumbent_utility`.
    pub gap: f64,
    pub nodes_explored: usize,
    /// Seconds spent on bounds, encoding and search.
    pub solve_time: f64,
    /// Largest disagreement between the encoding and the network at the
    /// incumbent misreport.
    pub consistency_residual: f64,
    pub status: BnbStatus,
    pub unstable_relus: usize,
    /// Neuron bounds that fell back to interval propagation.
    pub bound_fallbacks: usize,
    pub lp_failures: usize,
}

impl Certificate {
    /// Regret actually achieved by the incumbent misreport.
    pub fn incumbent_regret(&self) -> f64 {
        (self.incumbent_utility - self.truthful_utility).max(0.0)
    }
}

struct Polish<'a> {
    net: &'a AuctionNet,
    profile: &'a BidProfile,
    agent: usize,
    bids: &'a [usize],
    steps: usize,
    lr: f64,
    /// Starts already polished; child nodes often repeat their parent's.
    seen: HashSet<Vec<u64>>,
}

impl Heuristic for Polish<'_> {
    fn initial(&mut self) -> Option<(f64, Vec<f64>)> {
        let m = misreport_search(self.net, self.profile, self.agent, self.steps, self.lr);
        Some((m.utility, m.bid))
    }

    fn improve(&mut self, primal: &[f64]) -> Option<(f64, Vec<f64>)> {
        let start: Vec<f64> = self.bids.iter().map(|&v| primal[v].clamp(0.0, 1.0)).collect();
        if !self.seen.insert(start.iter().map(|b| b.to_bits()).collect()) {
            return None;
        }
        let m = misreport_search_from(self.net, self.profile, self.agent, &start, self.steps, self.lr);
        Some((m.utility, m.bid))
    }
}

/// Certified upper bound on `agent`'s regret at `profile`: the agent's
/// utility is maximized exactly over its bid row in `[0, 1]^k`, other rows
/// fixed at truth. An `Incomplete` certificate still carries a sound bound.
pub fn certify_regret(
    net: &AuctionNet,
    profile: &BidProfile,
    agent: usize,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let start = Instant::now();
    net.check_bids(profile)?;
    if agent >= net.config.n_agents {
        return Err(CertifyError::Agent(agent));
    }
    let bx = InputBox::misreports(profile, agent);
    let bounds = match opts.bounds {
        BoundMethod::Planet => planet_bounds(net, &bx),
        BoundMethod::Interval => ibp_bounds(net, &bx),
    };
    let enc = encode(net, profile, agent, &bounds, opts.encode)?;
    let truthful_utility = net.forward(profile)?.utility[agent];
    let mut polish = Polish {
        net,
        profile,
        agent,
        bids: &enc.bids,
        steps: opts.polish_steps,
        lr: opts.polish_lr,
        seen: HashSet::new(),
    };
    let r = branch_and_bound(&enc.model, &opts.bnb, Some(&mut polish));
    let solve_time = start.elapsed().as_secs_f64();

    let incumbent_misreport = r.incumbent.clone().unwrap_or_else(|| profile.row(agent).to_vec());
    let certified_max_utility = r.upper_bound.max(truthful_utility);
    let consistency_residual = consistency_residual(net, &enc, profile, &incumbent_misreport, &opts.bnb.solver);
    Ok(Certificate {
        profile: profile.clone(),
        agent,
        truthful_utility,
        certified_max_utility,
        certified_regret: (certified_max_utility - truthful_utility).max(0.0),
        incumbent_utility: r.incumbent_value,
        gap: certified_max_utility - r.incumbent_value,
        incumbent_misreport,
        nodes_explored: r.nodes,
        solve_time,
        consistency_residual,
        status: r.status,
        unstable_relus: enc.unstable_relus,
        bound_fallbacks: bounds.fallbacks,
        lp_failures: r.lp_failures,
    })
}

/// Certifies each `(profile, agent)` pair in parallel; results keep the
/// input order.
pub fn certify_batch(
    net: &AuctionNet,
    points: &[(BidProfile, usize)],
    opts: &CertifyOptions,
) -> Vec<Result<Certificate, CertifyError>> {
    points
        .par_iter()
        .map(|(p, agent)| certify_regret(net, p, *agent, opts))
        .collect()
}

/// Fixes the bids at `bid` and every switch to its state in the network's
/// own evaluation, solves the resulting LP and returns the largest
/// difference in the agent's allocation, payment or utility. Infinite when
/// the fixed model is infeasible.
pub fn consistency_residual(
    net: &AuctionNet,
    enc: &Encoding,
    profile: &BidProfile,
    bid: &[f64],
    solver: &SolverOptions,
) -> f64 {
    let m = &enc.model;
    let agent = enc.agent;
    let misreport = profile.with_row(agent, bid);
    let trace = net.trace(&misreport.values);
    let (mut lower, mut upper) = (m.lower.clone(), m.upper.clone());
    for (&v, &b) in enc.bids.iter().zip(bid) {
        lower[v] = b;
        upper[v] = b;
    }
    for &(v, s) in &enc.binaries {
        let on = if s.holds(net, &trace, agent) { 1.0 } else { 0.0 };
        lower[v] = on;
        upper[v] = on;
    }
    for &(p, s) in &enc.pairs {
        let (z, mu) = m.complementarity[p];
        if s.holds(net, &trace, agent) {
            upper[mu] = 0.0;
        } else {
            upper[z] = 0.0;
        }
    }
    // With every switch fixed the model is linear in the bilinear factors;
    // pinning them makes the envelopes exact.
    for &f in &enc.factors {
        let mut range = [lower[f], upper[f]];
        for (slot, sense) in [(0, Sense::Minimize), (1, Sense::Maximize)] {
            let mut lp = m.relaxation(&lower, &upper);
            lp.sense = sense;
            lp.objective = vec![0.0; m.num_vars()];
            lp.objective[f] = 1.0;
            match solve_fixed(&lp, solver) {
                Some(x) => range[slot] = x[f],
                None => return f64::INFINITY,
            }
        }
        let (lo, hi) = (range[0].min(range[1]), range[0].max(range[1]));
        lower[f] = lo;
        upper[f] = hi;
    }
    let lp = m.relaxation(&lower, &upper);
    let Some(x) = solve_fixed(&lp, solver) else {
        return f64::INFINITY;
    };

    let out = net.outcome(&trace);
    let mut residual = (enc.payment.eval(&x) - out.payment[agent]).abs();
    for (j, a) in enc.allocation.iter().enumerate() {
        residual = residual.max((a.eval(&x) - out.alloc(agent, j)).abs());
    }
    let utility = m.objective.eval(&x);
    residual.max((utility - out.utility_under(profile, agent)).abs())
}

fn solve_fixed(lp: &LinearProgram, solver: &SolverOptions) -> Option<Vec<f64>> {
    match solve_with_hint(lp, None, solver) {
        Ok(s) if s.status == LpStatus::Optimal => Some(s.primal),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rcert_core::{AuctionConfig, IrMode};

    #[test]
    fn zero_networks() {
        let v = BidProfile::new(2, 2, vec![0.3, 0.9, 0.5, 0.1]).unwrap();
        // PenaltyFree: constant allocation and payment, so no regret.
        // Fractional: p = ½ Σ a_j b_j with a_j = 1/3, so bidding zero gains
        // ½ · (1/3) · Σ v_j.
        for (mode, expected) in [(IrMode::PenaltyFree, [0.0, 0.0]), (IrMode::Fractional, [0.2, 0.1])] {
            let net = AuctionNet::zeros(&AuctionConfig::new(2, 2, vec![4], mode)).unwrap();
            for agent in 0..2 {
                let c = certify_regret(&net, &v, agent, &CertifyOptions::default()).unwrap();
                assert_eq!(c.status, BnbStatus::Complete);
                assert!((c.certified_regret - expected[agent]).abs() < 1e-4, "{mode:?}: {}", c.certified_regret);
                assert!(c.certified_regret >= expected[agent] - 1e-9);
                assert!(c.consistency_residual < 1e-9);
            }
        }
    }

    #[test]
    fn sound_against_sampled_misreports() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (seed, mode) in [(1, IrMode::Fractional), (2, IrMode::PenaltyFree)] {
            let net = AuctionNet::new(&AuctionConfig::new(2, 2, vec![6], mode), seed).unwrap();
            let v = BidProfile::new(2, 2, (0..4).map(|_| rng.gen()).collect()).unwrap();
            let opts = CertifyOptions::default();
            let c = certify_regret(&net, &v, 1, &opts).unwrap();
            assert_eq!(c.status, BnbStatus::Complete);
            assert!(c.gap <= opts.bnb.tolerance + 1e-12);
            assert!(c.consistency_residual < 1e-6, "{}", c.consistency_residual);
            for _ in 0..2000 {
                let b: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
                let u = net.forward(&v.with_row(1, &b)).unwrap().utility_under(&v, 1);
                assert!(u <= c.certified_max_utility + 1e-9);
            }
        }
    }
}
