use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcert_core::bounds::InputBox;
use rcert_core::train::{misreport_search, regret_hat, Multipliers, TrainConfig};
use rcert_core::{ibp_bounds, sparsemax, AuctionConfig, AuctionNet, BidProfile, IrMode};

fn random_simplex_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn mode() -> impl Strategy<Value = IrMode> {
    prop_oneof![Just(IrMode::Fractional), Just(IrMode::PenaltyFree)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparsemax_is_the_projection(x in prop::collection::vec(-5.0f64..5.0, 2..9), seed in any::<u64>()) {
        let z = sparsemax(&x);
        prop_assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(z.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let d = dist2(&x, &z);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let p = random_simplex_point(&mut rng, x.len());
            prop_assert!(d <= dist2(&x, &p) + 1e-12);
        }
    }

    #[test]
    fn sparsemax_translation_invariant(x in prop::collection::vec(-5.0f64..5.0, 2..9), c in -10.0f64..10.0) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let (a, b) = (sparsemax(&x), sparsemax(&shifted));
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_invariants(
        seed in 0u64..1000,
        n in 1usize..4,
        k in 1usize..4,
        mode in mode(),
        bids in prop::collection::vec(0.0f64..=1.0, 9),
    ) {
        let net = AuctionNet::new(&AuctionConfig::new(n, k, vec![5, 4], mode), seed).unwrap();
        let v = BidProfile::new(n, k, bids[..n * k].to_vec()).unwrap();
        let out = net.forward(&v).unwrap();
        for j in 0..k {
            let s: f64 = (0..n).map(|i| out.alloc(i, j)).sum::<f64>() + out.unallocated[j];
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }
        prop_assert!(out.allocation.iter().all(|&a| (0.0..=1.0).contains(&a)));
        if mode == IrMode::Fractional {
            prop_assert!(out.utility.iter().all(|&u| u >= 0.0));
            let frac = out.frac_payment.as_ref().unwrap();
            prop_assert!(frac.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn misreport_never_worse_and_monotone(seed in 0u64..500, bids in prop::collection::vec(0.0f64..=1.0, 4)) {
        let net = AuctionNet::new(&AuctionConfig::new(2, 2, vec![6], IrMode::Fractional), seed).unwrap();
        let v = BidProfile::new(2, 2, bids).unwrap();
        for agent in 0..2 {
            let m = misreport_search(&net, &v, agent, 30, 0.05);
            prop_assert!(m.utility >= m.truthful_utility - 1e-12);
            prop_assert!(m.bid.iter().all(|&b| (0.0..=1.0).contains(&b)));
            let few = regret_hat(&net, &v, agent, 10, 0.05);
            prop_assert!(m.regret() >= few);
        }
    }

    #[test]
    fn multipliers_nondecreasing(updates in prop::collection::vec((0.0f64..0.5, 0.0f64..0.5), 1..30)) {
        let cfg = TrainConfig::default();
        let mut m = Multipliers::new(1, &cfg);
        for (r, v) in updates {
            let before = m.clone();
            m.update_regret(&[r], cfg.rho_rgt_inc);
            m.update_irv(&[v], cfg.rho_irv_inc, cfg.mu_step);
            prop_assert!(m.lambda[0] >= before.lambda[0]);
            prop_assert!(m.mu[0] >= before.mu[0]);
            prop_assert!(m.rho_rgt >= before.rho_rgt);
        }
    }

    #[test]
    fn ibp_contains_samples(seed in 0u64..200, lo in prop::collection::vec(0.0f64..0.5, 4), w in prop::collection::vec(0.0f64..0.5, 4)) {
        let net = AuctionNet::new(&AuctionConfig::new(2, 2, vec![7, 5], IrMode::PenaltyFree), seed).unwrap();
        let bx = InputBox { upper: lo.iter().zip(&w).map(|(a, b)| a + b).collect(), lower: lo };
        let b = ibp_bounds(&net, &bx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|i| rng.gen_range(bx.lower[i]..=bx.upper[i])).collect();
            prop_assert!(b.contains_trace(&net.trace(&x), 1e-12));
        }
    }
}
