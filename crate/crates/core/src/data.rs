use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::BidProfile;

/// Valuation profiles drawn i.i.d. uniform on `[0, 1]^{n×k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_agents: usize,
    pub n_items: usize,
    pub seed: u64,
    pub profiles: Vec<BidProfile>,
}

impl Dataset {
    pub fn uniform(n_agents: usize, n_items: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profiles = (0..count)
            .map(|_| BidProfile {
                n_agents,
                n_items,
                values: (0..n_agents * n_items).map(|_| rng.gen::<f64>()).collect(),
            })
            .collect();
        Self {
            n_agents,
            n_items,
            seed,
            profiles,
        }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let a = Dataset::uniform(2, 3, 50, 7);
        let b = Dataset::uniform(2, 3, 50, 7);
        assert_eq!(a, b);
        assert_ne!(a, Dataset::uniform(2, 3, 50, 8));
        assert!(a.profiles.iter().all(BidProfile::in_support));
    }
}
