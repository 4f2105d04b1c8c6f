//! Seeded random generation of valid instances for property tests and the
//! desk-scale exhaustive checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AssetId, GaeInstance, Ledger, OwnerSet, PartyId};

const PARTY_NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub max_parties: usize,
    pub max_assets: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            max_parties: 4,
            max_assets: 3,
        }
    }
}

fn subset<R: Rng>(rng: &mut R, pool: &[PartyId]) -> OwnerSet {
    let mask = rng.gen_range(0..(1u32 << pool.len()));
    pool.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, p)| p.clone())
        .collect()
}

/// Draws parties, assets and owner sets uniformly and retries until the
/// result satisfies every instance clause and both exchange sets are
/// non-empty. The party set is the set of parties that own something.
pub fn random_instance<R: Rng>(rng: &mut R, params: GenParams) -> GaeInstance {
    assert!((2..=PARTY_NAMES.len()).contains(&params.max_parties));
    assert!(params.max_assets >= 1);
    loop {
        let n = rng.gen_range(2..=params.max_parties);
        let pool: Vec<PartyId> = PARTY_NAMES[..n].iter().map(|s| PartyId::from(*s)).collect();
        let mut b = GaeInstance::builder();
        for (ledger, prefix) in [(Ledger::L1, "M"), (Ledger::L2, "N")] {
            let count = rng.gen_range(1..=params.max_assets);
            for i in 0..count {
                let asset = AssetId::new(ledger, &format!("{prefix}{i}"));
                let initial = subset(rng, &pool);
                let fin = if rng.gen_bool(0.75) {
                    Some(subset(rng, &pool))
                } else {
                    None
                };
                b = b.line(asset, initial, fin);
            }
        }
        let inst = b.build();
        if inst.validate().is_ok() && !inst.exchange1.is_empty() && !inst.exchange2.is_empty() {
            return inst;
        }
    }
}

/// `count` valid instances from a fixed seed.
pub fn instances(seed: u64, count: usize, params: GenParams) -> Vec<GaeInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, params)).collect()
}
