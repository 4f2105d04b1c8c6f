use std::collections::BTreeMap;

use thiserror::Error;

use crate::ledger::{LockMode, Tick};
use crate::model::{derive_gkt, initial_owner_union, AssetId, GaeInstance, Ledger};

/// Expiry offsets for every exchanged asset, in ticks after its lock.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeoutSchedule {
    pub base: Tick,
    pub per_asset: BTreeMap<AssetId, Tick>,
}

impl TimeoutSchedule {
    pub fn offset(&self, asset: &AssetId) -> Option<Tick> {
        self.per_asset.get(asset).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("T = {0} must be at least 4 and divisible by 4")]
    BadBase(Tick),
}

fn check_base(t: Tick) -> Result<(), ScheduleError> {
    if t < 4 || !t.is_multiple_of(4) {
        Err(ScheduleError::BadBase(t))
    } else {
        Ok(())
    }
}

/// L1 assets get `T`. L2 assets get `T/2`, except in per-asset mode where
/// assets with a taker among the L1 initial owners get `T/4`, so that the
/// remaining claimants keep a margin after the first reveal.
pub fn build_schedule(instance: &GaeInstance, t: Tick, mode: LockMode) -> Result<TimeoutSchedule, ScheduleError> {
    check_base(t)?;
    let o1 = initial_owner_union(instance);
    let mut per_asset: BTreeMap<AssetId, Tick> = instance.exchange1.iter().map(|a| (a.clone(), t)).collect();
    for (asset, gkt) in derive_gkt(instance, Ledger::L2).rows {
        let overlaps = !gkt.takers.is_disjoint(&o1);
        let offset = match mode {
            LockMode::PerAsset if overlaps => t / 4,
            _ => t / 2,
        };
        per_asset.insert(asset, offset);
    }
    Ok(TimeoutSchedule { base: t, per_asset })
}

/// The two-level schedule of the classic swap: `T` on L1, `T/2` on L2.
pub fn classic_schedule(instance: &GaeInstance, t: Tick) -> Result<TimeoutSchedule, ScheduleError> {
    check_base(t)?;
    let per_asset = instance
        .exchange1
        .iter()
        .map(|a| (a.clone(), t))
        .chain(instance.exchange2.iter().map(|a| (a.clone(), t / 2)))
        .collect();
    Ok(TimeoutSchedule { base: t, per_asset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Ledger::*;

    fn offsets(s: &TimeoutSchedule) -> Vec<(String, Tick)> {
        s.per_asset.iter().map(|(a, t)| (a.name.clone(), *t)).collect()
    }

    #[test]
    fn joint_owner_swap() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X", "W"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X", "W"])
            .build();
        let s = build_schedule(&inst, 8, LockMode::PerAsset).unwrap();
        assert_eq!(offsets(&s), [("M".into(), 8), ("N".into(), 2)]);
        let s = build_schedule(&inst, 8, LockMode::SingleTransaction).unwrap();
        assert_eq!(s.offset(&AssetId::new(L2, "N")), Some(4));
    }

    #[test]
    fn unconnected_transfer_gets_more_time() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X"])
            .transfer(L2, "P", &["Z"], &["V"])
            .build();
        let s = build_schedule(&inst, 8, LockMode::PerAsset).unwrap();
        assert_eq!(s.offset(&AssetId::new(L2, "P")), Some(4));
        assert_eq!(s.offset(&AssetId::new(L2, "N")), Some(2));
    }

    #[test]
    fn base_must_split_in_quarters() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X"])
            .build();
        for t in [0, 2, 6, 10] {
            assert_eq!(
                build_schedule(&inst, t, LockMode::PerAsset),
                Err(ScheduleError::BadBase(t))
            );
        }
        assert!(build_schedule(&inst, 4, LockMode::PerAsset).is_ok());
        assert_eq!(
            offsets(&classic_schedule(&inst, 8).unwrap()),
            [("M".into(), 8), ("N".into(), 4)]
        );
    }
}
