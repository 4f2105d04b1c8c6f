use std::collections::BTreeMap;
use std::fmt;

use crate::ledger::{HashValue, LedgerState, LockEntry, Tick};
use crate::model::{AssetId, GaeInstance, Ledger};

/// What every lock of a run should look like: the agreed hash list and the
/// absolute expiry of each exchanged asset. Recipients come from the
/// instance's final owners.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LockPlan {
    pub hashes: Vec<HashValue>,
    pub expiry: BTreeMap<AssetId, Tick>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyPhase {
    /// After the L1 locks: checks L1 only.
    AfterL1Locks,
    /// After the L2 locks: checks both ledgers.
    AfterL2Locks,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mismatch {
    NotLocked(AssetId),
    Hash(AssetId),
    Recipients(AssetId),
    Expiry(AssetId),
}

impl Mismatch {
    pub fn asset(&self) -> &AssetId {
        match self {
            Mismatch::NotLocked(a) | Mismatch::Hash(a) | Mismatch::Recipients(a) | Mismatch::Expiry(a) => a,
        }
    }
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::NotLocked(a) => write!(f, "{a} not locked"),
            Mismatch::Hash(a) => write!(f, "{a} locked under another hash"),
            Mismatch::Recipients(a) => write!(f, "{a} locked for other recipients"),
            Mismatch::Expiry(a) => write!(f, "{a} locked with another expiry"),
        }
    }
}

/// Whether one lock matches the plan in hash, recipients and expiry.
pub fn check_entry(instance: &GaeInstance, plan: &LockPlan, entry: &LockEntry) -> Result<(), Mismatch> {
    let a = &entry.asset;
    if entry.hashes != plan.hashes {
        return Err(Mismatch::Hash(a.clone()));
    }
    if &entry.recipients != instance.fo(a) {
        return Err(Mismatch::Recipients(a.clone()));
    }
    if Some(&entry.expiry) != plan.expiry.get(a) {
        return Err(Mismatch::Expiry(a.clone()));
    }
    Ok(())
}

/// The first exchanged asset of `state`'s ledger whose lock is missing or
/// off-plan.
pub fn ledger_mismatch(instance: &GaeInstance, plan: &LockPlan, state: &LedgerState) -> Option<Mismatch> {
    instance
        .exchange(state.ledger)
        .iter()
        .find_map(|a| match state.read_lock(a) {
            None => Some(Mismatch::NotLocked(a.clone())),
            Some(entry) => check_entry(instance, plan, entry).err(),
        })
}

pub fn first_mismatch(
    instance: &GaeInstance,
    plan: &LockPlan,
    l1: &LedgerState,
    l2: &LedgerState,
    phase: VerifyPhase,
) -> Option<Mismatch> {
    debug_assert_eq!((l1.ledger, l2.ledger), (Ledger::L1, Ledger::L2));
    ledger_mismatch(instance, plan, l1).or_else(|| match phase {
        VerifyPhase::AfterL1Locks => None,
        VerifyPhase::AfterL2Locks => ledger_mismatch(instance, plan, l2),
    })
}

/// True iff every exchanged asset of the phase's ledger(s) carries a lock
/// with the planned hash, the final owners as recipients, and the planned
/// expiry.
pub fn verify_locks(
    instance: &GaeInstance,
    plan: &LockPlan,
    l1: &LedgerState,
    l2: &LedgerState,
    phase: VerifyPhase,
) -> bool {
    first_mismatch(instance, plan, l1, l2, phase).is_none()
}
