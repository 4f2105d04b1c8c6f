//! Rebuilds a ledger's ownership map from its event lines alone.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{AssetId, Ledger, OwnerSet, OwnershipMap, PartyId};

use super::{Event, EventKind, EventParseError, HashValue, Preimage, Source};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error(transparent)]
    Parse(#[from] EventParseError),
    #[error("event {0:?} names an asset the ledger does not hold")]
    UnknownAsset(String),
    #[error("event {0:?} refers to a lock that is not active")]
    NoLock(String),
    #[error("event {0:?} locks an asset that is already locked")]
    DoubleLock(String),
    #[error("event {0:?} is missing or has a malformed field")]
    Malformed(String),
    #[error("event {0:?} pays out to other parties than the lock named")]
    WrongRecipients(String),
    #[error("event {0:?} opens a lock without all its preimages")]
    Unopened(String),
    #[error("ticks go backwards at {0:?}")]
    TimeTravel(String),
}

struct Pending {
    hashes: BTreeSet<HashValue>,
    opened: BTreeSet<HashValue>,
    recipients: OwnerSet,
}

fn parties(v: &str) -> OwnerSet {
    v.split(',').filter(|s| !s.is_empty()).map(PartyId::from).collect()
}

/// Applies the `ledger` events among `events` to `initial`, checking that
/// each claim opens every hash of an active lock and pays the recipients
/// that lock named.
pub fn replay(ledger: Ledger, initial: &OwnershipMap, events: &[Event]) -> Result<OwnershipMap, ReplayError> {
    let mut owners = initial.on_ledger(ledger);
    let mut locks: BTreeMap<AssetId, Pending> = BTreeMap::new();
    let mut last = 0;
    for e in events {
        let line = || e.to_line();
        if e.tick < last {
            return Err(ReplayError::TimeTravel(line()));
        }
        last = e.tick;
        if e.source != Source::Ledger(ledger) {
            continue;
        }
        let assets: Vec<AssetId> = e.assets.iter().map(|n| AssetId::new(ledger, n)).collect();
        for a in &assets {
            if !owners.contains(a) {
                return Err(ReplayError::UnknownAsset(line()));
            }
        }
        match e.kind {
            EventKind::Lock => {
                let hashes = e
                    .get("hash")
                    .ok_or_else(|| ReplayError::Malformed(line()))?
                    .split(',')
                    .map(|h| HashValue::from_hex(h).ok_or_else(|| ReplayError::Malformed(line())))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                for a in assets {
                    let to = e
                        .get(&format!("to.{}", a.name))
                        .ok_or_else(|| ReplayError::Malformed(line()))?;
                    let pending = Pending {
                        hashes: hashes.clone(),
                        opened: BTreeSet::new(),
                        recipients: parties(to),
                    };
                    if locks.insert(a, pending).is_some() {
                        return Err(ReplayError::DoubleLock(line()));
                    }
                }
            }
            EventKind::Reveal | EventKind::Claim => {
                let shown: Vec<HashValue> = e
                    .get("preimage")
                    .ok_or_else(|| ReplayError::Malformed(line()))?
                    .split(',')
                    .map(|p| {
                        Preimage::from_hex(p)
                            .map(|p| p.digest())
                            .ok_or_else(|| ReplayError::Malformed(line()))
                    })
                    .collect::<Result<_, _>>()?;
                for a in assets {
                    let lock = locks.get_mut(&a).ok_or_else(|| ReplayError::NoLock(line()))?;
                    lock.opened.extend(shown.iter().filter(|h| lock.hashes.contains(h)));
                    if e.kind == EventKind::Reveal {
                        continue;
                    }
                    if lock.opened != lock.hashes {
                        return Err(ReplayError::Unopened(line()));
                    }
                    let to = e
                        .get(&format!("to.{}", a.name))
                        .map(parties)
                        .ok_or_else(|| ReplayError::Malformed(line()))?;
                    if to != lock.recipients {
                        return Err(ReplayError::WrongRecipients(line()));
                    }
                    locks.remove(&a);
                    owners.insert(a, to);
                }
            }
            EventKind::Unlock => {
                for a in assets {
                    locks.remove(&a).ok_or_else(|| ReplayError::NoLock(line()))?;
                }
            }
            _ => {}
        }
    }
    Ok(owners)
}

/// As [`replay`], over the event lines of a machine-format report; lines that
/// are not event lines are skipped.
pub fn replay_lines<'a>(
    ledger: Ledger,
    initial: &OwnershipMap,
    lines: impl IntoIterator<Item = &'a str>,
) -> Result<OwnershipMap, ReplayError> {
    let events = lines
        .into_iter()
        .filter(|l| super::event::is_event_line(l))
        .map(Event::parse_line)
        .collect::<Result<Vec<_>, _>>()?;
    replay(ledger, initial, &events)
}
