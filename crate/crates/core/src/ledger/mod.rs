//! One append-only ledger holding co-owned assets, with a hash-time-lock
//! contract that requires consent from every current co-owner.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{join_parties, AssetId, Ledger, OwnerSet, OwnershipMap, PartyId};

mod digest;
pub mod event;
mod replay;

pub use digest::{HashValue, Preimage};
pub use event::{Event, EventKind, EventParseError, Source};
pub use replay::{replay, replay_lines, ReplayError};

/// Logical time, shared by both ledgers.
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum LockMode {
    /// Each asset is its own transaction.
    #[default]
    PerAsset,
    /// All assets in one all-or-nothing transaction.
    SingleTransaction,
}

impl LockMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LockMode::PerAsset => "per-asset",
            LockMode::SingleTransaction => "single-transaction",
        }
    }
}

impl std::str::FromStr for LockMode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "per-asset" => Ok(LockMode::PerAsset),
            "single-transaction" => Ok(LockMode::SingleTransaction),
            _ => Err(()),
        }
    }
}

/// Who may submit the preimage for a lock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClaimPolicy {
    AnySubmitter,
    RecipientsOnly,
}

impl ClaimPolicy {
    fn as_str(self) -> &'static str {
        match self {
            ClaimPolicy::AnySubmitter => "any",
            ClaimPolicy::RecipientsOnly => "recipients",
        }
    }
}

/// A party's authorization of one exact lock payload; stands in for a
/// signature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConsentRecord {
    pub party: PartyId,
    pub payload: HashValue,
}

/// What a lock transaction asks for. Expiry ticks are absolute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockRequest {
    pub assets: BTreeSet<AssetId>,
    /// Every hash must be opened before the lock pays out.
    pub hashes: Vec<HashValue>,
    pub recipients: BTreeMap<AssetId, OwnerSet>,
    pub expiry: BTreeMap<AssetId, Tick>,
    pub policy: ClaimPolicy,
}

impl LockRequest {
    pub fn new(hashes: Vec<HashValue>, policy: ClaimPolicy) -> Self {
        Self {
            assets: BTreeSet::new(),
            hashes,
            recipients: BTreeMap::new(),
            expiry: BTreeMap::new(),
            policy,
        }
    }

    pub fn with_asset(mut self, asset: AssetId, recipients: OwnerSet, expiry: Tick) -> Self {
        self.recipients.insert(asset.clone(), recipients);
        self.expiry.insert(asset.clone(), expiry);
        self.assets.insert(asset);
        self
    }

    /// The sub-request covering one asset.
    pub fn for_asset(&self, asset: &AssetId) -> LockRequest {
        let mut out = LockRequest::new(self.hashes.clone(), self.policy);
        if let (Some(r), Some(e)) = (self.recipients.get(asset), self.expiry.get(asset)) {
            out = out.with_asset(asset.clone(), r.clone(), *e);
        }
        out
    }

    fn canonical(&self) -> String {
        let hashes: Vec<String> = self.hashes.iter().map(HashValue::to_hex).collect();
        let mut text = format!("lock;hash={};policy={}", hashes.join(","), self.policy.as_str());
        for a in &self.assets {
            let to = self.recipients.get(a).map(|r| join_parties(r, ",")).unwrap_or_default();
            let exp = self.expiry.get(a).copied().unwrap_or_default();
            text.push_str(&format!("\n{}:{};to={};exp={}", a.ledger, a.name, to, exp));
        }
        text
    }

    pub fn payload_digest(&self) -> HashValue {
        HashValue::of(self.canonical().as_bytes())
    }

    /// The consent records `party` must hand over for this request under
    /// `mode`: one for the whole batch, or one per asset.
    pub fn consent(&self, party: &PartyId, mode: LockMode) -> Vec<ConsentRecord> {
        match mode {
            LockMode::SingleTransaction => vec![ConsentRecord {
                party: party.clone(),
                payload: self.payload_digest(),
            }],
            LockMode::PerAsset => self
                .assets
                .iter()
                .map(|a| ConsentRecord {
                    party: party.clone(),
                    payload: self.for_asset(a).payload_digest(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockEntry {
    pub asset: AssetId,
    pub hashes: Vec<HashValue>,
    /// Preimages opened so far, parallel to `hashes`.
    pub revealed: Vec<Option<Preimage>>,
    pub recipients: OwnerSet,
    pub expiry: Tick,
    pub consents: BTreeSet<ConsentRecord>,
    pub created: Tick,
    pub policy: ClaimPolicy,
}

impl LockEntry {
    /// The first (for single-hash locks, the only) hash.
    pub fn hash(&self) -> HashValue {
        self.hashes[0]
    }

    pub fn pending(&self) -> usize {
        self.revealed.iter().filter(|r| r.is_none()).count()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("unknown asset {0}")]
    UnknownAsset(AssetId),
    #[error("missing consent of {party} for {asset}")]
    MissingConsent { asset: AssetId, party: PartyId },
    #[error("{0} is already locked")]
    AlreadyLocked(AssetId),
    #[error("expiry for {0} is not in the future")]
    ExpiryInPast(AssetId),
    #[error("lock request for {0} lacks recipients or expiry")]
    IncompleteRequest(AssetId),
    #[error("preimage does not match the lock on {0}")]
    HashMismatch(AssetId),
    #[error("lock on {0} has expired")]
    LockExpired(AssetId),
    #[error("{0} is not locked")]
    NotLocked(AssetId),
    #[error("{party} is not a recipient of {asset}")]
    NotRecipient { asset: AssetId, party: PartyId },
    #[error("lock on {0} has not expired")]
    NotExpired(AssetId),
    #[error("empty transaction")]
    EmptyTransaction,
    #[error("clock can only move forward")]
    ZeroAdvance,
}

#[derive(Clone, Debug)]
pub struct LedgerState {
    pub ledger: Ledger,
    owners: OwnershipMap,
    locks: BTreeMap<AssetId, LockEntry>,
    clock: Tick,
    events: Vec<Event>,
}

impl LedgerState {
    /// A ledger holding the given assets, at tick 0. Entries of `owners` that
    /// live on another ledger are dropped.
    pub fn new(ledger: Ledger, owners: &OwnershipMap) -> Self {
        Self {
            ledger,
            owners: owners.on_ledger(ledger),
            locks: BTreeMap::new(),
            clock: 0,
            events: Vec::new(),
        }
    }

    pub fn owners(&self) -> &OwnershipMap {
        &self.owners
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn locks(&self) -> impl Iterator<Item = &LockEntry> {
        self.locks.values()
    }

    pub fn read_lock(&self, asset: &AssetId) -> Option<&LockEntry> {
        self.locks.get(asset)
    }

    pub fn advance_clock(&mut self, ticks: Tick) -> Result<(), LedgerError> {
        if ticks == 0 {
            return Err(LedgerError::ZeroAdvance);
        }
        self.clock += ticks;
        Ok(())
    }

    /// Every preimage published by a claim or reveal, with its tick.
    pub fn published(&self) -> impl Iterator<Item = (Tick, Preimage)> + '_ {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Claim | EventKind::Reveal))
            .flat_map(|e| {
                let tick = e.tick;
                e.get("preimage")
                    .into_iter()
                    .flat_map(|v| v.split(','))
                    .filter_map(Preimage::from_hex)
                    .map(move |p| (tick, p))
            })
    }

    fn event(&self, kind: EventKind) -> Event {
        Event::new(self.clock, Source::Ledger(self.ledger), kind)
    }

    fn reject(&mut self, by: &PartyId, op: &str, assets: &[&AssetId], err: &LedgerError) {
        let mut e = self.event(EventKind::Reject);
        for a in assets {
            e = e.asset(a.name.clone());
        }
        let e = e
            .detail("by", by.as_str())
            .detail("op", op)
            .detail("reason", err.to_string());
        self.events.push(e);
    }

    fn check_lock(
        &self,
        req: &LockRequest,
        asset: &AssetId,
        consents: &BTreeSet<ConsentRecord>,
        payload: HashValue,
    ) -> Result<(), LedgerError> {
        let owners = self
            .owners
            .get(asset)
            .ok_or_else(|| LedgerError::UnknownAsset(asset.clone()))?;
        if self.locks.contains_key(asset) {
            return Err(LedgerError::AlreadyLocked(asset.clone()));
        }
        let (Some(to), Some(&exp)) = (req.recipients.get(asset), req.expiry.get(asset)) else {
            return Err(LedgerError::IncompleteRequest(asset.clone()));
        };
        if to.is_empty() || req.hashes.is_empty() {
            return Err(LedgerError::IncompleteRequest(asset.clone()));
        }
        if exp <= self.clock {
            return Err(LedgerError::ExpiryInPast(asset.clone()));
        }
        for party in owners {
            let record = ConsentRecord {
                party: party.clone(),
                payload,
            };
            if !consents.contains(&record) {
                return Err(LedgerError::MissingConsent {
                    asset: asset.clone(),
                    party: party.clone(),
                });
            }
        }
        Ok(())
    }

    fn install(&mut self, req: &LockRequest, asset: &AssetId, consents: &BTreeSet<ConsentRecord>, payload: HashValue) {
        let owners = self.owners.get(asset).expect("checked");
        let kept: BTreeSet<ConsentRecord> = consents
            .iter()
            .filter(|c| c.payload == payload && owners.contains(&c.party))
            .cloned()
            .collect();
        self.locks.insert(
            asset.clone(),
            LockEntry {
                asset: asset.clone(),
                hashes: req.hashes.clone(),
                revealed: vec![None; req.hashes.len()],
                recipients: req.recipients[asset].clone(),
                expiry: req.expiry[asset],
                consents: kept,
                created: self.clock,
                policy: req.policy,
            },
        );
    }

    fn lock_event(&self, by: &PartyId, req: &LockRequest, assets: &[&AssetId]) -> Event {
        let mut e = self.event(EventKind::Lock);
        let mut signers = BTreeSet::new();
        for a in assets {
            e = e.asset(a.name.clone());
            signers.extend(self.locks[*a].consents.iter().map(|c| c.party.clone()));
        }
        let hashes: Vec<String> = req.hashes.iter().map(HashValue::to_hex).collect();
        e = e
            .detail("by", by.as_str())
            .detail("hash", hashes.join(","))
            .detail("consents", join_parties(&signers, ","))
            .detail("policy", req.policy.as_str());
        for a in assets {
            e = e.detail(format!("to.{}", a.name), join_parties(&req.recipients[*a], ","));
        }
        for a in assets {
            e = e.detail(format!("exp.{}", a.name), req.expiry[*a].to_string());
        }
        e
    }

    /// Locks the request's assets. In per-asset mode each asset stands alone:
    /// the successful ones are locked even if others fail, and the first
    /// failure is returned. In single-transaction mode nothing changes unless
    /// every asset passes.
    pub fn lock_assets(
        &mut self,
        submitter: &PartyId,
        req: &LockRequest,
        consents: &[ConsentRecord],
        mode: LockMode,
    ) -> Result<(), LedgerError> {
        let consents: BTreeSet<ConsentRecord> = consents.iter().cloned().collect();
        let all: Vec<&AssetId> = req.assets.iter().collect();
        if all.is_empty() {
            let err = LedgerError::EmptyTransaction;
            self.reject(submitter, "lock", &[], &err);
            return Err(err);
        }
        match mode {
            LockMode::SingleTransaction => {
                let payload = req.payload_digest();
                for a in &all {
                    if let Err(err) = self.check_lock(req, a, &consents, payload) {
                        self.reject(submitter, "lock", &all, &err);
                        return Err(err);
                    }
                }
                for a in &all {
                    self.install(req, a, &consents, payload);
                }
                let e = self.lock_event(submitter, req, &all);
                self.events.push(e);
                Ok(())
            }
            LockMode::PerAsset => {
                let mut first = None;
                for a in all {
                    let payload = req.for_asset(a).payload_digest();
                    match self.check_lock(req, a, &consents, payload) {
                        Ok(()) => {
                            self.install(req, a, &consents, payload);
                            let e = self.lock_event(submitter, req, &[a]);
                            self.events.push(e);
                        }
                        Err(err) => {
                            self.reject(submitter, "lock", &[a], &err);
                            first.get_or_insert(err);
                        }
                    }
                }
                first.map_or(Ok(()), Err)
            }
        }
    }

    /// Which hash slots each preimage opens on `asset`'s lock.
    fn check_claim(
        &self,
        submitter: &PartyId,
        asset: &AssetId,
        preimages: &[Preimage],
    ) -> Result<Vec<usize>, LedgerError> {
        let entry = self
            .locks
            .get(asset)
            .ok_or_else(|| LedgerError::NotLocked(asset.clone()))?;
        if self.clock >= entry.expiry {
            return Err(LedgerError::LockExpired(asset.clone()));
        }
        if entry.policy == ClaimPolicy::RecipientsOnly && !entry.recipients.contains(submitter) {
            return Err(LedgerError::NotRecipient {
                asset: asset.clone(),
                party: submitter.clone(),
            });
        }
        if preimages.is_empty() {
            return Err(LedgerError::HashMismatch(asset.clone()));
        }
        preimages
            .iter()
            .map(|p| {
                let h = p.digest();
                entry
                    .hashes
                    .iter()
                    .position(|x| *x == h)
                    .ok_or_else(|| LedgerError::HashMismatch(asset.clone()))
            })
            .collect()
    }

    fn open(&mut self, submitter: &PartyId, asset: &AssetId, preimages: &[Preimage], slots: &[usize]) -> Event {
        let entry = self.locks.get_mut(asset).expect("checked");
        for (p, &i) in preimages.iter().zip(slots) {
            entry.revealed[i] = Some(p.clone());
        }
        let shown: Vec<String> = preimages.iter().map(Preimage::to_hex).collect();
        let pending = entry.pending();
        let base = Event::new(self.clock, Source::Ledger(self.ledger), EventKind::Claim)
            .asset(asset.name.clone())
            .detail("by", submitter.as_str())
            .detail("preimage", shown.join(","));
        if pending > 0 {
            let mut e = base.detail("pending", pending.to_string());
            e.kind = EventKind::Reveal;
            return e;
        }
        let entry = self.locks.remove(asset).expect("checked");
        let e = base.detail(format!("to.{}", asset.name), join_parties(&entry.recipients, ","));
        self.owners.insert(asset.clone(), entry.recipients);
        e
    }

    /// Submits preimages against the locks on `assets`. A lock guarded by
    /// several hashes pays out once all of them have been opened; until
    /// then each submission is logged as a reveal. Per-asset mode handles
    /// assets independently and returns the first failure; single-transaction
    /// mode is all-or-nothing.
    pub fn claim_assets(
        &mut self,
        submitter: &PartyId,
        assets: &[AssetId],
        preimages: &[Preimage],
        mode: LockMode,
    ) -> Result<(), LedgerError> {
        if assets.is_empty() {
            let err = LedgerError::EmptyTransaction;
            self.reject(submitter, "claim", &[], &err);
            return Err(err);
        }
        match mode {
            LockMode::SingleTransaction => {
                let mut plan = Vec::new();
                for a in assets {
                    match self.check_claim(submitter, a, preimages) {
                        Ok(slots) => plan.push(slots),
                        Err(err) => {
                            let all: Vec<&AssetId> = assets.iter().collect();
                            self.reject(submitter, "claim", &all, &err);
                            return Err(err);
                        }
                    }
                }
                for (a, slots) in assets.iter().zip(plan) {
                    let e = self.open(submitter, a, preimages, &slots);
                    self.events.push(e);
                }
                Ok(())
            }
            LockMode::PerAsset => {
                let mut first = None;
                for a in assets {
                    match self.check_claim(submitter, a, preimages) {
                        Ok(slots) => {
                            let e = self.open(submitter, a, preimages, &slots);
                            self.events.push(e);
                        }
                        Err(err) => {
                            self.reject(submitter, "claim", &[a], &err);
                            first.get_or_insert(err);
                        }
                    }
                }
                first.map_or(Ok(()), Err)
            }
        }
    }

    /// Releases expired locks, all-or-nothing. Owners keep the asset.
    pub fn unlock_assets(&mut self, submitter: &PartyId, assets: &[AssetId]) -> Result<(), LedgerError> {
        let all: Vec<&AssetId> = assets.iter().collect();
        let check = |a: &AssetId| match self.locks.get(a) {
            None => Err(LedgerError::NotLocked(a.clone())),
            Some(entry) if self.clock < entry.expiry => Err(LedgerError::NotExpired(a.clone())),
            Some(_) => Ok(()),
        };
        let verdict = if all.is_empty() {
            Err(LedgerError::EmptyTransaction)
        } else {
            all.iter().try_for_each(|a| check(a))
        };
        if let Err(err) = verdict {
            self.reject(submitter, "unlock", &all, &err);
            return Err(err);
        }
        let mut e = self.event(EventKind::Unlock);
        for a in &all {
            self.locks.remove(*a);
            e = e.asset(a.name.clone());
        }
        e = e.detail("by", submitter.as_str());
        for a in &all {
            e = e.detail(
                format!("to.{}", a.name),
                join_parties(self.owners.get(a).expect("known"), ","),
            );
        }
        self.events.push(e);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::owner_set;
    use proptest::prelude::*;

    fn m() -> AssetId {
        AssetId::new(Ledger::L1, "M")
    }

    fn r() -> AssetId {
        AssetId::new(Ledger::L1, "R")
    }

    fn px(s: &str) -> PartyId {
        PartyId::from(s)
    }

    fn state() -> LedgerState {
        let owners: OwnershipMap = [(m(), owner_set(["X", "W"])), (r(), owner_set(["W"]))]
            .into_iter()
            .collect();
        LedgerState::new(Ledger::L1, &owners)
    }

    fn secret() -> Preimage {
        Preimage::new(b"joint secret".to_vec()).unwrap()
    }

    fn request(assets: &[AssetId], expiry: Tick) -> LockRequest {
        let mut req = LockRequest::new(vec![secret().digest()], ClaimPolicy::AnySubmitter);
        for a in assets {
            req = req.with_asset(a.clone(), owner_set(["Y"]), expiry);
        }
        req
    }

    fn consents(req: &LockRequest, parties: &[&str], mode: LockMode) -> Vec<ConsentRecord> {
        parties.iter().flat_map(|p| req.consent(&px(p), mode)).collect()
    }

    #[test]
    fn jointly_owned_lock_needs_every_owner() {
        let mut s = state();
        let req = request(&[m()], 8);
        assert_eq!(
            s.lock_assets(
                &px("X"),
                &req,
                &consents(&req, &["X"], LockMode::PerAsset),
                LockMode::PerAsset
            ),
            Err(LedgerError::MissingConsent {
                asset: m(),
                party: px("W")
            })
        );
        assert!(s.read_lock(&m()).is_none());
        s.lock_assets(
            &px("X"),
            &req,
            &consents(&req, &["X", "W"], LockMode::PerAsset),
            LockMode::PerAsset,
        )
        .unwrap();
        let entry = s.read_lock(&m()).unwrap();
        assert_eq!(entry.hash(), secret().digest());
        assert_eq!(entry.recipients, owner_set(["Y"]));
        assert_eq!(s.owners().get(&m()), Some(&owner_set(["X", "W"])));
    }

    #[test]
    fn consent_is_bound_to_payload() {
        let mut s = state();
        let signed = request(&[m()], 8);
        let mut other = signed.clone();
        other.recipients.insert(m(), owner_set(["Z"]));
        let c = consents(&signed, &["X", "W"], LockMode::PerAsset);
        assert!(matches!(
            s.lock_assets(&px("X"), &other, &c, LockMode::PerAsset),
            Err(LedgerError::MissingConsent { .. })
        ));
    }

    #[test]
    fn batch_lock_is_all_or_nothing() {
        let mut s = state();
        let first = request(&[r()], 8);
        s.lock_assets(
            &px("W"),
            &first,
            &consents(&first, &["W"], LockMode::PerAsset),
            LockMode::PerAsset,
        )
        .unwrap();
        let batch = request(&[m(), r()], 8);
        let c = consents(&batch, &["X", "W"], LockMode::SingleTransaction);
        assert_eq!(
            s.lock_assets(&px("X"), &batch, &c, LockMode::SingleTransaction),
            Err(LedgerError::AlreadyLocked(r()))
        );
        assert!(s.read_lock(&m()).is_none());
        assert_eq!(s.events().last().unwrap().kind, EventKind::Reject);
    }

    #[test]
    fn expiry_must_be_ahead() {
        let mut s = state();
        s.advance_clock(3).unwrap();
        let req = request(&[m()], 3);
        assert_eq!(
            s.lock_assets(
                &px("X"),
                &req,
                &consents(&req, &["X", "W"], LockMode::PerAsset),
                LockMode::PerAsset
            ),
            Err(LedgerError::ExpiryInPast(m()))
        );
    }

    fn locked(expiry: Tick) -> LedgerState {
        let mut s = state();
        let req = request(&[m()], expiry);
        s.lock_assets(
            &px("X"),
            &req,
            &consents(&req, &["X", "W"], LockMode::PerAsset),
            LockMode::PerAsset,
        )
        .unwrap();
        s
    }

    #[test]
    fn claim_moves_to_recipients_not_submitter() {
        let mut s = locked(4);
        s.claim_assets(&px("Z"), &[m()], &[secret()], LockMode::PerAsset)
            .unwrap();
        assert_eq!(s.owners().get(&m()), Some(&owner_set(["Y"])));
        assert!(s.read_lock(&m()).is_none());
        assert_eq!(s.published().count(), 1);
    }

    #[test]
    fn wrong_preimage_changes_nothing() {
        let mut s = locked(4);
        let bad = Preimage::new(b"guess".to_vec()).unwrap();
        assert_eq!(
            s.claim_assets(&px("Y"), &[m()], &[bad], LockMode::PerAsset),
            Err(LedgerError::HashMismatch(m()))
        );
        assert!(s.read_lock(&m()).is_some());
        assert_eq!(s.owners().get(&m()), Some(&owner_set(["X", "W"])));
    }

    #[test]
    fn expiry_boundaries() {
        // Claims need clock < expiry; unlocks need clock >= expiry.
        for clock in 1..6 {
            let mut s = locked(4);
            s.advance_clock(clock).unwrap();
            let claim = s
                .clone()
                .claim_assets(&px("Y"), &[m()], &[secret()], LockMode::PerAsset);
            let unlock = s.clone().unlock_assets(&px("X"), &[m()]);
            assert_eq!(claim.is_ok(), clock < 4, "claim at {clock}");
            assert_eq!(unlock.is_ok(), clock >= 4, "unlock at {clock}");
        }
        let mut s = locked(4);
        s.advance_clock(3).unwrap();
        assert_eq!(s.unlock_assets(&px("X"), &[m()]), Err(LedgerError::NotExpired(m())));
        s.advance_clock(1).unwrap();
        assert_eq!(
            s.clone()
                .claim_assets(&px("Y"), &[m()], &[secret()], LockMode::PerAsset),
            Err(LedgerError::LockExpired(m()))
        );
        s.unlock_assets(&px("X"), &[m()]).unwrap();
        assert_eq!(s.owners().get(&m()), Some(&owner_set(["X", "W"])));
        assert!(s.read_lock(&m()).is_none());
    }

    #[test]
    fn unlock_needs_a_lock() {
        let mut s = state();
        assert_eq!(s.unlock_assets(&px("X"), &[m()]), Err(LedgerError::NotLocked(m())));
        assert_eq!(s.advance_clock(0), Err(LedgerError::ZeroAdvance));
    }

    #[test]
    fn multi_hash_lock_pays_after_all_reveals() {
        let a = Preimage::new(b"first".to_vec()).unwrap();
        let b = Preimage::new(b"second".to_vec()).unwrap();
        let mut s = state();
        let mut req = LockRequest::new(vec![a.digest(), b.digest()], ClaimPolicy::RecipientsOnly);
        req = req.with_asset(m(), owner_set(["Y"]), 8);
        s.lock_assets(
            &px("X"),
            &req,
            &consents(&req, &["X", "W"], LockMode::PerAsset),
            LockMode::PerAsset,
        )
        .unwrap();
        assert!(matches!(
            s.claim_assets(&px("X"), &[m()], std::slice::from_ref(&a), LockMode::PerAsset),
            Err(LedgerError::NotRecipient { .. })
        ));
        s.claim_assets(&px("Y"), &[m()], &[a], LockMode::PerAsset).unwrap();
        assert_eq!(s.events().last().unwrap().kind, EventKind::Reveal);
        assert_eq!(s.read_lock(&m()).unwrap().pending(), 1);
        s.claim_assets(&px("Y"), &[m()], &[b], LockMode::PerAsset).unwrap();
        assert_eq!(s.owners().get(&m()), Some(&owner_set(["Y"])));
    }

    proptest! {
        #[test]
        fn only_the_true_preimage_opens(bytes in proptest::collection::vec(any::<u8>(), 1..40)) {
            let mut s = locked(4);
            let guess = Preimage::new(bytes).unwrap();
            let res = s.claim_assets(&px("Y"), &[m()], std::slice::from_ref(&guess), LockMode::PerAsset);
            prop_assert_eq!(res.is_ok(), guess == secret());
        }
    }
}
