//! The step-by-step driver shared by all four protocols.
//!
//! Tick layout: commit and L1 locks at 0, L2 locks at 1, the L2 claim phase
//! at 2 (or at the joint release tick), then one tick at a time until every
//! lock is claimed or released. Within a tick, partner relocks go first, then
//! L2 claims, L1 claims and unlocks, each in party order.

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{Collusion, Role};
use crate::ledger::{
    ClaimPolicy, Event, EventKind, HashValue, LedgerState, LockEntry, LockMode, LockRequest, Preimage, Source, Tick,
};
use crate::model::{
    check_atomicity, initial_owner_union, join_parties, AssetId, GaeInstance, Ledger, OwnerSet, PartyId,
};
use crate::mpc::{sample_secrets, MpcBehavior, MpcError, MpcSession, Phase};

use super::plan::{Protocol, ProtocolPlan};
use super::verify::{check_entry, LockPlan, Mismatch, VerifyPhase};
use super::{RunConfig, RunOutcome};

const T_LOCK1: Tick = 0;
const T_LOCK2: Tick = 1;
const T_CLAIM: Tick = 2;

pub(super) struct Engine<'a> {
    inst: &'a GaeInstance,
    plan: ProtocolPlan,
    cfg: &'a RunConfig,
    roles: BTreeMap<PartyId, Role>,
    o1: OwnerSet,
    l1: LedgerState,
    l2: LedgerState,
    log: Vec<Event>,
    seen: [usize; 2],
    knows: BTreeMap<PartyId, BTreeSet<Preimage>>,
    own: BTreeMap<PartyId, Preimage>,
    lock_plan: LockPlan,
    abstained: BTreeSet<PartyId>,
    relocked: BTreeSet<AssetId>,
    session: Option<MpcSession>,
    release: Option<Tick>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(
        inst: &'a GaeInstance,
        plan: ProtocolPlan,
        cfg: &'a RunConfig,
        roles: BTreeMap<PartyId, Role>,
    ) -> Self {
        let mut lock_plan = LockPlan::default();
        for a in &inst.exchange1 {
            lock_plan.expiry.insert(a.clone(), T_LOCK1 + plan.schedule.per_asset[a]);
        }
        for a in &inst.exchange2 {
            lock_plan.expiry.insert(a.clone(), T_LOCK2 + plan.schedule.per_asset[a]);
        }
        Self {
            inst,
            o1: initial_owner_union(inst),
            l1: LedgerState::new(Ledger::L1, &inst.io1),
            l2: LedgerState::new(Ledger::L2, &inst.io2),
            plan,
            cfg,
            roles,
            log: Vec::new(),
            seen: [0, 0],
            knows: inst.parties.iter().map(|p| (p.clone(), BTreeSet::new())).collect(),
            own: BTreeMap::new(),
            lock_plan,
            abstained: BTreeSet::new(),
            relocked: BTreeSet::new(),
            session: None,
            release: None,
        }
    }

    fn protocol(&self) -> Protocol {
        self.plan.protocol
    }

    fn mode(&self) -> LockMode {
        self.plan.lock_mode
    }

    fn policy(&self) -> ClaimPolicy {
        if self.protocol().uses_mpc() {
            ClaimPolicy::AnySubmitter
        } else {
            ClaimPolicy::RecipientsOnly
        }
    }

    fn role(&self, p: &PartyId) -> &Role {
        &self.roles[p]
    }

    fn clock(&self) -> Tick {
        self.l1.clock()
    }

    fn ledger(&self, l: Ledger) -> &LedgerState {
        match l {
            Ledger::L1 => &self.l1,
            Ledger::L2 => &self.l2,
        }
    }

    fn ledger_mut(&mut self, l: Ledger) -> &mut LedgerState {
        match l {
            Ledger::L1 => &mut self.l1,
            Ledger::L2 => &mut self.l2,
        }
    }

    /// Moves fresh ledger events into the merged log.
    fn sync(&mut self) {
        for (i, state) in [&self.l1, &self.l2].into_iter().enumerate() {
            self.log.extend_from_slice(&state.events()[self.seen[i]..]);
            self.seen[i] = state.events().len();
        }
    }

    fn note(&mut self, e: Event) {
        self.sync();
        self.log.push(e);
    }

    fn advance_to(&mut self, tick: Tick) {
        let now = self.clock();
        if tick > now {
            self.l1.advance_clock(tick - now).expect("positive");
            self.l2.advance_clock(tick - now).expect("positive");
        }
    }

    fn abstain(&mut self, p: &PartyId, step: u8, reason: String, asset: Option<&AssetId>) {
        if !self.abstained.insert(p.clone()) {
            return;
        }
        let mut e = Event::new(self.clock(), Source::Party, EventKind::Abstain);
        if let Some(a) = asset {
            e = e.asset(a.name.clone());
        }
        e = e
            .detail("by", p.as_str())
            .detail("step", step.to_string())
            .detail("reason", reason);
        self.note(e);
    }

    pub(super) fn run(mut self) -> RunOutcome {
        if self.commit() {
            self.lock_ledger(Ledger::L1);
            self.advance_to(T_LOCK2);
            self.lock_ledger(Ledger::L2);
            self.advance_to(T_CLAIM);
            if self.protocol().uses_mpc() {
                if self.release_joint() {
                    self.share();
                    self.claim_round(Ledger::L2);
                }
            } else {
                self.claim_gate();
                self.claim_round(Ledger::L2);
            }
            self.endgame();
        }
        self.finish()
    }

    /// Step 1. Returns whether there is anything to lock with.
    fn commit(&mut self) -> bool {
        let o1: Vec<PartyId> = self.o1.iter().cloned().collect();
        let secrets = sample_secrets(&o1, self.cfg.seed);
        match self.protocol() {
            Protocol::Mphtlc => {
                let behaviors: BTreeMap<PartyId, MpcBehavior> =
                    o1.iter().map(|p| (p.clone(), self.role(p).mpc_behavior(1))).collect();
                let mut session = MpcSession::new(self.o1.clone());
                session
                    .run_f1(&secrets, &behaviors, T_LOCK1)
                    .expect("secrets cover the participants");
                for e in session.transcript().to_vec() {
                    self.note(e);
                }
                let Some(h) = session.hash_output() else {
                    return false;
                };
                self.lock_plan.hashes = vec![h];
                self.session = Some(session);
                true
            }
            _ if o1.iter().any(|p| !self.role(p).active_at(1)) => false,
            Protocol::Htlc | Protocol::HtlcMs => {
                let s = Preimage::new(secrets[0].value.clone()).expect("non-empty");
                let h = s.digest();
                for p in &o1 {
                    self.knows.get_mut(p).expect("party").insert(s.clone());
                }
                let kind = if o1.len() > 1 {
                    EventKind::Agree
                } else {
                    EventKind::Commit
                };
                let e = Event::new(T_LOCK1, Source::Offchain, kind)
                    .detail("by", join_parties(&o1, ","))
                    .detail("hash", h.to_hex());
                self.note(e);
                self.lock_plan.hashes = vec![h];
                true
            }
            Protocol::HtlcMk => {
                for s in secrets {
                    let x = Preimage::new(s.value).expect("non-empty");
                    let h = x.digest();
                    self.knows.get_mut(&s.party).expect("party").insert(x.clone());
                    self.own.insert(s.party.clone(), x);
                    self.lock_plan.hashes.push(h);
                    let e = Event::new(T_LOCK1, Source::Offchain, EventKind::Commit)
                        .detail("by", s.party.as_str())
                        .detail("hash", h.to_hex());
                    self.note(e);
                }
                true
            }
        }
    }

    /// What `p` finds wrong with the locks so far. Coalition members accept
    /// their own lock of a target in place of the planned one.
    fn gate(&self, p: &PartyId, phase: VerifyPhase) -> Option<Mismatch> {
        let states = match phase {
            VerifyPhase::AfterL1Locks => vec![&self.l1],
            VerifyPhase::AfterL2Locks => vec![&self.l1, &self.l2],
        };
        let collusion = self.role(p).collusion();
        states.into_iter().find_map(|state| {
            self.inst.exchange(state.ledger).iter().find_map(|a| {
                let Some(entry) = state.read_lock(a) else {
                    return Some(Mismatch::NotLocked(a.clone()));
                };
                let own = collusion
                    .and_then(|c| c.targets.get(a))
                    .is_some_and(|to| &entry.recipients == to && entry.hashes == self.lock_plan.hashes);
                if own {
                    None
                } else {
                    check_entry(self.inst, &self.lock_plan, entry).err()
                }
            })
        })
    }

    /// The collusion that would lock `asset` for the coalition now, if any.
    fn immediate_relock(&self, asset: &AssetId) -> Option<&Collusion> {
        self.inst.io(asset).iter().find_map(|p| match self.role(p) {
            Role::Partner(c) if !c.after_lapse && c.targets.contains_key(asset) => Some(c),
            _ => None,
        })
    }

    fn request(&self, assets: &[(AssetId, OwnerSet)]) -> LockRequest {
        let mut req = LockRequest::new(self.lock_plan.hashes.clone(), self.policy());
        for (a, to) in assets {
            req = req.with_asset(a.clone(), to.clone(), self.lock_plan.expiry[a]);
        }
        req
    }

    /// Steps 2 and 3.
    fn lock_ledger(&mut self, ledger: Ledger) {
        let step = self.protocol().lock_step(ledger);
        let assets: Vec<AssetId> = self.inst.exchange(ledger).iter().cloned().collect();
        // (asset, recipients, coalition when off-plan)
        let proposals: Vec<(AssetId, OwnerSet, Option<OwnerSet>)> = assets
            .iter()
            .map(|a| match self.immediate_relock(a) {
                Some(c) => (a.clone(), c.targets[a].clone(), Some(c.coalition())),
                None => (a.clone(), self.inst.fo(a).clone(), None),
            })
            .collect();
        let owners: BTreeSet<PartyId> = assets.iter().flat_map(|a| self.inst.io(a).iter().cloned()).collect();
        let mut objections: BTreeMap<PartyId, Mismatch> = BTreeMap::new();
        if ledger == Ledger::L2 {
            for p in &owners {
                if !self.role(p).active_at(step) {
                    continue;
                }
                if let Some(m) = self.gate(p, VerifyPhase::AfterL1Locks) {
                    objections.insert(p.clone(), m);
                }
            }
            for (p, m) in &objections {
                self.abstain(p, step, m.to_string(), Some(m.asset()));
            }
        }
        let willing = |this: &Self, p: &PartyId, coalition: &Option<OwnerSet>| -> bool {
            this.role(p).active_at(step)
                && match coalition {
                    Some(c) => c.contains(p) && !objections.contains_key(p),
                    None => !objections.contains_key(p),
                }
        };
        match self.mode() {
            LockMode::PerAsset => {
                for (a, to, coalition) in &proposals {
                    let signers: Vec<PartyId> = self
                        .inst
                        .io(a)
                        .iter()
                        .filter(|p| willing(self, p, coalition))
                        .cloned()
                        .collect();
                    let Some(submitter) = signers.first().cloned() else {
                        continue;
                    };
                    let req = self.request(&[(a.clone(), to.clone())]);
                    let consents: Vec<_> = signers
                        .iter()
                        .flat_map(|p| req.consent(p, LockMode::PerAsset))
                        .collect();
                    let _ = self
                        .ledger_mut(ledger)
                        .lock_assets(&submitter, &req, &consents, LockMode::PerAsset);
                    self.sync();
                }
            }
            LockMode::SingleTransaction => {
                let off_plan: Option<OwnerSet> = proposals.iter().find_map(|(_, _, c)| c.clone());
                let signers: Vec<PartyId> = owners.iter().filter(|p| willing(self, p, &off_plan)).cloned().collect();
                let Some(submitter) = signers.first().cloned() else {
                    return;
                };
                let pairs: Vec<(AssetId, OwnerSet)> =
                    proposals.iter().map(|(a, to, _)| (a.clone(), to.clone())).collect();
                let req = self.request(&pairs);
                let consents: Vec<_> = signers
                    .iter()
                    .flat_map(|p| req.consent(p, LockMode::SingleTransaction))
                    .collect();
                let _ = self
                    .ledger_mut(ledger)
                    .lock_assets(&submitter, &req, &consents, LockMode::SingleTransaction);
                self.sync();
            }
        }
    }

    /// Step 4 of the joint protocol. Returns whether the preimage came out.
    fn release_joint(&mut self) -> bool {
        let step = 4;
        let Some(mut session) = self.session.take() else {
            return false;
        };
        let mut behaviors = BTreeMap::new();
        for p in self.o1.clone() {
            let role = self.role(&p).clone();
            let objection = if role.active_at(step) {
                self.gate(&p, VerifyPhase::AfterL2Locks)
            } else {
                None
            };
            let b = match objection {
                Some(m) => {
                    self.abstain(&p, step, m.to_string(), Some(m.asset()));
                    MpcBehavior::Abort
                }
                None => role.mpc_behavior(step),
            };
            behaviors.insert(p, b);
        }
        let deadline = self
            .inst
            .exchange2
            .iter()
            .chain(self.inst.exchange1.iter())
            .map(|a| self.lock_plan.expiry[a])
            .min()
            .unwrap_or(0)
            .saturating_sub(self.cfg.margin);
        session.set_release_deadline(deadline);
        let before = session.transcript().len();
        match session.run_f2(self.clock(), &behaviors) {
            Ok(()) => {
                for e in session.transcript()[before..].iter().cloned() {
                    self.note(e);
                }
            }
            Err(MpcError::DeadlinePassed { .. }) => {
                let e = Event::new(self.clock(), Source::Mpc, EventKind::Abort)
                    .detail("step", "f2")
                    .detail("reason", "deadline passed");
                self.note(e);
            }
            Err(e) => panic!("joint release out of order: {e}"),
        }
        if session.phase() != Phase::ReleasedF2 {
            return false;
        }
        let r = session.release_tick().expect("released");
        let x = session.preimage_output().expect("released").clone();
        self.advance_to(r);
        self.release = Some(r);
        for p in session.holders() {
            self.knows.get_mut(&p).expect("party").insert(x.clone());
        }
        true
    }

    /// Off-chain hand-over of the preimage to claimants of L2 assets that no
    /// L1 initial owner will take.
    fn share(&mut self) {
        if !self.cfg.atomic_gults {
            return;
        }
        let step = self.protocol().claim_step(Ledger::L2);
        let sharer = self.o1.iter().find(|p| {
            let r = self.role(p);
            r.active_at(step) && r.claims() && r.collusion().is_none() && !self.abstained.contains(*p)
        });
        let Some(sharer) = sharer.cloned() else {
            return;
        };
        let Some(x) = self.knows[&sharer].iter().next().cloned() else {
            return;
        };
        for a in self.inst.exchange2.clone() {
            let fo = self.inst.fo(&a).clone();
            if !fo.is_disjoint(&self.o1) {
                continue;
            }
            let e = Event::new(self.clock(), Source::Offchain, EventKind::Share)
                .asset(a.name.clone())
                .detail("by", sharer.as_str())
                .detail("to", join_parties(&fo, ","));
            self.note(e);
            for p in &fo {
                self.knows.get_mut(p).expect("party").insert(x.clone());
            }
        }
    }

    /// Owners of the secrets check the L2 locks before revealing anything.
    fn claim_gate(&mut self) {
        let step = self.protocol().claim_step(Ledger::L2);
        for p in self.o1.clone() {
            let r = self.role(&p);
            if !r.active_at(step) || !r.claims() {
                continue;
            }
            if let Some(m) = self.gate(&p, VerifyPhase::AfterL2Locks) {
                self.abstain(&p, step, m.to_string(), Some(m.asset()));
            }
        }
    }

    fn conforming(&self, entry: &LockEntry) -> bool {
        &entry.recipients == self.inst.fo(&entry.asset) && entry.hashes == self.lock_plan.hashes
    }

    /// Whether `p` wants `entry` paid out.
    fn wants(&self, p: &PartyId, entry: &LockEntry) -> bool {
        let a = &entry.asset;
        match self.role(p).collusion() {
            Some(c) if c.coalition().contains(p) && c.targets.contains_key(a) => entry.recipients == c.targets[a],
            _ => self.conforming(entry),
        }
    }

    /// Preimages `p` would submit against `entry`, if it can do anything.
    fn opening(&self, p: &PartyId, entry: &LockEntry) -> Option<Vec<Preimage>> {
        let known = &self.knows[p];
        let mut out = Vec::new();
        let mut missing = 0;
        for (h, revealed) in entry.hashes.iter().zip(&entry.revealed) {
            if revealed.is_some() {
                continue;
            }
            match known.iter().find(|x| x.digest() == *h) {
                Some(x) => out.push(x.clone()),
                None => missing += 1,
            }
        }
        if out.is_empty() {
            return None;
        }
        // A partial reveal only makes sense for one's own secret.
        let own = self.own.get(p);
        if missing > 0 && !own.is_some_and(|s| out.contains(s)) {
            return None;
        }
        Some(out)
    }

    /// Claims on one ledger: first every party for the locks it receives
    /// under, then (where anyone may submit) on behalf of the others.
    fn claim_round(&mut self, ledger: Ledger) {
        let step = self.protocol().claim_step(ledger);
        let parties: Vec<PartyId> = self.inst.parties.iter().cloned().collect();
        // Batched locks are claimed in one go by whoever can.
        let passes: &[bool] = match (self.policy(), self.mode()) {
            (ClaimPolicy::RecipientsOnly, _) => &[true],
            (_, LockMode::SingleTransaction) => &[false],
            _ => &[true, false],
        };
        for &own_only in passes {
            for p in &parties {
                let r = self.role(p);
                if !r.active_at(step) || !r.claims() || self.abstained.contains(p) {
                    continue;
                }
                let mut batch: Vec<(AssetId, Vec<Preimage>)> = Vec::new();
                for entry in self.ledger(ledger).locks() {
                    if own_only && !entry.recipients.contains(p) {
                        continue;
                    }
                    if entry.policy == ClaimPolicy::RecipientsOnly && !entry.recipients.contains(p) {
                        continue;
                    }
                    if !self.wants(p, entry) {
                        continue;
                    }
                    if let Some(pre) = self.opening(p, entry) {
                        batch.push((entry.asset.clone(), pre));
                    }
                }
                if batch.is_empty() {
                    continue;
                }
                match self.mode() {
                    LockMode::PerAsset => {
                        for (a, pre) in batch {
                            let _ = self.ledger_mut(ledger).claim_assets(p, &[a], &pre, LockMode::PerAsset);
                            self.sync();
                        }
                    }
                    LockMode::SingleTransaction => {
                        let assets: Vec<AssetId> = batch.iter().map(|(a, _)| a.clone()).collect();
                        let pre: BTreeSet<Preimage> = batch.into_iter().flat_map(|(_, p)| p).collect();
                        let pre: Vec<Preimage> = pre.into_iter().collect();
                        let _ = self
                            .ledger_mut(ledger)
                            .claim_assets(p, &assets, &pre, LockMode::SingleTransaction);
                        self.sync();
                    }
                }
            }
        }
    }

    fn learn_public(&mut self) {
        let now = self.clock();
        let public: BTreeSet<Preimage> = self
            .l1
            .published()
            .chain(self.l2.published())
            .filter(|(t, _)| *t < now)
            .map(|(_, p)| p)
            .collect();
        for known in self.knows.values_mut() {
            known.extend(public.iter().cloned());
        }
    }

    /// Partners in a wait-and-relock collusion: once the honest lock on a
    /// target has lapsed unclaimed, release it and lock again for the
    /// coalition under the same hashes.
    fn partner_relocks(&mut self) {
        let collusions: Vec<Collusion> = self
            .roles
            .values()
            .filter_map(|r| match r {
                Role::Colluder(c) if c.after_lapse => Some(c.clone()),
                _ => None,
            })
            .collect();
        for c in collusions {
            for (a, to) in &c.targets {
                if self.relocked.contains(a) || self.l2.owners().get(a) != Some(self.inst.io(a)) {
                    continue;
                }
                let Some(partner) = self.inst.io(a).iter().find(|p| c.partners.contains(*p)).cloned() else {
                    continue;
                };
                let now = self.clock();
                match self.l2.read_lock(a) {
                    Some(entry) if now >= entry.expiry => {
                        let _ = self.l2.unlock_assets(&partner, std::slice::from_ref(a));
                        self.sync();
                    }
                    Some(_) => continue,
                    None if now < self.lock_plan.expiry[a] => continue,
                    None => {}
                }
                let offset = self.plan.schedule.per_asset[a];
                let req = LockRequest::new(self.lock_plan.hashes.clone(), self.policy()).with_asset(
                    a.clone(),
                    to.clone(),
                    now + offset,
                );
                let consents: Vec<_> = self
                    .inst
                    .io(a)
                    .iter()
                    .flat_map(|p| req.consent(p, LockMode::PerAsset))
                    .collect();
                let _ = self.l2.lock_assets(&partner, &req, &consents, LockMode::PerAsset);
                self.sync();
                self.relocked.insert(a.clone());
            }
        }
    }

    fn unlock_round(&mut self) {
        let last = self.protocol().step_count();
        for ledger in [Ledger::L2, Ledger::L1] {
            let now = self.clock();
            let mut by: BTreeMap<PartyId, Vec<AssetId>> = BTreeMap::new();
            let state = self.ledger(ledger);
            for entry in state.locks() {
                if now < entry.expiry {
                    continue;
                }
                let owners = state.owners().get(&entry.asset).expect("locked assets are held");
                if let Some(p) = owners.iter().find(|p| self.role(p).active_at(last)) {
                    by.entry(p.clone()).or_default().push(entry.asset.clone());
                }
            }
            for (p, assets) in by {
                match self.mode() {
                    LockMode::PerAsset => {
                        for a in assets {
                            let _ = self.ledger_mut(ledger).unlock_assets(&p, &[a]);
                        }
                    }
                    LockMode::SingleTransaction => {
                        let _ = self.ledger_mut(ledger).unlock_assets(&p, &assets);
                    }
                }
                self.sync();
            }
        }
    }

    fn endgame(&mut self) {
        let mut tick = self.clock() + 1;
        loop {
            if self.l1.locks().next().is_none() && self.l2.locks().next().is_none() {
                break;
            }
            self.advance_to(tick);
            self.learn_public();
            self.partner_relocks();
            self.claim_round(Ledger::L2);
            self.claim_round(Ledger::L1);
            self.unlock_round();
            let horizon = self.l1.locks().chain(self.l2.locks()).map(|e| e.expiry).max();
            match horizon {
                Some(h) if tick < h => tick += 1,
                _ => break,
            }
        }
    }

    fn finish(mut self) -> RunOutcome {
        self.sync();
        let final1 = self.l1.owners().clone();
        let final2 = self.l2.owners().clone();
        let verdicts = self
            .inst
            .parties
            .iter()
            .map(|p| check_atomicity(self.inst, &final1, &final2, p).expect("known party"))
            .collect();
        RunOutcome {
            plan: self.plan,
            final1,
            final2,
            events: self.log,
            verdicts,
            roles: self.roles,
            lock_plan: self.lock_plan,
            release: self.release,
        }
    }
}

/// Hashes of every lock event in a log, for linkage checks.
pub fn lock_hashes(events: &[Event]) -> Vec<Vec<HashValue>> {
    events
        .iter()
        .filter(|e| e.kind == EventKind::Lock)
        .filter_map(|e| e.get("hash"))
        .map(|h| h.split(',').filter_map(HashValue::from_hex).collect())
        .collect()
}
