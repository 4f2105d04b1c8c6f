//! Lock-based exchange protocols: the classic swap, its two co-owner
//! variants (one shared secret, one secret per co-owner), and MPHTLC, where
//! the lock hash and its preimage come out of a fair joint computation.

mod engine;
pub mod plan;
pub mod schedule;
pub mod verify;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::adversary::{honest_parties, resolve_roles, ProfileError, Role, StrategyProfile};
use crate::ledger::{Event, LockMode, Tick};
use crate::model::{AtomicityVerdict, GaeInstance, OwnerSet, OwnershipMap, PartyId, Verdict, Violation};

pub use engine::lock_hashes;
pub use plan::{build_plan, check_shape, PlanStep, Protocol, ProtocolPlan, StepAction};
pub use schedule::{build_schedule, classic_schedule, ScheduleError, TimeoutSchedule};
pub use verify::{check_entry, first_mismatch, ledger_mismatch, verify_locks, LockPlan, Mismatch, VerifyPhase};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{protocol} does not fit this exchange: {reason}")]
    Shape { protocol: Protocol, reason: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    /// Base timeout; must be a positive multiple of 4.
    pub t: Tick,
    pub lock_mode: LockMode,
    /// Hand the joint preimage off-chain to L2 claimants who hold no L1 asset.
    pub atomic_gults: bool,
    pub seed: u64,
    /// Ticks between the joint release deadline and the earliest L2 expiry.
    pub margin: Tick,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t: 8,
            lock_mode: LockMode::PerAsset,
            atomic_gults: true,
            seed: 0,
            margin: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub plan: ProtocolPlan,
    pub final1: OwnershipMap,
    pub final2: OwnershipMap,
    /// Both ledgers, the joint computation and off-chain messages, in order.
    pub events: Vec<Event>,
    /// One per party, in party order.
    pub verdicts: Vec<AtomicityVerdict>,
    pub roles: BTreeMap<PartyId, Role>,
    pub lock_plan: LockPlan,
    /// Tick the joint preimage came out, if it did.
    pub release: Option<Tick>,
}

impl RunOutcome {
    pub fn protocol(&self) -> Protocol {
        self.plan.protocol
    }

    pub fn honest(&self) -> OwnerSet {
        honest_parties(&self.roles)
    }

    pub fn verdict(&self, party: &PartyId) -> Option<Verdict> {
        self.verdicts.iter().find(|v| &v.party == party).map(|v| v.verdict)
    }

    /// Honest parties that ended up with a partial exchange.
    pub fn violated_honest(&self) -> Vec<PartyId> {
        let honest = self.honest();
        self.verdicts
            .iter()
            .filter(|v| v.verdict == Verdict::Violated && honest.contains(&v.party))
            .map(|v| v.party.clone())
            .collect()
    }

    pub fn any_violated(&self) -> bool {
        self.verdicts.iter().any(|v| v.verdict == Verdict::Violated)
    }

    pub fn event_lines(&self) -> Vec<String> {
        self.events.iter().map(Event::to_line).collect()
    }
}

/// Runs `protocol` on `instance` with every party following `profile`.
pub fn run(
    instance: &GaeInstance,
    protocol: Protocol,
    cfg: &RunConfig,
    profile: &StrategyProfile,
) -> Result<RunOutcome, ProtocolError> {
    instance.validate().map_err(ProtocolError::Invalid)?;
    let plan = build_plan(instance, protocol, cfg.t, cfg.lock_mode)?;
    let roles = resolve_roles(instance, protocol, profile)?;
    Ok(engine::Engine::new(instance, plan, cfg, roles).run())
}

pub fn run_mphtlc(
    instance: &GaeInstance,
    cfg: &RunConfig,
    profile: &StrategyProfile,
) -> Result<RunOutcome, ProtocolError> {
    run(instance, Protocol::Mphtlc, cfg, profile)
}

pub fn run_htlc(
    instance: &GaeInstance,
    cfg: &RunConfig,
    profile: &StrategyProfile,
) -> Result<RunOutcome, ProtocolError> {
    run(instance, Protocol::Htlc, cfg, profile)
}

pub fn run_htlc_ms(
    instance: &GaeInstance,
    cfg: &RunConfig,
    profile: &StrategyProfile,
) -> Result<RunOutcome, ProtocolError> {
    run(instance, Protocol::HtlcMs, cfg, profile)
}

pub fn run_htlc_mk(
    instance: &GaeInstance,
    cfg: &RunConfig,
    profile: &StrategyProfile,
) -> Result<RunOutcome, ProtocolError> {
    run(instance, Protocol::HtlcMk, cfg, profile)
}
