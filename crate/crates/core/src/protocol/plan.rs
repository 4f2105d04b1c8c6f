use std::fmt;
use std::str::FromStr;

use crate::ledger::{LockMode, Tick};
use crate::model::{fmt_set, initial_owner_union, GaeInstance, Ledger, OwnerSet};

use super::schedule::{build_schedule, classic_schedule, TimeoutSchedule};
use super::ProtocolError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Htlc,
    HtlcMs,
    HtlcMk,
    Mphtlc,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Htlc, Protocol::HtlcMs, Protocol::HtlcMk, Protocol::Mphtlc];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Htlc => "HTLC",
            Protocol::HtlcMs => "HTLC_MS",
            Protocol::HtlcMk => "HTLC_MK",
            Protocol::Mphtlc => "MPHTLC",
        }
    }

    pub fn step_count(self) -> u8 {
        match self {
            Protocol::Mphtlc => 6,
            _ => 5,
        }
    }

    /// Step numbers of the lock and claim phases on each ledger.
    pub fn lock_step(self, ledger: Ledger) -> u8 {
        match ledger {
            Ledger::L1 => 2,
            Ledger::L2 => 3,
        }
    }

    pub fn claim_step(self, ledger: Ledger) -> u8 {
        match (self, ledger) {
            (Protocol::Mphtlc, Ledger::L2) => 5,
            (Protocol::Mphtlc, Ledger::L1) => 6,
            (_, Ledger::L2) => 4,
            (_, Ledger::L1) => 5,
        }
    }

    /// Whether preimages come out of the joint computation rather than
    /// being chosen by the owners.
    pub fn uses_mpc(self) -> bool {
        self == Protocol::Mphtlc
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepAction {
    /// The joint hash, or the secret(s) behind it.
    Commit,
    Lock(Ledger),
    /// Release of the joint preimage.
    Release,
    Claim(Ledger),
}

impl fmt::Display for StepAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepAction::Commit => f.write_str("commit"),
            StepAction::Lock(l) => write!(f, "lock-{l}"),
            StepAction::Release => f.write_str("release"),
            StepAction::Claim(l) => write!(f, "claim-{l}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub number: u8,
    pub action: StepAction,
    /// Parties that act in this step.
    pub parties: OwnerSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolPlan {
    pub protocol: Protocol,
    pub lock_mode: LockMode,
    pub schedule: TimeoutSchedule,
    pub steps: Vec<PlanStep>,
}

impl ProtocolPlan {
    pub fn step(&self, number: u8) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.number == number)
    }

    /// Whether `party` has anything to do in step `number`.
    pub fn acts_in(&self, party: &crate::model::PartyId, number: u8) -> bool {
        self.step(number).is_some_and(|s| s.parties.contains(party))
    }
}

fn owners_of<'a>(
    instance: &'a GaeInstance,
    ledger: Ledger,
    pick: impl Fn(&'a GaeInstance, &crate::model::AssetId) -> &'a OwnerSet,
) -> OwnerSet {
    instance
        .exchange(ledger)
        .iter()
        .flat_map(|a| pick(instance, a).iter().cloned())
        .collect()
}

/// Checks the instance fits the protocol.
pub fn check_shape(instance: &GaeInstance, protocol: Protocol) -> Result<(), ProtocolError> {
    let o1 = initial_owner_union(instance);
    let shape = |why: String| Err(ProtocolError::Shape { protocol, reason: why });
    if instance.exchange1.is_empty() || instance.exchange2.is_empty() {
        return shape("both ledgers need an exchanged asset".into());
    }
    match protocol {
        Protocol::Htlc => {
            if instance.exchange1.len() != 1 || instance.exchange2.len() != 1 {
                return shape("exactly one exchanged asset per ledger".into());
            }
            for a in instance.exchanged() {
                if instance.io(a).len() != 1 {
                    return shape(format!("{a} has initial owners {}", fmt_set(instance.io(a))));
                }
            }
            Ok(())
        }
        Protocol::HtlcMs | Protocol::HtlcMk => {
            if instance.exchange2.len() != 1 {
                return shape("exactly one exchanged asset on L2".into());
            }
            if o1.len() < 2 {
                return shape("needs at least two initial owners on L1".into());
            }
            Ok(())
        }
        Protocol::Mphtlc => Ok(()),
    }
}

pub fn build_plan(
    instance: &GaeInstance,
    protocol: Protocol,
    t: Tick,
    mode: LockMode,
) -> Result<ProtocolPlan, ProtocolError> {
    check_shape(instance, protocol)?;
    let schedule = match protocol {
        Protocol::Mphtlc => build_schedule(instance, t, mode)?,
        _ => classic_schedule(instance, t)?,
    };
    let o1 = initial_owner_union(instance);
    let io2 = owners_of(instance, Ledger::L2, GaeInstance::io);
    let everyone = instance.parties.clone();
    let fo1 = owners_of(instance, Ledger::L1, GaeInstance::fo);
    let fo2_in_o1: OwnerSet = owners_of(instance, Ledger::L2, GaeInstance::fo)
        .intersection(&o1)
        .cloned()
        .collect();
    let step = |number, action, parties: &OwnerSet| PlanStep {
        number,
        action,
        parties: parties.clone(),
    };
    let steps = match protocol {
        Protocol::Mphtlc => vec![
            step(1, StepAction::Commit, &o1),
            step(2, StepAction::Lock(Ledger::L1), &o1),
            step(3, StepAction::Lock(Ledger::L2), &io2),
            step(4, StepAction::Release, &o1),
            step(5, StepAction::Claim(Ledger::L2), &o1),
            step(6, StepAction::Claim(Ledger::L1), &everyone),
        ],
        _ => vec![
            step(1, StepAction::Commit, &o1),
            step(2, StepAction::Lock(Ledger::L1), &o1),
            step(3, StepAction::Lock(Ledger::L2), &io2),
            step(4, StepAction::Claim(Ledger::L2), &fo2_in_o1),
            step(5, StepAction::Claim(Ledger::L1), &fo1),
        ],
    };
    Ok(ProtocolPlan {
        protocol,
        lock_mode: mode,
        schedule,
        steps,
    })
}
