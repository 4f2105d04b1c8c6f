use thiserror::Error;

use crate::model::{initial_owner_union, GaeInstance, OwnerSet, PartyId};
use crate::protocol::Protocol;

use super::enumerate::strategy_library;
use super::strategy::{Strategy, StrategyProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttackKind {
    /// Partner locks the target for the coalition right away; suited to a
    /// shared secret.
    MsCollusion,
    /// Partner locks honestly, waits for a co-owner to reveal and the lock
    /// to lapse, then relocks for the coalition.
    MkWithholdRelock,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::MsCollusion => "ms_collusion",
            AttackKind::MkWithholdRelock => "mk_withhold_relock",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [AttackKind::MsCollusion, AttackKind::MkWithholdRelock]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attack {
    pub kind: AttackKind,
    pub colluder: PartyId,
    pub partners: OwnerSet,
}

impl Attack {
    /// `ms_collusion(W,Y)`.
    pub fn name(&self) -> String {
        let mut args = vec![self.colluder.to_string()];
        args.extend(self.partners.iter().map(|p| p.to_string()));
        format!("{}({})", self.kind.as_str(), args.join(","))
    }

    pub fn strategy(&self) -> Strategy {
        Strategy::ColludeRelock {
            partners: self.partners.clone(),
            after_lapse: self.kind == AttackKind::MkWithholdRelock,
        }
    }

    pub fn profile(&self, instance: &GaeInstance) -> StrategyProfile {
        StrategyProfile::all_honest(&instance.parties).with(&self.colluder, self.strategy())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlaybookError {
    #[error("{0} has no co-owner collusion to replay")]
    Unsupported(Protocol),
}

/// The co-owner collusions that apply to the instance: for every L1 initial
/// owner and every set of L2 counterparties it could conspire with, the
/// immediate relock and the wait-and-relock variant.
pub fn collusion_playbook(instance: &GaeInstance, protocol: Protocol) -> Result<Vec<Attack>, PlaybookError> {
    if protocol == Protocol::Htlc {
        return Err(PlaybookError::Unsupported(protocol));
    }
    let lib = strategy_library(instance, protocol, 8);
    let mut out = Vec::new();
    for colluder in initial_owner_union(instance) {
        for s in &lib[&colluder] {
            if let Strategy::ColludeRelock { partners, after_lapse } = s {
                out.push(Attack {
                    kind: if *after_lapse {
                        AttackKind::MkWithholdRelock
                    } else {
                        AttackKind::MsCollusion
                    },
                    colluder: colluder.clone(),
                    partners: partners.clone(),
                });
            }
        }
    }
    out.sort_by(|a, b| (a.kind, &a.colluder, &a.partners).cmp(&(b.kind, &b.colluder, &b.partners)));
    Ok(out)
}
