use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ledger::Tick;
use crate::model::{
    fmt_set, initial_owner_union, is_identifier, join_parties, AssetId, GaeInstance, OwnerSet, PartyId,
};
use crate::mpc::MpcBehavior;
use crate::protocol::Protocol;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Honest,
    /// Follows the protocol up to the given step, then does nothing at all.
    AbortAt(u8),
    /// Takes part in everything but never submits a claim or reveal.
    WithholdSecret,
    /// Gets `partners` (owners on L2) to lock a jointly targeted asset for the
    /// coalition alone. With `after_lapse` the partners lock honestly, wait for
    /// the lock to expire unclaimed, and relock; otherwise they lock for the
    /// coalition straight away.
    ColludeRelock {
        partners: OwnerSet,
        after_lapse: bool,
    },
    MpcDelay(Tick),
    MpcAbort,
}

impl Strategy {
    pub fn is_honest(&self) -> bool {
        *self == Strategy::Honest
    }

    /// Scenario-file spelling.
    pub fn to_scenario(&self) -> String {
        match self {
            Strategy::Honest => "honest".into(),
            Strategy::AbortAt(k) => format!("abort_at({k})"),
            Strategy::WithholdSecret => "withhold_secret".into(),
            Strategy::ColludeRelock {
                partners,
                after_lapse: false,
            } => {
                format!("collude_relock({})", join_parties(partners, ","))
            }
            Strategy::ColludeRelock {
                partners,
                after_lapse: true,
            } => {
                format!("collude_relock_after_lapse({})", join_parties(partners, ","))
            }
            Strategy::MpcDelay(d) => format!("mpc_delay({d})"),
            Strategy::MpcAbort => "mpc_abort".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, StrategyParseError> {
        let bad = || StrategyParseError(text.to_string());
        let text = text.trim();
        let (name, arg) = match text.split_once('(') {
            Some((n, rest)) => (n.trim(), Some(rest.strip_suffix(')').ok_or_else(bad)?.trim())),
            None => (text, None),
        };
        let number = |a: Option<&str>| a.and_then(|a| a.parse::<u64>().ok()).ok_or_else(bad);
        let parties = |a: Option<&str>| -> Result<OwnerSet, StrategyParseError> {
            let a = a.ok_or_else(bad)?.trim_start_matches('{').trim_end_matches('}');
            let set: OwnerSet = a
                .split(',')
                .map(str::trim)
                .map(|p| {
                    if is_identifier(p) {
                        Ok(PartyId::from(p))
                    } else {
                        Err(bad())
                    }
                })
                .collect::<Result<_, _>>()?;
            if set.is_empty() {
                Err(bad())
            } else {
                Ok(set)
            }
        };
        Ok(match (name.to_ascii_lowercase().as_str(), arg) {
            ("honest", None) => Strategy::Honest,
            ("withhold_secret", None) => Strategy::WithholdSecret,
            ("mpc_abort", None) => Strategy::MpcAbort,
            ("abort_at", a) => Strategy::AbortAt(u8::try_from(number(a)?).map_err(|_| bad())?),
            ("mpc_delay", a) => Strategy::MpcDelay(number(a)?),
            ("collude_relock", a) => Strategy::ColludeRelock {
                partners: parties(a)?,
                after_lapse: false,
            },
            ("collude_relock_after_lapse", a) => Strategy::ColludeRelock {
                partners: parties(a)?,
                after_lapse: true,
            },
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Honest => f.write_str("HONEST"),
            Strategy::AbortAt(k) => write!(f, "ABORT_AT({k})"),
            Strategy::WithholdSecret => f.write_str("WITHHOLD_SECRET"),
            Strategy::ColludeRelock { partners, after_lapse } => {
                let name = if *after_lapse {
                    "COLLUDE_RELOCK_AFTER_LAPSE"
                } else {
                    "COLLUDE_RELOCK"
                };
                write!(f, "{name}({})", fmt_set(partners))
            }
            Strategy::MpcDelay(d) => write!(f, "MPC_DELAY({d})"),
            Strategy::MpcAbort => f.write_str("MPC_ABORT"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown strategy {0:?}")]
pub struct StrategyParseError(pub String);

/// A strategy for every party.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyProfile {
    pub assignment: BTreeMap<PartyId, Strategy>,
}

impl StrategyProfile {
    pub fn all_honest<'a>(parties: impl IntoIterator<Item = &'a PartyId>) -> Self {
        Self {
            assignment: parties.into_iter().map(|p| (p.clone(), Strategy::Honest)).collect(),
        }
    }

    pub fn with(mut self, party: &PartyId, strategy: Strategy) -> Self {
        self.assignment.insert(party.clone(), strategy);
        self
    }

    pub fn get(&self, party: &PartyId) -> Option<&Strategy> {
        self.assignment.get(party)
    }

    /// Parties with a non-honest assignment.
    pub fn deviators(&self) -> impl Iterator<Item = (&PartyId, &Strategy)> {
        self.assignment.iter().filter(|(_, s)| !s.is_honest())
    }

    /// `W=COLLUDE_RELOCK({Y})` pairs for the deviators, or `all-honest`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.deviators().map(|(p, s)| format!("{p}={s}")).collect();
        if parts.is_empty() {
            "all-honest".into()
        } else {
            parts.join(",")
        }
    }
}

/// One collusion as seen from both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Collusion {
    pub colluder: PartyId,
    pub partners: OwnerSet,
    pub after_lapse: bool,
    /// Target asset on L2 and the coalition members it gets locked for.
    pub targets: BTreeMap<AssetId, OwnerSet>,
}

impl Collusion {
    pub fn coalition(&self) -> OwnerSet {
        let mut c = self.partners.clone();
        c.insert(self.colluder.clone());
        c
    }
}

/// Resolved behavior of one party in a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    Honest,
    AbortAt(u8),
    Withhold,
    MpcDelay(Tick),
    MpcAbort,
    Colluder(Collusion),
    Partner(Collusion),
}

impl Role {
    pub fn is_honest(&self) -> bool {
        *self == Role::Honest
    }

    /// Whether the party does anything at all in `step`.
    pub fn active_at(&self, step: u8) -> bool {
        match self {
            Role::AbortAt(k) => step < *k,
            _ => true,
        }
    }

    pub fn mpc_behavior(&self, step: u8) -> MpcBehavior {
        match self {
            _ if !self.active_at(step) => MpcBehavior::Abort,
            Role::MpcAbort if step > 1 => MpcBehavior::Abort,
            Role::MpcDelay(d) => MpcBehavior::Delay(*d),
            _ => MpcBehavior::Honest,
        }
    }

    /// Whether the party ever submits claims or reveals.
    pub fn claims(&self) -> bool {
        *self != Role::Withhold
    }

    pub fn collusion(&self) -> Option<&Collusion> {
        match self {
            Role::Colluder(c) | Role::Partner(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("no strategy for party {0}")]
    MissingParty(PartyId),
    #[error("strategy for {0}, who is not a party")]
    UnknownParty(PartyId),
    #[error("{party}: step {step} is outside 1..={max}")]
    StepOutOfRange { party: PartyId, step: u8, max: u8 },
    #[error("{0}: delay must be at least one tick")]
    ZeroDelay(PartyId),
    #[error("{party}: {partner} is not a counterparty owning a target asset")]
    NotCounterparty { party: PartyId, partner: PartyId },
    #[error("{0}: no asset can be relocked for this coalition")]
    NoTarget(PartyId),
    #[error("{0} must hold an L1 asset to collude")]
    NotInitialOwner(PartyId),
    #[error("{partner} is a partner of {colluder} but has its own strategy")]
    PartnerConflict { colluder: PartyId, partner: PartyId },
}

/// Assets the coalition can lock for a strict part of their final owners:
/// on L2, initially held within the coalition (with at least one partner),
/// finally owned partly by the colluder and partly outside the coalition.
pub fn collusion_targets(
    instance: &GaeInstance,
    colluder: &PartyId,
    partners: &OwnerSet,
) -> BTreeMap<AssetId, OwnerSet> {
    let mut coalition = partners.clone();
    coalition.insert(colluder.clone());
    instance
        .exchange2
        .iter()
        .filter(|a| {
            let io = instance.io(a);
            let fo = instance.fo(a);
            io.is_subset(&coalition) && !io.is_disjoint(partners) && fo.contains(colluder) && !fo.is_subset(&coalition)
        })
        .map(|a| (a.clone(), instance.fo(a).intersection(&coalition).cloned().collect()))
        .collect()
}

/// Checks a profile against the instance and turns it into per-party roles.
pub fn resolve_roles(
    instance: &GaeInstance,
    protocol: Protocol,
    profile: &StrategyProfile,
) -> Result<BTreeMap<PartyId, Role>, ProfileError> {
    for p in profile.assignment.keys() {
        if !instance.parties.contains(p) {
            return Err(ProfileError::UnknownParty(p.clone()));
        }
    }
    let o1 = initial_owner_union(instance);
    let mut roles = BTreeMap::new();
    let mut partners_of: BTreeMap<PartyId, Collusion> = BTreeMap::new();
    for p in &instance.parties {
        let s = profile.get(p).ok_or_else(|| ProfileError::MissingParty(p.clone()))?;
        let role = match s {
            Strategy::Honest => Role::Honest,
            Strategy::AbortAt(k) => {
                let max = protocol.step_count();
                if *k < 1 || *k > max {
                    return Err(ProfileError::StepOutOfRange {
                        party: p.clone(),
                        step: *k,
                        max,
                    });
                }
                Role::AbortAt(*k)
            }
            Strategy::WithholdSecret => Role::Withhold,
            Strategy::MpcDelay(0) => return Err(ProfileError::ZeroDelay(p.clone())),
            Strategy::MpcDelay(d) => Role::MpcDelay(*d),
            Strategy::MpcAbort => Role::MpcAbort,
            Strategy::ColludeRelock { partners, after_lapse } => {
                if !o1.contains(p) {
                    return Err(ProfileError::NotInitialOwner(p.clone()));
                }
                let targets = collusion_targets(instance, p, partners);
                if targets.is_empty() {
                    return Err(ProfileError::NoTarget(p.clone()));
                }
                for q in partners {
                    let owns = targets.keys().any(|a| instance.io(a).contains(q));
                    if q == p || !instance.parties.contains(q) || !owns {
                        return Err(ProfileError::NotCounterparty {
                            party: p.clone(),
                            partner: q.clone(),
                        });
                    }
                }
                let c = Collusion {
                    colluder: p.clone(),
                    partners: partners.clone(),
                    after_lapse: *after_lapse,
                    targets,
                };
                for q in partners {
                    if partners_of.insert(q.clone(), c.clone()).is_some() {
                        return Err(ProfileError::PartnerConflict {
                            colluder: p.clone(),
                            partner: q.clone(),
                        });
                    }
                }
                Role::Colluder(c)
            }
        };
        roles.insert(p.clone(), role);
    }
    for (q, c) in partners_of {
        if !roles[&q].is_honest() {
            return Err(ProfileError::PartnerConflict {
                colluder: c.colluder,
                partner: q,
            });
        }
        roles.insert(q, Role::Partner(c));
    }
    Ok(roles)
}

/// Parties whose role is honest once partners are accounted for.
pub fn honest_parties(roles: &BTreeMap<PartyId, Role>) -> BTreeSet<PartyId> {
    roles
        .iter()
        .filter(|(_, r)| r.is_honest())
        .map(|(p, _)| p.clone())
        .collect()
}
