use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

use crate::model::{classify, ExchangeKind, GaeInstance, OwnershipMap, PartyId};
use crate::protocol::{run_mphtlc, ProtocolError, RunConfig};

use super::strategy::{Strategy, StrategyProfile};

pub type Share = Ratio<u64>;

/// End-of-run holdings with every asset worth one unit, split evenly among
/// its owners.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PayoffVector {
    pub per_party: BTreeMap<PartyId, Share>,
}

impl PayoffVector {
    pub fn of(parties: impl IntoIterator<Item = PartyId>, maps: &[&OwnershipMap]) -> Self {
        let mut per_party: BTreeMap<PartyId, Share> =
            parties.into_iter().map(|p| (p, Share::from_integer(0))).collect();
        for map in maps {
            for (_, owners) in map.iter() {
                let share = Share::new(1, owners.len() as u64);
                for o in owners {
                    *per_party.entry(o.clone()).or_default() += share;
                }
            }
        }
        Self { per_party }
    }

    pub fn get(&self, party: &PartyId) -> Share {
        self.per_party.get(party).copied().unwrap_or_default()
    }
}

impl fmt::Display for PayoffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.per_party.iter().map(|(p, v)| format!("{p}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationReport {
    pub deviator: PartyId,
    pub strategy: Strategy,
    pub honest: Share,
    pub deviating: Share,
}

impl DeviationReport {
    /// Deviating does not pay strictly more.
    pub fn no_gain(&self) -> bool {
        self.deviating <= self.honest
    }
}

#[derive(Debug, Error)]
pub enum DeviationError {
    #[error("instance is {0}, not swaps only")]
    NotSwapsOnly(ExchangeKind),
    #[error("{0} is not part of a cross-ledger swap")]
    OutsideSwap(PartyId),
    #[error(transparent)]
    Run(#[from] ProtocolError),
}

/// Runs the joint protocol honestly and with `deviator` alone playing
/// `strategy`, and returns the deviator's payoff in both.
pub fn evaluate_deviation(
    instance: &GaeInstance,
    cfg: &RunConfig,
    deviator: &PartyId,
    strategy: &Strategy,
) -> Result<DeviationReport, DeviationError> {
    let class = classify(instance);
    if class.kind != ExchangeKind::FullGclsMix {
        return Err(DeviationError::NotSwapsOnly(class.kind));
    }
    if let Some(p) = instance
        .parties
        .iter()
        .find(|p| !class.s12.contains(*p) && !class.s21.contains(*p))
    {
        return Err(DeviationError::OutsideSwap(p.clone()));
    }
    let honest = StrategyProfile::all_honest(&instance.parties);
    let deviating = honest.clone().with(deviator, strategy.clone());
    let payoff = |profile: &StrategyProfile| -> Result<Share, DeviationError> {
        let out = run_mphtlc(instance, cfg, profile)?;
        Ok(PayoffVector::of(instance.parties.iter().cloned(), &[&out.final1, &out.final2]).get(deviator))
    };
    Ok(DeviationReport {
        deviator: deviator.clone(),
        strategy: strategy.clone(),
        honest: payoff(&honest)?,
        deviating: payoff(&deviating)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ledger::*;

    fn joint_swap() -> GaeInstance {
        GaeInstance::builder()
            .transfer(L1, "M", &["X", "W"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X", "W"])
            .build()
    }

    #[test]
    fn shares_split_evenly() {
        let inst = joint_swap();
        let v = PayoffVector::of(inst.parties.iter().cloned(), &[&inst.io1, &inst.io2]);
        assert_eq!(v.get(&PartyId::from("X")), Share::new(1, 2));
        assert_eq!(v.get(&PartyId::from("Y")), Share::from_integer(1));
        assert_eq!(v.to_string(), "W=1/2 X=1/2 Y=1");
    }

    #[test]
    fn withholding_does_not_pay() {
        let inst = joint_swap();
        let w = PartyId::from("W");
        let r = evaluate_deviation(&inst, &RunConfig::default(), &w, &Strategy::WithholdSecret).unwrap();
        assert_eq!(r.honest, Share::new(1, 2));
        assert!(r.no_gain());
        let r = evaluate_deviation(&inst, &RunConfig::default(), &w, &Strategy::Honest).unwrap();
        assert_eq!(r.honest, r.deviating);
    }

    #[test]
    fn needs_swaps_only() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &["Y"])
            .transfer(L2, "N", &["Z"], &["V"])
            .build();
        let err = evaluate_deviation(
            &inst,
            &RunConfig::default(),
            &PartyId::from("X"),
            &Strategy::WithholdSecret,
        );
        assert!(matches!(err, Err(DeviationError::NotSwapsOnly(ExchangeKind::OnlyGult))));
    }
}
