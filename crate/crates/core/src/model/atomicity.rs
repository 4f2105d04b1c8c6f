use std::fmt;

use super::{GaeInstance, Ledger, ModelError, OwnershipMap, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    AllFinal,
    AllInitial,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::AllFinal => "ALL_FINAL",
            Verdict::AllInitial => "ALL_INITIAL",
            Verdict::Violated => "VIOLATED",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "ALL_FINAL" => Ok(Self::AllFinal),
            "ALL_INITIAL" => Ok(Self::AllInitial),
            "VIOLATED" => Ok(Self::Violated),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicityVerdict {
    pub party: PartyId,
    pub verdict: Verdict,
}

/// Judges one party's outcome: every exchanged asset the party appears in
/// (initially or finally) must end at its final owners, or every such asset
/// must end at its initial owners.
pub fn check_atomicity(
    instance: &GaeInstance,
    final1: &OwnershipMap,
    final2: &OwnershipMap,
    party: &PartyId,
) -> Result<AtomicityVerdict, ModelError> {
    if !instance.parties.contains(party) {
        return Err(ModelError::UnknownParty(party.clone()));
    }
    let mut relevant = 0usize;
    let mut all_final = true;
    let mut all_initial = true;
    for ledger in Ledger::BOTH {
        let end = match ledger {
            Ledger::L1 => final1,
            Ledger::L2 => final2,
        };
        for asset in instance.exchange(ledger) {
            if !instance.is_relevant(party, asset) {
                continue;
            }
            relevant += 1;
            let got = end.get(asset);
            all_final &= got == Some(instance.fo(asset));
            all_initial &= got == Some(instance.io(asset));
        }
    }
    let verdict = if relevant == 0 || (all_initial && !all_final) {
        Verdict::AllInitial
    } else if all_final {
        Verdict::AllFinal
    } else {
        Verdict::Violated
    };
    Ok(AtomicityVerdict {
        party: party.clone(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{owner_set, AssetId};
    use Ledger::*;

    fn joint() -> GaeInstance {
        GaeInstance::builder()
            .transfer(L1, "M", &["X", "W"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X", "W"])
            .build()
    }

    fn verdict(inst: &GaeInstance, f1: &OwnershipMap, f2: &OwnershipMap, p: &str) -> Verdict {
        check_atomicity(inst, f1, f2, &PartyId::from(p)).unwrap().verdict
    }

    #[test]
    fn final_and_initial_states() {
        let inst = joint();
        for p in ["X", "W", "Y"] {
            assert_eq!(verdict(&inst, &inst.fo1, &inst.fo2, p), Verdict::AllFinal);
            assert_eq!(verdict(&inst, &inst.io1, &inst.io2, p), Verdict::AllInitial);
        }
    }

    #[test]
    fn collusion_outcome_is_violation() {
        let inst = joint();
        let mut f2 = inst.fo2.clone();
        f2.insert(AssetId::new(L2, "N"), owner_set(["W"]));
        assert_eq!(verdict(&inst, &inst.fo1, &f2, "X"), Verdict::Violated);
    }

    #[test]
    fn bystander_is_initial() {
        let mut inst = joint();
        inst.parties.insert(PartyId::from("Q"));
        assert_eq!(verdict(&inst, &inst.fo1, &inst.io2, "Q"), Verdict::AllInitial);
    }

    #[test]
    fn unknown_party_is_a_fault() {
        let inst = joint();
        assert_eq!(
            check_atomicity(&inst, &inst.fo1, &inst.fo2, &PartyId::from("Q")),
            Err(ModelError::UnknownParty(PartyId::from("Q")))
        );
    }
}
