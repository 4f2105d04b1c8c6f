use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{AssetId, GaeInstance, Ledger, OwnerSet, PartyId};

/// Givers, keepers and takers of one exchanged asset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gkt {
    pub givers: OwnerSet,
    pub keepers: OwnerSet,
    pub takers: OwnerSet,
}

impl Gkt {
    pub fn of(initial: &OwnerSet, fin: &OwnerSet) -> Self {
        Self {
            givers: initial.difference(fin).cloned().collect(),
            keepers: initial.intersection(fin).cloned().collect(),
            takers: fin.difference(initial).cloned().collect(),
        }
    }

    /// Givers and keepers together, i.e. the initial owners.
    pub fn contributors(&self) -> OwnerSet {
        self.givers.union(&self.keepers).cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GktPartition {
    pub ledger: Ledger,
    pub rows: BTreeMap<AssetId, Gkt>,
}

impl GktPartition {
    pub fn get(&self, asset: &AssetId) -> Option<&Gkt> {
        self.rows.get(asset)
    }

    fn union_of(&self, pick: impl Fn(&Gkt) -> &OwnerSet) -> OwnerSet {
        self.rows.values().flat_map(|g| pick(g).iter().cloned()).collect()
    }
}

/// Partition of every exchanged asset of `ledger`. Empty giver, keeper or
/// taker sets are allowed.
pub fn derive_gkt(instance: &GaeInstance, ledger: Ledger) -> GktPartition {
    let rows = instance
        .exchange(ledger)
        .iter()
        .map(|a| (a.clone(), Gkt::of(instance.io(a), instance.fo(a))))
        .collect();
    GktPartition { ledger, rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExchangeKind {
    OnlyGult,
    GclrAndGult,
    FullGclsMix,
}

impl fmt::Display for ExchangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExchangeKind::OnlyGult => "ONLY_GULT",
            ExchangeKind::GclrAndGult => "GCLR_AND_GULT",
            ExchangeKind::FullGclsMix => "FULL_GCLS_MIX",
        })
    }
}

impl std::str::FromStr for ExchangeKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "ONLY_GULT" => Ok(Self::OnlyGult),
            "GCLR_AND_GULT" => Ok(Self::GclrAndGult),
            "FULL_GCLS_MIX" => Ok(Self::FullGclsMix),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeClassification {
    /// Parties giving or keeping on L1 that take on L2.
    pub s12: OwnerSet,
    /// Parties giving or keeping on L2 that take on L1.
    pub s21: OwnerSet,
    pub kind: ExchangeKind,
}

impl ExchangeClassification {
    /// Every party of the instance sits in a cross-ledger swap relation.
    pub fn covers(&self, parties: &BTreeSet<PartyId>) -> bool {
        parties.iter().all(|p| self.s12.contains(p) || self.s21.contains(p))
    }
}

pub fn classify(instance: &GaeInstance) -> ExchangeClassification {
    let p1 = derive_gkt(instance, Ledger::L1);
    let p2 = derive_gkt(instance, Ledger::L2);
    let side = |from: &GktPartition, to: &GktPartition| -> OwnerSet {
        let mut contributors = from.union_of(|g| &g.givers);
        contributors.extend(from.union_of(|g| &g.keepers));
        let takers = to.union_of(|g| &g.takers);
        contributors.intersection(&takers).cloned().collect()
    };
    let s12 = side(&p1, &p2);
    let s21 = side(&p2, &p1);
    let kind = match (s12.is_empty(), s21.is_empty()) {
        (true, true) => ExchangeKind::OnlyGult,
        (false, false) => ExchangeKind::FullGclsMix,
        _ => ExchangeKind::GclrAndGult,
    };
    ExchangeClassification { s12, s21, kind }
}

/// The union of initial owners over the L1 exchange set; these parties hold
/// the joint secret.
pub fn initial_owner_union(instance: &GaeInstance) -> OwnerSet {
    instance
        .exchange1
        .iter()
        .flat_map(|a| instance.io(a).iter().cloned())
        .collect()
}
