//! The exchange model: parties, assets on two ledgers, initial and final
//! ownership functions, and the set algebra derived from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

mod atomicity;
pub mod gen;
mod gkt;

pub use atomicity::{check_atomicity, AtomicityVerdict, Verdict};
pub use gkt::{classify, derive_gkt, initial_owner_union, ExchangeClassification, ExchangeKind, Gkt, GktPartition};

/// Opaque party identifier. Ordering is lexicographic and is used as the
/// tie-break for every ordered traversal in the crate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartyId(String);

impl PartyId {
    /// Builds an identifier, rejecting empty strings and characters that
    /// would collide with the scenario and log syntaxes.
    pub fn parse(id: &str) -> Result<Self, ModelError> {
        if is_identifier(id) {
            Ok(Self(id.to_string()))
        } else {
            Err(ModelError::BadIdentifier(id.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PartyId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Ledger {
    L1,
    L2,
}

impl Ledger {
    pub const BOTH: [Ledger; 2] = [Ledger::L1, Ledger::L2];

    pub fn index(self) -> usize {
        match self {
            Ledger::L1 => 1,
            Ledger::L2 => 2,
        }
    }

    pub fn other(self) -> Ledger {
        match self {
            Ledger::L1 => Ledger::L2,
            Ledger::L2 => Ledger::L1,
        }
    }
}

impl fmt::Display for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index())
    }
}

/// An asset lives on exactly one ledger; `(ledger, name)` is its identity.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssetId {
    pub ledger: Ledger,
    pub name: String,
}

impl AssetId {
    pub fn new(ledger: Ledger, name: &str) -> Self {
        Self {
            ledger,
            name: name.to_string(),
        }
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Debug for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ledger, self.name)
    }
}

pub type OwnerSet = BTreeSet<PartyId>;

/// Renders an owner set as `{X,Y}`.
pub fn fmt_set(set: &OwnerSet) -> String {
    format!("{{{}}}", join_parties(set, ","))
}

pub(crate) fn join_parties<'a>(parties: impl IntoIterator<Item = &'a PartyId>, sep: &str) -> String {
    parties.into_iter().map(PartyId::as_str).collect::<Vec<_>>().join(sep)
}

pub fn owner_set<'a>(parties: impl IntoIterator<Item = &'a str>) -> OwnerSet {
    parties.into_iter().map(PartyId::from).collect()
}

/// Maps each asset to its (non-empty) owner set.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct OwnershipMap(BTreeMap<AssetId, OwnerSet>);

impl OwnershipMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, asset: &AssetId) -> Option<&OwnerSet> {
        self.0.get(asset)
    }

    pub fn insert(&mut self, asset: AssetId, owners: OwnerSet) -> Option<OwnerSet> {
        self.0.insert(asset, owners)
    }

    pub fn contains(&self, asset: &AssetId) -> bool {
        self.0.contains_key(asset)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AssetId, &OwnerSet)> {
        self.0.iter()
    }

    pub fn assets(&self) -> impl Iterator<Item = &AssetId> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Restriction to the assets of one ledger.
    pub fn on_ledger(&self, ledger: Ledger) -> OwnershipMap {
        Self(
            self.0
                .iter()
                .filter(|(a, _)| a.ledger == ledger)
                .map(|(a, o)| (a.clone(), o.clone()))
                .collect(),
        )
    }
}

impl FromIterator<(AssetId, OwnerSet)> for OwnershipMap {
    fn from_iter<I: IntoIterator<Item = (AssetId, OwnerSet)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Which of the four ownership functions a violation refers to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum MapKind {
    Io1,
    Io2,
    Fo1,
    Fo2,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Io1 => "IO1",
            MapKind::Io2 => "IO2",
            MapKind::Fo1 => "FO1",
            MapKind::Fo2 => "FO2",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid identifier {0:?}")]
    BadIdentifier(String),
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
}

/// One broken clause of the instance definition.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("empty party identifier")]
    EmptyPartyId,
    #[error("empty owner set for {asset} in {map}")]
    EmptyOwnerSet { asset: AssetId, map: MapKind },
    #[error("party {party} in {map}({asset}) is not in the party set")]
    UnknownParty {
        asset: AssetId,
        party: PartyId,
        map: MapKind,
    },
    #[error("asset {asset} has no entry in {map}")]
    MissingOwnership { asset: AssetId, map: MapKind },
    #[error("{map} has an entry for {asset}, which is not in the asset set")]
    StrayOwnership { asset: AssetId, map: MapKind },
    #[error("asset {asset} is listed under {expected} but belongs to {}", .asset.ledger)]
    WrongLedger { asset: AssetId, expected: Ledger },
    #[error("exchanged asset {asset} is not in the asset set of {}", .asset.ledger)]
    ExchangeAssetUnknown { asset: AssetId },
    #[error("FO equals IO for exchanged asset {asset}")]
    FinalEqualsInitial { asset: AssetId },
    #[error("FO differs from IO for non-exchanged asset {asset}")]
    UnexchangedAssetChanged { asset: AssetId },
}

/// The clause a violation breaks, without its payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Clause {
    PartyId,
    EmptyOwnerSet,
    PartyMembership,
    OwnershipTotal,
    AssetLedger,
    ExchangeSubset,
    FinalDiffers,
    UnexchangedFixed,
}

impl Violation {
    pub fn clause(&self) -> Clause {
        match self {
            Violation::EmptyPartyId => Clause::PartyId,
            Violation::EmptyOwnerSet { .. } => Clause::EmptyOwnerSet,
            Violation::UnknownParty { .. } => Clause::PartyMembership,
            Violation::MissingOwnership { .. } | Violation::StrayOwnership { .. } => Clause::OwnershipTotal,
            Violation::WrongLedger { .. } => Clause::AssetLedger,
            Violation::ExchangeAssetUnknown { .. } => Clause::ExchangeSubset,
            Violation::FinalEqualsInitial { .. } => Clause::FinalDiffers,
            Violation::UnexchangedAssetChanged { .. } => Clause::UnexchangedFixed,
        }
    }
}

/// A two-ledger exchange: who owns what now, and who should own it after.
///
/// Fields are public so that scenario authors and tests can build
/// deliberately broken instances; [`GaeInstance::validate`] reports every
/// broken clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaeInstance {
    pub parties: BTreeSet<PartyId>,
    pub assets1: BTreeSet<AssetId>,
    pub assets2: BTreeSet<AssetId>,
    pub exchange1: BTreeSet<AssetId>,
    pub exchange2: BTreeSet<AssetId>,
    pub io1: OwnershipMap,
    pub io2: OwnershipMap,
    pub fo1: OwnershipMap,
    pub fo2: OwnershipMap,
}

impl GaeInstance {
    pub fn builder() -> InstanceBuilder {
        InstanceBuilder::default()
    }

    pub fn assets(&self, ledger: Ledger) -> &BTreeSet<AssetId> {
        match ledger {
            Ledger::L1 => &self.assets1,
            Ledger::L2 => &self.assets2,
        }
    }

    pub fn exchange(&self, ledger: Ledger) -> &BTreeSet<AssetId> {
        match ledger {
            Ledger::L1 => &self.exchange1,
            Ledger::L2 => &self.exchange2,
        }
    }

    pub fn initial(&self, ledger: Ledger) -> &OwnershipMap {
        match ledger {
            Ledger::L1 => &self.io1,
            Ledger::L2 => &self.io2,
        }
    }

    pub fn target(&self, ledger: Ledger) -> &OwnershipMap {
        match ledger {
            Ledger::L1 => &self.fo1,
            Ledger::L2 => &self.fo2,
        }
    }

    /// Initial owners of an asset on its own ledger.
    pub fn io(&self, asset: &AssetId) -> &OwnerSet {
        self.initial(asset.ledger)
            .get(asset)
            .expect("asset has an initial owner set")
    }

    /// Final owners of an asset on its own ledger.
    pub fn fo(&self, asset: &AssetId) -> &OwnerSet {
        self.target(asset.ledger)
            .get(asset)
            .expect("asset has a final owner set")
    }

    /// Whether `party` appears in IO(a) or FO(a) for an exchanged asset `a`.
    pub fn is_relevant(&self, party: &PartyId, asset: &AssetId) -> bool {
        self.io(asset).contains(party) || self.fo(asset).contains(party)
    }

    /// All exchanged assets of both ledgers, L1 first.
    pub fn exchanged(&self) -> impl Iterator<Item = &AssetId> {
        self.exchange1.iter().chain(self.exchange2.iter())
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.parties.iter().any(|p| p.as_str().is_empty()) {
            out.push(Violation::EmptyPartyId);
        }
        for ledger in Ledger::BOTH {
            let assets = self.assets(ledger);
            for asset in assets {
                if asset.ledger != ledger {
                    out.push(Violation::WrongLedger {
                        asset: asset.clone(),
                        expected: ledger,
                    });
                }
            }
            let (io_kind, fo_kind) = match ledger {
                Ledger::L1 => (MapKind::Io1, MapKind::Fo1),
                Ledger::L2 => (MapKind::Io2, MapKind::Fo2),
            };
            for (map, kind) in [(self.initial(ledger), io_kind), (self.target(ledger), fo_kind)] {
                for asset in assets {
                    match map.get(asset) {
                        None => out.push(Violation::MissingOwnership {
                            asset: asset.clone(),
                            map: kind,
                        }),
                        Some(owners) if owners.is_empty() => out.push(Violation::EmptyOwnerSet {
                            asset: asset.clone(),
                            map: kind,
                        }),
                        Some(owners) => {
                            for party in owners.iter().filter(|p| !self.parties.contains(*p)) {
                                out.push(Violation::UnknownParty {
                                    asset: asset.clone(),
                                    party: party.clone(),
                                    map: kind,
                                });
                            }
                        }
                    }
                }
                for asset in map.assets().filter(|a| !assets.contains(*a)) {
                    out.push(Violation::StrayOwnership {
                        asset: asset.clone(),
                        map: kind,
                    });
                }
            }
            let exchange = self.exchange(ledger);
            for asset in exchange.iter().filter(|a| !assets.contains(*a)) {
                out.push(Violation::ExchangeAssetUnknown { asset: asset.clone() });
            }
            for asset in assets {
                let (Some(io), Some(fo)) = (self.initial(ledger).get(asset), self.target(ledger).get(asset)) else {
                    continue;
                };
                if exchange.contains(asset) {
                    if io == fo {
                        out.push(Violation::FinalEqualsInitial { asset: asset.clone() });
                    }
                } else if io != fo {
                    out.push(Violation::UnexchangedAssetChanged { asset: asset.clone() });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// Incremental construction of an instance from transfer lines.
#[derive(Default, Clone)]
pub struct InstanceBuilder {
    parties: Option<BTreeSet<PartyId>>,
    lines: Vec<(AssetId, OwnerSet, Option<OwnerSet>)>,
}

impl InstanceBuilder {
    /// Fixes the party set explicitly. Without this call the party set is the
    /// union of all owner sets.
    pub fn parties<'a>(mut self, parties: impl IntoIterator<Item = &'a str>) -> Self {
        self.parties = Some(parties.into_iter().map(PartyId::from).collect());
        self
    }

    pub fn party_set(mut self, parties: BTreeSet<PartyId>) -> Self {
        self.parties = Some(parties);
        self
    }

    /// `ledger: name: {initial} -> {final}`
    pub fn transfer(mut self, ledger: Ledger, name: &str, initial: &[&str], fin: &[&str]) -> Self {
        self.lines.push((
            AssetId::new(ledger, name),
            owner_set(initial.iter().copied()),
            Some(owner_set(fin.iter().copied())),
        ));
        self
    }

    /// An asset that stays with its owners.
    pub fn hold(mut self, ledger: Ledger, name: &str, owners: &[&str]) -> Self {
        self.lines
            .push((AssetId::new(ledger, name), owner_set(owners.iter().copied()), None));
        self
    }

    pub fn line(mut self, asset: AssetId, initial: OwnerSet, fin: Option<OwnerSet>) -> Self {
        self.lines.push((asset, initial, fin));
        self
    }

    pub fn build(self) -> GaeInstance {
        let mut inst = GaeInstance {
            parties: BTreeSet::new(),
            assets1: BTreeSet::new(),
            assets2: BTreeSet::new(),
            exchange1: BTreeSet::new(),
            exchange2: BTreeSet::new(),
            io1: OwnershipMap::new(),
            io2: OwnershipMap::new(),
            fo1: OwnershipMap::new(),
            fo2: OwnershipMap::new(),
        };
        let mut seen = BTreeSet::new();
        for (asset, initial, fin) in self.lines {
            seen.extend(initial.iter().cloned());
            if let Some(f) = &fin {
                seen.extend(f.iter().cloned());
            }
            let (assets, exchange, io, fo) = match asset.ledger {
                Ledger::L1 => (&mut inst.assets1, &mut inst.exchange1, &mut inst.io1, &mut inst.fo1),
                Ledger::L2 => (&mut inst.assets2, &mut inst.exchange2, &mut inst.io2, &mut inst.fo2),
            };
            assets.insert(asset.clone());
            match fin {
                Some(f) => {
                    exchange.insert(asset.clone());
                    fo.insert(asset.clone(), f);
                }
                None => {
                    fo.insert(asset.clone(), initial.clone());
                }
            }
            io.insert(asset, initial);
        }
        inst.parties = self.parties.unwrap_or(seen);
        inst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Ledger::*;

    pub(crate) fn complex_example() -> GaeInstance {
        GaeInstance::builder()
            .transfer(L1, "Currency", &["X", "Y"], &["W", "Y", "Z"])
            .transfer(L1, "Security", &["T", "U"], &["V"])
            .transfer(L1, "Diamond", &["Z"], &["V"])
            .transfer(L2, "Car", &["T"], &["T", "U", "W"])
            .transfer(L2, "House", &["Z"], &["T", "X", "Y"])
            .build()
    }

    #[test]
    fn complex_example_is_valid() {
        assert_eq!(complex_example().validate(), Ok(()));
        assert_eq!(complex_example().parties.len(), 7);
    }

    #[test]
    fn identity_transfer_is_rejected() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &["X"])
            .transfer(L2, "N", &["Y"], &["X"])
            .build();
        let errs = inst.validate().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].to_string(), "FO equals IO for exchanged asset M");
    }

    #[test]
    fn empty_final_owner_set_is_rejected() {
        let inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &[])
            .transfer(L2, "N", &["Y"], &["X"])
            .build();
        let errs = inst.validate().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().starts_with("empty owner set"));
        assert_eq!(errs[0].clause(), Clause::EmptyOwnerSet);
    }

    #[test]
    fn explicit_party_set_must_cover_owners() {
        let inst = GaeInstance::builder()
            .parties(["X", "Y"])
            .transfer(L1, "M", &["X", "W"], &["Y"])
            .transfer(L2, "N", &["Y"], &["X", "W"])
            .build();
        let errs = inst.validate().unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|v| v.clause() == Clause::PartyMembership));
    }

    #[test]
    fn exchange_set_must_be_subset() {
        let mut inst = complex_example();
        inst.exchange2.insert(AssetId::new(L2, "Boat"));
        let errs = inst.validate().unwrap_err();
        assert_eq!(
            errs,
            vec![Violation::ExchangeAssetUnknown {
                asset: AssetId::new(L2, "Boat")
            }]
        );
    }

    #[test]
    fn held_asset_must_not_move() {
        let mut inst = GaeInstance::builder()
            .transfer(L1, "M", &["X"], &["Y"])
            .hold(L1, "Gold", &["X"])
            .transfer(L2, "N", &["Y"], &["X"])
            .build();
        assert_eq!(inst.validate(), Ok(()));
        inst.fo1.insert(AssetId::new(L1, "Gold"), owner_set(["Y"]));
        let errs = inst.validate().unwrap_err();
        assert_eq!(errs[0].clause(), Clause::UnexchangedFixed);
    }

    #[test]
    fn identifiers() {
        assert!(PartyId::parse("X").is_ok());
        assert!(PartyId::parse("").is_err());
        assert!(PartyId::parse("a|b").is_err());
        assert_eq!(fmt_set(&owner_set(["Y", "X"])), "{X,Y}");
    }
}
