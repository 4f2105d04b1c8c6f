//! Scenario files: one `key: value` per line, `#` comments, transfer lines
//! in set-arrow notation.
//!
//! ```text
//! title: jointly owned asset exchange
//! L1: M: {X,W} -> {Y}
//! L2: N: {Y} -> {X,W}
//! L1: Fee: {X}
//! protocol: HTLC_MS
//! attack: ms_collusion(W,Y)
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::adversary::{Attack, AttackKind, Strategy};
use crate::ledger::{LockMode, Tick};
use crate::model::{fmt_set, AssetId, GaeInstance, Ledger, OwnerSet, PartyId, Violation};
use crate::protocol::Protocol;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferLine {
    pub asset: AssetId,
    pub initial: OwnerSet,
    /// `None` for an asset that is held, not exchanged.
    pub fin: Option<OwnerSet>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub title: Option<String>,
    /// Leading comment lines, kept for rendering.
    pub comments: Vec<String>,
    pub parties: Option<Vec<PartyId>>,
    pub transfers: Vec<TransferLine>,
    pub protocol: Option<Protocol>,
    pub t: Tick,
    pub lock_mode: LockMode,
    pub atomic_gults: bool,
    pub seed: u64,
    pub strategies: Vec<(PartyId, Strategy)>,
    pub attack: Option<Attack>,
    pub enumerate: Option<usize>,
    pub classify_only: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            title: None,
            comments: Vec::new(),
            parties: None,
            transfers: Vec::new(),
            protocol: None,
            t: 8,
            lock_mode: LockMode::PerAsset,
            atomic_gults: true,
            seed: 0,
            strategies: Vec::new(),
            attack: None,
            enumerate: None,
            classify_only: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: {violation}")]
    Invalid { line: usize, violation: Violation },
}

fn syntax<T>(line: usize, reason: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Syntax {
        line,
        reason: reason.into(),
    })
}

fn party(line: usize, s: &str) -> Result<PartyId, ScenarioError> {
    PartyId::parse(s.trim()).or_else(|_| syntax(line, format!("bad party name {:?}", s.trim())))
}

fn owner_set(line: usize, s: &str) -> Result<OwnerSet, ScenarioError> {
    let s = s.trim();
    let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) else {
        return syntax(line, format!("expected {{...}}, found {s:?}"));
    };
    if inner.trim().is_empty() {
        return Ok(OwnerSet::new());
    }
    inner.split(',').map(|p| party(line, p)).collect()
}

fn flag(line: usize, s: &str) -> Result<bool, ScenarioError> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => syntax(line, format!("expected true or false, found {s:?}")),
    }
}

fn number<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, ScenarioError> {
    s.parse()
        .or_else(|_| syntax(line, format!("expected a number, found {s:?}")))
}

fn parse_attack(line: usize, s: &str) -> Result<Attack, ScenarioError> {
    let bad = || syntax(line, format!("bad attack {s:?}"));
    let Some((name, rest)) = s.split_once('(') else {
        return bad();
    };
    let Some(args) = rest.trim().strip_suffix(')') else {
        return bad();
    };
    let Some(kind) = AttackKind::parse(name.trim()) else {
        return syntax(line, format!("unknown attack {:?}", name.trim()));
    };
    let mut args = args.split(',').map(|a| party(line, a));
    let colluder = match args.next() {
        Some(c) => c?,
        None => return bad(),
    };
    let partners: OwnerSet = args.collect::<Result<_, _>>()?;
    if partners.is_empty() {
        return bad();
    }
    Ok(Attack {
        kind,
        colluder,
        partners,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut in_header = true;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if let Some(c) = line.strip_prefix('#') {
            if in_header {
                sc.comments.push(c.trim().to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        in_header = false;
        let Some(split) = line.find([':', '=']) else {
            return syntax(n, format!("expected `key: value`, found {line:?}"));
        };
        let (key, value) = (line[..split].trim(), line[split + 1..].trim());
        match key {
            "L1" | "L2" => {
                let ledger = if key == "L1" { Ledger::L1 } else { Ledger::L2 };
                let Some((name, sets)) = value.split_once(':') else {
                    return syntax(n, "expected `L1: Asset: {..} -> {..}`");
                };
                let name = name.trim();
                if !crate::model::is_identifier(name) {
                    return syntax(n, format!("bad asset name {name:?}"));
                }
                let asset = AssetId::new(ledger, name);
                if sc.transfers.iter().any(|t| t.asset == asset) {
                    return syntax(n, format!("asset {name} listed twice"));
                }
                let (initial, fin) = match sets.split_once("->") {
                    Some((a, b)) => (owner_set(n, a)?, Some(owner_set(n, b)?)),
                    None => (owner_set(n, sets)?, None),
                };
                sc.transfers.push(TransferLine {
                    asset,
                    initial,
                    fin,
                    line: n,
                });
            }
            "title" => sc.title = Some(value.to_string()),
            "parties" => sc.parties = Some(value.split(',').map(|p| party(n, p)).collect::<Result<Vec<_>, _>>()?),
            "protocol" => {
                sc.protocol = Some(
                    value
                        .parse()
                        .or_else(|_| syntax(n, format!("unknown protocol {value:?}")))?,
                )
            }
            "T" => sc.t = number(n, value)?,
            "lock_mode" => {
                sc.lock_mode = value
                    .parse()
                    .or_else(|_| syntax(n, format!("unknown lock mode {value:?}")))?
            }
            "atomic_gults" => sc.atomic_gults = flag(n, value)?,
            "seed" => sc.seed = number(n, value)?,
            "classify_only" => sc.classify_only = flag(n, value)?,
            "strategy" => {
                let Some((who, what)) = value.split_once('=') else {
                    return syntax(n, "expected `strategy: P = kind(...)`");
                };
                let who = party(n, who)?;
                let what = Strategy::parse(what).or_else(|e| syntax(n, e.to_string()))?;
                sc.strategies.push((who, what));
            }
            "attack" => sc.attack = Some(parse_attack(n, value)?),
            "enumerate" => {
                let bound = value
                    .strip_prefix("bound")
                    .map(|r| r.trim_start().trim_start_matches('='));
                match bound {
                    Some(b) => sc.enumerate = Some(number(n, b.trim())?),
                    None => return syntax(n, "expected `enumerate: bound=k`"),
                }
            }
            _ => return syntax(n, format!("unknown key {key:?}")),
        }
    }
    if sc.enumerate.is_some() && (sc.attack.is_some() || !sc.strategies.is_empty()) {
        return syntax(0, "enumerate cannot be combined with strategy or attack lines");
    }
    sc.instance()?;
    Ok(sc)
}

impl Scenario {
    /// The exchange instance, validated. Errors point at the offending
    /// transfer line.
    pub fn instance(&self) -> Result<GaeInstance, ScenarioError> {
        let mut b = GaeInstance::builder();
        if let Some(ps) = &self.parties {
            b = b.party_set(ps.iter().cloned().collect());
        }
        for t in &self.transfers {
            b = b.line(t.asset.clone(), t.initial.clone(), t.fin.clone());
        }
        let inst = b.build();
        if let Err(mut vs) = inst.validate() {
            let v = vs.remove(0);
            let line = violation_asset(&v)
                .and_then(|a| self.transfers.iter().find(|t| &t.asset == a))
                .map_or(0, |t| t.line);
            return Err(ScenarioError::Invalid { line, violation: v });
        }
        Ok(inst)
    }

    /// The selected protocol; MPHTLC when the file names none.
    pub fn protocol_or_default(&self) -> Protocol {
        self.protocol.unwrap_or(Protocol::Mphtlc)
    }

    /// Canonical text: parsing it gives back an equal scenario, line numbers
    /// aside.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        if let Some(t) = &self.title {
            let _ = writeln!(out, "title: {t}");
        }
        if let Some(ps) = &self.parties {
            let names: Vec<&str> = ps.iter().map(PartyId::as_str).collect();
            let _ = writeln!(out, "parties: {}", names.join(", "));
        }
        for t in &self.transfers {
            match &t.fin {
                Some(f) => {
                    let _ = writeln!(
                        out,
                        "{}: {}: {} -> {}",
                        t.asset.ledger,
                        t.asset.name,
                        fmt_set(&t.initial),
                        fmt_set(f)
                    );
                }
                None => {
                    let _ = writeln!(out, "{}: {}: {}", t.asset.ledger, t.asset.name, fmt_set(&t.initial));
                }
            }
        }
        if let Some(p) = self.protocol {
            let _ = writeln!(out, "protocol: {p}");
        }
        let d = Scenario::default();
        if self.t != d.t {
            let _ = writeln!(out, "T: {}", self.t);
        }
        if self.lock_mode != d.lock_mode {
            let _ = writeln!(out, "lock_mode: {}", self.lock_mode.as_str());
        }
        if self.atomic_gults != d.atomic_gults {
            let _ = writeln!(out, "atomic_gults: {}", self.atomic_gults);
        }
        if self.seed != d.seed {
            let _ = writeln!(out, "seed: {}", self.seed);
        }
        if self.classify_only {
            out.push_str("classify_only: true\n");
        }
        for (p, s) in &self.strategies {
            let _ = writeln!(out, "strategy: {p} = {}", s.to_scenario());
        }
        if let Some(a) = &self.attack {
            let _ = writeln!(out, "attack: {}", a.name());
        }
        if let Some(k) = self.enumerate {
            let _ = writeln!(out, "enumerate: bound={k}");
        }
        out
    }

    /// Same content with line numbers cleared, for comparisons.
    pub fn without_lines(&self) -> Scenario {
        let mut s = self.clone();
        for t in &mut s.transfers {
            t.line = 0;
        }
        s
    }
}

fn violation_asset(v: &Violation) -> Option<&AssetId> {
    match v {
        Violation::EmptyPartyId => None,
        Violation::EmptyOwnerSet { asset, .. }
        | Violation::UnknownParty { asset, .. }
        | Violation::MissingOwnership { asset, .. }
        | Violation::StrayOwnership { asset, .. }
        | Violation::WrongLedger { asset, .. }
        | Violation::ExchangeAssetUnknown { asset }
        | Violation::FinalEqualsInitial { asset }
        | Violation::UnexchangedAssetChanged { asset } => Some(asset),
    }
}
