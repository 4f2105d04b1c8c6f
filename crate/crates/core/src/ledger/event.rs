//! Event records and their pipe-delimited line form:
//! `tick|source|kind|assets|details`.
//!
//! `assets` is a comma-separated list of asset names, or `-`. `details` is a
//! `;`-separated list of `key=value` pairs in emission order, or `-`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::Ledger;

use super::Tick;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Ledger(Ledger),
    Mpc,
    Offchain,
    Party,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Ledger(l) => write!(f, "{l}"),
            Source::Mpc => f.write_str("mpc"),
            Source::Offchain => f.write_str("offchain"),
            Source::Party => f.write_str("party"),
        }
    }
}

impl FromStr for Source {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "L1" => Source::Ledger(Ledger::L1),
            "L2" => Source::Ledger(Ledger::L2),
            "mpc" => Source::Mpc,
            "offchain" => Source::Offchain,
            "party" => Source::Party,
            _ => return Err(()),
        })
    }
}

macro_rules! kinds {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum EventKind { $($variant),* }

        impl EventKind {
            pub fn as_str(self) -> &'static str {
                match self { $(EventKind::$variant => $text),* }
            }
        }

        impl FromStr for EventKind {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $($text => Ok(EventKind::$variant),)* _ => Err(()) }
            }
        }
    };
}

kinds! {
    Lock => "lock",
    Reveal => "reveal",
    Claim => "claim",
    Unlock => "unlock",
    Reject => "reject",
    F1 => "f1",
    F2 => "f2",
    Abort => "abort",
    Agree => "agree",
    Commit => "commit",
    Share => "share",
    Abstain => "abstain",
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub tick: Tick,
    pub source: Source,
    pub kind: EventKind,
    pub assets: Vec<String>,
    pub details: Vec<(String, String)>,
}

impl Event {
    pub fn new(tick: Tick, source: Source, kind: EventKind) -> Self {
        Self {
            tick,
            source,
            kind,
            assets: Vec::new(),
            details: Vec::new(),
        }
    }

    pub fn asset(mut self, name: impl Into<String>) -> Self {
        self.assets.push(name.into());
        self
    }

    pub fn detail(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.details.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.details.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_line(&self) -> String {
        let assets = if self.assets.is_empty() {
            "-".to_string()
        } else {
            self.assets.join(",")
        };
        let details = if self.details.is_empty() {
            "-".to_string()
        } else {
            self.details
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        format!("{}|{}|{}|{}|{}", self.tick, self.source, self.kind, assets, details)
    }

    pub fn parse_line(line: &str) -> Result<Self, EventParseError> {
        let bad = |why: &str| EventParseError {
            line: line.to_string(),
            reason: why.to_string(),
        };
        let fields: Vec<&str> = line.split('|').collect();
        let [tick, source, kind, assets, details] = fields[..] else {
            return Err(bad("expected 5 fields"));
        };
        let tick = tick.parse().map_err(|_| bad("tick"))?;
        let source = source.parse().map_err(|_| bad("source"))?;
        let kind = kind.parse().map_err(|_| bad("event kind"))?;
        let assets = match assets {
            "-" => Vec::new(),
            s => s.split(',').map(str::to_string).collect(),
        };
        let details = match details {
            "-" => Vec::new(),
            s => s
                .split(';')
                .map(|kv| {
                    kv.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| bad("detail without '='"))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            tick,
            source,
            kind,
            assets,
            details,
        })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad event line {line:?}: {reason}")]
pub struct EventParseError {
    pub line: String,
    pub reason: String,
}

/// Whether a line of a machine-format report is an event line (its first
/// field is a tick).
pub fn is_event_line(line: &str) -> bool {
    line.split('|')
        .next()
        .is_some_and(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_shape() {
        let e = Event::new(3, Source::Ledger(Ledger::L2), EventKind::Claim)
            .asset("N")
            .detail("by", "X")
            .detail("to.N", "W,X");
        assert_eq!(e.to_line(), "3|L2|claim|N|by=X;to.N=W,X");
        assert_eq!(Event::parse_line(&e.to_line()).unwrap(), e);
        let bare = Event::new(0, Source::Mpc, EventKind::Abort);
        assert_eq!(bare.to_line(), "0|mpc|abort|-|-");
        assert!(is_event_line("12|L1|lock|M|-"));
        assert!(!is_event_line("verdict|X|ALL_FINAL"));
    }

    proptest! {
        #[test]
        fn parse_inverts_format(
            tick in 0u64..1000,
            assets in proptest::collection::vec("[A-Za-z0-9_]{1,6}", 0..4),
            details in proptest::collection::vec(("[a-z.]{1,5}", "[A-Za-z0-9,@]{0,8}"), 0..4),
        ) {
            let mut e = Event::new(tick, Source::Ledger(Ledger::L1), EventKind::Lock);
            for a in assets { e = e.asset(a); }
            for (k, v) in details { e = e.detail(k, v); }
            prop_assert_eq!(Event::parse_line(&e.to_line()).unwrap(), e);
        }
    }
}
