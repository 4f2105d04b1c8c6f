//! A trusted in-process coordinator standing in for the two fair MPC
//! computations: F1 hands every participant the digest of the combined
//! secrets, F2 hands every participant the combined secrets themselves.
//! Delivery is all-or-none, and F2 never delivers after the release deadline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ledger::{Event, EventKind, HashValue, Preimage, Source, Tick};
use crate::model::{join_parties, PartyId};

pub const MIN_SECRET_LEN: usize = 16;
pub const SECRET_LEN: usize = 32;

#[derive(Clone, PartialEq, Eq)]
pub struct PartySecret {
    pub party: PartyId,
    pub value: Vec<u8>,
}

impl fmt::Debug for PartySecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartySecret({}, {} bytes)", self.party, self.value.len())
    }
}

/// One fresh secret per participant, drawn from a seeded stream in
/// participant order.
pub fn sample_secrets<'a>(participants: impl IntoIterator<Item = &'a PartyId>, seed: u64) -> Vec<PartySecret> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    participants
        .into_iter()
        .map(|p| {
            let mut value = vec![0u8; SECRET_LEN];
            rng.fill_bytes(&mut value);
            PartySecret {
                party: p.clone(),
                value,
            }
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MpcError {
    #[error("no secrets to combine")]
    NoSecrets,
    #[error("two secrets for {0}")]
    DuplicateParty(PartyId),
    #[error("empty secret from {0}")]
    EmptySecret(PartyId),
    #[error("secret from {0} is shorter than {MIN_SECRET_LEN} bytes")]
    ShortSecret(PartyId),
    #[error("no secret from participant {0}")]
    MissingSecret(PartyId),
    #[error("{0} is not a participant")]
    NotParticipant(PartyId),
    #[error("session is {found}, expected {expected}")]
    WrongPhase { expected: Phase, found: Phase },
    #[error("release requested at {tick}, after the deadline {deadline}")]
    DeadlinePassed { tick: Tick, deadline: Tick },
}

/// The combiner: secrets in party order, each preceded by its length as a
/// 4-byte big-endian integer. Input order does not matter.
pub fn combine(secrets: &[PartySecret]) -> Result<Preimage, MpcError> {
    if secrets.is_empty() {
        return Err(MpcError::NoSecrets);
    }
    let mut sorted: Vec<&PartySecret> = secrets.iter().collect();
    sorted.sort_by(|a, b| a.party.cmp(&b.party));
    let mut out = Vec::new();
    for pair in sorted.windows(2) {
        if pair[0].party == pair[1].party {
            return Err(MpcError::DuplicateParty(pair[0].party.clone()));
        }
    }
    for s in sorted {
        if s.value.is_empty() {
            return Err(MpcError::EmptySecret(s.party.clone()));
        }
        out.extend_from_slice(&(s.value.len() as u32).to_be_bytes());
        out.extend_from_slice(&s.value);
    }
    Ok(Preimage::new(out).expect("non-empty"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum MpcBehavior {
    #[default]
    Honest,
    Abort,
    /// Holds back the output by this many ticks.
    Delay(Tick),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Collecting,
    CompleteF1,
    ReleasedF2,
    Aborted,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Collecting => "COLLECTING",
            Phase::CompleteF1 => "COMPLETE_F1",
            Phase::ReleasedF2 => "RELEASED_F2",
            Phase::Aborted => "ABORTED",
        })
    }
}

#[derive(Clone, Debug)]
pub struct MpcSession {
    participants: BTreeSet<PartyId>,
    phase: Phase,
    secrets: Vec<PartySecret>,
    hash_output: Option<HashValue>,
    preimage_output: Option<Preimage>,
    release_deadline: Option<Tick>,
    release_tick: Option<Tick>,
    transcript: Vec<Event>,
}

fn aborters(participants: &BTreeSet<PartyId>, behaviors: &BTreeMap<PartyId, MpcBehavior>) -> Vec<PartyId> {
    participants
        .iter()
        .filter(|p| behaviors.get(*p) == Some(&MpcBehavior::Abort))
        .cloned()
        .collect()
}

impl MpcSession {
    pub fn new(participants: BTreeSet<PartyId>) -> Self {
        Self {
            participants,
            phase: Phase::Collecting,
            secrets: Vec::new(),
            hash_output: None,
            preimage_output: None,
            release_deadline: None,
            release_tick: None,
            transcript: Vec::new(),
        }
    }

    pub fn participants(&self) -> &BTreeSet<PartyId> {
        &self.participants
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn hash_output(&self) -> Option<HashValue> {
        self.hash_output
    }

    pub fn preimage_output(&self) -> Option<&Preimage> {
        self.preimage_output.as_ref()
    }

    pub fn release_deadline(&self) -> Option<Tick> {
        self.release_deadline
    }

    pub fn release_tick(&self) -> Option<Tick> {
        self.release_tick
    }

    pub fn transcript(&self) -> &[Event] {
        &self.transcript
    }

    pub fn set_release_deadline(&mut self, deadline: Tick) {
        self.release_deadline = Some(deadline);
    }

    /// Participants holding the F2 output.
    pub fn holders(&self) -> BTreeSet<PartyId> {
        if self.phase == Phase::ReleasedF2 {
            self.participants.clone()
        } else {
            BTreeSet::new()
        }
    }

    fn expect(&self, expected: Phase) -> Result<(), MpcError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(MpcError::WrongPhase {
                expected,
                found: self.phase,
            })
        }
    }

    fn abort(&mut self, tick: Tick, step: &str, by: &[PartyId]) {
        self.phase = Phase::Aborted;
        self.transcript.push(
            Event::new(tick, Source::Mpc, EventKind::Abort)
                .detail("step", step)
                .detail("by", join_parties(by, ",")),
        );
    }

    /// Joint hash computation. Any aborting participant leaves everybody
    /// without output.
    pub fn run_f1(
        &mut self,
        secrets: &[PartySecret],
        behaviors: &BTreeMap<PartyId, MpcBehavior>,
        tick: Tick,
    ) -> Result<(), MpcError> {
        self.expect(Phase::Collecting)?;
        for s in secrets {
            if !self.participants.contains(&s.party) {
                return Err(MpcError::NotParticipant(s.party.clone()));
            }
            if s.value.len() < MIN_SECRET_LEN {
                return Err(MpcError::ShortSecret(s.party.clone()));
            }
        }
        for p in &self.participants {
            if !secrets.iter().any(|s| &s.party == p) {
                return Err(MpcError::MissingSecret(p.clone()));
            }
        }
        let x = combine(secrets)?;
        let quitters = aborters(&self.participants, behaviors);
        if !quitters.is_empty() {
            self.abort(tick, "f1", &quitters);
            return Ok(());
        }
        let h = x.digest();
        self.secrets = secrets.to_vec();
        self.hash_output = Some(h);
        self.phase = Phase::CompleteF1;
        self.transcript.push(
            Event::new(tick, Source::Mpc, EventKind::F1)
                .detail("hash", h.to_hex())
                .detail("to", join_parties(&self.participants, ",")),
        );
        Ok(())
    }

    /// Joint preimage release. Delays push delivery later, but never past the
    /// deadline; any abort means nobody learns the preimage.
    pub fn run_f2(&mut self, tick: Tick, behaviors: &BTreeMap<PartyId, MpcBehavior>) -> Result<(), MpcError> {
        self.expect(Phase::CompleteF1)?;
        if let Some(deadline) = self.release_deadline {
            if tick > deadline {
                return Err(MpcError::DeadlinePassed { tick, deadline });
            }
        }
        let quitters = aborters(&self.participants, behaviors);
        if !quitters.is_empty() {
            self.abort(tick, "f2", &quitters);
            return Ok(());
        }
        let delay = self
            .participants
            .iter()
            .filter_map(|p| match behaviors.get(p) {
                Some(MpcBehavior::Delay(d)) => Some(*d),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut release = tick + delay;
        if let Some(deadline) = self.release_deadline {
            release = release.min(deadline);
        }
        let x = combine(&self.secrets)?;
        debug_assert_eq!(Some(x.digest()), self.hash_output);
        self.preimage_output = Some(x);
        self.release_tick = Some(release);
        self.phase = Phase::ReleasedF2;
        self.transcript.push(
            Event::new(release, Source::Mpc, EventKind::F2)
                .detail("hash", self.hash_output.expect("set by f1").to_hex())
                .detail("to", join_parties(&self.participants, ",")),
        );
        Ok(())
    }
}

/// Outcome of a dictionary attack on a joint hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuessReport {
    pub candidates_tried: usize,
    pub matched: bool,
}

/// Tries to rebuild the preimage of `hash` from the `known` secrets, filling
/// each missing participant's slot with every dictionary entry. A bounded
/// stand-in for the claim that no strict subset of participants can find the
/// preimage; it proves nothing cryptographically.
pub fn preimage_unguessable(
    hash: HashValue,
    participants: &BTreeSet<PartyId>,
    known: &[PartySecret],
    dictionary: &[Vec<u8>],
) -> GuessReport {
    let missing: Vec<&PartyId> = participants
        .iter()
        .filter(|p| !known.iter().any(|s| &s.party == *p))
        .collect();
    let mut tried = 0;
    let mut attempt = |fill: Vec<PartySecret>| {
        tried += 1;
        let mut all = known.to_vec();
        all.extend(fill);
        combine(&all).map(|x| x.digest() == hash).unwrap_or(false)
    };
    let matched = if missing.is_empty() {
        attempt(Vec::new())
    } else {
        missing
            .iter()
            .map(|_| dictionary.iter())
            .multi_cartesian_product()
            .any(|guess| {
                let fill = missing
                    .iter()
                    .zip(guess)
                    .map(|(p, v)| PartySecret {
                        party: (*p).clone(),
                        value: v.clone(),
                    })
                    .collect();
                attempt(fill)
            })
    };
    GuessReport {
        candidates_tried: tried,
        matched,
    }
}

/// Adversarial guesses: small structured values (all-zero, all-one, counters)
/// padded to secret length, followed by seeded random strings.
pub fn guess_dictionary(count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut out = Vec::with_capacity(count);
    for b in [0u8, 0xff] {
        out.push(vec![b; SECRET_LEN]);
    }
    let mut i = 0u64;
    while out.len() < count.min(256) {
        let mut v = vec![0u8; SECRET_LEN];
        v[SECRET_LEN - 8..].copy_from_slice(&i.to_be_bytes());
        out.push(v);
        i += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let mut v = vec![0u8; SECRET_LEN];
        rng.fill_bytes(&mut v);
        out.push(v);
    }
    out.truncate(count);
    out
}
