//! Hash-chained round log.
//!
//! Each record carries the hash of its predecessor, so editing or dropping a
//! line breaks the chain. The log holds enough to recompute the verdict
//! without any secret: abort records for the NIZK variant, exit reports and
//! the dummy count for the trap variant.

use serde::{Deserialize, Serialize};
use sha3::{Digest, Sha3_256};
use thiserror::Error;

use super::exit::{decide_reports, DestroyReason, ExitReport, TrusteeVerdict};
use super::mix::{Abort, Step};
use super::{UserId, Variant};
use crate::grouping::{GroupId, ServerId};

/// How a round ended.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// NIZK variant finished with every check passing.
    Delivered,
    /// Trap variant: trustees released their keys.
    Released,
    /// Trap variant: trustees withheld their keys.
    Destroyed { reason: DestroyReason },
    /// NIZK variant: a member's step failed verification.
    Aborted { abort: Abort },
    /// A group lost more members than it and its buddies could cover.
    Unrecoverable { gid: GroupId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Start {
        round: u64,
        variant: Variant,
        groups: usize,
        messages: usize,
        iterations: usize,
    },
    Submission {
        user: UserId,
        gid: GroupId,
        accepted: bool,
    },
    Step {
        layer: usize,
        vertex: usize,
        server: ServerId,
        step: Step,
        digest: String,
    },
    Abort {
        abort: Abort,
        reporter: ServerId,
    },
    Recovered {
        gid: GroupId,
        positions: usize,
    },
    /// Manifest signatures already checked; only the count matters from here.
    Manifest {
        dummies: u64,
        expected: Vec<(GroupId, ServerId)>,
    },
    Report {
        report: ExitReport,
    },
    Outcome {
        outcome: Outcome,
    },
    /// Users traced after a destroyed round.
    Blamed {
        users: Vec<UserId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub prev: String,
    pub hash: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("record {0} does not chain to its predecessor")]
    BrokenChain(u64),
    #[error("transcript has no outcome record")]
    NoOutcome,
    #[error("recorded outcome {recorded:?} but replay gives {replayed:?}")]
    Mismatch { recorded: Outcome, replayed: Outcome },
}

fn link(prev: &str, seq: u64, event: &Event) -> String {
    let mut h = Sha3_256::new();
    h.update(prev.as_bytes());
    h.update(seq.to_be_bytes());
    h.update(serde_json::to_vec(event).expect("events serialize"));
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundTranscript {
    records: Vec<Record>,
}

impl RoundTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        let prev = self.records.last().map_or_else(|| "0".repeat(64), |r| r.hash.clone());
        let seq = self.records.len() as u64;
        let hash = link(&prev, seq, &event);
        self.records.push(Record { seq, prev, hash, event });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn head(&self) -> Option<&str> {
        self.records.last().map(|r| r.hash.as_str())
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| TranscriptError::Parse(i + 1, e.to_string())))
            .collect::<Result<Vec<Record>, _>>()?;
        Ok(Self { records })
    }

    pub fn verify_chain(&self) -> Result<(), TranscriptError> {
        let mut prev = "0".repeat(64);
        for (i, r) in self.records.iter().enumerate() {
            if r.seq != i as u64 || r.prev != prev || r.hash != link(&prev, r.seq, &r.event) {
                return Err(TranscriptError::BrokenChain(i as u64));
            }
            prev.clone_from(&r.hash);
        }
        Ok(())
    }

    /// Recomputes the outcome from the logged evidence and checks it against
    /// the recorded one.
    pub fn replay(&self) -> Result<Outcome, TranscriptError> {
        self.verify_chain()?;
        let recorded = self
            .events()
            .find_map(|e| if let Event::Outcome { outcome } = e { Some(outcome.clone()) } else { None })
            .ok_or(TranscriptError::NoOutcome)?;
        let variant =
            self.events().find_map(|e| if let Event::Start { variant, .. } = e { Some(*variant) } else { None });
        let replayed = self.derive(variant).unwrap_or_else(|| recorded.clone());
        if replayed != recorded {
            return Err(TranscriptError::Mismatch { recorded, replayed });
        }
        Ok(replayed)
    }

    fn derive(&self, variant: Option<Variant>) -> Option<Outcome> {
        if let Some(gid) = self.events().find_map(|e| match e {
            Event::Outcome { outcome: Outcome::Unrecoverable { gid } } => Some(*gid),
            _ => None,
        }) {
            return Some(Outcome::Unrecoverable { gid });
        }
        if let Some(abort) =
            self.events().find_map(|e| if let Event::Abort { abort, .. } = e { Some(*abort) } else { None })
        {
            return Some(Outcome::Aborted { abort });
        }
        match variant? {
            Variant::Nizk => Some(Outcome::Delivered),
            Variant::Trap => {
                let (dummies, expected) = self.events().find_map(|e| match e {
                    Event::Manifest { dummies, expected } => Some((*dummies, expected.clone())),
                    _ => None,
                })?;
                let reports: Vec<ExitReport> = self
                    .events()
                    .filter_map(|e| if let Event::Report { report } = e { Some(report.clone()) } else { None })
                    .collect();
                Some(match decide_reports(&reports, &expected, dummies) {
                    TrusteeVerdict::Release => Outcome::Released,
                    TrusteeVerdict::Destroy(reason) => Outcome::Destroyed { reason },
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(gid: GroupId, reporter: ServerId, traps_match: bool) -> ExitReport {
        ExitReport {
            gid,
            reporter,
            traps_match,
            inner_ok: true,
            traps: 1,
            inners: 1,
            inner_digests: vec![[gid as u8; 32]],
        }
    }

    fn trap_round(bit: bool, outcome: Outcome) -> RoundTranscript {
        let mut t = RoundTranscript::new();
        t.push(Event::Start { round: 3, variant: Variant::Trap, groups: 2, messages: 4, iterations: 2 });
        t.push(Event::Submission { user: 0, gid: 0, accepted: true });
        t.push(Event::Manifest { dummies: 0, expected: vec![(0, 1), (1, 2)] });
        t.push(Event::Report { report: report(0, 1, true) });
        t.push(Event::Report { report: report(1, 2, bit) });
        t.push(Event::Outcome { outcome });
        t
    }

    #[test]
    fn replay_reproduces_the_verdict() {
        let t = trap_round(true, Outcome::Released);
        let text = t.to_jsonl();
        let back = RoundTranscript::from_jsonl(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.replay().unwrap(), Outcome::Released);
        assert_eq!(back.replay(), back.replay());

        let destroyed = Outcome::Destroyed { reason: DestroyReason::TrapMismatch { gid: 1, server: 2 } };
        assert_eq!(trap_round(false, destroyed.clone()).replay().unwrap(), destroyed);
    }

    #[test]
    fn a_false_outcome_is_caught() {
        let t = trap_round(false, Outcome::Released);
        assert!(matches!(t.replay(), Err(TranscriptError::Mismatch { .. })));
    }

    #[test]
    fn editing_a_line_breaks_the_chain() {
        let t = trap_round(true, Outcome::Released);
        let text = t.to_jsonl().replacen("\"accepted\":true", "\"accepted\":false", 1);
        let edited = RoundTranscript::from_jsonl(&text).unwrap();
        assert_eq!(edited.verify_chain(), Err(TranscriptError::BrokenChain(1)));
        let full = t.to_jsonl();
        let mut lines: Vec<&str> = full.lines().collect();
        lines.remove(3);
        let dropped = RoundTranscript::from_jsonl(&lines.join("\n")).unwrap();
        assert_eq!(dropped.verify_chain(), Err(TranscriptError::BrokenChain(3)));
    }

    #[test]
    fn nizk_abort_replays() {
        let mut t = RoundTranscript::new();
        t.push(Event::Start { round: 0, variant: Variant::Nizk, groups: 1, messages: 1, iterations: 1 });
        let abort = Abort { gid: 0, accused: 4, step: Step::Shuffle };
        t.push(Event::Abort { abort, reporter: 2 });
        t.push(Event::Outcome { outcome: Outcome::Aborted { abort } });
        assert_eq!(t.replay().unwrap(), Outcome::Aborted { abort });
    }
}
