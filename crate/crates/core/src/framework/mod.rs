//! Participants, events with field-level visibility, the message ledger and
//! the secure-and-private-simulation audit.
//!
//! Records are stored in plaintext; privacy is enforced at the query
//! interface of [`EventStore`]. Protocol traffic is kept in a
//! [`MessageLedger`], which holds payload digests for sealed messages and
//! plaintext only for messages that are public by construction.

mod audit;
mod ledger;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use audit::{
    audit_simulation, AuditError, AuditReport, IndividualDecryption, LeakFlag, LeakKind,
    LeakagePredicate, PlaintextOnSealedChannel, PublicRoundData,
};
pub use ledger::{
    parse_transcript, ComputationStep, LedgerError, Message, MessageKind, MessageLedger, Payload,
    TranscriptLine,
};
pub use store::{
    default_access, AccessMap, EventStore, Field, FieldValue, LedgerEvent, Quality, StoreError,
    TransactionRecord,
};

/// Role of a network participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantKind {
    Buyer,
    Seller,
    Monitor,
    SoftwareEntity,
}

/// Participant identifier. The textual form encodes the role:
/// `b<i>`, `s<i>`, `m<i>` or `se`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticipantId {
    kind: ParticipantKind,
    index: u32,
}

impl ParticipantId {
    pub const SOFTWARE_ENTITY: ParticipantId = ParticipantId {
        kind: ParticipantKind::SoftwareEntity,
        index: 0,
    };

    pub fn buyer(index: usize) -> Self {
        Self {
            kind: ParticipantKind::Buyer,
            index: index as u32,
        }
    }

    pub fn seller(index: usize) -> Self {
        Self {
            kind: ParticipantKind::Seller,
            index: index as u32,
        }
    }

    pub fn monitor(index: usize) -> Self {
        Self {
            kind: ParticipantKind::Monitor,
            index: index as u32,
        }
    }

    pub fn kind(&self) -> ParticipantKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParticipantKind::Buyer => write!(f, "b{}", self.index),
            ParticipantKind::Seller => write!(f, "s{}", self.index),
            ParticipantKind::Monitor => write!(f, "m{}", self.index),
            ParticipantKind::SoftwareEntity => f.write_str("se"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid participant id `{0}`")]
pub struct ParseParticipantError(pub String);

impl FromStr for ParticipantId {
    type Err = ParseParticipantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "se" {
            return Ok(Self::SOFTWARE_ENTITY);
        }
        let err = || ParseParticipantError(s.to_string());
        let (kind, digits) = match s.as_bytes().first() {
            Some(b'b') => (ParticipantKind::Buyer, &s[1..]),
            Some(b's') => (ParticipantKind::Seller, &s[1..]),
            Some(b'm') => (ParticipantKind::Monitor, &s[1..]),
            _ => return Err(err()),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        // No leading zeros, so the text form stays canonical.
        if digits.len() > 1 && digits.starts_with('0') {
            return Err(err());
        }
        let index = digits.parse().map_err(|_| err())?;
        Ok(Self { kind, index })
    }
}

impl Serialize for ParticipantId {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParticipantId {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A registered network participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub kind: ParticipantKind,
}

impl From<ParticipantId> for Participant {
    fn from(id: ParticipantId) -> Self {
        Participant {
            id,
            kind: id.kind(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_text() {
        for id in [
            ParticipantId::buyer(0),
            ParticipantId::seller(12),
            ParticipantId::monitor(3),
            ParticipantId::SOFTWARE_ENTITY,
        ] {
            assert_eq!(id.to_string().parse::<ParticipantId>().unwrap(), id);
        }
    }

    #[test]
    fn rejects_malformed_ids() {
        for bad in ["", "x1", "b", "b01", "s-1", "se1", "m1a"] {
            assert!(bad.parse::<ParticipantId>().is_err(), "{bad}");
        }
    }
}
