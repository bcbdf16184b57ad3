use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Participant, ParticipantId, ParticipantKind};
use crate::rational::{in_unit, serde_rational, Rational};

/// Quality of a delivered good.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quality {
    High,
    Low,
}

/// The four fields of a transaction record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Price,
    Cost,
    Quality,
    Rating,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::Price, Field::Cost, Field::Quality, Field::Rating];

    pub fn name(&self) -> &'static str {
        match self {
            Field::Price => "price",
            Field::Cost => "cost",
            Field::Quality => "quality",
            Field::Rating => "rating",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| StoreError::UnknownField(s.to_string()))
    }
}

/// Outcome of one buyer-seller transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    #[serde(with = "serde_rational")]
    pub price: Rational,
    #[serde(with = "serde_rational")]
    pub cost: Rational,
    pub quality: Quality,
    #[serde(with = "serde_rational")]
    pub rating: Rational,
}

impl TransactionRecord {
    fn validate(&self) -> Result<(), StoreError> {
        if self.price.is_negative() || self.cost.is_negative() {
            return Err(StoreError::InvalidRecord(
                "price and cost must be non-negative".into(),
            ));
        }
        if !in_unit(&self.rating) {
            return Err(StoreError::InvalidRecord(
                "rating must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn value_of(&self, field: Field) -> FieldValue {
        match field {
            Field::Price => FieldValue::Money(self.price.clone()),
            Field::Cost => FieldValue::Money(self.cost.clone()),
            Field::Quality => FieldValue::Quality(self.quality),
            Field::Rating => FieldValue::Rating(self.rating.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldValue {
    Money(Rational),
    Quality(Quality),
    Rating(Rational),
}

/// Per-participant set of readable fields for one event.
pub type AccessMap = BTreeMap<ParticipantId, BTreeSet<Field>>;

/// The default view of a transaction: the buyer reads price, quality and
/// rating; the seller reads price, cost and quality.
pub fn default_access(buyer: ParticipantId, seller: ParticipantId) -> AccessMap {
    let mut access = AccessMap::new();
    access.insert(buyer, [Field::Price, Field::Quality, Field::Rating].into());
    access.insert(seller, [Field::Price, Field::Cost, Field::Quality].into());
    access
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub event_id: u64,
    pub participants: BTreeSet<ParticipantId>,
    pub record: TransactionRecord,
    pub access: AccessMap,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("event has no participants")]
    EmptyParticipants,
    #[error("unknown field name `{0}`")]
    UnknownField(String),
    #[error("unknown participant {0}")]
    UnknownParticipant(ParticipantId),
    #[error("{0} is neither a participant of the event nor a granted observer")]
    UngrantedObserver(ParticipantId),
    #[error("participant {0} registered twice with different roles")]
    DuplicateParticipant(ParticipantId),
    #[error("no event with id {0}")]
    UnknownEvent(u64),
    #[error("{participant} may not read `{field}` of event {event_id}")]
    AccessDenied {
        participant: ParticipantId,
        event_id: u64,
        field: Field,
    },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("event ids must increase: {previous} then {next}")]
    NonMonotoneId { previous: u64, next: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Append-only event store; the query interface is the privacy boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStore {
    participants: BTreeMap<ParticipantId, Participant>,
    observers: BTreeSet<ParticipantId>,
    events: Vec<LedgerEvent>,
}

impl EventStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, participant: impl Into<Participant>) -> Result<(), StoreError> {
        let p = participant.into();
        if p.id.kind() != p.kind {
            return Err(StoreError::DuplicateParticipant(p.id));
        }
        match self.participants.get(&p.id) {
            Some(existing) if existing.kind != p.kind => {
                Err(StoreError::DuplicateParticipant(p.id))
            }
            _ => {
                self.participants.insert(p.id, p);
                Ok(())
            }
        }
    }

    /// Allows `id` to appear in access maps of events it does not take part in.
    pub fn grant_observer(&mut self, id: ParticipantId) -> Result<(), StoreError> {
        self.ensure_registered(id)?;
        self.observers.insert(id);
        Ok(())
    }

    fn ensure_registered(&self, id: ParticipantId) -> Result<(), StoreError> {
        if self.participants.contains_key(&id) {
            Ok(())
        } else {
            Err(StoreError::UnknownParticipant(id))
        }
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.participants.values()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Stores a new event and returns its sequence id.
    pub fn append_event(
        &mut self,
        participants: BTreeSet<ParticipantId>,
        record: TransactionRecord,
        access: AccessMap,
    ) -> Result<u64, StoreError> {
        if participants.is_empty() {
            return Err(StoreError::EmptyParticipants);
        }
        for id in &participants {
            self.ensure_registered(*id)?;
        }
        for id in access.keys() {
            self.ensure_registered(*id)?;
            if !participants.contains(id) && !self.observers.contains(id) {
                return Err(StoreError::UngrantedObserver(*id));
            }
        }
        record.validate()?;
        let event_id = self.events.len() as u64;
        self.events.push(LedgerEvent {
            event_id,
            participants,
            record,
            access,
        });
        Ok(event_id)
    }

    /// Like [`append_event`](Self::append_event) with field names given as text.
    pub fn append_event_named(
        &mut self,
        participants: BTreeSet<ParticipantId>,
        record: TransactionRecord,
        access: &BTreeMap<ParticipantId, Vec<&str>>,
    ) -> Result<u64, StoreError> {
        let mut typed = AccessMap::new();
        for (id, names) in access {
            let fields = names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<BTreeSet<Field>, _>>()?;
            typed.insert(*id, fields);
        }
        self.append_event(participants, record, typed)
    }

    /// The union of per-event grants for `participant`, keyed by event id.
    pub fn visible_fields(
        &self,
        participant: ParticipantId,
    ) -> Result<BTreeMap<u64, BTreeSet<Field>>, StoreError> {
        self.ensure_registered(participant)?;
        Ok(self
            .events
            .iter()
            .filter_map(|e| e.access.get(&participant).map(|f| (e.event_id, f.clone())))
            .filter(|(_, f)| !f.is_empty())
            .collect())
    }

    /// Reads one field, or fails without revealing anything.
    pub fn read_field(
        &self,
        participant: ParticipantId,
        event_id: u64,
        field: Field,
    ) -> Result<FieldValue, StoreError> {
        self.ensure_registered(participant)?;
        let event = self
            .events
            .get(event_id as usize)
            .ok_or(StoreError::UnknownEvent(event_id))?;
        let granted = event
            .access
            .get(&participant)
            .is_some_and(|fields| fields.contains(&field));
        if !granted {
            return Err(StoreError::AccessDenied {
                participant,
                event_id,
                field,
            });
        }
        Ok(event.record.value_of(field))
    }

    /// One JSON object per line, in append order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a store from [`to_jsonl`](Self::to_jsonl) output, re-validating
    /// every event. Participants are registered from the ids they carry and
    /// access keys outside an event's participant set become observers.
    pub fn from_jsonl(text: &str) -> Result<Self, StoreError> {
        let mut store = EventStore::new();
        let mut previous: Option<u64> = None;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: LedgerEvent = serde_json::from_str(line).map_err(|e| StoreError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            if let Some(prev) = previous {
                if event.event_id <= prev {
                    return Err(StoreError::NonMonotoneId {
                        previous: prev,
                        next: event.event_id,
                    });
                }
            }
            previous = Some(event.event_id);
            if event.participants.is_empty() {
                return Err(StoreError::EmptyParticipants);
            }
            event.record.validate()?;
            for id in event.participants.iter().chain(event.access.keys()) {
                store.register(*id)?;
            }
            for id in event.access.keys() {
                if !event.participants.contains(id) {
                    store.observers.insert(*id);
                }
            }
            store.events.push(event);
        }
        Ok(store)
    }

    /// Participants of the given kind, in id order.
    pub fn participants_of(&self, kind: ParticipantKind) -> Vec<ParticipantId> {
        self.participants
            .keys()
            .filter(|id| id.kind() == kind)
            .copied()
            .collect()
    }
}
