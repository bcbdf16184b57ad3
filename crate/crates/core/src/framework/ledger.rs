use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ParticipantId;

/// Kinds of protocol messages. Sealed kinds never carry plaintext.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    /// Public commitment to a buyer's key share.
    KeyShareCommitment,
    /// Joint public key published after key generation.
    JointPublicKey,
    /// Alias handed to a buyer by the software entity.
    AliasAssignment,
    /// Rating discount published by the software entity.
    DeltaM,
    /// Buyer feedback encrypted under the joint key.
    EncryptedFeedback,
    /// Buyer feedback encrypted for the monitor, relayed by the software entity.
    MonitorFeedback,
    /// Commitment binding the two feedback copies.
    FeedbackCommitment,
    /// Validator verdict on a buyer's two copies.
    ConsistencyVerdict,
    /// Homomorphically aggregated per-seller ciphertexts.
    AggregateCiphertext,
    /// A decryption share for an aggregate ciphertext.
    DecryptionShare,
    /// Decrypted per-seller rating fractions.
    DecryptedRatingFractions,
    /// A buyer's locally computed perception vector, for consensus.
    LocalPerception,
    /// Monitor report naming an alias.
    DishonestyReport,
    /// Software entity publishing the real id behind a reported alias.
    DishonestyIdentification,
}

impl MessageKind {
    pub fn is_sealed(&self) -> bool {
        matches!(
            self,
            MessageKind::EncryptedFeedback
                | MessageKind::MonitorFeedback
                | MessageKind::AggregateCiphertext
                | MessageKind::DecryptionShare
        )
    }
}

/// A message body as the ledger records it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "visibility", rename_all = "snake_case")]
pub enum Payload {
    /// Only a digest of the sealed bytes is kept.
    Sealed { digest: String },
    /// Public content with its digest.
    Public {
        digest: String,
        value: serde_json::Value,
    },
}

impl Payload {
    pub fn sealed(bytes: &[u8]) -> Self {
        Payload::Sealed {
            digest: digest_hex(bytes),
        }
    }

    pub fn public(value: serde_json::Value) -> Self {
        let digest = digest_hex(value.to_string().as_bytes());
        Payload::Public { digest, value }
    }

    pub fn digest(&self) -> &str {
        match self {
            Payload::Sealed { digest } | Payload::Public { digest, .. } => digest,
        }
    }

    pub fn public_value(&self) -> Option<&serde_json::Value> {
        match self {
            Payload::Public { value, .. } => Some(value),
            Payload::Sealed { .. } => None,
        }
    }
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: u64,
    pub sender: ParticipantId,
    pub receivers: Vec<ParticipantId>,
    pub kind: MessageKind,
    pub payload: Payload,
}

/// One computation step: who ran it, which messages it read and wrote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputationStep {
    pub label: String,
    pub executors: BTreeSet<ParticipantId>,
    pub consumed: Vec<usize>,
    pub produced: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("step consumes message {0}, which does not exist yet")]
    DanglingConsume(usize),
    #[error("step produces message {0}, which does not exist")]
    DanglingProduce(usize),
    #[error("step consumes message {consumed} but produces earlier message {produced}")]
    ConsumeAfterProduce { consumed: usize, produced: usize },
    #[error("step has no executors")]
    NoExecutors,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("transcript step {found} out of sequence, expected {expected}")]
    OutOfSequence { expected: u64, found: u64 },
    #[error("line {line}: digest does not match public payload")]
    DigestMismatch { line: usize },
}

/// Append-only ordered message log plus the computation steps over it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLedger {
    messages: Vec<Message>,
    steps: Vec<ComputationStep>,
}

impl MessageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn steps(&self) -> &[ComputationStep] {
        &self.steps
    }

    /// Appends and returns the message index.
    pub fn push(&mut self, message: Message) -> usize {
        self.messages.push(message);
        self.messages.len() - 1
    }

    pub fn record_step(&mut self, step: ComputationStep) -> Result<(), LedgerError> {
        if step.executors.is_empty() {
            return Err(LedgerError::NoExecutors);
        }
        let len = self.messages.len();
        for &c in &step.consumed {
            if c >= len {
                return Err(LedgerError::DanglingConsume(c));
            }
        }
        for &p in &step.produced {
            if p >= len {
                return Err(LedgerError::DanglingProduce(p));
            }
        }
        if let (Some(&max_c), Some(&min_p)) =
            (step.consumed.iter().max(), step.produced.iter().min())
        {
            if max_c >= min_p {
                return Err(LedgerError::ConsumeAfterProduce {
                    consumed: max_c,
                    produced: min_p,
                });
            }
        }
        self.steps.push(step);
        Ok(())
    }

    /// Transcript view: one [`TranscriptLine`] per message.
    pub fn transcript(&self) -> Vec<TranscriptLine> {
        self.messages
            .iter()
            .enumerate()
            .map(|(i, m)| TranscriptLine {
                step: i as u64,
                round: m.round,
                sender: m.sender,
                receivers: m.receivers.clone(),
                kind: m.kind,
                payload_digest: m.payload.digest().to_string(),
                payload: m.payload.public_value().cloned(),
            })
            .collect()
    }

    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.transcript() {
            out.push_str(&serde_json::to_string(&line).expect("transcript serializes"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a ledger from parsed transcript lines. Computation steps are
    /// not part of the transcript and are left empty.
    pub fn from_transcript(lines: &[TranscriptLine]) -> Self {
        let messages = lines
            .iter()
            .map(|l| Message {
                round: l.round,
                sender: l.sender,
                receivers: l.receivers.clone(),
                kind: l.kind,
                payload: match &l.payload {
                    Some(value) => Payload::Public {
                        digest: l.payload_digest.clone(),
                        value: value.clone(),
                    },
                    None => Payload::Sealed {
                        digest: l.payload_digest.clone(),
                    },
                },
            })
            .collect();
        Self {
            messages,
            steps: Vec::new(),
        }
    }
}

/// Exported transcript row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub step: u64,
    pub round: u64,
    pub sender: ParticipantId,
    pub receivers: Vec<ParticipantId>,
    pub kind: MessageKind,
    pub payload_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

/// Parses a JSON-lines transcript, checking sequence numbers and the digests
/// of public payloads.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptLine>, LedgerError> {
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: TranscriptLine = serde_json::from_str(raw).map_err(|e| LedgerError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let expected = lines.len() as u64;
        if line.step != expected {
            return Err(LedgerError::OutOfSequence {
                expected,
                found: line.step,
            });
        }
        if let Some(value) = &line.payload {
            if digest_hex(value.to_string().as_bytes()) != line.payload_digest {
                return Err(LedgerError::DigestMismatch { line: n + 1 });
            }
        }
        lines.push(line);
    }
    Ok(lines)
}
