use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ledger::{MessageKind, MessageLedger, Payload};
use crate::rational::{serde_rational, Rational};

/// Which privacy condition a flag concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    /// Someone can infer who transacted with whom.
    Membership,
    /// Someone can infer data outside their access grant.
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakFlag {
    pub kind: LeakKind,
    pub round: u64,
    pub predicate: String,
    /// Sellers (by index) the inference concerns, if any.
    pub sellers: Vec<usize>,
    /// Set for leaks inherent in publishing the output itself. These are
    /// reported but do not fail the audit.
    pub unavoidable: bool,
    pub detail: String,
}

/// Public data of one round: who sold and the published ratings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicRoundData {
    pub t: u64,
    pub sellers_with_sales: BTreeSet<usize>,
    #[serde(with = "serde_rational::vec")]
    pub ratings: Vec<Rational>,
}

/// A finite leakage check evaluated over a round's public data and the ledger.
pub trait LeakagePredicate {
    fn name(&self) -> &str;
    fn evaluate(&self, round: &PublicRoundData, ledger: &MessageLedger) -> Vec<LeakFlag>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub output_equal: bool,
    pub membership_leaks: Vec<LeakFlag>,
    pub data_leaks: Vec<LeakFlag>,
    pub corner_case_flags: Vec<LeakFlag>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("oracle output has {oracle} entries but protocol output has {protocol}")]
    LengthMismatch { oracle: usize, protocol: usize },
}

/// Compares the two rating vectors exactly and runs every predicate.
pub fn audit_simulation(
    oracle_output: &[Rational],
    protocol_output: &[Rational],
    ledger: &MessageLedger,
    round: &PublicRoundData,
    predicates: &[&dyn LeakagePredicate],
) -> Result<AuditReport, AuditError> {
    if oracle_output.len() != protocol_output.len() {
        return Err(AuditError::LengthMismatch {
            oracle: oracle_output.len(),
            protocol: protocol_output.len(),
        });
    }
    let output_equal = oracle_output == protocol_output;
    let mut membership_leaks = Vec::new();
    let mut data_leaks = Vec::new();
    let mut corner_case_flags = Vec::new();
    for predicate in predicates {
        for flag in predicate.evaluate(round, ledger) {
            if flag.unavoidable {
                corner_case_flags.push(flag);
            } else if flag.kind == LeakKind::Membership {
                membership_leaks.push(flag);
            } else {
                data_leaks.push(flag);
            }
        }
    }
    let pass = output_equal && membership_leaks.is_empty() && data_leaks.is_empty();
    Ok(AuditReport {
        output_equal,
        membership_leaks,
        data_leaks,
        corner_case_flags,
        pass,
    })
}

/// Flags a message of a sealed kind that carries a public payload in `round`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlaintextOnSealedChannel;

impl LeakagePredicate for PlaintextOnSealedChannel {
    fn name(&self) -> &str {
        "plaintext_on_sealed_channel"
    }

    fn evaluate(&self, round: &PublicRoundData, ledger: &MessageLedger) -> Vec<LeakFlag> {
        ledger
            .messages()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.round == round.t && m.kind.is_sealed())
            .filter(|(_, m)| matches!(m.payload, Payload::Public { .. }))
            .map(|(i, m)| LeakFlag {
                kind: LeakKind::Data,
                round: round.t,
                predicate: self.name().to_string(),
                sellers: Vec::new(),
                unavoidable: false,
                detail: format!(
                    "message {i} from {} is {:?} but carries plaintext",
                    m.sender, m.kind
                ),
            })
            .collect()
    }
}

/// Flags published decryptions not preceded, within the round, by decryption
/// shares from at least `quorum` distinct senders.
#[derive(Debug, Clone, Copy)]
pub struct IndividualDecryption {
    pub quorum: usize,
}

impl LeakagePredicate for IndividualDecryption {
    fn name(&self) -> &str {
        "individual_decryption"
    }

    fn evaluate(&self, round: &PublicRoundData, ledger: &MessageLedger) -> Vec<LeakFlag> {
        let mut share_senders = BTreeSet::new();
        let mut flags = Vec::new();
        for (i, m) in ledger
            .messages()
            .iter()
            .enumerate()
            .filter(|(_, m)| m.round == round.t)
        {
            match m.kind {
                MessageKind::DecryptionShare => {
                    share_senders.insert(m.sender);
                }
                MessageKind::DecryptedRatingFractions => {
                    let have = share_senders.len();
                    if have < self.quorum {
                        flags.push(LeakFlag {
                            kind: LeakKind::Data,
                            round: round.t,
                            predicate: self.name().to_string(),
                            sellers: Vec::new(),
                            unavoidable: false,
                            detail: format!(
                                "message {i} published with {have} of {} shares",
                                self.quorum
                            ),
                        });
                    }
                }
                _ => {}
            }
        }
        flags
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{Message, ParticipantId};
    use crate::rational::ratio;
    use serde_json::json;

    fn round() -> PublicRoundData {
        PublicRoundData {
            t: 1,
            sellers_with_sales: [0, 1, 2].into(),
            ratings: vec![ratio(1, 2), ratio(2, 3), ratio(3, 4)],
        }
    }

    fn push(
        ledger: &mut MessageLedger,
        sender: ParticipantId,
        kind: MessageKind,
        payload: Payload,
    ) {
        ledger.push(Message {
            round: 1,
            sender,
            receivers: vec![],
            kind,
            payload,
        });
    }

    #[test]
    fn equal_outputs_clean_ledger_pass() {
        let r = round();
        let ledger = MessageLedger::new();
        let report = audit_simulation(
            &r.ratings,
            &r.ratings,
            &ledger,
            &r,
            &[&PlaintextOnSealedChannel],
        )
        .unwrap();
        assert!(report.output_equal && report.pass);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let r = round();
        let err = audit_simulation(&r.ratings, &r.ratings[..2], &MessageLedger::new(), &r, &[])
            .unwrap_err();
        assert_eq!(
            err,
            AuditError::LengthMismatch {
                oracle: 3,
                protocol: 2
            }
        );
    }

    #[test]
    fn unequal_outputs_fail() {
        let r = round();
        let mut other = r.ratings.clone();
        other[1] = ratio(1, 3);
        let report = audit_simulation(&r.ratings, &other, &MessageLedger::new(), &r, &[]).unwrap();
        assert!(!report.output_equal && !report.pass);
    }

    #[test]
    fn plaintext_feedback_is_a_data_leak() {
        let r = round();
        let mut ledger = MessageLedger::new();
        push(
            &mut ledger,
            ParticipantId::buyer(0),
            MessageKind::EncryptedFeedback,
            Payload::public(json!([1, 0, 0])),
        );
        let report = audit_simulation(
            &r.ratings,
            &r.ratings,
            &ledger,
            &r,
            &[&PlaintextOnSealedChannel],
        )
        .unwrap();
        assert_eq!(report.data_leaks.len(), 1);
        assert!(!report.pass);
    }

    #[test]
    fn decryption_needs_every_share() {
        let r = round();
        let mut ledger = MessageLedger::new();
        for b in 0..2 {
            push(
                &mut ledger,
                ParticipantId::buyer(b),
                MessageKind::DecryptionShare,
                Payload::sealed(&[b as u8]),
            );
        }
        push(
            &mut ledger,
            ParticipantId::buyer(0),
            MessageKind::DecryptedRatingFractions,
            Payload::public(json!([])),
        );
        let pred = IndividualDecryption { quorum: 3 };
        assert_eq!(pred.evaluate(&r, &ledger).len(), 1);
        let pred = IndividualDecryption { quorum: 2 };
        assert!(pred.evaluate(&r, &ledger).is_empty());
    }
}
