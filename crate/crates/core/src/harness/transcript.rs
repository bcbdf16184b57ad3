use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::framework::{
    audit_simulation, parse_transcript, AuditReport, IndividualDecryption, MessageKind,
    MessageLedger, PlaintextOnSealedChannel, PublicRoundData, TranscriptLine,
};
use crate::rational::{parse_rational, Rational};
use crate::regulation::AnonymityCornerCases;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRoundAudit {
    pub t: u64,
    /// Whether every buyer published the same local perception.
    pub consensus: bool,
    pub report: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptAudit {
    pub messages: usize,
    pub quorum: usize,
    pub rounds: Vec<TranscriptRoundAudit>,
    pub pass: bool,
}

fn malformed(line: &TranscriptLine, what: &str) -> HarnessError {
    HarnessError::Transcript(format!("step {}: malformed {what} payload", line.step))
}

fn rationals(line: &TranscriptLine, key: &str) -> Result<Vec<Option<Rational>>, HarnessError> {
    let values = line
        .payload
        .as_ref()
        .and_then(|p| p.get(key))
        .and_then(|v| v.as_array())
        .ok_or_else(|| malformed(line, key))?;
    values
        .iter()
        .map(|v| match v {
            serde_json::Value::Null => Ok(None),
            serde_json::Value::String(s) => parse_rational(s)
                .map(Some)
                .map_err(|_| malformed(line, key)),
            _ => Err(malformed(line, key)),
        })
        .collect()
}

/// Re-audits an exported protocol transcript without access to any plaintext.
///
/// The decryption quorum is the party list of the joint key. Each round is
/// checked for plaintext on sealed channels, decryptions below the quorum,
/// the unavoidable anonymity corner cases and agreement of the published
/// local perceptions.
pub fn audit_transcript(text: &str) -> Result<TranscriptAudit, HarnessError> {
    let lines = parse_transcript(text).map_err(|e| HarnessError::Transcript(e.to_string()))?;
    let key = lines
        .iter()
        .find(|l| l.kind == MessageKind::JointPublicKey)
        .ok_or_else(|| HarnessError::Transcript("no joint public key announced".into()))?;
    let quorum = key
        .payload
        .as_ref()
        .and_then(|p| p.get("parties"))
        .and_then(|v| v.as_array())
        .map(|a| a.len())
        .ok_or_else(|| malformed(key, "parties"))?;
    let ledger = MessageLedger::from_transcript(&lines);

    let mut sold: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
    let mut perceptions: BTreeMap<u64, Vec<Vec<Option<Rational>>>> = BTreeMap::new();
    for line in lines.iter().filter(|l| l.round > 0) {
        match line.kind {
            MessageKind::DecryptedRatingFractions => {
                let i_q = rationals(line, "i_q")?;
                let set = i_q
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.is_some())
                    .map(|(s, _)| s)
                    .collect();
                sold.insert(line.round, set);
            }
            MessageKind::LocalPerception => {
                perceptions
                    .entry(line.round)
                    .or_default()
                    .push(rationals(line, "q")?);
            }
            _ => {}
        }
        sold.entry(line.round).or_default();
    }

    let decryption = IndividualDecryption { quorum };
    let mut rounds = Vec::new();
    for (t, sellers_with_sales) in sold {
        let published = perceptions.remove(&t).unwrap_or_default();
        let consensus = published.windows(2).all(|w| w[0] == w[1]);
        let ratings: Vec<Rational> = published
            .first()
            .map(|q| q.iter().flatten().cloned().collect())
            .unwrap_or_default();
        let round = PublicRoundData {
            t,
            sellers_with_sales,
            ratings: ratings.clone(),
        };
        let report = audit_simulation(
            &ratings,
            &ratings,
            &ledger,
            &round,
            &[
                &PlaintextOnSealedChannel,
                &decryption,
                &AnonymityCornerCases,
            ],
        )
        .map_err(|e| HarnessError::Transcript(e.to_string()))?;
        rounds.push(TranscriptRoundAudit {
            t,
            consensus,
            report,
        });
    }
    let pass = rounds.iter().all(|r| r.consensus && r.report.pass);
    Ok(TranscriptAudit {
        messages: lines.len(),
        quorum,
        rounds,
        pass,
    })
}
