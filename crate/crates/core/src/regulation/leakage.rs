use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::framework::{LeakFlag, LeakKind, LeakagePredicate, MessageLedger, PublicRoundData};
use crate::market::RoundSummary;
use crate::rational::Rational;

/// Inferences the published ratings allow no matter how they were computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CornerCase {
    /// With one or two selling sellers, buyers learn who bought where.
    BuyingPatternLeak { sellers: Vec<usize> },
    /// A rating of 0 or 1 reveals every feedback the seller received.
    FeedbackLeak { seller: usize },
}

pub fn leakage_flags(round: &RoundSummary, q: &[Rational]) -> Vec<CornerCase> {
    corner_cases(round.sellers_with_sales.iter().copied(), q)
}

fn corner_cases(sold: impl Iterator<Item = usize>, q: &[Rational]) -> Vec<CornerCase> {
    let sellers: Vec<usize> = sold.collect();
    let mut flags = Vec::new();
    if matches!(sellers.len(), 1 | 2) {
        flags.push(CornerCase::BuyingPatternLeak {
            sellers: sellers.clone(),
        });
    }
    for s in sellers {
        if q.get(s).is_some_and(|x| x.is_zero() || x.is_one()) {
            flags.push(CornerCase::FeedbackLeak { seller: s });
        }
    }
    flags
}

/// [`leakage_flags`] as an audit predicate; every flag is unavoidable.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnonymityCornerCases;

impl LeakagePredicate for AnonymityCornerCases {
    fn name(&self) -> &str {
        "anonymity_corner_cases"
    }

    fn evaluate(&self, round: &PublicRoundData, _ledger: &MessageLedger) -> Vec<LeakFlag> {
        corner_cases(round.sellers_with_sales.iter().copied(), &round.ratings)
            .into_iter()
            .map(|c| match c {
                CornerCase::BuyingPatternLeak { sellers } => LeakFlag {
                    kind: LeakKind::Membership,
                    round: round.t,
                    predicate: self.name().to_string(),
                    detail: format!("only {} seller(s) sold", sellers.len()),
                    sellers,
                    unavoidable: true,
                },
                CornerCase::FeedbackLeak { seller } => LeakFlag {
                    kind: LeakKind::Data,
                    round: round.t,
                    predicate: self.name().to_string(),
                    sellers: vec![seller],
                    unavoidable: true,
                    detail: format!("rating of seller {seller} is {}", round.ratings[seller]),
                },
            })
            .collect()
    }
}
