use std::collections::BTreeSet;

use super::he::{Ciphertext, HeError, ThresholdScheme};
use super::RegulationError;
use crate::rational::ratio;

/// Encrypted per-seller outputs of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedAggregate {
    /// Encrypted `I_Q(s)`; `None` for sellers without sales.
    pub i_q: Vec<Option<Ciphertext>>,
    /// Encrypted sale counts.
    pub sales: Vec<Ciphertext>,
}

/// `(F_high, F_low) = ((F + |F|) / 2, (|F| - F) / 2)`.
pub fn feedback_split(
    he: &mut impl ThresholdScheme,
    f: &Ciphertext,
) -> Result<(Ciphertext, Ciphertext), HeError> {
    let abs = he.abs(f)?;
    let plus = he.add(f, &abs)?;
    let neg = he.scale(f, &ratio(-1, 1))?;
    let minus = he.add(&abs, &neg)?;
    Ok((
        he.scale(&plus, &ratio(1, 2))?,
        he.scale(&minus, &ratio(1, 2))?,
    ))
}

/// Column sums of the split feedback matrix and `I_Q = high / total` for
/// every seller in the public `sellers_with_sales` set.
pub fn aggregate_encrypted(
    he: &mut impl ThresholdScheme,
    rows: &[Vec<Ciphertext>],
    n_sellers: usize,
    sellers_with_sales: &BTreeSet<usize>,
) -> Result<EncryptedAggregate, RegulationError> {
    let Some(first) = rows.first() else {
        return Err(RegulationError::Aggregate("no feedback rows".into()));
    };
    let key = first.first().map(Ciphertext::key_id);
    for (b, row) in rows.iter().enumerate() {
        if row.len() != n_sellers {
            return Err(RegulationError::Aggregate(format!(
                "row {b} has {} entries, expected {n_sellers}",
                row.len()
            )));
        }
        if row.iter().any(|c| Some(c.key_id()) != key) {
            return Err(RegulationError::Aggregate(format!(
                "row {b} is under a different key"
            )));
        }
    }
    if let Some(&s) = sellers_with_sales.iter().find(|&&s| s >= n_sellers) {
        return Err(RegulationError::UnknownSeller(s));
    }
    let mut i_q = Vec::with_capacity(n_sellers);
    let mut sales = Vec::with_capacity(n_sellers);
    for s in 0..n_sellers {
        let mut high: Option<Ciphertext> = None;
        let mut low: Option<Ciphertext> = None;
        for row in rows {
            let (h, l) = feedback_split(he, &row[s])?;
            high = Some(match high {
                None => h,
                Some(acc) => he.add(&acc, &h)?,
            });
            low = Some(match low {
                None => l,
                Some(acc) => he.add(&acc, &l)?,
            });
        }
        let (high, low) = (
            high.expect("at least one row"),
            low.expect("at least one row"),
        );
        let total = he.add(&high, &low)?;
        i_q.push(if sellers_with_sales.contains(&s) {
            Some(he.div(&high, &total)?)
        } else {
            None
        });
        sales.push(total);
    }
    Ok(EncryptedAggregate { i_q, sales })
}
