use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::MarketError;
use crate::rational::Rational;

/// Public outcome of one round: which sellers sold and what fraction of
/// their sales was rated high.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSummary {
    pub t: u64,
    /// `I_Q(s, t)`; `None` exactly where `I_T(s, t) = 0`.
    pub i_q: Vec<Option<Rational>>,
    pub sellers_with_sales: BTreeSet<usize>,
}

impl RoundSummary {
    /// Builds a summary from per-seller sale and high-rating counts.
    pub fn from_counts(t: u64, sales: &[u32], high: &[u32]) -> Self {
        let i_q = sales
            .iter()
            .zip(high)
            .map(|(&n, &h)| (n > 0).then(|| Rational::new(BigInt::from(h), BigInt::from(n))))
            .collect();
        Self::from_fractions(t, i_q)
    }

    pub fn from_fractions(t: u64, i_q: Vec<Option<Rational>>) -> Self {
        let sellers_with_sales = i_q
            .iter()
            .enumerate()
            .filter(|(_, x)| x.is_some())
            .map(|(s, _)| s)
            .collect();
        Self {
            t,
            i_q,
            sellers_with_sales,
        }
    }

    pub fn sold(&self, seller: usize) -> bool {
        self.i_q[seller].is_some()
    }
}

/// Start of the rating history a seller is currently judged on. Rounds
/// before `start` are forgotten and `base` plays the role of `xi` in the
/// no-sale term. Every seller starts in `Epoch { start: 1, base: xi }`;
/// isolation resets open a new one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epoch {
    pub start: u64,
    pub base: Rational,
}

fn check_contiguous(summaries: &[RoundSummary]) -> Result<(), MarketError> {
    for (i, s) in summaries.iter().enumerate() {
        let expected = i as u64 + 1;
        if s.t != expected {
            return Err(MarketError::NonContiguous {
                expected,
                found: s.t,
            });
        }
    }
    Ok(())
}

/// One seller's rating over rounds `epoch.start..=t-1` where `t - 1` is the
/// last summary, with discount `delta = a / b`.
///
/// Scaling every term by `b^(t-1-start)` and the lcm of the `I_Q`
/// denominators turns both sums into integer Horner recurrences.
fn seller_rating(
    summaries: &[RoundSummary],
    seller: usize,
    delta: &Rational,
    epoch: &Epoch,
) -> Rational {
    let window = &summaries[(epoch.start as usize - 1).min(summaries.len())..];
    // A constant fraction over every sold round is its own weighted mean.
    let mut sold = window.iter().filter_map(|r| r.i_q[seller].as_ref());
    match sold.next() {
        None => return epoch.base.clone(),
        Some(first) if sold.all(|x| x == first) => return first.clone(),
        _ => {}
    }
    let lcm = window
        .iter()
        .filter_map(|r| r.i_q[seller].as_ref())
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let (a, b) = (delta.numer(), delta.denom());
    let mut b_pow = BigInt::one();
    let mut acc_n = BigInt::zero();
    let mut acc_d = BigInt::zero();
    for r in window {
        acc_n *= a;
        acc_d *= a;
        if let Some(x) = &r.i_q[seller] {
            acc_n += &b_pow * x.numer() * (&lcm / x.denom());
            acc_d += &b_pow * &lcm;
        }
        b_pow *= b;
    }
    if acc_d.is_zero() {
        epoch.base.clone()
    } else {
        Rational::new(acc_n, acc_d)
    }
}

/// `Q^t` for every seller, `t = summaries.len() + 1`, with each seller
/// judged from its own epoch.
pub fn public_perception(
    summaries: &[RoundSummary],
    delta_m: &Rational,
    epochs: &[Epoch],
) -> Result<Vec<Rational>, MarketError> {
    check_contiguous(summaries)?;
    let t = summaries.len() as u64 + 1;
    for (s, summary) in summaries.iter().enumerate() {
        if summary.i_q.len() != epochs.len() {
            return Err(super::invalid(
                format!("summaries[{s}]"),
                "seller count differs from epochs",
            ));
        }
    }
    if let Some((s, _)) = epochs
        .iter()
        .enumerate()
        .find(|(_, e)| e.start == 0 || e.start > t)
    {
        return Err(super::invalid(
            format!("epochs[{s}]"),
            format!("start must lie in 1..={t}"),
        ));
    }
    Ok((0..epochs.len())
        .map(|s| seller_rating(summaries, s, delta_m, &epochs[s]))
        .collect())
}

/// `Q^t` from the full history with no resets: each seller's
/// `delta_m`-discounted fraction of high-rated sales, or `xi` without sales.
pub fn oracle_public_perception(
    summaries: &[RoundSummary],
    n_sellers: usize,
    delta_m: &Rational,
    xi: &Rational,
) -> Result<Vec<Rational>, MarketError> {
    let epochs = vec![
        Epoch {
            start: 1,
            base: xi.clone()
        };
        n_sellers
    ];
    public_perception(summaries, delta_m, &epochs)
}
