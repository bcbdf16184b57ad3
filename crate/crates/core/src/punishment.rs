//! Buyer-side punishment: local blacklists and market-wide threshold isolation.

use serde::{Deserialize, Serialize};

use crate::framework::Quality;
use crate::pricing::{PriceClass, PricingRule};
use crate::rational::{serde_rational, Rational};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PunishmentPolicy {
    GrimTrigger,
    TitForTat,
    Limited {
        alpha: u32,
    },
    /// Market-wide isolation for `alpha` rounds when a rating drops below
    /// the threshold. Without an explicit threshold, the value follows from
    /// the pricing rule (see [`threshold_value`]).
    Threshold {
        #[serde(
            default,
            with = "serde_rational::option",
            skip_serializing_if = "Option::is_none"
        )]
        threshold: Option<Rational>,
        alpha: u32,
    },
}

impl PunishmentPolicy {
    pub fn alpha(&self) -> Option<u32> {
        match self {
            PunishmentPolicy::Limited { alpha } | PunishmentPolicy::Threshold { alpha, .. } => {
                Some(*alpha)
            }
            PunishmentPolicy::TitForTat => Some(1),
            PunishmentPolicy::GrimTrigger => None,
        }
    }

    pub fn is_local(&self) -> bool {
        !matches!(self, PunishmentPolicy::Threshold { .. })
    }
}

/// How long a buyer blacklists a seller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blacklist {
    /// Blacklisted up to and including this round.
    Until(u64),
    Forever,
}

/// Local blacklists, indexed `[buyer][seller]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlacklistState {
    entries: Vec<Vec<Option<Blacklist>>>,
}

impl BlacklistState {
    pub fn new(n_buyers: usize, n_sellers: usize) -> Self {
        Self {
            entries: vec![vec![None; n_sellers]; n_buyers],
        }
    }

    pub fn entry(&self, buyer: usize, seller: usize) -> Option<Blacklist> {
        self.entries[buyer][seller]
    }

    pub fn is_blacklisted(&self, buyer: usize, seller: usize, round: u64) -> bool {
        match self.entries[buyer][seller] {
            Some(Blacklist::Forever) => true,
            Some(Blacklist::Until(last)) => round <= last,
            None => false,
        }
    }

    /// Rounds of blacklisting left from `round` on; `None` means forever.
    pub fn rounds_remaining(&self, buyer: usize, seller: usize, round: u64) -> Option<u64> {
        match self.entries[buyer][seller] {
            Some(Blacklist::Forever) => None,
            Some(Blacklist::Until(last)) => Some((last + 1).saturating_sub(round)),
            None => Some(0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().flatten().all(Option::is_none)
    }

    fn extend(&mut self, buyer: usize, seller: usize, new: Blacklist) {
        let slot = &mut self.entries[buyer][seller];
        *slot = Some(match (*slot, new) {
            (Some(Blacklist::Forever), _) | (_, Blacklist::Forever) => Blacklist::Forever,
            (Some(Blacklist::Until(a)), Blacklist::Until(b)) => Blacklist::Until(a.max(b)),
            (None, b) => b,
        });
    }
}

/// Updates `buyer`'s blacklist after receiving `quality` from `seller` in
/// round `t`, when the buyer's perception of the seller was `q`.
///
/// Low quality is punished only when `q > 0`, starting the next round.
pub fn apply_feedback(
    policy: &PunishmentPolicy,
    buyer: usize,
    seller: usize,
    quality: Quality,
    q: &Rational,
    t: u64,
    state: &mut BlacklistState,
) {
    if quality == Quality::High || q.is_zero() {
        return;
    }
    match policy {
        PunishmentPolicy::GrimTrigger => state.extend(buyer, seller, Blacklist::Forever),
        PunishmentPolicy::TitForTat => state.extend(buyer, seller, Blacklist::Until(t + 1)),
        PunishmentPolicy::Limited { alpha } => {
            state.extend(buyer, seller, Blacklist::Until(t + *alpha as u64))
        }
        PunishmentPolicy::Threshold { .. } => {}
    }
}

/// A market-wide isolation spell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isolation {
    pub first_round: u64,
    pub last_round: u64,
    /// Rating the seller carries when it returns.
    #[serde(with = "serde_rational")]
    pub return_rating: Rational,
}

/// Per-seller isolation state under threshold punishment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationState {
    spells: Vec<Option<Isolation>>,
}

impl IsolationState {
    pub fn new(n_sellers: usize) -> Self {
        Self {
            spells: vec![None; n_sellers],
        }
    }

    pub fn is_isolated(&self, seller: usize, round: u64) -> bool {
        self.spells[seller]
            .as_ref()
            .is_some_and(|i| i.first_round <= round && round <= i.last_round)
    }

    pub fn spell(&self, seller: usize) -> Option<&Isolation> {
        self.spells[seller].as_ref()
    }

    /// The rating `seller` returns with, if its spell ends just before `round`.
    pub fn returning(&self, seller: usize, round: u64) -> Option<&Rational> {
        self.spells[seller]
            .as_ref()
            .filter(|i| i.last_round + 1 == round)
            .map(|i| &i.return_rating)
    }
}

/// Isolates `seller` for rounds `t..t+alpha` when its round-`t` rating
/// `q` is below `threshold`. Returns whether it was isolated. A seller
/// already isolated is left alone.
pub fn threshold_check(
    seller: usize,
    q: &Rational,
    threshold: &Rational,
    alpha: u32,
    t: u64,
    state: &mut IsolationState,
) -> bool {
    if state.is_isolated(seller, t) || q >= threshold {
        return false;
    }
    state.spells[seller] = Some(Isolation {
        first_round: t,
        last_round: t + alpha as u64 - 1,
        return_rating: threshold.clone(),
    });
    true
}

/// Isolation threshold for `seller` implied by the pricing rule:
/// `p / v` (homogeneous), `p_H / v_H` for high-price sellers and `epsilon`
/// for low-price sellers. Continuous pricing has no implied threshold.
pub fn threshold_value(rule: &PricingRule, seller: usize, v_high: &Rational) -> Option<Rational> {
    match rule {
        PricingRule::Homogeneous { p } => Some(p / v_high),
        PricingRule::BinaryNonAdaptive {
            p_high,
            epsilon,
            assignment,
            ..
        } => match assignment.get(seller)? {
            PriceClass::High => Some(p_high / v_high),
            PriceClass::Low => Some(epsilon.clone()),
        },
        PricingRule::BinaryAdaptive { p_high, .. } => Some(p_high / v_high),
        PricingRule::Continuous { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn tit_for_tat_blacklists_exactly_next_round() {
        let mut st = BlacklistState::new(2, 2);
        apply_feedback(
            &PunishmentPolicy::TitForTat,
            0,
            1,
            Quality::Low,
            &ratio(1, 2),
            5,
            &mut st,
        );
        assert!(st.is_blacklisted(0, 1, 6));
        assert!(!st.is_blacklisted(0, 1, 7));
        assert_eq!(st.rounds_remaining(0, 1, 6), Some(1));
    }

    #[test]
    fn zero_perception_is_not_punished() {
        let mut st = BlacklistState::new(1, 1);
        apply_feedback(
            &PunishmentPolicy::GrimTrigger,
            0,
            0,
            Quality::Low,
            &int(0),
            1,
            &mut st,
        );
        assert!(st.is_empty());
    }

    #[test]
    fn grim_is_permanent_and_limited_lasts_alpha() {
        let mut st = BlacklistState::new(1, 2);
        apply_feedback(
            &PunishmentPolicy::GrimTrigger,
            0,
            0,
            Quality::Low,
            &ratio(1, 3),
            1,
            &mut st,
        );
        assert!(st.is_blacklisted(0, 0, 1_000_000));
        apply_feedback(
            &PunishmentPolicy::Limited { alpha: 3 },
            0,
            1,
            Quality::Low,
            &ratio(1, 3),
            1,
            &mut st,
        );
        assert!((2..=4).all(|r| st.is_blacklisted(0, 1, r)));
        assert!(!st.is_blacklisted(0, 1, 5));
    }

    #[test]
    fn high_quality_and_threshold_leave_lists_alone() {
        let mut st = BlacklistState::new(1, 1);
        apply_feedback(
            &PunishmentPolicy::TitForTat,
            0,
            0,
            Quality::High,
            &int(1),
            1,
            &mut st,
        );
        let th = PunishmentPolicy::Threshold {
            threshold: Some(ratio(2, 5)),
            alpha: 2,
        };
        apply_feedback(&th, 0, 0, Quality::Low, &int(1), 1, &mut st);
        assert!(st.is_empty());
    }

    #[test]
    fn threshold_isolation_is_strict_and_timed() {
        let mut st = IsolationState::new(2);
        let th = ratio(2, 5);
        assert!(!threshold_check(0, &ratio(2, 5), &th, 3, 4, &mut st));
        assert!(threshold_check(1, &ratio(39, 100), &th, 3, 4, &mut st));
        assert!((4..=6).all(|r| st.is_isolated(1, r)));
        assert!(!st.is_isolated(1, 7));
        assert_eq!(st.returning(1, 7), Some(&th));
        // Already isolated: no new spell.
        assert!(!threshold_check(1, &int(0), &th, 3, 5, &mut st));
    }

    #[test]
    fn threshold_values_follow_pricing() {
        let homog = PricingRule::Homogeneous { p: int(2) };
        assert_eq!(threshold_value(&homog, 0, &int(5)), Some(ratio(2, 5)));
        let bin = PricingRule::BinaryNonAdaptive {
            p_high: int(2),
            p_low: int(1),
            epsilon: ratio(1, 20),
            assignment: vec![PriceClass::High, PriceClass::Low],
        };
        assert_eq!(threshold_value(&bin, 0, &int(5)), Some(ratio(2, 5)));
        assert_eq!(threshold_value(&bin, 1, &int(5)), Some(ratio(1, 20)));
    }

    #[test]
    fn policy_serde_shape() {
        let p: PunishmentPolicy = serde_json::from_str(r#"{"kind":"limited","alpha":2}"#).unwrap();
        assert_eq!(p, PunishmentPolicy::Limited { alpha: 2 });
        let p: PunishmentPolicy =
            serde_json::from_str(r#"{"kind":"threshold","alpha":1,"threshold":0.4}"#).unwrap();
        assert_eq!(
            p,
            PunishmentPolicy::Threshold {
                threshold: Some(ratio(2, 5)),
                alpha: 1
            }
        );
    }
}
