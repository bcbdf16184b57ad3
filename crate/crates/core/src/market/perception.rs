use num_traits::{One, Zero};

use super::{BuyerState, MarketError};
use crate::framework::Quality;
use crate::rational::{pow, Rational};
use crate::rng::{SimRng, Stream};

/// `xi_bar` from one seller's public ratings `Q^1..=Q^t`: `xi` while no
/// rating so far exceeded it, otherwise the latest rating.
pub fn xi_bar(xi: &Rational, ratings: &[Rational]) -> Rational {
    match ratings.last() {
        Some(latest) if ratings.iter().any(|q| q > xi) => latest.clone(),
        _ => xi.clone(),
    }
}

/// Personal history `h_b^t(s)` evaluated term by term from the buyer's
/// purchase log. `ratings[i]` holds `Q^{i+1}` for every seller, through at
/// least round `t`.
pub fn personal_history(
    buyer: &BuyerState,
    seller: usize,
    t: u64,
    xi: &Rational,
    ratings: &[Vec<Rational>],
) -> Result<Rational, MarketError> {
    if t == 0 {
        return Err(super::invalid("t", "rounds start at 1"));
    }
    if (ratings.len() as u64) < t {
        return Err(MarketError::HistoryGap {
            requested: t,
            needed: t,
            have: ratings.len() as u64,
        });
    }
    if let Some(&(late, _, _)) = buyer.purchases.iter().find(|(r, _, _)| *r >= t) {
        return Err(MarketError::HistoryGap {
            requested: t,
            needed: late + 1,
            have: t - 1,
        });
    }
    let delta = &buyer.params.delta;
    let mut numer = Rational::zero();
    let mut denom = Rational::zero();
    let mut untouched = true;
    for &(round, s, quality) in &buyer.purchases {
        if s != seller {
            continue;
        }
        let w = pow(delta, (t - round - 1) as usize);
        if quality == Quality::High {
            numer += &w;
        }
        denom += w;
        untouched = false;
    }
    if untouched {
        let series: Vec<Rational> = ratings[..t as usize]
            .iter()
            .map(|q| q[seller].clone())
            .collect();
        let xb = xi_bar(xi, &series);
        numer += xb;
        denom += Rational::one();
    }
    Ok(numer / denom)
}

/// `q = theta * h + (1 - theta) * Q`.
pub fn personal_perception(h: &Rational, q_public: &Rational, theta: &Rational) -> Rational {
    if theta.is_zero() {
        q_public.clone()
    } else if theta.is_one() {
        h.clone()
    } else {
        theta * h + (Rational::one() - theta) * q_public
    }
}

pub fn expected_utility(
    q: &Rational,
    v_high: &Rational,
    v_low: &Rational,
    price: &Rational,
) -> Rational {
    q * v_high + (Rational::one() - q) * v_low - price
}

/// Outcome of one buyer's seller choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub chosen: usize,
    /// Sellers the final uniform draw was made over; a single entry when
    /// the choice was forced.
    pub candidates: Vec<usize>,
}

/// Picks the seller maximizing expected utility. Ties go to the tied seller
/// that most recently delivered high quality to this buyer, and otherwise
/// are broken uniformly. Sellers with `excluded[s]` set or no price are
/// skipped; `None` when nobody is left.
pub fn select_seller(
    buyer: &BuyerState,
    perceptions: &[Rational],
    prices: &[Option<Rational>],
    excluded: &[bool],
    v_high: &Rational,
    v_low: &Rational,
    rng: &mut SimRng,
) -> Option<Selection> {
    let mut best: Option<Rational> = None;
    let mut tied = Vec::new();
    for s in 0..perceptions.len() {
        let Some(price) = prices[s].as_ref().filter(|_| !excluded[s]) else {
            continue;
        };
        let eu = expected_utility(&perceptions[s], v_high, v_low, price);
        match &best {
            Some(b) if &eu < b => {}
            Some(b) if &eu == b => tied.push(s),
            _ => {
                best = Some(eu);
                tied.clear();
                tied.push(s);
            }
        }
    }
    if tied.is_empty() {
        return None;
    }
    let latest = tied.iter().filter_map(|&s| buyer.last_high[s]).max();
    if let Some(latest) = latest {
        tied.retain(|&s| buyer.last_high[s] == Some(latest));
    }
    let chosen = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.pick(Stream::Selection, tied.len())]
    };
    Some(Selection {
        chosen,
        candidates: tied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BuyerParams;
    use crate::rational::{int, ratio};

    fn buyer(n_sellers: usize) -> BuyerState {
        BuyerState::new(
            BuyerParams {
                delta: ratio(4, 5),
                theta: ratio(1, 2),
            },
            n_sellers,
        )
    }

    fn flat(n: usize, q: &Rational, rounds: usize) -> Vec<Vec<Rational>> {
        vec![vec![q.clone(); n]; rounds]
    }

    #[test]
    fn history_defaults_to_xi() {
        let b = buyer(2);
        let h = personal_history(&b, 0, 3, &ratio(1, 2), &flat(2, &ratio(1, 2), 3)).unwrap();
        assert_eq!(h, ratio(1, 2));
    }

    #[test]
    fn history_after_single_high_purchase() {
        let mut b = buyer(2);
        b.record(1, 0, Quality::High);
        let h = personal_history(&b, 0, 3, &ratio(1, 2), &flat(2, &ratio(1, 2), 3)).unwrap();
        assert_eq!(h, int(1));
    }

    #[test]
    fn xi_bar_switches_to_public() {
        let b = buyer(1);
        let q = vec![vec![ratio(1, 2)], vec![ratio(9, 10)], vec![ratio(7, 10)]];
        assert_eq!(
            personal_history(&b, 0, 3, &ratio(1, 2), &q).unwrap(),
            ratio(7, 10)
        );
        assert_eq!(
            xi_bar(&ratio(1, 2), &[ratio(1, 2), ratio(1, 5)]),
            ratio(1, 2)
        );
    }

    #[test]
    fn history_rejects_future_purchases_and_gaps() {
        let mut b = buyer(1);
        b.record(3, 0, Quality::High);
        assert!(personal_history(&b, 0, 3, &ratio(1, 2), &flat(1, &ratio(1, 2), 3)).is_err());
        assert!(
            personal_history(&buyer(1), 0, 4, &ratio(1, 2), &flat(1, &ratio(1, 2), 3)).is_err()
        );
    }

    #[test]
    fn perception_blend() {
        assert_eq!(
            personal_perception(&ratio(3, 10), &ratio(9, 10), &int(1)),
            ratio(3, 10)
        );
        assert_eq!(
            personal_perception(&ratio(3, 10), &ratio(9, 10), &int(0)),
            ratio(9, 10)
        );
        assert_eq!(
            personal_perception(&ratio(1, 5), &ratio(3, 5), &ratio(1, 4)),
            ratio(1, 2)
        );
    }

    #[test]
    fn expected_utility_values() {
        assert_eq!(expected_utility(&int(1), &int(5), &int(0), &int(2)), int(3));
        assert_eq!(
            expected_utility(&int(0), &int(5), &int(0), &int(2)),
            int(-2)
        );
        assert_eq!(
            expected_utility(&ratio(1, 2), &int(5), &int(1), &int(2)),
            int(1)
        );
    }

    #[test]
    fn selection_argmax_and_exclusion() {
        let b = buyer(2);
        let mut rng = SimRng::new(1);
        let prices = vec![Some(int(2)), Some(int(2))];
        let q = vec![ratio(1, 2), ratio(4, 5)];
        let sel =
            select_seller(&b, &q, &prices, &[false, false], &int(5), &int(0), &mut rng).unwrap();
        assert_eq!(sel.chosen, 1);
        assert!(
            select_seller(&b, &q, &prices, &[true, true], &int(5), &int(0), &mut rng).is_none()
        );
        let no_price = vec![None, None];
        assert!(select_seller(
            &b,
            &q,
            &no_price,
            &[false, false],
            &int(5),
            &int(0),
            &mut rng
        )
        .is_none());
    }

    #[test]
    fn ties_prefer_most_recent_high() {
        let mut b = buyer(3);
        b.record(1, 2, Quality::High);
        b.record(2, 0, Quality::High);
        let q = vec![ratio(1, 2); 3];
        let prices = vec![Some(int(2)); 3];
        let mut rng = SimRng::new(3);
        let sel = select_seller(&b, &q, &prices, &[false; 3], &int(5), &int(0), &mut rng).unwrap();
        assert_eq!(
            sel,
            Selection {
                chosen: 0,
                candidates: vec![0]
            }
        );
    }

    #[test]
    fn uniform_ties_cover_all_sellers() {
        let b = buyer(3);
        let q = vec![ratio(1, 2); 3];
        let prices = vec![Some(int(2)); 3];
        let mut rng = SimRng::new(11);
        let mut seen = [false; 3];
        for _ in 0..100 {
            let sel =
                select_seller(&b, &q, &prices, &[false; 3], &int(5), &int(0), &mut rng).unwrap();
            assert_eq!(sel.candidates, vec![0, 1, 2]);
            seen[sel.chosen] = true;
        }
        assert!(seen.iter().all(|&x| x));
    }
}
