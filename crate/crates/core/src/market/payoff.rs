use crate::framework::Quality;
use crate::rational::Rational;

/// Stage payoffs `(buyer, seller)` of one sale.
pub fn stage_payoffs(
    quality: Quality,
    price: &Rational,
    cost: &Rational,
    v_high: &Rational,
    v_low: &Rational,
) -> (Rational, Rational) {
    match quality {
        Quality::High => (v_high - price, price - cost),
        Quality::Low => (v_low - price, price.clone()),
    }
}
