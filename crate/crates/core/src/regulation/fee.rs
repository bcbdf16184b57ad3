use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::RegulationError;
use crate::pricing::PricingRule;
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    #[serde(with = "serde_rational")]
    pub nu: Rational,
    /// Largest single-round buyer utility.
    #[serde(with = "serde_rational")]
    pub u_max: Rational,
}

/// `u_max`: `v - p` under homogeneous pricing, `v_H - p_L` otherwise.
pub fn default_u_max(pricing: &PricingRule, v_high: &Rational) -> Rational {
    match pricing {
        PricingRule::Homogeneous { p } => v_high - p,
        PricingRule::BinaryNonAdaptive { p_low, .. }
        | PricingRule::BinaryAdaptive { p_low, .. }
        | PricingRule::Continuous { p_low, .. } => v_high - p_low,
    }
}

/// `sum_{t >= 0} u_max (1 - nu)^t = u_max / nu`.
pub fn dishonesty_fee(schedule: &FeeSchedule) -> Result<Rational, RegulationError> {
    if !schedule.nu.is_positive() || schedule.nu > Rational::one() {
        return Err(RegulationError::Fee("nu must lie in (0, 1]".into()));
    }
    if schedule.u_max.is_negative() {
        return Err(RegulationError::Fee("u_max must be non-negative".into()));
    }
    Ok(&schedule.u_max / &schedule.nu)
}

/// First `T <= max_rounds` with `sum_{t < T} u_max delta^t >= fee`, if any.
///
/// Runs over integers: with `delta = a / b` the partial sum is
/// `u_max N_T / b^(T-1)` where `N_{T+1} = b N_T + a^T`.
pub fn first_dominance_failure(
    fee: &Rational,
    u_max: &Rational,
    delta: &Rational,
    max_rounds: u64,
) -> Option<u64> {
    let (a, b) = (delta.numer(), delta.denom());
    // fee > u_max N / b^(T-1)  <=>  fee_n u_d b^(T-1) > u_n N fee_d
    let lhs_scale = fee.numer() * u_max.denom();
    let rhs_scale = u_max.numer() * fee.denom();
    let mut n = BigInt::zero();
    let mut a_pow = BigInt::one();
    let mut b_pow = BigInt::one();
    for t in 1..=max_rounds {
        if t > 1 {
            n *= b;
            b_pow *= b;
        }
        n += &a_pow;
        a_pow *= a;
        if &lhs_scale * &b_pow <= &rhs_scale * &n {
            return Some(t);
        }
    }
    None
}
