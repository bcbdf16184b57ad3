use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::EquilibriumError;
use crate::punishment::PunishmentPolicy;
use crate::rational::{int, pow, Rational};

/// H* is an equilibrium strategy for the seller iff `c < sigma * p`.
pub fn hstar_condition(c: &Rational, p: &Rational, sigma: &Rational) -> bool {
    c < &(sigma * p)
}

/// Which algebraic form of the threshold-punishment L* bound to use.
///
/// `Statement` is `sigma p n_B / (1 - sigma^(a+1)) * (1 - sigma^(a+1) / n_S)`;
/// `ProofLine` is the final line of the derivation,
/// `sigma p n_B / (1 - sigma^(a+1)) * (1 - sigma^(a+2) / (n_S (1 - sigma)))`.
/// They coincide at `sigma = 1/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdBoundForm {
    #[default]
    Statement,
    ProofLine,
}

/// Cost above which L* is dominant, with the default threshold form.
pub fn lstar_bound(
    policy: &PunishmentPolicy,
    p: &Rational,
    sigma: &Rational,
    n_buyers: usize,
    n_sellers: usize,
) -> Rational {
    lstar_bound_with(
        policy,
        p,
        sigma,
        n_buyers,
        n_sellers,
        ThresholdBoundForm::default(),
    )
}

pub fn lstar_bound_with(
    policy: &PunishmentPolicy,
    p: &Rational,
    sigma: &Rational,
    n_buyers: usize,
    n_sellers: usize,
    form: ThresholdBoundForm,
) -> Rational {
    let one = Rational::one();
    let n_b = int(n_buyers as i64);
    let n_s = int(n_sellers as i64);
    let share = &one / (&n_s * (&one - sigma));
    let scale = p * sigma * &n_b;
    match policy {
        // Blacklisted forever: the deviation pays once.
        PunishmentPolicy::GrimTrigger => scale * (&one - share),
        PunishmentPolicy::TitForTat => scale * (&one / (&one - pow(sigma, 2)) - share),
        PunishmentPolicy::Limited { alpha } => {
            scale * (&one / (&one - pow(sigma, *alpha as usize + 1)) - share)
        }
        PunishmentPolicy::Threshold { alpha, .. } => {
            let s_a1 = pow(sigma, *alpha as usize + 1);
            let lead = &scale / (&one - &s_a1);
            match form {
                ThresholdBoundForm::Statement => lead * (&one - s_a1 / n_s),
                ThresholdBoundForm::ProofLine => lead * (&one - sigma * s_a1 * share),
            }
        }
    }
}

/// Bounds on `c` for the periodic strategy (H^k L)*: `upper` removes the
/// incentive to deviate from H, `lower` the incentive to deviate from L.
pub fn hk_bounds(
    p: &Rational,
    sigma: &Rational,
    k: u32,
    n_buyers: usize,
) -> Result<(Rational, Rational), EquilibriumError> {
    if k == 0 {
        return Err(EquilibriumError::Invalid("k must be at least 1".into()));
    }
    let one = Rational::one();
    let k = k as usize;
    let s_k = pow(sigma, k);
    let s_k1 = pow(sigma, k + 1);
    let upper =
        p * sigma * (&one - pow(sigma, k - 1) + int(2) * &s_k * (&one - sigma)) / (&one - &s_k);
    let m = int(n_buyers as i64 - 1);
    let lower = p * sigma * (&one - &s_k + &s_k1 * (&one - sigma)) * &m
        / ((&one - &s_k1) * (&one - sigma) + sigma * (&one - &s_k) * &m);
    Ok((upper, lower))
}

/// The two identities behind the infeasibility of (H^k L)*.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HkIdentities {
    /// Lower-bound numerator minus upper-bound numerator (both without `p sigma`).
    pub numerator_difference: Rational,
    /// `sigma^(k-1) (1 - sigma)^3`.
    pub closed_form: Rational,
    /// `1 - sigma^k`, the upper bound's denominator.
    pub upper_denominator: Rational,
    /// `x + sigma (1 - sigma^k)` with `x = (1 - sigma^(k+1))(1 - sigma) / (n_B - 1)`.
    pub lower_denominator: Rational,
}

impl HkIdentities {
    pub fn hold(&self) -> bool {
        self.numerator_difference == self.closed_form
            && self.closed_form > Rational::zero()
            && self.upper_denominator > self.lower_denominator
    }
}

pub fn hk_identities(
    sigma: &Rational,
    k: u32,
    n_buyers: usize,
) -> Result<HkIdentities, EquilibriumError> {
    if k == 0 {
        return Err(EquilibriumError::Invalid("k must be at least 1".into()));
    }
    let one = Rational::one();
    let k = k as usize;
    let s_k = pow(sigma, k);
    let s_k1 = pow(sigma, k + 1);
    let upper_num = &one - pow(sigma, k - 1) + int(2) * &s_k * (&one - sigma);
    let lower_num = &one - &s_k + &s_k1 * (&one - sigma);
    let x = (&one - &s_k1) * (&one - sigma) / int(n_buyers as i64 - 1);
    Ok(HkIdentities {
        numerator_difference: lower_num - upper_num,
        closed_form: pow(sigma, k - 1) * pow(&(&one - sigma), 3),
        upper_denominator: &one - &s_k,
        lower_denominator: x + sigma * (&one - &s_k),
    })
}

/// Threshold L* bound minus the limited-punishment L* bound for the same `alpha`.
pub fn compare_punishments(
    p: &Rational,
    sigma: &Rational,
    n_buyers: usize,
    n_sellers: usize,
    alpha: u32,
) -> Rational {
    compare_punishments_with(
        p,
        sigma,
        n_buyers,
        n_sellers,
        alpha,
        ThresholdBoundForm::default(),
    )
}

pub fn compare_punishments_with(
    p: &Rational,
    sigma: &Rational,
    n_buyers: usize,
    n_sellers: usize,
    alpha: u32,
    form: ThresholdBoundForm,
) -> Rational {
    let threshold = PunishmentPolicy::Threshold {
        threshold: None,
        alpha,
    };
    let limited = PunishmentPolicy::Limited { alpha };
    lstar_bound_with(&threshold, p, sigma, n_buyers, n_sellers, form)
        - lstar_bound(&limited, p, sigma, n_buyers, n_sellers)
}

/// Continuous pricing: whether a buyer prefers the seller rated 1 over one
/// whose own-history value dropped by `phi` and rating by `eps`.
pub fn continuous_preference(
    theta: &Rational,
    phi: &Rational,
    eps: &Rational,
    beta: &Rational,
) -> Result<bool, EquilibriumError> {
    if eps.is_zero() {
        return Err(EquilibriumError::Invalid("eps must be positive".into()));
    }
    Ok(theta * (Rational::one() - phi / eps) < Rational::one() - beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn hstar_examples() {
        assert!(hstar_condition(&int(1), &int(2), &ratio(3, 5)));
        assert!(!hstar_condition(&ratio(3, 2), &int(2), &ratio(3, 5)));
        assert!(!hstar_condition(&ratio(6, 5), &int(2), &ratio(3, 5)));
    }

    #[test]
    fn lstar_examples() {
        let half = ratio(1, 2);
        assert_eq!(
            lstar_bound(&PunishmentPolicy::TitForTat, &int(1), &half, 3, 3),
            int(1)
        );
        let th = PunishmentPolicy::Threshold {
            threshold: None,
            alpha: 1,
        };
        for form in [ThresholdBoundForm::Statement, ThresholdBoundForm::ProofLine] {
            assert_eq!(
                lstar_bound_with(&th, &int(1), &half, 3, 3, form),
                ratio(11, 6)
            );
        }
        assert_eq!(compare_punishments(&int(1), &half, 3, 3, 1), ratio(5, 6));
    }

    #[test]
    fn hk_examples() {
        let (upper, lower) = hk_bounds(&int(1), &ratio(1, 2), 1, 3).unwrap();
        assert_eq!(upper, ratio(1, 2));
        assert_eq!(lower, ratio(5, 7));
        assert!(hk_bounds(&int(1), &ratio(1, 2), 0, 3).is_err());
        let id = hk_identities(&ratio(1, 2), 2, 3).unwrap();
        assert_eq!(id.numerator_difference, ratio(1, 16));
        assert!(id.hold());
    }

    #[test]
    fn continuous_examples() {
        let b = ratio(3, 5);
        assert!(continuous_preference(&ratio(1, 2), &ratio(1, 10), &ratio(1, 5), &b).unwrap());
        assert!(
            continuous_preference(&int(1), &ratio(1, 5), &ratio(1, 5), &ratio(99, 100)).unwrap()
        );
        assert!(!continuous_preference(&ratio(1, 100), &int(0), &ratio(1, 5), &int(1)).unwrap());
        assert!(continuous_preference(&int(1), &int(0), &int(0), &b).is_err());
    }
}
