use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::bounds::{
    compare_punishments_with, hk_bounds, hk_identities, lstar_bound, lstar_bound_with,
    ThresholdBoundForm,
};
use super::deviation::lstar_payoffs;
use crate::punishment::PunishmentPolicy;
use crate::rational::{ratio, serde_rational, to_canonical, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub point: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub points: usize,
    pub counterexamples: Vec<Counterexample>,
    pub pass: bool,
}

impl SweepReport {
    pub fn new(name: &str, points: usize, counterexamples: Vec<Counterexample>) -> Self {
        let pass = points > 0 && counterexamples.is_empty();
        Self {
            name: name.to_string(),
            points,
            counterexamples,
            pass,
        }
    }
}

/// Grid for the (H^k L)* infeasibility sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicGrid {
    #[serde(with = "serde_rational::vec")]
    pub sigmas: Vec<Rational>,
    pub ks: Vec<u32>,
    pub n_buyers: Vec<usize>,
}

impl Default for PeriodicGrid {
    /// `sigma` in 0.51, 0.53, ..., 0.99; `k` in 1..=12; `n_B` in 3..=10.
    fn default() -> Self {
        Self {
            sigmas: (0..25).map(|i| ratio(51 + 2 * i, 100)).collect(),
            ks: (1..=12).collect(),
            n_buyers: (3..=10).collect(),
        }
    }
}

/// Grid for the punishment-bound sweeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunishmentGrid {
    #[serde(with = "serde_rational::vec")]
    pub sigmas: Vec<Rational>,
    pub alphas: Vec<u32>,
    pub n_buyers: Vec<usize>,
    pub n_sellers: Vec<usize>,
}

impl Default for PunishmentGrid {
    /// `sigma` in 0.01, 0.03, ..., 0.99; `alpha` in 1..=10; `n_B`, `n_S` in 3..=10.
    fn default() -> Self {
        Self {
            sigmas: (0..50).map(|i| ratio(1 + 2 * i, 100)).collect(),
            alphas: (1..=10).collect(),
            n_buyers: (3..=10).collect(),
            n_sellers: (3..=10).collect(),
        }
    }
}

impl PunishmentGrid {
    fn points(&self) -> impl Iterator<Item = (&Rational, u32, usize, usize)> + '_ {
        self.sigmas.iter().flat_map(move |s| {
            self.alphas.iter().flat_map(move |&a| {
                self.n_buyers
                    .iter()
                    .flat_map(move |&nb| self.n_sellers.iter().map(move |&ns| (s, a, nb, ns)))
            })
        })
    }
}

fn label(sigma: &Rational, rest: &str) -> String {
    format!("sigma={} {rest}", to_canonical(sigma))
}

/// `upper < lower` for (H^k L)* at every point, plus both identities.
pub fn periodic_infeasibility_sweep(grid: &PeriodicGrid) -> SweepReport {
    periodic_infeasibility_sweep_with(grid, |p, s, k, nb| {
        hk_bounds(p, s, k, nb).expect("grid k >= 1")
    })
}

/// As [`periodic_infeasibility_sweep`] with a caller-supplied bound pair.
pub fn periodic_infeasibility_sweep_with(
    grid: &PeriodicGrid,
    bounds: impl Fn(&Rational, &Rational, u32, usize) -> (Rational, Rational),
) -> SweepReport {
    let p = Rational::one();
    let mut points = 0;
    let mut bad = Vec::new();
    for sigma in &grid.sigmas {
        for &k in &grid.ks {
            for &nb in &grid.n_buyers {
                points += 1;
                let point = label(sigma, &format!("k={k} n_B={nb}"));
                if k == 0 {
                    bad.push(Counterexample {
                        point,
                        detail: "k must be at least 1".into(),
                    });
                    continue;
                }
                let (upper, lower) = bounds(&p, sigma, k, nb);
                if upper >= lower {
                    bad.push(Counterexample {
                        point: point.clone(),
                        detail: format!(
                            "upper {} >= lower {}",
                            to_canonical(&upper),
                            to_canonical(&lower)
                        ),
                    });
                }
                let id = hk_identities(sigma, k, nb).expect("k >= 1");
                if !id.hold() {
                    bad.push(Counterexample {
                        point,
                        detail: format!(
                            "identities fail: difference {} vs {}, denominators {} vs {}",
                            to_canonical(&id.numerator_difference),
                            to_canonical(&id.closed_form),
                            to_canonical(&id.upper_denominator),
                            to_canonical(&id.lower_denominator)
                        ),
                    });
                }
            }
        }
    }
    SweepReport::new("periodic_infeasibility", points, bad)
}

/// Threshold bound strictly above the limited bound at every point.
pub fn punishment_comparison_sweep(grid: &PunishmentGrid, form: ThresholdBoundForm) -> SweepReport {
    let p = Rational::one();
    let mut points = 0;
    let mut bad = Vec::new();
    for (sigma, alpha, nb, ns) in grid.points() {
        points += 1;
        let diff = compare_punishments_with(&p, sigma, nb, ns, alpha, form);
        if diff <= Rational::zero() {
            bad.push(Counterexample {
                point: label(sigma, &format!("alpha={alpha} n_B={nb} n_S={ns}")),
                detail: format!("difference {}", to_canonical(&diff)),
            });
        }
    }
    SweepReport::new("punishment_comparison", points, bad)
}

/// `Limited { alpha: 1 }` and tit-for-tat give the same bound.
pub fn limited_tit_for_tat_sweep(grid: &PunishmentGrid) -> SweepReport {
    let p = Rational::one();
    let mut points = 0;
    let mut bad = Vec::new();
    for (sigma, _, nb, ns) in grid.points().filter(|(_, a, _, _)| *a == grid.alphas[0]) {
        points += 1;
        let tft = lstar_bound(&PunishmentPolicy::TitForTat, &p, sigma, nb, ns);
        let lim = lstar_bound(&PunishmentPolicy::Limited { alpha: 1 }, &p, sigma, nb, ns);
        if tft != lim {
            bad.push(Counterexample {
                point: label(sigma, &format!("n_B={nb} n_S={ns}")),
                detail: format!(
                    "tit-for-tat {} vs limited {}",
                    to_canonical(&tft),
                    to_canonical(&lim)
                ),
            });
        }
    }
    SweepReport::new("limited_equals_tit_for_tat", points, bad)
}

/// The limited-punishment bound strictly decreases in `alpha`.
pub fn limited_monotonicity_sweep(grid: &PunishmentGrid) -> SweepReport {
    let p = Rational::one();
    let mut alphas = grid.alphas.clone();
    alphas.sort_unstable();
    alphas.dedup();
    let mut points = 0;
    let mut bad = Vec::new();
    for sigma in &grid.sigmas {
        for &nb in &grid.n_buyers {
            for &ns in &grid.n_sellers {
                for w in alphas.windows(2) {
                    points += 1;
                    let a = lstar_bound(
                        &PunishmentPolicy::Limited { alpha: w[0] },
                        &p,
                        sigma,
                        nb,
                        ns,
                    );
                    let b = lstar_bound(
                        &PunishmentPolicy::Limited { alpha: w[1] },
                        &p,
                        sigma,
                        nb,
                        ns,
                    );
                    if b >= a {
                        bad.push(Counterexample {
                            point: label(
                                sigma,
                                &format!("alpha={}->{} n_B={nb} n_S={ns}", w[0], w[1]),
                            ),
                            detail: format!("{} then {}", to_canonical(&a), to_canonical(&b)),
                        });
                    }
                }
            }
        }
    }
    SweepReport::new("limited_bound_decreasing_in_alpha", points, bad)
}

/// The L* payoff comparison flips exactly at the bound, for `policy_of(alpha)`.
///
/// At each point the cost is placed just above and just below the bound;
/// conforming must win above it and deviating below it.
pub fn lstar_bound_sweep(
    name: &str,
    grid: &PunishmentGrid,
    policy_of: impl Fn(u32) -> PunishmentPolicy,
    form: ThresholdBoundForm,
) -> SweepReport {
    let p = Rational::one();
    let gap = ratio(1, 1_000_000);
    let mut points = 0;
    let mut bad = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (sigma, alpha, nb, ns) in grid.points() {
        let policy = policy_of(alpha);
        if !seen.insert((to_canonical(sigma), format!("{policy:?}"), nb, ns)) {
            continue;
        }
        points += 1;
        let bound = lstar_bound_with(&policy, &p, sigma, nb, ns, form);
        for (c, conform_should_win) in [(&bound + &gap, true), (&bound - &gap, false)] {
            let (conform, deviate) = lstar_payoffs(&policy, &p, &c, sigma, nb, ns);
            if (conform > deviate) != conform_should_win {
                bad.push(Counterexample {
                    point: label(sigma, &format!("{policy:?} n_B={nb} n_S={ns}")),
                    detail: format!(
                        "c={} conform={} deviate={}",
                        to_canonical(&c),
                        to_canonical(&conform),
                        to_canonical(&deviate)
                    ),
                });
            }
        }
    }
    SweepReport::new(name, points, bad)
}

/// Both threshold-bound forms agree at `sigma = 1/2`.
pub fn threshold_forms_sweep(grid: &PunishmentGrid) -> SweepReport {
    let p = Rational::one();
    let half = ratio(1, 2);
    let mut points = 0;
    let mut bad = Vec::new();
    for &alpha in &grid.alphas {
        for &nb in &grid.n_buyers {
            for &ns in &grid.n_sellers {
                points += 1;
                let policy = PunishmentPolicy::Threshold {
                    threshold: None,
                    alpha,
                };
                let a = lstar_bound_with(&policy, &p, &half, nb, ns, ThresholdBoundForm::Statement);
                let b = lstar_bound_with(&policy, &p, &half, nb, ns, ThresholdBoundForm::ProofLine);
                if a != b {
                    bad.push(Counterexample {
                        point: format!("alpha={alpha} n_B={nb} n_S={ns}"),
                        detail: format!("{} vs {}", to_canonical(&a), to_canonical(&b)),
                    });
                }
            }
        }
    }
    SweepReport::new("threshold_forms_coincide_at_half", points, bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn small() -> PunishmentGrid {
        PunishmentGrid {
            sigmas: vec![ratio(1, 4), ratio(1, 2), ratio(9, 10)],
            alphas: vec![1, 2, 5],
            n_buyers: vec![3, 5],
            n_sellers: vec![3, 4],
        }
    }

    #[test]
    fn default_periodic_grid_passes() {
        let r = periodic_infeasibility_sweep(&PeriodicGrid::default());
        assert_eq!(r.points, 25 * 12 * 8);
        assert!(r.pass, "{:?}", r.counterexamples.first());
    }

    #[test]
    fn perturbed_bounds_are_caught() {
        let grid = PeriodicGrid {
            sigmas: vec![ratio(1, 2)],
            ks: vec![1, 2],
            n_buyers: vec![3],
        };
        let r = periodic_infeasibility_sweep_with(&grid, |p, s, k, nb| {
            let (u, l) = hk_bounds(p, s, k, nb).unwrap();
            (u * int(2), l)
        });
        assert!(!r.pass);
        assert_eq!(r.counterexamples.len(), 2);
    }

    #[test]
    fn punishment_sweeps_pass() {
        let g = small();
        assert!(punishment_comparison_sweep(&g, ThresholdBoundForm::Statement).pass);
        assert!(limited_tit_for_tat_sweep(&g).pass);
        assert!(limited_monotonicity_sweep(&g).pass);
        assert!(threshold_forms_sweep(&g).pass);
        let r = lstar_bound_sweep(
            "limited",
            &g,
            |a| PunishmentPolicy::Limited { alpha: a },
            ThresholdBoundForm::Statement,
        );
        assert!(r.pass, "{:?}", r.counterexamples.first());
    }

    #[test]
    fn proof_line_form_goes_negative_for_patient_sellers() {
        let g = small();
        let r = punishment_comparison_sweep(&g, ThresholdBoundForm::ProofLine);
        assert!(!r.pass);
        assert!(r
            .counterexamples
            .iter()
            .all(|c| c.point.starts_with("sigma=9/10")));
    }
}
