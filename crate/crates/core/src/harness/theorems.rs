use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    classify_equilibrium, default_tolerance, limited_monotonicity_sweep, limited_tit_for_tat_sweep,
    lstar_bound, lstar_bound_sweep, one_deviation_check, periodic_infeasibility_sweep,
    punishment_comparison_sweep, threshold_forms_sweep, Counterexample, DeviationMode,
    DeviationSetup, PeriodicGrid, PunishmentGrid, Regime, SweepReport, ThresholdBoundForm,
};
use crate::market::{BuyerParams, MarketConfig, SellerParams, Strategy};
use crate::pricing::PricingRule;
use crate::punishment::PunishmentPolicy;
use crate::rational::{int, pow, ratio, serde_rational, to_canonical, Rational};

/// Version of the theorem report layout.
pub const THEOREM_SCHEMA_VERSION: u32 = 1;

/// Market profiles on which the classifier and both one-deviation modes
/// are compared.
///
/// Each `(sigma, policy, n_B, n_S)` yields several cost profiles: `h >= 1`
/// cheap sellers at `f * sigma * p` for each `f` in `hstar_cost_fractions`
/// (the rest priced between `sigma * p` and `p`), all sellers at
/// `bound + g * (p - bound)` for each `g` in `lstar_cost_fractions` when the
/// L* bound is below `p`, and one profile in the band between `sigma * p`
/// and the bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementGrid {
    #[serde(with = "serde_rational")]
    pub p: Rational,
    #[serde(with = "serde_rational")]
    pub v_high: Rational,
    #[serde(with = "serde_rational::vec")]
    pub sigmas: Vec<Rational>,
    pub policies: Vec<PunishmentPolicy>,
    pub n_buyers: Vec<usize>,
    pub n_sellers: Vec<usize>,
    #[serde(with = "serde_rational::vec")]
    pub hstar_cost_fractions: Vec<Rational>,
    #[serde(with = "serde_rational::vec")]
    pub lstar_cost_fractions: Vec<Rational>,
    pub seed: u64,
}

impl Default for AgreementGrid {
    fn default() -> Self {
        Self {
            p: int(1),
            v_high: int(5),
            sigmas: vec![ratio(1, 2), ratio(3, 5), ratio(7, 10)],
            policies: vec![
                PunishmentPolicy::GrimTrigger,
                PunishmentPolicy::TitForTat,
                PunishmentPolicy::Limited { alpha: 2 },
                PunishmentPolicy::Limited { alpha: 3 },
            ],
            n_buyers: vec![3, 4, 5],
            n_sellers: vec![3, 4],
            hstar_cost_fractions: vec![ratio(1, 5), ratio(2, 5), ratio(3, 5), ratio(4, 5)],
            lstar_cost_fractions: vec![ratio(1, 4), ratio(1, 2), ratio(3, 4)],
            seed: 11,
        }
    }
}

/// Grids for [`verify_theorems`]; missing sections take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub periodic: PeriodicGrid,
    #[serde(default)]
    pub punishment: PunishmentGrid,
    #[serde(default)]
    pub agreement: AgreementGrid,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self, super::HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| super::HarnessError::Config {
            field: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementSummary {
    /// Profiles whose every seller was classified H* or L*.
    pub classified: usize,
    /// Profiles left out because some seller had no pure regime.
    pub skipped: usize,
    pub max_truncation: u64,
    /// Largest bound on the payoff beyond the truncation horizon.
    #[serde(with = "serde_rational")]
    pub max_tail: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub schema_version: u32,
    pub verdicts: Vec<SweepReport>,
    pub agreement: AgreementSummary,
    pub pass: bool,
}

impl TheoremReport {
    pub fn verdict(&self, name: &str) -> Option<&SweepReport> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn profile(sigma: &Rational, cost: Rational) -> SellerParams {
    SellerParams {
        sigma: sigma.clone(),
        cost,
        strategy: Strategy::AlwaysLow,
    }
}

/// Cost profiles for one grid cell, each with a label.
fn cost_profiles(
    grid: &AgreementGrid,
    sigma: &Rational,
    policy: &PunishmentPolicy,
    n_b: usize,
    n_s: usize,
) -> Vec<(String, Vec<SellerParams>)> {
    let p = &grid.p;
    let cheap_limit = sigma * p;
    let dear = (&cheap_limit + p) / int(2);
    let mut out = Vec::new();
    for h in 1..=n_s {
        for f in &grid.hstar_cost_fractions {
            let sellers = (0..n_s)
                .map(|s| {
                    let c = if s < h {
                        f * &cheap_limit
                    } else {
                        dear.clone()
                    };
                    profile(sigma, c)
                })
                .collect();
            out.push((format!("h={h} f={}", to_canonical(f)), sellers));
        }
    }
    // Costs must stay positive when the bound itself is not.
    let bound = lstar_bound(policy, p, sigma, n_b, n_s).max(Rational::zero());
    if &bound < p {
        for g in &grid.lstar_cost_fractions {
            let c = &bound + g * (p - &bound);
            out.push((
                format!("all_low g={}", to_canonical(g)),
                vec![profile(sigma, c); n_s],
            ));
        }
    }
    let top = if &bound < p { bound } else { p.clone() };
    let band = (&cheap_limit + top) / int(2);
    out.push(("band".into(), vec![profile(sigma, band); n_s]));
    out
}

/// Classifier against both one-deviation modes over the agreement grid.
pub fn agreement_sweep(grid: &AgreementGrid) -> (SweepReport, AgreementSummary) {
    let tol = default_tolerance();
    let one = Rational::one();
    let mut summary = AgreementSummary {
        classified: 0,
        skipped: 0,
        max_truncation: 0,
        max_tail: Rational::from_integer(0.into()),
    };
    let mut bad = Vec::new();
    let pricing = PricingRule::Homogeneous { p: grid.p.clone() };
    for sigma in &grid.sigmas {
        for policy in &grid.policies {
            for &n_b in &grid.n_buyers {
                for &n_s in &grid.n_sellers {
                    let config = MarketConfig {
                        n_buyers: n_b,
                        n_sellers: n_s,
                        xi: ratio(1, 2),
                        tau: ratio(3, 5),
                        tau_bar: ratio(1, 2),
                        v_high: grid.v_high.clone(),
                        v_low: int(0),
                        horizon: 10_000,
                        rng_seed: grid.seed,
                    };
                    let buyers = vec![
                        BuyerParams {
                            delta: ratio(4, 5),
                            theta: ratio(1, 2),
                        };
                        n_b
                    ];
                    for (label, mut sellers) in cost_profiles(grid, sigma, policy, n_b, n_s) {
                        let point = format!(
                            "sigma={} {policy:?} n_B={n_b} n_S={n_s} {label}",
                            to_canonical(sigma)
                        );
                        let fail = |detail: String| Counterexample {
                            point: point.clone(),
                            detail,
                        };
                        let report = match classify_equilibrium(&config, &sellers, &pricing, policy)
                        {
                            Ok(r) => r,
                            Err(e) => {
                                bad.push(fail(format!("classifier: {e}")));
                                continue;
                            }
                        };
                        let pure = report
                            .sellers
                            .iter()
                            .all(|s| matches!(s.regime, Regime::HStar | Regime::LStar));
                        if !pure {
                            summary.skipped += 1;
                            continue;
                        }
                        summary.classified += 1;
                        for (params, r) in sellers.iter_mut().zip(&report.sellers) {
                            params.strategy = match r.regime {
                                Regime::HStar => Strategy::AlwaysHigh,
                                _ => Strategy::AlwaysLow,
                            };
                        }
                        let setup = DeviationSetup {
                            config: config.clone(),
                            buyers: buyers.clone(),
                            sellers,
                            pricing: pricing.clone(),
                            policy: policy.clone(),
                        };
                        for mode in [DeviationMode::ClosedForm, DeviationMode::Simulation] {
                            match one_deviation_check(&setup, mode) {
                                Ok(v) if v.holds => {
                                    if let Some(t) = v.truncation {
                                        let tail =
                                            pow(sigma, t as usize) * &grid.p * int(n_b as i64)
                                                / (&one - sigma);
                                        if tail >= tol {
                                            bad.push(fail(format!(
                                                "tail {} not below tolerance",
                                                to_canonical(&tail)
                                            )));
                                        }
                                        summary.max_truncation = summary.max_truncation.max(t);
                                        if tail > summary.max_tail {
                                            summary.max_tail = tail;
                                        }
                                    }
                                }
                                Ok(v) => bad.push(fail(format!(
                                    "{mode:?} finds a profitable deviation: {:?}",
                                    v.violation
                                ))),
                                Err(e) => bad.push(fail(format!("{mode:?}: {e}"))),
                            }
                        }
                    }
                }
            }
        }
    }
    (
        SweepReport::new("classifier_simulator_agreement", summary.classified, bad),
        summary,
    )
}

/// Every closed-form property over `spec`, plus classifier/simulator
/// agreement.
pub fn verify_theorems(spec: &GridSpec) -> TheoremReport {
    let g = &spec.punishment;
    let mut verdicts = vec![
        lstar_bound_sweep(
            "tit_for_tat_lstar_bound",
            g,
            |_| PunishmentPolicy::TitForTat,
            ThresholdBoundForm::default(),
        ),
        lstar_bound_sweep(
            "grim_trigger_lstar_bound",
            g,
            |_| PunishmentPolicy::GrimTrigger,
            ThresholdBoundForm::default(),
        ),
        periodic_infeasibility_sweep(&spec.periodic),
        lstar_bound_sweep(
            "limited_lstar_bound",
            g,
            |alpha| PunishmentPolicy::Limited { alpha },
            ThresholdBoundForm::default(),
        ),
        limited_tit_for_tat_sweep(g),
        limited_monotonicity_sweep(g),
        lstar_bound_sweep(
            "threshold_lstar_bound",
            g,
            |alpha| PunishmentPolicy::Threshold {
                threshold: None,
                alpha,
            },
            ThresholdBoundForm::default(),
        ),
        threshold_forms_sweep(g),
        punishment_comparison_sweep(g, ThresholdBoundForm::default()),
    ];
    let (agreement, summary) = agreement_sweep(&spec.agreement);
    verdicts.push(agreement);
    let pass = verdicts.iter().all(|v| v.pass);
    TheoremReport {
        schema_version: THEOREM_SCHEMA_VERSION,
        verdicts,
        agreement: summary,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{hk_bounds, periodic_infeasibility_sweep_with};

    fn small() -> GridSpec {
        GridSpec {
            periodic: PeriodicGrid {
                sigmas: vec![ratio(51, 100), ratio(3, 4)],
                ks: vec![1, 2, 5],
                n_buyers: vec![3, 4],
            },
            punishment: PunishmentGrid {
                sigmas: vec![ratio(1, 4), ratio(1, 2), ratio(9, 10)],
                alphas: vec![1, 2, 4],
                n_buyers: vec![3, 5],
                n_sellers: vec![3, 4],
            },
            agreement: AgreementGrid {
                sigmas: vec![ratio(1, 2)],
                policies: vec![PunishmentPolicy::Limited { alpha: 2 }],
                n_buyers: vec![3],
                n_sellers: vec![3],
                hstar_cost_fractions: vec![ratio(1, 2)],
                ..AgreementGrid::default()
            },
        }
    }

    #[test]
    fn small_grid_passes() {
        let report = verify_theorems(&small());
        for v in &report.verdicts {
            assert!(v.pass, "{}: {:?}", v.name, v.counterexamples.first());
        }
        assert!(report.pass);
        // h = 2 and h = 3, three all-low profiles; h = 1 and the band are skipped.
        assert_eq!(report.agreement.classified, 5);
        assert_eq!(report.agreement.skipped, 2);
        assert!(report.agreement.max_tail < default_tolerance());
    }

    #[test]
    fn alpha_one_reduction_reported() {
        let report = verify_theorems(&small());
        let v = report.verdict("limited_equals_tit_for_tat").unwrap();
        assert!(v.pass);
        assert_eq!(v.points, 3 * 2 * 2);
    }

    #[test]
    fn perturbed_bound_is_reported() {
        let spec = small();
        let r = periodic_infeasibility_sweep_with(&spec.periodic, |p, s, k, nb| {
            let (_, lower) = hk_bounds(p, s, k, nb).unwrap();
            (lower.clone() + int(1), lower)
        });
        assert!(!r.pass);
        assert_eq!(r.counterexamples.len(), r.points);
    }

    #[test]
    fn empty_grid_fails() {
        let mut spec = small();
        spec.periodic.ks.clear();
        let report = verify_theorems(&spec);
        assert!(!report.verdict("periodic_infeasibility").unwrap().pass);
        assert!(!report.pass);
    }

    #[test]
    fn grid_spec_defaults_and_errors() {
        let spec = GridSpec::from_json("{}").unwrap();
        assert_eq!(spec, GridSpec::default());
        let spec =
            GridSpec::from_json(r#"{"periodic": {"sigmas": [0.6], "ks": [1], "n_buyers": [3]}}"#)
                .unwrap();
        assert_eq!(spec.periodic.sigmas, vec![ratio(3, 5)]);
        match GridSpec::from_json(r#"{"agreement": {"p": "x"}}"#) {
            Err(super::super::HarnessError::Config { field, .. }) => {
                assert_eq!(field, "agreement.p")
            }
            other => panic!("{other:?}"),
        }
    }
}
