use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::feedback::FeedbackVector;
use super::RegulationError;
use crate::market::{personal_perception, select_seller, BuyerParams, BuyerState};
use crate::punishment::{apply_feedback, BlacklistState, PunishmentPolicy};
use crate::rational::Rational;
use crate::rng::{SimRng, Stream};

/// Pseudonym under which the software entity knows a buyer to her monitor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alias(pub String);

/// A monitor's view of the buyer it watches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorBinding {
    pub monitor: usize,
    pub alias: Alias,
    /// Registered under the alias at setup.
    pub params: BuyerParams,
}

/// Holder of the alias map. Modeled as honest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SoftwareEntity {
    aliases: BTreeMap<Alias, usize>,
    registered: BTreeMap<Alias, BuyerParams>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DishonestyReport {
    pub alias: Alias,
    pub round: u64,
    pub observed: Option<usize>,
    /// The prediction's tie set.
    pub predicted: Vec<usize>,
}

impl SoftwareEntity {
    /// Draws one alias per buyer and a random monitor assignment. The
    /// returned bindings are indexed by buyer.
    pub fn setup(buyers: &[BuyerParams], rng: &mut SimRng) -> (Self, Vec<MonitorBinding>) {
        let stream = rng.stream(Stream::Monitor);
        let mut monitors: Vec<usize> = (0..buyers.len()).collect();
        monitors.shuffle(stream);
        let mut se = SoftwareEntity::default();
        let mut bindings = Vec::with_capacity(buyers.len());
        for (b, params) in buyers.iter().enumerate() {
            let alias = loop {
                let bytes: [u8; 8] = rand::Rng::gen(stream);
                let a = Alias(hex::encode(bytes));
                if !se.aliases.contains_key(&a) {
                    break a;
                }
            };
            se.aliases.insert(alias.clone(), b);
            se.registered.insert(alias.clone(), params.clone());
            bindings.push(MonitorBinding {
                monitor: monitors[b],
                alias,
                params: params.clone(),
            });
        }
        (se, bindings)
    }

    pub fn is_registered(&self, binding: &MonitorBinding) -> bool {
        self.registered.get(&binding.alias) == Some(&binding.params)
    }

    /// Resolves a reported alias to the real buyer id.
    pub fn identify(&self, report: &DishonestyReport) -> Result<usize, RegulationError> {
        self.aliases
            .get(&report.alias)
            .copied()
            .ok_or_else(|| RegulationError::UnregisteredAlias(report.alias.0.clone()))
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }
}

/// Public rules a monitor needs for its prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorRules {
    pub n_sellers: usize,
    pub xi: Rational,
    pub v_high: Rational,
    pub v_low: Rational,
    pub policy: PunishmentPolicy,
}

/// The buyer as her monitor reconstructs her, treating reported feedback
/// as her experience.
#[derive(Debug, Clone)]
pub struct MonitorState {
    rules: MonitorRules,
    shadow: BuyerState,
    blacklist: BlacklistState,
    switched: Vec<bool>,
    /// Next round to observe.
    round: u64,
}

impl MonitorState {
    pub fn new(params: BuyerParams, rules: MonitorRules) -> Self {
        let n = rules.n_sellers;
        Self {
            shadow: BuyerState::new(params, n),
            blacklist: BlacklistState::new(1, n),
            switched: vec![false; n],
            round: 1,
            rules,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    fn perceptions(&self, q: &[Rational], switched: &[bool]) -> Vec<Rational> {
        (0..self.rules.n_sellers)
            .map(|s| {
                let xb = if switched[s] {
                    q[s].clone()
                } else {
                    self.rules.xi.clone()
                };
                let h = self.shadow.histories[s].value(&xb);
                personal_perception(&h, &q[s], &self.shadow.params.theta)
            })
            .collect()
    }

    fn check_width(&self, what: &str, len: usize) -> Result<(), RegulationError> {
        if len != self.rules.n_sellers {
            return Err(RegulationError::InvalidFeedback(format!(
                "{what} has {len} entries for {} sellers",
                self.rules.n_sellers
            )));
        }
        Ok(())
    }

    /// Tie set the buyer chooses from in the current round, given `Q^t`
    /// and the round's prices.
    pub fn predict(
        &self,
        q: &[Rational],
        prices: &[Option<Rational>],
    ) -> Result<Vec<usize>, RegulationError> {
        self.check_width("rating vector", q.len())?;
        self.check_width("price vector", prices.len())?;
        let mut switched = self.switched.clone();
        for s in 0..q.len() {
            switched[s] |= q[s] > self.rules.xi;
        }
        let perceptions = self.perceptions(q, &switched);
        let excluded: Vec<bool> = (0..self.rules.n_sellers)
            .map(|s| self.blacklist.is_blacklisted(0, s, self.round))
            .collect();
        // Only the tie set matters; the draw is discarded.
        let mut scratch = SimRng::new(0);
        let sel = select_seller(
            &self.shadow,
            &perceptions,
            prices,
            &excluded,
            &self.rules.v_high,
            &self.rules.v_low,
            &mut scratch,
        );
        Ok(sel.map(|s| s.candidates).unwrap_or_default())
    }

    /// Absorbs the current round's published rating `Q^t` and the buyer's
    /// feedback, then moves to the next round.
    pub fn advance(
        &mut self,
        q: &[Rational],
        feedback: &FeedbackVector,
    ) -> Result<(), RegulationError> {
        self.check_width("rating vector", q.len())?;
        self.check_width("feedback vector", feedback.len())?;
        for s in 0..q.len() {
            self.switched[s] |= q[s] > self.rules.xi;
        }
        if let Some((s, quality)) = feedback.purchase() {
            let perception = self.perceptions(q, &self.switched).swap_remove(s);
            self.shadow.record(self.round, s, quality);
            apply_feedback(
                &self.rules.policy,
                0,
                s,
                quality,
                &perception,
                self.round,
                &mut self.blacklist,
            );
        }
        self.round += 1;
        Ok(())
    }

    /// Predicts, compares with the purchase `feedback` reveals, and advances.
    pub fn step(
        &mut self,
        alias: &Alias,
        q: &[Rational],
        prices: &[Option<Rational>],
        feedback: &FeedbackVector,
    ) -> Result<Option<DishonestyReport>, RegulationError> {
        let predicted = self.predict(q, prices)?;
        let observed = feedback.purchase().map(|(s, _)| s);
        let round = self.round;
        self.advance(q, feedback)?;
        Ok(mismatch(alias, round, observed, predicted))
    }
}

fn mismatch(
    alias: &Alias,
    round: u64,
    observed: Option<usize>,
    predicted: Vec<usize>,
) -> Option<DishonestyReport> {
    let consistent = match observed {
        Some(s) => predicted.contains(&s),
        None => predicted.is_empty(),
    };
    (!consistent).then(|| DishonestyReport {
        alias: alias.clone(),
        round,
        observed,
        predicted,
    })
}

/// Reconstructs the buyer from `feedback` (rounds `1..t`), predicts her
/// choice in round `t` and flags an observed purchase outside the tie set.
/// `ratings` holds `Q^1..=Q^t`, `prices` the prices of round `t`.
pub fn monitor_cycle(
    se: &SoftwareEntity,
    binding: &MonitorBinding,
    rules: &MonitorRules,
    feedback: &[FeedbackVector],
    ratings: &[Vec<Rational>],
    prices: &[Option<Rational>],
    observed: Option<usize>,
) -> Result<Option<DishonestyReport>, RegulationError> {
    if !se.is_registered(binding) {
        return Err(RegulationError::UnregisteredAlias(binding.alias.0.clone()));
    }
    let t = feedback.len() + 1;
    if ratings.len() < t {
        return Err(RegulationError::InvalidFeedback(format!(
            "ratings through round {t} required"
        )));
    }
    let mut state = MonitorState::new(binding.params.clone(), rules.clone());
    for (i, v) in feedback.iter().enumerate() {
        state.advance(&ratings[i], v)?;
    }
    let predicted = state.predict(&ratings[t - 1], prices)?;
    Ok(mismatch(&binding.alias, t as u64, observed, predicted))
}
