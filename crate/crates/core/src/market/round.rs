use std::collections::BTreeSet;

use num_traits::{One, Zero};

use super::rating::{public_perception, Epoch, RoundSummary};
use super::{
    invalid, personal_perception, select_seller, BuyerParams, BuyerState, MarketConfig,
    MarketError, QualityOverride, SellerParams, SellerState,
};
use crate::framework::{default_access, EventStore, ParticipantId, Quality, TransactionRecord};
use crate::pricing::{adaptive_step, price_of, AdaptiveSellerPriceState, PricingRule};
use crate::punishment::{
    apply_feedback, threshold_check, threshold_value, BlacklistState, IsolationState,
    PunishmentPolicy,
};
use crate::rational::Rational;
use crate::rng::SimRng;

/// One sale in a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Purchase {
    pub buyer: usize,
    pub seller: usize,
    pub price: Rational,
    /// Quality actually delivered.
    pub quality: Quality,
    /// The buyer's perception `q_b^t(seller)` when choosing.
    pub perception: Rational,
}

/// The rating a buyer reports for this round's purchase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackReport {
    pub buyer: usize,
    pub seller: usize,
    pub reported: Quality,
}

/// A round after selection and delivery, waiting for feedback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRound {
    pub t: u64,
    pub prices: Vec<Option<Rational>>,
    pub isolated: Vec<bool>,
    pub purchases: Vec<Purchase>,
    /// Per buyer, the sellers its final choice was drawn from.
    pub candidates: Vec<Option<Vec<usize>>>,
}

impl PendingRound {
    pub fn honest_reports(&self) -> Vec<FeedbackReport> {
        self.purchases
            .iter()
            .map(|p| FeedbackReport {
                buyer: p.buyer,
                seller: p.seller,
                reported: p.quality,
            })
            .collect()
    }
}

/// Everything a rating path may use to publish `Q^{t+1}`.
pub struct PublishInput<'a> {
    pub t: u64,
    pub n_buyers: usize,
    pub n_sellers: usize,
    /// Private: each report is known only to its buyer.
    pub reports: &'a [FeedbackReport],
    pub sellers_with_sales: &'a BTreeSet<usize>,
    pub delta_m: &'a Rational,
    /// Epoch in force for round `t + 1`, per seller.
    pub epochs: &'a [Epoch],
    pub xi: &'a Rational,
    /// Public prices of round `t`; `None` for sellers not for sale.
    pub prices: &'a [Option<Rational>],
    /// Published ratings `Q^1..=Q^t`.
    pub ratings: &'a [Vec<Rational>],
    /// The plaintext round summaries through `t`. Only the oracle path reads these.
    pub summaries: &'a [RoundSummary],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Published {
    /// `I_Q(s, t)` as revealed to the buyers.
    pub i_q: Vec<Option<Rational>>,
    /// `Q^{t+1}`.
    pub next_q: Vec<Rational>,
}

/// How the end-of-round ratings are produced.
pub trait RatingPath {
    fn publish(&mut self, input: &PublishInput<'_>) -> Result<Published, String>;
}

/// Plaintext evaluation over the market's own summaries.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePath;

impl RatingPath for OraclePath {
    fn publish(&mut self, input: &PublishInput<'_>) -> Result<Published, String> {
        let next_q = public_perception(input.summaries, input.delta_m, input.epochs)
            .map_err(|e| e.to_string())?;
        let i_q = input
            .summaries
            .last()
            .map(|s| s.i_q.clone())
            .unwrap_or_default();
        Ok(Published { i_q, next_q })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub t: u64,
    pub delta_m: Rational,
    pub prices: Vec<Option<Rational>>,
    /// `Q^t`, in force during the round.
    pub ratings: Vec<Rational>,
    /// `Q^{t+1}`, published at the end of the round.
    pub next_ratings: Vec<Rational>,
    pub purchases: Vec<Purchase>,
    pub candidates: Vec<Option<Vec<usize>>>,
    pub summary: RoundSummary,
    pub sales: Vec<u32>,
    pub events: Vec<u64>,
    pub isolated: Vec<bool>,
}

/// Full simulation state.
#[derive(Debug, Clone)]
pub struct MarketState {
    pub config: MarketConfig,
    pub pricing: PricingRule,
    pub policy: PunishmentPolicy,
    pub buyers: Vec<BuyerState>,
    pub sellers: Vec<SellerState>,
    pub blacklists: BlacklistState,
    pub isolation: IsolationState,
    pub adaptive: Vec<AdaptiveSellerPriceState>,
    pub summaries: Vec<RoundSummary>,
    /// `ratings[t - 1]` is `Q^t`; one entry ahead of the summaries.
    pub ratings: Vec<Vec<Rational>>,
    pub delta_history: Vec<Rational>,
    pub epochs: Vec<Epoch>,
    pub overrides: Vec<QualityOverride>,
    pub rng: SimRng,
    /// `None` disables the transaction store, which keeps clones cheap.
    pub store: Option<EventStore>,
    pending_epochs: Vec<Option<Epoch>>,
    /// Whether some published rating of the seller exceeded `xi`.
    xi_switched: Vec<bool>,
    thresholds: Vec<Option<Rational>>,
    t: u64,
}

impl MarketState {
    pub fn new(
        config: MarketConfig,
        buyers: Vec<BuyerParams>,
        sellers: Vec<SellerParams>,
        pricing: PricingRule,
        policy: PunishmentPolicy,
    ) -> Result<Self, MarketError> {
        config.validate()?;
        if buyers.len() != config.n_buyers {
            return Err(invalid(
                "buyers",
                format!("expected {} entries, got {}", config.n_buyers, buyers.len()),
            ));
        }
        if sellers.len() != config.n_sellers {
            return Err(invalid(
                "sellers",
                format!(
                    "expected {} entries, got {}",
                    config.n_sellers,
                    sellers.len()
                ),
            ));
        }
        for (i, b) in buyers.iter().enumerate() {
            b.validate(i, &config.tau)?;
        }
        for (i, s) in sellers.iter().enumerate() {
            s.validate(i)?;
        }
        let costs: Vec<Rational> = sellers.iter().map(|s| s.cost.clone()).collect();
        pricing
            .validate(&config.v_high, &config.v_low, &costs)
            .map_err(|e| invalid("pricing", e.to_string()))?;
        let thresholds = Self::thresholds(&config, &pricing, &policy)?;

        let n_s = config.n_sellers;
        let mut store = EventStore::new();
        for b in 0..config.n_buyers {
            store
                .register(ParticipantId::buyer(b))
                .map_err(|e| invalid("buyers", e.to_string()))?;
        }
        for s in 0..n_s {
            store
                .register(ParticipantId::seller(s))
                .map_err(|e| invalid("sellers", e.to_string()))?;
        }
        Ok(Self {
            buyers: buyers
                .into_iter()
                .map(|p| BuyerState::new(p, n_s))
                .collect(),
            sellers: sellers
                .into_iter()
                .map(|params| SellerState { params })
                .collect(),
            blacklists: BlacklistState::new(config.n_buyers, n_s),
            isolation: IsolationState::new(n_s),
            adaptive: vec![AdaptiveSellerPriceState::HighPrice; n_s],
            summaries: Vec::new(),
            ratings: vec![vec![config.xi.clone(); n_s]],
            delta_history: Vec::new(),
            epochs: vec![
                Epoch {
                    start: 1,
                    base: config.xi.clone()
                };
                n_s
            ],
            overrides: Vec::new(),
            rng: SimRng::new(config.rng_seed),
            store: Some(store),
            pending_epochs: vec![None; n_s],
            xi_switched: vec![false; n_s],
            thresholds,
            t: 1,
            pricing,
            policy,
            config,
        })
    }

    fn thresholds(
        config: &MarketConfig,
        pricing: &PricingRule,
        policy: &PunishmentPolicy,
    ) -> Result<Vec<Option<Rational>>, MarketError> {
        if let Some(alpha) = policy.alpha() {
            if alpha == 0 {
                return Err(invalid("punishment.alpha", "must be at least 1"));
            }
        }
        let adaptive = matches!(pricing, PricingRule::BinaryAdaptive { .. });
        let n_s = config.n_sellers;
        match policy {
            PunishmentPolicy::Threshold { threshold, .. } => {
                if adaptive {
                    if threshold.is_some() {
                        return Err(invalid(
                            "punishment.threshold",
                            "adaptive pricing isolates by its own thresholds; leave it unset",
                        ));
                    }
                    return Ok(vec![None; n_s]);
                }
                match threshold {
                    Some(th) => {
                        if !(th > &Rational::zero() && th < &Rational::one()) {
                            return Err(invalid("punishment.threshold", "must lie in (0, 1)"));
                        }
                        Ok(vec![Some(th.clone()); n_s])
                    }
                    None => (0..n_s)
                        .map(|s| {
                            threshold_value(pricing, s, &config.v_high)
                                .map(Some)
                                .ok_or_else(|| {
                                    invalid(
                                        "punishment.threshold",
                                        "continuous pricing needs an explicit threshold",
                                    )
                                })
                        })
                        .collect(),
                }
            }
            _ if adaptive => Err(invalid(
                "punishment",
                "adaptive pricing needs threshold punishment",
            )),
            _ => Ok(vec![None; n_s]),
        }
    }

    /// The next round to be played.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn current_ratings(&self) -> &[Rational] {
        &self.ratings[self.t as usize - 1]
    }

    pub fn disable_store(&mut self) {
        self.store = None;
    }

    fn is_isolated(&self, seller: usize, t: u64) -> bool {
        self.isolation.is_isolated(seller, t)
            || matches!(
                self.adaptive[seller],
                AdaptiveSellerPriceState::Isolated { .. }
            ) && matches!(self.pricing, PricingRule::BinaryAdaptive { .. })
    }

    fn xi_bar(&self, seller: usize, q: &Rational) -> Rational {
        if self.xi_switched[seller] {
            q.clone()
        } else {
            self.config.xi.clone()
        }
    }

    /// `q_b^t(s)` for every seller, as buyer `b` sees them this round.
    pub fn perceptions(&self, buyer: usize) -> Vec<Rational> {
        let q_pub = self.current_ratings();
        let b = &self.buyers[buyer];
        (0..self.config.n_sellers)
            .map(|s| {
                let h = b.histories[s].value(&self.xi_bar(s, &q_pub[s]));
                personal_perception(&h, &q_pub[s], &b.params.theta)
            })
            .collect()
    }

    fn quality_of(&self, seller: usize, buyer: usize, t: u64) -> Quality {
        self.overrides
            .iter()
            .find(|o| o.seller == seller && o.round == t && o.buyer.is_none_or(|b| b == buyer))
            .map(|o| o.quality)
            .unwrap_or_else(|| self.sellers[seller].params.strategy.quality_at(t))
    }

    /// Prices, selection and delivery for the next round.
    pub fn begin_round(&mut self) -> Result<PendingRound, MarketError> {
        let t = self.t;
        if t > self.config.horizon {
            return Err(MarketError::HorizonReached(self.config.horizon));
        }
        let n_s = self.config.n_sellers;
        let isolated: Vec<bool> = (0..n_s).map(|s| self.is_isolated(s, t)).collect();
        let q_pub = self.current_ratings().to_vec();
        let prices: Vec<Option<Rational>> = (0..n_s)
            .map(|s| {
                if isolated[s] {
                    None
                } else {
                    price_of(&self.pricing, s, &q_pub[s], Some(&self.adaptive[s])).ok()
                }
            })
            .collect();
        let mut purchases = Vec::new();
        let mut candidates = Vec::with_capacity(self.config.n_buyers);
        for b in 0..self.config.n_buyers {
            let perceptions = self.perceptions(b);
            let excluded: Vec<bool> = (0..n_s)
                .map(|s| isolated[s] || self.blacklists.is_blacklisted(b, s, t))
                .collect();
            let choice = select_seller(
                &self.buyers[b],
                &perceptions,
                &prices,
                &excluded,
                &self.config.v_high,
                &self.config.v_low,
                &mut self.rng,
            );
            match choice {
                Some(sel) => {
                    let s = sel.chosen;
                    purchases.push(Purchase {
                        buyer: b,
                        seller: s,
                        price: prices[s].clone().expect("selected sellers have a price"),
                        quality: self.quality_of(s, b, t),
                        perception: perceptions[s].clone(),
                    });
                    candidates.push(Some(sel.candidates));
                }
                None => candidates.push(None),
            }
        }
        Ok(PendingRound {
            t,
            prices,
            isolated,
            purchases,
            candidates,
        })
    }

    /// Feedback, rating publication, punishment and bookkeeping.
    pub fn finish_round(
        &mut self,
        pending: PendingRound,
        reports: &[FeedbackReport],
        path: &mut dyn RatingPath,
    ) -> Result<RoundOutcome, MarketError> {
        let t = pending.t;
        if t != self.t {
            return Err(invalid(
                "pending.t",
                format!("round {t} is not the current round {}", self.t),
            ));
        }
        let n_s = self.config.n_sellers;
        if reports.len() != pending.purchases.len()
            || reports
                .iter()
                .zip(&pending.purchases)
                .any(|(r, p)| r.buyer != p.buyer || r.seller != p.seller)
        {
            return Err(invalid(
                "reports",
                "one report per purchase, in purchase order",
            ));
        }
        let mut sales = vec![0u32; n_s];
        let mut high = vec![0u32; n_s];
        for r in reports {
            sales[r.seller] += 1;
            if r.reported == Quality::High {
                high[r.seller] += 1;
            }
        }
        let summary = RoundSummary::from_counts(t, &sales, &high);
        self.summaries.push(summary.clone());

        // Epochs for round t + 1: scheduled threshold returns and adaptive expiries.
        let next = t + 1;
        for s in 0..n_s {
            if self.pending_epochs[s]
                .as_ref()
                .is_some_and(|e| e.start == next)
            {
                self.epochs[s] = self.pending_epochs[s].take().expect("checked above");
            }
        }
        let adaptive_rule = match &self.pricing {
            PricingRule::BinaryAdaptive {
                p_high,
                p_low,
                epsilon,
            } => Some((p_high.clone(), p_low.clone(), epsilon.clone())),
            _ => None,
        };
        let alpha = self.policy.alpha().unwrap_or(1);
        if let Some((p_high, p_low, epsilon)) = &adaptive_rule {
            for s in 0..n_s {
                if let AdaptiveSellerPriceState::Isolated { .. } = self.adaptive[s] {
                    let step = adaptive_step(
                        &self.adaptive[s],
                        &Rational::zero(),
                        p_high,
                        p_low,
                        &self.config.v_high,
                        &self.config.v_low,
                        epsilon,
                        alpha,
                    );
                    if let Some(reset) = step.reset {
                        self.epochs[s] = Epoch {
                            start: next,
                            base: reset,
                        };
                    }
                    self.adaptive[s] = step.state;
                }
            }
        }

        let delta_m = self.rng.draw_delta_m(&self.config.tau_bar);
        let published = path
            .publish(&PublishInput {
                t,
                n_buyers: self.config.n_buyers,
                n_sellers: n_s,
                reports,
                sellers_with_sales: &summary.sellers_with_sales,
                delta_m: &delta_m,
                epochs: &self.epochs,
                xi: &self.config.xi,
                prices: &pending.prices,
                ratings: &self.ratings,
                summaries: &self.summaries,
            })
            .map_err(MarketError::Path)?;
        if published.next_q.len() != n_s {
            return Err(MarketError::Path(format!(
                "published {} ratings for {n_s} sellers",
                published.next_q.len()
            )));
        }
        let next_q = published.next_q;
        for s in 0..n_s {
            if next_q[s] > self.config.xi {
                self.xi_switched[s] = true;
            }
        }

        // Market-wide punishment reacts to the freshly published ratings.
        if let Some((p_high, p_low, epsilon)) = &adaptive_rule {
            for s in 0..n_s {
                if !matches!(self.adaptive[s], AdaptiveSellerPriceState::Isolated { .. })
                    && self.epochs[s].start != next
                {
                    let step = adaptive_step(
                        &self.adaptive[s],
                        &next_q[s],
                        p_high,
                        p_low,
                        &self.config.v_high,
                        &self.config.v_low,
                        epsilon,
                        alpha,
                    );
                    self.adaptive[s] = step.state;
                }
            }
        } else {
            for s in 0..n_s {
                if let Some(th) = &self.thresholds[s] {
                    if threshold_check(s, &next_q[s], th, alpha, next, &mut self.isolation) {
                        self.pending_epochs[s] = Some(Epoch {
                            start: next + alpha as u64,
                            base: th.clone(),
                        });
                    }
                }
            }
        }

        let mut events = Vec::new();
        for (p, r) in pending.purchases.iter().zip(reports) {
            let buyer = &mut self.buyers[p.buyer];
            buyer.record(t, p.seller, p.quality);
            apply_feedback(
                &self.policy,
                p.buyer,
                p.seller,
                p.quality,
                &p.perception,
                t,
                &mut self.blacklists,
            );
            if let Some(store) = &mut self.store {
                let (bid, sid) = (
                    ParticipantId::buyer(p.buyer),
                    ParticipantId::seller(p.seller),
                );
                let cost = match p.quality {
                    Quality::High => self.sellers[p.seller].params.cost.clone(),
                    Quality::Low => Rational::zero(),
                };
                let rating = if r.reported == Quality::High {
                    Rational::one()
                } else {
                    Rational::zero()
                };
                let record = TransactionRecord {
                    price: p.price.clone(),
                    cost,
                    quality: p.quality,
                    rating,
                };
                let id = store
                    .append_event([bid, sid].into(), record, default_access(bid, sid))
                    .map_err(|e| invalid("store", e.to_string()))?;
                events.push(id);
            }
        }

        let ratings = self.ratings[t as usize - 1].clone();
        self.ratings.push(next_q.clone());
        self.delta_history.push(delta_m.clone());
        self.t = next;
        Ok(RoundOutcome {
            t,
            delta_m,
            prices: pending.prices,
            ratings,
            next_ratings: next_q,
            purchases: pending.purchases,
            candidates: pending.candidates,
            summary,
            sales,
            events,
            isolated: pending.isolated,
        })
    }

    /// One round with honest feedback.
    pub fn run_round(&mut self, path: &mut dyn RatingPath) -> Result<RoundOutcome, MarketError> {
        let pending = self.begin_round()?;
        let reports = pending.honest_reports();
        self.finish_round(pending, &reports, path)
    }

    /// Plays every remaining round through the oracle path.
    pub fn run_to_horizon(&mut self) -> Result<Vec<RoundOutcome>, MarketError> {
        let mut out = Vec::new();
        while self.t <= self.config.horizon {
            out.push(self.run_round(&mut OraclePath)?);
        }
        Ok(out)
    }
}
