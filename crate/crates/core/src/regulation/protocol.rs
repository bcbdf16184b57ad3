use std::collections::BTreeSet;

use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::aggregate::aggregate_encrypted;
use super::feedback::{consistency_check, encode_feedback, FeedbackVector, Submission};
use super::he::{ciphertexts_bytes, threshold_decrypt, KeyMaterial, MockThresholdHe};
use super::monitor::{
    DishonestyReport, MonitorBinding, MonitorRules, MonitorState, SoftwareEntity,
};
use super::RegulationError;
use crate::framework::{
    ComputationStep, Message, MessageKind, MessageLedger, ParticipantId, Payload,
};
use crate::market::{
    public_perception, BuyerParams, MarketConfig, PublishInput, Published, RatingPath, RoundSummary,
};
use crate::punishment::PunishmentPolicy;
use crate::rational::{to_canonical, Rational};
use crate::rng::SimRng;

/// Test hooks that make one party misbehave in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// The buyer publishes a wrong local perception vector.
    LocalPerception { buyer: usize, round: u64 },
    /// The buyer sends the monitor a different vector than the MPC.
    InconsistentCopy { buyer: usize, round: u64 },
}

/// Ratings computed jointly by the buyers over encrypted feedback, with
/// monitors watching each buyer through the software entity.
#[derive(Debug, Clone)]
pub struct ProtocolPath {
    he: MockThresholdHe,
    key: KeyMaterial,
    /// Indexed by monitor id.
    monitor_keys: Vec<KeyMaterial>,
    se: SoftwareEntity,
    /// Indexed by buyer.
    bindings: Vec<MonitorBinding>,
    /// The monitor state watching each buyer, indexed by buyer.
    monitors: Vec<MonitorState>,
    monitoring: bool,
    ledger: MessageLedger,
    decrypted: Vec<RoundSummary>,
    reports: Vec<DishonestyReport>,
    identified: Vec<(u64, usize)>,
    rejected: Vec<(u64, usize)>,
    faults: Vec<Fault>,
    n_buyers: usize,
    n_sellers: usize,
}

fn all_buyers(n: usize) -> Vec<ParticipantId> {
    (0..n).map(ParticipantId::buyer).collect()
}

impl ProtocolPath {
    pub fn new(
        config: &MarketConfig,
        buyers: &[BuyerParams],
        policy: &PunishmentPolicy,
    ) -> Result<Self, RegulationError> {
        if buyers.len() != config.n_buyers {
            return Err(RegulationError::Setup(format!(
                "{} buyers for n_buyers = {}",
                buyers.len(),
                config.n_buyers
            )));
        }
        let mut rng = SimRng::new(config.rng_seed);
        let mut he = MockThresholdHe::new(&mut rng);
        let parties: Vec<usize> = (0..config.n_buyers).collect();
        let key = he.keygen(&parties)?;
        let (se, bindings) = SoftwareEntity::setup(buyers, &mut rng);
        let monitor_keys = (0..config.n_buyers).map(|m| he.personal_key(m)).collect();
        let rules = MonitorRules {
            n_sellers: config.n_sellers,
            xi: config.xi.clone(),
            v_high: config.v_high.clone(),
            v_low: config.v_low.clone(),
            policy: policy.clone(),
        };
        let monitors = buyers
            .iter()
            .map(|p| MonitorState::new(p.clone(), rules.clone()))
            .collect();
        let mut path = Self {
            he,
            key,
            monitor_keys,
            se,
            bindings,
            monitors,
            monitoring: true,
            ledger: MessageLedger::new(),
            decrypted: Vec::new(),
            reports: Vec::new(),
            identified: Vec::new(),
            rejected: Vec::new(),
            faults: Vec::new(),
            n_buyers: config.n_buyers,
            n_sellers: config.n_sellers,
        };
        path.record_setup();
        Ok(path)
    }

    fn send(
        &mut self,
        round: u64,
        sender: ParticipantId,
        receivers: Vec<ParticipantId>,
        kind: MessageKind,
        payload: Payload,
    ) -> usize {
        self.ledger.push(Message {
            round,
            sender,
            receivers,
            kind,
            payload,
        })
    }

    fn step(
        &mut self,
        label: &str,
        executors: impl IntoIterator<Item = ParticipantId>,
        consumed: Vec<usize>,
        produced: Vec<usize>,
    ) {
        let step = ComputationStep {
            label: label.to_string(),
            executors: executors.into_iter().collect(),
            consumed,
            produced,
        };
        self.ledger
            .record_step(step)
            .expect("steps reference earlier messages");
    }

    fn record_setup(&mut self) {
        let n = self.n_buyers;
        for b in 0..n {
            let share = self.key.shares[b].to_bytes();
            let commitment = hex::encode(Sha256::digest(&share));
            let others = all_buyers(n)
                .into_iter()
                .filter(|&p| p != ParticipantId::buyer(b))
                .collect();
            self.send(
                0,
                ParticipantId::buyer(b),
                others,
                MessageKind::KeyShareCommitment,
                Payload::public(json!({ "commitment": commitment })),
            );
        }
        let pk = self.key.joint_public_key.clone();
        let mut to_all = all_buyers(n);
        to_all.push(ParticipantId::SOFTWARE_ENTITY);
        self.send(
            0,
            ParticipantId::buyer(0),
            to_all,
            MessageKind::JointPublicKey,
            Payload::public(json!({ "key_id": pk.key_id.to_string(), "parties": pk.parties })),
        );
        for b in 0..n {
            let binding = self.bindings[b].clone();
            let m = ParticipantId::monitor(binding.monitor);
            self.send(
                0,
                ParticipantId::SOFTWARE_ENTITY,
                vec![ParticipantId::buyer(b)],
                MessageKind::AliasAssignment,
                Payload::sealed(binding.alias.0.as_bytes()),
            );
            self.send(
                0,
                ParticipantId::SOFTWARE_ENTITY,
                vec![m],
                MessageKind::AliasAssignment,
                Payload::sealed(binding.alias.0.as_bytes()),
            );
        }
    }

    pub fn with_monitoring(mut self, on: bool) -> Self {
        self.monitoring = on;
        self
    }

    pub fn inject(&mut self, fault: Fault) {
        self.faults.push(fault);
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn software_entity(&self) -> &SoftwareEntity {
        &self.se
    }

    pub fn bindings(&self) -> &[MonitorBinding] {
        &self.bindings
    }

    pub fn dishonesty_reports(&self) -> &[DishonestyReport] {
        &self.reports
    }

    /// `(round, buyer)` for every buyer the software entity identified.
    pub fn identified(&self) -> &[(u64, usize)] {
        &self.identified
    }

    /// `(round, buyer)` for every submission pair that failed the consistency check.
    pub fn rejected(&self) -> &[(u64, usize)] {
        &self.rejected
    }

    /// Decrypted `I_Q` history, as every buyer holds it.
    pub fn decrypted_history(&self) -> &[RoundSummary] {
        &self.decrypted
    }

    fn has_fault(&self, fault: Fault) -> bool {
        self.faults.contains(&fault)
    }

    fn run(&mut self, input: &PublishInput<'_>) -> Result<Published, RegulationError> {
        let t = input.t;
        let (n_b, n_s) = (self.n_buyers, self.n_sellers);
        if input.n_buyers != n_b || input.n_sellers != n_s {
            return Err(RegulationError::Setup(
                "market size differs from the key setup".into(),
            ));
        }
        let se = ParticipantId::SOFTWARE_ENTITY;
        let buyers = all_buyers(n_b);
        let delta_msg = self.send(
            t,
            se,
            buyers.clone(),
            MessageKind::DeltaM,
            Payload::public(json!({ "delta_m": to_canonical(input.delta_m) })),
        );

        let mut rows = Vec::new();
        let mut row_msgs = Vec::new();
        let mut sold = BTreeSet::new();
        let mut monitor_copies = Vec::with_capacity(n_b);
        for b in 0..n_b {
            let me = ParticipantId::buyer(b);
            let others: Vec<ParticipantId> = buyers.iter().copied().filter(|&p| p != me).collect();
            let report = input.reports.iter().find(|r| r.buyer == b);
            let vector = encode_feedback(report.map(|r| (r.seller, r.reported)), n_s)?;
            let binding = format!("{b}/{t}");
            let mpc = Submission::seal(
                &mut self.he,
                &self.key.joint_public_key,
                &vector,
                binding.as_bytes(),
            )?;
            let monitor_vector = if self.has_fault(Fault::InconsistentCopy { buyer: b, round: t }) {
                let mut e = vector.entries().to_vec();
                match e.iter().position(|&x| x != 0) {
                    Some(s) => e[s] = -e[s],
                    None => e[0] = 1,
                }
                FeedbackVector::try_from(e)?
            } else {
                vector.clone()
            };
            let m = self.bindings[b].monitor;
            let monitor_pk = self.monitor_keys[m].joint_public_key.clone();
            let mon = Submission::seal(
                &mut self.he,
                &monitor_pk,
                &monitor_vector,
                binding.as_bytes(),
            )?;

            let enc = self.send(
                t,
                me,
                others.clone(),
                MessageKind::EncryptedFeedback,
                Payload::sealed(&ciphertexts_bytes(&mpc.ciphertexts)),
            );
            let relay_in = self.send(
                t,
                me,
                vec![se],
                MessageKind::MonitorFeedback,
                Payload::sealed(&ciphertexts_bytes(&mon.ciphertexts)),
            );
            let relay_out = self.send(
                t,
                se,
                vec![ParticipantId::monitor(m)],
                MessageKind::MonitorFeedback,
                Payload::sealed(&ciphertexts_bytes(&mon.ciphertexts)),
            );
            self.step(
                "relay monitor feedback",
                [se],
                vec![relay_in],
                vec![relay_out],
            );
            let mut commit_to = others.clone();
            commit_to.push(se);
            let commit = self.send(
                t,
                me,
                commit_to.clone(),
                MessageKind::FeedbackCommitment,
                Payload::public(
                    json!({ "mpc": mpc.commitment.to_hex(), "monitor": mon.commitment.to_hex() }),
                ),
            );

            let accepted = consistency_check(&self.he, binding.as_bytes(), Some(&mpc), Some(&mon))?;
            let verdict = self.send(
                t,
                se,
                buyers.clone(),
                MessageKind::ConsistencyVerdict,
                Payload::public(json!({ "buyer": b, "accepted": accepted })),
            );
            let mut validators = others.clone();
            validators.push(se);
            self.step(
                "consistency check",
                validators,
                vec![enc, relay_in, commit],
                vec![verdict],
            );
            if accepted {
                if let Some(r) = report {
                    sold.insert(r.seller);
                }
                rows.push(mpc.ciphertexts);
                row_msgs.push(enc);
            } else {
                self.rejected.push((t, b));
            }
            monitor_copies.push((b, mon));
        }

        let mut i_q: Vec<Option<Rational>> = vec![None; n_s];
        if !rows.is_empty() {
            let agg = aggregate_encrypted(&mut self.he, &rows, n_s, &sold)?;
            let agg_bytes: Vec<u8> = agg
                .i_q
                .iter()
                .flatten()
                .chain(&agg.sales)
                .flat_map(|c| c.to_bytes())
                .collect();
            let agg_msg = self.send(
                t,
                ParticipantId::buyer(0),
                buyers.clone(),
                MessageKind::AggregateCiphertext,
                Payload::sealed(&agg_bytes),
            );
            self.step(
                "homomorphic aggregation",
                buyers.clone(),
                row_msgs,
                vec![agg_msg],
            );
            let mut share_msgs = Vec::with_capacity(n_b);
            for b in 0..n_b {
                let bytes = self.key.shares[b].to_bytes();
                share_msgs.push(self.send(
                    t,
                    ParticipantId::buyer(b),
                    buyers.clone(),
                    MessageKind::DecryptionShare,
                    Payload::sealed(&bytes),
                ));
            }
            let sold_cts: Vec<_> = agg.i_q.iter().flatten().cloned().collect();
            let plain = threshold_decrypt(&self.he, &self.key.shares, &sold_cts)?;
            let mut plain = plain.into_iter();
            for (s, c) in agg.i_q.iter().enumerate() {
                if c.is_some() {
                    i_q[s] = plain.next();
                }
            }
            let shown: Vec<Option<String>> =
                i_q.iter().map(|x| x.as_ref().map(to_canonical)).collect();
            let mut to_all = buyers.clone();
            to_all.push(se);
            let dec = self.send(
                t,
                ParticipantId::buyer(0),
                to_all,
                MessageKind::DecryptedRatingFractions,
                Payload::public(json!({ "i_q": shown })),
            );
            let mut consumed = vec![agg_msg];
            consumed.extend(share_msgs);
            self.step("threshold decryption", buyers.clone(), consumed, vec![dec]);
        }
        self.decrypted
            .push(RoundSummary::from_fractions(t, i_q.clone()));

        let mut locals = Vec::with_capacity(n_b);
        let mut local_msgs = Vec::with_capacity(n_b);
        for b in 0..n_b {
            let mut q = public_perception(&self.decrypted, input.delta_m, input.epochs)?;
            if self.has_fault(Fault::LocalPerception { buyer: b, round: t }) {
                q[0] += Rational::one();
            }
            let shown: Vec<String> = q.iter().map(to_canonical).collect();
            let me = ParticipantId::buyer(b);
            local_msgs.push(self.send(
                t,
                me,
                buyers.clone(),
                MessageKind::LocalPerception,
                Payload::public(json!({ "q": shown })),
            ));
            self.step(
                "local perception",
                [me],
                vec![delta_msg],
                vec![*local_msgs.last().expect("just pushed")],
            );
            locals.push(q);
        }
        let dissent: Vec<usize> = (1..n_b).filter(|&b| locals[b] != locals[0]).collect();
        if !dissent.is_empty() {
            return Err(RegulationError::Consensus {
                round: t,
                buyers: dissent,
            });
        }

        if self.monitoring {
            let q_t = input
                .ratings
                .get(t as usize - 1)
                .ok_or_else(|| RegulationError::Setup(format!("rating Q^{t} missing")))?;
            for (b, mon) in monitor_copies {
                let m = self.bindings[b].monitor;
                let plain = self.he_decrypt_monitor(m, &mon)?;
                let vector = FeedbackVector::from_plaintexts(&plain)?;
                let alias = self.bindings[b].alias.clone();
                if let Some(report) = self.monitors[b].step(&alias, q_t, input.prices, &vector)? {
                    let monitor = ParticipantId::monitor(m);
                    self.send(
                        t,
                        monitor,
                        vec![se],
                        MessageKind::DishonestyReport,
                        Payload::public(json!({ "alias": alias.0, "round": t })),
                    );
                    let buyer = self.se.identify(&report)?;
                    let mut to_all = buyers.clone();
                    to_all.push(monitor);
                    self.send(
                        t,
                        se,
                        to_all,
                        MessageKind::DishonestyIdentification,
                        Payload::public(json!({ "buyer": buyer, "round": t })),
                    );
                    self.reports.push(report);
                    self.identified.push((t, buyer));
                }
            }
        }
        Ok(Published {
            i_q,
            next_q: locals.swap_remove(0),
        })
    }

    fn he_decrypt_monitor(
        &self,
        monitor: usize,
        copy: &Submission,
    ) -> Result<Vec<Rational>, RegulationError> {
        Ok(threshold_decrypt(
            &self.he,
            &self.monitor_keys[monitor].shares,
            &copy.ciphertexts,
        )?)
    }
}

impl RatingPath for ProtocolPath {
    fn publish(&mut self, input: &PublishInput<'_>) -> Result<Published, String> {
        self.run(input).map_err(|e| e.to_string())
    }
}
