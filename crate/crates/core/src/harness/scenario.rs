use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ScenarioConfig};
use crate::framework::{
    audit_simulation, AuditReport, IndividualDecryption, PlaintextOnSealedChannel, PublicRoundData,
    Quality,
};
use crate::market::{OraclePath, PublishInput, Published, RatingPath, RoundOutcome};
use crate::rational::{serde_rational, to_canonical, Rational};
use crate::regulation::{AnonymityCornerCases, DishonestyReport, ProtocolPath};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Column order of the per-round CSV export.
pub const CSV_HEADER: [&str; 7] = ["t", "seller_id", "price", "I_T", "I_Q", "Q", "sales_count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Plaintext ratings only.
    Oracle,
    /// Encrypted aggregation with monitors.
    Protocol,
    /// The protocol path, audited against the oracle every round.
    Both,
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "protocol" => Ok(Self::Protocol),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown mode `{other}` (oracle, protocol, both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One CSV row: a seller in a round. `q` is the rating published at the
/// end of the round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRow {
    pub t: u64,
    pub seller_id: usize,
    #[serde(with = "serde_rational::option")]
    pub price: Option<Rational>,
    pub i_t: u8,
    #[serde(with = "serde_rational::option")]
    pub i_q: Option<Rational>,
    #[serde(with = "serde_rational")]
    pub q: Rational,
    pub sales_count: u32,
}

impl RoundRow {
    fn record(&self) -> [String; 7] {
        let opt = |x: &Option<Rational>| x.as_ref().map(to_canonical).unwrap_or_default();
        [
            self.t.to_string(),
            self.seller_id.to_string(),
            opt(&self.price),
            self.i_t.to_string(),
            opt(&self.i_q),
            to_canonical(&self.q),
            self.sales_count.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAudit {
    pub t: u64,
    pub report: AuditReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalReport {
    pub rounds: u64,
    #[serde(with = "serde_rational::vec")]
    pub final_ratings: Vec<Rational>,
    /// Per seller, sales delivered at high and at low quality.
    pub high_sales: Vec<u64>,
    pub low_sales: Vec<u64>,
    /// Per-round audits, in `both` mode.
    pub audits: Vec<RoundAudit>,
    /// Whether every audit passed; `None` when no audit ran.
    pub audit_pass: Option<bool>,
    pub dishonesty_reports: Vec<DishonestyReport>,
    /// `(round, buyer)` pairs the software entity identified.
    pub identified: Vec<(u64, usize)>,
    /// `(round, buyer)` pairs whose feedback copies disagreed.
    pub rejected: Vec<(u64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub mode: RunMode,
    pub seed: u64,
    pub rows: Vec<RoundRow>,
    pub report: FinalReport,
    /// JSON-lines protocol transcript. Exported separately, not part of the
    /// JSON report.
    #[serde(skip)]
    pub transcript: Option<String>,
}

impl ResultBundle {
    pub fn empty(mode: RunMode, seed: u64) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            seed,
            rows: Vec::new(),
            report: FinalReport::default(),
            transcript: None,
        }
    }

    /// Whether the run passed its audits; runs without audits pass.
    pub fn passed(&self) -> bool {
        self.report.audit_pass.unwrap_or(true)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.record()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let bundle: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Report(e.to_string()))?;
        if bundle.schema_version != REPORT_SCHEMA_VERSION {
            return Err(HarnessError::Report(format!(
                "schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
                bundle.schema_version
            )));
        }
        Ok(bundle)
    }
}

/// Writes the bundle to `path` in `format`.
pub fn export_report(
    bundle: &ResultBundle,
    format: ReportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let text = match format {
        ReportFormat::Csv => bundle.to_csv(),
        ReportFormat::Json => bundle.to_json(),
    };
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn load_report(path: &Path) -> Result<ResultBundle, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ResultBundle::from_json(&text)
}

/// The protocol path with the oracle evaluated next to it and every round
/// audited.
struct AuditedPath {
    protocol: ProtocolPath,
    quorum: usize,
    audits: Vec<RoundAudit>,
}

impl RatingPath for AuditedPath {
    fn publish(&mut self, input: &PublishInput<'_>) -> Result<Published, String> {
        let oracle = OraclePath.publish(input)?;
        let protocol = self.protocol.publish(input)?;
        let round = PublicRoundData {
            t: input.t,
            sellers_with_sales: input.sellers_with_sales.clone(),
            ratings: protocol.next_q.clone(),
        };
        let decryption = IndividualDecryption {
            quorum: self.quorum,
        };
        let report = audit_simulation(
            &oracle.next_q,
            &protocol.next_q,
            self.protocol.ledger(),
            &round,
            &[
                &PlaintextOnSealedChannel,
                &decryption,
                &AnonymityCornerCases,
            ],
        )
        .map_err(|e| e.to_string())?;
        self.audits.push(RoundAudit { t: input.t, report });
        Ok(protocol)
    }
}

fn rows_of(outcome: &RoundOutcome) -> impl Iterator<Item = RoundRow> + '_ {
    (0..outcome.next_ratings.len()).map(move |s| RoundRow {
        t: outcome.t,
        seller_id: s,
        price: outcome.prices[s].clone(),
        i_t: u8::from(outcome.sales[s] > 0),
        i_q: outcome.summary.i_q[s].clone(),
        q: outcome.next_ratings[s].clone(),
        sales_count: outcome.sales[s],
    })
}

fn drive(
    config: &ScenarioConfig,
    mode: RunMode,
    path: &mut dyn RatingPath,
) -> Result<ResultBundle, HarnessError> {
    let mut state = config.market_state()?;
    state.disable_store();
    let n_s = config.market.n_sellers;
    let mut bundle = ResultBundle::empty(mode, config.seed);
    bundle.report.high_sales = vec![0; n_s];
    bundle.report.low_sales = vec![0; n_s];
    bundle.report.final_ratings = state.current_ratings().to_vec();
    for _ in 0..config.rounds {
        let outcome = state.run_round(path)?;
        for p in &outcome.purchases {
            match p.quality {
                Quality::High => bundle.report.high_sales[p.seller] += 1,
                Quality::Low => bundle.report.low_sales[p.seller] += 1,
            }
        }
        bundle.rows.extend(rows_of(&outcome));
        bundle.report.rounds = outcome.t;
        bundle.report.final_ratings = outcome.next_ratings;
    }
    Ok(bundle)
}

fn attach_protocol(bundle: &mut ResultBundle, protocol: &ProtocolPath) {
    bundle.report.dishonesty_reports = protocol.dishonesty_reports().to_vec();
    bundle.report.identified = protocol.identified().to_vec();
    bundle.report.rejected = protocol.rejected().to_vec();
    bundle.transcript = Some(protocol.ledger().transcript_jsonl());
}

/// Runs every round of the scenario. Deterministic in the configuration,
/// which carries the seed.
pub fn run_scenario(config: &ScenarioConfig, mode: RunMode) -> Result<ResultBundle, HarnessError> {
    config.validate()?;
    let market = config.market_config();
    let protocol = || {
        ProtocolPath::new(&market, &config.buyers, &config.punishment)
            .map(|p| p.with_monitoring(config.regulation.monitoring))
    };
    match mode {
        RunMode::Oracle => drive(config, mode, &mut OraclePath),
        RunMode::Protocol => {
            let mut path = protocol()?;
            let mut bundle = drive(config, mode, &mut path)?;
            attach_protocol(&mut bundle, &path);
            Ok(bundle)
        }
        RunMode::Both => {
            let mut path = AuditedPath {
                protocol: protocol()?,
                quorum: market.n_buyers,
                audits: Vec::new(),
            };
            let mut bundle = drive(config, mode, &mut path)?;
            attach_protocol(&mut bundle, &path.protocol);
            bundle.report.audit_pass = Some(
                path.audits.len() as u64 == config.rounds
                    && path.audits.iter().all(|a| a.report.pass),
            );
            bundle.report.audits = path.audits;
            Ok(bundle)
        }
    }
}
