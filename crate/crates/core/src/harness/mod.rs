//! Seeded multi-actor scenarios and the benchmark suite behind the CLI.

mod bench;
mod world;

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::LedgerConfig;

pub use bench::{
    bench_communication, bench_encryption, bench_latency, comm_is_additive, is_monotone, CommRow, EncRow, LatencyRow,
    MB,
};
pub use world::{Deposit, Retrieval, World, WorldSpec, EPOCH};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("phase `{phase}` failed ({code}): {message}")]
    Phase { phase: &'static str, code: String, message: String },
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn phase(phase: &'static str, code: &str, err: impl fmt::Display) -> Self {
        HarnessError::Phase { phase, code: code.to_owned(), message: err.to_string() }
    }

    /// The failing phase, if the error came from a protocol step.
    pub fn failed_phase(&self) -> Option<&'static str> {
        match self {
            HarnessError::Phase { phase, .. } => Some(phase),
            _ => None,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            HarnessError::InvalidConfig(_) => "E_CONFIG",
            HarnessError::Phase { code, .. } => code,
            HarnessError::Output(_) => "E_OUTPUT",
            HarnessError::Io(_) => "E_IO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_hospitals: usize,
    pub n_doctors: usize,
    pub n_patients: usize,
    /// Record body sizes, cycled over the records of the run.
    pub record_size_bytes: Vec<usize>,
    pub records_per_patient: usize,
    /// Grants issued for every record, each to a different doctor.
    pub grants_per_record: usize,
    /// Concurrency used by the latency benchmark when no list is given.
    pub n_concurrent: usize,
    pub block_seal_latency_ms: u64,
    pub output_path: Option<PathBuf>,
    /// Flip one ciphertext byte of the first release before recovery.
    pub tamper: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            n_hospitals: 1,
            n_doctors: 2,
            n_patients: 1,
            record_size_bytes: vec![1024],
            records_per_patient: 1,
            grants_per_record: 1,
            n_concurrent: 1,
            block_seal_latency_ms: 0,
            output_path: None,
            tamper: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_owned()));
        if self.n_hospitals < 1 || self.n_doctors < 1 || self.n_patients < 1 {
            return bad("n_hospitals, n_doctors and n_patients must be at least 1");
        }
        if self.records_per_patient < 1 || self.n_concurrent < 1 {
            return bad("records_per_patient and n_concurrent must be at least 1");
        }
        if self.record_size_bytes.is_empty() || self.record_size_bytes.contains(&0) {
            return bad("record sizes must be at least 1 byte");
        }
        if self.grants_per_record >= self.n_doctors {
            return bad("grants_per_record must be below n_doctors (grantees exclude the record's creator)");
        }
        Ok(())
    }

    fn world_spec(&self) -> WorldSpec {
        WorldSpec {
            seed: self.seed,
            n_hospitals: self.n_hospitals,
            n_doctors: self.n_doctors,
            n_patients: self.n_patients,
            ledger: LedgerConfig { seal_latency_ms: self.block_seal_latency_ms, ..LedgerConfig::default() },
            ..WorldSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub count: usize,
    pub total_ms: f64,
}

/// Sizes of one message kind, summed over the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStat {
    pub message: String,
    pub sender: String,
    pub receiver: String,
    pub count: usize,
    pub total_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub n_hospitals: usize,
    pub n_doctors: usize,
    pub n_patients: usize,
    pub record_size_bytes: Vec<usize>,
    pub block_seal_latency_ms: u64,
    pub records: usize,
    pub grants: usize,
    pub recoveries: usize,
    pub phases: Vec<PhaseTiming>,
    pub messages: Vec<MessageStat>,
    pub patient_bytes_sent: usize,
    pub hospital_bytes_sent: usize,
    pub doctor_bytes_sent: usize,
    /// Wall time spent on each patient's records, grants and recoveries.
    pub patient_latency_ms: Vec<f64>,
    pub chain_height: usize,
    pub chain_txs: usize,
    pub head_hash: String,
    pub audited_releases: usize,
}

impl MetricsReport {
    /// The report with every wall-clock field zeroed.
    pub fn without_timings(&self) -> MetricsReport {
        let mut r = self.clone();
        for p in &mut r.phases {
            p.total_ms = 0.0;
        }
        for l in &mut r.patient_latency_ms {
            *l = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::Output(e.to_string()))
    }

    /// Flat `section,name,count,value` rows.
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        #[derive(Serialize)]
        struct Row<'a> {
            section: &'a str,
            name: String,
            count: usize,
            value: f64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut put = |section, name: String, count, value| w.serialize(Row { section, name, count, value });
        let res: Result<(), csv::Error> = (|| {
            for p in &self.phases {
                put("phase_ms", p.phase.clone(), p.count, p.total_ms)?;
            }
            for m in &self.messages {
                put(
                    "message_bytes",
                    format!("{}:{}->{}", m.message, m.sender, m.receiver),
                    m.count,
                    m.total_bytes as f64,
                )?;
            }
            put("sent_bytes", "patient".into(), 1, self.patient_bytes_sent as f64)?;
            put("sent_bytes", "hospital".into(), 1, self.hospital_bytes_sent as f64)?;
            put("sent_bytes", "doctor".into(), 1, self.doctor_bytes_sent as f64)?;
            for (i, l) in self.patient_latency_ms.iter().enumerate() {
                put("patient_latency_ms", format!("P{}", i + 1), 1, *l)?;
            }
            put("chain", "height".into(), 1, self.chain_height as f64)?;
            put("chain", "txs".into(), 1, self.chain_txs as f64)?;
            Ok(())
        })();
        res.map_err(|e| HarnessError::Output(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| HarnessError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Output(e.to_string()))
    }
}

const PHASES: [&str; 8] =
    ["setup", "create_anchor", "mask_store", "grant", "accept", "request_release", "recover", "audit"];

#[derive(Default)]
struct Tally {
    timings: Vec<PhaseTiming>,
    messages: Vec<MessageStat>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            timings: PHASES.iter().map(|p| PhaseTiming { phase: (*p).into(), count: 0, total_ms: 0.0 }).collect(),
            messages: Vec::new(),
        }
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let t = self.timings.iter_mut().find(|t| t.phase == phase).expect("known phase");
        t.count += 1;
        t.total_ms += ms;
        (out, ms)
    }

    fn message(&mut self, message: &str, sender: &str, receiver: &str, bytes: usize) {
        match self.messages.iter_mut().find(|m| m.message == message) {
            Some(m) => {
                m.count += 1;
                m.total_bytes += bytes;
            }
            None => self.messages.push(MessageStat {
                message: message.into(),
                sender: sender.into(),
                receiver: receiver.into(),
                count: 1,
                total_bytes: bytes,
            }),
        }
    }

    fn sent_by(&self, sender: &str) -> usize {
        self.messages.iter().filter(|m| m.sender == sender).map(|m| m.total_bytes).sum()
    }
}

/// Runs setup, registration, record creation, grants and recoveries,
/// checking every recovered body against the original.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    config.validate()?;
    let mut tally = Tally::new();
    let (world, _) = tally.time("setup", || World::build(&config.world_spec()));
    let mut world = world?;
    let mut body_rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0x6d65_6473_6861_7265);
    let mut patient_latency_ms = Vec::with_capacity(config.n_patients);
    let (mut records, mut grants, mut recoveries) = (0, 0, 0);
    let mut tamper_pending = config.tamper;

    for p in 0..config.n_patients {
        let mut elapsed = 0.0;
        for r in 0..config.records_per_patient {
            let size = config.record_size_bytes[records % config.record_size_bytes.len()];
            let mut body = vec![0u8; size];
            body_rng.fill_bytes(&mut body);
            let doctor = (p + r) % config.n_doctors;

            let (anchored, ms) = tally.time("create_anchor", || world.anchor(doctor, p, body.clone(), "consultation"));
            let anchored = anchored?;
            elapsed += ms;
            let (deposit, ms) = tally.time("mask_store", || world.deposit(doctor, p, &anchored, None));
            let deposit = deposit?;
            elapsed += ms;
            tally.message("anchor_tx", "doctor", "chain", deposit.anchor_tx_bytes);
            tally.message("masked_entry", "patient", "hospital", deposit.entry_bytes);
            tally.message("chr", "doctor", "hospital", deposit.chr_bytes);
            records += 1;

            for g in 0..config.grants_per_record {
                let grantee = (doctor + 1 + g) % config.n_doctors;
                let (shared, ms) = tally.time("grant", || world.share(p, &deposit.tx_id, grantee));
                let (grant_tx, grant_bytes) = shared?;
                elapsed += ms;
                tally.message("grant_tx", "patient", "chain", grant_bytes);
                grants += 1;

                let (pass, ms) = tally.time("accept", || world.accept(grantee, &grant_tx));
                let pass = pass?;
                elapsed += ms;
                let (requested, ms) = tally.time("request_release", || world.request(grantee, &pass));
                let (w, request_bytes, mut release) = requested?;
                elapsed += ms;
                tally.message("access_request", "doctor", "hospital", request_bytes);
                tally.message("release", "hospital", "doctor", release.to_bytes().len());

                if tamper_pending {
                    let mid = release.chr.len() / 2;
                    release.chr.bytes_mut()[mid] ^= 0x01;
                    tamper_pending = false;
                }
                let (recovered, ms) = tally.time("recover", || world.recover(grantee, &w, &release));
                let recovered = recovered?;
                elapsed += ms;
                if recovered != body {
                    return Err(HarnessError::phase(
                        "recover",
                        "E_BODY_MISMATCH",
                        format!("patient {p} record {r}: recovered body differs from original"),
                    ));
                }
                recoveries += 1;
            }
        }
        patient_latency_ms.push(elapsed);
    }

    let (audit, _) = tally.time("audit", || -> Result<usize, HarnessError> {
        world.ledger.verify_chain().map_err(|f| HarnessError::phase("audit", "E_CHAIN_VERIFY", f))?;
        let released: usize =
            world.hospitals.iter().map(|h| crate::hospital_store::AuditLog::releases(&h.audit_events()).len()).sum();
        if released != recoveries {
            return Err(HarnessError::phase(
                "audit",
                "E_AUDIT_COUNT",
                format!("{released} audited releases for {recoveries} recoveries"),
            ));
        }
        Ok(released)
    });
    let audited_releases = audit?;

    let head_hash = world.ledger.blocks().last().map(|b| b.block_hash.to_hex()).unwrap_or_default();
    Ok(MetricsReport {
        seed: config.seed,
        n_hospitals: config.n_hospitals,
        n_doctors: config.n_doctors,
        n_patients: config.n_patients,
        record_size_bytes: config.record_size_bytes.clone(),
        block_seal_latency_ms: config.block_seal_latency_ms,
        records,
        grants,
        recoveries,
        patient_bytes_sent: tally.sent_by("patient"),
        hospital_bytes_sent: tally.sent_by("hospital"),
        doctor_bytes_sent: tally.sent_by("doctor"),
        phases: tally.timings,
        messages: tally.messages,
        patient_latency_ms,
        chain_height: world.ledger.height(),
        chain_txs: world.ledger.transactions().count(),
        head_hash,
        audited_releases,
    })
}

/// Serializes benchmark rows as CSV with a header line.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Output(e.to_string()))
}

pub fn rows_to_json<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    serde_json::to_string_pretty(rows).map_err(|e| HarnessError::Output(e.to_string()))
}

/// Writes `contents` to `path`, or to stdout when `path` is `None`.
pub fn emit(contents: &str, path: Option<&std::path::Path>) -> Result<(), HarnessError> {
    match path {
        Some(p) => std::fs::write(p, contents)?,
        None if contents.ends_with('\n') => print!("{contents}"),
        None => println!("{contents}"),
    }
    Ok(())
}
