use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use medshare::harness::{
    self, bench_communication, bench_encryption, bench_latency, comm_is_additive, is_monotone, HarnessError,
    OutputFormat, ScenarioConfig, MB,
};

#[derive(Parser)]
#[command(name = "medshare", version, about = "Scenario runner and benchmarks for the record sharing protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded end-to-end scenario and report metrics.
    Scenario(Opts),
    /// Encryption/decryption time by record size.
    BenchEnc(Opts),
    /// Patient and hospital bytes by number of grantee doctors.
    BenchComm(Opts),
    /// Consult latency by number of concurrent patients.
    BenchLatency(Opts),
}

#[derive(Args, Default)]
struct Opts {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record sizes, e.g. `1MB,2MB` or `1024`.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<String>>,
    /// Doctor count (scenario) or list of grantee counts (bench-comm).
    #[arg(long, value_delimiter = ',')]
    doctors: Option<Vec<usize>>,
    /// Patient count (scenario) or list of concurrency levels (bench-latency).
    #[arg(long, value_delimiter = ',')]
    patients: Option<Vec<usize>>,
    #[arg(long)]
    hospitals: Option<usize>,
    #[arg(long)]
    seal_latency_ms: Option<u64>,
    /// Repetitions per size (bench-enc).
    #[arg(long)]
    reps: Option<usize>,
    /// Rounds per concurrency level (bench-latency).
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    records_per_patient: Option<usize>,
    #[arg(long)]
    grants_per_record: Option<usize>,
    /// Corrupt the first release before recovery (scenario).
    #[arg(long)]
    tamper: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileOpts {
    seed: Option<u64>,
    sizes: Option<Vec<SizeValue>>,
    doctors: Option<Vec<usize>>,
    patients: Option<Vec<usize>>,
    hospitals: Option<usize>,
    seal_latency_ms: Option<u64>,
    reps: Option<usize>,
    rounds: Option<usize>,
    records_per_patient: Option<usize>,
    grants_per_record: Option<usize>,
    tamper: Option<bool>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SizeValue {
    Bytes(usize),
    Text(String),
}

impl Opts {
    /// Fills unset flags from the config file.
    fn merged(mut self) -> Result<Opts, String> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let f: FileOpts = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        self.seed = self.seed.or(f.seed);
        self.sizes = self.sizes.or_else(|| {
            f.sizes.map(|v| {
                v.into_iter()
                    .map(|s| match s {
                        SizeValue::Bytes(b) => b.to_string(),
                        SizeValue::Text(t) => t,
                    })
                    .collect()
            })
        });
        self.doctors = self.doctors.or(f.doctors);
        self.patients = self.patients.or(f.patients);
        self.hospitals = self.hospitals.or(f.hospitals);
        self.seal_latency_ms = self.seal_latency_ms.or(f.seal_latency_ms);
        self.reps = self.reps.or(f.reps);
        self.rounds = self.rounds.or(f.rounds);
        self.records_per_patient = self.records_per_patient.or(f.records_per_patient);
        self.grants_per_record = self.grants_per_record.or(f.grants_per_record);
        self.tamper |= f.tamper.unwrap_or(false);
        self.out = self.out.or(f.out);
        self.format = self.format.or(f.format);
        Ok(self)
    }

    fn sizes(&self, default: &[usize]) -> Result<Vec<usize>, String> {
        match &self.sizes {
            Some(v) => v.iter().map(|s| parse_size(s)).collect(),
            None => Ok(default.to_vec()),
        }
    }

    fn single(list: &Option<Vec<usize>>, name: &str) -> Result<Option<usize>, String> {
        match list.as_deref() {
            None => Ok(None),
            Some([n]) => Ok(Some(*n)),
            Some(_) => Err(format!("--{name} takes a single count for this command")),
        }
    }
}

/// Parses `4096`, `4K`, `4KB`, `1M`, `1MB` (binary multiples).
fn parse_size(s: &str) -> Result<usize, String> {
    let t = s.trim().to_ascii_uppercase();
    let t = t.strip_suffix('B').unwrap_or(&t);
    let (num, mult) = match t.chars().last() {
        Some('K') => (&t[..t.len() - 1], 1 << 10),
        Some('M') => (&t[..t.len() - 1], 1 << 20),
        Some('G') => (&t[..t.len() - 1], 1 << 30),
        _ => (t, 1),
    };
    let n: usize = num.trim().parse().map_err(|_| format!("invalid size `{s}`"))?;
    n.checked_mul(mult).ok_or_else(|| format!("size `{s}` overflows"))
}

fn write_out(contents: &str, out: Option<&Path>) -> Result<(), HarnessError> {
    harness::emit(contents, out)
}

fn render<T: serde::Serialize>(rows: &[T], format: OutputFormat) -> Result<String, HarnessError> {
    match format {
        OutputFormat::Csv => harness::rows_to_csv(rows),
        OutputFormat::Json => harness::rows_to_json(rows),
    }
}

fn run(command: Command) -> Result<bool, String> {
    let err = |e: HarnessError| e.to_string();
    match command {
        Command::Scenario(opts) => {
            let o = opts.merged()?;
            let d = ScenarioConfig::default();
            let cfg = ScenarioConfig {
                seed: o.seed.unwrap_or(d.seed),
                n_hospitals: o.hospitals.unwrap_or(d.n_hospitals),
                n_doctors: Opts::single(&o.doctors, "doctors")?.unwrap_or(d.n_doctors),
                n_patients: Opts::single(&o.patients, "patients")?.unwrap_or(d.n_patients),
                record_size_bytes: o.sizes(&d.record_size_bytes)?,
                records_per_patient: o.records_per_patient.unwrap_or(d.records_per_patient),
                grants_per_record: o.grants_per_record.unwrap_or(d.grants_per_record),
                block_seal_latency_ms: o.seal_latency_ms.unwrap_or(d.block_seal_latency_ms),
                output_path: o.out.clone(),
                tamper: o.tamper,
                ..d
            };
            let report = harness::run_scenario(&cfg).map_err(err)?;
            let text = match o.format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => report.to_json(),
                OutputFormat::Csv => report.to_csv(),
            }
            .map_err(err)?;
            write_out(&text, cfg.output_path.as_deref()).map_err(err)?;
            eprintln!(
                "scenario ok: {} records, {} grants, {} recoveries, patient sent {} B",
                report.records, report.grants, report.recoveries, report.patient_bytes_sent
            );
            Ok(true)
        }
        Command::BenchEnc(opts) => {
            let o = opts.merged()?;
            let default: Vec<usize> = (0..=6).map(|i| MB << i).collect();
            let sizes = o.sizes(&default)?;
            let rows = bench_encryption(&sizes, o.reps.unwrap_or(5), o.seed.unwrap_or(42)).map_err(err)?;
            write_out(&render(&rows, o.format.unwrap_or_default()).map_err(err)?, o.out.as_deref()).map_err(err)?;
            let enc: Vec<f64> = rows.iter().map(|r| r.mean_enc_ms).collect();
            let dec: Vec<f64> = rows.iter().map(|r| r.mean_dec_ms).collect();
            eprintln!("enc monotone: {}, dec monotone: {}", is_monotone(&enc), is_monotone(&dec));
            Ok(true)
        }
        Command::BenchComm(opts) => {
            let o = opts.merged()?;
            let counts = o.doctors.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16]);
            let size = *o.sizes(&[1024])?.first().ok_or("--sizes is empty")?;
            let rows = bench_communication(&counts, size, o.seed.unwrap_or(42)).map_err(err)?;
            write_out(&render(&rows, o.format.unwrap_or_default()).map_err(err)?, o.out.as_deref()).map_err(err)?;
            let additive = comm_is_additive(&rows);
            if let Some(r) = rows.iter().find(|r| r.n_doctors == 1) {
                eprintln!("patient bytes for one doctor: {} B (reference figure: about 4 KB)", r.patient_bytes);
            }
            eprintln!("per-doctor additivity: {additive}");
            Ok(additive)
        }
        Command::BenchLatency(opts) => {
            let o = opts.merged()?;
            let counts = o.patients.clone().unwrap_or_else(|| vec![1, 2, 5, 10]);
            let size = *o.sizes(&[1024])?.first().ok_or("--sizes is empty")?;
            let rows = bench_latency(
                &counts,
                o.seal_latency_ms.unwrap_or(0),
                size,
                o.rounds.unwrap_or(3),
                o.seed.unwrap_or(42),
            )
            .map_err(err)?;
            write_out(&render(&rows, o.format.unwrap_or_default()).map_err(err)?, o.out.as_deref()).map_err(err)?;
            let means: Vec<f64> = rows.iter().map(|r| r.mean_ms).collect();
            eprintln!("latency monotone: {}", is_monotone(&means));
            if let Some(r) = rows.iter().find(|r| r.n_patients == 10) {
                eprintln!("mean latency at 10 patients: {:.2} ms (reference figure: around 300 ms)", r.mean_ms);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: an in-run assertion failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
