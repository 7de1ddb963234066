//! Runs a seeded multi-hospital scenario and prints its metrics report.

use medshare::harness::{run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig {
        seed: 42,
        n_hospitals: 2,
        n_doctors: 4,
        n_patients: 3,
        record_size_bytes: vec![512, 64 * 1024],
        records_per_patient: 2,
        grants_per_record: 2,
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&config)?;
    for phase in &report.phases {
        println!("{:<16} x{:<3} {:>9.3} ms", phase.phase, phase.count, phase.total_ms);
    }
    for m in &report.messages {
        println!("{:<15} {:>8} -> {:<8} x{:<3} {:>9} B", m.message, m.sender, m.receiver, m.count, m.total_bytes);
    }
    println!("patient sent {} B, hospital sent {} B", report.patient_bytes_sent, report.hospital_bytes_sent);
    println!("chain head {} at height {}", report.head_hash, report.chain_height);
    Ok(())
}
