//! Exports the chain and a hospital audit log to disk, reads both back and
//! verifies them.

use std::fs::File;
use std::io::BufReader;

use medshare::harness::{World, WorldSpec};
use medshare::hospital_store::AuditLog;
use medshare::ledger::{Ledger, LedgerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("medshare-audit-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut w = World::build(&WorldSpec { seed: 5, n_doctors: 3, n_patients: 2, ..WorldSpec::default() })?;
    w.hospitals[0].attach_audit_file(&dir.join("audit.log"))?;
    for p in 0..2 {
        let dep = w.consult(0, p, format!("note {p}").into_bytes(), "note", None)?;
        for g in 1..3 {
            let (grant, _) = w.share(p, &dep.tx_id, g)?;
            w.retrieve(g, &grant)?;
        }
    }

    let chain_path = dir.join("chain.jsonl");
    w.ledger.export_chain(File::create(&chain_path)?)?;
    let imported =
        Ledger::import_chain(w.params.clone(), LedgerConfig::default(), BufReader::new(File::open(&chain_path)?))?;
    imported.verify_chain()?;
    println!("{}: {} blocks verified", chain_path.display(), imported.height());

    let events = AuditLog::read(BufReader::new(File::open(dir.join("audit.log"))?))?;
    for (at, who, x) in AuditLog::releases(&events) {
        let doctor = w.authority.trace_subject(&who).map(|e| e.id.to_string()).unwrap_or_default();
        println!("t={at} released X={}… to {doctor}", &x.to_hex()[..12]);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
