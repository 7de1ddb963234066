//! A doctor encrypts a record and anchors its digest on the ledger; the
//! patient masks the anchor id and key for the hospital store.

use medshare::harness::{World, WorldSpec};
use medshare::ledger::PayloadKind;
use medshare::record_exchange::{AnchorRecord, HealthRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut w = World::build(&WorldSpec { seed: 1, ..WorldSpec::default() })?;
    let created_at = w.tick();
    let record = HealthRecord {
        patient_ref: w.patients[0].identity().id.clone(),
        body: b"Blood pressure 128/82, follow up in 3 months".to_vec(),
        created_at,
        record_type: "vitals".into(),
    };
    let anchored = w.doctors[0].create_and_anchor_record(&w.authority, &record, &mut w.rng, &mut w.ledger)?;
    println!("anchor tx {}", anchored.tx_id);

    let tx = w.ledger.get_transaction(&anchored.tx_id)?;
    let anchor = AnchorRecord::from_payload(&tx.payload)?;
    println!("on chain: T1={} Ty1={} eh1={}", anchor.created_at, anchor.record_type, anchor.digest.to_hex());
    assert_eq!(PayloadKind::of(&tx.payload), Some(PayloadKind::Anchor));

    let hospital_id = w.hospitals[0].hospital_id();
    let (entry, _) = w.patients[0].derive_masked_entry(
        &w.params,
        &hospital_id,
        created_at,
        &anchored.tx_id,
        &anchored.key,
        &mut w.rng,
    )?;
    println!("masked entry: X={} ({} bytes)", entry.x_index.to_hex(), entry.to_bytes().len());
    w.hospitals[0].store_record(entry, anchored.encrypted.ciphertext, created_at, None)?;
    println!("hospital {} now stores {} record(s)", hospital_id, w.hospitals[0].len());
    w.ledger.verify_chain()?;
    Ok(())
}
