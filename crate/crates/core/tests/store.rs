mod common;

use common::contains;
use medshare::crypto::{sign, Digest};
use medshare::harness::{Deposit, World, WorldSpec, EPOCH};
use medshare::hospital_store::{AuditLog, AuditOutcome, HospitalStore};
use medshare::record_exchange::AccessRequest;

fn setup() -> (World, Deposit, AccessRequest) {
    let mut w = World::build(&WorldSpec { seed: 21, n_doctors: 3, ..WorldSpec::default() }).unwrap();
    let dep = w.consult(0, 0, b"radiology report".to_vec(), "imaging", None).unwrap();
    let (grant, _) = w.share(0, &dep.tx_id, 1).unwrap();
    let pass = w.accept(1, &grant).unwrap();
    let req = w.doctors[1].build_access_request(&w.params, &pass, &mut w.rng).unwrap();
    (w, dep, req)
}

fn denial(w: &World, req: &AccessRequest, now: u64) -> String {
    let ha = w.authority.public_key().unwrap();
    w.hospitals[0].handle_access_request(req, &ha, now).unwrap_err().code().to_owned()
}

#[test]
fn release_gate_rejects_each_mutation() {
    let (mut w, _, req) = setup();
    let now = w.tick();
    let ha = w.authority.public_key().unwrap();
    assert!(w.hospitals[0].handle_access_request(&req, &ha, now).is_ok());

    let mut bad = req.clone();
    bad.cert.signature.0[5] ^= 1;
    assert_eq!(denial(&w, &bad, now), "E_BAD_CERTIFICATE");

    let mut bad = req.clone();
    bad.cert.validity.not_after += 1;
    assert_eq!(denial(&w, &bad, now), "E_BAD_CERTIFICATE");

    assert_eq!(denial(&w, &req, EPOCH - 1), "E_BAD_CERTIFICATE");
    assert_eq!(denial(&w, &req, req.cert.validity.not_after), "E_BAD_CERTIFICATE");

    let mut bad = req.clone();
    bad.signature.0[40] ^= 1;
    assert_eq!(denial(&w, &bad, now), "E_BAD_SIGNATURE");

    let mut borrowed = req.clone();
    borrowed.cert = w.doctors[2].certificate().unwrap().clone();
    assert_eq!(denial(&w, &borrowed, now), "E_BAD_SIGNATURE");

    let mut bad = req.clone();
    bad.w = Digest([0x42; 32]);
    bad.signature = sign(&w.doctors[1].identity().enc_keypair.secret, bad.w.as_bytes(), &mut w.rng);
    assert_eq!(denial(&w, &bad, now), "E_UNKNOWN_INDEX");

    let events = w.hospitals[0].audit_events();
    assert_eq!(events.len(), 8);
    assert_eq!(AuditLog::releases(&events).len(), 1);
    assert!(events[1..].iter().all(|e| matches!(e.outcome, AuditOutcome::Denied { .. })));
}

#[test]
fn store_holds_no_record_secrets() {
    let (w, dep, _) = setup();
    let dir = tempfile::tempdir().unwrap();
    w.hospitals[0].save(dir.path()).unwrap();
    let tx = w.ledger.get_transaction_bytes(&dep.tx_id).unwrap();
    let mut blobs = Vec::new();
    for entry in std::fs::read_dir(dir.path().join("entries")).unwrap() {
        blobs.extend(std::fs::read(entry.unwrap().path()).unwrap());
    }
    assert!(!blobs.is_empty());
    assert!(!contains(&blobs, dep.tx_id.as_bytes()));
    assert!(!contains(&blobs, &tx[..40]));
    let patient = w.patients[0].identity();
    assert!(!contains(&blobs, patient.address.as_bytes()));
    assert!(!contains(&blobs, patient.id.to_string().as_bytes()));
}

#[test]
fn duplicate_index_is_refused() {
    let (mut w, dep, _) = setup();
    let entry = w.hospitals[0].get(&dep.x_index).unwrap().clone();
    let chr = entry.chr.clone().unwrap();
    let now = w.now();
    let err = w.hospitals[0].store_record(entry.entry, chr, now, None).unwrap_err();
    assert_eq!(err.code(), "E_DUPLICATE_INDEX");
}

#[test]
fn save_load_and_audit_replay() {
    let (mut w, dep, req) = setup();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("live.log");
    w.hospitals[0].attach_audit_file(&log).unwrap();
    let ha = w.authority.public_key().unwrap();
    let now = w.tick();
    w.hospitals[0].handle_access_request(&req, &ha, now).unwrap();
    let mut bad = req.clone();
    bad.signature.0[0] ^= 1;
    assert!(w.hospitals[0].handle_access_request(&bad, &ha, now).is_err());

    let replayed = AuditLog::read(std::io::BufReader::new(std::fs::File::open(&log).unwrap())).unwrap();
    assert_eq!(replayed, w.hospitals[0].audit_events());
    assert_eq!(AuditLog::releases(&replayed), vec![(now, req.cert.subject, dep.x_index)]);

    let saved = dir.path().join("store");
    w.hospitals[0].save(&saved).unwrap();
    let hospital = w.hospitals[0].hospital().clone();
    let loaded = HospitalStore::load(&saved, w.params.clone(), hospital).unwrap();
    assert_eq!(loaded.len(), 1);
    assert_eq!(loaded.get(&dep.x_index), w.hospitals[0].get(&dep.x_index));
    assert_eq!(loaded.audit_events(), w.hospitals[0].audit_events());
    assert!(loaded.handle_access_request(&req, &ha, now).is_ok());
}

#[test]
fn audit_log_rejects_gaps_and_garbage() {
    let (mut w, _, req) = setup();
    let ha = w.authority.public_key().unwrap();
    for _ in 0..3 {
        let now = w.tick();
        w.hospitals[0].handle_access_request(&req, &ha, now).unwrap();
    }
    let lines: Vec<String> = w.hospitals[0].audit_events().iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    let gap = format!("{}\n{}\n", lines[0], lines[2]);
    assert_eq!(AuditLog::read(gap.as_bytes()).unwrap_err().code(), "E_AUDIT_LOG");
    assert_eq!(AuditLog::read(&b"oops\n"[..]).unwrap_err().code(), "E_AUDIT_LOG");
}

#[test]
fn expiry_erases_ciphertext_and_tombstones_once() {
    let mut w = World::build(&WorldSpec { seed: 2, ..WorldSpec::default() }).unwrap();
    let keep = w.consult(0, 0, vec![1; 40], "x", None).unwrap();
    let gone = w.consult(0, 0, vec![2; 40], "x", Some(10)).unwrap();
    let now = w.now();
    assert_eq!(w.hospitals[0].delete_expired(now, &mut w.ledger, &mut w.rng).unwrap(), 0);

    let later = w.advance(11);
    assert_eq!(w.hospitals[0].delete_expired(later, &mut w.ledger, &mut w.rng).unwrap(), 1);
    let entry = w.hospitals[0].get(&gone.x_index).unwrap();
    assert!(entry.deleted && entry.chr.is_none());
    assert!(w.hospitals[0].get(&keep.x_index).unwrap().chr.is_some());
    assert!(w.ledger.is_revoked(&gone.tx_id));
    assert!(!w.ledger.is_revoked(&keep.tx_id));
    assert!(w.ledger.get_transaction(&gone.tx_id).is_ok());

    let height = w.ledger.height();
    assert_eq!(w.hospitals[0].delete_expired(later + 5, &mut w.ledger, &mut w.rng).unwrap(), 0);
    assert_eq!(w.ledger.height(), height);
    assert!(w.hospitals[0].audit_events().iter().any(|e| e.outcome == AuditOutcome::Deleted));
}
