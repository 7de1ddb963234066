//! A patient shares a record with a doctor at another hospital, who finds
//! the grant on chain, requests the record and decrypts it.

use medshare::harness::{World, WorldSpec};
use medshare::record_exchange::ReshareGrant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut w = World::build(&WorldSpec { seed: 2, n_hospitals: 2, n_doctors: 3, ..WorldSpec::default() })?;
    let body = b"MRI: no acute findings".to_vec();
    let dep = w.consult(0, 0, body.clone(), "imaging", None)?;
    println!("record anchored in {} and stored at hospital #{}", dep.tx_id, dep.hospital);

    let now = w.tick();
    let grantee = 1;
    let (tag_pub, pk_enc) = (w.doctors[grantee].tag_pub(), w.doctors[grantee].pk_enc());
    let (_, grant_tx) = w.patients[0].grant_access(&tag_pub, &pk_enc, &dep.tx_id, now, &mut w.rng, &mut w.ledger)?;
    let grant = ReshareGrant::from_payload(&w.ledger.get_transaction(&grant_tx)?.payload)?;
    println!("grant broadcast: R={} ST={}", hex(&grant.r_point.to_bytes()), hex(&grant.tag.to_bytes()));

    let ledger = w.ledger.clone();
    println!("doctor 3 scans the chain and finds {} grant(s)", w.doctors[2].scan_grants(&ledger).len());
    let found = w.doctors[grantee].scan_grants(&ledger);
    let (_, pass) = found.first().ok_or("grant not found")?;
    println!("doctor 2 holds a pass for hospital {}", pass.hospital_id);

    let req = w.doctors[grantee].build_access_request(&w.params, pass, &mut w.rng)?;
    println!("access request: {} bytes", req.to_bytes().len());
    let ha = w.authority.public_key()?;
    let release = w.hospitals[dep.hospital].handle_access_request(&req, &ha, now)?;
    let recovered = w.doctors[grantee].recover(&req.w, &release, &w.ledger)?;
    println!("recovered: {}", String::from_utf8_lossy(&recovered));
    assert_eq!(recovered, body);
    Ok(())
}

fn hex(b: &[u8]) -> String {
    b.iter().take(8).map(|x| format!("{x:02x}")).collect::<String>() + "…"
}
