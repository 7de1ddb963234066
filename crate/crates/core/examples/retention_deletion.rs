//! Retention expiry erases the ciphertext at the hospital and tombstones
//! the anchor; the anchor itself stays on chain.

use medshare::harness::{World, WorldSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut w = World::build(&WorldSpec { seed: 4, ..WorldSpec::default() })?;
    let dep = w.consult(0, 0, b"temporary lab result".to_vec(), "lab", Some(3600))?;
    let (grant, _) = w.share(0, &dep.tx_id, 1)?;
    let pass = w.accept(1, &grant)?;

    let now = w.advance(3600);
    let deleted = w.hospitals[0].delete_expired(now, &mut w.ledger, &mut w.rng)?;
    println!("deleted {deleted} expired record(s)");
    println!("anchor still on chain: {}", w.ledger.get_transaction(&dep.tx_id).is_ok());
    println!("anchor revoked: {}", w.ledger.is_revoked(&dep.tx_id));
    match w.request(1, &pass) {
        Err(e) => println!("request after expiry: {e}"),
        Ok(_) => unreachable!("expired records are not released"),
    }
    w.ledger.verify_chain()?;
    Ok(())
}
