//! Modified ciphertexts fail the anchored digest check; modified chain
//! bytes fail the chain audit.

use medshare::harness::{World, WorldSpec};
use medshare::ledger::{ChainRecord, Ledger, LedgerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut w = World::build(&WorldSpec { seed: 3, ..WorldSpec::default() })?;
    let dep = w.consult(0, 0, b"allergy: penicillin".to_vec(), "allergy", None)?;
    let (grant, _) = w.share(0, &dep.tx_id, 1)?;
    let pass = w.accept(1, &grant)?;
    let (x, _, release) = w.request(1, &pass)?;

    let mut forged = release.clone();
    forged.chr.bytes_mut()[30] ^= 0xff;
    match w.recover(1, &x, &forged) {
        Err(e) => println!("tampered ciphertext rejected: {e}"),
        Ok(_) => unreachable!("a modified ciphertext must not recover"),
    }
    println!("genuine release: {}", String::from_utf8_lossy(&w.recover(1, &x, &release)?));

    let mut records = w.ledger.records();
    for rec in &mut records {
        if let ChainRecord::Tx { bytes, .. } = rec {
            bytes[60] ^= 1;
            break;
        }
    }
    let copy = Ledger::from_records(w.params.clone(), LedgerConfig::default(), records)?;
    match copy.verify_chain() {
        Err(fault) => println!("chain audit: {fault}"),
        Ok(()) => unreachable!("edited chain must not verify"),
    }
    Ok(())
}
