//! In-process, Ethereum-shaped ledger.
//!
//! A single sealing authority orders submitted transactions into hash-chained
//! blocks. Sealed transactions are kept as their canonical bytes so that
//! [`Ledger::verify_chain`] audits exactly what was stored.
//!
//! Canonical transaction encoding (big-endian integers):
//!
//! ```text
//! nonce u64 ‖ gas_price u64 ‖ gas_limit u64
//! ‖ recipient (0x00 | 0x01 ‖ address[20])
//! ‖ value u64 ‖ payload_len u32 ‖ payload ‖ sender_pub[33]
//! ‖ signature[64]
//! ```
//!
//! The signature covers every byte before it; the [`TxId`] is h2 over all of it.
//!
//! Block hash: h2 over `height u64 ‖ prev_hash[32] ‖ timestamp u64 ‖ n u32 ‖ tx_id[32] × n`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::thread;
use std::time::Duration;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{self, Digest, GroupPoint, KeyPair, Signature, SystemParams, POINT_LEN};
use crate::wire::{CodecError, Reader, Writer};
use crate::Timestamp;

pub const ADDRESS_LEN: usize = 20;

/// First byte of every payload this system writes to the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Anchor = 0x01,
    Grant = 0x02,
    Tombstone = 0x03,
}

impl PayloadKind {
    pub fn of(payload: &[u8]) -> Option<Self> {
        match payload.first()? {
            0x01 => Some(PayloadKind::Anchor),
            0x02 => Some(PayloadKind::Grant),
            0x03 => Some(PayloadKind::Tombstone),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("transaction signature does not verify")]
    BadSignature,
    #[error("nonce {got} already used (next expected {expected})")]
    NonceReplay { expected: u64, got: u64 },
    #[error("nonce {got} skips ahead of expected {expected}")]
    NonceGap { expected: u64, got: u64 },
    #[error("no sealed transaction with id {0}")]
    UnknownTx(TxId),
    #[error("payload is not a {0:?} record")]
    WrongPayload(PayloadKind),
    #[error("chain import failed at line {line}: {reason}")]
    Import { line: usize, reason: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::BadSignature => "E_TX_SIGNATURE",
            LedgerError::NonceReplay { .. } => "E_TX_NONCE_REPLAY",
            LedgerError::NonceGap { .. } => "E_TX_NONCE_GAP",
            LedgerError::UnknownTx(_) => "E_TX_UNKNOWN",
            LedgerError::WrongPayload(_) => "E_TX_PAYLOAD",
            LedgerError::Import { .. } => "E_CHAIN_IMPORT",
            LedgerError::Codec(_) => "E_CODEC",
        }
    }
}

macro_rules! hex_newtype_serde {
    ($ty:ident, $len:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.as_bytes()))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                let mut out = [0u8; $len];
                hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
                Ok(Self::from_array(out))
            }
        }
    };
}

/// Account address: leading 20 bytes of h2 over the compressed public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; ADDRESS_LEN]);

impl Address {
    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }

    fn from_array(a: [u8; ADDRESS_LEN]) -> Self {
        Address(a)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address(0x{})", hex::encode(self.0))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

hex_newtype_serde!(Address, ADDRESS_LEN);

/// Derives the account address for `pk`.
pub fn create_account(params: &SystemParams, pk: &GroupPoint) -> Address {
    let d = params.h2_hash(&pk.to_bytes());
    let mut out = [0u8; ADDRESS_LEN];
    out.copy_from_slice(&d.as_bytes()[..ADDRESS_LEN]);
    Address(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub Digest);

impl TxId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        self.0.as_bytes()
    }

    fn from_array(a: [u8; 32]) -> Self {
        TxId(Digest(a))
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({})", self.0.to_hex())
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex())
    }
}

hex_newtype_serde!(TxId, 32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Broadcast,
    Account(Address),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub nonce: u64,
    pub gas_price: u64,
    pub gas_limit: u64,
    pub recipient: Recipient,
    pub value: u64,
    pub payload: Vec<u8>,
    pub sender_pub: GroupPoint,
    pub signature: Signature,
}

impl Transaction {
    /// Builds and signs a transaction from `sender`.
    #[allow(clippy::too_many_arguments)]
    pub fn signed<R: RngCore + CryptoRng>(
        sender: &KeyPair,
        nonce: u64,
        gas_price: u64,
        gas_limit: u64,
        recipient: Recipient,
        payload: Vec<u8>,
        rng: &mut R,
    ) -> Self {
        let mut tx = Transaction {
            nonce,
            gas_price,
            gas_limit,
            recipient,
            value: 0,
            payload,
            sender_pub: sender.public,
            signature: Signature([0u8; 64]),
        };
        tx.signature = crypto::sign(&sender.secret, &tx.signing_bytes(), rng);
        tx
    }

    /// Canonical bytes of every field before the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.payload.len() + 128);
        w.u64(self.nonce).u64(self.gas_price).u64(self.gas_limit);
        match self.recipient {
            Recipient::Broadcast => {
                w.u8(0x00);
            }
            Recipient::Account(a) => {
                w.u8(0x01).raw(&a.0);
            }
        }
        w.u64(self.value).long_bytes(&self.payload).raw(&self.sender_pub.to_bytes());
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        out.extend_from_slice(self.signature.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let nonce = r.u64()?;
        let gas_price = r.u64()?;
        let gas_limit = r.u64()?;
        let recipient = match r.u8()? {
            0x00 => Recipient::Broadcast,
            0x01 => Recipient::Account(Address(r.array()?)),
            other => return Err(CodecError::UnknownTag(other)),
        };
        let value = r.u64()?;
        let payload = r.long_bytes()?.to_vec();
        let sender_pub =
            GroupPoint::from_bytes(r.take(POINT_LEN)?).map_err(|_| CodecError::Malformed { field: "sender_pub" })?;
        let signature = Signature(r.array()?);
        r.finish()?;
        Ok(Transaction { nonce, gas_price, gas_limit, recipient, value, payload, sender_pub, signature })
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(&self.sender_pub, &self.signing_bytes(), &self.signature)
    }

    pub fn sender(&self, params: &SystemParams) -> Address {
        create_account(params, &self.sender_pub)
    }

    pub fn tx_id(&self, params: &SystemParams) -> TxId {
        TxId(params.h2_hash(&self.to_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: Timestamp,
    pub tx_ids: Vec<TxId>,
    pub block_hash: Digest,
}

impl Block {
    pub fn header_bytes(height: u64, prev_hash: &Digest, timestamp: Timestamp, tx_ids: &[TxId]) -> Vec<u8> {
        let mut w = Writer::with_capacity(52 + 32 * tx_ids.len());
        w.u64(height).raw(prev_hash.as_bytes()).u64(timestamp).u32(tx_ids.len() as u32);
        for id in tx_ids {
            w.raw(id.as_bytes());
        }
        w.finish()
    }

    pub fn compute_hash(&self, params: &SystemParams) -> Digest {
        params.h2_hash(&Self::header_bytes(self.height, &self.prev_hash, self.timestamp, &self.tx_ids))
    }
}

/// A block together with the raw canonical bytes of its transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBlock {
    pub header: Block,
    pub txs: Vec<Vec<u8>>,
}

/// One line of the chain export file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ChainRecord {
    Block(Block),
    Tx {
        height: u64,
        index: u32,
        #[serde(with = "hex_bytes")]
        bytes: Vec<u8>,
    },
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    HeightMismatch,
    BrokenLink,
    BlockHashMismatch,
    TxCountMismatch,
    TxIdMismatch,
    UndecodableTx,
    BadTxSignature,
    NonceOutOfSequence,
}

/// Location of the first integrity failure found by [`Ledger::verify_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("chain fault {kind:?} in block {height}{}", tx_index.map(|i| format!(", tx {i}")).unwrap_or_default())]
pub struct ChainFault {
    pub height: u64,
    pub tx_index: Option<usize>,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub gas_price: u64,
    pub gas_limit: u64,
    /// Simulated confirmation delay applied on every seal.
    pub seal_latency_ms: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig { gas_price: 1, gas_limit: 3_000_000, seal_latency_ms: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    params: SystemParams,
    config: LedgerConfig,
    accounts: HashMap<Address, GroupPoint>,
    next_nonce: HashMap<Address, u64>,
    pending: Vec<(TxId, Vec<u8>)>,
    blocks: Vec<SealedBlock>,
    index: HashMap<TxId, (usize, usize)>,
    revoked: HashSet<TxId>,
}

impl Ledger {
    pub fn new(params: SystemParams, config: LedgerConfig) -> Self {
        Ledger {
            params,
            config,
            accounts: HashMap::new(),
            next_nonce: HashMap::new(),
            pending: Vec::new(),
            blocks: Vec::new(),
            index: HashMap::new(),
            revoked: HashSet::new(),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    /// Registers the account for `pk`; idempotent.
    pub fn create_account(&mut self, pk: &GroupPoint) -> Address {
        let addr = create_account(&self.params, pk);
        self.accounts.entry(addr).or_insert(*pk);
        addr
    }

    pub fn has_account(&self, addr: &Address) -> bool {
        self.accounts.contains_key(addr)
    }

    /// Nonce the next transaction from `addr` must carry (pending txs included).
    pub fn next_nonce(&self, addr: &Address) -> u64 {
        self.next_nonce.get(addr).copied().unwrap_or(0)
    }

    /// Signs a broadcast-or-direct transaction from `sender` with the next
    /// nonce and the configured gas fields. Does not submit it.
    pub fn prepare<R: RngCore + CryptoRng>(
        &self,
        sender: &KeyPair,
        recipient: Recipient,
        payload: Vec<u8>,
        rng: &mut R,
    ) -> Transaction {
        let nonce = self.next_nonce(&create_account(&self.params, &sender.public));
        Transaction::signed(sender, nonce, self.config.gas_price, self.config.gas_limit, recipient, payload, rng)
    }

    pub fn submit_transaction(&mut self, tx: &Transaction) -> Result<TxId, LedgerError> {
        if !tx.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let sender = tx.sender(&self.params);
        let expected = self.next_nonce(&sender);
        if tx.nonce < expected {
            return Err(LedgerError::NonceReplay { expected, got: tx.nonce });
        }
        if tx.nonce > expected {
            return Err(LedgerError::NonceGap { expected, got: tx.nonce });
        }
        let bytes = tx.to_bytes();
        let id = TxId(self.params.h2_hash(&bytes));
        self.accounts.entry(sender).or_insert(tx.sender_pub);
        self.next_nonce.insert(sender, expected + 1);
        self.pending.push((id, bytes));
        Ok(id)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Orders all pending transactions (arrival order) into a new block.
    pub fn seal_block(&mut self, now: Timestamp) -> Block {
        if self.config.seal_latency_ms > 0 {
            thread::sleep(Duration::from_millis(self.config.seal_latency_ms));
        }
        let height = self.blocks.len() as u64;
        let prev_hash = self.blocks.last().map(|b| b.header.block_hash).unwrap_or(Digest([0u8; 32]));
        let (tx_ids, txs): (Vec<TxId>, Vec<Vec<u8>>) = std::mem::take(&mut self.pending).into_iter().unzip();
        let block_hash = self.params.h2_hash(&Block::header_bytes(height, &prev_hash, now, &tx_ids));
        let header = Block { height, prev_hash, timestamp: now, tx_ids, block_hash };
        let slot = self.blocks.len();
        for (i, id) in header.tx_ids.iter().enumerate() {
            self.index.insert(*id, (slot, i));
        }
        self.note_tombstones(slot_txs(&txs));
        self.blocks.push(SealedBlock { header: header.clone(), txs });
        header
    }

    pub fn height(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().map(|b| &b.header)
    }

    pub fn is_sealed(&self, id: &TxId) -> bool {
        self.index.contains_key(id)
    }

    pub fn get_transaction(&self, id: &TxId) -> Result<Transaction, LedgerError> {
        let bytes = self.get_transaction_bytes(id)?;
        Ok(Transaction::from_bytes(bytes)?)
    }

    pub fn get_transaction_bytes(&self, id: &TxId) -> Result<&[u8], LedgerError> {
        let &(b, i) = self.index.get(id).ok_or(LedgerError::UnknownTx(*id))?;
        Ok(&self.blocks[b].txs[i])
    }

    /// Every sealed transaction in chain order. Undecodable entries are skipped.
    pub fn transactions(&self) -> impl Iterator<Item = (TxId, Transaction)> + '_ {
        self.blocks.iter().flat_map(|b| {
            b.header
                .tx_ids
                .iter()
                .zip(&b.txs)
                .filter_map(|(id, bytes)| Transaction::from_bytes(bytes).ok().map(|tx| (*id, tx)))
        })
    }

    /// Sealed transactions whose payload starts with `kind`'s tag.
    pub fn payloads_of_kind(&self, kind: PayloadKind) -> impl Iterator<Item = (TxId, Transaction)> + '_ {
        self.transactions().filter(move |(_, tx)| PayloadKind::of(&tx.payload) == Some(kind))
    }

    /// Anchors referenced by sealed tombstone transactions.
    pub fn tombstoned(&self) -> &HashSet<TxId> {
        &self.revoked
    }

    pub fn is_revoked(&self, anchor: &TxId) -> bool {
        self.revoked.contains(anchor)
    }

    fn note_tombstones<'a>(&mut self, txs: impl Iterator<Item = &'a [u8]>) {
        for bytes in txs {
            if let Ok(tx) = Transaction::from_bytes(bytes) {
                if let Ok(anchor) = parse_tombstone(&tx.payload) {
                    self.revoked.insert(anchor);
                }
            }
        }
    }

    /// Recomputes every link, block hash, tx id, and signature, and checks
    /// per-sender nonces run 0, 1, 2, ... without gaps.
    pub fn verify_chain(&self) -> Result<(), ChainFault> {
        let mut prev = Digest([0u8; 32]);
        let mut nonces: HashMap<Address, u64> = HashMap::new();
        for (slot, block) in self.blocks.iter().enumerate() {
            let h = &block.header;
            let fault = |kind, tx_index| ChainFault { height: h.height, tx_index, kind };
            if h.height != slot as u64 {
                return Err(fault(FaultKind::HeightMismatch, None));
            }
            if h.prev_hash != prev {
                return Err(fault(FaultKind::BrokenLink, None));
            }
            if h.compute_hash(&self.params) != h.block_hash {
                return Err(fault(FaultKind::BlockHashMismatch, None));
            }
            if h.tx_ids.len() != block.txs.len() {
                return Err(fault(FaultKind::TxCountMismatch, None));
            }
            for (i, (id, bytes)) in h.tx_ids.iter().zip(&block.txs).enumerate() {
                if self.params.h2_hash(bytes) != id.0 {
                    return Err(fault(FaultKind::TxIdMismatch, Some(i)));
                }
                let tx = Transaction::from_bytes(bytes).map_err(|_| fault(FaultKind::UndecodableTx, Some(i)))?;
                if !tx.verify_signature() {
                    return Err(fault(FaultKind::BadTxSignature, Some(i)));
                }
                let expected = nonces.entry(tx.sender(&self.params)).or_insert(0);
                if tx.nonce != *expected {
                    return Err(fault(FaultKind::NonceOutOfSequence, Some(i)));
                }
                *expected += 1;
            }
            prev = h.block_hash;
        }
        Ok(())
    }

    /// Sealed chain as export records: each block header followed by its txs.
    pub fn records(&self) -> Vec<ChainRecord> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(ChainRecord::Block(b.header.clone()));
            for (i, bytes) in b.txs.iter().enumerate() {
                out.push(ChainRecord::Tx { height: b.header.height, index: i as u32, bytes: bytes.clone() });
            }
        }
        out
    }

    /// Rebuilds a ledger from export records without verifying it; run
    /// [`Ledger::verify_chain`] afterwards to audit the imported data.
    pub fn from_records(
        params: SystemParams,
        config: LedgerConfig,
        records: Vec<ChainRecord>,
    ) -> Result<Self, LedgerError> {
        let mut ledger = Ledger::new(params, config);
        for (line, rec) in records.into_iter().enumerate() {
            match rec {
                ChainRecord::Block(header) => {
                    ledger.blocks.push(SealedBlock { header, txs: Vec::new() });
                }
                ChainRecord::Tx { bytes, .. } => {
                    let Some(block) = ledger.blocks.last_mut() else {
                        return Err(LedgerError::Import { line: line + 1, reason: "tx before any block".into() });
                    };
                    block.txs.push(bytes);
                }
            }
        }
        for (slot, block) in ledger.blocks.iter().enumerate() {
            for (i, id) in block.header.tx_ids.iter().enumerate().take(block.txs.len()) {
                ledger.index.insert(*id, (slot, i));
            }
        }
        let all: Vec<Vec<u8>> = ledger.blocks.iter().flat_map(|b| b.txs.iter().cloned()).collect();
        ledger.note_tombstones(slot_txs(&all));
        for block in &ledger.blocks {
            for bytes in &block.txs {
                if let Ok(tx) = Transaction::from_bytes(bytes) {
                    let sender = tx.sender(&ledger.params);
                    ledger.accounts.entry(sender).or_insert(tx.sender_pub);
                    let next = ledger.next_nonce.entry(sender).or_insert(0);
                    *next = (*next).max(tx.nonce + 1);
                }
            }
        }
        Ok(ledger)
    }

    /// Writes the sealed chain as JSON lines.
    pub fn export_chain<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn import_chain<R: BufRead>(params: SystemParams, config: LedgerConfig, input: R) -> Result<Self, LedgerError> {
        let mut records = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| LedgerError::Import { line: n + 1, reason: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec =
                serde_json::from_str(&line).map_err(|e| LedgerError::Import { line: n + 1, reason: e.to_string() })?;
            records.push(rec);
        }
        Self::from_records(params, config, records)
    }
}

fn slot_txs(txs: &[Vec<u8>]) -> impl Iterator<Item = &[u8]> {
    txs.iter().map(Vec::as_slice)
}

/// Tombstone payload: `0x03 ‖ anchor tx id[32]`. The anchor itself stays on chain.
pub fn tombstone_payload(anchor: &TxId) -> Vec<u8> {
    let mut w = Writer::with_capacity(33);
    w.u8(PayloadKind::Tombstone as u8).raw(anchor.as_bytes());
    w.finish()
}

pub fn parse_tombstone(payload: &[u8]) -> Result<TxId, LedgerError> {
    let mut r = Reader::new(payload);
    if r.u8()? != PayloadKind::Tombstone as u8 {
        return Err(LedgerError::WrongPayload(PayloadKind::Tombstone));
    }
    let id = TxId(Digest(r.array()?));
    r.finish()?;
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, setup_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (Ledger, ChaCha20Rng) {
        let params = setup_params("secp256k1").unwrap();
        (Ledger::new(params, LedgerConfig::default()), ChaCha20Rng::seed_from_u64(7))
    }

    #[test]
    fn addresses_are_deterministic_and_distinct() {
        let (mut ledger, mut rng) = setup();
        let a = keygen(ledger.params(), &mut rng);
        let b = keygen(ledger.params(), &mut rng);
        let addr = ledger.create_account(&a.public);
        assert_eq!(addr, ledger.create_account(&a.public));
        assert_ne!(addr, ledger.create_account(&b.public));
        assert_eq!(addr.as_bytes().len(), 20);
        let d = ledger.params().h2_hash(&a.public.to_bytes());
        assert_eq!(&addr.0[..], &d.as_bytes()[..20]);
    }

    #[test]
    fn sampled_addresses_do_not_collide() {
        let (ledger, mut rng) = setup();
        let addrs: std::collections::HashSet<Address> =
            (0..500).map(|_| create_account(ledger.params(), &keygen(ledger.params(), &mut rng).public)).collect();
        assert_eq!(addrs.len(), 500);
    }

    #[test]
    fn submit_seal_and_fetch() {
        let (mut ledger, mut rng) = setup();
        let kp = keygen(ledger.params(), &mut rng);
        let tx = ledger.prepare(&kp, Recipient::Broadcast, b"\x01anchor".to_vec(), &mut rng);
        let id = ledger.submit_transaction(&tx).unwrap();
        assert_eq!(id, tx.tx_id(ledger.params()));
        assert_eq!(ledger.get_transaction(&id), Err(LedgerError::UnknownTx(id)));
        ledger.seal_block(1_000);
        assert_eq!(ledger.get_transaction(&id).unwrap(), tx);
        assert_eq!(ledger.get_transaction_bytes(&id).unwrap(), tx.to_bytes().as_slice());
        let missing = TxId(Digest([0xab; 32]));
        assert_eq!(ledger.get_transaction(&missing).unwrap_err().code(), "E_TX_UNKNOWN");
    }

    #[test]
    fn replay_gap_and_bad_signature_are_rejected() {
        let (mut ledger, mut rng) = setup();
        let kp = keygen(ledger.params(), &mut rng);
        let tx = ledger.prepare(&kp, Recipient::Broadcast, vec![1, 2, 3], &mut rng);
        ledger.submit_transaction(&tx).unwrap();
        assert_eq!(ledger.submit_transaction(&tx), Err(LedgerError::NonceReplay { expected: 1, got: 0 }));
        let ahead = Transaction::signed(&kp, 5, 1, 1, Recipient::Broadcast, vec![], &mut rng);
        assert_eq!(ledger.submit_transaction(&ahead), Err(LedgerError::NonceGap { expected: 1, got: 5 }));

        let mut tampered = ledger.prepare(&kp, Recipient::Broadcast, vec![9; 8], &mut rng);
        tampered.payload[0] ^= 1;
        let err = ledger.submit_transaction(&tampered).unwrap_err();
        assert_eq!(err, LedgerError::BadSignature);
        assert_ne!(err.code(), LedgerError::NonceReplay { expected: 0, got: 0 }.code());
    }

    #[test]
    fn empty_and_ordered_blocks() {
        let (mut ledger, mut rng) = setup();
        let b0 = ledger.seal_block(10);
        assert_eq!((b0.height, b0.tx_ids.len()), (0, 0));
        assert_eq!(b0.prev_hash, Digest([0; 32]));

        let senders: Vec<_> = (0..3).map(|_| keygen(ledger.params(), &mut rng)).collect();
        let ids: Vec<TxId> = senders
            .iter()
            .map(|kp| {
                let tx = ledger.prepare(kp, Recipient::Broadcast, vec![7], &mut rng);
                ledger.submit_transaction(&tx).unwrap()
            })
            .collect();
        let b1 = ledger.seal_block(20);
        assert_eq!(b1.height, 1);
        assert_eq!(b1.tx_ids, ids);
        assert_eq!(b1.prev_hash, b0.block_hash);
        assert_eq!(b1.compute_hash(ledger.params()), b1.block_hash);
        assert_eq!(ledger.height(), 2);
    }

    #[test]
    fn tamper_and_reorder_are_detected() {
        let (mut ledger, mut rng) = setup();
        let kp = keygen(ledger.params(), &mut rng);
        for t in 0..3 {
            let tx = ledger.prepare(&kp, Recipient::Broadcast, vec![t; 40], &mut rng);
            ledger.submit_transaction(&tx).unwrap();
            ledger.seal_block(100 + t as u64);
        }
        ledger.verify_chain().unwrap();
        let params = ledger.params().clone();

        let mut recs = ledger.records();
        if let ChainRecord::Tx { bytes, .. } = &mut recs[3] {
            bytes[40] ^= 0x20;
        }
        let bad = Ledger::from_records(params.clone(), LedgerConfig::default(), recs).unwrap();
        let fault = bad.verify_chain().unwrap_err();
        assert_eq!((fault.height, fault.kind), (1, FaultKind::TxIdMismatch));

        let mut recs = ledger.records();
        recs.swap(0, 2);
        recs.swap(1, 3);
        let swapped = Ledger::from_records(params, LedgerConfig::default(), recs).unwrap();
        assert!(swapped.verify_chain().is_err());
    }

    #[test]
    fn export_import_roundtrip() {
        let (mut ledger, mut rng) = setup();
        let kp = keygen(ledger.params(), &mut rng);
        let tx = ledger.prepare(&kp, Recipient::Broadcast, b"payload".to_vec(), &mut rng);
        let id = ledger.submit_transaction(&tx).unwrap();
        ledger.seal_block(5);
        let mut buf = Vec::new();
        ledger.export_chain(&mut buf).unwrap();
        let back = Ledger::import_chain(ledger.params().clone(), LedgerConfig::default(), &buf[..]).unwrap();
        back.verify_chain().unwrap();
        assert_eq!(back.get_transaction(&id).unwrap(), tx);
        assert_eq!(back.next_nonce(&tx.sender(back.params())), 1);
        assert_eq!(back.records(), ledger.records());
    }

    #[test]
    fn tombstone_payload_roundtrip() {
        let id = TxId(Digest([3; 32]));
        let p = tombstone_payload(&id);
        assert_eq!(p.len(), 33);
        assert_eq!(parse_tombstone(&p).unwrap(), id);
        assert!(parse_tombstone(&[0x01; 33]).is_err());
    }
}
