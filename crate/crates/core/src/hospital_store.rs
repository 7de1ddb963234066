//! Hospital server: encrypted records keyed by the masked index `X`, the
//! certificate-and-signature release gate, retention sweeps, and the audit log.
//!
//! Persistence layout (see [`HospitalStore::save`]):
//!
//! ```text
//! <dir>/entries/<hex X>.rec   one file per entry
//! <dir>/audit.log             JSON lines, one per access decision
//! ```
//!
//! Entry file: `X[32] ‖ Z[32] ‖ K[16] ‖ eh₁[32] ‖ stored_at u64 ‖ has_expiry u8
//! ‖ expires_at u64 ‖ deleted u8 ‖ chr (u32 len ‖ bytes)`. A deleted entry
//! has an empty `chr`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Ciphertext, Digest, GroupPoint, SystemParams, SYM_KEY_LEN};
use crate::ledger::{tombstone_payload, Ledger, LedgerError, PayloadKind, Recipient, TxId};
use crate::record_exchange::{AccessRequest, AnchorRecord, MaskedIndexEntry};
use crate::registry::{verify_certificate, CertificateStatus, ParticipantIdentity};
use crate::wire::{CodecError, Reader, Writer};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("index {0} is already stored")]
    DuplicateIndex(Digest),
    #[error("certificate rejected: {0:?}")]
    BadCertificate(CertificateStatus),
    #[error("request signature does not verify under the certified key")]
    BadSignature,
    #[error("no record under index {0}")]
    UnknownIndex(Digest),
    #[error("record under index {0} is deleted or past its retention")]
    Unavailable(Digest),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed audit log line {line}: {reason}")]
    AuditLog { line: usize, reason: String },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::DuplicateIndex(_) => "E_DUPLICATE_INDEX",
            StoreError::BadCertificate(_) => "E_BAD_CERTIFICATE",
            StoreError::BadSignature => "E_BAD_SIGNATURE",
            StoreError::UnknownIndex(_) => "E_UNKNOWN_INDEX",
            StoreError::Unavailable(_) => "E_UNAVAILABLE",
            StoreError::Ledger(e) => e.code(),
            StoreError::Codec(_) => "E_CODEC",
            StoreError::Io(_) => "E_IO",
            StoreError::AuditLog { .. } => "E_AUDIT_LOG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredEntry {
    pub entry: MaskedIndexEntry,
    /// `None` once erased by a retention sweep.
    pub chr: Option<Ciphertext>,
    /// `eh₁` of the stored ciphertext, kept to locate the anchor for tombstoning.
    pub anchor_digest: Digest,
    pub stored_at: Timestamp,
    pub expires_at: Option<Timestamp>,
    pub deleted: bool,
}

impl StoredEntry {
    pub fn x_index(&self) -> &Digest {
        &self.entry.x_index
    }

    fn available_at(&self, now: Timestamp) -> bool {
        !self.deleted && self.chr.is_some() && self.expires_at.is_none_or(|t| now < t)
    }

    fn to_bytes(&self) -> Vec<u8> {
        let chr = self.chr.as_ref().map(|c| c.as_bytes()).unwrap_or(&[]);
        let mut w = Writer::with_capacity(150 + chr.len());
        w.raw(&self.entry.to_bytes())
            .raw(self.anchor_digest.as_bytes())
            .u64(self.stored_at)
            .u8(self.expires_at.is_some() as u8)
            .u64(self.expires_at.unwrap_or(0))
            .u8(self.deleted as u8)
            .long_bytes(chr);
        w.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader::new(bytes);
        let entry = MaskedIndexEntry::from_bytes(r.take(crate::record_exchange::MASKED_ENTRY_LEN)?)?;
        let anchor_digest = Digest(r.array()?);
        let stored_at = r.u64()?;
        let has_expiry = r.u8()? != 0;
        let expires_at = r.u64()?;
        let deleted = r.u8()? != 0;
        let chr = r.long_bytes()?;
        r.finish()?;
        let chr = if chr.is_empty() {
            None
        } else {
            Some(Ciphertext::from_bytes(chr.to_vec()).map_err(|_| CodecError::Malformed { field: "chr" })?)
        };
        Ok(StoredEntry { entry, chr, anchor_digest, stored_at, expires_at: has_expiry.then_some(expires_at), deleted })
    }
}

/// The triple sent back to an authorized requester: `(Z, K, CHR)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub z_masked: [u8; 32],
    pub k_masked: [u8; SYM_KEY_LEN],
    pub chr: Ciphertext,
}

impl Release {
    /// `Z[32] ‖ K[16] ‖ chr (u32 len ‖ bytes)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(52 + self.chr.len());
        w.raw(&self.z_masked).raw(&self.k_masked).long_bytes(self.chr.as_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader::new(bytes);
        let z_masked = r.array()?;
        let k_masked = r.array()?;
        let chr =
            Ciphertext::from_bytes(r.long_bytes()?.to_vec()).map_err(|_| CodecError::Malformed { field: "chr" })?;
        r.finish()?;
        Ok(Release { z_masked, k_masked, chr })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Released,
    Denied { code: String },
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub at: Timestamp,
    /// Certificate subject pseudonym of the requester; absent for sweeps.
    pub requester: Option<Digest>,
    pub x_index: Digest,
    pub outcome: AuditOutcome,
}

/// Append-only audit trail, optionally mirrored to a file as events happen.
#[derive(Debug, Default)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
    sink: Option<File>,
}

impl AuditLog {
    fn append(&mut self, at: Timestamp, requester: Option<Digest>, x_index: Digest, outcome: AuditOutcome) {
        let event = AuditEvent { seq: self.events.len() as u64, at, requester, x_index, outcome };
        if let Some(f) = self.sink.as_mut() {
            // An unwritable sink must not block releases; the in-memory log stays authoritative.
            let mut line = serde_json::to_vec(&event).expect("audit events serialize");
            line.push(b'\n');
            let _ = f.write_all(&line);
        }
        self.events.push(event);
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    /// Reads a log file back into events.
    pub fn read<R: BufRead>(input: R) -> Result<Vec<AuditEvent>, StoreError> {
        let mut out = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: AuditEvent =
                serde_json::from_str(&line).map_err(|e| StoreError::AuditLog { line: n + 1, reason: e.to_string() })?;
            if event.seq != out.len() as u64 {
                return Err(StoreError::AuditLog { line: n + 1, reason: "sequence gap".into() });
            }
            out.push(event);
        }
        Ok(out)
    }

    /// Releases in order, reconstructed from events alone.
    pub fn releases(events: &[AuditEvent]) -> Vec<(Timestamp, Digest, Digest)> {
        events
            .iter()
            .filter(|e| e.outcome == AuditOutcome::Released)
            .filter_map(|e| e.requester.map(|r| (e.at, r, e.x_index)))
            .collect()
    }
}

#[derive(Debug)]
pub struct HospitalStore {
    hospital: ParticipantIdentity,
    params: SystemParams,
    entries: HashMap<Digest, StoredEntry>,
    audit: Mutex<AuditLog>,
}

impl HospitalStore {
    pub fn new(params: SystemParams, hospital: ParticipantIdentity) -> Self {
        HospitalStore { hospital, params, entries: HashMap::new(), audit: Mutex::new(AuditLog::default()) }
    }

    pub fn hospital(&self) -> &ParticipantIdentity {
        &self.hospital
    }

    pub fn hospital_id(&self) -> String {
        self.hospital.id.to_string()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x_index: &Digest) -> Option<&StoredEntry> {
        self.entries.get(x_index)
    }

    /// Mirrors every subsequent audit event to `path` (appending).
    pub fn attach_audit_file(&self, path: &Path) -> Result<(), StoreError> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        self.audit.lock().expect("audit lock").sink = Some(f);
        Ok(())
    }

    pub fn audit_events(&self) -> Vec<AuditEvent> {
        self.audit.lock().expect("audit lock").events.clone()
    }

    /// Stores `(entry, chr)` under `X`. `retention` is in seconds from `now`.
    pub fn store_record(
        &mut self,
        entry: MaskedIndexEntry,
        chr: Ciphertext,
        now: Timestamp,
        retention: Option<u64>,
    ) -> Result<(), StoreError> {
        if self.entries.contains_key(&entry.x_index) {
            return Err(StoreError::DuplicateIndex(entry.x_index));
        }
        let anchor_digest = self.params.h2_hash(chr.as_bytes());
        self.entries.insert(
            entry.x_index,
            StoredEntry {
                entry,
                chr: Some(chr),
                anchor_digest,
                stored_at: now,
                expires_at: retention.map(|r| now.saturating_add(r)),
                deleted: false,
            },
        );
        Ok(())
    }

    /// The release gate: certificate under `ha_pk` at `now`, then the
    /// signature on `W` under the certified key, then lookup by `W = X`.
    pub fn handle_access_request(
        &self,
        req: &AccessRequest,
        ha_pk: &GroupPoint,
        now: Timestamp,
    ) -> Result<Release, StoreError> {
        let result = self.check_and_fetch(req, ha_pk, now);
        let outcome = match &result {
            Ok(_) => AuditOutcome::Released,
            Err(e) => AuditOutcome::Denied { code: e.code().to_owned() },
        };
        self.audit.lock().expect("audit lock").append(now, Some(req.cert.subject), req.w, outcome);
        result
    }

    fn check_and_fetch(&self, req: &AccessRequest, ha_pk: &GroupPoint, now: Timestamp) -> Result<Release, StoreError> {
        let status = verify_certificate(&req.cert, ha_pk, now);
        if !status.is_valid() {
            return Err(StoreError::BadCertificate(status));
        }
        if !crypto::verify(&req.cert.subject_pk_enc, req.w.as_bytes(), &req.signature) {
            return Err(StoreError::BadSignature);
        }
        let stored = self.entries.get(&req.w).ok_or(StoreError::UnknownIndex(req.w))?;
        if !stored.available_at(now) {
            return Err(StoreError::Unavailable(req.w));
        }
        Ok(Release {
            z_masked: stored.entry.z_masked_txid,
            k_masked: stored.entry.k_masked_key,
            chr: stored.chr.clone().expect("available entries keep their ciphertext"),
        })
    }

    /// Deletes every entry whose retention ended by `now`: erases the
    /// ciphertext and broadcasts a tombstone for its anchor. Returns how
    /// many entries were deleted.
    pub fn delete_expired<R: RngCore + CryptoRng>(
        &mut self,
        now: Timestamp,
        ledger: &mut Ledger,
        rng: &mut R,
    ) -> Result<usize, StoreError> {
        let mut due: Vec<Digest> = self
            .entries
            .values()
            .filter(|e| !e.deleted && e.expires_at.is_some_and(|t| t <= now))
            .map(|e| e.entry.x_index)
            .collect();
        due.sort();
        if due.is_empty() {
            return Ok(0);
        }
        let anchors: HashMap<Digest, TxId> = ledger
            .payloads_of_kind(PayloadKind::Anchor)
            .filter_map(|(id, tx)| AnchorRecord::from_payload(&tx.payload).ok().map(|a| (a.digest, id)))
            .collect();
        for x in &due {
            let entry = self.entries.get_mut(x).expect("collected from entries");
            entry.deleted = true;
            entry.chr = None;
            if let Some(anchor) = anchors.get(&entry.anchor_digest) {
                if !ledger.is_revoked(anchor) {
                    let tx = ledger.prepare(
                        &self.hospital.enc_keypair,
                        Recipient::Broadcast,
                        tombstone_payload(anchor),
                        rng,
                    );
                    ledger.submit_transaction(&tx)?;
                }
            }
            self.audit.lock().expect("audit lock").append(now, None, *x, AuditOutcome::Deleted);
        }
        if ledger.pending_len() > 0 {
            ledger.seal_block(now);
        }
        Ok(due.len())
    }

    /// Writes entry files and the audit log under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let entries_dir = dir.join("entries");
        fs::create_dir_all(&entries_dir)?;
        for (x, e) in &self.entries {
            let path = entries_dir.join(format!("{}.rec", x.to_hex()));
            fs::write(path, e.to_bytes())?;
        }
        let mut f = File::create(dir.join("audit.log"))?;
        for event in self.audit.lock().expect("audit lock").events() {
            serde_json::to_writer(&mut f, event).map_err(std::io::Error::from)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, params: SystemParams, hospital: ParticipantIdentity) -> Result<Self, StoreError> {
        let mut store = HospitalStore::new(params, hospital);
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("entries"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rec"))
            .collect();
        paths.sort();
        for path in paths {
            let e = StoredEntry::from_bytes(&fs::read(&path)?)?;
            store.entries.insert(e.entry.x_index, e);
        }
        let audit_path = dir.join("audit.log");
        if audit_path.exists() {
            let events = AuditLog::read(BufReader::new(File::open(audit_path)?))?;
            store.audit.lock().expect("audit lock").events = events;
        }
        Ok(store)
    }
}
