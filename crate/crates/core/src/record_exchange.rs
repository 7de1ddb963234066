//! Record creation, anchoring, masked indexing, and access resharing.
//!
//! The flow, by actor:
//!
//! 1. **Doctor** encrypts a health record under a fresh 128-bit key, hands
//!    the ciphertext to the hospital, and anchors `{T₁, Ty₁, eh₁ = h2(CHR)}`
//!    on the ledger ([`Doctor::create_and_anchor_record`]).
//! 2. **Patient** picks a secret `k_t` and derives the lookup index
//!    `X = h2_k(H ‖ T₁ ‖ 0)` and pad `Y = h2_k(H ‖ T₁ ‖ 1)`; the hospital
//!    receives only `(X, tx_id ⊕ Y, K ⊕ Y)` ([`Patient::derive_masked_entry`]).
//! 3. **Patient** grants access by broadcasting `R = r·G`, the designated
//!    tag `ST = h1(r·A_j)·G`, and the authorization pass encrypted to the
//!    grantee ([`Patient::grant_access`]).
//! 4. **Grantee** recomputes `ST' = h1(a_j·R)·G`, and only on a match
//!    decrypts the pass, rebuilds `X`/`Y`, and asks the hospital with a
//!    signed request ([`Doctor::accept_grant`], [`Doctor::build_access_request`]).
//! 5. **Grantee** unmasks the anchor id and key, checks the on-chain digest
//!    against the released ciphertext, and decrypts ([`recover_record`]).
//!
//! On-chain payload encodings:
//!
//! ```text
//! anchor: 0x01 ‖ T₁ u64 ‖ Ty₁ (u16 len ‖ utf-8) ‖ eh₁[32]
//! grant:  0x02 ‖ R[33] ‖ ST[33] ‖ C₁ (u32 len ‖ bytes)
//! ```
//!
//! Authorization pass: `H (u16 len ‖ utf-8) ‖ T₁ u64 ‖ k_t[32]`.
//! Access request: `W[32] ‖ signature[64] ‖ certificate[198]`.
//! Index derivation input: `H (u16 len ‖ utf-8) ‖ T₁ u64 ‖ domain u8`.

use std::collections::HashMap;
use std::fmt;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{
    self, pk_decrypt, pk_encrypt, point_mul, sym_decrypt, sym_encrypt, xor_mask, Ciphertext, CryptoError, Digest,
    GroupPoint, KeyPair, PkCiphertext, Scalar, Signature, SymmetricKey, SystemParams, POINT_LEN, SYM_KEY_LEN,
};
use crate::hospital_store::Release;
use crate::ledger::{Ledger, LedgerError, PayloadKind, Recipient, TxId};
use crate::registry::{
    verify_certificate, Certificate, DoctorEnrollment, HealthAuthority, ParticipantId, ParticipantIdentity,
    RegistryError, Role,
};
use crate::wire::{CodecError, Reader, Writer};
use crate::Timestamp;

pub const MASKED_ENTRY_LEN: usize = 32 + 32 + SYM_KEY_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangeError {
    #[error("health record body is empty")]
    EmptyBody,
    #[error("`{0}` is not a registered patient")]
    UnregisteredPatient(String),
    #[error("doctor holds no certificate valid at this time")]
    NoValidCertificate,
    #[error("patient holds no secret for record {0}")]
    UnknownRecord(TxId),
    #[error("designation tag does not match this doctor")]
    TagMismatch,
    #[error("authorization pass could not be decrypted")]
    PassDecryption,
    #[error("no pending access request for index {0}")]
    UnknownRequest(Digest),
    #[error("unmasked anchor id {0} is not on the ledger")]
    UnknownAnchor(TxId),
    #[error("transaction {0} does not carry an anchor record")]
    NotAnAnchor(TxId),
    #[error("anchor {0} has been revoked")]
    RevokedAnchor(TxId),
    #[error("ciphertext digest does not match anchor {anchor}")]
    DigestMismatch { anchor: TxId },
    #[error("record ciphertext failed to decrypt")]
    RecordDecryption,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl ExchangeError {
    pub fn code(&self) -> &'static str {
        match self {
            ExchangeError::EmptyBody => "E_EMPTY_BODY",
            ExchangeError::UnregisteredPatient(_) => "E_UNREGISTERED",
            ExchangeError::NoValidCertificate => "E_NO_CERT",
            ExchangeError::UnknownRecord(_) => "E_UNKNOWN_RECORD",
            ExchangeError::TagMismatch => "E_TAG_MISMATCH",
            ExchangeError::PassDecryption => "E_PASS_DECRYPT",
            ExchangeError::UnknownRequest(_) => "E_UNKNOWN_REQUEST",
            ExchangeError::UnknownAnchor(_) => "E_UNKNOWN_ANCHOR",
            ExchangeError::NotAnAnchor(_) => "E_NOT_ANCHOR",
            ExchangeError::RevokedAnchor(_) => "E_REVOKED",
            ExchangeError::DigestMismatch { .. } => "E_DIGEST_MISMATCH",
            ExchangeError::RecordDecryption => "E_RECORD_DECRYPT",
            ExchangeError::Ledger(e) => e.code(),
            ExchangeError::Registry(e) => e.code(),
            ExchangeError::Crypto(_) => "E_CRYPTO",
            ExchangeError::Codec(_) => "E_CODEC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealthRecord {
    pub patient_ref: ParticipantId,
    pub body: Vec<u8>,
    /// `T₁`, also the per-record discriminator in index derivation.
    pub created_at: Timestamp,
    /// `Ty₁`.
    pub record_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedRecord {
    pub ciphertext: Ciphertext,
    /// `eh₁ = h2(ciphertext)`.
    pub digest: Digest,
}

impl EncryptedRecord {
    pub fn digest_matches(&self, params: &SystemParams) -> bool {
        params.h2_hash(self.ciphertext.as_bytes()) == self.digest
    }
}

/// On-chain anchor `R₁ = {T₁, Ty₁, eh₁}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorRecord {
    pub created_at: Timestamp,
    pub record_type: String,
    pub digest: Digest,
}

impl AnchorRecord {
    pub fn to_payload(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(43 + self.record_type.len());
        w.u8(PayloadKind::Anchor as u8)
            .u64(self.created_at)
            .short_bytes(self.record_type.as_bytes())
            .raw(self.digest.as_bytes());
        w.finish()
    }

    pub fn from_payload(payload: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(payload);
        let tag = r.u8()?;
        if tag != PayloadKind::Anchor as u8 {
            return Err(CodecError::UnknownTag(tag));
        }
        let created_at = r.u64()?;
        let record_type = r.short_string("record_type")?;
        let digest = Digest(r.array()?);
        r.finish()?;
        Ok(AnchorRecord { created_at, record_type, digest })
    }
}

/// What the hospital stores per record: `(X, Z = tx_id ⊕ Y, K = key ⊕ Y[..16])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedIndexEntry {
    pub x_index: Digest,
    pub z_masked_txid: [u8; 32],
    pub k_masked_key: [u8; SYM_KEY_LEN],
}

impl MaskedIndexEntry {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(MASKED_ENTRY_LEN);
        w.raw(self.x_index.as_bytes()).raw(&self.z_masked_txid).raw(&self.k_masked_key);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let entry =
            MaskedIndexEntry { x_index: Digest(r.array()?), z_masked_txid: r.array()?, k_masked_key: r.array()? };
        r.finish()?;
        Ok(entry)
    }
}

/// Patient secret `k_t` for one record.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct RecordSecret(pub [u8; 32]);

impl fmt::Debug for RecordSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RecordSecret(..)")
    }
}

fn index_message(hospital_id: &str, created_at: Timestamp, domain: u8) -> Vec<u8> {
    let mut w = Writer::with_capacity(hospital_id.len() + 11);
    w.short_bytes(hospital_id.as_bytes()).u64(created_at).u8(domain);
    w.finish()
}

/// `(X, Y)` for a record: keyed h2 with domain byte 0 and 1.
pub fn derive_index_and_pad(
    params: &SystemParams,
    hospital_id: &str,
    created_at: Timestamp,
    k_t: &RecordSecret,
) -> (Digest, Digest) {
    let x = params.h2_keyed(&index_message(hospital_id, created_at, 0), &k_t.0);
    let y = params.h2_keyed(&index_message(hospital_id, created_at, 1), &k_t.0);
    (x, y)
}

/// Capability `(H, T₁, k_t)`. Carries no doctor or patient identity.
#[derive(Clone, PartialEq, Eq)]
pub struct AuthorizationPass {
    pub hospital_id: String,
    pub record_time: Timestamp,
    pub k_t: RecordSecret,
}

impl fmt::Debug for AuthorizationPass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthorizationPass")
            .field("hospital_id", &self.hospital_id)
            .field("record_time", &self.record_time)
            .finish_non_exhaustive()
    }
}

impl AuthorizationPass {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.hospital_id.len() + 42);
        w.short_bytes(self.hospital_id.as_bytes()).u64(self.record_time).raw(&self.k_t.0);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let hospital_id = r.short_string("hospital_id")?;
        let record_time = r.u64()?;
        let k_t = RecordSecret(r.array()?);
        r.finish()?;
        Ok(AuthorizationPass { hospital_id, record_time, k_t })
    }
}

/// Broadcast grant `Trans = (R ‖ ST ‖ C₁)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReshareGrant {
    pub r_point: GroupPoint,
    pub tag: GroupPoint,
    pub c1: PkCiphertext,
}

impl ReshareGrant {
    pub fn to_payload(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(71 + self.c1.len());
        w.u8(PayloadKind::Grant as u8)
            .raw(&self.r_point.to_bytes())
            .raw(&self.tag.to_bytes())
            .long_bytes(self.c1.as_bytes());
        w.finish()
    }

    pub fn from_payload(payload: &[u8]) -> Result<Self, ExchangeError> {
        let mut r = Reader::new(payload);
        let tag = r.u8()?;
        if tag != PayloadKind::Grant as u8 {
            return Err(CodecError::UnknownTag(tag).into());
        }
        let r_point = GroupPoint::from_bytes(r.take(POINT_LEN)?)?;
        let st = GroupPoint::from_bytes(r.take(POINT_LEN)?)?;
        let c1 = PkCiphertext::from_bytes(r.long_bytes()?.to_vec())?;
        r.finish()?;
        Ok(ReshareGrant { r_point, tag: st, c1 })
    }
}

/// `ST = h1(k·P)·G`.
fn designation_tag(params: &SystemParams, k: &Scalar, point: &GroupPoint) -> Result<GroupPoint, CryptoError> {
    let shared = point_mul(k, point);
    Ok(point_mul(&params.h1_point_to_scalar(&shared)?, &params.generator))
}

/// Builds a grant designated to the holder of `grantee_tag_pub`'s secret,
/// with the pass encrypted to `grantee_pk_enc`.
pub fn build_grant<R: RngCore + CryptoRng>(
    params: &SystemParams,
    grantee_tag_pub: &GroupPoint,
    grantee_pk_enc: &GroupPoint,
    pass: &AuthorizationPass,
    rng: &mut R,
) -> Result<ReshareGrant, ExchangeError> {
    if grantee_tag_pub.is_identity() {
        return Err(CryptoError::IdentityPoint.into());
    }
    let r = Scalar::random_nonzero(rng);
    let r_point = point_mul(&r, &params.generator);
    let tag = designation_tag(params, &r, grantee_tag_pub)?;
    let c1 = pk_encrypt(grantee_pk_enc, &pass.to_bytes(), rng)?;
    Ok(ReshareGrant { r_point, tag, c1 })
}

/// Signed request `ψ = (W ‖ ϑ ‖ Cer)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub w: Digest,
    pub signature: Signature,
    pub cert: Certificate,
}

impl AccessRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(32 + 64 + crate::registry::CERTIFICATE_LEN);
        w.raw(self.w.as_bytes()).raw(self.signature.as_bytes()).raw(&self.cert.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExchangeError> {
        let mut r = Reader::new(bytes);
        let w = Digest(r.array()?);
        let signature = Signature(r.array()?);
        let cert = Certificate::from_bytes(r.take(crate::registry::CERTIFICATE_LEN)?)?;
        r.finish()?;
        Ok(AccessRequest { w, signature, cert })
    }
}

/// Unmasks the anchor id and key with `y_pad`, checks the on-chain digest
/// against `chr`, then decrypts.
pub fn recover_record(
    params: &SystemParams,
    z_masked: &[u8; 32],
    k_masked: &[u8; SYM_KEY_LEN],
    chr: &Ciphertext,
    y_pad: &Digest,
    ledger: &Ledger,
) -> Result<Vec<u8>, ExchangeError> {
    let tx_id = TxId(Digest::from_slice(&xor_mask(z_masked, y_pad)?)?);
    let key = SymmetricKey::from_slice(&xor_mask(k_masked, y_pad)?)?;
    let tx = ledger.get_transaction(&tx_id).map_err(|e| match e {
        LedgerError::UnknownTx(id) => ExchangeError::UnknownAnchor(id),
        other => other.into(),
    })?;
    let anchor = AnchorRecord::from_payload(&tx.payload).map_err(|_| ExchangeError::NotAnAnchor(tx_id))?;
    if ledger.is_revoked(&tx_id) {
        return Err(ExchangeError::RevokedAnchor(tx_id));
    }
    if params.h2_hash(chr.as_bytes()) != anchor.digest {
        return Err(ExchangeError::DigestMismatch { anchor: tx_id });
    }
    sym_decrypt(&key, chr).map_err(|_| ExchangeError::RecordDecryption)
}

/// Result of anchoring a new record.
#[derive(Debug, Clone)]
pub struct AnchoredRecord {
    pub encrypted: EncryptedRecord,
    pub tx_id: TxId,
    /// `K_P`, handed to the patient for masking.
    pub key: SymmetricKey,
    pub created_at: Timestamp,
}

/// A certified staff member able to create records and accept grants.
#[derive(Debug)]
pub struct Doctor {
    identity: ParticipantIdentity,
    enrollment: DoctorEnrollment,
    certificate: Option<Certificate>,
    pads: HashMap<Digest, Digest>,
    pass_decryptions: u64,
}

impl Doctor {
    pub fn new(identity: ParticipantIdentity, enrollment: DoctorEnrollment) -> Self {
        Doctor { identity, enrollment, certificate: None, pads: HashMap::new(), pass_decryptions: 0 }
    }

    pub fn identity(&self) -> &ParticipantIdentity {
        &self.identity
    }

    pub fn tag_pub(&self) -> GroupPoint {
        self.enrollment.tag_pub
    }

    pub fn pk_enc(&self) -> GroupPoint {
        self.identity.enc_keypair.public
    }

    pub fn enrollment(&self) -> &DoctorEnrollment {
        &self.enrollment
    }

    pub fn install_certificate(&mut self, cert: Certificate) {
        self.certificate = Some(cert);
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    /// How many times this doctor has attempted to decrypt a `C₁`.
    pub fn pass_decryptions(&self) -> u64 {
        self.pass_decryptions
    }

    fn require_certificate(&self, ha_pk: &GroupPoint, now: Timestamp) -> Result<&Certificate, ExchangeError> {
        self.certificate
            .as_ref()
            .filter(|c| verify_certificate(c, ha_pk, now).is_valid())
            .ok_or(ExchangeError::NoValidCertificate)
    }

    /// Encrypts the record under a fresh key and anchors `{T₁, Ty₁, eh₁}`
    /// in a newly sealed block.
    pub fn create_and_anchor_record<R: RngCore + CryptoRng>(
        &self,
        authority: &HealthAuthority,
        record: &HealthRecord,
        rng: &mut R,
        ledger: &mut Ledger,
    ) -> Result<AnchoredRecord, ExchangeError> {
        if record.body.is_empty() {
            return Err(ExchangeError::EmptyBody);
        }
        if !authority.is_registered(&record.patient_ref, Role::Patient) {
            return Err(ExchangeError::UnregisteredPatient(record.patient_ref.to_string()));
        }
        self.require_certificate(&authority.public_key()?, record.created_at)?;
        let params = ledger.params().clone();
        let key = SymmetricKey::random(rng);
        let ciphertext = sym_encrypt(&key, &record.body, rng);
        let digest = params.h2_hash(ciphertext.as_bytes());
        let anchor = AnchorRecord { created_at: record.created_at, record_type: record.record_type.clone(), digest };
        let tx = ledger.prepare(&self.identity.enc_keypair, Recipient::Broadcast, anchor.to_payload(), rng);
        let tx_id = ledger.submit_transaction(&tx)?;
        ledger.seal_block(record.created_at);
        Ok(AnchoredRecord {
            encrypted: EncryptedRecord { ciphertext, digest },
            tx_id,
            key,
            created_at: record.created_at,
        })
    }

    /// Checks the designation tag, and only when it matches decrypts `C₁`.
    pub fn accept_grant(
        &mut self,
        params: &SystemParams,
        grant: &ReshareGrant,
    ) -> Result<AuthorizationPass, ExchangeError> {
        let expected = designation_tag(params, &self.enrollment.tag_secret, &grant.r_point)
            .map_err(|_| ExchangeError::TagMismatch)?;
        if expected != grant.tag {
            return Err(ExchangeError::TagMismatch);
        }
        self.pass_decryptions += 1;
        let plain =
            pk_decrypt(&self.identity.enc_keypair.secret, &grant.c1).map_err(|_| ExchangeError::PassDecryption)?;
        Ok(AuthorizationPass::from_bytes(&plain)?)
    }

    /// Scans every sealed grant and returns those designated to this doctor.
    pub fn scan_grants(&mut self, ledger: &Ledger) -> Vec<(TxId, AuthorizationPass)> {
        let params = ledger.params().clone();
        let grants: Vec<(TxId, ReshareGrant)> = ledger
            .payloads_of_kind(PayloadKind::Grant)
            .filter_map(|(id, tx)| ReshareGrant::from_payload(&tx.payload).ok().map(|g| (id, g)))
            .collect();
        grants.into_iter().filter_map(|(id, g)| self.accept_grant(&params, &g).ok().map(|p| (id, p))).collect()
    }

    /// Rebuilds `X'`/`Y'` from the pass, keeps `Y'`, and signs `W = X'`.
    pub fn build_access_request<R: RngCore + CryptoRng>(
        &mut self,
        params: &SystemParams,
        pass: &AuthorizationPass,
        rng: &mut R,
    ) -> Result<AccessRequest, ExchangeError> {
        let cert = self.certificate.clone().ok_or(ExchangeError::NoValidCertificate)?;
        let (x, y) = derive_index_and_pad(params, &pass.hospital_id, pass.record_time, &pass.k_t);
        self.pads.insert(x, y);
        let signature = crypto::sign(&self.identity.enc_keypair.secret, x.as_bytes(), rng);
        Ok(AccessRequest { w: x, signature, cert })
    }

    /// Completes a request previously built for index `w`.
    pub fn recover(&mut self, w: &Digest, release: &Release, ledger: &Ledger) -> Result<Vec<u8>, ExchangeError> {
        let pad = *self.pads.get(w).ok_or(ExchangeError::UnknownRequest(*w))?;
        let body = recover_record(ledger.params(), &release.z_masked, &release.k_masked, &release.chr, &pad, ledger)?;
        self.pads.remove(w);
        Ok(body)
    }
}

#[derive(Debug, Clone)]
struct HeldRecord {
    hospital_id: String,
    created_at: Timestamp,
    k_t: RecordSecret,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PatientConfig {
    /// Send each grant from a fresh throwaway ledger account.
    pub one_time_grant_accounts: bool,
}

#[derive(Debug)]
pub struct Patient {
    identity: ParticipantIdentity,
    config: PatientConfig,
    records: HashMap<TxId, HeldRecord>,
}

impl Patient {
    pub fn new(identity: ParticipantIdentity, config: PatientConfig) -> Self {
        Patient { identity, config, records: HashMap::new() }
    }

    pub fn identity(&self) -> &ParticipantIdentity {
        &self.identity
    }

    pub fn holds(&self, record: &TxId) -> bool {
        self.records.contains_key(record)
    }

    /// Picks `k_t`, derives `X`/`Y`, and masks the anchor id and key.
    /// `Y` is dropped here; only `k_t` is retained.
    pub fn derive_masked_entry<R: RngCore + CryptoRng>(
        &mut self,
        params: &SystemParams,
        hospital_id: &str,
        created_at: Timestamp,
        tx_id: &TxId,
        key: &SymmetricKey,
        rng: &mut R,
    ) -> Result<(MaskedIndexEntry, RecordSecret), ExchangeError> {
        let mut k_t = [0u8; 32];
        rng.fill_bytes(&mut k_t);
        let k_t = RecordSecret(k_t);
        let (x, y) = derive_index_and_pad(params, hospital_id, created_at, &k_t);
        let entry = MaskedIndexEntry {
            x_index: x,
            z_masked_txid: xor_mask(tx_id.as_bytes(), &y)?.try_into().expect("32-byte mask"),
            k_masked_key: xor_mask(key.as_bytes(), &y)?.try_into().expect("16-byte mask"),
        };
        self.records.insert(*tx_id, HeldRecord { hospital_id: hospital_id.to_owned(), created_at, k_t });
        Ok((entry, k_t))
    }

    /// The pass for a held record.
    pub fn authorization_pass(&self, record: &TxId) -> Result<AuthorizationPass, ExchangeError> {
        let held = self.records.get(record).ok_or(ExchangeError::UnknownRecord(*record))?;
        Ok(AuthorizationPass { hospital_id: held.hospital_id.clone(), record_time: held.created_at, k_t: held.k_t })
    }

    /// Broadcasts a grant for `record` designated to the grantee, sealed at `now`.
    pub fn grant_access<R: RngCore + CryptoRng>(
        &self,
        grantee_tag_pub: &GroupPoint,
        grantee_pk_enc: &GroupPoint,
        record: &TxId,
        now: Timestamp,
        rng: &mut R,
        ledger: &mut Ledger,
    ) -> Result<(ReshareGrant, TxId), ExchangeError> {
        let pass = self.authorization_pass(record)?;
        let params = ledger.params().clone();
        let grant = build_grant(&params, grantee_tag_pub, grantee_pk_enc, &pass, rng)?;
        let throwaway;
        let sender: &KeyPair = if self.config.one_time_grant_accounts {
            throwaway = crypto::keygen(&params, rng);
            &throwaway
        } else {
            &self.identity.enc_keypair
        };
        let tx = ledger.prepare(sender, Recipient::Broadcast, grant.to_payload(), rng);
        let tx_id = ledger.submit_transaction(&tx)?;
        ledger.seal_block(now);
        Ok((grant, tx_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::setup_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn anchor_payload_roundtrip() {
        let a = AnchorRecord { created_at: 1_700_000_000, record_type: "lab".into(), digest: Digest([5; 32]) };
        let p = a.to_payload();
        assert_eq!(p[0], 0x01);
        assert_eq!(p.len(), 1 + 8 + 2 + 3 + 32);
        assert_eq!(AnchorRecord::from_payload(&p).unwrap(), a);
        assert!(AnchorRecord::from_payload(&p[..p.len() - 1]).is_err());
    }

    #[test]
    fn pass_roundtrip_and_layout() {
        let pass = AuthorizationPass { hospital_id: "M/H1".into(), record_time: 42, k_t: RecordSecret([7; 32]) };
        let bytes = pass.to_bytes();
        assert_eq!(bytes.len(), 2 + 4 + 8 + 32);
        assert_eq!(&bytes[..6], b"\x00\x04M/H1");
        assert_eq!(AuthorizationPass::from_bytes(&bytes).unwrap(), pass);
    }

    #[test]
    fn index_and_pad_differ_and_depend_on_secret() {
        let params = setup_params("secp256k1").unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let mut k = [0u8; 32];
            rng.fill_bytes(&mut k);
            let (x, y) = derive_index_and_pad(&params, "M/H1", 100, &RecordSecret(k));
            assert_ne!(x, y);
            assert!(seen.insert(x));
        }
    }

    #[test]
    fn index_derivation_matches_direct_hmac() {
        let params = setup_params("secp256k1").unwrap();
        let k = RecordSecret([3; 32]);
        let (x, y) = derive_index_and_pad(&params, "H1", 9, &k);
        let mut msg = vec![0, 2, b'H', b'1', 0, 0, 0, 0, 0, 0, 0, 9, 0];
        assert_eq!(x, params.h2.keyed(&k.0, &msg));
        *msg.last_mut().unwrap() = 1;
        assert_eq!(y, params.h2.keyed(&k.0, &msg));
    }

    #[test]
    fn grant_designation() {
        let params = setup_params("secp256k1").unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let tag = crypto::keygen(&params, &mut rng);
        let enc = crypto::keygen(&params, &mut rng);
        let pass = AuthorizationPass { hospital_id: "M/H1".into(), record_time: 1, k_t: RecordSecret([1; 32]) };
        let g = build_grant(&params, &tag.public, &enc.public, &pass, &mut rng).unwrap();
        // Both sides of the shared secret agree.
        assert_eq!(designation_tag(&params, &tag.secret, &g.r_point).unwrap(), g.tag);
        assert_eq!(ReshareGrant::from_payload(&g.to_payload()).unwrap(), g);
        assert_eq!(pk_decrypt(&enc.secret, &g.c1).unwrap(), pass.to_bytes());
    }

    #[test]
    fn access_request_roundtrip() {
        let params = setup_params("secp256k1").unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = crypto::keygen(&params, &mut rng);
        let cert = Certificate {
            validity: crate::registry::Validity::new(0, 10),
            subject: Digest([1; 32]),
            subject_pk_enc: kp.public,
            subject_tag_pub: kp.public,
            issuer: crate::ledger::Address([2; 20]),
            signature: Signature([3; 64]),
        };
        let req = AccessRequest { w: Digest([4; 32]), signature: Signature([5; 64]), cert };
        assert_eq!(req.to_bytes().len(), 32 + 64 + crate::registry::CERTIFICATE_LEN);
        assert_eq!(AccessRequest::from_bytes(&req.to_bytes()).unwrap(), req);
    }
}
