//! Health Authority: system setup, participant enrollment, doctor
//! certificates, and the identity directory used for dispute tracing.
//!
//! Certificate canonical encoding (198 bytes):
//!
//! ```text
//! not_before u64 ‖ not_after u64 ‖ subject[32] ‖ subject_pk_enc[33]
//! ‖ subject_tag_pub[33] ‖ issuer[20] ‖ signature[64]
//! ```
//!
//! `subject` is a pseudonym, h2 over a domain label and the doctor's id
//! string, so certificates can travel in access requests without carrying
//! the raw identity. Only the Health Authority can map it back.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    self, keygen, CryptoError, Digest, GroupPoint, KeyPair, Scalar, Signature, SystemParams, POINT_LEN,
};
use crate::ledger::{self, Address};
use crate::wire::{CodecError, Reader, Writer};
use crate::Timestamp;

pub const CERTIFICATE_LEN: usize = 8 + 8 + 32 + POINT_LEN + POINT_LEN + ledger::ADDRESS_LEN + crypto::SIGNATURE_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("system setup already ran")]
    AlreadySetUp,
    #[error("system setup has not run")]
    NotSetUp,
    #[error("`{0}` is already registered")]
    Duplicate(String),
    #[error("hospital `{0}` is not registered")]
    UnknownHospital(String),
    #[error("identifier `{id}` is malformed for role {role:?}")]
    MalformedId { id: String, role: Role },
    #[error("role {0:?} cannot be registered this way")]
    RoleNotAllowed(Role),
    #[error("`{0}` is not a registered doctor")]
    UnknownDoctor(String),
    #[error("enrollment key does not match the directory entry")]
    KeyMismatch,
    #[error("enrollment carries an invalid curve point")]
    InvalidPoint,
    #[error("validity window [{not_before}, {not_after}) is empty or already over")]
    EmptyValidity { not_before: Timestamp, not_after: Timestamp },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::AlreadySetUp => "E_SETUP_TWICE",
            RegistryError::NotSetUp => "E_SETUP_MISSING",
            RegistryError::Duplicate(_) => "E_DUPLICATE_ID",
            RegistryError::UnknownHospital(_) => "E_UNKNOWN_HOSPITAL",
            RegistryError::MalformedId { .. } => "E_MALFORMED_ID",
            RegistryError::RoleNotAllowed(_) => "E_ROLE",
            RegistryError::UnknownDoctor(_) => "E_UNKNOWN_DOCTOR",
            RegistryError::KeyMismatch => "E_KEY_MISMATCH",
            RegistryError::InvalidPoint => "E_INVALID_POINT",
            RegistryError::EmptyValidity { .. } => "E_VALIDITY",
            RegistryError::Crypto(_) => "E_CRYPTO",
            RegistryError::Codec(_) => "E_CODEC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    HealthAuthority,
    Hospital,
    Doctor,
    Patient,
}

/// Composite identifier `{M, H_i, P_i}`: authority, hospital, member.
///
/// Rendered as `M`, `M/H1`, or `M/H1/P1` depending on the role.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticipantId {
    pub authority: String,
    pub hospital: Option<String>,
    pub member: Option<String>,
}

impl ParticipantId {
    pub fn authority(m: &str) -> Self {
        ParticipantId { authority: m.into(), hospital: None, member: None }
    }

    pub fn hospital(m: &str, h: &str) -> Self {
        ParticipantId { authority: m.into(), hospital: Some(h.into()), member: None }
    }

    pub fn member(m: &str, h: &str, p: &str) -> Self {
        ParticipantId { authority: m.into(), hospital: Some(h.into()), member: Some(p.into()) }
    }

    /// The hospital this identifier belongs to, if any.
    pub fn hospital_id(&self) -> Option<ParticipantId> {
        self.hospital.as_deref().map(|h| ParticipantId::hospital(&self.authority, h))
    }

    fn well_formed_for(&self, role: Role) -> bool {
        let ok = |s: &str| !s.is_empty() && !s.contains('/') && s.len() < 256;
        let shape = match role {
            Role::HealthAuthority => self.hospital.is_none() && self.member.is_none(),
            Role::Hospital => self.hospital.is_some() && self.member.is_none(),
            Role::Doctor | Role::Patient => self.hospital.is_some() && self.member.is_some(),
        };
        shape && ok(&self.authority) && self.hospital.as_deref().is_none_or(ok) && self.member.as_deref().is_none_or(ok)
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.authority)?;
        if let Some(h) = &self.hospital {
            write!(f, "/{h}")?;
        }
        if let Some(m) = &self.member {
            write!(f, "/{m}")?;
        }
        Ok(())
    }
}

/// A registered participant as held by that participant (includes the secret key).
#[derive(Debug, Clone)]
pub struct ParticipantIdentity {
    pub role: Role,
    pub id: ParticipantId,
    pub address: Address,
    pub enc_keypair: KeyPair,
}

/// What the Health Authority keeps about each participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub role: Role,
    pub id: ParticipantId,
    pub address: Address,
    #[serde(with = "point_hex")]
    pub public: GroupPoint,
}

mod point_hex {
    use super::GroupPoint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &GroupPoint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(p.to_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GroupPoint, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        GroupPoint::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct SetupConfig {
    pub authority: String,
    pub curve: String,
    pub h1: crypto::HashAlg,
    pub h2: crypto::HashAlg,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig {
            authority: "M".into(),
            curve: "secp256k1".into(),
            h1: crypto::HashAlg::Sha256,
            h2: crypto::HashAlg::Sha256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    pub not_before: Timestamp,
    pub not_after: Timestamp,
}

impl Validity {
    pub fn new(not_before: Timestamp, not_after: Timestamp) -> Self {
        Validity { not_before, not_after }
    }

    pub fn contains(&self, now: Timestamp) -> bool {
        self.not_before <= now && now < self.not_after
    }
}

/// Doctor-side enrollment state. `tag_secret` never leaves the doctor.
#[derive(Clone)]
pub struct DoctorEnrollment {
    pub doctor_id: ParticipantId,
    pub pk_enc: GroupPoint,
    pub tag_pub: GroupPoint,
    pub tag_secret: Scalar,
}

impl fmt::Debug for DoctorEnrollment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DoctorEnrollment")
            .field("doctor_id", &self.doctor_id)
            .field("tag_pub", &self.tag_pub)
            .finish_non_exhaustive()
    }
}

impl DoctorEnrollment {
    /// The request `N = ID ‖ PK ‖ A` sent to the Health Authority.
    pub fn request(&self) -> EnrollmentRequest {
        EnrollmentRequest { doctor_id: self.doctor_id.to_string(), pk_enc: self.pk_enc, tag_pub: self.tag_pub }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollmentRequest {
    pub doctor_id: String,
    pub pk_enc: GroupPoint,
    pub tag_pub: GroupPoint,
}

impl EnrollmentRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.short_bytes(self.doctor_id.as_bytes()).raw(&self.pk_enc.to_bytes()).raw(&self.tag_pub.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RegistryError> {
        let mut r = Reader::new(bytes);
        let doctor_id = r.short_string("doctor_id")?;
        let pk_enc = GroupPoint::from_bytes(r.take(POINT_LEN)?).map_err(|_| RegistryError::InvalidPoint)?;
        let tag_pub = GroupPoint::from_bytes(r.take(POINT_LEN)?).map_err(|_| RegistryError::InvalidPoint)?;
        r.finish()?;
        Ok(EnrollmentRequest { doctor_id, pk_enc, tag_pub })
    }
}

/// Generates the doctor's tag key pair `(a_i, A_i = a_i·G)`.
pub fn register_doctor<R: RngCore + CryptoRng>(
    params: &SystemParams,
    doctor: &ParticipantIdentity,
    rng: &mut R,
) -> Result<DoctorEnrollment, RegistryError> {
    if doctor.role != Role::Doctor {
        return Err(RegistryError::RoleNotAllowed(doctor.role));
    }
    let tag = keygen(params, rng);
    Ok(DoctorEnrollment {
        doctor_id: doctor.id.clone(),
        pk_enc: doctor.enc_keypair.public,
        tag_pub: tag.public,
        tag_secret: tag.secret,
    })
}

/// Pseudonymous certificate subject for a doctor id string.
pub fn subject_pseudonym(params: &SystemParams, id: &str) -> Digest {
    let mut w = Writer::new();
    w.raw(b"medshare/subject/v1").short_bytes(id.as_bytes());
    params.h2_hash(&w.finish())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub validity: Validity,
    pub subject: Digest,
    pub subject_pk_enc: GroupPoint,
    pub subject_tag_pub: GroupPoint,
    pub issuer: Address,
    pub signature: Signature,
}

impl Certificate {
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(CERTIFICATE_LEN);
        w.u64(self.validity.not_before)
            .u64(self.validity.not_after)
            .raw(self.subject.as_bytes())
            .raw(&self.subject_pk_enc.to_bytes())
            .raw(&self.subject_tag_pub.to_bytes())
            .raw(self.issuer.as_bytes());
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(self.signature.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RegistryError> {
        let mut r = Reader::new(bytes);
        let validity = Validity::new(r.u64()?, r.u64()?);
        let subject = Digest(r.array()?);
        let subject_pk_enc = GroupPoint::from_bytes(r.take(POINT_LEN)?)?;
        let subject_tag_pub = GroupPoint::from_bytes(r.take(POINT_LEN)?)?;
        let issuer = Address(r.array()?);
        let signature = Signature(r.array()?);
        r.finish()?;
        Ok(Certificate { validity, subject, subject_pk_enc, subject_tag_pub, issuer, signature })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateStatus {
    Valid,
    BadSignature,
    NotYetValid,
    Expired,
}

impl CertificateStatus {
    pub fn is_valid(self) -> bool {
        self == CertificateStatus::Valid
    }
}

/// Signature under `ha_pk` first, then the validity window at `now`.
pub fn verify_certificate(cert: &Certificate, ha_pk: &GroupPoint, now: Timestamp) -> CertificateStatus {
    if !crypto::verify(ha_pk, &cert.body_bytes(), &cert.signature) {
        CertificateStatus::BadSignature
    } else if now < cert.validity.not_before {
        CertificateStatus::NotYetValid
    } else if now >= cert.validity.not_after {
        CertificateStatus::Expired
    } else {
        CertificateStatus::Valid
    }
}

#[derive(Debug)]
struct AuthorityState {
    params: SystemParams,
    identity: ParticipantIdentity,
    directory: BTreeMap<Address, DirectoryEntry>,
    by_id: HashMap<ParticipantId, Address>,
}

/// The Health Authority actor. Holds the only copy of the directory.
#[derive(Debug, Default)]
pub struct HealthAuthority {
    state: Option<AuthorityState>,
}

impl HealthAuthority {
    pub fn new() -> Self {
        Self::default()
    }

    /// Selects the curve and hash functions, publishes the parameters, and
    /// generates the authority's own key pair. Runs once.
    pub fn system_setup<R: RngCore + CryptoRng>(
        &mut self,
        config: &SetupConfig,
        rng: &mut R,
    ) -> Result<(SystemParams, ParticipantIdentity), RegistryError> {
        if self.state.is_some() {
            return Err(RegistryError::AlreadySetUp);
        }
        let params = crypto::setup_params(&config.curve)?.with_hashes(config.h1, config.h2);
        params.validate()?;
        let id = ParticipantId::authority(&config.authority);
        if !id.well_formed_for(Role::HealthAuthority) {
            return Err(RegistryError::MalformedId { id: id.to_string(), role: Role::HealthAuthority });
        }
        let enc_keypair = keygen(&params, rng);
        let address = ledger::create_account(&params, &enc_keypair.public);
        let identity = ParticipantIdentity { role: Role::HealthAuthority, id: id.clone(), address, enc_keypair };
        let mut state = AuthorityState {
            params: params.clone(),
            identity: identity.clone(),
            directory: BTreeMap::new(),
            by_id: HashMap::new(),
        };
        state.insert(&identity);
        self.state = Some(state);
        Ok((params, identity))
    }

    fn state(&self) -> Result<&AuthorityState, RegistryError> {
        self.state.as_ref().ok_or(RegistryError::NotSetUp)
    }

    pub fn params(&self) -> Result<&SystemParams, RegistryError> {
        Ok(&self.state()?.params)
    }

    pub fn public_key(&self) -> Result<GroupPoint, RegistryError> {
        Ok(self.state()?.identity.enc_keypair.public)
    }

    pub fn address(&self) -> Result<Address, RegistryError> {
        Ok(self.state()?.identity.address)
    }

    /// Enrolls a hospital, doctor, or patient: fresh key pair, derived
    /// account, directory entry.
    pub fn register_participant<R: RngCore + CryptoRng>(
        &mut self,
        role: Role,
        id: ParticipantId,
        rng: &mut R,
    ) -> Result<ParticipantIdentity, RegistryError> {
        let state = self.state.as_mut().ok_or(RegistryError::NotSetUp)?;
        if role == Role::HealthAuthority {
            return Err(RegistryError::RoleNotAllowed(role));
        }
        if !id.well_formed_for(role) || id.authority != state.identity.id.authority {
            return Err(RegistryError::MalformedId { id: id.to_string(), role });
        }
        if state.by_id.contains_key(&id) {
            return Err(RegistryError::Duplicate(id.to_string()));
        }
        if role != Role::Hospital {
            let hospital = id.hospital_id().expect("checked by well_formed_for");
            let is_hospital = state
                .by_id
                .get(&hospital)
                .and_then(|a| state.directory.get(a))
                .is_some_and(|e| e.role == Role::Hospital);
            if !is_hospital {
                return Err(RegistryError::UnknownHospital(hospital.to_string()));
            }
        }
        let enc_keypair = keygen(&state.params, rng);
        let address = ledger::create_account(&state.params, &enc_keypair.public);
        let identity = ParticipantIdentity { role, id, address, enc_keypair };
        state.insert(&identity);
        Ok(identity)
    }

    /// Whether `id` is enrolled with `role`. Reveals nothing about addresses.
    pub fn is_registered(&self, id: &ParticipantId, role: Role) -> bool {
        self.state
            .as_ref()
            .is_some_and(|s| s.by_id.get(id).and_then(|a| s.directory.get(a)).is_some_and(|e| e.role == role))
    }

    /// Dispute tracing: maps an account address back to a real identity.
    pub fn trace(&self, address: &Address) -> Option<&DirectoryEntry> {
        self.state.as_ref()?.directory.get(address)
    }

    /// Maps a certificate subject pseudonym back to the doctor's entry.
    pub fn trace_subject(&self, subject: &Digest) -> Option<&DirectoryEntry> {
        let s = self.state.as_ref()?;
        s.directory
            .values()
            .find(|e| e.role == Role::Doctor && subject_pseudonym(&s.params, &e.id.to_string()) == *subject)
    }

    /// Checks directory membership and keys, then signs a certificate over
    /// the validity window and the doctor's two public keys.
    pub fn issue_certificate<R: RngCore + CryptoRng>(
        &self,
        request: &EnrollmentRequest,
        validity: Validity,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<Certificate, RegistryError> {
        let state = self.state()?;
        let entry = state
            .directory
            .values()
            .find(|e| e.id.to_string() == request.doctor_id)
            .filter(|e| e.role == Role::Doctor)
            .ok_or_else(|| RegistryError::UnknownDoctor(request.doctor_id.clone()))?;
        if request.pk_enc.is_identity() || request.tag_pub.is_identity() {
            return Err(RegistryError::InvalidPoint);
        }
        if request.pk_enc != entry.public {
            return Err(RegistryError::KeyMismatch);
        }
        if validity.not_after <= validity.not_before || validity.not_after <= now {
            return Err(RegistryError::EmptyValidity {
                not_before: validity.not_before,
                not_after: validity.not_after,
            });
        }
        let mut cert = Certificate {
            validity,
            subject: subject_pseudonym(&state.params, &request.doctor_id),
            subject_pk_enc: request.pk_enc,
            subject_tag_pub: request.tag_pub,
            issuer: state.identity.address,
            signature: Signature([0u8; 64]),
        };
        cert.signature = crypto::sign(&state.identity.enc_keypair.secret, &cert.body_bytes(), rng);
        Ok(cert)
    }

    /// Writes the directory as JSON lines, ordered by address.
    pub fn export_directory<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(state) = &self.state else { return Ok(()) };
        for entry in state.directory.values() {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn directory_len(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.directory.len())
    }
}

impl AuthorityState {
    fn insert(&mut self, identity: &ParticipantIdentity) {
        self.by_id.insert(identity.id.clone(), identity.address);
        self.directory.insert(
            identity.address,
            DirectoryEntry {
                role: identity.role,
                id: identity.id.clone(),
                address: identity.address,
                public: identity.enc_keypair.public,
            },
        );
    }
}
