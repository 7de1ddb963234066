//! Cryptographic primitives over secp256k1.
//!
//! Canonical encodings (used for hashing and signing everywhere else):
//!
//! | type           | encoding                                              |
//! |----------------|-------------------------------------------------------|
//! | [`GroupPoint`] | 33-byte SEC1 compressed point; identity = 33 zero bytes |
//! | [`Scalar`]     | 32-byte big-endian, canonical (< group order)          |
//! | [`Digest`]     | 32 bytes                                              |
//! | [`Ciphertext`] | `nonce(12) ‖ body ‖ tag(16)`, AES-128-GCM             |
//! | [`PkCiphertext`] | `ephemeral point(33) ‖ Ciphertext`                  |
//! | [`Signature`]  | 64-byte ECDSA `r ‖ s` (low-S)                         |

use std::fmt;
use std::str::FromStr;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce};
use hmac::{Hmac, Mac};
use k256::ecdsa::signature::{RandomizedSigner, Verifier};
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use sha3::Sha3_256;
use thiserror::Error;

use crate::wire::{CodecError, Reader, Writer};

pub const POINT_LEN: usize = 33;
pub const SCALAR_LEN: usize = 32;
pub const DIGEST_LEN: usize = 32;
pub const SYM_KEY_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const SIGNATURE_LEN: usize = 64;

const SECP256K1_FIELD_PRIME: &str = "fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f";
const SECP256K1_ORDER: &str = "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("unknown curve `{0}`")]
    UnknownCurve(String),
    #[error("unknown hash algorithm `{0}`")]
    UnknownHash(String),
    #[error("system parameters fail validation: {0}")]
    InvalidParams(&'static str),
    #[error("bytes do not encode a point on the curve")]
    InvalidPoint,
    #[error("the identity point is not a valid input here")]
    IdentityPoint,
    #[error("scalar is not reduced modulo the group order")]
    InvalidScalar,
    #[error("wrong length for {what}: expected {expected}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("value of {value} bytes is longer than the {pad}-byte pad")]
    PadTooShort { value: usize, pad: usize },
    #[error("ciphertext is shorter than nonce and tag")]
    CiphertextTooShort,
    #[error("authenticated decryption failed (wrong key or modified ciphertext)")]
    Authentication,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Hash algorithm occupying the h1 or h2 slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashAlg {
    #[serde(rename = "sha256")]
    Sha256,
    #[serde(rename = "sha3-256")]
    Sha3_256,
}

impl HashAlg {
    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha3_256 => "sha3-256",
        }
    }

    fn code(self) -> u8 {
        match self {
            HashAlg::Sha256 => 1,
            HashAlg::Sha3_256 => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self, CryptoError> {
        match code {
            1 => Ok(HashAlg::Sha256),
            2 => Ok(HashAlg::Sha3_256),
            other => Err(CryptoError::UnknownHash(format!("code {other}"))),
        }
    }

    pub fn hash(self, msg: &[u8]) -> Digest {
        let out: [u8; 32] = match self {
            HashAlg::Sha256 => Sha256::digest(msg).into(),
            HashAlg::Sha3_256 => Sha3_256::digest(msg).into(),
        };
        Digest(out)
    }

    /// HMAC over this hash with `key`.
    pub fn keyed(self, key: &[u8], msg: &[u8]) -> Digest {
        let out: [u8; 32] = match self {
            HashAlg::Sha256 => {
                let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
                mac.update(msg);
                mac.finalize().into_bytes().into()
            }
            HashAlg::Sha3_256 => {
                let mut mac = <Hmac<Sha3_256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
                mac.update(msg);
                mac.finalize().into_bytes().into()
            }
        };
        Digest(out)
    }
}

impl FromStr for HashAlg {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sha256" | "sha-256" => Ok(HashAlg::Sha256),
            "sha3-256" | "sha3_256" | "sha3" => Ok(HashAlg::Sha3_256),
            _ => Err(CryptoError::UnknownHash(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveId {
    Secp256k1,
}

impl CurveId {
    pub fn name(self) -> &'static str {
        match self {
            CurveId::Secp256k1 => "secp256k1",
        }
    }
}

impl FromStr for CurveId {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "secp256k1" => Ok(CurveId::Secp256k1),
            _ => Err(CryptoError::UnknownCurve(s.to_owned())),
        }
    }
}

/// Published system parameters: curve, field prime, group order, generator
/// and the two hash slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemParams {
    pub curve: CurveId,
    /// Field prime `q`.
    pub field_prime: [u8; 32],
    /// Prime order of the generator.
    pub order: [u8; 32],
    pub coeff_a: [u8; 32],
    pub coeff_b: [u8; 32],
    pub generator: GroupPoint,
    pub h1: HashAlg,
    pub h2: HashAlg,
}

/// Builds the parameters for `curve_id` with SHA-256 in both hash slots.
pub fn setup_params(curve_id: &str) -> Result<SystemParams, CryptoError> {
    let curve: CurveId = curve_id.parse()?;
    let params = match curve {
        CurveId::Secp256k1 => {
            let mut b = [0u8; 32];
            b[31] = 7;
            SystemParams {
                curve,
                field_prime: hex32(SECP256K1_FIELD_PRIME),
                order: hex32(SECP256K1_ORDER),
                coeff_a: [0u8; 32],
                coeff_b: b,
                generator: GroupPoint::generator(),
                h1: HashAlg::Sha256,
                h2: HashAlg::Sha256,
            }
        }
    };
    Ok(params)
}

fn hex32(s: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).expect("constant is 64 hex chars");
    out
}

impl SystemParams {
    pub fn with_hashes(mut self, h1: HashAlg, h2: HashAlg) -> Self {
        self.h1 = h1;
        self.h2 = h2;
        self
    }

    pub fn order_uint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.order)
    }

    pub fn field_prime_uint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.field_prime)
    }

    /// Checks the curve is non-singular, the generator lies on it, and the
    /// generator has the stated prime order.
    pub fn validate(&self) -> Result<(), CryptoError> {
        let q = self.field_prime_uint();
        let a = BigUint::from_bytes_be(&self.coeff_a);
        let b = BigUint::from_bytes_be(&self.coeff_b);
        let disc = (BigUint::from(4u32) * a.modpow(&BigUint::from(3u32), &q) + BigUint::from(27u32) * (&b * &b)) % &q;
        if disc == BigUint::default() {
            return Err(CryptoError::InvalidParams("singular curve (4a^3 + 27b^2 = 0)"));
        }
        let (x, y) =
            self.generator.affine_coordinates().ok_or(CryptoError::InvalidParams("generator is the identity"))?;
        let lhs = (&y * &y) % &q;
        let rhs = (x.modpow(&BigUint::from(3u32), &q) + &a * &x + &b) % &q;
        if lhs != rhs {
            return Err(CryptoError::InvalidParams("generator is not on the curve"));
        }
        let n = self.order_uint();
        if !is_probable_prime(&n) {
            return Err(CryptoError::InvalidParams("group order is not prime"));
        }
        // (n - 1)·G = -G  <=>  n·G = O
        let n_minus_one = Scalar::from_uint(&(&n - 1u32))
            .ok_or(CryptoError::InvalidParams("group order does not match the curve"))?;
        if point_mul(&n_minus_one, &self.generator) != -self.generator {
            return Err(CryptoError::InvalidParams("generator order differs from stated order"));
        }
        Ok(())
    }

    /// h1: maps a non-identity point to a scalar in `[1, order - 1]`.
    pub fn h1_point_to_scalar(&self, point: &GroupPoint) -> Result<Scalar, CryptoError> {
        if point.is_identity() {
            return Err(CryptoError::IdentityPoint);
        }
        let digest = self.h1.hash(&point.to_bytes());
        let n = self.order_uint();
        let reduced = BigUint::from_bytes_be(digest.as_bytes()) % (&n - 1u32) + 1u32;
        Ok(Scalar::from_uint(&reduced).expect("value below the group order"))
    }

    /// Unkeyed h2.
    pub fn h2_hash(&self, msg: &[u8]) -> Digest {
        self.h2.hash(msg)
    }

    /// Keyed h2, an HMAC over the h2 algorithm.
    pub fn h2_keyed(&self, msg: &[u8], key: &[u8]) -> Digest {
        self.h2.keyed(key, msg)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(200);
        w.short_bytes(self.curve.name().as_bytes())
            .raw(&self.field_prime)
            .raw(&self.order)
            .raw(&self.coeff_a)
            .raw(&self.coeff_b)
            .raw(&self.generator.to_bytes())
            .u8(self.h1.code())
            .u8(self.h2.code());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let curve: CurveId = r.short_string("curve")?.parse()?;
        let params = SystemParams {
            curve,
            field_prime: r.array()?,
            order: r.array()?,
            coeff_a: r.array()?,
            coeff_b: r.array()?,
            generator: GroupPoint::from_bytes(r.take(POINT_LEN)?)?,
            h1: HashAlg::from_code(r.u8()?)?,
            h2: HashAlg::from_code(r.u8()?)?,
        };
        r.finish()?;
        let reference = setup_params(curve.name())?;
        if (params.field_prime, params.order, params.coeff_a, params.coeff_b, params.generator)
            != (reference.field_prime, reference.order, reference.coeff_a, reference.coeff_b, reference.generator)
        {
            return Err(CryptoError::InvalidParams("curve constants differ from the named curve"));
        }
        Ok(params)
    }
}

// Miller-Rabin with the first twelve primes as bases; deterministic well past
// 2^64 and overwhelmingly reliable for 256-bit moduli.
fn is_probable_prime(n: &BigUint) -> bool {
    let one = BigUint::from(1u32);
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    const BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p) == BigUint::default() {
            return false;
        }
    }
    let n_minus_one = n - &one;
    let mut d = n_minus_one.clone();
    let mut s = 0u32;
    while (&d % &two) == BigUint::default() {
        d >>= 1;
        s += 1;
    }
    'bases: for a in BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Integer modulo the group order.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(k256::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(k256::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(k256::Scalar::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(k256::Scalar::from(v))
    }

    /// Uniform in `[1, order - 1]`.
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = k256::Scalar::random(&mut *rng);
            if !bool::from(s.is_zero()) {
                return Scalar(s);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes().into()
    }

    /// Rejects encodings that are not reduced modulo the order.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != SCALAR_LEN {
            return Err(CryptoError::Length { what: "scalar", expected: SCALAR_LEN, got: bytes.len() });
        }
        let repr = FieldBytes::clone_from_slice(bytes);
        Option::from(k256::Scalar::from_repr(repr)).map(Scalar).ok_or(CryptoError::InvalidScalar)
    }

    fn from_uint(v: &BigUint) -> Option<Self> {
        let bytes = v.to_bytes_be();
        if bytes.len() > 32 {
            return None;
        }
        let mut buf = [0u8; 32];
        buf[32 - bytes.len()..].copy_from_slice(&bytes);
        Scalar::from_bytes(&buf).ok()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// A point on the curve, possibly the identity `O`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupPoint(ProjectivePoint);

impl GroupPoint {
    pub const IDENTITY: GroupPoint = GroupPoint(ProjectivePoint::IDENTITY);

    pub fn generator() -> Self {
        GroupPoint(ProjectivePoint::GENERATOR)
    }

    pub fn is_identity(&self) -> bool {
        self.0 == ProjectivePoint::IDENTITY
    }

    pub fn to_bytes(&self) -> [u8; POINT_LEN] {
        let mut out = [0u8; POINT_LEN];
        if !self.is_identity() {
            out.copy_from_slice(self.0.to_affine().to_encoded_point(true).as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != POINT_LEN {
            return Err(CryptoError::Length { what: "point", expected: POINT_LEN, got: bytes.len() });
        }
        if bytes.iter().all(|&b| b == 0) {
            return Ok(GroupPoint::IDENTITY);
        }
        if !matches!(bytes[0], 0x02 | 0x03) {
            return Err(CryptoError::InvalidPoint);
        }
        let encoded = EncodedPoint::from_bytes(bytes).map_err(|_| CryptoError::InvalidPoint)?;
        let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&encoded).into();
        affine.map(|a| GroupPoint(a.into())).ok_or(CryptoError::InvalidPoint)
    }

    /// Affine `(x, y)`, or `None` for the identity.
    pub fn affine_coordinates(&self) -> Option<(BigUint, BigUint)> {
        if self.is_identity() {
            return None;
        }
        let encoded = self.0.to_affine().to_encoded_point(false);
        Some((BigUint::from_bytes_be(encoded.x()?.as_slice()), BigUint::from_bytes_be(encoded.y()?.as_slice())))
    }

    pub(crate) fn as_affine(&self) -> AffinePoint {
        self.0.to_affine()
    }
}

impl fmt::Debug for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupPoint({})", hex::encode(self.to_bytes()))
    }
}

impl std::ops::Add for GroupPoint {
    type Output = GroupPoint;

    fn add(self, rhs: GroupPoint) -> GroupPoint {
        GroupPoint(self.0 + rhs.0)
    }
}

impl std::ops::Neg for GroupPoint {
    type Output = GroupPoint;

    fn neg(self) -> GroupPoint {
        GroupPoint(-self.0)
    }
}

/// `k·P`.
pub fn point_mul(k: &Scalar, point: &GroupPoint) -> GroupPoint {
    GroupPoint(point.0 * k.0)
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub secret: Scalar,
    pub public: GroupPoint,
}

impl KeyPair {
    pub fn from_secret(params: &SystemParams, secret: Scalar) -> Self {
        KeyPair { secret, public: point_mul(&secret, &params.generator) }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

pub fn keygen<R: RngCore + CryptoRng>(params: &SystemParams, rng: &mut R) -> KeyPair {
    KeyPair::from_secret(params, Scalar::random_nonzero(rng))
}

/// 32-byte hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
            what: "digest",
            expected: DIGEST_LEN,
            got: bytes.len(),
        })?;
        Ok(Digest(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out)
            .map_err(|_| CryptoError::Codec(CodecError::Malformed { field: "digest hex" }))?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// 128-bit symmetric key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SymmetricKey([u8; SYM_KEY_LEN]);

impl SymmetricKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = [0u8; SYM_KEY_LEN];
        rng.fill_bytes(&mut k);
        SymmetricKey(k)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SYM_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
            what: "symmetric key",
            expected: SYM_KEY_LEN,
            got: bytes.len(),
        })?;
        Ok(SymmetricKey(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SYM_KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

/// AES-128-GCM output: `nonce ‖ body ‖ tag`.
#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext(Vec<u8>);

impl Ciphertext {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, CryptoError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(CryptoError::CiphertextTooShort);
        }
        Ok(Ciphertext(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Direct access for fault injection and storage erasure.
    pub fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({} bytes)", self.0.len())
    }
}

pub fn sym_encrypt<R: RngCore + CryptoRng>(key: &SymmetricKey, plaintext: &[u8], rng: &mut R) -> Ciphertext {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes128Gcm::new(key.0.as_ref().into());
    let body =
        cipher.encrypt(Nonce::from_slice(&nonce), plaintext).expect("AES-GCM encryption is infallible below 64 GiB");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    Ciphertext(out)
}

pub fn sym_decrypt(key: &SymmetricKey, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let (nonce, body) = ct.0.split_at(NONCE_LEN);
    let cipher = Aes128Gcm::new(key.0.as_ref().into());
    cipher.decrypt(Nonce::from_slice(nonce), body).map_err(|_| CryptoError::Authentication)
}

/// Curve-integrated encryption: `R = r·G ‖ AES-128-GCM(kdf(R, r·PK), pt)`.
#[derive(Clone, PartialEq, Eq)]
pub struct PkCiphertext(Vec<u8>);

impl PkCiphertext {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, CryptoError> {
        if bytes.len() < POINT_LEN + NONCE_LEN + TAG_LEN {
            return Err(CryptoError::CiphertextTooShort);
        }
        Ok(PkCiphertext(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for PkCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PkCiphertext({} bytes)", self.0.len())
    }
}

fn ies_key(ephemeral: &GroupPoint, shared: &GroupPoint) -> SymmetricKey {
    let mut h = Sha256::new();
    h.update(b"medshare/ies/v1");
    h.update(ephemeral.to_bytes());
    h.update(shared.to_bytes());
    let out = h.finalize();
    SymmetricKey::from_slice(&out[..SYM_KEY_LEN]).expect("sliced to key length")
}

pub fn pk_encrypt<R: RngCore + CryptoRng>(
    pk: &GroupPoint,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<PkCiphertext, CryptoError> {
    if pk.is_identity() {
        return Err(CryptoError::IdentityPoint);
    }
    let r = Scalar::random_nonzero(rng);
    let ephemeral = point_mul(&r, &GroupPoint::generator());
    let key = ies_key(&ephemeral, &point_mul(&r, pk));
    let body = sym_encrypt(&key, plaintext, rng);
    let mut out = Vec::with_capacity(POINT_LEN + body.len());
    out.extend_from_slice(&ephemeral.to_bytes());
    out.extend_from_slice(body.as_bytes());
    Ok(PkCiphertext(out))
}

pub fn pk_decrypt(sk: &Scalar, ct: &PkCiphertext) -> Result<Vec<u8>, CryptoError> {
    let (head, body) = ct.0.split_at(POINT_LEN);
    let ephemeral = GroupPoint::from_bytes(head)?;
    if ephemeral.is_identity() {
        return Err(CryptoError::IdentityPoint);
    }
    let key = ies_key(&ephemeral, &point_mul(sk, &ephemeral));
    sym_decrypt(&key, &Ciphertext::from_bytes(body.to_vec())?)
}

/// ECDSA signature, `r ‖ s`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SIGNATURE_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
            what: "signature",
            expected: SIGNATURE_LEN,
            got: bytes.len(),
        })?;
        Ok(Signature(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0[..8]))
    }
}

/// # Panics
/// If `sk` is zero, which [`keygen`] never produces.
pub fn sign<R: RngCore + CryptoRng>(sk: &Scalar, msg: &[u8], rng: &mut R) -> Signature {
    let key =
        k256::ecdsa::SigningKey::from_bytes(&FieldBytes::from(sk.to_bytes())).expect("signing key must be non-zero");
    let sig: k256::ecdsa::Signature = key.sign_with_rng(rng, msg);
    Signature(sig.to_bytes().into())
}

/// False on any mismatch, including malformed signatures or an identity key.
pub fn verify(pk: &GroupPoint, msg: &[u8], sig: &Signature) -> bool {
    if pk.is_identity() {
        return false;
    }
    let Ok(key) = k256::ecdsa::VerifyingKey::from_affine(pk.as_affine()) else {
        return false;
    };
    let Ok(sig) = k256::ecdsa::Signature::from_slice(&sig.0) else {
        return false;
    };
    key.verify(msg, &sig).is_ok()
}

/// Bytewise XOR of `value` with the leading `value.len()` bytes of `pad`.
pub fn xor_mask(value: &[u8], pad: &Digest) -> Result<Vec<u8>, CryptoError> {
    if value.len() > DIGEST_LEN {
        return Err(CryptoError::PadTooShort { value: value.len(), pad: DIGEST_LEN });
    }
    Ok(value.iter().zip(pad.0.iter()).map(|(v, p)| v ^ p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn params() -> SystemParams {
        setup_params("secp256k1").unwrap()
    }

    #[test]
    fn secp256k1_params_validate() {
        let p = params();
        p.validate().unwrap();
        assert_eq!(p.order_uint().bits(), 256);
        assert_eq!(p.h1, HashAlg::Sha256);
        assert_eq!(p.h2, HashAlg::Sha256);
    }

    #[test]
    fn setup_is_deterministic_and_rejects_unknown_curves() {
        assert_eq!(params().to_bytes(), params().to_bytes());
        assert_eq!(setup_params("nosuchcurve"), Err(CryptoError::UnknownCurve("nosuchcurve".into())));
    }

    #[test]
    fn params_roundtrip_through_bytes() {
        let p = params().with_hashes(HashAlg::Sha3_256, HashAlg::Sha256);
        let back = SystemParams::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes(), p.to_bytes());
    }

    #[test]
    fn tampered_params_are_rejected() {
        let mut p = params();
        p.coeff_b[31] = 8;
        assert!(p.validate().is_err());
        assert!(SystemParams::from_bytes(&p.to_bytes()).is_err());

        let mut p = params();
        p.order[31] ^= 2;
        assert!(p.validate().is_err());
    }

    #[test]
    fn keygen_is_seeded_and_consistent() {
        let p = params();
        let a = keygen(&p, &mut rng(0));
        let b = keygen(&p, &mut rng(0));
        assert_eq!(a, b);
        assert_eq!(point_mul(&a.secret, &p.generator), a.public);
    }

    #[test]
    fn thousand_keygens_have_distinct_secrets() {
        let p = params();
        let mut r = rng(11);
        let secrets: std::collections::HashSet<[u8; 32]> =
            (0..1000).map(|_| keygen(&p, &mut r).secret.to_bytes()).collect();
        assert_eq!(secrets.len(), 1000);
    }

    #[test]
    fn multiplication_by_zero_and_one() {
        let g = GroupPoint::generator();
        assert_eq!(point_mul(&Scalar::ZERO, &g), GroupPoint::IDENTITY);
        assert_eq!(point_mul(&Scalar::ONE, &g), g);
    }

    #[test]
    fn identity_encodes_as_zero_bytes() {
        assert_eq!(GroupPoint::IDENTITY.to_bytes(), [0u8; 33]);
        assert_eq!(GroupPoint::from_bytes(&[0u8; 33]).unwrap(), GroupPoint::IDENTITY);
    }

    #[test]
    fn off_curve_points_are_rejected() {
        let mut bytes = GroupPoint::generator().to_bytes();
        bytes[0] = 0x05;
        assert_eq!(GroupPoint::from_bytes(&bytes), Err(CryptoError::InvalidPoint));
        assert!(matches!(GroupPoint::from_bytes(&bytes[..32]), Err(CryptoError::Length { .. })));
        // x = q is outside the field.
        let mut beyond = [0u8; 33];
        beyond[0] = 0x02;
        beyond[1..].copy_from_slice(&params().field_prime);
        assert_eq!(GroupPoint::from_bytes(&beyond), Err(CryptoError::InvalidPoint));
    }

    #[test]
    fn non_canonical_scalars_are_rejected() {
        assert_eq!(Scalar::from_bytes(&params().order), Err(CryptoError::InvalidScalar));
        assert_eq!(Scalar::from_bytes(&[0xff; 32]), Err(CryptoError::InvalidScalar));
    }

    #[test]
    fn h1_rejects_identity_and_separates_negation() {
        let p = params();
        assert_eq!(p.h1_point_to_scalar(&GroupPoint::IDENTITY), Err(CryptoError::IdentityPoint));
        let mut r = rng(5);
        for _ in 0..20 {
            let pt = keygen(&p, &mut r).public;
            let s = p.h1_point_to_scalar(&pt).unwrap();
            assert_eq!(s, p.h1_point_to_scalar(&pt).unwrap());
            assert_ne!(s, p.h1_point_to_scalar(&-pt).unwrap());
            assert!(!s.is_zero());
        }
    }

    #[test]
    fn h1_reduction_lands_in_range() {
        // Reduction formula checked directly: (d mod (n-1)) + 1.
        let p = params().with_hashes(HashAlg::Sha3_256, HashAlg::Sha256);
        let pt = point_mul(&Scalar::from_u64(77), &p.generator);
        let d = BigUint::from_bytes_be(Sha3_256::digest(pt.to_bytes()).as_slice());
        let n = p.order_uint();
        let expected = d % (&n - 1u32) + 1u32;
        let got = BigUint::from_bytes_be(&p.h1_point_to_scalar(&pt).unwrap().to_bytes());
        assert_eq!(got, expected);
        assert!(got < n);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(params().h2_hash(b"").to_hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn sha3_of_empty_input() {
        assert_eq!(
            HashAlg::Sha3_256.hash(b"").to_hex(),
            "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"
        );
    }

    #[test]
    fn hmac_sha256_rfc4231_case_2() {
        assert_eq!(
            params().h2_keyed(b"what do ya want for nothing?", b"Jefe").to_hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }

    #[test]
    fn keyed_hash_domain_separation() {
        let p = params();
        let k = [9u8; 32];
        let d0 = p.h2_keyed(b"H1\x00\x00\x00\x00\x00\x00\x00\x01\x00", &k);
        let d1 = p.h2_keyed(b"H1\x00\x00\x00\x00\x00\x00\x00\x01\x01", &k);
        assert_ne!(d0, d1);
        assert_eq!(d0, p.h2_keyed(b"H1\x00\x00\x00\x00\x00\x00\x00\x01\x00", &k));
    }

    #[test]
    fn symmetric_roundtrip_of_one_megabyte() {
        let mut r = rng(1);
        let key = SymmetricKey::random(&mut r);
        let mut pt = vec![0u8; 1 << 20];
        r.fill_bytes(&mut pt);
        let ct = sym_encrypt(&key, &pt, &mut r);
        assert_eq!(ct.len(), pt.len() + NONCE_LEN + TAG_LEN);
        assert_eq!(sym_decrypt(&key, &ct).unwrap(), pt);
    }

    #[test]
    fn symmetric_failures() {
        let mut r = rng(2);
        let key = SymmetricKey::random(&mut r);
        let ct = sym_encrypt(&key, b"lab result", &mut r);
        let mut flipped = ct.clone();
        flipped.bytes_mut()[NONCE_LEN + 3] ^= 0x01;
        assert_eq!(sym_decrypt(&key, &flipped), Err(CryptoError::Authentication));
        let other = SymmetricKey::random(&mut r);
        assert_eq!(sym_decrypt(&other, &ct), Err(CryptoError::Authentication));
        assert_ne!(sym_encrypt(&key, b"lab result", &mut r), ct);
        assert_eq!(Ciphertext::from_bytes(vec![0; 27]), Err(CryptoError::CiphertextTooShort));
    }

    #[test]
    fn public_key_encryption() {
        let p = params();
        let mut r = rng(3);
        let alice = keygen(&p, &mut r);
        let mallory = keygen(&p, &mut r);
        let msg = b"pass: H1 / 1700000000 / k_t";
        let c1 = pk_encrypt(&alice.public, msg, &mut r).unwrap();
        let c2 = pk_encrypt(&alice.public, msg, &mut r).unwrap();
        assert_ne!(c1, c2);
        assert_eq!(pk_decrypt(&alice.secret, &c1).unwrap(), msg);
        assert_eq!(pk_decrypt(&mallory.secret, &c1), Err(CryptoError::Authentication));
        assert_eq!(pk_encrypt(&GroupPoint::IDENTITY, msg, &mut r), Err(CryptoError::IdentityPoint));
    }

    #[test]
    fn signatures() {
        let p = params();
        let mut r = rng(4);
        let kp = keygen(&p, &mut r);
        let other = keygen(&p, &mut r);
        let msg = b"certificate body".to_vec();
        let sig = sign(&kp.secret, &msg, &mut r);
        assert!(verify(&kp.public, &msg, &sig));
        let mut bad = msg.clone();
        bad[0] ^= 1;
        assert!(!verify(&kp.public, &bad, &sig));
        assert!(!verify(&other.public, &msg, &sig));
        assert!(!verify(&kp.public, &msg, &Signature([0u8; 64])));
        assert!(!verify(&kp.public, &msg, &Signature([0xff; 64])));
        assert!(!verify(&GroupPoint::IDENTITY, &msg, &sig));
    }

    #[test]
    fn xor_mask_cases() {
        let m = b"0123456789abcdef";
        assert_eq!(xor_mask(m, &Digest([0; 32])).unwrap(), m);
        let pad = params().h2_hash(b"pad");
        let once = xor_mask(m, &pad).unwrap();
        let direct: Vec<u8> = (0..16).map(|i| m[i] ^ pad.0[i]).collect();
        assert_eq!(once, direct);
        assert_eq!(xor_mask(&once, &pad).unwrap(), m);
        assert_eq!(xor_mask(&[0u8; 33], &pad), Err(CryptoError::PadTooShort { value: 33, pad: 32 }));
    }
}
