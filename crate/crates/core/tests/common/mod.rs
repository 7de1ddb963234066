#![allow(dead_code)]

use medshare::crypto::GroupPoint;
use medshare::ledger::Block;
use num_bigint::BigUint;
use sha2::{Digest as _, Sha256};

pub const P_HEX: &str = "FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F";
pub const N_HEX: &str = "FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141";
pub const GX_HEX: &str = "79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798";
pub const GY_HEX: &str = "483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8";

pub fn big(hex: &str) -> BigUint {
    BigUint::parse_bytes(hex.as_bytes(), 16).unwrap()
}

/// Textbook affine arithmetic on y² = x³ + 7 over F_p.
pub struct Curve {
    pub p: BigUint,
}

pub type Affine = Option<(BigUint, BigUint)>;

impl Curve {
    pub fn secp256k1() -> Self {
        Curve { p: big(P_HEX) }
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.p) - (b % &self.p)) % &self.p
    }

    fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    pub fn on_curve(&self, pt: &Affine) -> bool {
        match pt {
            None => true,
            Some((x, y)) => (y * y) % &self.p == (x * x * x + 7u32) % &self.p,
        }
    }

    pub fn add(&self, a: &Affine, b: &Affine) -> Affine {
        let (Some((x1, y1)), Some((x2, y2))) = (a, b) else {
            return a.clone().or_else(|| b.clone());
        };
        let lambda = if x1 == x2 {
            if (y1 + y2) % &self.p == BigUint::from(0u32) {
                return None;
            }
            (BigUint::from(3u32) * x1 * x1) % &self.p * self.inv(&(BigUint::from(2u32) * y1 % &self.p)) % &self.p
        } else {
            self.sub(y2, y1) * self.inv(&self.sub(x2, x1)) % &self.p
        };
        let x3 = self.sub(&self.sub(&(&lambda * &lambda % &self.p), x1), x2);
        let y3 = self.sub(&(&lambda * self.sub(x1, &x3) % &self.p), y1);
        Some((x3, y3))
    }

    /// k·P as P + P + … + P.
    pub fn mul_repeated(&self, k: u64, pt: &Affine) -> Affine {
        let mut acc: Affine = None;
        for _ in 0..k {
            acc = self.add(&acc, pt);
        }
        acc
    }
}

pub fn affine(p: &GroupPoint) -> Affine {
    p.affine_coordinates()
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Block hash recomputed from the header fields with a local encoder.
pub fn block_hash_oracle(b: &Block) -> [u8; 32] {
    let mut buf = Vec::new();
    buf.extend_from_slice(&b.height.to_be_bytes());
    buf.extend_from_slice(b.prev_hash.as_bytes());
    buf.extend_from_slice(&b.timestamp.to_be_bytes());
    buf.extend_from_slice(&(b.tx_ids.len() as u32).to_be_bytes());
    for id in &b.tx_ids {
        buf.extend_from_slice(id.as_bytes());
    }
    sha256(&buf)
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

impl Curve {
    /// Left-to-right double-and-add.
    pub fn mul(&self, k: &BigUint, pt: &Affine) -> Affine {
        let mut acc: Affine = None;
        for i in (0..k.bits()).rev() {
            acc = self.add(&acc, &acc);
            if k.bit(i) {
                acc = self.add(&acc, pt);
            }
        }
        acc
    }

    pub fn generator(&self) -> Affine {
        Some((big(GX_HEX), big(GY_HEX)))
    }
}

/// SEC1 compressed encoding.
pub fn compress(pt: &Affine) -> [u8; 33] {
    let (x, y) = pt.as_ref().expect("finite point");
    let mut out = [0u8; 33];
    out[0] = if y.bit(0) { 0x03 } else { 0x02 };
    let xb = x.to_bytes_be();
    out[33 - xb.len()..].copy_from_slice(&xb);
    out
}

/// Point-to-scalar hash into [1, n-1] over SHA-256.
pub fn h1_oracle(pt: &Affine) -> BigUint {
    let n = big(N_HEX);
    BigUint::from_bytes_be(&sha256(&compress(pt))) % (&n - 1u32) + 1u32
}
