use medshare::crypto::{
    keygen, pk_decrypt, pk_encrypt, point_mul, setup_params, sign, sym_decrypt, sym_encrypt, verify, xor_mask,
    Ciphertext, Digest, GroupPoint, PkCiphertext, Scalar, SymmetricKey,
};
use medshare::hospital_store::Release;
use medshare::ledger::{Recipient, Transaction};
use medshare::record_exchange::{AnchorRecord, AuthorizationPass, MaskedIndexEntry, RecordSecret, ReshareGrant};
use medshare::registry::{Certificate, EnrollmentRequest};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn point(seed: u64) -> GroupPoint {
    point_mul(&Scalar::random_nonzero(&mut rng(seed)), &GroupPoint::generator())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_laws(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (p, q, r) = (point(a), point(b), point(c));
        prop_assert_eq!(p + q, q + p);
        prop_assert_eq!((p + q) + r, p + (q + r));
        prop_assert_eq!(p + GroupPoint::IDENTITY, p);
        prop_assert_eq!(p + (-p), GroupPoint::IDENTITY);
    }

    #[test]
    fn scalar_mul_distributes(x in 1u64..u32::MAX as u64, y in 1u64..u32::MAX as u64, s in any::<u64>()) {
        let p = point(s);
        let lhs = point_mul(&Scalar::from_u64(x + y), &p);
        prop_assert_eq!(lhs, point_mul(&Scalar::from_u64(x), &p) + point_mul(&Scalar::from_u64(y), &p));
        let nested = point_mul(&Scalar::from_u64(x), &point_mul(&Scalar::from_u64(y), &p));
        prop_assert_eq!(nested, point_mul(&Scalar::from_u64(x * y), &p));
    }

    #[test]
    fn ecdh_is_symmetric(a in any::<u64>(), b in any::<u64>()) {
        let params = setup_params("secp256k1").unwrap();
        let ka = keygen(&params, &mut rng(a));
        let kb = keygen(&params, &mut rng(b ^ 0xa5a5));
        prop_assert_eq!(point_mul(&ka.secret, &kb.public), point_mul(&kb.secret, &ka.public));
    }

    #[test]
    fn point_encoding_roundtrips(s in any::<u64>()) {
        let p = point(s);
        prop_assert_eq!(GroupPoint::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn point_decoding_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..40)) {
        let _ = GroupPoint::from_bytes(&bytes);
        let _ = Scalar::from_bytes(&bytes);
    }

    #[test]
    fn symmetric_roundtrip(body in proptest::collection::vec(any::<u8>(), 0..2048), s in any::<u64>()) {
        let mut r = rng(s);
        let key = SymmetricKey::random(&mut r);
        let ct = sym_encrypt(&key, &body, &mut r);
        prop_assert_eq!(sym_decrypt(&key, &ct).unwrap(), body);
    }

    #[test]
    fn symmetric_rejects_any_flip(body in proptest::collection::vec(any::<u8>(), 1..256), s in any::<u64>(), pos in any::<usize>()) {
        let mut r = rng(s);
        let key = SymmetricKey::random(&mut r);
        let mut ct = sym_encrypt(&key, &body, &mut r);
        let i = pos % ct.len();
        ct.bytes_mut()[i] ^= 0x80;
        prop_assert!(sym_decrypt(&key, &ct).is_err());
    }

    #[test]
    fn public_key_roundtrip(body in proptest::collection::vec(any::<u8>(), 0..512), s in any::<u64>()) {
        let params = setup_params("secp256k1").unwrap();
        let mut r = rng(s);
        let kp = keygen(&params, &mut r);
        let other = keygen(&params, &mut r);
        let ct = pk_encrypt(&kp.public, &body, &mut r).unwrap();
        let reparsed = PkCiphertext::from_bytes(ct.as_bytes().to_vec()).unwrap();
        prop_assert_eq!(pk_decrypt(&kp.secret, &reparsed).unwrap(), body);
        prop_assert!(pk_decrypt(&other.secret, &ct).is_err());
    }

    #[test]
    fn signatures_bind_message(msg in proptest::collection::vec(any::<u8>(), 0..256), s in any::<u64>()) {
        let params = setup_params("secp256k1").unwrap();
        let mut r = rng(s);
        let kp = keygen(&params, &mut r);
        let sig = sign(&kp.secret, &msg, &mut r);
        prop_assert!(verify(&kp.public, &msg, &sig));
        let mut other = msg.clone();
        other.push(0);
        prop_assert!(!verify(&kp.public, &other, &sig));
    }

    #[test]
    fn xor_mask_is_an_involution(v in proptest::collection::vec(any::<u8>(), 0..=32), pad in any::<[u8; 32]>()) {
        let pad = Digest(pad);
        let masked = xor_mask(&v, &pad).unwrap();
        prop_assert_eq!(xor_mask(&masked, &pad).unwrap(), v);
    }

    #[test]
    fn transaction_codec_roundtrips(
        payload in proptest::collection::vec(any::<u8>(), 0..300),
        nonce in any::<u64>(),
        to in proptest::option::of(any::<[u8; 20]>()),
        s in any::<u64>(),
    ) {
        let params = setup_params("secp256k1").unwrap();
        let mut r = rng(s);
        let kp = keygen(&params, &mut r);
        let recipient = match to {
            Some(a) => Recipient::Account(medshare::ledger::Address(a)),
            None => Recipient::Broadcast,
        };
        let tx = Transaction::signed(&kp, nonce, 1, 3_000_000, recipient, payload, &mut r);
        let back = Transaction::from_bytes(&tx.to_bytes()).unwrap();
        prop_assert!(back.verify_signature());
        prop_assert_eq!(back, tx);
    }

    #[test]
    fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let _ = Transaction::from_bytes(&bytes);
        let _ = Certificate::from_bytes(&bytes);
        let _ = EnrollmentRequest::from_bytes(&bytes);
        let _ = MaskedIndexEntry::from_bytes(&bytes);
        let _ = AnchorRecord::from_payload(&bytes);
        let _ = ReshareGrant::from_payload(&bytes);
        let _ = AuthorizationPass::from_bytes(&bytes);
        let _ = Release::from_bytes(&bytes);
        let _ = medshare::record_exchange::AccessRequest::from_bytes(&bytes);
        let _ = medshare::ledger::parse_tombstone(&bytes);
    }

    #[test]
    fn protocol_messages_roundtrip(
        t in any::<u64>(),
        ty in "[a-z]{0,24}",
        h in "[A-Z0-9/]{1,20}",
        a in any::<[u8; 32]>(),
        b in any::<[u8; 32]>(),
        k in any::<[u8; 16]>(),
        chr in proptest::collection::vec(any::<u8>(), 28..200),
    ) {
        let anchor = AnchorRecord { created_at: t, record_type: ty, digest: Digest(a) };
        prop_assert_eq!(AnchorRecord::from_payload(&anchor.to_payload()).unwrap(), anchor);

        let entry = MaskedIndexEntry { x_index: Digest(a), z_masked_txid: b, k_masked_key: k };
        prop_assert_eq!(MaskedIndexEntry::from_bytes(&entry.to_bytes()).unwrap(), entry);

        let pass = AuthorizationPass { hospital_id: h, record_time: t, k_t: RecordSecret(a) };
        let back = AuthorizationPass::from_bytes(&pass.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), pass.to_bytes());

        let release = Release { z_masked: a, k_masked: k, chr: Ciphertext::from_bytes(chr).unwrap() };
        prop_assert_eq!(Release::from_bytes(&release.to_bytes()).unwrap(), release);
    }
}
