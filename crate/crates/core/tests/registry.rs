use medshare::harness::{World, WorldSpec, EPOCH};
use medshare::registry::{
    verify_certificate, Certificate, CertificateStatus, HealthAuthority, Role, SetupConfig, CERTIFICATE_LEN,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[test]
fn certificates_roundtrip_and_verify_half_open() {
    let w = World::build(&WorldSpec::default()).unwrap();
    let ha = w.authority.public_key().unwrap();
    let cert = w.doctors[0].certificate().unwrap().clone();
    let bytes = cert.to_bytes();
    assert_eq!(bytes.len(), CERTIFICATE_LEN);
    assert_eq!(Certificate::from_bytes(&bytes).unwrap(), cert);

    let v = cert.validity;
    assert_eq!(verify_certificate(&cert, &ha, v.not_before - 1), CertificateStatus::NotYetValid);
    assert_eq!(verify_certificate(&cert, &ha, v.not_before), CertificateStatus::Valid);
    assert_eq!(verify_certificate(&cert, &ha, v.not_after - 1), CertificateStatus::Valid);
    assert_eq!(verify_certificate(&cert, &ha, v.not_after), CertificateStatus::Expired);
}

#[test]
fn foreign_authority_certificates_fail() {
    let w = World::build(&WorldSpec::default()).unwrap();
    let mut other = HealthAuthority::new();
    other.system_setup(&SetupConfig::default(), &mut ChaCha20Rng::seed_from_u64(99)).unwrap();
    let cert = w.doctors[0].certificate().unwrap();
    assert_eq!(verify_certificate(cert, &other.public_key().unwrap(), EPOCH + 1), CertificateStatus::BadSignature);
}

#[test]
fn authority_traces_pseudonyms_and_addresses() {
    let w = World::build(&WorldSpec { n_doctors: 3, n_patients: 2, ..WorldSpec::default() }).unwrap();
    for d in &w.doctors {
        let cert = d.certificate().unwrap();
        assert!(!String::from_utf8_lossy(&cert.to_bytes()).contains(&d.identity().id.to_string()));
        let entry = w.authority.trace_subject(&cert.subject).unwrap();
        assert_eq!(entry.id, d.identity().id);
        assert_eq!(entry.role, Role::Doctor);
    }
    for p in &w.patients {
        assert_eq!(w.authority.trace(&p.identity().address).unwrap().id, p.identity().id);
        assert!(w.authority.is_registered(&p.identity().id, Role::Patient));
        assert!(!w.authority.is_registered(&p.identity().id, Role::Doctor));
    }
    assert_eq!(w.authority.directory_len(), 1 + 1 + 3 + 2);
}

#[test]
fn seeded_worlds_are_identical() {
    let a = World::build(&WorldSpec { seed: 77, ..WorldSpec::default() }).unwrap();
    let b = World::build(&WorldSpec { seed: 77, ..WorldSpec::default() }).unwrap();
    let (mut da, mut db) = (Vec::new(), Vec::new());
    a.authority.export_directory(&mut da).unwrap();
    b.authority.export_directory(&mut db).unwrap();
    assert_eq!(da, db);
    assert_eq!(a.doctors[1].certificate(), b.doctors[1].certificate());
}
