//! Health authority setup, participant registration and doctor certification.

use medshare::registry::{
    register_doctor, verify_certificate, HealthAuthority, ParticipantId, Role, SetupConfig, Validity,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut ha = HealthAuthority::new();
    let (params, me) = ha.system_setup(&SetupConfig::default(), &mut rng)?;
    println!("curve {} / h1 {} / h2 {}", params.curve.name(), params.h1.name(), params.h2.name());
    println!("authority {} at {}", me.id, me.address);

    ha.register_participant(Role::Hospital, ParticipantId::hospital("M", "H1"), &mut rng)?;
    let doctor = ha.register_participant(Role::Doctor, ParticipantId::member("M", "H1", "D1"), &mut rng)?;
    let patient = ha.register_participant(Role::Patient, ParticipantId::member("M", "H1", "P1"), &mut rng)?;
    println!("doctor {} at {}", doctor.id, doctor.address);
    println!("patient {} at {}", patient.id, patient.address);

    let enrollment = register_doctor(&params, &doctor, &mut rng)?;
    let now = 1_700_000_000;
    let cert = ha.issue_certificate(&enrollment.request(), Validity::new(now, now + 86_400), now, &mut rng)?;
    println!("certificate: {} bytes, subject pseudonym {}", cert.to_bytes().len(), cert.subject.to_hex());
    println!("status now: {:?}", verify_certificate(&cert, &ha.public_key()?, now + 10));
    println!("status tomorrow: {:?}", verify_certificate(&cert, &ha.public_key()?, now + 86_400));

    let traced = ha.trace_subject(&cert.subject).expect("issued by this authority");
    println!("authority resolves the pseudonym to {}", traced.id);

    let dup = ha.register_participant(Role::Patient, ParticipantId::member("M", "H1", "P1"), &mut rng);
    println!("registering P1 twice: {}", dup.unwrap_err().code());
    Ok(())
}
