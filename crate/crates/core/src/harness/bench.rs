use std::sync::mpsc;
use std::sync::{Barrier, Mutex};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{sym_decrypt, sym_encrypt, Ciphertext, GroupPoint, SymmetricKey};
use crate::hospital_store::{HospitalStore, Release, StoreError};
use crate::ledger::{Ledger, LedgerConfig};
use crate::record_exchange::{AccessRequest, Doctor, HealthRecord, MaskedIndexEntry, Patient, ReshareGrant};
use crate::registry::HealthAuthority;
use crate::Timestamp;

use super::{HarnessError, World, WorldSpec, EPOCH};

pub const MB: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncRow {
    pub size_bytes: usize,
    pub reps: usize,
    pub mean_enc_ms: f64,
    pub sd_enc_ms: f64,
    pub mean_dec_ms: f64,
    pub sd_dec_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommRow {
    pub n_doctors: usize,
    pub record_size_bytes: usize,
    /// Masked entry plus every grant transaction.
    pub patient_bytes: usize,
    pub masked_entry_bytes: usize,
    pub grant_tx_bytes: usize,
    /// Every release sent back to a grantee.
    pub hospital_bytes: usize,
    pub release_bytes_each: usize,
    pub request_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub n_patients: usize,
    pub rounds: usize,
    pub block_seal_latency_ms: u64,
    pub mean_ms: f64,
    pub sd_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// True when every value is at least the one before it.
pub fn is_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0])
}

/// Times symmetric encryption and decryption of random bodies, `reps`
/// times per size. Sizes must be nonzero and strictly ascending.
pub fn bench_encryption(sizes: &[usize], reps: usize, seed: u64) -> Result<Vec<EncRow>, HarnessError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::InvalidConfig("sizes must be nonempty and at least 1 byte".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::InvalidConfig("sizes must be strictly ascending".into()));
    }
    if reps == 0 {
        return Err(HarnessError::InvalidConfig("reps must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut body = vec![0u8; size];
        rng.fill_bytes(&mut body);
        let key = SymmetricKey::random(&mut rng);

        let warm = sym_encrypt(&key, &body, &mut rng);
        let back = sym_decrypt(&key, &warm).map_err(|e| HarnessError::phase("bench_enc", "E_DECRYPT", e))?;
        if back != body {
            return Err(HarnessError::phase("bench_enc", "E_BODY_MISMATCH", format!("size {size}")));
        }
        drop((warm, back));

        let (mut enc, mut dec) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
        for _ in 0..reps {
            let t = Instant::now();
            let ct = sym_encrypt(&key, &body, &mut rng);
            enc.push(t.elapsed().as_secs_f64() * 1e3);
            let t = Instant::now();
            let pt = sym_decrypt(&key, &ct).map_err(|e| HarnessError::phase("bench_enc", "E_DECRYPT", e))?;
            dec.push(t.elapsed().as_secs_f64() * 1e3);
            if pt.len() != size {
                return Err(HarnessError::phase("bench_enc", "E_BODY_MISMATCH", format!("size {size}")));
            }
        }
        let (mean_enc_ms, sd_enc_ms) = mean_sd(&enc);
        let (mean_dec_ms, sd_dec_ms) = mean_sd(&dec);
        rows.push(EncRow { size_bytes: size, reps, mean_enc_ms, sd_enc_ms, mean_dec_ms, sd_dec_ms });
    }
    Ok(rows)
}

/// For each `n`, one record shared with `n` doctors who all retrieve it.
/// Byte counts are lengths of the serialized messages.
pub fn bench_communication(
    doctor_counts: &[usize],
    record_size: usize,
    seed: u64,
) -> Result<Vec<CommRow>, HarnessError> {
    if record_size == 0 {
        return Err(HarnessError::InvalidConfig("record size must be at least 1 byte".into()));
    }
    let mut rows = Vec::with_capacity(doctor_counts.len());
    for &n in doctor_counts {
        let spec = WorldSpec { seed, n_doctors: n + 1, ..WorldSpec::default() };
        let mut world = World::build(&spec)?;
        let mut body = vec![0u8; record_size];
        world.rng.fill_bytes(&mut body);
        let deposit = world.consult(0, 0, body.clone(), "consultation", None)?;
        let mut grant_tx_bytes = 0;
        let mut hospital_bytes = 0;
        let mut release_bytes_each = 0;
        let mut request_bytes = 0;
        for grantee in 1..=n {
            let (grant_tx, bytes) = world.share(0, &deposit.tx_id, grantee)?;
            grant_tx_bytes += bytes;
            let got = world.retrieve(grantee, &grant_tx)?;
            if got.body != body {
                return Err(HarnessError::phase("recover", "E_BODY_MISMATCH", format!("grantee {grantee}")));
            }
            hospital_bytes += got.release_bytes;
            release_bytes_each = got.release_bytes;
            request_bytes += got.request_bytes;
        }
        rows.push(CommRow {
            n_doctors: n,
            record_size_bytes: record_size,
            patient_bytes: deposit.entry_bytes + grant_tx_bytes,
            masked_entry_bytes: deposit.entry_bytes,
            grant_tx_bytes,
            hospital_bytes,
            release_bytes_each,
            request_bytes,
        });
    }
    Ok(rows)
}

/// Checks that patient bytes grow by one constant grant size per doctor and
/// hospital bytes by one constant release size.
pub fn comm_is_additive(rows: &[CommRow]) -> bool {
    let Some(first) = rows.iter().find(|r| r.n_doctors > 0) else {
        return true;
    };
    let grant_each = first.grant_tx_bytes / first.n_doctors;
    let release_each = first.release_bytes_each;
    rows.iter().all(|r| {
        r.masked_entry_bytes == first.masked_entry_bytes
            && r.grant_tx_bytes == r.n_doctors * grant_each
            && r.patient_bytes == r.masked_entry_bytes + r.n_doctors * grant_each
            && r.hospital_bytes == r.n_doctors * release_each
    })
}

enum HospitalMsg {
    Store { entry: MaskedIndexEntry, chr: Ciphertext, now: Timestamp, reply: mpsc::Sender<Result<(), StoreError>> },
    Access { req: Box<AccessRequest>, now: Timestamp, reply: mpsc::Sender<Result<Release, StoreError>> },
}

fn serve(mut store: HospitalStore, ha_pk: GroupPoint, inbox: mpsc::Receiver<HospitalMsg>) {
    for msg in inbox {
        match msg {
            HospitalMsg::Store { entry, chr, now, reply } => {
                let _ = reply.send(store.store_record(entry, chr, now, None));
            }
            HospitalMsg::Access { req, now, reply } => {
                let _ = reply.send(store.handle_access_request(&req, &ha_pk, now));
            }
        }
    }
}

struct Consult<'a> {
    authority: &'a HealthAuthority,
    ledger: &'a Mutex<Ledger>,
    hospital: mpsc::Sender<HospitalMsg>,
    hospital_id: String,
    now: Timestamp,
}

impl Consult<'_> {
    /// One full consult: create, deposit, grant, accept, request, recover.
    fn run(
        &self,
        patient: &mut Patient,
        creator: &mut Doctor,
        grantee: &mut Doctor,
        body: Vec<u8>,
        rng: &mut ChaCha20Rng,
    ) -> Result<(), HarnessError> {
        let lock = || self.ledger.lock().expect("ledger lock");
        let record = HealthRecord {
            patient_ref: patient.identity().id.clone(),
            body: body.clone(),
            created_at: self.now,
            record_type: "consultation".into(),
        };
        let anchored = creator
            .create_and_anchor_record(self.authority, &record, rng, &mut lock())
            .map_err(|e| HarnessError::phase("create_anchor", e.code(), e))?;
        let params = lock().params().clone();

        let (entry, _) = patient
            .derive_masked_entry(&params, &self.hospital_id, self.now, &anchored.tx_id, &anchored.key, rng)
            .map_err(|e| HarnessError::phase("mask_store", e.code(), e))?;
        let (tx, rx) = mpsc::channel();
        let msg = HospitalMsg::Store { entry, chr: anchored.encrypted.ciphertext, now: self.now, reply: tx };
        self.hospital.send(msg).map_err(|e| HarnessError::phase("mask_store", "E_CHANNEL", e))?;
        rx.recv()
            .map_err(|e| HarnessError::phase("mask_store", "E_CHANNEL", e))?
            .map_err(|e| HarnessError::phase("mask_store", e.code(), e))?;

        let (_, grant_tx) = patient
            .grant_access(&grantee.tag_pub(), &grantee.pk_enc(), &anchored.tx_id, self.now, rng, &mut lock())
            .map_err(|e| HarnessError::phase("grant", e.code(), e))?;
        let payload =
            lock().get_transaction(&grant_tx).map_err(|e| HarnessError::phase("accept", e.code(), e))?.payload;
        let grant = ReshareGrant::from_payload(&payload).map_err(|e| HarnessError::phase("accept", e.code(), e))?;
        let pass = grantee.accept_grant(&params, &grant).map_err(|e| HarnessError::phase("accept", e.code(), e))?;

        let req = grantee
            .build_access_request(&params, &pass, rng)
            .map_err(|e| HarnessError::phase("request_release", e.code(), e))?;
        let w = req.w;
        let (tx, rx) = mpsc::channel();
        self.hospital
            .send(HospitalMsg::Access { req: Box::new(req), now: self.now, reply: tx })
            .map_err(|e| HarnessError::phase("request_release", "E_CHANNEL", e))?;
        let release = rx
            .recv()
            .map_err(|e| HarnessError::phase("request_release", "E_CHANNEL", e))?
            .map_err(|e| HarnessError::phase("request_release", e.code(), e))?;

        let recovered =
            grantee.recover(&w, &release, &lock()).map_err(|e| HarnessError::phase("recover", e.code(), e))?;
        if recovered != body {
            return Err(HarnessError::phase("recover", "E_BODY_MISMATCH", "recovered body differs"));
        }
        Ok(())
    }
}

/// For each `n`, runs `n` concurrent patients through a full consult
/// against one hospital store served by its own thread, `rounds` times.
/// Each patient's latency runs from a common start barrier to recovery.
pub fn bench_latency(
    patient_counts: &[usize],
    seal_latency_ms: u64,
    record_size: usize,
    rounds: usize,
    seed: u64,
) -> Result<Vec<LatencyRow>, HarnessError> {
    if patient_counts.contains(&0) || rounds == 0 || record_size == 0 {
        return Err(HarnessError::InvalidConfig("patient counts, rounds and record size must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(patient_counts.len());
    for &n in patient_counts {
        let mut samples = Vec::with_capacity(n * rounds);
        for round in 0..rounds {
            let spec = WorldSpec {
                seed: seed ^ ((n as u64) << 32) ^ round as u64,
                n_doctors: 2 * n,
                n_patients: n,
                ledger: LedgerConfig { seal_latency_ms, ..LedgerConfig::default() },
                ..WorldSpec::default()
            };
            samples.extend(latency_round(World::build(&spec)?, record_size, spec.seed)?);
        }
        let (mean_ms, sd_ms) = mean_sd(&samples);
        rows.push(LatencyRow {
            n_patients: n,
            rounds,
            block_seal_latency_ms: seal_latency_ms,
            mean_ms,
            sd_ms,
            min_ms: samples.iter().cloned().fold(f64::INFINITY, f64::min),
            max_ms: samples.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

fn latency_round(world: World, record_size: usize, seed: u64) -> Result<Vec<f64>, HarnessError> {
    let World { authority, ledger, mut hospitals, doctors, patients, .. } = world;
    let n = patients.len();
    let store = hospitals.remove(0);
    let hospital_id = store.hospital_id();
    let ha_pk = authority.public_key().map_err(|e| HarnessError::phase("setup", e.code(), e))?;
    let ledger = Mutex::new(ledger);
    let barrier = Barrier::new(n);
    let (to_hospital, inbox) = mpsc::channel();

    let mut doctors = doctors.into_iter();
    let actors: Vec<(Patient, Doctor, Doctor)> = patients
        .into_iter()
        .map(|p| {
            (p, doctors.next().expect("two doctors per patient"), doctors.next().expect("two doctors per patient"))
        })
        .collect();

    let results: Vec<Result<f64, HarnessError>> = std::thread::scope(|s| {
        s.spawn(move || serve(store, ha_pk, inbox));
        let handles: Vec<_> = actors
            .into_iter()
            .enumerate()
            .map(|(i, (mut patient, mut creator, mut grantee))| {
                let consult = Consult {
                    authority: &authority,
                    ledger: &ledger,
                    hospital: to_hospital.clone(),
                    hospital_id: hospital_id.clone(),
                    now: EPOCH + 1,
                };
                let barrier = &barrier;
                s.spawn(move || {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(1 + i as u64));
                    let mut body = vec![0u8; record_size];
                    rng.fill_bytes(&mut body);
                    barrier.wait();
                    let start = Instant::now();
                    consult.run(&mut patient, &mut creator, &mut grantee, body, &mut rng)?;
                    Ok(start.elapsed().as_secs_f64() * 1e3)
                })
            })
            .collect();
        drop(to_hospital);
        handles.into_iter().map(|h| h.join().expect("patient thread panicked")).collect()
    });
    results.into_iter().collect()
}
