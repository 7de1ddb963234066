use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::Digest;
use crate::hospital_store::{HospitalStore, Release};
use crate::ledger::{Ledger, LedgerConfig, TxId};
use crate::record_exchange::{
    AnchoredRecord, AuthorizationPass, Doctor, HealthRecord, Patient, PatientConfig, ReshareGrant,
};
use crate::registry::{register_doctor, HealthAuthority, ParticipantId, Role, SetupConfig, Validity};
use crate::{crypto::SystemParams, Timestamp};

use super::HarnessError;

/// Simulated start of time for every world.
pub const EPOCH: Timestamp = 1_700_000_000;

#[derive(Debug, Clone)]
pub struct WorldSpec {
    pub seed: u64,
    pub n_hospitals: usize,
    pub n_doctors: usize,
    pub n_patients: usize,
    pub ledger: LedgerConfig,
    pub patient: PatientConfig,
    pub setup: SetupConfig,
    /// Certificate lifetime from [`EPOCH`].
    pub cert_validity_secs: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 0,
            n_hospitals: 1,
            n_doctors: 2,
            n_patients: 1,
            ledger: LedgerConfig::default(),
            patient: PatientConfig::default(),
            setup: SetupConfig::default(),
            cert_validity_secs: 365 * 24 * 3600,
        }
    }
}

/// Every actor of one simulated deployment, fully enrolled.
///
/// Doctor `i` and patient `i` belong to hospital `i % n_hospitals`.
#[derive(Debug)]
pub struct World {
    pub params: SystemParams,
    pub authority: HealthAuthority,
    pub ledger: Ledger,
    pub hospitals: Vec<HospitalStore>,
    pub doctors: Vec<Doctor>,
    pub patients: Vec<Patient>,
    pub rng: ChaCha20Rng,
    clock: Timestamp,
}

impl World {
    pub fn build(spec: &WorldSpec) -> Result<World, HarnessError> {
        if spec.n_hospitals == 0 || spec.n_doctors == 0 || spec.n_patients == 0 {
            return Err(HarnessError::InvalidConfig("participant counts must be at least 1".into()));
        }
        let fail = |e: crate::registry::RegistryError| HarnessError::phase("registration", e.code(), e);
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        let mut authority = HealthAuthority::new();
        let (params, ha) =
            authority.system_setup(&spec.setup, &mut rng).map_err(|e| HarnessError::phase("setup", e.code(), e))?;
        let mut ledger = Ledger::new(params.clone(), spec.ledger.clone());
        ledger.create_account(&ha.enc_keypair.public);
        let m = spec.setup.authority.clone();

        let mut hospitals = Vec::with_capacity(spec.n_hospitals);
        for h in 0..spec.n_hospitals {
            let id = ParticipantId::hospital(&m, &format!("H{}", h + 1));
            let identity = authority.register_participant(Role::Hospital, id, &mut rng).map_err(fail)?;
            ledger.create_account(&identity.enc_keypair.public);
            hospitals.push(HospitalStore::new(params.clone(), identity));
        }

        let validity = Validity::new(EPOCH, EPOCH + spec.cert_validity_secs);
        let mut doctors = Vec::with_capacity(spec.n_doctors);
        for d in 0..spec.n_doctors {
            let hospital = format!("H{}", d % spec.n_hospitals + 1);
            let id = ParticipantId::member(&m, &hospital, &format!("D{}", d + 1));
            let identity = authority.register_participant(Role::Doctor, id, &mut rng).map_err(fail)?;
            ledger.create_account(&identity.enc_keypair.public);
            let enrollment = register_doctor(&params, &identity, &mut rng).map_err(fail)?;
            let cert = authority.issue_certificate(&enrollment.request(), validity, EPOCH, &mut rng).map_err(fail)?;
            let mut doctor = Doctor::new(identity, enrollment);
            doctor.install_certificate(cert);
            doctors.push(doctor);
        }

        let mut patients = Vec::with_capacity(spec.n_patients);
        for p in 0..spec.n_patients {
            let hospital = format!("H{}", p % spec.n_hospitals + 1);
            let id = ParticipantId::member(&m, &hospital, &format!("P{}", p + 1));
            let identity = authority.register_participant(Role::Patient, id, &mut rng).map_err(fail)?;
            ledger.create_account(&identity.enc_keypair.public);
            patients.push(Patient::new(identity, spec.patient));
        }

        Ok(World { params, authority, ledger, hospitals, doctors, patients, rng, clock: EPOCH })
    }

    /// Advances the simulated clock by one second and returns it.
    pub fn tick(&mut self) -> Timestamp {
        self.clock += 1;
        self.clock
    }

    pub fn now(&self) -> Timestamp {
        self.clock
    }

    pub fn advance(&mut self, secs: u64) -> Timestamp {
        self.clock += secs;
        self.clock
    }

    /// Index of the hospital a doctor or patient belongs to.
    pub fn hospital_of_patient(&self, patient: usize) -> usize {
        patient % self.hospitals.len()
    }

    pub fn hospital_of_doctor(&self, doctor: usize) -> usize {
        doctor % self.hospitals.len()
    }

    /// Doctors working at hospital `h`, in index order.
    pub fn doctors_at(&self, h: usize) -> Vec<usize> {
        (0..self.doctors.len()).filter(|d| self.hospital_of_doctor(*d) == h).collect()
    }
}

/// A record anchored on the ledger and deposited at its hospital.
#[derive(Debug, Clone)]
pub struct Deposit {
    pub patient: usize,
    pub doctor: usize,
    pub hospital: usize,
    pub tx_id: TxId,
    pub x_index: Digest,
    pub created_at: Timestamp,
    /// Serialized anchor transaction (doctor → chain).
    pub anchor_tx_bytes: usize,
    /// Serialized masked entry (patient → hospital).
    pub entry_bytes: usize,
    /// Ciphertext handed to the hospital (doctor → hospital).
    pub chr_bytes: usize,
}

/// Outcome of one grantee's access to a shared record.
#[derive(Debug, Clone)]
pub struct Retrieval {
    pub body: Vec<u8>,
    pub request_bytes: usize,
    pub release_bytes: usize,
}

impl World {
    pub fn hospital_index(&self, hospital_id: &str) -> Option<usize> {
        self.hospitals.iter().position(|h| h.hospital_id() == hospital_id)
    }

    /// Doctor encrypts and anchors a new record for the patient.
    pub fn anchor(
        &mut self,
        doctor: usize,
        patient: usize,
        body: Vec<u8>,
        record_type: &str,
    ) -> Result<AnchoredRecord, HarnessError> {
        let created_at = self.tick();
        let record = HealthRecord {
            patient_ref: self.patients[patient].identity().id.clone(),
            body,
            created_at,
            record_type: record_type.to_owned(),
        };
        self.doctors[doctor]
            .create_and_anchor_record(&self.authority, &record, &mut self.rng, &mut self.ledger)
            .map_err(|e| HarnessError::phase("create_anchor", e.code(), e))
    }

    /// Patient masks the anchor and key; the doctor's hospital stores the
    /// entry next to the ciphertext.
    pub fn deposit(
        &mut self,
        doctor: usize,
        patient: usize,
        anchored: &AnchoredRecord,
        retention: Option<u64>,
    ) -> Result<Deposit, HarnessError> {
        let fail = |code: &str, e: &dyn std::fmt::Display| HarnessError::phase("mask_store", code, e);
        let hospital = self.hospital_of_doctor(doctor);
        let hospital_id = self.hospitals[hospital].hospital_id();
        let (entry, _) = self.patients[patient]
            .derive_masked_entry(
                &self.params,
                &hospital_id,
                anchored.created_at,
                &anchored.tx_id,
                &anchored.key,
                &mut self.rng,
            )
            .map_err(|e| fail(e.code(), &e))?;
        let entry_bytes = entry.to_bytes().len();
        let x_index = entry.x_index;
        let chr = anchored.encrypted.ciphertext.clone();
        let chr_bytes = chr.len();
        let now = self.now();
        self.hospitals[hospital].store_record(entry, chr, now, retention).map_err(|e| fail(e.code(), &e))?;
        let anchor_tx_bytes = self.ledger.get_transaction_bytes(&anchored.tx_id).map_err(|e| fail(e.code(), &e))?.len();
        Ok(Deposit {
            patient,
            doctor,
            hospital,
            tx_id: anchored.tx_id,
            x_index,
            created_at: anchored.created_at,
            anchor_tx_bytes,
            entry_bytes,
            chr_bytes,
        })
    }

    /// Creates a record and deposits it in one step.
    pub fn consult(
        &mut self,
        doctor: usize,
        patient: usize,
        body: Vec<u8>,
        record_type: &str,
        retention: Option<u64>,
    ) -> Result<Deposit, HarnessError> {
        let anchored = self.anchor(doctor, patient, body, record_type)?;
        self.deposit(doctor, patient, &anchored, retention)
    }

    /// Patient broadcasts a grant of `record` to `grantee`. Returns the grant
    /// transaction id and its serialized size.
    pub fn share(&mut self, patient: usize, record: &TxId, grantee: usize) -> Result<(TxId, usize), HarnessError> {
        let now = self.tick();
        let (tag_pub, pk_enc) = (self.doctors[grantee].tag_pub(), self.doctors[grantee].pk_enc());
        let (_, tx_id) = self.patients[patient]
            .grant_access(&tag_pub, &pk_enc, record, now, &mut self.rng, &mut self.ledger)
            .map_err(|e| HarnessError::phase("grant", e.code(), e))?;
        let bytes =
            self.ledger.get_transaction_bytes(&tx_id).map_err(|e| HarnessError::phase("grant", e.code(), e))?.len();
        Ok((tx_id, bytes))
    }

    /// Grantee reads the grant back from the chain and opens it.
    pub fn accept(&mut self, grantee: usize, grant_tx: &TxId) -> Result<AuthorizationPass, HarnessError> {
        let fail = |code: &str, e: &dyn std::fmt::Display| HarnessError::phase("accept", code, e);
        let tx = self.ledger.get_transaction(grant_tx).map_err(|e| fail(e.code(), &e))?;
        let grant = ReshareGrant::from_payload(&tx.payload).map_err(|e| fail(e.code(), &e))?;
        self.doctors[grantee].accept_grant(&self.params, &grant).map_err(|e| fail(e.code(), &e))
    }

    /// Grantee sends ψ to the hospital named in the pass and gets the
    /// release back. Returns `(W, request bytes, release)`.
    pub fn request(
        &mut self,
        grantee: usize,
        pass: &AuthorizationPass,
    ) -> Result<(Digest, usize, Release), HarnessError> {
        let fail = |code: &str, e: &dyn std::fmt::Display| HarnessError::phase("request_release", code, e);
        let hospital = self
            .hospital_index(&pass.hospital_id)
            .ok_or_else(|| HarnessError::phase("request_release", "E_UNKNOWN_HOSPITAL", &pass.hospital_id))?;
        let req = self.doctors[grantee]
            .build_access_request(&self.params, pass, &mut self.rng)
            .map_err(|e| fail(e.code(), &e))?;
        let request_bytes = req.to_bytes().len();
        let ha_pk = self.authority.public_key().map_err(|e| fail(e.code(), &e))?;
        let now = self.tick();
        let release =
            self.hospitals[hospital].handle_access_request(&req, &ha_pk, now).map_err(|e| fail(e.code(), &e))?;
        Ok((req.w, request_bytes, release))
    }

    pub fn recover(&mut self, grantee: usize, w: &Digest, release: &Release) -> Result<Vec<u8>, HarnessError> {
        self.doctors[grantee].recover(w, release, &self.ledger).map_err(|e| HarnessError::phase("recover", e.code(), e))
    }

    /// accept → request → recover.
    pub fn retrieve(&mut self, grantee: usize, grant_tx: &TxId) -> Result<Retrieval, HarnessError> {
        let pass = self.accept(grantee, grant_tx)?;
        let (w, request_bytes, release) = self.request(grantee, &pass)?;
        let release_bytes = release.to_bytes().len();
        let body = self.recover(grantee, &w, &release)?;
        Ok(Retrieval { body, request_bytes, release_bytes })
    }
}
