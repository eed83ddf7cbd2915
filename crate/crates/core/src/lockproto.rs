//! The end-to-end smart-lock protocol: keyholder client builds
//! passkey -> encrypt -> embed -> send; the lock controller extracts,
//! decrypts, validates and actuates a simulated lock.
//!
//! Four protocol modes exist so the adversary module can demonstrate how
//! each degrades: PLAINTEXT, CRYPTO_ONLY, STEGO_ONLY and the default
//! STEGO_CRYPTO. The controller never stores the raw passkey, only a
//! SHA-256 digest compared in constant time.

use crate::cipher::{ccm_open, ccm_seal, CipherEnvelope, SecretKey128};
use crate::error::{Error, Result};
use crate::stego::{self, RgbImage};
use crate::transport::{Frame, FrameKind};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

/// UTF-8 passkey, 4..=64 octets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passkey(String);

impl Passkey {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let n = text.len();
        if !(4..=64).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "passkey must be 4..=64 bytes, got {n}"
            )));
        }
        Ok(Passkey(text))
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.as_bytes()).into()
    }
}

/// Which security layers wrap the passkey on the wire.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolMode {
    Plaintext,
    CryptoOnly,
    StegoOnly,
    #[default]
    StegoCrypto,
}

impl std::str::FromStr for ProtocolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "plaintext" => ProtocolMode::Plaintext,
            "crypto-only" => ProtocolMode::CryptoOnly,
            "stego-only" => ProtocolMode::StegoOnly,
            "stego-crypto" => ProtocolMode::StegoCrypto,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown mode {other:?}; expected plaintext, crypto-only, stego-only or stego-crypto"
                )))
            }
        })
    }
}

impl std::fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProtocolMode::Plaintext => "plaintext",
            ProtocolMode::CryptoOnly => "crypto-only",
            ProtocolMode::StegoOnly => "stego-only",
            ProtocolMode::StegoCrypto => "stego-crypto",
        };
        f.write_str(s)
    }
}

/// Persistent pairing between one keyholder and one lock: the pre-shared
/// app key plus the digest of the valid passkey.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrollmentRecord {
    pub key_hex: String,
    pub passkey_digest_hex: String,
    pub mode: ProtocolMode,
    pub relock_after_s: f64,
}

impl EnrollmentRecord {
    pub fn shared_key(&self) -> Result<SecretKey128> {
        SecretKey128::from_hex(&self.key_hex)
    }

    pub fn passkey_digest(&self) -> Result<[u8; 32]> {
        let bytes = hex::decode(&self.passkey_digest_hex)
            .map_err(|e| Error::InvalidInput(format!("bad digest hex: {e}")))?;
        bytes
            .try_into()
            .map_err(|_| Error::InvalidInput("digest must be 32 bytes".into()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Generate the pre-shared key and store the passkey digest.
pub fn enroll(
    passkey: &Passkey,
    mode: ProtocolMode,
    relock_after_s: f64,
    rng: &mut impl RngCore,
) -> EnrollmentRecord {
    EnrollmentRecord {
        key_hex: SecretKey128::random(rng).to_hex(),
        passkey_digest_hex: hex::encode(passkey.digest()),
        mode,
        relock_after_s,
    }
}

/// Simulated actuator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LockState {
    Locked,
    Unlocked { unlocked_at_s: f64 },
}

/// One line of the append-only audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub timestamp_s: f64,
    pub kind: AuditKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counter: Option<u64>,
    pub mode: ProtocolMode,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    UnlockGranted,
    UnlockDenied,
    AuthFailure,
    Replay,
    Malformed,
    Relock,
    NotEnrolled,
}

/// Controller's verdict on one unlock request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnlockDecision {
    Granted,
    Denied(DenyReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    WrongPasskey,
    AuthFailure,
    Replay,
    Malformed,
    NotEnrolled,
}

impl UnlockDecision {
    pub fn granted(&self) -> bool {
        matches!(self, UnlockDecision::Granted)
    }
}

/// Keyholder side: turns a passkey into a frame per the configured mode.
pub struct UnlockClient {
    key: SecretKey128,
    mode: ProtocolMode,
    counter: u64,
}

impl UnlockClient {
    pub fn new(key: SecretKey128, mode: ProtocolMode) -> Self {
        UnlockClient {
            key,
            mode,
            counter: 0,
        }
    }

    pub fn from_enrollment(record: &EnrollmentRecord) -> Result<Self> {
        Ok(UnlockClient::new(record.shared_key()?, record.mode))
    }

    pub fn mode(&self) -> ProtocolMode {
        self.mode
    }

    pub fn next_counter(&self) -> u64 {
        self.counter.wrapping_add(1)
    }

    /// Build the unlock request frame. Stego modes require a cover image
    /// with enough capacity; the counter advances only on success.
    pub fn unlock_frame(&mut self, passkey: &Passkey, cover: Option<&RgbImage>) -> Result<Frame> {
        if self.counter == u64::MAX {
            return Err(Error::CounterExhausted);
        }
        let counter = self.counter + 1;
        let frame = match self.mode {
            ProtocolMode::Plaintext => {
                Frame::new(FrameKind::PlaintextUnlock, passkey.as_bytes().to_vec())?
            }
            ProtocolMode::CryptoOnly => {
                let envelope = ccm_seal(&self.key, counter, passkey.as_bytes())?;
                Frame::new(FrameKind::SignedData, envelope.to_bytes())?
            }
            ProtocolMode::StegoOnly => {
                let cover = require_cover(cover)?;
                let stego_img = stego::embed(cover, passkey.as_bytes())?;
                Frame::new(FrameKind::StegoImage, stego_img.to_png_bytes()?)?
            }
            ProtocolMode::StegoCrypto => {
                let cover = require_cover(cover)?;
                let envelope = ccm_seal(&self.key, counter, passkey.as_bytes())?;
                let stego_img = stego::embed(cover, &envelope.to_bytes())?;
                Frame::new(FrameKind::StegoImage, stego_img.to_png_bytes()?)?
            }
        };
        self.counter = counter;
        Ok(frame)
    }
}

fn require_cover(cover: Option<&RgbImage>) -> Result<&RgbImage> {
    cover.ok_or_else(|| Error::InvalidInput("stego mode requires a cover image".into()))
}

/// Lock side: decodes frames per mode, decides, actuates, audits.
pub struct Controller {
    enrollment: Option<EnrollmentRecord>,
    key: Option<SecretKey128>,
    digest: Option<[u8; 32]>,
    last_counter: u64,
    lock: LockState,
    audit: Vec<AuditEntry>,
    audit_path: Option<PathBuf>,
    last_timestamp_s: f64,
}

impl Controller {
    pub fn new(enrollment: Option<EnrollmentRecord>) -> Result<Self> {
        let (key, digest) = match &enrollment {
            Some(rec) => (Some(rec.shared_key()?), Some(rec.passkey_digest()?)),
            None => (None, None),
        };
        Ok(Controller {
            enrollment,
            key,
            digest,
            last_counter: 0,
            lock: LockState::Locked,
            audit: Vec::new(),
            audit_path: None,
            last_timestamp_s: 0.0,
        })
    }

    /// Mirror every audit entry to a JSON-lines file, one entry per line.
    pub fn set_audit_path(&mut self, path: impl Into<PathBuf>) {
        self.audit_path = Some(path.into());
    }

    /// Override the app-layer key, e.g. with a pairing-derived LTK.
    pub fn set_session_key(&mut self, key: SecretKey128) {
        self.key = Some(key);
    }

    pub fn lock_state(&self) -> LockState {
        self.lock
    }

    pub fn last_counter(&self) -> u64 {
        self.last_counter
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn mode(&self) -> ProtocolMode {
        self.enrollment.as_ref().map(|e| e.mode).unwrap_or_default()
    }

    fn relock_after_s(&self) -> f64 {
        self.enrollment
            .as_ref()
            .map(|e| e.relock_after_s)
            .unwrap_or(5.0)
    }

    fn append_audit(&mut self, now_s: f64, kind: AuditKind, counter: Option<u64>, source: &str) {
        // Audit timestamps never run backwards, whatever clock the caller
        // hands us.
        let timestamp_s = now_s.max(self.last_timestamp_s);
        self.last_timestamp_s = timestamp_s;
        let entry = AuditEntry {
            timestamp_s,
            kind,
            counter,
            mode: self.mode(),
            source: source.to_string(),
        };
        if let Some(path) = &self.audit_path {
            if let Ok(mut file) = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
            {
                if let Ok(line) = serde_json::to_string(&entry) {
                    let _ = writeln!(file, "{line}");
                }
            }
        }
        self.audit.push(entry);
    }

    /// Handle one unlock request frame. Exactly one audit entry per call.
    pub fn handle_frame(&mut self, frame: &Frame, now_s: f64, source: &str) -> UnlockDecision {
        let decision = self.decide(frame);
        let (kind, counter) = match decision {
            UnlockDecision::Granted => (AuditKind::UnlockGranted, Some(self.last_counter)),
            UnlockDecision::Denied(DenyReason::WrongPasskey) => (AuditKind::UnlockDenied, None),
            UnlockDecision::Denied(DenyReason::AuthFailure) => (AuditKind::AuthFailure, None),
            UnlockDecision::Denied(DenyReason::Replay) => (AuditKind::Replay, None),
            UnlockDecision::Denied(DenyReason::Malformed) => (AuditKind::Malformed, None),
            UnlockDecision::Denied(DenyReason::NotEnrolled) => (AuditKind::NotEnrolled, None),
        };
        if decision.granted() {
            self.lock = LockState::Unlocked {
                unlocked_at_s: now_s,
            };
        }
        self.append_audit(now_s, kind, counter, source);
        decision
    }

    fn decide(&mut self, frame: &Frame) -> UnlockDecision {
        let (Some(key), Some(digest)) = (self.key.clone(), self.digest) else {
            return UnlockDecision::Denied(DenyReason::NotEnrolled);
        };
        let mode = self.mode();
        let expected_kind = match mode {
            ProtocolMode::Plaintext => FrameKind::PlaintextUnlock,
            ProtocolMode::CryptoOnly => FrameKind::SignedData,
            ProtocolMode::StegoOnly | ProtocolMode::StegoCrypto => FrameKind::StegoImage,
        };
        if frame.kind != expected_kind {
            return UnlockDecision::Denied(DenyReason::Malformed);
        }

        // Peel the stego layer if present.
        let inner: Vec<u8> = match mode {
            ProtocolMode::Plaintext | ProtocolMode::CryptoOnly => frame.payload.clone(),
            ProtocolMode::StegoOnly | ProtocolMode::StegoCrypto => {
                let image = match RgbImage::decode_png(&frame.payload[..]) {
                    Ok(img) => img,
                    Err(_) => return UnlockDecision::Denied(DenyReason::Malformed),
                };
                match stego::extract(&image) {
                    Ok(bytes) => bytes,
                    Err(_) => return UnlockDecision::Denied(DenyReason::Malformed),
                }
            }
        };

        // Peel the cipher layer if present.
        let passkey_bytes: Vec<u8> = match mode {
            ProtocolMode::Plaintext | ProtocolMode::StegoOnly => inner,
            ProtocolMode::CryptoOnly | ProtocolMode::StegoCrypto => {
                let envelope = match CipherEnvelope::from_bytes(&inner) {
                    Ok(env) => env,
                    Err(_) => return UnlockDecision::Denied(DenyReason::Malformed),
                };
                let plain = match ccm_open(&key, &envelope) {
                    Ok(p) => p,
                    Err(_) => return UnlockDecision::Denied(DenyReason::AuthFailure),
                };
                if envelope.counter <= self.last_counter {
                    return UnlockDecision::Denied(DenyReason::Replay);
                }
                self.last_counter = envelope.counter;
                plain
            }
        };

        if constant_time_digest_match(&digest, &passkey_bytes) {
            UnlockDecision::Granted
        } else {
            UnlockDecision::Denied(DenyReason::WrongPasskey)
        }
    }

    /// Advance the relock timer. Fires at most once per grant.
    pub fn relock_tick(&mut self, now_s: f64) -> LockState {
        if let LockState::Unlocked { unlocked_at_s } = self.lock {
            if now_s >= unlocked_at_s + self.relock_after_s() {
                self.lock = LockState::Locked;
                self.append_audit(now_s, AuditKind::Relock, None, "timer");
            }
        }
        self.lock
    }

    /// UNLOCK_RESULT frame for the peer: payload `[1]` granted, `[0]` denied.
    pub fn result_frame(decision: UnlockDecision) -> Frame {
        Frame::new(FrameKind::UnlockResult, vec![decision.granted() as u8])
            .expect("one-byte payload")
    }
}

/// Full-length comparison independent of where a mismatch occurs.
fn constant_time_digest_match(expected: &[u8; 32], passkey_bytes: &[u8]) -> bool {
    let actual: [u8; 32] = Sha256::digest(passkey_bytes).into();
    let mut diff = 0u8;
    for (a, b) in expected.iter().zip(actual.iter()) {
        diff |= a ^ b;
    }
    diff == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cover(rng: &mut impl RngCore) -> RgbImage {
        let mut pixels = vec![0u8; 64 * 64 * 3];
        rng.fill_bytes(&mut pixels);
        RgbImage::new(64, 64, pixels).unwrap()
    }

    fn setup(mode: ProtocolMode, seed: u64) -> (UnlockClient, Controller, Passkey, RgbImage) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let passkey = Passkey::new("sesame-42").unwrap();
        let record = enroll(&passkey, mode, 5.0, &mut rng);
        let client = UnlockClient::from_enrollment(&record).unwrap();
        let controller = Controller::new(Some(record)).unwrap();
        let cover = cover(&mut rng);
        (client, controller, passkey, cover)
    }

    #[test]
    fn passkey_length_bounds() {
        assert!(Passkey::new("abc").is_err());
        assert!(Passkey::new("abcd").is_ok());
        assert!(Passkey::new("x".repeat(64)).is_ok());
        assert!(Passkey::new("x".repeat(65)).is_err());
    }

    #[test]
    fn honest_unlock_every_mode() {
        for mode in [
            ProtocolMode::Plaintext,
            ProtocolMode::CryptoOnly,
            ProtocolMode::StegoOnly,
            ProtocolMode::StegoCrypto,
        ] {
            let (mut client, mut controller, passkey, cover) = setup(mode, 20);
            let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
            let decision = controller.handle_frame(&frame, 1.0, "client");
            assert!(decision.granted(), "mode {mode}");
            assert!(matches!(
                controller.lock_state(),
                LockState::Unlocked { .. }
            ));
            assert_eq!(
                controller.audit().last().unwrap().kind,
                AuditKind::UnlockGranted
            );
        }
    }

    #[test]
    fn stego_crypto_output_differs_only_in_lsbs() {
        let (mut client, _controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 21);
        let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
        let sent = RgbImage::decode_png(&frame.payload[..]).unwrap();
        let stats = stego::measure(&cover, &sent).unwrap();
        assert!(stats.max_channel_delta <= 1);
    }

    #[test]
    fn replayed_frame_denied_with_replay_audit() {
        let (mut client, mut controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 22);
        let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
        assert!(controller.handle_frame(&frame, 1.0, "client").granted());
        let replay = controller.handle_frame(&frame, 2.0, "attacker");
        assert_eq!(replay, UnlockDecision::Denied(DenyReason::Replay));
        assert_eq!(controller.audit().last().unwrap().kind, AuditKind::Replay);
    }

    #[test]
    fn wrong_passkey_denied_full_length_compare() {
        let (mut client, mut controller, _passkey, cover) = setup(ProtocolMode::StegoCrypto, 23);
        let wrong = Passkey::new("sesame-43").unwrap();
        let frame = client.unlock_frame(&wrong, Some(&cover)).unwrap();
        let decision = controller.handle_frame(&frame, 1.0, "client");
        assert_eq!(decision, UnlockDecision::Denied(DenyReason::WrongPasskey));
        assert_eq!(
            controller.audit().last().unwrap().kind,
            AuditKind::UnlockDenied
        );
    }

    #[test]
    fn tampered_envelope_is_auth_failure() {
        let (mut client, mut controller, passkey, _cover) = setup(ProtocolMode::CryptoOnly, 24);
        let mut frame = client.unlock_frame(&passkey, None).unwrap();
        let last = frame.payload.len() - 1;
        frame.payload[last] ^= 0x01;
        let decision = controller.handle_frame(&frame, 1.0, "attacker");
        assert_eq!(decision, UnlockDecision::Denied(DenyReason::AuthFailure));
        assert_eq!(
            controller.audit().last().unwrap().kind,
            AuditKind::AuthFailure
        );
    }

    #[test]
    fn not_enrolled_denies_everything() {
        let mut controller = Controller::new(None).unwrap();
        let frame = Frame::new(FrameKind::PlaintextUnlock, b"sesame-42".to_vec()).unwrap();
        let decision = controller.handle_frame(&frame, 0.5, "client");
        assert_eq!(decision, UnlockDecision::Denied(DenyReason::NotEnrolled));
        assert_eq!(
            controller.audit().last().unwrap().kind,
            AuditKind::NotEnrolled
        );
    }

    #[test]
    fn cover_too_small_errors_before_any_frame() {
        let (mut client, _controller, passkey, _cover) = setup(ProtocolMode::StegoCrypto, 25);
        let tiny = RgbImage::filled(2, 2, [0; 3]).unwrap();
        assert!(matches!(
            client.unlock_frame(&passkey, Some(&tiny)),
            Err(Error::Capacity { .. })
        ));
        // Counter did not advance on the failed attempt.
        assert_eq!(client.next_counter(), 1);
    }

    #[test]
    fn relock_fires_once_at_deadline() {
        let (mut client, mut controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 26);
        let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
        controller.handle_frame(&frame, 10.0, "client");
        assert!(matches!(
            controller.relock_tick(12.0),
            LockState::Unlocked { .. }
        ));
        assert!(matches!(controller.relock_tick(15.0), LockState::Locked));
        let relocks = controller
            .audit()
            .iter()
            .filter(|e| e.kind == AuditKind::Relock)
            .count();
        assert_eq!(relocks, 1);
        // Further ticks while locked are no-ops.
        controller.relock_tick(20.0);
        assert_eq!(
            controller
                .audit()
                .iter()
                .filter(|e| e.kind == AuditKind::Relock)
                .count(),
            1
        );
    }

    #[test]
    fn audit_count_matches_handled_frames() {
        let (mut client, mut controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 27);
        let mut handled = 0;
        for i in 0..5 {
            let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
            controller.handle_frame(&frame, i as f64, "client");
            handled += 1;
        }
        let non_relock = controller
            .audit()
            .iter()
            .filter(|e| e.kind != AuditKind::Relock)
            .count();
        assert_eq!(non_relock, handled);
    }

    #[test]
    fn grants_are_strictly_counter_increasing() {
        let (mut client, mut controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 28);
        let mut last = 0;
        for i in 0..4 {
            let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
            assert!(controller
                .handle_frame(&frame, i as f64, "client")
                .granted());
            assert!(controller.last_counter() > last);
            last = controller.last_counter();
        }
    }

    #[test]
    fn enrollment_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let passkey = Passkey::new("hunter2!").unwrap();
        let record = enroll(&passkey, ProtocolMode::StegoCrypto, 7.5, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enrollment.json");
        record.save(&path).unwrap();
        let loaded = EnrollmentRecord::load(&path).unwrap();
        assert_eq!(loaded.key_hex, record.key_hex);
        assert_eq!(loaded.passkey_digest_hex, record.passkey_digest_hex);
        assert_eq!(loaded.mode, record.mode);
        assert_eq!(loaded.relock_after_s, record.relock_after_s);
    }

    #[test]
    fn different_seeds_different_keys() {
        let passkey = Passkey::new("hunter2!").unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = enroll(&passkey, ProtocolMode::StegoCrypto, 5.0, &mut r1);
        let b = enroll(&passkey, ProtocolMode::StegoCrypto, 5.0, &mut r2);
        assert_ne!(a.key_hex, b.key_hex);
    }

    #[test]
    fn audit_jsonl_file_one_entry_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        let (mut client, mut controller, passkey, cover) = setup(ProtocolMode::StegoCrypto, 31);
        controller.set_audit_path(&path);
        let frame = client.unlock_frame(&passkey, Some(&cover)).unwrap();
        controller.handle_frame(&frame, 1.0, "client");
        controller.handle_frame(&frame, 2.0, "attacker");
        let text = std::fs::read_to_string(&path).unwrap();
        let entries: Vec<AuditEntry> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].kind, AuditKind::UnlockGranted);
        assert_eq!(entries[1].kind, AuditKind::Replay);
    }
}
