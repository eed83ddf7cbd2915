//! Pluggable man-in-the-middle adversary: passive eavesdropping, active
//! key-substitution relay, tampering and replay, each producing a
//! structured [`AttackReport`] with ground-truth outcomes.
//!
//! The adversary only ever uses public interfaces: the wire formats, the
//! public stego extractor, and whatever keys it can observe or invent.
//! AES itself is never "broken"; the CRYPTO_ONLY weakness is modeled as
//! detectability plus an explicit key-leak switch, not key recovery.

use crate::cipher::{ccm_open, ccm_seal, CipherEnvelope, SecretKey128};
use crate::error::{Error, Result};
use crate::lockproto::{enroll, Controller, Passkey, ProtocolMode, UnlockClient, UnlockDecision};
use crate::pairing::{
    confirm_value, derive_stk, derive_tk, run_pairing, PairingConfig, PairingMethod, Role,
    SessionKeys,
};
use crate::stego::{self, RgbImage};
use crate::transport::{
    Channel, ChannelModel, Direction, Frame, FrameKind, Intercept, Interceptor,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

/// The attack taxonomy exercised against the lock protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackScenario {
    PassiveEavesdrop,
    ActiveKeySubstitution,
    Tamper,
    Replay,
}

impl std::str::FromStr for AttackScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "passive-eavesdrop" | "passive" => AttackScenario::PassiveEavesdrop,
            "active-key-substitution" | "active" => AttackScenario::ActiveKeySubstitution,
            "tamper" => AttackScenario::Tamper,
            "replay" => AttackScenario::Replay,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown scenario {other:?}; expected passive-eavesdrop, active-key-substitution, tamper or replay"
                )))
            }
        })
    }
}

impl std::fmt::Display for AttackScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AttackScenario::PassiveEavesdrop => "passive-eavesdrop",
            AttackScenario::ActiveKeySubstitution => "active-key-substitution",
            AttackScenario::Tamper => "tamper",
            AttackScenario::Replay => "replay",
        };
        f.write_str(s)
    }
}

/// Per-scenario outcome, compared against the honest transcript.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub scenario: AttackScenario,
    pub protocol_mode: ProtocolMode,
    pub passkey_recovered: bool,
    pub unlock_granted_to_attacker: bool,
    pub tampers_attempted: u32,
    pub tampers_detected: u32,
    pub stego_detected: bool,
}

/// Shared transcript of observed frames, in wire order.
pub type FrameLog = Arc<Mutex<Vec<(Direction, Frame)>>>;

/// Records every frame in both directions, forwarding untouched.
pub struct RecordingInterceptor {
    log: FrameLog,
}

impl RecordingInterceptor {
    pub fn new() -> (Self, FrameLog) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            RecordingInterceptor {
                log: Arc::clone(&log),
            },
            log,
        )
    }
}

impl Interceptor for RecordingInterceptor {
    fn on_frame(&mut self, direction: Direction, frame: Frame) -> Intercept {
        self.log.lock().unwrap().push((direction, frame.clone()));
        Intercept::Forward(frame)
    }
}

/// Run the public extractor against a STEGO_IMAGE frame. Detection means
/// the carrier held a well-formed payload; what the octets mean is the
/// cipher layer's problem.
pub fn steg_detect(frame: &Frame) -> Result<Option<Vec<u8>>> {
    if frame.kind != FrameKind::StegoImage {
        return Err(Error::InvalidInput(format!(
            "steg_detect expects a STEGO_IMAGE frame, got {:?}",
            frame.kind
        )));
    }
    let image = match RgbImage::decode_png(&frame.payload[..]) {
        Ok(img) => img,
        Err(_) => return Ok(None),
    };
    match stego::extract(&image) {
        Ok(bytes) => Ok(Some(bytes)),
        Err(Error::MalformedStego(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// What a wire observer can learn from one unlock frame, with no keys.
/// Returns (recovered passkey bytes if any, envelope if visible, stego hit).
fn observe_frame(
    frame: &Frame,
    mode: ProtocolMode,
) -> (Option<Vec<u8>>, Option<CipherEnvelope>, bool) {
    match mode {
        ProtocolMode::Plaintext => (Some(frame.payload.clone()), None, false),
        ProtocolMode::CryptoOnly => {
            let env = CipherEnvelope::from_bytes(&frame.payload).ok();
            (None, env, false)
        }
        ProtocolMode::StegoOnly => match steg_detect(frame) {
            Ok(Some(bytes)) => (Some(bytes), None, true),
            _ => (None, None, false),
        },
        ProtocolMode::StegoCrypto => match steg_detect(frame) {
            Ok(Some(bytes)) => {
                let env = CipherEnvelope::from_bytes(&bytes).ok();
                (None, env, true)
            }
            _ => (None, None, false),
        },
    }
}

struct Harness {
    client: UnlockClient,
    controller: Controller,
    passkey: Passkey,
    cover: RgbImage,
    rng: ChaCha8Rng,
    now_s: f64,
}

impl Harness {
    fn new(mode: ProtocolMode, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let passkey = Passkey::new("open-sesame").unwrap();
        let record = enroll(&passkey, mode, 5.0, &mut rng);
        let client = UnlockClient::from_enrollment(&record)?;
        let controller = Controller::new(Some(record))?;
        let mut pixels = vec![0u8; 48 * 48 * 3];
        rng.fill_bytes(&mut pixels);
        let cover = RgbImage::new(48, 48, pixels)?;
        Ok(Harness {
            client,
            controller,
            passkey,
            cover,
            rng,
            now_s: 0.0,
        })
    }

    fn honest_frame(&mut self) -> Result<Frame> {
        self.client.unlock_frame(&self.passkey, Some(&self.cover))
    }

    fn handle(&mut self, frame: &Frame, source: &str) -> UnlockDecision {
        self.now_s += 1.0;
        let now = self.now_s;
        self.controller.handle_frame(frame, now, source)
    }

    /// Forge an unlock frame from whatever the attacker has. Weak modes
    /// accept a recovered passkey verbatim; cipher modes force the
    /// attacker to seal under a key it invented.
    fn attacker_frame(
        &mut self,
        mode: ProtocolMode,
        recovered: Option<&[u8]>,
        seen_counter: Option<u64>,
    ) -> Result<Frame> {
        let attacker_key = SecretKey128::random(&mut self.rng);
        let body = recovered.unwrap_or(b"attacker-guess");
        match mode {
            ProtocolMode::Plaintext => Frame::new(FrameKind::PlaintextUnlock, body.to_vec()),
            ProtocolMode::StegoOnly => {
                let img = stego::embed(&self.cover, body)?;
                Frame::new(FrameKind::StegoImage, img.to_png_bytes()?)
            }
            ProtocolMode::CryptoOnly => {
                let env = ccm_seal(&attacker_key, seen_counter.unwrap_or(0) + 1, body)?;
                Frame::new(FrameKind::SignedData, env.to_bytes())
            }
            ProtocolMode::StegoCrypto => {
                let env = ccm_seal(&attacker_key, seen_counter.unwrap_or(0) + 1, body)?;
                let img = stego::embed(&self.cover, &env.to_bytes())?;
                Frame::new(FrameKind::StegoImage, img.to_png_bytes()?)
            }
        }
    }
}

/// Flip one random bit inside the security-relevant payload of a frame.
fn tamper_frame(frame: &Frame, mode: ProtocolMode, rng: &mut impl Rng) -> Result<Frame> {
    match mode {
        ProtocolMode::Plaintext | ProtocolMode::CryptoOnly => {
            let mut payload = frame.payload.clone();
            let bit = rng.gen_range(0..payload.len() * 8);
            payload[bit / 8] ^= 1 << (bit % 8);
            Frame::new(frame.kind, payload)
        }
        ProtocolMode::StegoOnly | ProtocolMode::StegoCrypto => {
            let image = RgbImage::decode_png(&frame.payload[..])
                .map_err(|_| Error::MalformedStego("tamper target is not a PNG".into()))?;
            let mut embedded = stego::extract(&image)?;
            if embedded.is_empty() {
                return Err(Error::MalformedStego("nothing embedded to tamper".into()));
            }
            let bit = rng.gen_range(0..embedded.len() * 8);
            embedded[bit / 8] ^= 1 << (bit % 8);
            let re_embedded = stego::embed(&image, &embedded)?;
            Frame::new(frame.kind, re_embedded.to_png_bytes()?)
        }
    }
}

/// Execute one attack scenario against a freshly enrolled client/controller
/// pair. Deterministic per seed. Failure to attack is an outcome, never an
/// error.
pub fn run_attack(scenario: AttackScenario, mode: ProtocolMode, seed: u64) -> Result<AttackReport> {
    let trials = match scenario {
        AttackScenario::Tamper => 1000,
        _ => 1,
    };
    run_attack_with(scenario, mode, seed, trials)
}

/// Like [`run_attack`] with an explicit tamper trial count.
pub fn run_attack_with(
    scenario: AttackScenario,
    mode: ProtocolMode,
    seed: u64,
    trials: u32,
) -> Result<AttackReport> {
    let mut harness = Harness::new(mode, seed)?;
    let mut report = AttackReport {
        scenario,
        protocol_mode: mode,
        passkey_recovered: false,
        unlock_granted_to_attacker: false,
        tampers_attempted: 0,
        tampers_detected: 0,
        stego_detected: false,
    };

    match scenario {
        AttackScenario::PassiveEavesdrop => {
            // Honest exchange, observed from the wire.
            let frame = harness.honest_frame()?;
            let honest = harness.handle(&frame, "client");
            debug_assert!(honest.granted());
            let (recovered, envelope, stego_hit) = observe_frame(&frame, mode);
            report.stego_detected = stego_hit;
            report.passkey_recovered = recovered.as_deref() == Some(harness.passkey.as_bytes());
            // The attacker now tries to unlock with what it learned.
            let forged =
                harness.attacker_frame(mode, recovered.as_deref(), envelope.map(|e| e.counter))?;
            report.unlock_granted_to_attacker = harness.handle(&forged, "attacker").granted();
        }
        AttackScenario::Replay => {
            let frame = harness.honest_frame()?;
            let honest = harness.handle(&frame, "client");
            debug_assert!(honest.granted());
            let (recovered, _, stego_hit) = observe_frame(&frame, mode);
            report.stego_detected = stego_hit;
            report.passkey_recovered = recovered.as_deref() == Some(harness.passkey.as_bytes());
            // Verbatim re-send of the previously granted frame.
            report.unlock_granted_to_attacker = harness.handle(&frame, "attacker").granted();
        }
        AttackScenario::Tamper => {
            for _ in 0..trials {
                let frame = harness.honest_frame()?;
                let (recovered, _, stego_hit) = observe_frame(&frame, mode);
                report.stego_detected |= stego_hit;
                report.passkey_recovered |=
                    recovered.as_deref() == Some(harness.passkey.as_bytes());
                let tampered = tamper_frame(&frame, mode, &mut harness.rng)?;
                report.tampers_attempted += 1;
                if harness.handle(&tampered, "attacker").granted() {
                    report.unlock_granted_to_attacker = true;
                } else {
                    report.tampers_detected += 1;
                }
            }
        }
        AttackScenario::ActiveKeySubstitution => {
            // Key-substitution relay against the enrolled pipeline: the attacker
            // interposes its own key material and re-authors the frame.
            let frame = harness.honest_frame()?;
            let (recovered, envelope, stego_hit) = observe_frame(&frame, mode);
            report.stego_detected = stego_hit;
            report.passkey_recovered = recovered.as_deref() == Some(harness.passkey.as_bytes());
            let relayed =
                harness.attacker_frame(mode, recovered.as_deref(), envelope.map(|e| e.counter))?;
            report.tampers_attempted = 1;
            if harness.handle(&relayed, "attacker").granted() {
                report.unlock_granted_to_attacker = true;
            } else {
                report.tampers_detected = 1;
            }
        }
    }
    debug_assert!(report.tampers_detected <= report.tampers_attempted);
    Ok(report)
}

/// Outcome of the abstract public-key exchange relay.
#[derive(Debug, Clone, Serialize)]
pub struct RelayOutcome {
    /// Attacker decrypted the message in transit.
    pub attacker_read_message: bool,
    /// The receiving victim still decrypted successfully (deceived).
    pub victim_decrypted: bool,
}

struct KeySubstitution {
    attacker_key: SecretKey128,
    captured_p1: Option<SecretKey128>,
    captured_p2: Option<SecretKey128>,
    read_message: Arc<Mutex<Option<Vec<u8>>>>,
}

impl Interceptor for KeySubstitution {
    fn on_frame(&mut self, direction: Direction, frame: Frame) -> Intercept {
        match frame.kind {
            FrameKind::KeyDist => {
                // A "public key" in transit: capture it, substitute P3.
                let captured = SecretKey128::from_slice(&frame.payload).ok();
                match direction {
                    Direction::AtoB => self.captured_p1 = captured,
                    Direction::BtoA => self.captured_p2 = captured,
                }
                Intercept::Forward(
                    Frame::new(FrameKind::KeyDist, self.attacker_key.as_bytes().to_vec())
                        .expect("16-byte payload"),
                )
            }
            FrameKind::SignedData => {
                // E1 was sealed under P3; open, read, re-seal as E2 under
                // the real recipient key.
                let Ok(envelope) = CipherEnvelope::from_bytes(&frame.payload) else {
                    return Intercept::Forward(frame);
                };
                match ccm_open(&self.attacker_key, &envelope) {
                    Ok(plain) => {
                        *self.read_message.lock().unwrap() = Some(plain.clone());
                        let recipient_key = match direction {
                            Direction::AtoB => self.captured_p2.clone(),
                            Direction::BtoA => self.captured_p1.clone(),
                        };
                        match recipient_key
                            .and_then(|k| ccm_seal(&k, envelope.counter, &plain).ok())
                        {
                            Some(e2) => Intercept::Forward(
                                Frame::new(FrameKind::SignedData, e2.to_bytes())
                                    .expect("sealed payload"),
                            ),
                            None => Intercept::Forward(frame),
                        }
                    }
                    // Not sealed under the substituted key (enrolled
                    // pipeline): relay a best-effort re-encryption.
                    Err(_) => {
                        let reseal =
                            ccm_seal(&self.attacker_key, envelope.counter, &envelope.ciphertext)
                                .ok();
                        match reseal {
                            Some(e) => Intercept::Forward(
                                Frame::new(FrameKind::SignedData, e.to_bytes())
                                    .expect("sealed payload"),
                            ),
                            None => Intercept::Forward(frame),
                        }
                    }
                }
            }
            _ => Intercept::Forward(frame),
        }
    }
}

/// Reproduce the key-substitution exchange end to end against the
/// unauthenticated baseline: victims swap raw key material on the wire,
/// so the attacker reads victim 1's message while victim 2 still
/// decrypts. Both victims are deceived.
pub fn key_substitution_baseline(seed: u64) -> Result<RelayOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v1, v2) = Channel::pair(ChannelModel::new(100.0, 0.0, seed).unwrap());
    let read_message = Arc::new(Mutex::new(None));
    let attacker_key = SecretKey128::random(&mut rng);
    v1.attach_interceptor(Box::new(KeySubstitution {
        attacker_key,
        captured_p1: None,
        captured_p2: None,
        read_message: Arc::clone(&read_message),
    }));

    // Victims generate their key material and exchange it in the clear.
    let k1 = SecretKey128::random(&mut rng);
    let k2 = SecretKey128::random(&mut rng);
    v1.send(Frame::new(FrameKind::KeyDist, k1.as_bytes().to_vec())?)?;
    let p1_at_v2 = SecretKey128::from_slice(&v2.recv()?.payload)?;
    v2.send(Frame::new(FrameKind::KeyDist, k2.as_bytes().to_vec())?)?;
    let p2_at_v1 = SecretKey128::from_slice(&v1.recv()?.payload)?;
    // Neither victim notices p1_at_v2/p2_at_v1 are the attacker's.
    let _ = p1_at_v2;

    let message = b"meet me at the north gate";
    let e1 = ccm_seal(&p2_at_v1, 1, message)?;
    v1.send(Frame::new(FrameKind::SignedData, e1.to_bytes())?)?;
    let delivered = v2.recv()?;
    let envelope = CipherEnvelope::from_bytes(&delivered.payload)?;
    let victim_decrypted = ccm_open(&k2, &envelope)
        .map(|p| p == message)
        .unwrap_or(false);

    let attacker_read_message = read_message
        .lock()
        .unwrap()
        .as_deref()
        .map(|p| p == message)
        .unwrap_or(false);
    Ok(RelayOutcome {
        attacker_read_message,
        victim_decrypted,
    })
}

/// The same relay against a pre-shared enrollment key: the attacker can
/// neither read nor usefully re-author the envelope, so authentication
/// fails at the receiving side.
pub fn key_substitution_enrolled(seed: u64) -> Result<RelayOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v1, v2) = Channel::pair(ChannelModel::new(100.0, 0.0, seed).unwrap());
    let read_message = Arc::new(Mutex::new(None));
    let attacker_key = SecretKey128::random(&mut rng);
    v1.attach_interceptor(Box::new(KeySubstitution {
        attacker_key,
        captured_p1: None,
        captured_p2: None,
        read_message: Arc::clone(&read_message),
    }));

    // Enrollment happened out of band; the wire exchange is irrelevant.
    let shared = SecretKey128::random(&mut rng);
    let message = b"open-sesame";
    let e1 = ccm_seal(&shared, 1, message)?;
    v1.send(Frame::new(FrameKind::SignedData, e1.to_bytes())?)?;
    let delivered = v2.recv()?;
    let envelope = CipherEnvelope::from_bytes(&delivered.payload)?;
    let victim_decrypted = ccm_open(&shared, &envelope).is_ok();
    let attacker_read_message = read_message.lock().unwrap().is_some();
    Ok(RelayOutcome {
        attacker_read_message,
        victim_decrypted,
    })
}

/// Captured pairing run: honest keys on both sides plus the wire transcript.
pub struct CapturedPairing {
    pub initiator_keys: SessionKeys,
    pub responder_keys: SessionKeys,
    pub transcript: Vec<(Direction, Frame)>,
}

/// Run an honest pairing with a passive recorder on the wire.
pub fn eavesdrop_pairing(
    cfg_initiator: PairingConfig,
    cfg_responder: PairingConfig,
    seed: u64,
) -> Result<CapturedPairing> {
    let (a, b) = Channel::pair(ChannelModel::new(100.0, 0.0, seed).unwrap());
    let (recorder, log) = RecordingInterceptor::new();
    a.attach_interceptor(Box::new(recorder));
    let responder = std::thread::spawn(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        run_pairing(&b, Role::Responder, &cfg_responder, &mut rng)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initiator_keys = run_pairing(&a, Role::Initiator, &cfg_initiator, &mut rng)?;
    let responder_keys = responder.join().expect("responder thread")?;
    let transcript = log.lock().unwrap().clone();
    Ok(CapturedPairing {
        initiator_keys,
        responder_keys,
        transcript,
    })
}

fn transcript_randoms(transcript: &[(Direction, Frame)]) -> Option<([u8; 16], [u8; 16])> {
    let mut mrand = None;
    let mut srand = None;
    for (direction, frame) in transcript {
        if frame.kind == FrameKind::PairRandom {
            let value: [u8; 16] = frame.payload.as_slice().try_into().ok()?;
            match direction {
                Direction::AtoB => mrand = Some(value),
                Direction::BtoA => srand = Some(value),
            }
        }
    }
    Some((mrand?, srand?))
}

/// JustWorks weakness: the TK is public (all zero), so a passive observer
/// recomputes the STK from the revealed randoms alone.
pub fn recompute_just_works_stk(transcript: &[(Direction, Frame)]) -> Option<SecretKey128> {
    let (mrand, srand) = transcript_randoms(transcript)?;
    let tk = derive_tk(PairingMethod::JustWorks, None, None).ok()?;
    Some(derive_stk(&tk, &mrand, &srand))
}

/// PasskeyEntry weakness: the TK space is at most 10^6, so a passive
/// observer brute-forces the passkey against the published confirm value.
pub fn brute_force_passkey(transcript: &[(Direction, Frame)], search_limit: u32) -> Option<u32> {
    let (mrand, _) = transcript_randoms(transcript)?;
    let mconfirm: [u8; 16] = transcript
        .iter()
        .find(|(d, f)| *d == Direction::AtoB && f.kind == FrameKind::PairConfirm)?
        .1
        .payload
        .as_slice()
        .try_into()
        .ok()?;
    for candidate in 0..=search_limit.min(999_999) {
        let tk = derive_tk(PairingMethod::PasskeyEntry, Some(candidate), None).ok()?;
        if confirm_value(&tk, &mrand) == mconfirm {
            return Some(candidate);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lockproto::AuditKind;
    use crate::pairing::IoCapability;
    use crate::transport::IdentityInterceptor;

    #[test]
    fn passive_vs_plaintext_recovers_passkey() {
        let report =
            run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::Plaintext, 1).unwrap();
        assert!(report.passkey_recovered);
        assert!(report.unlock_granted_to_attacker);
    }

    #[test]
    fn steg_detect_vs_stego_only_recovers_passkey() {
        let report =
            run_attack(AttackScenario::PassiveEavesdrop, ProtocolMode::StegoOnly, 2).unwrap();
        assert!(report.stego_detected);
        assert!(report.passkey_recovered);
        assert!(report.unlock_granted_to_attacker);
    }

    #[test]
    fn passive_vs_stego_crypto_sees_envelope_but_nothing_else() {
        let report = run_attack(
            AttackScenario::PassiveEavesdrop,
            ProtocolMode::StegoCrypto,
            3,
        )
        .unwrap();
        assert!(report.stego_detected);
        assert!(!report.passkey_recovered);
        assert!(!report.unlock_granted_to_attacker);
    }

    #[test]
    fn tamper_vs_stego_crypto_all_detected() {
        let report =
            run_attack_with(AttackScenario::Tamper, ProtocolMode::StegoCrypto, 4, 100).unwrap();
        assert_eq!(report.tampers_attempted, 100);
        assert_eq!(report.tampers_detected, 100);
        assert!(!report.unlock_granted_to_attacker);
        assert!(!report.passkey_recovered);
    }

    #[test]
    fn replay_vs_stego_crypto_denied() {
        let report = run_attack(AttackScenario::Replay, ProtocolMode::StegoCrypto, 5).unwrap();
        assert!(!report.unlock_granted_to_attacker);
        assert!(!report.passkey_recovered);
    }

    #[test]
    fn replay_vs_plaintext_succeeds() {
        // No counter on the wire in plaintext mode: replay is the weakness.
        let report = run_attack(AttackScenario::Replay, ProtocolMode::Plaintext, 6).unwrap();
        assert!(report.unlock_granted_to_attacker);
    }

    #[test]
    fn active_vs_stego_crypto_denied() {
        let report = run_attack(
            AttackScenario::ActiveKeySubstitution,
            ProtocolMode::StegoCrypto,
            7,
        )
        .unwrap();
        assert!(!report.passkey_recovered);
        assert!(!report.unlock_granted_to_attacker);
        assert_eq!(report.tampers_detected, 1);
    }

    #[test]
    fn reports_are_deterministic_per_seed() {
        let a = run_attack_with(AttackScenario::Tamper, ProtocolMode::StegoCrypto, 11, 20).unwrap();
        let b = run_attack_with(AttackScenario::Tamper, ProtocolMode::StegoCrypto, 11, 20).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn steg_detect_rejects_non_stego_noise() {
        // A random image whose LSBs declare an impossible length.
        let img = RgbImage::filled(16, 16, [0xff; 3]).unwrap();
        let frame = Frame::new(FrameKind::StegoImage, img.to_png_bytes().unwrap()).unwrap();
        assert!(steg_detect(&frame).unwrap().is_none());
    }

    #[test]
    fn fig1_baseline_deceives_both_victims() {
        let outcome = key_substitution_baseline(21).unwrap();
        assert!(outcome.attacker_read_message);
        assert!(outcome.victim_decrypted);
    }

    #[test]
    fn fig1_enrolled_relay_fails_authentication() {
        let outcome = key_substitution_enrolled(22).unwrap();
        assert!(!outcome.attacker_read_message);
        assert!(!outcome.victim_decrypted);
    }

    #[test]
    fn identity_relay_is_indistinguishable() {
        let run = |with_relay: bool| {
            let mut harness = Harness::new(ProtocolMode::StegoCrypto, 33).unwrap();
            let (a, b) = Channel::pair(ChannelModel::new(100.0, 0.0, 33).unwrap());
            if with_relay {
                a.attach_interceptor(Box::new(IdentityInterceptor));
            }
            for _ in 0..3 {
                let frame = harness.honest_frame().unwrap();
                a.send(frame).unwrap();
                let delivered = b.recv().unwrap();
                harness.handle(&delivered, "client");
            }
            serde_json::to_string(harness.controller.audit()).unwrap()
        };
        assert_eq!(run(false), run(true));
    }

    #[test]
    fn just_works_stk_recoverable_from_transcript() {
        let captured =
            eavesdrop_pairing(PairingConfig::just_works(), PairingConfig::just_works(), 40)
                .unwrap();
        assert_eq!(captured.initiator_keys, captured.responder_keys);
        let stk = recompute_just_works_stk(&captured.transcript).unwrap();
        assert_eq!(stk, captured.initiator_keys.stk);
    }

    #[test]
    fn passkey_entry_tk_brute_forceable_within_bound() {
        let passkey = 4242;
        let captured = eavesdrop_pairing(
            PairingConfig::passkey_entry(IoCapability::KeyboardOnly, passkey),
            PairingConfig::passkey_entry(IoCapability::DisplayOnly, passkey),
            41,
        )
        .unwrap();
        // The search space is bounded by 10^6; keep the test fast by
        // knowing the answer is low.
        assert_eq!(
            brute_force_passkey(&captured.transcript, 10_000),
            Some(passkey)
        );
        // A passive observer cannot shortcut it from the randoms alone.
        let stk_guess = recompute_just_works_stk(&captured.transcript).unwrap();
        assert_ne!(stk_guess, captured.initiator_keys.stk);
    }

    #[test]
    fn attack_matrix_audit_kinds_line_up() {
        let mut harness = Harness::new(ProtocolMode::StegoCrypto, 50).unwrap();
        let frame = harness.honest_frame().unwrap();
        assert!(harness.handle(&frame, "client").granted());
        harness.handle(&frame, "attacker");
        let kinds: Vec<AuditKind> = harness.controller.audit().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![AuditKind::UnlockGranted, AuditKind::Replay]);
    }
}
