//! Simplified BLE legacy pairing over the simulated channel.
//!
//! Three phases, per the Security Manager Protocol shape:
//!
//! 1. capability exchange (PAIR_REQ / PAIR_RSP) selects the TK method;
//! 2. confirm/random exchange (PAIR_CONFIRM / PAIR_RANDOM) binds both
//!    sides to their randoms before revealing them, then derives the STK;
//! 3. the responder distributes LTK, CSRK and IRK in KEY_DIST frames,
//!    each sealed with CCM under the STK.
//!
//! SMP payload layouts (fixed octet offsets):
//!
//! - PAIR_REQ / PAIR_RSP: `[0]` io capability code, `[1]` oob flag (0/1)
//! - PAIR_CONFIRM: 16-octet confirm value
//! - PAIR_RANDOM: 16-octet random
//! - KEY_DIST: CCM envelope wire bytes; plaintext is
//!   `[0]` key id (0=LTK, 1=CSRK, 2=IRK) || 16-octet key; the envelope
//!   counter equals the key id.
//!
//! The confirm function is AES_TK(rand); the STK is
//! AES_TK(low 8 octets of srand || low 8 octets of mrand). Both keep the
//! properties the artifact exercises: agreement, confirm binding, and the
//! JustWorks weakness (TK is public, so a passive observer recomputes STK).

use crate::cipher::{aes128_encrypt_block, ccm_open, ccm_seal, SecretKey128};
use crate::error::{Error, PairingFailure, Result};
use crate::transport::{Endpoint, Frame, FrameKind};
use rand::RngCore;
use std::time::Duration;

const RECV_TIMEOUT: Duration = Duration::from_secs(10);

/// Announced input/output capabilities of a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoCapability {
    NoInputNoOutput,
    DisplayOnly,
    KeyboardOnly,
    KeyboardDisplay,
}

impl IoCapability {
    fn can_input(self) -> bool {
        matches!(
            self,
            IoCapability::KeyboardOnly | IoCapability::KeyboardDisplay
        )
    }

    fn can_display(self) -> bool {
        matches!(
            self,
            IoCapability::DisplayOnly | IoCapability::KeyboardDisplay
        )
    }

    fn code(self) -> u8 {
        match self {
            IoCapability::NoInputNoOutput => 0,
            IoCapability::DisplayOnly => 1,
            IoCapability::KeyboardOnly => 2,
            IoCapability::KeyboardDisplay => 3,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => IoCapability::NoInputNoOutput,
            1 => IoCapability::DisplayOnly,
            2 => IoCapability::KeyboardOnly,
            3 => IoCapability::KeyboardDisplay,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown io capability code {other}"
                )))
            }
        })
    }
}

/// How the temporary key is agreed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMethod {
    JustWorks,
    PasskeyEntry,
    OutOfBand,
}

/// The keys both sides hold after a successful pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub stk: SecretKey128,
    pub ltk: SecretKey128,
    pub csrk: SecretKey128,
    pub irk: SecretKey128,
}

/// Which side of the pairing this endpoint plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

/// Per-device pairing configuration.
#[derive(Debug, Clone)]
pub struct PairingConfig {
    pub io_capability: IoCapability,
    /// Out-of-band TK, when an OOB channel is configured. Its presence is
    /// what makes OutOfBand selectable.
    pub oob_tk: Option<SecretKey128>,
    /// 6-digit passkey for PasskeyEntry; must match on both sides.
    pub passkey: Option<u32>,
}

impl PairingConfig {
    pub fn just_works() -> Self {
        PairingConfig {
            io_capability: IoCapability::NoInputNoOutput,
            oob_tk: None,
            passkey: None,
        }
    }

    pub fn passkey_entry(io_capability: IoCapability, passkey: u32) -> Self {
        PairingConfig {
            io_capability,
            oob_tk: None,
            passkey: Some(passkey),
        }
    }
}

/// Deterministic method selection from announced capabilities.
pub fn select_method(
    initiator: IoCapability,
    responder: IoCapability,
    oob_available: bool,
) -> PairingMethod {
    if oob_available {
        PairingMethod::OutOfBand
    } else if (initiator.can_input() && responder.can_display())
        || (responder.can_input() && initiator.can_display())
    {
        PairingMethod::PasskeyEntry
    } else {
        PairingMethod::JustWorks
    }
}

/// TK agreement per method: all-zero for JustWorks, the widened passkey
/// for PasskeyEntry, the configured out-of-band value for OutOfBand.
pub fn derive_tk(
    method: PairingMethod,
    passkey: Option<u32>,
    oob_tk: Option<&SecretKey128>,
) -> Result<SecretKey128> {
    match method {
        PairingMethod::JustWorks => Ok(SecretKey128::zero()),
        PairingMethod::PasskeyEntry => {
            let pk = passkey.ok_or_else(|| {
                Error::InvalidInput("passkey entry selected but no passkey given".into())
            })?;
            if pk > 999_999 {
                return Err(Error::InvalidInput(format!(
                    "passkey must be a 6-digit number, got {pk}"
                )));
            }
            let mut tk = [0u8; 16];
            tk[12..].copy_from_slice(&pk.to_be_bytes());
            Ok(SecretKey128(tk))
        }
        PairingMethod::OutOfBand => oob_tk.cloned().ok_or_else(|| {
            Error::InvalidInput("out-of-band selected but no oob value configured".into())
        }),
    }
}

/// Confirm value published before a random is revealed: AES_TK(rand).
pub fn confirm_value(tk: &SecretKey128, rand: &[u8; 16]) -> [u8; 16] {
    aes128_encrypt_block(tk, rand).expect("16-byte block")
}

/// STK from the TK and both revealed randoms; symmetric across roles.
pub fn derive_stk(tk: &SecretKey128, mrand: &[u8; 16], srand: &[u8; 16]) -> SecretKey128 {
    let mut block = [0u8; 16];
    block[..8].copy_from_slice(&srand[8..]);
    block[8..].copy_from_slice(&mrand[8..]);
    SecretKey128(aes128_encrypt_block(tk, &block).expect("16-byte block"))
}

/// IRK-based private address, exposed for logging only:
/// AES_IRK(public address zero-padded).
pub fn private_address(irk: &SecretKey128, public_address: &[u8; 6]) -> [u8; 16] {
    let mut block = [0u8; 16];
    block[..6].copy_from_slice(public_address);
    aes128_encrypt_block(irk, &block).expect("16-byte block")
}

fn expect_frame(endpoint: &Endpoint, kind: FrameKind) -> Result<Frame> {
    let frame = endpoint
        .recv_wait(RECV_TIMEOUT)
        .map_err(|_| Error::PairingFailed(PairingFailure::ChannelClosed))?;
    if frame.kind != kind {
        return Err(Error::PairingFailed(PairingFailure::OutOfOrderFrame));
    }
    Ok(frame)
}

fn cap_payload(frame: &Frame) -> Result<(IoCapability, bool)> {
    if frame.payload.len() != 2 {
        return Err(Error::PairingFailed(PairingFailure::OutOfOrderFrame));
    }
    Ok((
        IoCapability::from_code(frame.payload[0])?,
        frame.payload[1] != 0,
    ))
}

fn sixteen(frame: &Frame) -> Result<[u8; 16]> {
    frame
        .payload
        .as_slice()
        .try_into()
        .map_err(|_| Error::PairingFailed(PairingFailure::OutOfOrderFrame))
}

const KEY_ID_LTK: u8 = 0;
const KEY_ID_CSRK: u8 = 1;
const KEY_ID_IRK: u8 = 2;

/// Run the full three-phase pairing on one endpoint. The peer must run the
/// opposite role concurrently (or in lockstep) on the other endpoint.
pub fn run_pairing(
    endpoint: &Endpoint,
    role: Role,
    config: &PairingConfig,
    rng: &mut impl RngCore,
) -> Result<SessionKeys> {
    let result = match role {
        Role::Initiator => run_initiator(endpoint, config, rng),
        Role::Responder => run_responder(endpoint, config, rng),
    };
    if result.is_err() {
        // Tear the link down so the peer aborts instead of waiting out
        // its receive timeout.
        endpoint.close();
    }
    result
}

fn run_initiator(
    endpoint: &Endpoint,
    config: &PairingConfig,
    rng: &mut impl RngCore,
) -> Result<SessionKeys> {
    // Phase 1: capability exchange.
    let my_oob = config.oob_tk.is_some();
    endpoint.send(Frame::new(
        FrameKind::PairReq,
        vec![config.io_capability.code(), my_oob as u8],
    )?)?;
    let rsp = expect_frame(endpoint, FrameKind::PairRsp)?;
    let (peer_cap, peer_oob) = cap_payload(&rsp)?;
    let method = select_method(config.io_capability, peer_cap, my_oob && peer_oob);
    let tk = derive_tk(method, config.passkey, config.oob_tk.as_ref())?;

    // Phase 2: confirm before reveal, then STK.
    let mut mrand = [0u8; 16];
    rng.fill_bytes(&mut mrand);
    endpoint.send(Frame::new(
        FrameKind::PairConfirm,
        confirm_value(&tk, &mrand).to_vec(),
    )?)?;
    let sconfirm = sixteen(&expect_frame(endpoint, FrameKind::PairConfirm)?)?;
    endpoint.send(Frame::new(FrameKind::PairRandom, mrand.to_vec())?)?;
    let srand = sixteen(&expect_frame(endpoint, FrameKind::PairRandom)?)?;
    if confirm_value(&tk, &srand) != sconfirm {
        return Err(Error::PairingFailed(PairingFailure::ConfirmMismatch));
    }
    let stk = derive_stk(&tk, &mrand, &srand);

    // Phase 3: receive STK-sealed key distribution.
    let mut keys: [Option<SecretKey128>; 3] = [None, None, None];
    for expected_id in [KEY_ID_LTK, KEY_ID_CSRK, KEY_ID_IRK] {
        let frame = expect_frame(endpoint, FrameKind::KeyDist)?;
        let envelope = crate::cipher::CipherEnvelope::from_bytes(&frame.payload)
            .map_err(|_| Error::PairingFailed(PairingFailure::KeyDistributionAuth))?;
        let plain = ccm_open(&stk, &envelope)
            .map_err(|_| Error::PairingFailed(PairingFailure::KeyDistributionAuth))?;
        if plain.len() != 17 || plain[0] != expected_id {
            return Err(Error::PairingFailed(PairingFailure::OutOfOrderFrame));
        }
        keys[expected_id as usize] = Some(SecretKey128::from_slice(&plain[1..])?);
    }
    let [ltk, csrk, irk] = keys.map(|k| k.expect("all three distributed"));
    Ok(SessionKeys {
        stk,
        ltk,
        csrk,
        irk,
    })
}

fn run_responder(
    endpoint: &Endpoint,
    config: &PairingConfig,
    rng: &mut impl RngCore,
) -> Result<SessionKeys> {
    // Phase 1.
    let req = expect_frame(endpoint, FrameKind::PairReq)?;
    let (peer_cap, peer_oob) = cap_payload(&req)?;
    let my_oob = config.oob_tk.is_some();
    endpoint.send(Frame::new(
        FrameKind::PairRsp,
        vec![config.io_capability.code(), my_oob as u8],
    )?)?;
    let method = select_method(peer_cap, config.io_capability, my_oob && peer_oob);
    let tk = derive_tk(method, config.passkey, config.oob_tk.as_ref())?;

    // Phase 2. Initiator publishes its confirm first.
    let mconfirm = sixteen(&expect_frame(endpoint, FrameKind::PairConfirm)?)?;
    let mut srand = [0u8; 16];
    rng.fill_bytes(&mut srand);
    endpoint.send(Frame::new(
        FrameKind::PairConfirm,
        confirm_value(&tk, &srand).to_vec(),
    )?)?;
    let mrand = sixteen(&expect_frame(endpoint, FrameKind::PairRandom)?)?;
    if confirm_value(&tk, &mrand) != mconfirm {
        return Err(Error::PairingFailed(PairingFailure::ConfirmMismatch));
    }
    endpoint.send(Frame::new(FrameKind::PairRandom, srand.to_vec())?)?;
    let stk = derive_stk(&tk, &mrand, &srand);

    // Phase 3: generate and distribute LTK, CSRK, IRK (collision checked).
    let mut distributed: Vec<SecretKey128> = Vec::with_capacity(3);
    while distributed.len() < 3 {
        let k = SecretKey128::random(rng);
        if !distributed.contains(&k) {
            distributed.push(k);
        }
    }
    for (id, key) in distributed.iter().enumerate() {
        let mut plain = vec![id as u8];
        plain.extend_from_slice(key.as_bytes());
        let envelope = ccm_seal(&stk, id as u64, &plain)?;
        endpoint.send(Frame::new(FrameKind::KeyDist, envelope.to_bytes())?)?;
    }
    let mut it = distributed.into_iter();
    Ok(SessionKeys {
        stk,
        ltk: it.next().unwrap(),
        csrk: it.next().unwrap(),
        irk: it.next().unwrap(),
    })
}
