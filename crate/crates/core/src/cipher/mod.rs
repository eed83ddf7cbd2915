//! Symmetric primitives: AES-128, CCM authenticated encryption with a
//! 4-byte MIC, and counter-based signing for unencrypted channels.
//!
//! CCM follows RFC 3610 with M=4, L=2 and a 13-byte nonce of five zero
//! octets followed by the 8-octet big-endian message counter. There is no
//! associated data. Counters are 64-bit, never reused within a session;
//! replay protection lives with the receiver (see `verify_counter` and
//! the lock controller).

mod aes;

pub use aes::Aes128;

use crate::error::{Error, Result};
use rand::RngCore;

/// Maximum plaintext length a single envelope can carry (L=2 length field).
pub const MAX_PLAINTEXT: usize = 65535;

/// MIC length in octets.
pub const MIC_LEN: usize = 4;

/// Signature length for counter-signed plaintext messages.
pub const SIGNATURE_LEN: usize = 8;

/// Fixed envelope overhead on the wire: 8-octet counter + 2-octet length
/// + 4-octet MIC.
pub const ENVELOPE_OVERHEAD: usize = 8 + 2 + MIC_LEN;

/// A 128-bit symmetric key. Serves as pre-shared app key, TK, STK, LTK,
/// CSRK and IRK depending on context.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey128(pub [u8; 16]);

impl SecretKey128 {
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 16] = bytes.try_into().map_err(|_| {
            Error::InvalidInput(format!("key must be 16 bytes, got {}", bytes.len()))
        })?;
        Ok(SecretKey128(arr))
    }

    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut k = [0u8; 16];
        rng.fill_bytes(&mut k);
        SecretKey128(k)
    }

    pub fn zero() -> Self {
        SecretKey128([0u8; 16])
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::InvalidInput(format!("bad key hex: {e}")))?;
        Self::from_slice(&bytes)
    }
}

impl std::fmt::Debug for SecretKey128 {
    // keys stay out of debug output
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey128(..)")
    }
}

/// Counter + ciphertext + 4-byte MIC; the unit sealed into images and frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherEnvelope {
    pub counter: u64,
    pub ciphertext: Vec<u8>,
    pub mic: [u8; MIC_LEN],
}

impl CipherEnvelope {
    /// Wire layout: 8-octet BE counter || 2-octet BE ciphertext length ||
    /// ciphertext || 4-octet MIC.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_OVERHEAD + self.ciphertext.len());
        out.extend_from_slice(&self.counter.to_be_bytes());
        out.extend_from_slice(&(self.ciphertext.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.mic);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < ENVELOPE_OVERHEAD {
            return Err(Error::MalformedEnvelope(format!(
                "too short: {} bytes",
                bytes.len()
            )));
        }
        let counter = u64::from_be_bytes(bytes[0..8].try_into().unwrap());
        let ct_len = u16::from_be_bytes(bytes[8..10].try_into().unwrap()) as usize;
        if bytes.len() != ENVELOPE_OVERHEAD + ct_len {
            return Err(Error::MalformedEnvelope(format!(
                "declared ciphertext length {} does not match {} remaining bytes",
                ct_len,
                bytes.len() - ENVELOPE_OVERHEAD
            )));
        }
        let ciphertext = bytes[10..10 + ct_len].to_vec();
        let mic = bytes[10 + ct_len..].try_into().unwrap();
        Ok(CipherEnvelope {
            counter,
            ciphertext,
            mic,
        })
    }
}

/// Plaintext message with an 8-octet truncated CBC-MAC over
/// (counter || payload).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMessage {
    pub counter: u64,
    pub payload: Vec<u8>,
    pub signature: [u8; SIGNATURE_LEN],
}

/// Outcome of verifying a counter-signed message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Accept,
    /// Signature invalid: payload or counter was altered.
    Forgery,
    /// Signature valid but the counter is not fresh.
    Replay,
}

/// AES-128 forward transform of a single 16-octet block.
pub fn aes128_encrypt_block(key: &SecretKey128, block: &[u8]) -> Result<[u8; 16]> {
    let b: [u8; 16] = block
        .try_into()
        .map_err(|_| Error::InvalidInput(format!("block must be 16 bytes, got {}", block.len())))?;
    Ok(Aes128::new(key.as_bytes()).encrypt_block(&b))
}

/// Exact inverse of [`aes128_encrypt_block`] under the same key.
pub fn aes128_decrypt_block(key: &SecretKey128, block: &[u8]) -> Result<[u8; 16]> {
    let b: [u8; 16] = block
        .try_into()
        .map_err(|_| Error::InvalidInput(format!("block must be 16 bytes, got {}", block.len())))?;
    Ok(Aes128::new(key.as_bytes()).decrypt_block(&b))
}

// RFC 3610 parameters: M=4, L=2.
const CCM_L: usize = 2;
const NONCE_LEN: usize = 15 - CCM_L; // 13

fn ccm_nonce(counter: u64) -> [u8; NONCE_LEN] {
    let mut nonce = [0u8; NONCE_LEN];
    nonce[5..].copy_from_slice(&counter.to_be_bytes());
    nonce
}

fn ccm_cbc_mac(aes: &Aes128, counter: u64, plaintext: &[u8]) -> [u8; 16] {
    // B0: flags || nonce || message length. Adata=0, M'=(4-2)/2, L'=L-1.
    let mut b0 = [0u8; 16];
    b0[0] = ((MIC_LEN as u8 - 2) / 2) << 3 | (CCM_L as u8 - 1);
    b0[1..1 + NONCE_LEN].copy_from_slice(&ccm_nonce(counter));
    b0[14..].copy_from_slice(&(plaintext.len() as u16).to_be_bytes());

    let mut x = aes.encrypt_block(&b0);
    for chunk in plaintext.chunks(16) {
        let mut block = [0u8; 16];
        block[..chunk.len()].copy_from_slice(chunk);
        for (xb, bb) in x.iter_mut().zip(block.iter()) {
            *xb ^= bb;
        }
        x = aes.encrypt_block(&x);
    }
    x
}

fn ccm_keystream_block(aes: &Aes128, counter: u64, index: u16) -> [u8; 16] {
    let mut a = [0u8; 16];
    a[0] = CCM_L as u8 - 1;
    a[1..1 + NONCE_LEN].copy_from_slice(&ccm_nonce(counter));
    a[14..].copy_from_slice(&index.to_be_bytes());
    aes.encrypt_block(&a)
}

/// CCM authenticated encryption. Deterministic in (key, counter, plaintext);
/// the counter doubles as the nonce and must be fresh per sender.
pub fn ccm_seal(key: &SecretKey128, counter: u64, plaintext: &[u8]) -> Result<CipherEnvelope> {
    if plaintext.is_empty() {
        return Err(Error::Capacity {
            required: 1,
            available: 0,
        });
    }
    if plaintext.len() > MAX_PLAINTEXT {
        return Err(Error::Capacity {
            required: plaintext.len(),
            available: MAX_PLAINTEXT,
        });
    }
    let aes = Aes128::new(key.as_bytes());
    let tag = ccm_cbc_mac(&aes, counter, plaintext);

    let mut ciphertext = plaintext.to_vec();
    for (i, chunk) in ciphertext.chunks_mut(16).enumerate() {
        let s = ccm_keystream_block(&aes, counter, (i + 1) as u16);
        for (c, k) in chunk.iter_mut().zip(s.iter()) {
            *c ^= k;
        }
    }
    let s0 = ccm_keystream_block(&aes, counter, 0);
    let mut mic = [0u8; MIC_LEN];
    for i in 0..MIC_LEN {
        mic[i] = tag[i] ^ s0[i];
    }
    Ok(CipherEnvelope {
        counter,
        ciphertext,
        mic,
    })
}

/// CCM open: returns the plaintext iff the MIC verifies.
pub fn ccm_open(key: &SecretKey128, env: &CipherEnvelope) -> Result<Vec<u8>> {
    if env.ciphertext.is_empty() || env.ciphertext.len() > MAX_PLAINTEXT {
        return Err(Error::MalformedEnvelope(format!(
            "ciphertext length {} out of range",
            env.ciphertext.len()
        )));
    }
    let aes = Aes128::new(key.as_bytes());
    let mut plaintext = env.ciphertext.clone();
    for (i, chunk) in plaintext.chunks_mut(16).enumerate() {
        let s = ccm_keystream_block(&aes, env.counter, (i + 1) as u16);
        for (c, k) in chunk.iter_mut().zip(s.iter()) {
            *c ^= k;
        }
    }
    let tag = ccm_cbc_mac(&aes, env.counter, &plaintext);
    let s0 = ccm_keystream_block(&aes, env.counter, 0);
    let mut diff = 0u8;
    for i in 0..MIC_LEN {
        diff |= env.mic[i] ^ tag[i] ^ s0[i];
    }
    if diff != 0 {
        return Err(Error::AuthenticationFailure);
    }
    Ok(plaintext)
}

fn cbc_mac(key: &SecretKey128, counter: u64, payload: &[u8]) -> [u8; 16] {
    let aes = Aes128::new(key.as_bytes());
    let mut x = [0u8; 16];
    let mut message = Vec::with_capacity(8 + payload.len());
    message.extend_from_slice(&counter.to_be_bytes());
    message.extend_from_slice(payload);
    for chunk in message.chunks(16) {
        let mut block = [0u8; 16];
        block[..chunk.len()].copy_from_slice(chunk);
        for (xb, bb) in x.iter_mut().zip(block.iter()) {
            *xb ^= bb;
        }
        x = aes.encrypt_block(&x);
    }
    x
}

/// Sign a plaintext payload for transmission over an unencrypted channel.
/// The counter is bound into the MAC, so replays are detectable downstream.
pub fn sign_counter(key: &SecretKey128, counter: u64, payload: &[u8]) -> SignedMessage {
    let mac = cbc_mac(key, counter, payload);
    let mut signature = [0u8; SIGNATURE_LEN];
    signature.copy_from_slice(&mac[..SIGNATURE_LEN]);
    SignedMessage {
        counter,
        payload: payload.to_vec(),
        signature,
    }
}

/// Verify a counter-signed message against the last counter this receiver
/// accepted. Forgery and replay are distinct outcomes.
pub fn verify_counter(
    key: &SecretKey128,
    msg: &SignedMessage,
    last_seen_counter: u64,
) -> Verification {
    let mac = cbc_mac(key, msg.counter, &msg.payload);
    let mut diff = 0u8;
    for (m, s) in mac.iter().take(SIGNATURE_LEN).zip(&msg.signature) {
        diff |= m ^ s;
    }
    if diff != 0 {
        Verification::Forgery
    } else if msg.counter <= last_seen_counter {
        Verification::Replay
    } else {
        Verification::Accept
    }
}
