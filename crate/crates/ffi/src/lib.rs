//! C ABI surface over the simulator core.
//!
//! Conventions: every fallible call returns a `StegolockStatus`; output
//! buffers are allocated by the library and must be released with
//! `stegolock_buffer_free`. The lock simulator is an opaque handle created
//! with `stegolock_sim_new` and released with `stegolock_sim_free`. All
//! functions catch panics and report them as `STEGOLOCK_STATUS_PANIC`
//! instead of unwinding across the boundary.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ffi::CStr;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use stegolock::adversary::{self, AttackScenario};
use stegolock::cipher::{self, CipherEnvelope, SecretKey128};
use stegolock::lockproto::{enroll, Controller, Passkey, ProtocolMode, UnlockClient};
use stegolock::stego::{self, RgbImage};
use stegolock::Error;

/// Result of any fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StegolockStatus {
    Ok = 0,
    /// An argument was malformed (bad UTF-8, bad length, unknown name).
    InvalidInput = 1,
    /// The payload does not fit the carrier image.
    Capacity = 2,
    /// Decryption or integrity verification failed.
    AuthFailure = 3,
    /// Wire bytes did not parse as an envelope or stego payload.
    Malformed = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// Any other internal failure.
    Internal = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

fn status_of(e: &Error) -> StegolockStatus {
    match e {
        Error::InvalidInput(_) => StegolockStatus::InvalidInput,
        Error::Capacity { .. } => StegolockStatus::Capacity,
        Error::AuthenticationFailure => StegolockStatus::AuthFailure,
        Error::MalformedEnvelope(_) | Error::MalformedStego(_) => StegolockStatus::Malformed,
        _ => StegolockStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> StegolockStatus) -> StegolockStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(StegolockStatus::Panic)
}

/// Hand ownership of a byte vector to the caller.
unsafe fn give_buffer(bytes: Vec<u8>, out_ptr: *mut *mut u8, out_len: *mut usize) {
    let boxed = bytes.into_boxed_slice();
    *out_len = boxed.len();
    *out_ptr = Box::into_raw(boxed) as *mut u8;
}

unsafe fn read_key(key16: *const u8) -> SecretKey128 {
    SecretKey128::from_slice(std::slice::from_raw_parts(key16, 16)).expect("16-byte key")
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, StegolockStatus> {
    if s.is_null() {
        return Err(StegolockStatus::NullPointer);
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| StegolockStatus::InvalidInput)
}

/// Release a buffer previously returned through an out-pointer pair.
/// `ptr` may be null, in which case this is a no-op.
///
/// # Safety
/// `ptr`/`len` must be exactly as returned by this library, unmodified,
/// and not freed twice.
#[no_mangle]
pub unsafe extern "C" fn stegolock_buffer_free(ptr: *mut u8, len: usize) {
    if !ptr.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len)));
    }
}

/// Payload capacity in bytes of a `width`x`height` RGB carrier.
#[no_mangle]
pub extern "C" fn stegolock_capacity(width: u32, height: u32) -> u64 {
    if width == 0 || height == 0 {
        return 0;
    }
    ((width as u64 * height as u64 * 3) / 8).saturating_sub(4)
}

/// Hide `payload` in the least-significant bits of an RGB pixel buffer.
/// `cover_rgb` holds `width*height*3` bytes; the stego result, same size,
/// is written to `out_rgb` (caller-allocated, may alias `cover_rgb`).
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stegolock_embed(
    cover_rgb: *const u8,
    width: u32,
    height: u32,
    payload: *const u8,
    payload_len: usize,
    out_rgb: *mut u8,
) -> StegolockStatus {
    guard(|| {
        if cover_rgb.is_null() || out_rgb.is_null() || (payload.is_null() && payload_len > 0) {
            return StegolockStatus::NullPointer;
        }
        let n = width as usize * height as usize * 3;
        let cover = match RgbImage::new(
            width,
            height,
            std::slice::from_raw_parts(cover_rgb, n).to_vec(),
        ) {
            Ok(img) => img,
            Err(e) => return status_of(&e),
        };
        let payload = if payload_len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(payload, payload_len)
        };
        match stego::embed(&cover, payload) {
            Ok(stego_img) => {
                std::slice::from_raw_parts_mut(out_rgb, n).copy_from_slice(stego_img.pixels());
                StegolockStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Recover an embedded payload from an RGB pixel buffer. The payload is
/// returned through `out_ptr`/`out_len`; release it with
/// `stegolock_buffer_free`.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stegolock_extract(
    stego_rgb: *const u8,
    width: u32,
    height: u32,
    out_ptr: *mut *mut u8,
    out_len: *mut usize,
) -> StegolockStatus {
    guard(|| {
        if stego_rgb.is_null() || out_ptr.is_null() || out_len.is_null() {
            return StegolockStatus::NullPointer;
        }
        let n = width as usize * height as usize * 3;
        let image = match RgbImage::new(
            width,
            height,
            std::slice::from_raw_parts(stego_rgb, n).to_vec(),
        ) {
            Ok(img) => img,
            Err(e) => return status_of(&e),
        };
        match stego::extract(&image) {
            Ok(payload) => {
                give_buffer(payload, out_ptr, out_len);
                StegolockStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Authenticated encryption of `plaintext` under a 16-byte key and message
/// counter. The envelope wire bytes (counter, length, ciphertext, MIC) are
/// returned through `out_ptr`/`out_len`.
///
/// # Safety
/// `key16` must point at 16 readable bytes; other pointers must be valid
/// for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stegolock_seal(
    key16: *const u8,
    counter: u64,
    plaintext: *const u8,
    plaintext_len: usize,
    out_ptr: *mut *mut u8,
    out_len: *mut usize,
) -> StegolockStatus {
    guard(|| {
        if key16.is_null()
            || out_ptr.is_null()
            || out_len.is_null()
            || (plaintext.is_null() && plaintext_len > 0)
        {
            return StegolockStatus::NullPointer;
        }
        let key = read_key(key16);
        let pt = if plaintext_len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(plaintext, plaintext_len)
        };
        match cipher::ccm_seal(&key, counter, pt) {
            Ok(env) => {
                give_buffer(env.to_bytes(), out_ptr, out_len);
                StegolockStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Verify and decrypt envelope wire bytes produced by `stegolock_seal`.
/// On success the plaintext is returned through `out_ptr`/`out_len` and
/// the message counter through `counter_out` (may be null).
///
/// # Safety
/// `key16` must point at 16 readable bytes; other pointers must be valid
/// for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stegolock_open(
    key16: *const u8,
    wire: *const u8,
    wire_len: usize,
    out_ptr: *mut *mut u8,
    out_len: *mut usize,
    counter_out: *mut u64,
) -> StegolockStatus {
    guard(|| {
        if key16.is_null() || wire.is_null() || out_ptr.is_null() || out_len.is_null() {
            return StegolockStatus::NullPointer;
        }
        let key = read_key(key16);
        let env = match CipherEnvelope::from_bytes(std::slice::from_raw_parts(wire, wire_len)) {
            Ok(env) => env,
            Err(e) => return status_of(&e),
        };
        match cipher::ccm_open(&key, &env) {
            Ok(pt) => {
                if !counter_out.is_null() {
                    *counter_out = env.counter;
                }
                give_buffer(pt, out_ptr, out_len);
                StegolockStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Run one adversary scenario against one protocol mode and return the
/// outcome report as a JSON document through `out_ptr`/`out_len`.
/// `scenario` is one of `passive-eavesdrop`, `active-key-substitution`,
/// `tamper`, `replay`; `mode` is `plaintext`, `crypto-only`, `stego-only`
/// or `stego-crypto`. `trials < 0` selects the scenario default.
///
/// # Safety
/// String arguments must be NUL-terminated; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stegolock_attack_run_json(
    scenario: *const c_char,
    mode: *const c_char,
    seed: u64,
    trials: i64,
    out_ptr: *mut *mut u8,
    out_len: *mut usize,
) -> StegolockStatus {
    guard(|| {
        if out_ptr.is_null() || out_len.is_null() {
            return StegolockStatus::NullPointer;
        }
        let scenario: AttackScenario = match read_str(scenario)
            .and_then(|s| s.parse().map_err(|_| StegolockStatus::InvalidInput))
        {
            Ok(s) => s,
            Err(code) => return code,
        };
        let mode: ProtocolMode = match read_str(mode)
            .and_then(|s| s.parse().map_err(|_| StegolockStatus::InvalidInput))
        {
            Ok(m) => m,
            Err(code) => return code,
        };
        let report = if trials < 0 {
            adversary::run_attack(scenario, mode, seed)
        } else {
            adversary::run_attack_with(scenario, mode, seed, trials as u32)
        };
        match report.and_then(|r| Ok(serde_json::to_vec_pretty(&r)?)) {
            Ok(json) => {
                give_buffer(json, out_ptr, out_len);
                StegolockStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// One enrolled lock plus its paired remote, driven in-process.
pub struct StegolockSim {
    client: UnlockClient,
    controller: Controller,
    cover: RgbImage,
    mode: ProtocolMode,
    clock_s: f64,
}

/// Create a simulator: enrolls a lock under `passkey` in the given
/// protocol mode and pairs a matching remote. Returns null on bad input.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stegolock_sim_new(
    passkey: *const c_char,
    mode: *const c_char,
    seed: u64,
) -> *mut StegolockSim {
    catch_unwind(AssertUnwindSafe(|| {
        let passkey = match read_str(passkey).ok().and_then(|s| Passkey::new(s).ok()) {
            Some(p) => p,
            None => return std::ptr::null_mut(),
        };
        let mode: ProtocolMode = match read_str(mode).ok().and_then(|s| s.parse().ok()) {
            Some(m) => m,
            None => return std::ptr::null_mut(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = enroll(&passkey, mode, 5.0, &mut rng);
        let (client, controller) = match (
            UnlockClient::from_enrollment(&record),
            Controller::new(Some(record.clone())),
        ) {
            (Ok(c), Ok(k)) => (c, k),
            _ => return std::ptr::null_mut(),
        };
        let mut pixels = vec![0u8; 64 * 64 * 3];
        rng.fill_bytes(&mut pixels);
        let cover = RgbImage::new(64, 64, pixels).expect("cover dims");
        Box::into_raw(Box::new(StegolockSim {
            client,
            controller,
            cover,
            mode,
            clock_s: 0.0,
        }))
    }))
    .unwrap_or(std::ptr::null_mut())
}

/// Attempt an unlock with `passkey`. Sets `*granted_out` to 1 when the
/// controller opens the lock and 0 otherwise. A wrong passkey is a normal
/// denied outcome, not an error status.
///
/// # Safety
/// `sim` must come from `stegolock_sim_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn stegolock_sim_unlock(
    sim: *mut StegolockSim,
    passkey: *const c_char,
    granted_out: *mut u8,
) -> StegolockStatus {
    guard(|| {
        if sim.is_null() || granted_out.is_null() {
            return StegolockStatus::NullPointer;
        }
        let sim = &mut *sim;
        let passkey =
            match read_str(passkey).and_then(|s| Passkey::new(s).map_err(|e| status_of(&e))) {
                Ok(p) => p,
                Err(code) => return code,
            };
        let needs_cover = matches!(
            sim.mode,
            ProtocolMode::StegoOnly | ProtocolMode::StegoCrypto
        );
        let cover = needs_cover.then_some(&sim.cover);
        let frame = match sim.client.unlock_frame(&passkey, cover) {
            Ok(f) => f,
            Err(e) => return status_of(&e),
        };
        sim.clock_s += 1.0;
        sim.controller.relock_tick(sim.clock_s);
        let decision = sim.controller.handle_frame(&frame, sim.clock_s, "ffi");
        *granted_out = decision.granted() as u8;
        StegolockStatus::Ok
    })
}

/// Number of entries in the controller's audit trail so far.
///
/// # Safety
/// `sim` must come from `stegolock_sim_new` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn stegolock_sim_audit_count(sim: *const StegolockSim) -> u64 {
    if sim.is_null() {
        return 0;
    }
    (*sim).controller.audit().len() as u64
}

/// Release a simulator handle. `sim` may be null.
///
/// # Safety
/// `sim` must come from `stegolock_sim_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stegolock_sim_free(sim: *mut StegolockSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
