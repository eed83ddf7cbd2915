#ifndef STEGOLOCK_H
#define STEGOLOCK_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of any fallible call.
 */
typedef enum StegolockStatus {
  STEGOLOCK_STATUS_OK = 0,
  /**
   * An argument was malformed (bad UTF-8, bad length, unknown name).
   */
  STEGOLOCK_STATUS_INVALID_INPUT = 1,
  /**
   * The payload does not fit the carrier image.
   */
  STEGOLOCK_STATUS_CAPACITY = 2,
  /**
   * Decryption or integrity verification failed.
   */
  STEGOLOCK_STATUS_AUTH_FAILURE = 3,
  /**
   * Wire bytes did not parse as an envelope or stego payload.
   */
  STEGOLOCK_STATUS_MALFORMED = 4,
  /**
   * A required pointer argument was null.
   */
  STEGOLOCK_STATUS_NULL_POINTER = 5,
  /**
   * Any other internal failure.
   */
  STEGOLOCK_STATUS_INTERNAL = 6,
  /**
   * A panic was caught at the boundary.
   */
  STEGOLOCK_STATUS_PANIC = 7,
} StegolockStatus;

/**
 * One enrolled lock plus its paired remote, driven in-process.
 */
typedef struct StegolockSim StegolockSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Release a buffer previously returned through an out-pointer pair.
 * `ptr` may be null, in which case this is a no-op.
 *
 * # Safety
 * `ptr`/`len` must be exactly as returned by this library, unmodified,
 * and not freed twice.
 */
void stegolock_buffer_free(uint8_t *ptr, uintptr_t len);

/**
 * Payload capacity in bytes of a `width`x`height` RGB carrier.
 */
uint64_t stegolock_capacity(uint32_t width, uint32_t height);

/**
 * Hide `payload` in the least-significant bits of an RGB pixel buffer.
 * `cover_rgb` holds `width*height*3` bytes; the stego result, same size,
 * is written to `out_rgb` (caller-allocated, may alias `cover_rgb`).
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum StegolockStatus stegolock_embed(const uint8_t *cover_rgb,
                                     uint32_t width,
                                     uint32_t height,
                                     const uint8_t *payload,
                                     uintptr_t payload_len,
                                     uint8_t *out_rgb);

/**
 * Recover an embedded payload from an RGB pixel buffer. The payload is
 * returned through `out_ptr`/`out_len`; release it with
 * `stegolock_buffer_free`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum StegolockStatus stegolock_extract(const uint8_t *stego_rgb,
                                       uint32_t width,
                                       uint32_t height,
                                       uint8_t **out_ptr,
                                       uintptr_t *out_len);

/**
 * Authenticated encryption of `plaintext` under a 16-byte key and message
 * counter. The envelope wire bytes (counter, length, ciphertext, MIC) are
 * returned through `out_ptr`/`out_len`.
 *
 * # Safety
 * `key16` must point at 16 readable bytes; other pointers must be valid
 * for the stated lengths.
 */
enum StegolockStatus stegolock_seal(const uint8_t *key16,
                                    uint64_t counter,
                                    const uint8_t *plaintext,
                                    uintptr_t plaintext_len,
                                    uint8_t **out_ptr,
                                    uintptr_t *out_len);

/**
 * Verify and decrypt envelope wire bytes produced by `stegolock_seal`.
 * On success the plaintext is returned through `out_ptr`/`out_len` and
 * the message counter through `counter_out` (may be null).
 *
 * # Safety
 * `key16` must point at 16 readable bytes; other pointers must be valid
 * for the stated lengths.
 */
enum StegolockStatus stegolock_open(const uint8_t *key16,
                                    const uint8_t *wire,
                                    uintptr_t wire_len,
                                    uint8_t **out_ptr,
                                    uintptr_t *out_len,
                                    uint64_t *counter_out);

/**
 * Run one adversary scenario against one protocol mode and return the
 * outcome report as a JSON document through `out_ptr`/`out_len`.
 * `scenario` is one of `passive-eavesdrop`, `active-key-substitution`,
 * `tamper`, `replay`; `mode` is `plaintext`, `crypto-only`, `stego-only`
 * or `stego-crypto`. `trials < 0` selects the scenario default.
 *
 * # Safety
 * String arguments must be NUL-terminated; out-pointers must be valid.
 */
enum StegolockStatus stegolock_attack_run_json(const char *scenario,
                                               const char *mode,
                                               uint64_t seed,
                                               int64_t trials,
                                               uint8_t **out_ptr,
                                               uintptr_t *out_len);

/**
 * Create a simulator: enrolls a lock under `passkey` in the given
 * protocol mode and pairs a matching remote. Returns null on bad input.
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
struct StegolockSim *stegolock_sim_new(const char *passkey, const char *mode, uint64_t seed);

/**
 * Attempt an unlock with `passkey`. Sets `*granted_out` to 1 when the
 * controller opens the lock and 0 otherwise. A wrong passkey is a normal
 * denied outcome, not an error status.
 *
 * # Safety
 * `sim` must come from `stegolock_sim_new` and not be freed.
 */
enum StegolockStatus stegolock_sim_unlock(struct StegolockSim *sim,
                                          const char *passkey,
                                          uint8_t *granted_out);

/**
 * Number of entries in the controller's audit trail so far.
 *
 * # Safety
 * `sim` must come from `stegolock_sim_new` and not be freed.
 */
uint64_t stegolock_sim_audit_count(const struct StegolockSim *sim);

/**
 * Release a simulator handle. `sim` may be null.
 *
 * # Safety
 * `sim` must come from `stegolock_sim_new` and not be freed twice.
 */
void stegolock_sim_free(struct StegolockSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEGOLOCK_H */
