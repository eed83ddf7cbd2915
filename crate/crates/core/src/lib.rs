//! Stego-crypto smart-lock simulator.
//!
//! A desk-scale, hardware-free model of a BLE smart lock secured by the
//! combination of AES-128/CCM encryption and LSB image steganography:
//!
//! - [`cipher`] — AES-128 block primitive, CCM sealing with a 4-byte MIC,
//!   and counter-based message signing for unencrypted channels.
//! - [`stego`] — LSB codec embedding octet payloads in RGB images.
//! - [`pairing`] — simplified BLE legacy pairing (TK/STK/LTK/CSRK/IRK).
//! - [`transport`] — simulated BLE channel with a bandwidth/latency clock
//!   model and an interception hook.
//! - [`adversary`] — pluggable MITM scenarios producing attack reports.
//! - [`lockproto`] — the end-to-end unlock protocol: encrypt, embed, send,
//!   extract, decrypt, decide, actuate.
//! - [`bench`] — size-vs-time ladder and channel-model calibration.

pub mod adversary;
pub mod bench;
pub mod cipher;
pub mod error;
pub mod lockproto;
pub mod pairing;
pub mod stego;
pub mod transport;

pub use error::{Error, Result};
