//! Property-based round-trip invariants for every codec in the stack.

use proptest::prelude::*;
use stegolock::cipher::{self, CipherEnvelope, SecretKey128, Verification};
use stegolock::stego::{self, RgbImage};
use stegolock::transport::{Frame, FrameKind};

fn key_strategy() -> impl Strategy<Value = SecretKey128> {
    any::<[u8; 16]>().prop_map(|k| SecretKey128::from_slice(&k).unwrap())
}

fn image_strategy() -> impl Strategy<Value = RgbImage> {
    (4u32..48, 4u32..48).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |pixels| RgbImage::new(w, h, pixels).unwrap())
    })
}

proptest! {
    #[test]
    fn block_decrypt_inverts_encrypt(key in key_strategy(), block in any::<[u8; 16]>()) {
        let ct = cipher::aes128_encrypt_block(&key, &block).unwrap();
        prop_assert_eq!(cipher::aes128_decrypt_block(&key, &ct).unwrap(), block);
        // A random permutation of 2^128 values virtually never fixes a point;
        // the key schedule being wired in wrongly usually shows up here.
        prop_assert_ne!(ct, block);
    }

    #[test]
    fn ccm_open_inverts_seal(
        key in key_strategy(),
        counter in any::<u64>(),
        pt in proptest::collection::vec(any::<u8>(), 1..256),
    ) {
        let env = cipher::ccm_seal(&key, counter, &pt).unwrap();
        prop_assert_eq!(env.ciphertext.len(), pt.len());
        prop_assert_eq!(cipher::ccm_open(&key, &env).unwrap(), pt);
    }

    #[test]
    fn envelope_wire_round_trips(
        key in key_strategy(),
        counter in any::<u64>(),
        pt in proptest::collection::vec(any::<u8>(), 1..128),
    ) {
        let env = cipher::ccm_seal(&key, counter, &pt).unwrap();
        let wire = env.to_bytes();
        prop_assert_eq!(CipherEnvelope::from_bytes(&wire).unwrap(), env);
    }

    #[test]
    fn wrong_key_never_opens(
        key in key_strategy(),
        other in key_strategy(),
        counter in any::<u64>(),
        pt in proptest::collection::vec(any::<u8>(), 1..64),
    ) {
        prop_assume!(key != other);
        let env = cipher::ccm_seal(&key, counter, &pt).unwrap();
        prop_assert!(cipher::ccm_open(&other, &env).is_err());
    }

    #[test]
    fn signature_verifies_and_binds_counter(
        key in key_strategy(),
        counter in 0u64..u64::MAX - 1,
        payload in proptest::collection::vec(any::<u8>(), 0..64),
    ) {
        let signed = cipher::sign_counter(&key, counter, &payload);
        prop_assert_eq!(
            cipher::verify_counter(&key, &signed, counter.wrapping_sub(1).min(counter)),
            if counter == 0 { Verification::Replay } else { Verification::Accept }
        );
        // Same message claimed under a later counter is a replay.
        prop_assert_eq!(cipher::verify_counter(&key, &signed, counter), Verification::Replay);
    }

    #[test]
    fn extract_inverts_embed(
        cover in image_strategy(),
        payload in proptest::collection::vec(any::<u8>(), 0..64),
    ) {
        prop_assume!(payload.len() <= stego::capacity(&cover));
        let stego_img = stego::embed(&cover, &payload).unwrap();
        prop_assert_eq!(stego::extract(&stego_img).unwrap(), payload);
    }

    #[test]
    fn png_round_trip_is_lossless(image in image_strategy()) {
        let bytes = image.to_png_bytes().unwrap();
        let back = RgbImage::decode_png(&bytes).unwrap();
        prop_assert_eq!(back.pixels(), image.pixels());
        prop_assert_eq!((back.width(), back.height()), (image.width(), image.height()));
    }

    #[test]
    fn embed_then_png_then_extract(
        cover in image_strategy(),
        payload in proptest::collection::vec(any::<u8>(), 0..48),
    ) {
        prop_assume!(payload.len() <= stego::capacity(&cover));
        let wire = stego::embed(&cover, &payload).unwrap().to_png_bytes().unwrap();
        let received = RgbImage::decode_png(&wire).unwrap();
        prop_assert_eq!(stego::extract(&received).unwrap(), payload);
    }

    #[test]
    fn frame_wire_round_trips(
        kind in prop_oneof![
            Just(FrameKind::PairReq),
            Just(FrameKind::PairRsp),
            Just(FrameKind::PairConfirm),
            Just(FrameKind::PairRandom),
            Just(FrameKind::KeyDist),
            Just(FrameKind::StegoImage),
            Just(FrameKind::PlaintextUnlock),
            Just(FrameKind::UnlockResult),
            Just(FrameKind::SignedData),
        ],
        payload in proptest::collection::vec(any::<u8>(), 0..512),
    ) {
        let frame = Frame::new(kind, payload).unwrap();
        let mut wire = Vec::new();
        frame.write_to(&mut wire).unwrap();
        let back = Frame::read_from(&mut wire.as_slice()).unwrap();
        prop_assert_eq!(back, frame);
    }
}
