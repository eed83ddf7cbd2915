//! LSB steganographic codec over 8-bit RGB images.
//!
//! Layout is fixed for interoperability: bits go into the least-significant
//! bit of each subpixel in pixel row-major order, channel order r, g, b.
//! The first 32 embedded bits are the payload length in bytes (big-endian),
//! followed by payload bits MSB-first. Subpixels past the payload keep
//! their original LSBs.

use crate::error::{Error, Result};
use std::io::BufWriter;
use std::path::Path;

/// Length header size in bits.
const HEADER_BITS: usize = 32;

/// An 8-bit RGB image, both cover and stego carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    // row-major r,g,b triples; len == width * height * 3
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidInput(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    /// Solid-color image, handy for tests and generated covers.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    /// Load from PNG. Accepts 8-bit RGB or RGBA (alpha stripped).
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode_png(&bytes)
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        if info.bit_depth != png::BitDepth::Eight {
            return Err(Error::InvalidInput(format!(
                "unsupported PNG bit depth {:?}, need 8-bit",
                info.bit_depth
            )));
        }
        let pixels = match info.color_type {
            png::ColorType::Rgb => buf,
            png::ColorType::Rgba => buf
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unsupported PNG color type {other:?}, need RGB or RGBA"
                )))
            }
        };
        Self::new(info.width, info.height, pixels)
    }

    /// Write as 8-bit RGB PNG. Pixel data survives the round trip bit-exactly.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.encode_png(BufWriter::new(file))
    }

    pub fn encode_png(&self, writer: impl std::io::Write) -> Result<()> {
        let mut encoder = png::Encoder::new(writer, self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&self.pixels)?;
        Ok(())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.encode_png(&mut out)?;
        Ok(out)
    }
}

/// Distortion summary between a cover and its stego counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StegoStats {
    pub changed_subpixels: usize,
    pub max_channel_delta: u8,
    /// Peak signal-to-noise ratio in dB; infinite when images are identical.
    pub psnr_db: f64,
}

/// Payload bytes the image can carry after the 4-byte length header.
pub fn capacity(image: &RgbImage) -> usize {
    let bits = image.pixels.len();
    if bits < HEADER_BITS {
        return 0;
    }
    (bits / 8).saturating_sub(HEADER_BITS / 8)
}

/// Embed a payload into the cover's LSBs. Fails if the payload (plus the
/// 32-bit header) does not fit.
pub fn embed(cover: &RgbImage, payload: &[u8]) -> Result<RgbImage> {
    let available = capacity(cover);
    if payload.len() > available || cover.pixels.len() < HEADER_BITS {
        return Err(Error::Capacity {
            required: payload.len() + HEADER_BITS / 8,
            available,
        });
    }
    let mut out = cover.clone();
    let len_header = (payload.len() as u32).to_be_bytes();
    let bits = len_header
        .iter()
        .chain(payload.iter())
        .flat_map(|byte| (0..8).rev().map(move |i| (byte >> i) & 1));
    for (subpixel, bit) in out.pixels.iter_mut().zip(bits) {
        *subpixel = (*subpixel & 0xfe) | bit;
    }
    Ok(out)
}

/// Read the 32-bit length header, then that many payload bytes.
pub fn extract(stego: &RgbImage) -> Result<Vec<u8>> {
    if stego.pixels.len() < HEADER_BITS {
        return Err(Error::MalformedStego(
            "image too small to hold a length header".into(),
        ));
    }
    let mut read_bits = stego.pixels.iter().map(|p| p & 1);
    let read_byte = |bits: &mut dyn Iterator<Item = u8>| {
        let mut b = 0u8;
        for _ in 0..8 {
            b = (b << 1) | bits.next().unwrap_or(0);
        }
        b
    };
    let mut header = [0u8; 4];
    for h in header.iter_mut() {
        *h = read_byte(&mut read_bits);
    }
    let declared = u32::from_be_bytes(header) as usize;
    if declared > capacity(stego) {
        return Err(Error::MalformedStego(format!(
            "declared payload length {declared} exceeds capacity {}",
            capacity(stego)
        )));
    }
    Ok((0..declared).map(|_| read_byte(&mut read_bits)).collect())
}

/// Exact per-subpixel diff counts and PSNR between two equal-sized images.
pub fn measure(cover: &RgbImage, stego: &RgbImage) -> Result<StegoStats> {
    if cover.width != stego.width || cover.height != stego.height {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            cover.width, cover.height, stego.width, stego.height
        )));
    }
    let mut changed = 0usize;
    let mut max_delta = 0u8;
    let mut sq_err = 0u64;
    for (a, b) in cover.pixels.iter().zip(stego.pixels.iter()) {
        let delta = a.abs_diff(*b);
        if delta > 0 {
            changed += 1;
            max_delta = max_delta.max(delta);
            sq_err += (delta as u64) * (delta as u64);
        }
    }
    let psnr_db = if sq_err == 0 {
        f64::INFINITY
    } else {
        let n = cover.pixels.len() as f64;
        10.0 * (255.0f64 * 255.0 * n / sq_err as f64).log10()
    };
    Ok(StegoStats {
        changed_subpixels: changed,
        max_channel_delta: max_delta,
        psnr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_image(rng: &mut impl RngCore, w: u32, h: u32) -> RgbImage {
        let mut pixels = vec![0u8; w as usize * h as usize * 3];
        rng.fill_bytes(&mut pixels);
        RgbImage::new(w, h, pixels).unwrap()
    }

    #[test]
    fn capacity_matches_direct_arithmetic() {
        let c1 = RgbImage::filled(225, 400, [0; 3]).unwrap();
        assert_eq!(capacity(&c1), 33746);
        let c2 = RgbImage::filled(720, 1280, [0; 3]).unwrap();
        assert_eq!(capacity(&c2), 345596);
        let c3 = RgbImage::filled(1, 1, [0; 3]).unwrap();
        assert_eq!(capacity(&c3), 0);
    }

    #[test]
    fn embed_extract_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cover = random_image(&mut rng, 64, 48);
        for _ in 0..100 {
            let len = rng.gen_range(0..=capacity(&cover).min(512));
            let mut payload = vec![0u8; len];
            rng.fill_bytes(&mut payload);
            let stego = embed(&cover, &payload).unwrap();
            assert_eq!(extract(&stego).unwrap(), payload);
        }
    }

    #[test]
    fn embed_empty_payload_zeroes_header_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cover = random_image(&mut rng, 16, 16);
        let stego = embed(&cover, &[]).unwrap();
        for (i, (a, b)) in cover.pixels().iter().zip(stego.pixels().iter()).enumerate() {
            if i < 32 {
                assert_eq!(b & 1, 0);
                assert_eq!(a & 0xfe, b & 0xfe);
            } else {
                assert_eq!(a, b);
            }
        }
        assert_eq!(extract(&stego).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn embed_touches_only_needed_lsbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cover = random_image(&mut rng, 720, 32);
        let payload = vec![0xa5u8; 76];
        let stego = embed(&cover, &payload).unwrap();
        let stats = measure(&cover, &stego).unwrap();
        assert!(stats.max_channel_delta <= 1);
        assert!(stats.changed_subpixels <= 32 + 76 * 8);
        // Everything past the written region is untouched.
        let written = 32 + 76 * 8;
        assert_eq!(&cover.pixels()[written..], &stego.pixels()[written..]);
    }

    #[test]
    fn oversized_payload_names_required_and_available() {
        let cover = RgbImage::filled(4, 4, [0; 3]).unwrap();
        let payload = vec![0u8; capacity(&cover) + 1];
        match embed(&cover, &payload) {
            Err(Error::Capacity {
                required,
                available,
            }) => {
                assert_eq!(required, payload.len() + 4);
                assert_eq!(available, capacity(&cover));
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn extract_all_zero_lsb_image_is_empty() {
        let img = RgbImage::filled(8, 8, [0x80; 3]).unwrap();
        assert_eq!(extract(&img).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn extract_all_ones_is_malformed() {
        let img = RgbImage::filled(8, 8, [0xff; 3]).unwrap();
        assert!(matches!(extract(&img), Err(Error::MalformedStego(_))));
    }

    #[test]
    fn measure_identity() {
        let img = RgbImage::filled(10, 10, [1, 2, 3]).unwrap();
        let stats = measure(&img, &img).unwrap();
        assert_eq!(stats.changed_subpixels, 0);
        assert_eq!(stats.max_channel_delta, 0);
        assert!(stats.psnr_db.is_infinite());
    }

    #[test]
    fn measure_dimension_mismatch() {
        let a = RgbImage::filled(10, 10, [0; 3]).unwrap();
        let b = RgbImage::filled(10, 11, [0; 3]).unwrap();
        assert!(matches!(measure(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn psnr_closed_form() {
        // 640 LSB flips in a 720x1280 RGB image: 10*log10(255^2 * 2764800 / 640).
        let cover = RgbImage::filled(720, 1280, [0x10; 3]).unwrap();
        let mut stego = cover.clone();
        for p in stego.pixels_mut().iter_mut().take(640) {
            *p ^= 1;
        }
        let stats = measure(&cover, &stego).unwrap();
        assert_eq!(stats.changed_subpixels, 640);
        assert!((stats.psnr_db - 84.4856410768).abs() < 1e-6);
    }

    #[test]
    fn png_round_trip_preserves_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let img = random_image(&mut rng, 33, 21);
        let bytes = img.to_png_bytes().unwrap();
        let back = RgbImage::decode_png(&bytes[..]).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn dimension_invariants_enforced() {
        assert!(RgbImage::new(0, 5, vec![]).is_err());
        assert!(RgbImage::new(2, 2, vec![0u8; 11]).is_err());
    }
}
