//! Size-vs-time benchmark: run the encode/transfer/decode pipeline over an
//! image ladder, calibrate the channel model against reference timings,
//! and emit CSV / plot-ready data.

use crate::cipher::{ccm_open, ccm_seal, CipherEnvelope, SecretKey128};
use crate::error::{Error, Result};
use crate::lockproto::{Passkey, ProtocolMode};
use crate::stego::{self, RgbImage};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

/// Reference size-vs-time measurements (carrier kilobytes, total seconds)
/// for a real BLE transfer of stego images at three dimension classes.
/// The default channel model is the least-squares fit over these rows.
pub const REFERENCE_TIMINGS: [(&str, f64, f64); 8] = [
    ("225x400", 6.97, 19.8),
    ("225x400", 21.85, 22.85),
    ("720x1280", 43.0, 36.0),
    ("720x1280", 79.7, 36.01),
    ("720x1280", 224.0, 52.27),
    ("720x1280", 557.0, 64.0),
    ("720x1280", 1070.0, 120.7),
    ("1200x1200", 1100.0, 137.0),
];

/// Linear channel fit: total_s ~= latency_s + size_kb / bandwidth_kbps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Calibration {
    pub bandwidth_kbps: f64,
    pub latency_s: f64,
    pub r_squared: f64,
}

impl Calibration {
    pub fn modeled_total(&self, size_kb: f64) -> f64 {
        self.latency_s + size_kb / self.bandwidth_kbps
    }
}

/// Least-squares line over (size_kb, total_s) points, expressed as
/// bandwidth (1/slope) and latency (intercept).
pub fn calibrate(points: &[(f64, f64)]) -> Result<Calibration> {
    let n = points.len() as f64;
    let distinct_sizes = {
        let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
        sizes.sort_by(|a, b| a.total_cmp(b));
        sizes.dedup();
        sizes.len()
    };
    if distinct_sizes < 2 {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least 2 distinct sizes, got {distinct_sizes}"
        )));
    }
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    if slope <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "fit produced non-positive slope {slope}; sizes and times must trend together"
        )));
    }
    let mean_y = sy / n;
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = points
        .iter()
        .map(|(_, y)| (y - mean_y) * (y - mean_y))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(Calibration {
        bandwidth_kbps: 1.0 / slope,
        latency_s: intercept,
        r_squared,
    })
}

/// Calibration over the built-in reference timings.
pub fn calibrate_reference() -> Calibration {
    let points: Vec<(f64, f64)> = REFERENCE_TIMINGS.iter().map(|r| (r.1, r.2)).collect();
    calibrate(&points).expect("reference table is well-formed")
}

/// Relative errors of the calibrated model against each reference row.
pub fn reference_residuals(cal: &Calibration) -> Vec<f64> {
    REFERENCE_TIMINGS
        .iter()
        .map(|(_, size_kb, total_s)| (cal.modeled_total(*size_kb) - total_s) / total_s)
        .collect()
}

/// Parse a (size_kb, total_s) CSV, with or without a header line.
pub fn parse_timing_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let a = fields.next().unwrap_or("").trim();
        let b = fields.next().unwrap_or("").trim();
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(Error::InvalidInput(format!(
                    "timing CSV line {}: expected size_kb,total_s",
                    lineno + 1
                )))
            }
        }
    }
    Ok(points)
}

/// One measured pipeline run. Encode and decode are wall-clock of the real
/// pipeline; transfer is on the simulated clock.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dimensions: String,
    pub size_kb: f64,
    pub encode_s: f64,
    pub transfer_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
}

/// Run the full pipeline once per image and report per-stage times, rows
/// sorted by carrier size. Unreadable images are skipped with a warning
/// on standard error.
pub fn run_ladder(
    images: &[std::path::PathBuf],
    cal: &Calibration,
    mode: ProtocolMode,
    rng: &mut impl RngCore,
) -> Result<Vec<BenchRow>> {
    let key = SecretKey128::random(rng);
    let passkey = Passkey::new("bench-passkey").unwrap();
    let mut rows = Vec::new();
    for (i, path) in images.iter().enumerate() {
        let cover = match RgbImage::load_png(path) {
            Ok(img) => img,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                continue;
            }
        };
        match measure_one(&cover, &key, &passkey, cal, mode, i as u64 + 1) {
            Ok(row) => rows.push(row),
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    rows.sort_by(|a, b| a.size_kb.total_cmp(&b.size_kb));
    Ok(rows)
}

fn measure_one(
    cover: &RgbImage,
    key: &SecretKey128,
    passkey: &Passkey,
    cal: &Calibration,
    mode: ProtocolMode,
    counter: u64,
) -> Result<BenchRow> {
    let uses_crypto = matches!(mode, ProtocolMode::CryptoOnly | ProtocolMode::StegoCrypto);
    let uses_stego = matches!(mode, ProtocolMode::StegoOnly | ProtocolMode::StegoCrypto);

    let start = Instant::now();
    let inner = if uses_crypto {
        ccm_seal(key, counter, passkey.as_bytes())?.to_bytes()
    } else {
        passkey.as_bytes().to_vec()
    };
    let wire: Vec<u8> = if uses_stego {
        stego::embed(cover, &inner)?.to_png_bytes()?
    } else {
        inner.clone()
    };
    let encode_s = start.elapsed().as_secs_f64();

    let size_kb = wire.len() as f64 / 1000.0;
    let transfer_s = cal.modeled_total(size_kb);

    let start = Instant::now();
    let received = if uses_stego {
        let img = RgbImage::decode_png(&wire[..])?;
        stego::extract(&img)?
    } else {
        wire
    };
    let recovered = if uses_crypto {
        let envelope = CipherEnvelope::from_bytes(&received)?;
        ccm_open(key, &envelope)?
    } else {
        received
    };
    let decode_s = start.elapsed().as_secs_f64();
    if recovered != passkey.as_bytes() {
        return Err(Error::InvalidInput("pipeline did not round-trip".into()));
    }

    Ok(BenchRow {
        dimensions: format!("{}x{}", cover.width(), cover.height()),
        size_kb,
        encode_s,
        transfer_s,
        decode_s,
        total_s: encode_s + transfer_s + decode_s,
    })
}

/// CSV with the stable column set.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("dimensions,size_kb,encode_s,transfer_s,decode_s,total_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.3},{:.6},{:.6},{:.6},{:.6}\n",
            r.dimensions, r.size_kb, r.encode_s, r.transfer_s, r.decode_s, r.total_s
        ));
    }
    out
}

/// Two-column size/time series for external plotting: (size_kb, total_s)
/// and (size_kb, transfer_s).
pub fn plot_data(rows: &[BenchRow]) -> (String, String) {
    let mut total = String::new();
    let mut transfer = String::new();
    for r in rows {
        total.push_str(&format!("{:.3} {:.6}\n", r.size_kb, r.total_s));
        transfer.push_str(&format!("{:.3} {:.6}\n", r.size_kb, r.transfer_s));
    }
    (total, transfer)
}

/// Deterministic noise cover for generated ladders; random pixels keep PNG
/// compression from collapsing the file size.
pub fn generate_cover(width: u32, height: u32, rng: &mut impl RngCore) -> RgbImage {
    let mut pixels = vec![0u8; width as usize * height as usize * 3];
    rng.fill_bytes(&mut pixels);
    RgbImage::new(width, height, pixels).expect("positive dimensions")
}

/// Write a generated dimension ladder to a directory, spanning the
/// reference dimension set, and return the paths.
pub fn write_generated_ladder(
    dir: &Path,
    rng: &mut impl RngCore,
) -> Result<Vec<std::path::PathBuf>> {
    let dims = [(225u32, 400u32), (720, 1280), (1200, 1200)];
    let mut paths = Vec::new();
    std::fs::create_dir_all(dir)?;
    for (w, h) in dims {
        let img = generate_cover(w, h, rng);
        let path = dir.join(format!("cover_{w}x{h}.png"));
        img.save_png(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Frozen from an independent least-squares computation over the
    // reference table.
    const ORACLE_BANDWIDTH: f64 = 10.652979883622212;
    const ORACLE_LATENCY: f64 = 24.67438199812073;
    const ORACLE_R2: f64 = 0.9691619961419283;

    #[test]
    fn exact_two_point_line() {
        let cal = calibrate(&[(0.0, 3.0), (8.0, 4.0)]).unwrap();
        assert!((cal.bandwidth_kbps - 8.0).abs() < 1e-12);
        assert!((cal.latency_s - 3.0).abs() < 1e-12);
        assert!((cal.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_fit_matches_frozen_oracle() {
        let cal = calibrate_reference();
        assert!((cal.bandwidth_kbps - ORACLE_BANDWIDTH).abs() < 1e-9);
        assert!((cal.latency_s - ORACLE_LATENCY).abs() < 1e-9);
        assert!((cal.r_squared - ORACLE_R2).abs() < 1e-12);
        assert!(cal.r_squared >= 0.95);
    }

    #[test]
    fn reference_residuals_within_thirty_percent() {
        let cal = calibrate_reference();
        for (row, residual) in REFERENCE_TIMINGS.iter().zip(reference_residuals(&cal)) {
            assert!(
                residual.abs() <= 0.30,
                "size {} off by {:.1}%",
                row.1,
                residual * 100.0
            );
        }
    }

    #[test]
    fn modeled_times_strictly_monotone_over_reference_sizes() {
        let cal = calibrate_reference();
        let mut sizes: Vec<f64> = REFERENCE_TIMINGS.iter().map(|r| r.1).collect();
        sizes.sort_by(|a, b| a.total_cmp(b));
        for pair in sizes.windows(2) {
            assert!(cal.modeled_total(pair[1]) > cal.modeled_total(pair[0]));
        }
    }

    #[test]
    fn degenerate_input_rejected() {
        assert!(calibrate(&[(5.0, 1.0)]).is_err());
        assert!(calibrate(&[(5.0, 1.0), (5.0, 2.0)]).is_err());
    }

    #[test]
    fn fit_recovers_configured_model_within_one_percent() {
        let truth = Calibration {
            bandwidth_kbps: 12.5,
            latency_s: 20.0,
            r_squared: 1.0,
        };
        let points: Vec<(f64, f64)> = [10.0, 50.0, 200.0, 800.0]
            .iter()
            .map(|&s| (s, truth.modeled_total(s)))
            .collect();
        let cal = calibrate(&points).unwrap();
        assert!((cal.bandwidth_kbps - truth.bandwidth_kbps).abs() / truth.bandwidth_kbps < 0.01);
        assert!((cal.latency_s - truth.latency_s).abs() / truth.latency_s < 0.01);
    }

    #[test]
    fn timing_csv_parses_with_and_without_header() {
        let with = parse_timing_csv("size_kb,total_s\n6.97,19.8\n43,36\n").unwrap();
        let without = parse_timing_csv("6.97,19.8\n43,36\n").unwrap();
        assert_eq!(with, without);
        assert!(parse_timing_csv("6.97,19.8\nbogus,line\n").is_err());
    }

    #[test]
    fn ladder_rows_sorted_and_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        // Small distinct sizes keep the test quick.
        let mut paths = Vec::new();
        for (w, h) in [(120u32, 80u32), (40, 30), (200, 150)] {
            let img = generate_cover(w, h, &mut rng);
            let path = dir.path().join(format!("{w}x{h}.png"));
            img.save_png(&path).unwrap();
            paths.push(path);
        }
        let cal = calibrate_reference();
        let rows = run_ladder(&paths, &cal, ProtocolMode::StegoCrypto, &mut rng).unwrap();
        assert_eq!(rows.len(), 3);
        for pair in rows.windows(2) {
            assert!(pair[0].size_kb < pair[1].size_kb);
            assert!(pair[0].transfer_s < pair[1].transfer_s);
        }
        for r in &rows {
            assert!((r.total_s - (r.encode_s + r.transfer_s + r.decode_s)).abs() < 1e-12);
            assert!(r.size_kb > 0.0);
        }
    }

    #[test]
    fn unreadable_images_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let bogus = dir.path().join("not-a-png.png");
        std::fs::write(&bogus, b"junk").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let cal = calibrate_reference();
        let rows = run_ladder(&[bogus], &cal, ProtocolMode::StegoCrypto, &mut rng).unwrap();
        assert!(rows.is_empty());
        assert_eq!(
            rows_to_csv(&rows),
            "dimensions,size_kb,encode_s,transfer_s,decode_s,total_s\n"
        );
    }
}
