//! Image round trip: send the pixel bytes of a binary PGM/PPM file through
//! the simulated link frame by frame and reassemble the received image.
//!
//! The header is carried out of band so a corrupted header never makes the
//! output unreadable. Non-PNM input is sent whole.

use super::trial::TrialContext;
use crate::error::{Error, Result};
use crate::metrics::BerCount;
use crate::rxchain::EstimatorKind;
use rayon::prelude::*;
use serde::Serialize;

/// Parsed binary PNM header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PnmHeader {
    /// 5 for greyscale (P5), 6 for RGB (P6).
    pub kind: u8,
    pub width: usize,
    pub height: usize,
    pub maxval: usize,
    /// Byte offset of the first pixel.
    pub data_offset: usize,
}

/// Parse a P5/P6 header; `None` for anything else.
pub fn parse_pnm(bytes: &[u8]) -> Option<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'6') {
        return None;
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        loop {
            match bytes.get(pos)? {
                b'#' => {
                    while *bytes.get(pos)? != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos]).ok()?.parse().ok()?;
    }
    if !bytes.get(pos)?.is_ascii_whitespace() || fields[2] == 0 || fields[2] > 65535 {
        return None;
    }
    Some(PnmHeader {
        kind: bytes[1] - b'0',
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_offset: pos + 1,
    })
}

/// Synthetic greyscale test image (gradient with a checkerboard overlay) as P5 bytes.
pub fn test_image(width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            let g = (x * 255 / width.max(1) + y * 255 / height.max(1)) / 2;
            let check = ((x / 16 + y / 16) % 2) * 64;
            out.push(((g + check) % 256) as u8);
        }
    }
    out
}

/// MSB-first bit expansion.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Inverse of [`bytes_to_bits`]; a trailing partial byte is dropped.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

/// Round-trip outcome; `image` holds the reassembled file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageOutcome {
    pub estimator: EstimatorKind,
    pub gamma_eff_db: f64,
    pub header: Option<PnmHeader>,
    pub frames: usize,
    pub payload_bits_per_frame: usize,
    /// Zero bits appended to fill the last frame.
    pub pad_bits: usize,
    pub ber: BerCount,
    pub deep_fades: u64,
    #[serde(skip)]
    pub image: Vec<u8>,
}

/// Send `file` over the link with one estimator. Frame `i` uses trial index `i`.
pub fn image_roundtrip(
    ctx: &TrialContext,
    file: &[u8],
    estimator: EstimatorKind,
    gamma_db: f64,
) -> Result<ImageOutcome> {
    if file.is_empty() {
        return Err(Error::invalid("image file is empty"));
    }
    let header = parse_pnm(file);
    let offset = header.map_or(0, |h| h.data_offset);
    let body = &file[offset..];
    let mut bits = bytes_to_bits(body);
    let n_bits = bits.len();
    let per_frame = ctx.indices.payload.len();
    let frames = n_bits.div_ceil(per_frame).max(1);
    let pad_bits = frames * per_frame - n_bits;
    bits.resize(frames * per_frame, 0);
    let prior = ctx.prior(gamma_db)?;
    let decoded = bits
        .par_chunks(per_frame)
        .enumerate()
        .map(|(i, chunk)| {
            let f = ctx.receive(gamma_db, i as u64, Some(chunk))?;
            let (r, d) = ctx.evaluate(&f, estimator, &prior, i as u64)?;
            Ok((d, r.deep_fade))
        })
        .collect::<Result<Vec<_>>>()?;
    let deep_fades = decoded.iter().filter(|d| d.1).count() as u64;
    let rx_bits: Vec<u8> = decoded.into_iter().flat_map(|d| d.0).take(n_bits).collect();
    let errors = rx_bits.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
    let mut image = file[..offset].to_vec();
    image.extend(bits_to_bytes(&rx_bits));
    Ok(ImageOutcome {
        estimator,
        gamma_eff_db: gamma_db,
        header,
        frames,
        payload_bits_per_frame: per_frame,
        pad_bits,
        ber: BerCount::from_counts(errors, n_bits as u64),
        deep_fades,
        image,
    })
}
