//! Raw frame dumps and binary PGM/PPM.

use std::fs;
use std::path::Path;

use tristream_core::frames::{FrameBuffer, FrameSequence};

use crate::error::{Error, Result};

/// Headerless concatenated frames, 8-bit, channel-interleaved, row-major.
pub fn load_raw(path: &Path, width: usize, height: usize, channels: usize, fps: f64) -> Result<FrameSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_raw(&bytes, width, height, channels, fps)
}

pub fn parse_raw(bytes: &[u8], width: usize, height: usize, channels: usize, fps: f64) -> Result<FrameSequence> {
    let frame_len = width * height * channels;
    if frame_len == 0 {
        return Err(Error::Input("frame dimensions must be positive".into()));
    }
    if !bytes.len().is_multiple_of(frame_len) {
        let frames = bytes.len() / frame_len;
        return Err(Error::Input(format!(
            "raw size mismatch: expected a multiple of {frame_len} bytes ({} or {} bytes), got {}",
            frames * frame_len,
            (frames + 1) * frame_len,
            bytes.len()
        )));
    }
    let frames = bytes
        .chunks_exact(frame_len)
        .map(|c| FrameBuffer::new(width, height, channels, c.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameSequence::new(frames, fps)?)
}

pub fn save_raw(seq: &FrameSequence, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = seq.frames().iter().flat_map(|f| f.data().iter().copied()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// P5 for one channel, P6 for three; maxval 255.
pub fn encode_pnm(frame: &FrameBuffer) -> Result<Vec<u8>> {
    let magic = match frame.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Input(format!("PNM output needs 1 or 3 channels, got {c}"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    Ok(out)
}

pub fn save_pnm(frame: &FrameBuffer, path: &Path) -> Result<()> {
    let bytes = encode_pnm(frame)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_pnm(path: &Path) -> Result<FrameBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

pub fn decode_pnm(bytes: &[u8]) -> Result<FrameBuffer> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Image("expected P5 or P6 magic".into())),
    };
    let mut at = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and comments before each header number.
        loop {
            match bytes.get(at) {
                Some(b) if b.is_ascii_whitespace() => at += 1,
                Some(b'#') => {
                    while bytes.get(at).is_some_and(|&b| b != b'\n') {
                        at += 1;
                    }
                }
                _ => break,
            }
        }
        let start = at;
        while bytes.get(at).is_some_and(u8::is_ascii_digit) {
            at += 1;
        }
        *field = std::str::from_utf8(&bytes[start..at])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("bad header number at byte {start}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Image(format!("maxval {maxval} unsupported, need 255")));
    }
    if !bytes.get(at).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Image("missing whitespace after maxval".into()));
    }
    let payload = &bytes[at + 1..];
    let expected = width * height * channels;
    if payload.len() != expected {
        return Err(Error::Image(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    FrameBuffer::new(width, height, channels, payload.to_vec()).map_err(|e| Error::Image(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_is_exact() {
        let f = FrameBuffer::filled(2, 2, 1, 128).unwrap();
        let bytes = encode_pnm(&f).unwrap();
        assert_eq!(bytes, b"P5\n2 2\n255\n\x80\x80\x80\x80");
        assert_eq!(decode_pnm(&bytes).unwrap(), f);
    }

    #[test]
    fn ppm_has_twelve_payload_bytes() {
        let f = FrameBuffer::new(2, 2, 3, (0..12).collect()).unwrap();
        let bytes = encode_pnm(&f).unwrap();
        assert!(bytes.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 12);
        assert_eq!(decode_pnm(&bytes).unwrap(), f);
    }

    #[test]
    fn pnm_rejects_garbage() {
        assert!(decode_pnm(b"P3\n1 1\n255\n0").is_err());
        assert!(decode_pnm(b"P5\n1 1\n65535\n00").is_err());
        assert!(decode_pnm(b"P5\n2 2\n255\n\x00").is_err());
        let commented = decode_pnm(b"P5\n# note\n1 1\n255\n\x07").unwrap();
        assert_eq!(commented.data(), &[7]);
    }

    #[test]
    fn raw_sizes() {
        let seq = parse_raw(&[0u8; 512], 16, 16, 1, 30.0).unwrap();
        assert_eq!(seq.len(), 2);
        let err = parse_raw(&[0u8; 513], 16, 16, 1, 30.0).unwrap_err();
        assert!(err.to_string().contains("513"), "{err}");
        assert!(parse_raw(&[0u8; 256], 16, 16, 1, 30.0).is_err());
    }
}
