//! Motion-vector side-data CSV as exported by codec debug tooling.

use std::fmt::Write as _;
use std::str::FromStr;

use tristream_core::codec::SidecarRecord;

use crate::error::{Error, Result};

pub const SIDECAR_HEADER: &str =
    "framenum,source,blockw,blockh,srcx,srcy,dstx,dsty,flags,motion_x,motion_y,motion_scale";
const FIELDS: usize = 12;

fn field<T: FromStr>(rec: &csv::ByteRecord, line: u64, column: usize) -> Result<T> {
    let raw = &rec[column - 1];
    std::str::from_utf8(raw)
        .ok()
        .filter(|s| !s.is_empty() && !s.starts_with('+'))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Sidecar {
            line,
            column: Some(column),
            reason: format!("'{}' is not a valid integer here", String::from_utf8_lossy(raw)),
        })
}

/// Parse sidecar CSV text. The first line must be the exact header.
pub fn parse_sidecar(text: &str) -> Result<Vec<SidecarRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.byte_records();
    let header_ok = match records.next() {
        Some(Ok(h)) => h.iter().eq(SIDECAR_HEADER.split(',').map(str::as_bytes)),
        Some(Err(_)) | None => false,
    };
    if !header_ok {
        return Err(Error::Sidecar {
            line: 1,
            column: None,
            reason: format!("missing header, expected '{SIDECAR_HEADER}'"),
        });
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::Sidecar {
            line: e.position().map_or(0, |p| p.line()),
            column: None,
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != FIELDS {
            return Err(Error::Sidecar {
                line,
                column: None,
                reason: format!("expected {FIELDS} fields, found {}", rec.len()),
            });
        }
        out.push(SidecarRecord {
            framenum: field(&rec, line, 1)?,
            source: field(&rec, line, 2)?,
            blockw: field(&rec, line, 3)?,
            blockh: field(&rec, line, 4)?,
            srcx: field(&rec, line, 5)?,
            srcy: field(&rec, line, 6)?,
            dstx: field(&rec, line, 7)?,
            dsty: field(&rec, line, 8)?,
            flags: field(&rec, line, 9)?,
            motion_x: field(&rec, line, 10)?,
            motion_y: field(&rec, line, 11)?,
            motion_scale: field(&rec, line, 12)?,
        });
    }
    Ok(out)
}

/// Header plus one LF-terminated line per record.
pub fn write_sidecar(records: &[SidecarRecord]) -> String {
    let mut out = String::with_capacity(SIDECAR_HEADER.len() + 1 + records.len() * 40);
    out.push_str(SIDECAR_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.framenum,
            r.source,
            r.blockw,
            r.blockh,
            r.srcx,
            r.srcy,
            r.dstx,
            r.dsty,
            r.flags,
            r.motion_x,
            r.motion_y,
            r.motion_scale
        );
    }
    out
}
