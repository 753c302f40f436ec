//! `.trace` files: wire-format envelopes concatenated in routing order.

use std::path::Path;

use thiserror::Error;

use crate::messaging::{wire, Envelope, WireError};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("record {index}: {source}")]
    Record { index: usize, source: WireError },
    #[error("trailing bytes after record {0}")]
    Trailing(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_trace<'a>(envelopes: impl IntoIterator<Item = &'a Envelope>) -> Result<Vec<u8>, TraceError> {
    let mut out = Vec::new();
    for (index, envelope) in envelopes.into_iter().enumerate() {
        let bytes = wire::encode(envelope).map_err(|source| TraceError::Record { index, source })?;
        out.extend_from_slice(&bytes);
    }
    Ok(out)
}

pub fn decode_trace(bytes: &[u8]) -> Result<Vec<Envelope>, TraceError> {
    let mut records = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        let index = records.len();
        let mut newlines = 0;
        let end = rest
            .iter()
            .position(|b| {
                if *b == b'\n' {
                    newlines += 1;
                }
                newlines == wire::RECORD_LINES
            })
            .ok_or(TraceError::Trailing(index))?;
        let (record, tail) = rest.split_at(end + 1);
        records.push(wire::decode(record).map_err(|source| TraceError::Record { index, source })?);
        rest = tail;
    }
    Ok(records)
}

pub fn write_trace(path: &Path, envelopes: &[Envelope]) -> Result<(), TraceError> {
    std::fs::write(path, encode_trace(envelopes)?)?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<Envelope>, TraceError> {
    decode_trace(&std::fs::read(path)?)
}
