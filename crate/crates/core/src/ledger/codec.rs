use thiserror::Error;

use super::{LedgerBlock, MetadataRecord, Record, ShareRecord};
use crate::crypto::Digest;
use crate::netsim::NodeId;

const TAG_METADATA: u8 = 1;
const TAG_SHARE: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot decode block at height {height}: {reason}")]
pub struct DecodeError {
    pub height: u64,
    pub reason: &'static str,
}

pub(super) fn encode_body(block: &LedgerBlock, out: &mut Vec<u8>) {
    out.extend_from_slice(&block.height.to_be_bytes());
    out.extend_from_slice(block.prev_hash.as_bytes());
    out.extend_from_slice(&block.timestamp.to_be_bytes());
    out.extend_from_slice(&(block.records.len() as u32).to_be_bytes());
    for r in &block.records {
        encode_record(r, out);
    }
}

fn encode_record(record: &Record, out: &mut Vec<u8>) {
    match record {
        Record::Metadata(m) => {
            out.push(TAG_METADATA);
            out.extend_from_slice(m.file_id.as_bytes());
            out.extend_from_slice(&m.owner_id.0.to_be_bytes());
            out.extend_from_slice(m.content_hash.as_bytes());
            out.extend_from_slice(&(m.wrapped_key.len() as u32).to_be_bytes());
            out.extend_from_slice(&m.wrapped_key);
            out.extend_from_slice(&m.created_at.to_be_bytes());
        }
        Record::Share(s) => {
            out.push(TAG_SHARE);
            out.extend_from_slice(s.file_id.as_bytes());
            out.extend_from_slice(&s.owner_id.0.to_be_bytes());
            out.extend_from_slice(s.grant_hash.as_bytes());
            out.extend_from_slice(&s.created_at.to_be_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], &'static str> {
        let end = self.pos.checked_add(n).ok_or("length overflow")?;
        let slice = self.bytes.get(self.pos..end).ok_or("truncated")?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, &'static str> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, &'static str> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, &'static str> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn digest(&mut self) -> Result<Digest, &'static str> {
        Ok(Digest(self.take(32)?.try_into().expect("32 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn decode_record(r: &mut Reader<'_>) -> Result<Record, &'static str> {
    match r.u8()? {
        TAG_METADATA => {
            let file_id = r.digest()?;
            let owner_id = NodeId(r.u64()?);
            let content_hash = r.digest()?;
            let len = r.u32()? as usize;
            let wrapped_key = r.take(len)?.to_vec();
            let created_at = r.u64()?;
            Ok(Record::Metadata(MetadataRecord {
                file_id,
                owner_id,
                content_hash,
                wrapped_key,
                created_at,
            }))
        }
        TAG_SHARE => Ok(Record::Share(ShareRecord {
            file_id: r.digest()?,
            owner_id: NodeId(r.u64()?),
            grant_hash: r.digest()?,
            created_at: r.u64()?,
        })),
        _ => Err("unknown record tag"),
    }
}

fn decode_block(r: &mut Reader<'_>) -> Result<LedgerBlock, &'static str> {
    let height = r.u64()?;
    let prev_hash = r.digest()?;
    let timestamp = r.u64()?;
    let count = r.u32()? as usize;
    // Smallest record is a share record (1 + 32 + 8 + 32 + 8 bytes).
    if count > r.remaining() / 81 {
        return Err("record count exceeds remaining input");
    }
    let records = (0..count).map(|_| decode_record(r)).collect::<Result<Vec<_>, _>>()?;
    let block_hash = r.digest()?;
    Ok(LedgerBlock {
        height,
        prev_hash,
        timestamp,
        records,
        block_hash,
    })
}

pub(super) fn decode_chain(bytes: &[u8]) -> Result<Vec<LedgerBlock>, DecodeError> {
    let mut reader = Reader { bytes, pos: 0 };
    let mut blocks = Vec::new();
    while reader.remaining() > 0 {
        let height = blocks.len() as u64;
        let block = decode_block(&mut reader).map_err(|reason| DecodeError { height, reason })?;
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(DecodeError {
            height: 0,
            reason: "empty input",
        });
    }
    Ok(blocks)
}
