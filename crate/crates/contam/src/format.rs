//! Binary index layout. Every integer is little-endian; `str` is a `u32`
//! byte length followed by UTF-8 bytes.
//!
//! ```text
//! header    magic "TABAUDIX" | u32 version | u32 flags (bit 0: fold_dates)
//!           str corpus_id | str root | u64 total_rows
//!           u64 files_present | u64 files_indexed
//!           u32 n_skipped | n_skipped × (str path, str reason)
//! catalog   u32 n_tables | n_tables × (str id, u32 n_cols, n_cols × str, u32 row_count)
//! offsets   u32 n_shards | n_shards × (u64 offset, u64 len)
//! postings  one block per shard:
//!           u32 n_entries | n_entries × (str value, u32 n, n × (u32 table, u32 row))
//!           entries sorted by value bytes, postings sorted by (table, row)
//! ```
//!
//! A value lives in shard `fnv1a(value) % n_shards`.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::index::Posting;

pub(crate) const MAGIC: &[u8; 8] = b"TABAUDIX";
pub(crate) const VERSION: u32 = 1;
pub(crate) const FLAG_FOLD_DATES: u32 = 1;

/// Upper bound on any length prefix, to reject garbage before allocating.
const MAX_LEN: u32 = 1 << 30;

pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub(crate) fn shard_of(value: &str, n_shards: usize) -> usize {
    (fnv1a(value) % n_shards as u64) as usize
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> io::Result<String> {
    let len = read_len(r)?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub(crate) fn read_len<R: Read>(r: &mut R) -> io::Result<usize> {
    let n = r.read_u32::<LE>()?;
    if n > MAX_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("length {n} out of range")));
    }
    Ok(n as usize)
}

pub(crate) fn write_entry<W: Write>(w: &mut W, value: &str, postings: &[Posting]) -> io::Result<()> {
    write_str(w, value)?;
    w.write_u32::<LE>(postings.len() as u32)?;
    for p in postings {
        w.write_u32::<LE>(p.table)?;
        w.write_u32::<LE>(p.row)?;
    }
    Ok(())
}

pub(crate) fn read_entry<R: Read>(r: &mut R) -> io::Result<(String, Vec<Posting>)> {
    let value = read_str(r)?;
    let n = read_len(r)?;
    let mut postings = Vec::with_capacity(n);
    for _ in 0..n {
        let table = r.read_u32::<LE>()?;
        let row = r.read_u32::<LE>()?;
        postings.push(Posting { table, row });
    }
    Ok((value, postings))
}

/// Scans one shard block for `wanted` values (which must be sorted), skipping
/// the postings of every other entry without decoding them.
pub(crate) fn find_in_block(block: &[u8], wanted: &[&str]) -> io::Result<Vec<(usize, Vec<Posting>)>> {
    let mut cur = io::Cursor::new(block);
    let n_entries = cur.read_u32::<LE>()?;
    let mut found = Vec::new();
    let mut w = 0;
    for _ in 0..n_entries {
        if w == wanted.len() {
            break;
        }
        let len = read_len(&mut cur)?;
        let start = cur.position() as usize;
        let key = block
            .get(start..start + len)
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "truncated key"))?;
        cur.set_position((start + len) as u64);
        let n = read_len(&mut cur)?;
        while w < wanted.len() && wanted[w].as_bytes() < key {
            w += 1;
        }
        if w < wanted.len() && wanted[w].as_bytes() == key {
            let mut postings = Vec::with_capacity(n);
            for _ in 0..n {
                let table = cur.read_u32::<LE>()?;
                let row = cur.read_u32::<LE>()?;
                postings.push(Posting { table, row });
            }
            found.push((w, postings));
            w += 1;
        } else {
            cur.set_position(cur.position() + 8 * n as u64);
        }
    }
    Ok(found)
}
