//! NPZ archives: a ZIP container whose members are NPY files.
//!
//! Only the subset of ZIP needed for NPZ is handled: stored and deflate
//! members, no encryption, no ZIP64. Writing is deterministic (sorted
//! members, fixed timestamps) so equal archives serialize to equal bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::npy::{parse_npy, NdArray};
use crate::error::{Error, Result};

const LOCAL_SIG: u32 = 0x0403_4b50;
const CENTRAL_SIG: u32 = 0x0201_4b50;
const EOCD_SIG: u32 = 0x0605_4b50;
const EOCD_LEN: usize = 22;
const METHOD_STORED: u16 = 0;
const METHOD_DEFLATE: u16 = 8;
// 1980-01-01 00:00:00 in MS-DOS format
const DOS_TIME: u16 = 0;
const DOS_DATE: u16 = (1 << 5) | 1;

/// Named arrays of an NPZ file, keyed without the `.npy` suffix.
pub type NpzArchive = BTreeMap<String, NdArray>;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn at(buf: &'a [u8], pos: usize) -> Self {
        Self { buf, pos }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated ZIP structure".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// One raw ZIP member.
#[derive(Debug)]
struct Member {
    name: String,
    data: Vec<u8>,
}

fn find_eocd(bytes: &[u8]) -> Result<usize> {
    if bytes.len() < EOCD_LEN {
        return Err(Error::Format("not a ZIP archive (too short)".into()));
    }
    let lowest = bytes.len().saturating_sub(EOCD_LEN + u16::MAX as usize);
    (lowest..=bytes.len() - EOCD_LEN)
        .rev()
        .find(|&i| bytes[i..i + 4] == EOCD_SIG.to_le_bytes())
        .ok_or_else(|| Error::Format("not a ZIP archive (no end-of-central-directory record)".into()))
}

fn read_members(bytes: &[u8]) -> Result<Vec<Member>> {
    let eocd = find_eocd(bytes)?;
    let mut c = Cursor::at(bytes, eocd + 4);
    let (disk, cd_disk) = (c.u16()?, c.u16()?);
    let (_entries_here, entries) = (c.u16()?, c.u16()?);
    let (cd_size, cd_offset) = (c.u32()?, c.u32()?);
    if disk != 0 || cd_disk != 0 {
        return Err(Error::Format("multi-disk ZIP archives are not supported".into()));
    }
    if entries == u16::MAX || cd_size == u32::MAX || cd_offset == u32::MAX {
        return Err(Error::Format("ZIP64 archives are not supported".into()));
    }

    let mut members = Vec::with_capacity(entries as usize);
    let mut c = Cursor::at(bytes, cd_offset as usize);
    for _ in 0..entries {
        if c.u32()? != CENTRAL_SIG {
            return Err(Error::Format("corrupt ZIP central directory".into()));
        }
        let _made_by = c.u16()?;
        let _needed = c.u16()?;
        let flags = c.u16()?;
        let method = c.u16()?;
        let _time = c.u16()?;
        let _date = c.u16()?;
        let crc = c.u32()?;
        let csize = c.u32()? as usize;
        let usize_ = c.u32()? as usize;
        let name_len = c.u16()? as usize;
        let extra_len = c.u16()? as usize;
        let comment_len = c.u16()? as usize;
        let _disk_start = c.u16()?;
        let _internal = c.u16()?;
        let _external = c.u32()?;
        let offset = c.u32()? as usize;
        let name = String::from_utf8_lossy(c.take(name_len)?).into_owned();
        c.take(extra_len + comment_len)?;

        if flags & 1 != 0 {
            return Err(Error::Format(format!("member '{name}' is encrypted")));
        }
        if csize == u32::MAX as usize || usize_ == u32::MAX as usize || offset == u32::MAX as usize {
            return Err(Error::Format("ZIP64 archives are not supported".into()));
        }
        let mut l = Cursor::at(bytes, offset);
        if l.u32()? != LOCAL_SIG {
            return Err(Error::Format(format!("member '{name}' has a corrupt local header")));
        }
        l.take(22)?;
        let lname = l.u16()? as usize;
        let lextra = l.u16()? as usize;
        l.take(lname + lextra)?;
        let raw = l.take(csize)?;

        let data = match method {
            METHOD_STORED => raw.to_vec(),
            METHOD_DEFLATE => {
                let mut out = Vec::with_capacity(usize_);
                DeflateDecoder::new(raw)
                    .read_to_end(&mut out)
                    .map_err(|e| Error::Format(format!("member '{name}': bad deflate stream: {e}")))?;
                out
            }
            m => {
                return Err(Error::Format(format!(
                    "member '{name}' uses unsupported compression method {m}"
                )))
            }
        };
        if data.len() != usize_ {
            return Err(Error::Format(format!(
                "member '{name}' inflates to {} bytes, directory says {usize_}",
                data.len()
            )));
        }
        if crc32fast::hash(&data) != crc {
            return Err(Error::Format(format!("member '{name}' fails its CRC-32 check")));
        }
        members.push(Member { name, data });
    }
    Ok(members)
}

/// Parses an NPZ archive. Member names lose their `.npy` suffix; a member
/// that is not a valid NPY file is an error naming that member.
pub fn parse_npz(bytes: &[u8]) -> Result<NpzArchive> {
    let mut archive = NpzArchive::new();
    for m in read_members(bytes)? {
        let key = m.name.strip_suffix(".npy").unwrap_or(&m.name).to_string();
        let array = parse_npy(&m.data).map_err(|e| match e {
            Error::UnsupportedDtype(d) => Error::UnsupportedDtype(d),
            other => Error::Format(format!("member '{}' is not a valid NPY array: {other}", m.name)),
        })?;
        if archive.insert(key, array).is_some() {
            return Err(Error::Format(format!("duplicate member name '{}'", m.name)));
        }
    }
    Ok(archive)
}

/// Raw ZIP writer, used by [`write_npz`] and by tests that need odd members.
pub fn write_zip<'a, I>(members: I, compress: bool) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a str, &'a [u8])>,
{
    let mut out = Vec::new();
    let mut central = Vec::new();
    let mut count: u16 = 0;
    for (name, data) in members {
        let crc = crc32fast::hash(data);
        let (method, payload) = if compress {
            let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
            enc.write_all(data).expect("in-memory write");
            (METHOD_DEFLATE, enc.finish().expect("in-memory write"))
        } else {
            (METHOD_STORED, data.to_vec())
        };
        let offset = out.len() as u32;
        let name_bytes = name.as_bytes();

        out.extend_from_slice(&LOCAL_SIG.to_le_bytes());
        out.extend_from_slice(&20u16.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&method.to_le_bytes());
        out.extend_from_slice(&DOS_TIME.to_le_bytes());
        out.extend_from_slice(&DOS_DATE.to_le_bytes());
        out.extend_from_slice(&crc.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.extend_from_slice(&payload);

        central.extend_from_slice(&CENTRAL_SIG.to_le_bytes());
        central.extend_from_slice(&20u16.to_le_bytes());
        central.extend_from_slice(&20u16.to_le_bytes());
        central.extend_from_slice(&0u16.to_le_bytes());
        central.extend_from_slice(&method.to_le_bytes());
        central.extend_from_slice(&DOS_TIME.to_le_bytes());
        central.extend_from_slice(&DOS_DATE.to_le_bytes());
        central.extend_from_slice(&crc.to_le_bytes());
        central.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        central.extend_from_slice(&(data.len() as u32).to_le_bytes());
        central.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        central.extend_from_slice(&[0; 8]); // extra, comment, disk, internal attr
        central.extend_from_slice(&0u32.to_le_bytes());
        central.extend_from_slice(&offset.to_le_bytes());
        central.extend_from_slice(name_bytes);
        count += 1;
    }
    let cd_offset = out.len() as u32;
    out.extend_from_slice(&central);
    out.extend_from_slice(&EOCD_SIG.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(central.len() as u32).to_le_bytes());
    out.extend_from_slice(&cd_offset.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out
}

/// Serializes arrays as `<key>.npy` members, deflate-compressed when `compress` is set.
pub fn write_npz(archive: &NpzArchive, compress: bool) -> Vec<u8> {
    let encoded: Vec<(String, Vec<u8>)> = archive
        .iter()
        .map(|(k, v)| (format!("{k}.npy"), v.to_npy_bytes()))
        .collect();
    write_zip(encoded.iter().map(|(n, d)| (n.as_str(), d.as_slice())), compress)
}
