//! Decoder for Android's binary XML (AXML) encoding.
//!
//! Only what is needed to walk an `AndroidManifest.xml` is implemented: the
//! string pool (UTF-8 and UTF-16), the resource map, namespace and element
//! chunks. Resource references are not resolved; they surface as
//! `@ref:0x........` tokens.
//!
//! Every read is bounds-checked so arbitrary input yields either a document
//! or a typed [`AxmlError`].

use thiserror::Error;

const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_TYPE: u16 = 0x0003;
const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
const RES_XML_END_NAMESPACE_TYPE: u16 = 0x0101;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;
const RES_XML_CDATA_TYPE: u16 = 0x0104;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;

const UTF8_FLAG: u32 = 1 << 8;
const NO_INDEX: u32 = 0xFFFF_FFFF;

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_ATTRIBUTE: u8 = 0x02;
const TYPE_STRING: u8 = 0x03;
const TYPE_FLOAT: u8 = 0x04;
const TYPE_INT_DEC: u8 = 0x10;
const TYPE_INT_HEX: u8 = 0x11;
const TYPE_INT_BOOLEAN: u8 = 0x12;

/// Resource id of `android:name`, used when obfuscators blank the attribute
/// name in the string pool.
const ATTR_ANDROID_NAME: u32 = 0x0101_0003;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Deepest element nesting accepted.
pub const MAX_DEPTH: usize = 256;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AxmlError {
    #[error("truncated chunk at offset {offset}: need {needed} bytes, {available} available")]
    TruncatedChunk {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("unknown top-level chunk type 0x{0:04x}")]
    UnknownChunkType(u16),
    #[error("string index {index} out of range (pool has {len} strings)")]
    StringIndexOutOfRange { index: u32, len: usize },
    #[error("document has no string pool")]
    MissingStringPool,
    #[error("malformed string {index}: {reason}")]
    MalformedString { index: usize, reason: &'static str },
    #[error("malformed chunk at offset {offset}: {reason}")]
    MalformedChunk { offset: usize, reason: &'static str },
    #[error("unbalanced element nesting: {0}")]
    UnbalancedElements(&'static str),
    #[error("element nesting exceeds {MAX_DEPTH}")]
    NestingTooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub namespace: Option<String>,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub namespace: Option<String>,
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub children: Vec<Element>,
}

impl Element {
    /// Value of attribute `name`, preferring the android namespace.
    pub fn attr(&self, name: &str) -> Option<&str> {
        let mut fallback = None;
        for a in &self.attributes {
            if a.name == name {
                if a.namespace.as_deref() == Some(ANDROID_NS) {
                    return Some(&a.value);
                }
                fallback.get_or_insert(a.value.as_str());
            }
        }
        fallback
    }
}

/// A decoded manifest: the root element tree plus the string pool it was
/// resolved against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestDocument {
    pub root: Element,
    pub strings: Vec<String>,
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&self, offset: usize, len: usize) -> Result<&'a [u8], AxmlError> {
        let end = offset.checked_add(len).ok_or(AxmlError::TruncatedChunk {
            offset,
            needed: len,
            available: 0,
        })?;
        self.buf.get(offset..end).ok_or(AxmlError::TruncatedChunk {
            offset,
            needed: len,
            available: self.buf.len().saturating_sub(offset),
        })
    }

    fn u8(&self, offset: usize) -> Result<u8, AxmlError> {
        Ok(self.bytes(offset, 1)?[0])
    }

    fn u16(&self, offset: usize) -> Result<u16, AxmlError> {
        let b = self.bytes(offset, 2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, offset: usize) -> Result<u32, AxmlError> {
        let b = self.bytes(offset, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[derive(Debug, Clone, Copy)]
struct ChunkHeader {
    kind: u16,
    header_size: usize,
    size: usize,
}

fn chunk_header(r: &Reader, offset: usize) -> Result<ChunkHeader, AxmlError> {
    let kind = r.u16(offset)?;
    let header_size = r.u16(offset + 2)? as usize;
    let size = r.u32(offset + 4)? as usize;
    if header_size < 8 || size < header_size {
        return Err(AxmlError::MalformedChunk {
            offset,
            reason: "header size inconsistent with chunk size",
        });
    }
    // the whole chunk must be present
    r.bytes(offset, size)?;
    Ok(ChunkHeader {
        kind,
        header_size,
        size,
    })
}

fn parse_string_pool(r: &Reader, offset: usize, hdr: ChunkHeader) -> Result<Vec<String>, AxmlError> {
    if hdr.header_size < 28 {
        return Err(AxmlError::MalformedChunk {
            offset,
            reason: "string pool header too small",
        });
    }
    let count = r.u32(offset + 8)? as usize;
    let flags = r.u32(offset + 16)?;
    let strings_start = r.u32(offset + 20)? as usize;
    let utf8 = flags & UTF8_FLAG != 0;

    let chunk = r.bytes(offset, hdr.size)?;
    let chunk = Reader { buf: chunk };
    let offsets_at = hdr.header_size;
    // each offset takes four bytes; bound the count by the chunk size first
    if count > hdr.size / 4 {
        return Err(AxmlError::TruncatedChunk {
            offset: offset + offsets_at,
            needed: count.saturating_mul(4),
            available: hdr.size.saturating_sub(offsets_at),
        });
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let rel = chunk.u32(offsets_at + i * 4)? as usize;
        let at = strings_start.checked_add(rel).ok_or(AxmlError::MalformedString {
            index: i,
            reason: "offset overflow",
        })?;
        let s = if utf8 {
            decode_utf8_string(&chunk, at, i)?
        } else {
            decode_utf16_string(&chunk, at, i)?
        };
        out.push(s);
    }
    Ok(out)
}

fn decode_utf8_len(r: &Reader, at: usize) -> Result<(usize, usize), AxmlError> {
    let first = r.u8(at)? as usize;
    if first & 0x80 != 0 {
        let second = r.u8(at + 1)? as usize;
        Ok((((first & 0x7F) << 8) | second, 2))
    } else {
        Ok((first, 1))
    }
}

fn decode_utf8_string(r: &Reader, at: usize, index: usize) -> Result<String, AxmlError> {
    // utf-16 length (unused), then utf-8 byte length
    let (_, skip) = decode_utf8_len(r, at)?;
    let (len, skip2) = decode_utf8_len(r, at + skip)?;
    let bytes = r.bytes(at + skip + skip2, len)?;
    String::from_utf8(bytes.to_vec()).map_err(|_| AxmlError::MalformedString {
        index,
        reason: "invalid utf-8",
    })
}

fn decode_utf16_string(r: &Reader, at: usize, index: usize) -> Result<String, AxmlError> {
    let first = r.u16(at)? as usize;
    let (len, skip) = if first & 0x8000 != 0 {
        let second = r.u16(at + 2)? as usize;
        (((first & 0x7FFF) << 16) | second, 4)
    } else {
        (first, 2)
    };
    let raw = r.bytes(at + skip, len.saturating_mul(2))?;
    let units: Vec<u16> = raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    String::from_utf16(&units).map_err(|_| AxmlError::MalformedString {
        index,
        reason: "invalid utf-16",
    })
}

struct Pool<'a> {
    strings: &'a [String],
    resource_ids: &'a [u32],
}

impl Pool<'_> {
    fn get(&self, index: u32) -> Result<&str, AxmlError> {
        self.strings
            .get(index as usize)
            .map(String::as_str)
            .ok_or(AxmlError::StringIndexOutOfRange {
                index,
                len: self.strings.len(),
            })
    }

    fn opt(&self, index: u32) -> Result<Option<String>, AxmlError> {
        if index == NO_INDEX {
            Ok(None)
        } else {
            self.get(index).map(|s| Some(s.to_owned()))
        }
    }

    fn attr_name(&self, index: u32) -> Result<String, AxmlError> {
        let name = self.get(index)?;
        if name.is_empty() && self.resource_ids.get(index as usize) == Some(&ATTR_ANDROID_NAME) {
            return Ok("name".to_owned());
        }
        Ok(name.to_owned())
    }
}

fn typed_value(pool: &Pool, raw: u32, data_type: u8, data: u32) -> Result<String, AxmlError> {
    if raw != NO_INDEX {
        return pool.get(raw).map(str::to_owned);
    }
    Ok(match data_type {
        TYPE_STRING => pool.get(data)?.to_owned(),
        TYPE_REFERENCE | TYPE_ATTRIBUTE => format!("@ref:0x{data:08x}"),
        TYPE_INT_DEC => (data as i32).to_string(),
        TYPE_INT_HEX => format!("0x{data:08x}"),
        TYPE_INT_BOOLEAN => (data != 0).to_string(),
        TYPE_FLOAT => f32::from_bits(data).to_string(),
        _ => format!("0x{data:08x}"),
    })
}

fn parse_start_element(r: &Reader, offset: usize, hdr: ChunkHeader, pool: &Pool) -> Result<Element, AxmlError> {
    let ext = offset + hdr.header_size;
    let ns = r.u32(ext)?;
    let name = r.u32(ext + 4)?;
    let attr_start = r.u16(ext + 8)? as usize;
    let attr_size = r.u16(ext + 10)? as usize;
    let attr_count = r.u16(ext + 12)? as usize;
    if attr_count > 0 && attr_size < 20 {
        return Err(AxmlError::MalformedChunk {
            offset,
            reason: "attribute record smaller than 20 bytes",
        });
    }
    let end = offset + hdr.size;
    let mut attributes = Vec::with_capacity(attr_count.min(64));
    for i in 0..attr_count {
        let at = ext + attr_start + i * attr_size;
        if at + 20 > end {
            return Err(AxmlError::TruncatedChunk {
                offset: at,
                needed: 20,
                available: end.saturating_sub(at),
            });
        }
        let a_ns = r.u32(at)?;
        let a_name = r.u32(at + 4)?;
        let raw = r.u32(at + 8)?;
        let data_type = r.u8(at + 15)?;
        let data = r.u32(at + 16)?;
        attributes.push(Attribute {
            namespace: pool.opt(a_ns)?,
            name: pool.attr_name(a_name)?,
            value: typed_value(pool, raw, data_type, data)?,
        });
    }
    Ok(Element {
        namespace: pool.opt(ns)?,
        name: pool.get(name)?.to_owned(),
        attributes,
        children: Vec::new(),
    })
}

/// Decode a binary XML buffer into its element tree.
pub fn parse_axml(bytes: &[u8]) -> Result<ManifestDocument, AxmlError> {
    let r = Reader { buf: bytes };
    let top = chunk_header(&r, 0)?;
    if top.kind != RES_XML_TYPE {
        return Err(AxmlError::UnknownChunkType(top.kind));
    }

    let mut strings: Option<Vec<String>> = None;
    let mut resource_ids: Vec<u32> = Vec::new();
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    let end = top.size;
    let mut offset = top.header_size;
    while offset < end {
        let hdr = chunk_header(&r, offset)?;
        if offset + hdr.size > end {
            return Err(AxmlError::TruncatedChunk {
                offset,
                needed: hdr.size,
                available: end - offset,
            });
        }
        match hdr.kind {
            RES_STRING_POOL_TYPE => {
                if strings.is_none() {
                    strings = Some(parse_string_pool(&r, offset, hdr)?);
                }
            }
            RES_XML_RESOURCE_MAP_TYPE => {
                let n = (hdr.size - hdr.header_size) / 4;
                resource_ids = (0..n)
                    .map(|i| r.u32(offset + hdr.header_size + i * 4))
                    .collect::<Result<_, _>>()?;
            }
            RES_XML_START_ELEMENT_TYPE => {
                let strings = strings.as_deref().ok_or(AxmlError::MissingStringPool)?;
                let pool = Pool {
                    strings,
                    resource_ids: &resource_ids,
                };
                if root.is_some() {
                    return Err(AxmlError::UnbalancedElements("element after document root"));
                }
                if stack.len() >= MAX_DEPTH {
                    return Err(AxmlError::NestingTooDeep);
                }
                stack.push(parse_start_element(&r, offset, hdr, &pool)?);
            }
            RES_XML_END_ELEMENT_TYPE => {
                let strings = strings.as_deref().ok_or(AxmlError::MissingStringPool)?;
                let name = r.u32(offset + hdr.header_size + 4)?;
                let pool = Pool {
                    strings,
                    resource_ids: &resource_ids,
                };
                let name = pool.get(name)?;
                let done = stack
                    .pop()
                    .ok_or(AxmlError::UnbalancedElements("end element without start"))?;
                if done.name != name {
                    return Err(AxmlError::UnbalancedElements("end element name mismatch"));
                }
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            RES_XML_START_NAMESPACE_TYPE | RES_XML_END_NAMESPACE_TYPE | RES_XML_CDATA_TYPE => {
                if let Some(strings) = strings.as_deref() {
                    // prefix/uri or cdata index must resolve
                    let idx = r.u32(offset + hdr.header_size)?;
                    if idx != NO_INDEX && idx as usize >= strings.len() {
                        return Err(AxmlError::StringIndexOutOfRange {
                            index: idx,
                            len: strings.len(),
                        });
                    }
                }
            }
            // unknown inner chunks are skipped
            _ => {}
        }
        offset += hdr.size;
    }

    if !stack.is_empty() {
        return Err(AxmlError::UnbalancedElements("unclosed element at end of document"));
    }
    let strings = strings.ok_or(AxmlError::MissingStringPool)?;
    let root = root.ok_or(AxmlError::UnbalancedElements("document has no root element"))?;
    Ok(ManifestDocument { root, strings })
}
