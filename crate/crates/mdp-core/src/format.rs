//! Byte-level encoding primitives for the MDPD artifact files.
//!
//! Layout common to both file kinds (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "MDPD" (4D 44 50 44)
//! version  u8       1 = plain dataset, 2 = modified dataset
//! N,H,W,C,K  5 x u32
//! pixels   N*H*W*C f32, (n, h, w, c) row-major, each in [0, 1]
//! labels   N u32, each < K
//! -- version 2 only --
//! selected_index  N u32
//! target_index    N u32
//! initial_distance N f32
//! final_distance   N f32
//! -- both versions --
//! meta_len u32
//! metadata meta_len bytes of UTF-8 JSON (an object)
//! ```
//!
//! Readers track the byte offset of every field so format errors can name the
//! exact position.

use crate::error::{Error, FormatErrorKind, Result};

pub(crate) const MAGIC: [u8; 4] = *b"MDPD";
pub(crate) const VERSION_DATASET: u8 = 1;
pub(crate) const VERSION_MODIFIED: u8 = 2;

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], path: &str) -> Self {
        ByteReader { buf, pos: 0, path: path.to_string() }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn error_at(&self, offset: u64, kind: FormatErrorKind) -> Error {
        Error::Format { path: self.path.clone(), offset, kind }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let need = self.pos.saturating_add(n);
        if need > self.buf.len() {
            return Err(self.error_at(
                self.offset(),
                FormatErrorKind::Truncated {
                    expected_bytes: need as u64,
                    actual_bytes: self.buf.len() as u64,
                },
            ));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn expect_magic(&mut self) -> Result<()> {
        let at = self.offset();
        let bytes = self.take(4)?;
        if bytes != MAGIC {
            return Err(self.error_at(at, FormatErrorKind::BadMagic));
        }
        Ok(())
    }

    pub fn expect_version(&mut self, expected: u8) -> Result<()> {
        let at = self.offset();
        let found = self.read_u8()?;
        if found != expected {
            return Err(self.error_at(at, FormatErrorKind::VersionMismatch { expected, found }));
        }
        Ok(())
    }

    pub fn read_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn read_u32(&mut self) -> Result<u32> {
        let bytes = self.take(4)?;
        Ok(u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }

    pub fn read_f32(&mut self) -> Result<f32> {
        let bytes = self.take(4)?;
        Ok(f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }

    /// Reads `count` pixel values, each required to be finite and in [0, 1].
    pub fn read_pixels(&mut self, count: usize) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let at = self.offset();
            let v = self.read_f32()?;
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(self.error_at(at, FormatErrorKind::PixelOutOfRange { value: v }));
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Reads `count` labels, each required to be below `num_classes`.
    pub fn read_labels(&mut self, count: usize, num_classes: u32) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let at = self.offset();
            let label = self.read_u32()?;
            if label >= num_classes {
                return Err(
                    self.error_at(at, FormatErrorKind::LabelOutOfRange { label, num_classes })
                );
            }
            out.push(label);
        }
        Ok(out)
    }

    pub fn read_u32_array(&mut self, count: usize) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.read_u32()?);
        }
        Ok(out)
    }

    pub fn read_f32_array(&mut self, count: usize) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.read_f32()?);
        }
        Ok(out)
    }

    /// Reads the trailing length-prefixed JSON metadata object.
    pub fn read_metadata(&mut self) -> Result<serde_json::Map<String, serde_json::Value>> {
        let len = self.read_u32()? as usize;
        let at = self.offset();
        let bytes = self.take(len)?;
        let text = std::str::from_utf8(bytes).map_err(|e| {
            self.error_at(at, FormatErrorKind::CorruptMetadata { detail: e.to_string() })
        })?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            self.error_at(at, FormatErrorKind::CorruptMetadata { detail: e.to_string() })
        })?;
        match value {
            serde_json::Value::Object(map) => Ok(map),
            other => Err(self.error_at(
                at,
                FormatErrorKind::CorruptMetadata {
                    detail: format!("expected a JSON object, got {other}"),
                },
            )),
        }
    }

    /// Fails if any bytes remain unread.
    pub fn finish(&self) -> Result<()> {
        let rest = (self.buf.len() - self.pos) as u64;
        if rest > 0 {
            return Err(self.error_at(self.offset(), FormatErrorKind::TrailingBytes { count: rest }));
        }
        Ok(())
    }
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter::default()
    }

    pub fn push_magic(&mut self) {
        self.buf.extend_from_slice(&MAGIC);
    }

    pub fn push_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn push_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn push_f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn push_f32_slice(&mut self, vs: &[f32]) {
        for &v in vs {
            self.push_f32(v);
        }
    }

    /// Serializes the metadata object compactly (sorted keys) with a u32
    /// length prefix. Byte-stable for equal maps.
    pub fn push_metadata(
        &mut self,
        meta: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<()> {
        let text = serde_json::to_string(meta)?;
        let bytes = text.as_bytes();
        let len = u32::try_from(bytes.len())
            .map_err(|_| Error::InvalidArgument("metadata blob exceeds u32 length".into()))?;
        self.push_u32(len);
        self.buf.extend_from_slice(bytes);
        Ok(())
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}
