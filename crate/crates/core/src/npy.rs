//! Reading and writing NPY files (format versions 1.0 and 2.0).
//!
//! Only little-endian `|u1`, `<u2`, `<u4` and `<f4` arrays in C order are
//! supported. Writing always emits version 1.0 with the same header layout
//! numpy produces, so files round-trip byte for byte.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{ArrayData, DType, NdArray};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const HEADER_ALIGN: usize = 64;

pub fn read_array(path: impl AsRef<Path>) -> Result<NdArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_array(array: &NdArray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(array)).map_err(|e| Error::io(path, e))
}

pub fn decode(bytes: &[u8]) -> Result<NdArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY preamble".into()));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "NPY format version {major}.{minor}"
            )))
        }
    };
    let end = start + header_len;
    let header = bytes
        .get(start..end)
        .ok_or_else(|| Error::Format("truncated NPY header".into()))?;
    let header = std::str::from_utf8(header)
        .map_err(|_| Error::Format("NPY header is not valid text".into()))?;
    let header = Header::parse(header)?;
    if header.fortran_order {
        return Err(Error::Unsupported("Fortran-ordered arrays".into()));
    }
    let dtype = match header.descr.as_str() {
        "|u1" | "<u1" | "u1" => DType::U8,
        "<u2" => DType::U16,
        "<u4" => DType::U32,
        "<f4" => DType::F32,
        other => return Err(Error::Unsupported(format!("dtype {other:?}"))),
    };
    let count: usize = header.shape.iter().product();
    let payload = &bytes[end..];
    if payload.len() != count * dtype.size() {
        return Err(Error::Format(format!(
            "payload holds {} bytes, shape {:?} of {} needs {}",
            payload.len(),
            header.shape,
            dtype.descr(),
            count * dtype.size()
        )));
    }
    let data = match dtype {
        DType::U8 => ArrayData::U8(payload.to_vec()),
        DType::U16 => ArrayData::U16(
            payload
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect(),
        ),
        DType::U32 => ArrayData::U32(
            payload
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
        DType::F32 => ArrayData::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
    };
    NdArray::new(header.shape, data)
}

pub fn encode(array: &NdArray) -> Vec<u8> {
    let shape = match array.shape() {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape}, }}",
        array.dtype().descr()
    );
    // magic(6) + version(2) + length(2) + header + '\n' padded to the alignment
    let unpadded = 10 + header.len() + 1;
    let padding = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    header.push_str(&" ".repeat(padding));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + array.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match array.data() {
        ArrayData::U8(v) => out.extend_from_slice(v),
        ArrayData::U16(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::U32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::F32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

#[derive(Debug, PartialEq)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl Header {
    /// Parse the python dict literal of an NPY header.
    fn parse(text: &str) -> Result<Self> {
        let mut p = Cursor {
            s: text.trim_end().as_bytes(),
            pos: 0,
        };
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        p.expect(b'{')?;
        loop {
            p.skip_ws();
            if p.eat(b'}') {
                break;
            }
            let key = p.string()?;
            p.skip_ws();
            p.expect(b':')?;
            p.skip_ws();
            match key.as_str() {
                "descr" => descr = Some(p.string()?),
                "fortran_order" => fortran = Some(p.boolean()?),
                "shape" => shape = Some(p.tuple()?),
                other => return Err(Error::Format(format!("unknown header key {other:?}"))),
            }
            p.skip_ws();
            if !p.eat(b',') {
                p.skip_ws();
                p.expect(b'}')?;
                break;
            }
        }
        let missing = |k: &str| Error::Format(format!("NPY header lacks {k:?}"));
        Ok(Header {
            descr: descr.ok_or_else(|| missing("descr"))?,
            fortran_order: fortran.ok_or_else(|| missing("fortran_order"))?,
            shape: shape.ok_or_else(|| missing("shape"))?,
        })
    }
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, what: &str) -> Error {
        Error::Format(format!("NPY header: expected {what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.s.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.err(&format!("{:?}", b as char)))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.s.get(self.pos) {
            Some(&q @ (b'\'' | b'"')) => q,
            _ => return Err(self.err("string")),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return Err(self.err("closing quote"));
        }
        let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(out)
    }

    fn boolean(&mut self) -> Result<bool> {
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"True") {
            self.pos += 4;
            Ok(true)
        } else if rest.starts_with(b"False") {
            self.pos += 5;
            Ok(false)
        } else {
            Err(self.err("True or False"))
        }
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(b')') {
                return Ok(dims);
            }
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            // numpy on some platforms writes long literals such as `3L`
            let digits = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
            let dim = digits.parse().map_err(|_| self.err("dimension"))?;
            self.eat(b'L');
            dims.push(dim);
            self.skip_ws();
            if !self.eat(b',') {
                self.skip_ws();
                self.expect(b')')?;
                return Ok(dims);
            }
        }
    }
}
