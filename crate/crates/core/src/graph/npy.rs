//! NPY array files (format version 1.0 on write; 1.0, 2.0 and 3.0 on read).
//!
//! The writer reproduces `numpy.save` byte for byte: a `0x93 NUMPY` magic,
//! version `1.0`, a little-endian `u16` header length, and a Python dict
//! literal padded with spaces so the data starts on a 64-byte boundary.

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
/// Extra header room numpy reserves so the leading axis can grow in place.
const GROWTH_AXIS_MAX_DIGITS: usize = 21;

/// Element types understood by the parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F4,
    F8,
    I4,
    I8,
    U1,
    Bool,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F4 | DType::I4 => 4,
            DType::F8 | DType::I8 => 8,
            DType::U1 | DType::Bool => 1,
        }
    }

    pub fn descr(self) -> &'static str {
        match self {
            DType::F4 => "<f4",
            DType::F8 => "<f8",
            DType::I4 => "<i4",
            DType::I8 => "<i8",
            DType::U1 => "|u1",
            DType::Bool => "|b1",
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        Ok(match descr {
            "<f4" => DType::F4,
            "<f8" => DType::F8,
            "<i4" => DType::I4,
            "<i8" => DType::I8,
            "|u1" | "<u1" => DType::U1,
            "|b1" | "<b1" => DType::Bool,
            other => return Err(Error::UnsupportedDtype(other.to_string())),
        })
    }

    pub fn is_float(self) -> bool {
        matches!(self, DType::F4 | DType::F8)
    }
}

/// A typed n-dimensional array held as C-order little-endian bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct NdArray {
    dtype: DType,
    shape: Vec<usize>,
    data: Vec<u8>,
}

impl NdArray {
    pub fn from_raw(dtype: DType, shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let want = shape.iter().product::<usize>() * dtype.size();
        if data.len() != want {
            return Err(Error::Format(format!(
                "payload holds {} bytes, shape {:?} of {} needs {want}",
                data.len(),
                shape,
                dtype.descr()
            )));
        }
        Ok(Self { dtype, shape, data })
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::from_raw(DType::F8, shape, data)
    }

    pub fn from_i64(shape: Vec<usize>, values: &[i64]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::from_raw(DType::I8, shape, data)
    }

    pub fn from_bool(shape: Vec<usize>, values: &[bool]) -> Result<Self> {
        let data = values.iter().map(|&b| u8::from(b)).collect();
        Self::from_raw(DType::Bool, shape, data)
    }

    pub fn from_u8(shape: Vec<usize>, values: &[u8]) -> Result<Self> {
        Self::from_raw(DType::U1, shape, values.to_vec())
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn raw(&self) -> &[u8] {
        &self.data
    }

    /// Values widened to `f64`.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        let w = self.dtype.size();
        self.data
            .chunks_exact(w)
            .map(|b| match self.dtype {
                DType::F4 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
                DType::F8 => f64::from_le_bytes(b.try_into().unwrap()),
                DType::I4 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
                DType::I8 => i64::from_le_bytes(b.try_into().unwrap()) as f64,
                DType::U1 | DType::Bool => b[0] as f64,
            })
            .collect()
    }

    /// Integer values; float arrays are accepted only if every value is integral.
    pub fn to_i64_vec(&self) -> Result<Vec<i64>> {
        let w = self.dtype.size();
        if self.dtype.is_float() {
            return self
                .to_f64_vec()
                .into_iter()
                .map(|v| {
                    if v.fract() == 0.0 && v.abs() < 9.0e15 {
                        Ok(v as i64)
                    } else {
                        Err(Error::Validation(format!("expected integers, found {v}")))
                    }
                })
                .collect();
        }
        Ok(self
            .data
            .chunks_exact(w)
            .map(|b| match self.dtype {
                DType::I4 => i32::from_le_bytes(b.try_into().unwrap()) as i64,
                DType::I8 => i64::from_le_bytes(b.try_into().unwrap()),
                _ => b[0] as i64,
            })
            .collect())
    }

    /// Non-negative integer values as indices.
    pub fn to_index_vec(&self) -> Result<Vec<usize>> {
        self.to_i64_vec()?
            .into_iter()
            .map(|v| {
                usize::try_from(v)
                    .map_err(|_| Error::Validation(format!("negative index {v}")))
            })
            .collect()
    }

    /// Serializes to NPY version 1.0, matching `numpy.save`.
    pub fn to_npy_bytes(&self) -> Vec<u8> {
        let mut out = header_bytes(self.dtype, &self.shape, false);
        out.extend_from_slice(&self.data);
        out
    }

    /// Serializes with `fortran_order: True` (column-major payload).
    pub fn to_npy_bytes_fortran(&self) -> Vec<u8> {
        let mut out = header_bytes(self.dtype, &self.shape, true);
        out.extend_from_slice(&reorder(&self.data, &self.shape, self.dtype.size(), false));
        out
    }
}

fn shape_repr(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [a] => format!("({a},)"),
        _ => {
            let parts: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    }
}

fn header_bytes(dtype: DType, shape: &[usize], fortran: bool) -> Vec<u8> {
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': {}, 'shape': {}, }}",
        dtype.descr(),
        if fortran { "True" } else { "False" },
        shape_repr(shape)
    );
    if !shape.is_empty() {
        let axis = if fortran { shape[shape.len() - 1] } else { shape[0] };
        let digits = axis.to_string().len();
        header.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(digits)));
    }
    let hlen = header.len() + 1;
    let padlen = ALIGN - ((MAGIC.len() + 2 + 2 + hlen) % ALIGN);
    let total = hlen + padlen;
    let mut out = Vec::with_capacity(10 + total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(total as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padlen));
    out.push(b'\n');
    out
}

/// Converts between C and Fortran element order. `from_fortran` selects direction.
fn reorder(data: &[u8], shape: &[usize], width: usize, from_fortran: bool) -> Vec<u8> {
    let count: usize = shape.iter().product();
    if shape.len() < 2 || count == 0 {
        return data.to_vec();
    }
    let nd = shape.len();
    let mut c_strides = vec![1usize; nd];
    let mut f_strides = vec![1usize; nd];
    for d in (0..nd - 1).rev() {
        c_strides[d] = c_strides[d + 1] * shape[d + 1];
    }
    for d in 1..nd {
        f_strides[d] = f_strides[d - 1] * shape[d - 1];
    }
    let mut out = vec![0u8; data.len()];
    let mut idx = vec![0usize; nd];
    for _ in 0..count {
        let c: usize = idx.iter().zip(&c_strides).map(|(i, s)| i * s).sum();
        let f: usize = idx.iter().zip(&f_strides).map(|(i, s)| i * s).sum();
        let (src, dst) = if from_fortran { (f, c) } else { (c, f) };
        out[dst * width..(dst + 1) * width].copy_from_slice(&data[src * width..(src + 1) * width]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// Parses an NPY byte stream. Fortran-ordered payloads are returned in C order.
pub fn parse_npy(bytes: &[u8]) -> Result<NdArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic \\x93NUMPY".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (hlen, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated NPY header".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        _ => {
            return Err(Error::Format(format!(
                "unsupported NPY version {major}.{minor}"
            )))
        }
    };
    let end = start + hlen;
    if bytes.len() < end {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Format("NPY header is not valid text".into()))?;
    let header = HeaderParser::new(text).parse()?;
    let dtype = DType::from_descr(&header.descr)?;
    let payload = &bytes[end..];
    let want = header.shape.iter().product::<usize>() * dtype.size();
    if payload.len() != want {
        return Err(Error::Format(format!(
            "NPY payload holds {} bytes, shape {:?} of {} needs {want}",
            payload.len(),
            header.shape,
            header.descr
        )));
    }
    let data = if header.fortran_order {
        reorder(payload, &header.shape, dtype.size(), true)
    } else {
        payload.to_vec()
    };
    NdArray::from_raw(dtype, header.shape, data)
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the small subset of Python literal syntax NPY headers use.
struct HeaderParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            s: text.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, what: &str) -> Error {
        Error::Format(format!("malformed NPY header ({what} at byte {})", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn parse(mut self) -> Result<Header> {
        self.expect(b'{')?;
        let (mut descr, mut fortran, mut shape) = (None, None, None);
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = match self.literal()? {
                Literal::Str(k) => k,
                _ => return Err(self.err("non-string key")),
            };
            self.expect(b':')?;
            let value = self.literal()?;
            match (key.as_str(), value) {
                ("descr", Literal::Str(d)) => descr = Some(d),
                ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
                ("shape", Literal::Tuple(t)) => shape = Some(t),
                (k, _) => return Err(self.err(&format!("unexpected entry '{k}'"))),
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        Ok(Header {
            descr: descr.ok_or_else(|| self.err("missing 'descr'"))?,
            fortran_order: fortran.ok_or_else(|| self.err("missing 'fortran_order'"))?,
            shape: shape.ok_or_else(|| self.err("missing 'shape'"))?,
        })
    }

    fn literal(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(q @ (b'\'' | b'"')) => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != q {
                    self.pos += 1;
                }
                if self.pos >= self.s.len() {
                    return Err(self.err("unterminated string"));
                }
                let text = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Literal::Str(text))
            }
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(c) if c.is_ascii_digit() => {
                            let start = self.pos;
                            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                                self.pos += 1;
                            }
                            let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                            dims.push(text.parse().map_err(|_| self.err("bad dimension"))?);
                            if self.s.get(self.pos) == Some(&b'L') {
                                self.pos += 1;
                            }
                            match self.peek() {
                                Some(b',') => self.pos += 1,
                                Some(b')') => {}
                                _ => return Err(self.err("expected ',' or ')'")),
                            }
                        }
                        _ => return Err(self.err("bad shape tuple")),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ => {
                let rest = &self.s[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Literal::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.err("unexpected token"))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int64_round_trip_is_byte_identical() {
        let a = NdArray::from_i64(vec![3], &[1, 2, 3]).unwrap();
        let bytes = a.to_npy_bytes();
        assert_eq!(bytes.len(), 128 + 24);
        let b = parse_npy(&bytes).unwrap();
        assert_eq!(b, a);
        assert_eq!(b.to_npy_bytes(), bytes);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = NdArray::from_f64(vec![2], &[1.0, 2.0]).unwrap().to_npy_bytes();
        let mut bad = bytes.clone();
        bad[0] = 0x92;
        assert!(matches!(parse_npy(&bad), Err(Error::Format(_))));
        bytes.pop();
        assert!(matches!(parse_npy(&bytes), Err(Error::Format(_))));
        assert!(matches!(parse_npy(&[0x93]), Err(Error::Format(_))));
    }

    #[test]
    fn unsupported_dtype_is_named() {
        let mut bytes = NdArray::from_f64(vec![1], &[1.0]).unwrap().to_npy_bytes();
        let at = bytes.windows(3).position(|w| w == b"<f8").unwrap();
        bytes[at + 1] = b'c';
        match parse_npy(&bytes) {
            Err(Error::UnsupportedDtype(d)) => assert_eq!(d, "<c8"),
            other => panic!("expected unsupported dtype, got {other:?}"),
        }
    }

    #[test]
    fn fortran_payload_is_transposed_on_load() {
        // column-major bytes of [[1,2,3],[4,5,6]] are 1,4,2,5,3,6
        let c = NdArray::from_f64(vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let f = c.to_npy_bytes_fortran();
        let raw: Vec<f64> = f[128..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        assert_eq!(raw, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(parse_npy(&f).unwrap(), c);
    }

    #[test]
    fn header_literal_variants() {
        let text = "{\"descr\": \"<i4\", \"shape\": (2L, 1), \"fortran_order\": False}";
        let h = HeaderParser::new(text).parse().unwrap();
        assert_eq!(h.shape, vec![2, 1]);
        assert_eq!(h.descr, "<i4");
        assert!(HeaderParser::new("{'descr': '<i4'}").parse().is_err());
        assert!(HeaderParser::new("{'descr': '<i4', 'shape': (2,").parse().is_err());
    }
}
