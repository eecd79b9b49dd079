//! Canonical binary encoding.
//!
//! All integers are big-endian; variable-length fields carry a `u32` length
//! prefix; group elements and scalars use the fixed widths of their backend.

use thiserror::Error;

use crate::group::PrimeGroup;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("invalid {0}")]
    Invalid(&'static str),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("bad hex: {0}")]
    Hex(String),
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.raw(bytes)
    }

    pub fn element<G: PrimeGroup>(&mut self, e: &G::Element) -> &mut Self {
        G::encode_element(e, &mut self.buf);
        self
    }

    pub fn scalar<G: PrimeGroup>(&mut self, s: &G::Scalar) -> &mut Self {
        G::encode_scalar(s, &mut self.buf);
        self
    }

    pub fn elements<G: PrimeGroup>(&mut self, es: &[G::Element]) -> &mut Self {
        self.u32(es.len() as u32);
        for e in es {
            G::encode_element(e, &mut self.buf);
        }
        self
    }

    pub fn scalars<G: PrimeGroup>(&mut self, ss: &[G::Scalar]) -> &mut Self {
        self.u32(ss.len() as u32);
        for s in ss {
            G::encode_scalar(s, &mut self.buf);
        }
        self
    }

    pub fn item<T: Wire>(&mut self, item: &T) -> &mut Self {
        item.encode(self);
        self
    }

    pub fn seq<T: Wire>(&mut self, items: &[T]) -> &mut Self {
        self.u32(items.len() as u32);
        for it in items {
            it.encode(self);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, DecodeError> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    pub fn element<G: PrimeGroup>(&mut self) -> Result<G::Element, DecodeError> {
        G::decode_element(self.take(G::ELEMENT_LEN)?).ok_or(DecodeError::Invalid("group element"))
    }

    pub fn scalar<G: PrimeGroup>(&mut self) -> Result<G::Scalar, DecodeError> {
        G::decode_scalar(self.take(G::SCALAR_LEN)?).ok_or(DecodeError::Invalid("scalar"))
    }

    fn count(&mut self, width: usize) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(width.max(1)) > self.buf.len() {
            return Err(DecodeError::Truncated);
        }
        Ok(n)
    }

    pub fn elements<G: PrimeGroup>(&mut self) -> Result<Vec<G::Element>, DecodeError> {
        let n = self.count(G::ELEMENT_LEN)?;
        (0..n).map(|_| self.element::<G>()).collect()
    }

    pub fn scalars<G: PrimeGroup>(&mut self) -> Result<Vec<G::Scalar>, DecodeError> {
        let n = self.count(G::SCALAR_LEN)?;
        (0..n).map(|_| self.scalar::<G>()).collect()
    }

    pub fn item<T: Wire>(&mut self) -> Result<T, DecodeError> {
        T::decode(self)
    }

    pub fn seq<T: Wire>(&mut self) -> Result<Vec<T>, DecodeError> {
        // every encoded item is at least one byte
        let n = self.count(1)?;
        (0..n).map(|_| T::decode(self)).collect()
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

/// Types with a canonical byte layout.
pub trait Wire: Sized {
    fn encode(&self, w: &mut Writer);
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }

    fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    fn from_hex(s: &str) -> Result<Self, DecodeError> {
        let bytes = hex::decode(s.trim()).map_err(|e| DecodeError::Hex(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

impl Wire for u32 {
    fn encode(&self, w: &mut Writer) {
        w.u32(*self);
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u32()
    }
}

impl Wire for Vec<u8> {
    fn encode(&self, w: &mut Writer) {
        w.bytes(self);
    }
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_input_is_an_error() {
        let mut r = Reader::new(&[0, 0, 0, 5, 1, 2]);
        assert_eq!(r.bytes(), Err(DecodeError::Truncated));
        assert_eq!(u32::from_bytes(&[0, 0, 0, 1, 9]), Err(DecodeError::Trailing(1)));
    }

    #[test]
    fn hex_helpers_round_trip() {
        let v: Vec<u8> = vec![1, 2, 3];
        let h = v.to_hex();
        assert_eq!(h, "00000003010203");
        assert_eq!(Vec::<u8>::from_hex(&h).unwrap(), v);
        assert!(matches!(Vec::<u8>::from_hex("zz"), Err(DecodeError::Hex(_))));
    }
}
