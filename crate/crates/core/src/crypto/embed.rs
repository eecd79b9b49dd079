//! Byte strings to group elements.
//!
//! The stream `pad ‖ bytes ‖ 0^pad` is cut into [`PrimeGroup::EMBED_CHUNK`]
//! sized pieces, where `pad` is the smallest count making the stream length a
//! multiple of the chunk size. Each piece goes through the backend's
//! counter-byte try-and-increment.

use super::CryptoError;
use crate::group::PrimeGroup;

/// Number of elements [`embed`] produces for `len` bytes.
pub fn elements_for<G: PrimeGroup>(len: usize) -> usize {
    (len + 1).div_ceil(G::EMBED_CHUNK)
}

pub fn embed<G: PrimeGroup>(bytes: &[u8]) -> Result<Vec<G::Element>, CryptoError> {
    let chunk = G::EMBED_CHUNK;
    if chunk == 0 {
        return Err(CryptoError::EmbeddingUnsupported);
    }
    let pad = (chunk - (bytes.len() + 1) % chunk) % chunk;
    let mut stream = Vec::with_capacity(bytes.len() + 1 + pad);
    stream.push(pad as u8);
    stream.extend_from_slice(bytes);
    stream.resize(bytes.len() + 1 + pad, 0);
    stream.chunks(chunk).enumerate().map(|(i, c)| G::embed_chunk(c).ok_or(CryptoError::EmbedFailure(i))).collect()
}

pub fn unembed<G: PrimeGroup>(elems: &[G::Element]) -> Result<Vec<u8>, CryptoError> {
    let chunk = G::EMBED_CHUNK;
    if chunk == 0 {
        return Err(CryptoError::EmbeddingUnsupported);
    }
    let mut stream = Vec::with_capacity(elems.len() * chunk);
    for e in elems {
        stream.extend(G::extract_chunk(e).ok_or(CryptoError::MalformedEmbedding)?);
    }
    let (&pad, rest) = stream.split_first().ok_or(CryptoError::MalformedEmbedding)?;
    let pad = usize::from(pad);
    if pad >= chunk || pad > rest.len() {
        return Err(CryptoError::MalformedEmbedding);
    }
    let (body, tail) = rest.split_at(rest.len() - pad);
    if tail.iter().any(|&b| b != 0) {
        return Err(CryptoError::MalformedEmbedding);
    }
    Ok(body.to_vec())
}
