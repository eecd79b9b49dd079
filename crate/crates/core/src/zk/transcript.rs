//! Fiat–Shamir transcript over SHA3-256.
//!
//! Every absorbed field is framed as `len(label) ‖ label ‖ len(data) ‖ data`,
//! so no two distinct sequences of appends hash alike. Challenges are derived
//! from a snapshot of the running state plus a counter and never reset it.

use sha3::{Digest, Sha3_256};

use crate::group::PrimeGroup;

#[derive(Clone)]
pub struct Transcript {
    state: Sha3_256,
}

impl Transcript {
    pub fn new(protocol: &str) -> Self {
        let mut t = Self { state: Sha3_256::new() };
        t.append(b"atom/protocol", protocol.as_bytes());
        t
    }

    pub fn append(&mut self, label: &[u8], data: &[u8]) {
        self.state.update((label.len() as u32).to_be_bytes());
        self.state.update(label);
        self.state.update((data.len() as u64).to_be_bytes());
        self.state.update(data);
    }

    pub fn append_u64(&mut self, label: &[u8], v: u64) {
        self.append(label, &v.to_be_bytes());
    }

    pub fn append_element<G: PrimeGroup>(&mut self, label: &[u8], e: &G::Element) {
        self.append(label, &G::element_bytes(e));
    }

    pub fn append_elements<'a, G: PrimeGroup>(&mut self, label: &[u8], es: impl IntoIterator<Item = &'a G::Element>) {
        let mut buf = Vec::new();
        for e in es {
            G::encode_element(e, &mut buf);
        }
        self.append(label, &buf);
    }

    pub fn challenge_bytes(&self, label: &[u8]) -> [u8; 32] {
        let mut h = self.state.clone();
        h.update(b"challenge");
        h.update((label.len() as u32).to_be_bytes());
        h.update(label);
        h.finalize().into()
    }

    pub fn challenge<G: PrimeGroup>(&self, label: &[u8]) -> G::Scalar {
        G::scalar_from_digest(&self.challenge_bytes(label))
    }

    /// The `i`-th of a family of challenges under one label.
    pub fn challenge_indexed<G: PrimeGroup>(&self, label: &[u8], i: u64) -> G::Scalar {
        let mut l = label.to_vec();
        l.extend_from_slice(&i.to_be_bytes());
        self.challenge::<G>(&l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::P256;

    #[test]
    fn framing_separates_fields() {
        let mut a = Transcript::new("p");
        a.append(b"x", b"ab");
        a.append(b"y", b"c");
        let mut b = Transcript::new("p");
        b.append(b"x", b"a");
        b.append(b"y", b"bc");
        assert_ne!(a.challenge_bytes(b"c"), b.challenge_bytes(b"c"));
        assert_ne!(Transcript::new("p").challenge_bytes(b"c"), Transcript::new("q").challenge_bytes(b"c"));
    }

    #[test]
    fn challenges_depend_on_label_and_index() {
        let t = Transcript::new("p");
        assert_eq!(t.challenge::<P256>(b"u"), t.challenge::<P256>(b"u"));
        assert_ne!(t.challenge_indexed::<P256>(b"u", 0), t.challenge_indexed::<P256>(b"u", 1));
    }
}
