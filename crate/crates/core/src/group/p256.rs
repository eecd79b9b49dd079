//! NIST P-256 backend.

use std::ops::{Div, Mul};

use p256::elliptic_curve::group::Group;
use p256::elliptic_curve::ops::Reduce;
use p256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use p256::elliptic_curve::{Field, PrimeField};
use p256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint, Scalar, U256};
use rand::RngCore;
use sha3::{Digest, Sha3_256};

use super::{ElementOps, PrimeGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct P256Element(pub ProjectivePoint);

// written multiplicatively over an additive curve
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for P256Element {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for P256Element {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl ElementOps<Scalar> for P256Element {
    fn pow(&self, exp: &Scalar) -> Self {
        Self(self.0 * exp)
    }

    fn invert(&self) -> Self {
        Self(-self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct P256;

impl P256 {
    /// Decompresses `x` with the even-`y` root.
    fn lift_x(x: &[u8]) -> Option<P256Element> {
        let mut sec1 = [0u8; 33];
        sec1[0] = 0x02;
        sec1[1..].copy_from_slice(x);
        let ep = EncodedPoint::from_bytes(sec1).ok()?;
        let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&ep).into();
        affine.map(|a| P256Element(ProjectivePoint::from(a)))
    }

    fn x_coordinate(e: &P256Element) -> Option<[u8; 32]> {
        if bool::from(e.0.is_identity()) {
            return None;
        }
        let ep = e.0.to_affine().to_encoded_point(true);
        let mut x = [0u8; 32];
        x.copy_from_slice(ep.x()?.as_slice());
        Some(x)
    }
}

impl PrimeGroup for P256 {
    type Scalar = Scalar;
    type Element = P256Element;

    const NAME: &'static str = "p256";
    const ELEMENT_LEN: usize = 33;
    const SCALAR_LEN: usize = 32;
    const EMBED_CHUNK: usize = 31;

    fn generator() -> Self::Element {
        P256Element(ProjectivePoint::GENERATOR)
    }

    fn identity() -> Self::Element {
        P256Element(ProjectivePoint::IDENTITY)
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar {
        Scalar::from(v)
    }

    fn scalar_invert(s: &Self::Scalar) -> Option<Self::Scalar> {
        s.invert().into()
    }

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar {
        Scalar::random(rng)
    }

    fn scalar_from_digest(digest: &[u8; 32]) -> Self::Scalar {
        <Scalar as Reduce<U256>>::reduce_bytes(FieldBytes::from_slice(digest))
    }

    fn encode_element(e: &Self::Element, out: &mut Vec<u8>) {
        // The identity has no SEC1 compressed form; it is written as 33 zeros.
        if bool::from(e.0.is_identity()) {
            out.extend_from_slice(&[0u8; 33]);
        } else {
            out.extend_from_slice(e.0.to_affine().to_encoded_point(true).as_bytes());
        }
    }

    fn decode_element(bytes: &[u8]) -> Option<Self::Element> {
        if bytes.len() != 33 {
            return None;
        }
        if bytes.iter().all(|&b| b == 0) {
            return Some(Self::identity());
        }
        let ep = EncodedPoint::from_bytes(bytes).ok()?;
        if !ep.is_compressed() {
            return None;
        }
        let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&ep).into();
        affine.map(|a| P256Element(ProjectivePoint::from(a)))
    }

    fn encode_scalar(s: &Self::Scalar, out: &mut Vec<u8>) {
        out.extend_from_slice(s.to_bytes().as_slice());
    }

    fn decode_scalar(bytes: &[u8]) -> Option<Self::Scalar> {
        if bytes.len() != 32 {
            return None;
        }
        Scalar::from_repr(*FieldBytes::from_slice(bytes)).into()
    }

    fn hash_to_element(label: &[u8]) -> Self::Element {
        for ctr in 0u32.. {
            let mut h = Sha3_256::new();
            h.update(b"atom/h2g/p256/");
            h.update(label);
            h.update(ctr.to_be_bytes());
            let x: [u8; 32] = h.finalize().into();
            if let Some(e) = Self::lift_x(&x) {
                return e;
            }
        }
        unreachable!()
    }

    fn embed_chunk(chunk: &[u8]) -> Option<Self::Element> {
        if chunk.len() != Self::EMBED_CHUNK {
            return None;
        }
        let mut x = [0u8; 32];
        x[1..].copy_from_slice(chunk);
        (0u8..=255).find_map(|ctr| {
            x[0] = ctr;
            Self::lift_x(&x)
        })
    }

    fn extract_chunk(e: &Self::Element) -> Option<Vec<u8>> {
        Self::x_coordinate(e).map(|x| x[1..].to_vec())
    }
}
