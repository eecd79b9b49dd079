//! Prime-order cyclic groups.
//!
//! Everything above this module is written against [`PrimeGroup`]. Elements use
//! multiplicative notation regardless of the backend: `a * b` is the group
//! operation and `a.pow(&s)` is exponentiation, so elliptic-curve point
//! addition reads the same as modular multiplication.

mod modp;
mod p256;

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::RngCore;

pub use self::modp::{ModpElement, ModpGroup, ModpParams, ModpScalar, Tiny, Wide62};
pub use self::p256::{P256Element, P256};

/// 62-bit safe-prime group: cheap, large enough that random collisions never
/// happen in tests, and able to embed six bytes per element.
pub type TestGroup = ModpGroup<Wide62>;

/// Safe prime 2039 = 2*1019 + 1. Small enough to brute-force discrete logs.
pub type TinyGroup = ModpGroup<Tiny>;

/// Operations every group element supports.
pub trait ElementOps<S>: Copy + Debug + PartialEq + Eq + Send + Sync + Mul<Output = Self> + Div<Output = Self> {
    fn pow(&self, exp: &S) -> Self;
    fn invert(&self) -> Self;
}

/// Scalars are integers modulo the group order.
pub trait ScalarOps:
    Copy
    + Debug
    + PartialEq
    + Eq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> ScalarOps for T where
    T: Copy
        + Debug
        + PartialEq
        + Eq
        + Send
        + Sync
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

/// A cyclic group of prime order `q` with a fixed generator `g`.
///
/// Encodings are canonical and fixed width so that transcripts hash the same
/// on every run.
pub trait PrimeGroup: Copy + Clone + Debug + Default + PartialEq + Eq + Hash + Send + Sync + 'static {
    type Scalar: ScalarOps;
    type Element: ElementOps<Self::Scalar>;

    const NAME: &'static str;
    /// Width of [`PrimeGroup::encode_element`] output.
    const ELEMENT_LEN: usize;
    /// Width of [`PrimeGroup::encode_scalar`] output.
    const SCALAR_LEN: usize;
    /// Payload bytes carried by one embedded element; zero if the group is too
    /// small to embed anything.
    const EMBED_CHUNK: usize;

    fn generator() -> Self::Element;
    fn identity() -> Self::Element;

    fn pow_g(exp: &Self::Scalar) -> Self::Element {
        Self::generator().pow(exp)
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_invert(s: &Self::Scalar) -> Option<Self::Scalar>;
    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar;
    /// Reduces a 32-byte digest into a scalar.
    fn scalar_from_digest(digest: &[u8; 32]) -> Self::Scalar;

    fn random_element<R: RngCore + ?Sized>(rng: &mut R) -> Self::Element {
        Self::pow_g(&Self::random_scalar(rng))
    }

    fn scalar_zero() -> Self::Scalar {
        Self::scalar_from_u64(0)
    }

    fn scalar_one() -> Self::Scalar {
        Self::scalar_from_u64(1)
    }

    fn encode_element(e: &Self::Element, out: &mut Vec<u8>);
    fn decode_element(bytes: &[u8]) -> Option<Self::Element>;
    fn encode_scalar(s: &Self::Scalar, out: &mut Vec<u8>);
    fn decode_scalar(bytes: &[u8]) -> Option<Self::Scalar>;

    /// Deterministically derives an element whose discrete log is unknown.
    fn hash_to_element(label: &[u8]) -> Self::Element;

    /// Maps exactly [`PrimeGroup::EMBED_CHUNK`] bytes to an element by
    /// try-and-increment over a counter byte. `None` when no counter value in
    /// `0..=255` lands on a valid element.
    fn embed_chunk(chunk: &[u8]) -> Option<Self::Element>;

    /// Inverse of [`PrimeGroup::embed_chunk`].
    fn extract_chunk(e: &Self::Element) -> Option<Vec<u8>>;

    fn element_bytes(e: &Self::Element) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::ELEMENT_LEN);
        Self::encode_element(e, &mut out);
        out
    }

    fn scalar_bytes(s: &Self::Scalar) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::SCALAR_LEN);
        Self::encode_scalar(s, &mut out);
        out
    }
}

/// Lagrange coefficient at zero for participant index `i` (1-based x
/// coordinates) within the set `indices`.
pub fn lagrange_at_zero<G: PrimeGroup>(i: u32, indices: &[u32]) -> Option<G::Scalar> {
    let xi = G::scalar_from_u64(u64::from(i));
    let mut num = G::scalar_one();
    let mut den = G::scalar_one();
    for &j in indices {
        if j == i {
            continue;
        }
        let xj = G::scalar_from_u64(u64::from(j));
        num = num * xj;
        den = den * (xj - xi);
    }
    G::scalar_invert(&den).map(|inv| num * inv)
}
