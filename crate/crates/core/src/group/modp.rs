//! Quadratic-residue subgroups of safe-prime fields, `p = 2q + 1`.

use std::fmt::{self, Debug};
use std::hash::Hash;
use std::marker::PhantomData;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::RngCore;
use sha3::{Digest, Sha3_256};

use super::{ElementOps, PrimeGroup};

pub trait ModpParams: Copy + Clone + Debug + Default + PartialEq + Eq + Hash + Send + Sync + 'static {
    const P: u64;
    const Q: u64;
    /// Generator of the order-`q` subgroup.
    const G: u64;
    const NAME: &'static str;
    const EMBED_CHUNK: usize;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Tiny;

impl ModpParams for Tiny {
    const P: u64 = 2039;
    const Q: u64 = 1019;
    const G: u64 = 4;
    const NAME: &'static str = "modp-2039";
    const EMBED_CHUNK: usize = 0;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Wide62;

impl ModpParams for Wide62 {
    const P: u64 = 4_611_686_018_427_377_339;
    const Q: u64 = 2_305_843_009_213_688_669;
    const G: u64 = 4;
    const NAME: &'static str = "modp-62";
    const EMBED_CHUNK: usize = 6;
}

#[inline]
fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(m)) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ModpScalar<P>(u64, PhantomData<P>);

impl<P: ModpParams> ModpScalar<P> {
    pub fn new(v: u64) -> Self {
        Self(v % P::Q, PhantomData)
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl<P> Debug for ModpScalar<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModpScalar({})", self.0)
    }
}

impl<P: ModpParams> Add for ModpScalar<P> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(((u128::from(self.0) + u128::from(rhs.0)) % u128::from(P::Q)) as u64)
    }
}

impl<P: ModpParams> Sub for ModpScalar<P> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<P: ModpParams> Neg for ModpScalar<P> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new((P::Q - self.0) % P::Q)
    }
}

impl<P: ModpParams> Mul for ModpScalar<P> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(mulmod(self.0, rhs.0, P::Q))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModpElement<P>(u64, PhantomData<P>);

impl<P: ModpParams> ModpElement<P> {
    /// Wraps a raw residue. Callers are responsible for subgroup membership.
    pub fn from_raw(v: u64) -> Self {
        Self(v % P::P, PhantomData)
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl<P> Debug for ModpElement<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModpElement({})", self.0)
    }
}

impl<P: ModpParams> Mul for ModpElement<P> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(mulmod(self.0, rhs.0, P::P), PhantomData)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<P: ModpParams> Div for ModpElement<P> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.invert()
    }
}

impl<P: ModpParams> ElementOps<ModpScalar<P>> for ModpElement<P> {
    fn pow(&self, exp: &ModpScalar<P>) -> Self {
        Self(powmod(self.0, exp.0, P::P), PhantomData)
    }

    fn invert(&self) -> Self {
        Self(powmod(self.0, P::P - 2, P::P), PhantomData)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ModpGroup<P>(PhantomData<P>);

impl<P: ModpParams> ModpGroup<P> {
    fn in_subgroup(x: u64) -> bool {
        x != 0 && x < P::P && powmod(x, P::Q, P::P) == 1
    }
}

impl<P: ModpParams> PrimeGroup for ModpGroup<P> {
    type Scalar = ModpScalar<P>;
    type Element = ModpElement<P>;

    const NAME: &'static str = P::NAME;
    const ELEMENT_LEN: usize = 8;
    const SCALAR_LEN: usize = 8;
    const EMBED_CHUNK: usize = P::EMBED_CHUNK;

    fn generator() -> Self::Element {
        ModpElement(P::G, PhantomData)
    }

    fn identity() -> Self::Element {
        ModpElement(1, PhantomData)
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar {
        ModpScalar::new(v)
    }

    fn scalar_invert(s: &Self::Scalar) -> Option<Self::Scalar> {
        if s.0 == 0 {
            None
        } else {
            Some(ModpScalar::new(powmod(s.0, P::Q - 2, P::Q)))
        }
    }

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar {
        let wide = (u128::from(rng.next_u64()) << 64) | u128::from(rng.next_u64());
        ModpScalar::new((wide % u128::from(P::Q)) as u64)
    }

    fn scalar_from_digest(digest: &[u8; 32]) -> Self::Scalar {
        let mut buf = [0u8; 16];
        buf.copy_from_slice(&digest[..16]);
        ModpScalar::new((u128::from_be_bytes(buf) % u128::from(P::Q)) as u64)
    }

    fn encode_element(e: &Self::Element, out: &mut Vec<u8>) {
        out.extend_from_slice(&e.0.to_be_bytes());
    }

    fn decode_element(bytes: &[u8]) -> Option<Self::Element> {
        let raw = u64::from_be_bytes(bytes.try_into().ok()?);
        Self::in_subgroup(raw).then_some(ModpElement(raw, PhantomData))
    }

    fn encode_scalar(s: &Self::Scalar, out: &mut Vec<u8>) {
        out.extend_from_slice(&s.0.to_be_bytes());
    }

    fn decode_scalar(bytes: &[u8]) -> Option<Self::Scalar> {
        let raw = u64::from_be_bytes(bytes.try_into().ok()?);
        (raw < P::Q).then_some(ModpScalar(raw, PhantomData))
    }

    fn hash_to_element(label: &[u8]) -> Self::Element {
        for ctr in 0u32.. {
            let mut h = Sha3_256::new();
            h.update(b"atom/h2g/");
            h.update(P::NAME.as_bytes());
            h.update(label);
            h.update(ctr.to_be_bytes());
            let d = h.finalize();
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&d[..8]);
            let x = u64::from_be_bytes(buf) % P::P;
            let sq = mulmod(x, x, P::P);
            if sq > 1 {
                return ModpElement(sq, PhantomData);
            }
        }
        unreachable!()
    }

    fn embed_chunk(chunk: &[u8]) -> Option<Self::Element> {
        if P::EMBED_CHUNK == 0 || chunk.len() != P::EMBED_CHUNK {
            return None;
        }
        let mut data = 0u64;
        for &b in chunk {
            data = (data << 8) | u64::from(b);
        }
        let shift = 8 * P::EMBED_CHUNK as u32;
        (0u64..=255)
            .map(|ctr| (ctr << shift) | data)
            .find(|&x| Self::in_subgroup(x))
            .map(|x| ModpElement(x, PhantomData))
    }

    fn extract_chunk(e: &Self::Element) -> Option<Vec<u8>> {
        if P::EMBED_CHUNK == 0 {
            return None;
        }
        let bytes = e.0.to_be_bytes();
        if e.0 >> (8 * P::EMBED_CHUNK as u32) > 255 {
            return None;
        }
        Some(bytes[8 - P::EMBED_CHUNK..].to_vec())
    }
}
