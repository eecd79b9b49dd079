//! ElGamal with an auxiliary `Y` slot for out-of-order peeling.
//!
//! A fresh ciphertext is `(R, c, ⊥) = (g^r, m·X^r, ⊥)`. Members of a group
//! peel their own layer in any order with [`reenc`]: on first contact the
//! group's randomness moves from `R` into `Y`, each member divides `c` by
//! `Y^x`, and fresh randomness for the next group's key accumulates in `R`.
//! Once every member has peeled, `Y` is cleared and `(R, c)` is an ordinary
//! ciphertext under the next key.

use rand::seq::SliceRandom;
use rand::RngCore;

use super::CryptoError;
use crate::codec::{DecodeError, Reader, Wire, Writer};
use crate::group::{ElementOps, PrimeGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair<G: PrimeGroup> {
    pub secret: G::Scalar,
    pub public: G::Element,
}

impl<G: PrimeGroup> KeyPair<G> {
    pub fn from_secret(secret: G::Scalar) -> Self {
        Self { secret, public: G::pow_g(&secret) }
    }
}

pub fn keygen<G: PrimeGroup, R: RngCore + ?Sized>(rng: &mut R) -> KeyPair<G> {
    KeyPair::from_secret(G::random_scalar(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ciphertext<G: PrimeGroup> {
    pub r: G::Element,
    pub c: G::Element,
    /// `None` is the null element ⊥, never the group identity.
    pub y: Option<G::Element>,
}

impl<G: PrimeGroup> Ciphertext<G> {
    pub fn new(r: G::Element, c: G::Element) -> Self {
        Self { r, c, y: None }
    }

    /// Drops the auxiliary slot at a group boundary.
    pub fn cleared(self) -> Self {
        Self { y: None, ..self }
    }

    /// `(Y, R)` after applying the first-contact swap rule.
    pub fn peel_view(&self) -> (G::Element, G::Element) {
        match self.y {
            Some(y) => (y, self.r),
            None => (self.r, G::identity()),
        }
    }
}

impl<G: PrimeGroup> Wire for Ciphertext<G> {
    fn encode(&self, w: &mut Writer) {
        w.element::<G>(&self.r).element::<G>(&self.c);
        match &self.y {
            None => {
                w.u8(0);
            }
            Some(y) => {
                w.u8(1).element::<G>(y);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let rr = r.element::<G>()?;
        let c = r.element::<G>()?;
        let y = match r.u8()? {
            0 => None,
            1 => Some(r.element::<G>()?),
            _ => return Err(DecodeError::Invalid("null sentinel")),
        };
        Ok(Self { r: rr, c, y })
    }
}

pub fn enc_with<G: PrimeGroup>(pk: &G::Element, m: &G::Element, r: &G::Scalar) -> Ciphertext<G> {
    Ciphertext::new(G::pow_g(r), *m * pk.pow(r))
}

pub fn enc<G: PrimeGroup, R: RngCore + ?Sized>(pk: &G::Element, m: &G::Element, rng: &mut R) -> Ciphertext<G> {
    enc_with(pk, m, &G::random_scalar(rng))
}

pub fn dec<G: PrimeGroup>(sk: &G::Scalar, ct: &Ciphertext<G>) -> Result<G::Element, CryptoError> {
    if ct.y.is_some() {
        return Err(CryptoError::NonNullY);
    }
    Ok(ct.c / ct.r.pow(sk))
}

pub fn rerandomize_with<G: PrimeGroup>(
    pk: &G::Element,
    ct: &Ciphertext<G>,
    r: &G::Scalar,
) -> Result<Ciphertext<G>, CryptoError> {
    if ct.y.is_some() {
        return Err(CryptoError::NonNullY);
    }
    Ok(Ciphertext::new(G::pow_g(r) * ct.r, ct.c * pk.pow(r)))
}

pub fn rerandomize<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> Result<Ciphertext<G>, CryptoError> {
    rerandomize_with(pk, ct, &G::random_scalar(rng))
}

/// `output[i] = input[map[i]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self(map)
    }

    pub fn from_map(map: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; map.len()];
        for &i in &map {
            if i >= map.len() || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Self(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn source(&self, out_index: usize) -> usize {
        self.0[out_index]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Output position of input `i`.
    pub fn position_of(&self, input: usize) -> usize {
        self.0.iter().position(|&s| s == input).expect("index in range")
    }

    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| items[i].clone()).collect()
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Permutation) -> Permutation {
        Permutation(next.0.iter().map(|&i| self.0[i]).collect())
    }
}

/// A shuffle together with the witness needed to prove it.
#[derive(Clone, Debug)]
pub struct ShuffleWitness<G: PrimeGroup> {
    pub permutation: Permutation,
    /// Rerandomizers indexed by output position, one per row component.
    pub randomizers: Vec<Vec<G::Scalar>>,
}

/// A batch of rows, one message per row.
pub type Rows<G> = Vec<Vec<Ciphertext<G>>>;

/// Rerandomizes and permutes rows of ciphertexts; every row is one message,
/// possibly spread across several group elements.
pub fn shuffle_rows<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    rows: &[Vec<Ciphertext<G>>],
    rng: &mut R,
) -> Result<(Rows<G>, ShuffleWitness<G>), CryptoError> {
    let permutation = Permutation::random(rows.len(), rng);
    let mut out = Vec::with_capacity(rows.len());
    let mut randomizers = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        let src = &rows[permutation.source(i)];
        let rs: Vec<G::Scalar> = src.iter().map(|_| G::random_scalar(rng)).collect();
        let row = src.iter().zip(&rs).map(|(ct, r)| rerandomize_with(pk, ct, r)).collect::<Result<Vec<_>, _>>()?;
        out.push(row);
        randomizers.push(rs);
    }
    Ok((out, ShuffleWitness { permutation, randomizers }))
}

pub fn shuffle<G: PrimeGroup, R: RngCore + ?Sized>(
    pk: &G::Element,
    cts: &[Ciphertext<G>],
    rng: &mut R,
) -> Result<(Vec<Ciphertext<G>>, Permutation), CryptoError> {
    let rows: Vec<Vec<Ciphertext<G>>> = cts.iter().map(|c| vec![*c]).collect();
    let (out, w) = shuffle_rows(pk, &rows, rng)?;
    Ok((out.into_iter().map(|mut r| r.remove(0)).collect(), w.permutation))
}

/// Output of one peel-and-reblind step, with the intermediate value the
/// correctness proof needs.
#[derive(Clone, Copy, Debug)]
pub struct ReencStep<G: PrimeGroup> {
    pub output: Ciphertext<G>,
    /// `c / Y^x`, before blinding for the next key.
    pub peeled: G::Element,
}

pub fn reenc_with<G: PrimeGroup>(
    sk: &G::Scalar,
    next_pk: Option<&G::Element>,
    ct: &Ciphertext<G>,
    r: &G::Scalar,
) -> ReencStep<G> {
    let (y, rr) = ct.peel_view();
    let peeled = ct.c / y.pow(sk);
    let output = match next_pk {
        Some(pk) => Ciphertext { r: G::pow_g(r) * rr, c: peeled * pk.pow(r), y: Some(y) },
        None => Ciphertext { r: rr, c: peeled, y: Some(y) },
    };
    ReencStep { output, peeled }
}

pub fn reenc<G: PrimeGroup, R: RngCore + ?Sized>(
    sk: &G::Scalar,
    next_pk: Option<&G::Element>,
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> Ciphertext<G> {
    reenc_with(sk, next_pk, ct, &G::random_scalar(rng)).output
}

pub fn compose_group_key<G: PrimeGroup>(pks: &[G::Element]) -> Result<G::Element, CryptoError> {
    let (first, rest) = pks.split_first().ok_or(CryptoError::EmptyGroup)?;
    Ok(rest.iter().fold(*first, |acc, pk| acc * *pk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{TestGroup, TinyGroup, P256};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::{HashMap, HashSet};

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn keygen_is_deterministic_and_pk_is_g_to_sk() {
        let a: KeyPair<P256> = keygen(&mut rng(0));
        let b: KeyPair<P256> = keygen(&mut rng(0));
        assert_eq!(a, b);
        assert_eq!(a.public, P256::pow_g(&a.secret));
    }

    #[test]
    fn distinct_seeds_give_distinct_keys() {
        let pks: HashSet<Vec<u8>> =
            (0..1000u64).map(|s| P256::element_bytes(&keygen::<P256, _>(&mut rng(s)).public)).collect();
        assert_eq!(pks.len(), 1000);
    }

    #[test]
    fn enc_dec_round_trip() {
        let mut r = rng(1);
        let kp: KeyPair<P256> = keygen(&mut r);
        for _ in 0..10 {
            let m = P256::random_element(&mut r);
            assert_eq!(dec::<P256>(&kp.secret, &enc::<P256, _>(&kp.public, &m, &mut r)).unwrap(), m);
        }
        let id = P256::identity();
        assert_eq!(dec::<P256>(&kp.secret, &enc::<P256, _>(&kp.public, &id, &mut r)).unwrap(), id);
    }

    #[test]
    fn two_encryptions_differ_but_agree() {
        let kp: KeyPair<P256> = keygen(&mut rng(2));
        let m = P256::random_element(&mut rng(3));
        let a = enc::<P256, _>(&kp.public, &m, &mut rng(10));
        let b = enc::<P256, _>(&kp.public, &m, &mut rng(11));
        assert_ne!(a.r, b.r);
        assert_ne!(a.c, b.c);
        assert_eq!(dec::<P256>(&kp.secret, &a).unwrap(), m);
        assert_eq!(dec::<P256>(&kp.secret, &b).unwrap(), m);
    }

    #[test]
    fn dec_refuses_non_null_y_and_wrong_key_fails() {
        let mut r = rng(4);
        let kp: KeyPair<P256> = keygen(&mut r);
        let other: KeyPair<P256> = keygen(&mut r);
        let m = P256::random_element(&mut r);
        let mut ct = enc::<P256, _>(&kp.public, &m, &mut r);
        assert_ne!(dec::<P256>(&other.secret, &ct).unwrap(), m);
        ct.y = Some(P256::generator());
        assert_eq!(dec::<P256>(&kp.secret, &ct), Err(CryptoError::NonNullY));
        assert_eq!(rerandomize::<P256, _>(&kp.public, &ct, &mut r), Err(CryptoError::NonNullY));
    }

    #[test]
    fn rerandomization_preserves_plaintext() {
        let mut r = rng(5);
        let kp: KeyPair<P256> = keygen(&mut r);
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&kp.public, &m, &mut r);
        assert_eq!(rerandomize_with::<P256>(&kp.public, &ct, &P256::scalar_zero()).unwrap(), ct);
        let mut seen = HashSet::new();
        for _ in 0..100 {
            let rr = rerandomize::<P256, _>(&kp.public, &ct, &mut r).unwrap();
            assert_eq!(dec::<P256>(&kp.secret, &rr).unwrap(), m);
            seen.insert(rr.to_bytes());
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn shuffle_preserves_decryption_multiset() {
        let mut r = rng(6);
        let kp: KeyPair<TestGroup> = keygen(&mut r);
        let msgs: Vec<_> = (0..8).map(|_| TestGroup::random_element(&mut r)).collect();
        let cts: Vec<_> = msgs.iter().map(|m| enc::<TestGroup, _>(&kp.public, m, &mut r)).collect();
        let (out, perm) = shuffle::<TestGroup, _>(&kp.public, &cts, &mut r).unwrap();
        let mut got: Vec<u64> = out.iter().map(|c| dec::<TestGroup>(&kp.secret, c).unwrap().value()).collect();
        let mut want: Vec<u64> = msgs.iter().map(|m| m.value()).collect();
        for (i, ct) in out.iter().enumerate() {
            assert_eq!(dec::<TestGroup>(&kp.secret, ct).unwrap(), msgs[perm.source(i)]);
        }
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);

        let one = vec![enc::<TestGroup, _>(&kp.public, &msgs[0], &mut r)];
        let (out, _) = shuffle::<TestGroup, _>(&kp.public, &one, &mut r).unwrap();
        assert_eq!(dec::<TestGroup>(&kp.secret, &out[0]).unwrap(), msgs[0]);
    }

    #[test]
    fn shuffle_permutation_is_uniform_for_three() {
        // 6,000 trials over S_3; every bucket must land within 3 sigma of 1,000
        let mut r = rng(7);
        let kp: KeyPair<TestGroup> = keygen(&mut r);
        let msgs: Vec<_> = (0..3).map(|_| TestGroup::random_element(&mut r)).collect();
        let cts: Vec<_> = msgs.iter().map(|m| enc::<TestGroup, _>(&kp.public, m, &mut r)).collect();
        let mut counts: HashMap<Vec<usize>, u32> = HashMap::new();
        for _ in 0..6000 {
            let (_, perm) = shuffle::<TestGroup, _>(&kp.public, &cts, &mut r).unwrap();
            *counts.entry(perm.as_slice().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let sigma = (6000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts.values() {
            assert!((f64::from(*c) - 1000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn shuffle_permutation_is_uniform_for_four() {
        let mut r = rng(8);
        let kp: KeyPair<TinyGroup> = keygen(&mut r);
        let cts: Vec<_> = (1..=4u64)
            .map(|i| enc::<TinyGroup, _>(&kp.public, &TinyGroup::pow_g(&TinyGroup::scalar_from_u64(i)), &mut r))
            .collect();
        let mut counts: HashMap<Vec<usize>, f64> = HashMap::new();
        let trials = 24_000;
        for _ in 0..trials {
            let (_, perm) = shuffle::<TinyGroup, _>(&kp.public, &cts, &mut r).unwrap();
            *counts.entry(perm.as_slice().to_vec()).or_default() += 1.0;
        }
        assert_eq!(counts.len(), 24);
        let expected = f64::from(trials) / 24.0;
        let chi2: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
        // chi-square with 23 dof, p = 0.001 critical value
        assert!(chi2 < 49.73, "chi2 = {chi2}");
    }

    /// Plaintext recovered by peeling `secrets` in order and clearing `Y`.
    fn peel_all<G: PrimeGroup>(
        secrets: &[G::Scalar],
        next: Option<&G::Element>,
        ct: &Ciphertext<G>,
        r: &mut ChaCha20Rng,
    ) -> Ciphertext<G> {
        secrets.iter().fold(*ct, |acc, x| reenc::<G, _>(x, next, &acc, r)).cleared()
    }

    #[test]
    fn out_of_order_reenc_matches_symbolic_exponents() {
        // Tiny group with small scalars: every intermediate value is checked
        // against the closed form computed on exponents.
        type G = TinyGroup;
        let s = |v: u64| G::scalar_from_u64(v);
        let (x1, x2, x_next) = (s(3), s(5), s(7));
        let group_pk = compose_group_key::<G>(&[G::pow_g(&x1), G::pow_g(&x2)]).unwrap();
        assert_eq!(group_pk, G::pow_g(&s(8)));
        let next_pk = G::pow_g(&x_next);
        let m = G::pow_g(&s(11));
        let ct = enc_with::<G>(&group_pk, &m, &s(2));
        // c = g^(11 + 8*2)
        assert_eq!(ct.c, G::pow_g(&s(27)));
        let a = reenc_with::<G>(&x1, Some(&next_pk), &ct, &s(4));
        // Y = g^2, peeled c = g^(27 - 3*2), R = g^4, c' = g^(21 + 7*4)
        assert_eq!(a.output.y, Some(G::pow_g(&s(2))));
        assert_eq!(a.peeled, G::pow_g(&s(21)));
        assert_eq!(a.output.r, G::pow_g(&s(4)));
        assert_eq!(a.output.c, G::pow_g(&s(49)));
        let b = reenc_with::<G>(&x2, Some(&next_pk), &a.output, &s(6));
        // peeled = g^(49 - 5*2), R = g^(4+6), c' = g^(39 + 7*6)
        assert_eq!(b.peeled, G::pow_g(&s(39)));
        assert_eq!(b.output.r, G::pow_g(&s(10)));
        assert_eq!(b.output.c, G::pow_g(&s(81)));
        let handed_over = b.output.cleared();
        assert_eq!(dec::<TinyGroup>(&x_next, &handed_over).unwrap(), m);
    }

    #[test]
    fn out_of_order_reenc_for_group_sizes_one_to_five() {
        let mut r = rng(12);
        type G = TinyGroup;
        for size in 1..=5u64 {
            for trial in 0..20u64 {
                let secrets: Vec<_> = (0..size).map(|i| G::scalar_from_u64(1 + i + trial * 7)).collect();
                let pks: Vec<_> = secrets.iter().map(G::pow_g).collect();
                let group_pk = compose_group_key::<G>(&pks).unwrap();
                let next = keygen::<G, _>(&mut r);
                let m = G::random_element(&mut r);
                let ct = enc::<G, _>(&group_pk, &m, &mut r);
                let out = peel_all(&secrets, Some(&next.public), &ct, &mut r);
                assert_eq!(dec::<G>(&next.secret, &out).unwrap(), m);
                // reverse order peels equally well
                let rev: Vec<_> = secrets.iter().rev().copied().collect();
                let out = peel_all(&rev, Some(&next.public), &ct, &mut r);
                assert_eq!(dec::<G>(&next.secret, &out).unwrap(), m);
            }
        }
    }

    #[test]
    fn last_layer_peel_yields_plaintext() {
        let mut r = rng(13);
        let kp: KeyPair<P256> = keygen(&mut r);
        let m = P256::random_element(&mut r);
        let ct = enc::<P256, _>(&kp.public, &m, &mut r);
        let out = reenc::<P256, _>(&kp.secret, None, &ct, &mut r);
        assert_eq!(out.c, m);
    }

    #[test]
    fn three_chained_groups_of_two() {
        let mut r = rng(14);
        let groups: Vec<Vec<KeyPair<P256>>> = (0..3).map(|_| (0..2).map(|_| keygen(&mut r)).collect()).collect();
        let keys: Vec<_> = groups
            .iter()
            .map(|g| compose_group_key::<P256>(&g.iter().map(|k| k.public).collect::<Vec<_>>()).unwrap())
            .collect();
        let m = P256::random_element(&mut r);
        let mut ct = enc::<P256, _>(&keys[0], &m, &mut r);
        for (i, g) in groups.iter().enumerate() {
            let secrets: Vec<_> = g.iter().map(|k| k.secret).collect();
            ct = peel_all(&secrets, keys.get(i + 1), &ct, &mut r);
        }
        assert_eq!(ct.c, m);
    }

    #[test]
    fn proper_subsets_of_members_cannot_decrypt() {
        let mut r = rng(15);
        type G = TestGroup;
        for size in 2..=4usize {
            let members: Vec<KeyPair<G>> = (0..size).map(|_| keygen(&mut r)).collect();
            let pk = compose_group_key::<G>(&members.iter().map(|k| k.public).collect::<Vec<_>>()).unwrap();
            let m = G::random_element(&mut r);
            let ct = enc::<G, _>(&pk, &m, &mut r);
            for mask in 0..(1u32 << size) - 1 {
                let subset: Vec<_> = (0..size).filter(|i| mask & (1 << i) != 0).map(|i| members[i].secret).collect();
                let out = peel_all(&subset, None, &ct, &mut r);
                assert_ne!(out.c, m, "subset {mask:b} of {size} decrypted");
                let summed = subset.iter().fold(G::scalar_zero(), |a, b| a + *b);
                assert_ne!(dec::<G>(&summed, &ct).unwrap(), m);
            }
        }
    }

    #[test]
    fn compose_is_order_independent() {
        let mut r = rng(16);
        let a: KeyPair<P256> = keygen(&mut r);
        let b: KeyPair<P256> = keygen(&mut r);
        assert_eq!(compose_group_key::<P256>(&[a.public]).unwrap(), a.public);
        assert_eq!(
            compose_group_key::<P256>(&[a.public, b.public]).unwrap(),
            compose_group_key::<P256>(&[b.public, a.public]).unwrap()
        );
        assert_eq!(compose_group_key::<P256>(&[]), Err(CryptoError::EmptyGroup));
    }

    #[test]
    fn ciphertext_encoding_is_fixed_width() {
        let mut r = rng(17);
        let kp: KeyPair<P256> = keygen(&mut r);
        let ct = enc::<P256, _>(&kp.public, &P256::random_element(&mut r), &mut r);
        let bytes = ct.to_bytes();
        assert_eq!(bytes.len(), 2 * 33 + 1);
        assert_eq!(Ciphertext::<P256>::from_bytes(&bytes).unwrap(), ct);
        let peeled = reenc::<P256, _>(&kp.secret, Some(&kp.public), &ct, &mut r);
        assert_eq!(peeled.to_bytes().len(), 3 * 33 + 1);
        assert_eq!(Ciphertext::<P256>::from_hex(&peeled.to_hex()).unwrap(), peeled);
    }

    #[test]
    fn permutation_composition() {
        let a = Permutation::from_map(vec![2, 0, 1]).unwrap();
        let b = Permutation::from_map(vec![1, 2, 0]).unwrap();
        let items = ['x', 'y', 'z'];
        assert_eq!(a.then(&b).apply(&items), b.apply(&a.apply(&items)));
        assert!(Permutation::from_map(vec![0, 0]).is_none());
        assert_eq!(a.position_of(2), 0);
    }
}
