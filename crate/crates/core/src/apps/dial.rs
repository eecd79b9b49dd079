//! Dialing: Alice posts `id(Bob) ‖ Enc_Bob(pk_Alice)` through a round; the
//! exit sorts posts into `m` mailboxes by `id mod m`; Bob trial-decrypts his
//! mailbox and both ends hash their Diffie-Hellman value into a session key.

use rand::distributions::Distribution;
use rand::{Rng, RngCore};
use sha3::{Digest, Sha3_256};
use statrs::distribution::Laplace;

use super::AppError;
use crate::codec::Wire;
use crate::crypto::{cca2_dec, cca2_enc, InnerCiphertext, KeyPair};
use crate::group::{ElementOps, PrimeGroup};

/// Dial noise. `mu` is the mean number of dummies each server adds per
/// round, spread evenly over the mailboxes; `b` is the Laplace scale of each
/// per-mailbox draw.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseParams {
    pub mu: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contact<G: PrimeGroup> {
    pub peer: G::Element,
    pub key: [u8; 32],
}

/// Routing identifier of a public key.
pub fn mailbox_id<G: PrimeGroup>(pk: &G::Element) -> u64 {
    let d = Sha3_256::new().chain_update(b"atom/dial/id").chain_update(G::element_bytes(pk)).finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Every dial, real or dummy, has this many bytes.
pub fn dial_len<G: PrimeGroup>() -> usize {
    8 + InnerCiphertext::<G>::encoded_len(G::ELEMENT_LEN)
}

pub fn shared_key<G: PrimeGroup>(mine: &KeyPair<G>, peer: &G::Element, round: u64) -> [u8; 32] {
    let (a, b) = (G::element_bytes(&mine.public), G::element_bytes(peer));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Sha3_256::new()
        .chain_update(b"atom/dial/key")
        .chain_update(round.to_be_bytes())
        .chain_update(lo)
        .chain_update(hi)
        .chain_update(G::element_bytes(&peer.pow(&mine.secret)))
        .finalize()
        .into()
}

/// Returns the post to submit and the key Alice keeps.
pub fn dial<G: PrimeGroup, R: RngCore + ?Sized>(
    alice: &KeyPair<G>,
    bob: &G::Element,
    round: u64,
    rng: &mut R,
) -> (Vec<u8>, [u8; 32]) {
    let mut post = mailbox_id::<G>(bob).to_be_bytes().to_vec();
    post.extend(cca2_enc::<G, _>(bob, &G::element_bytes(&alice.public), rng).to_bytes());
    (post, shared_key(alice, bob, round))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mailboxes {
    pub boxes: Vec<Vec<Vec<u8>>>,
}

impl Mailboxes {
    pub fn count(&self) -> u64 {
        self.boxes.len() as u64
    }
}

/// Sorts published posts into `m` mailboxes; posts too short to carry an id
/// are dropped.
pub fn deliver(posts: &[Vec<u8>], m: u64) -> Result<Mailboxes, AppError> {
    if m == 0 {
        return Err(AppError::NoMailboxes);
    }
    let mut boxes = vec![Vec::new(); m as usize];
    for p in posts.iter().filter(|p| p.len() >= 8) {
        let id = u64::from_be_bytes(p[..8].try_into().expect("8 bytes"));
        boxes[(id % m) as usize].push(p.clone());
    }
    Ok(Mailboxes { boxes })
}

/// Bob's view of his mailbox. Entries meant for others, and dummies, fail
/// authentication and are skipped.
pub fn open_mailbox<G: PrimeGroup>(bob: &KeyPair<G>, mailboxes: &Mailboxes, round: u64) -> Vec<Contact<G>> {
    let id = mailbox_id::<G>(&bob.public);
    mailboxes.boxes[(id % mailboxes.count()) as usize]
        .iter()
        .filter(|p| p[..8] == id.to_be_bytes())
        .filter_map(|p| InnerCiphertext::<G>::from_bytes(&p[8..]).ok())
        .filter_map(|ict| cca2_dec(&bob.secret, &ict).ok())
        .filter_map(|pk| G::decode_element(&pk))
        .map(|peer| Contact { key: shared_key(bob, &peer, round), peer })
        .collect()
}

/// Dummies per mailbox contributed by `servers` noise generators.
pub fn dummy_counts<R: RngCore + ?Sized>(
    noise: NoiseParams,
    servers: usize,
    m: u64,
    rng: &mut R,
) -> Result<Vec<u64>, AppError> {
    if m == 0 {
        return Err(AppError::NoMailboxes);
    }
    let mut counts = vec![0u64; m as usize];
    if noise.mu <= 0.0 {
        return Ok(counts);
    }
    let lap = Laplace::new(noise.mu / m as f64, noise.b).map_err(|_| AppError::BadNoise(noise.b))?;
    for _ in 0..servers {
        for c in counts.iter_mut() {
            *c += lap.sample(rng).round().max(0.0) as u64;
        }
    }
    Ok(counts)
}

/// Dummy posts with the length and id layout of real dials; their bodies are
/// random, so no recipient can open them.
pub fn gen_dial_dummies<G: PrimeGroup, R: RngCore + ?Sized>(
    noise: NoiseParams,
    servers: usize,
    m: u64,
    rng: &mut R,
) -> Result<Vec<Vec<u8>>, AppError> {
    let counts = dummy_counts(noise, servers, m, rng)?;
    let mut out = Vec::new();
    for (mb, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let id = rng.gen::<u64>() / m * m + mb as u64;
            let mut post = id.to_be_bytes().to_vec();
            let mut junk = vec![0u8; G::ELEMENT_LEN];
            rng.fill_bytes(&mut junk);
            // sealed to a throwaway key so the frame parses like a real dial
            let framed = cca2_enc::<G, _>(&G::pow_g(&G::random_scalar(rng)), &junk, rng);
            post.extend(framed.to_bytes());
            out.push(post);
        }
    }
    Ok(out)
}
