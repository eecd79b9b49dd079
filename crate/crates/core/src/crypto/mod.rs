//! Public-key layer of the mixnet: ElGamal with out-of-order peeling, the
//! authenticated inner encryption, byte embedding and hash commitments.

pub mod cca2;
pub mod commit;
pub mod elgamal;
pub mod embed;

use thiserror::Error;

pub use self::cca2::{cca2_dec, cca2_enc, cca2_open, InnerCiphertext};
pub use self::commit::{commit, verify_commit, Commitment};
pub use self::elgamal::{
    compose_group_key, dec, enc, enc_with, keygen, reenc, reenc_with, rerandomize, rerandomize_with, shuffle,
    shuffle_rows, Ciphertext, KeyPair, Permutation, ReencStep, Rows, ShuffleWitness,
};
pub use self::embed::{elements_for, embed, unembed};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("ciphertext has a non-null Y component")]
    NonNullY,
    #[error("cannot compose the key of an empty group")]
    EmptyGroup,
    #[error("authenticated decryption failed")]
    AuthFailure,
    #[error("no counter value maps chunk {0} to a group element")]
    EmbedFailure(usize),
    #[error("elements do not carry a well-formed embedding")]
    MalformedEmbedding,
    #[error("group backend cannot embed bytes")]
    EmbeddingUnsupported,
}
