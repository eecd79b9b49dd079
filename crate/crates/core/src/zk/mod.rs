//! Non-interactive zero-knowledge proofs, all made non-interactive with a
//! labeled SHA3 transcript.

pub mod enc;
pub mod reenc;
pub mod schnorr;
pub mod shuffle;
pub mod transcript;
pub mod vectors;

use thiserror::Error;

pub use self::enc::{enc_proof, enc_proof_with, enc_row_proof, verify_enc_proof, verify_enc_row_proof, EncProof};
pub use self::reenc::{reenc_proof, reenc_proof_with, verify_reenc_proof, ReencProof};
pub use self::schnorr::{sign, verify_signature, Signature};
pub use self::shuffle::{prove_shuffle, shuffle_proof, verify_shuffle_proof, ShuffleProof};
pub use self::transcript::Transcript;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZkError {
    #[error("input and output batches differ in shape")]
    LengthMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("ciphertext has a non-null Y component")]
    NonNullY,
}
