//! Round protocol: client submissions, the per-group mixing pipeline, exit
//! processing for the trap variant, the trustee decision, blame and the
//! round transcript.
//!
//! Everything here is synchronous and transport-free. The simulator in
//! [`crate::simnet`] drives these functions and charges their cost.

mod blame;
mod exit;
mod frame;
mod keys;
mod mix;
mod submit;
mod transcript;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Ciphertext, CryptoError};
use crate::grouping::{GroupId, ServerId};
use crate::threshold::ThresholdError;
use crate::topology::TopologyError;
use crate::zk::ZkError;

pub use self::blame::{blame, BlameInput};
pub use self::exit::{
    build_exit_report, decide_reports, exit_process_trap, release_outputs, trustee_decide, DestroyReason, ExitForward,
    ExitReport, Manifest, TrusteeVerdict,
};
pub use self::frame::{
    decode_plain, encode_plain, frame_inner, frame_len, frame_trap, parse_frame, Framed, RouteKey, TrapMessage,
};
pub use self::keys::{RoundKeys, ServerKeys, Unrecoverable};
pub use self::mix::{
    check_reenc, check_shuffle, do_reenc, do_shuffle, group_step_basic, group_step_nizk, Abort, AbortRecord, Member,
    ReencOutput, ShuffleOutput, Stage, Step, Tamper,
};
pub use self::submit::{
    client_submit_nizk, client_submit_trap, client_submit_trap_inner, row_width, submission_binding, verify_submission,
    Sealed, Submission,
};
pub use self::transcript::{Event, Outcome, Record, RoundTranscript, TranscriptError};

pub type UserId = u32;

/// One message spread over several group elements.
pub type Row<G> = Vec<Ciphertext<G>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Every step carries a zero-knowledge proof.
    Nizk,
    /// Unproven mixing; traps and trustees catch tampering after the fact.
    Trap,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nizk" => Ok(Self::Nizk),
            "trap" => Ok(Self::Trap),
            other => Err(format!("unknown variant `{other}`, expected nizk or trap")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nizk => "nizk",
            Self::Trap => "trap",
        })
    }
}

/// Public parameters every participant agrees on for one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundContext {
    pub round: u64,
    pub variant: Variant,
    /// Longest accepted plaintext.
    pub msg_len: usize,
    pub groups: usize,
    pub route_key: RouteKey,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("message of {len} bytes exceeds the {max}-byte limit")]
    MessageTooLong { len: usize, max: usize },
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("server {0} holds no key material for this round")]
    MissingKey(ServerId),
    #[error("submission rejected: {0}")]
    Rejected(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Zk(#[from] ZkError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}
