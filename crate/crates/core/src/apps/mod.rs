//! Applications carried over mixnet rounds: a public bulletin board for
//! short posts and dialing through shared mailboxes.

pub mod dial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::PrimeGroup;
use crate::protocol::Outcome;
use crate::simnet::RoundResult;

pub use self::dial::{
    deliver, dial, dial_len, dummy_counts, gen_dial_dummies, mailbox_id, open_mailbox, shared_key, Contact, Mailboxes,
    NoiseParams,
};

/// Posts longer than this do not fit one microblog slot.
pub const MAX_POST: usize = 160;

#[derive(Debug, Error, PartialEq)]
pub enum AppError {
    #[error("round ended without releasing its outputs")]
    NotReleased,
    #[error("at least one mailbox is required")]
    NoMailboxes,
    #[error("noise scale {0} is not a positive finite number")]
    BadNoise(f64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulletinBoard {
    pub round: u64,
    /// In exit order, which the mixing already made independent of senders.
    pub posts: Vec<Vec<u8>>,
}

impl BulletinBoard {
    /// Publishes a finished round. Listed dummies were already stripped by
    /// the round itself.
    pub fn publish<G: PrimeGroup>(round: u64, result: &RoundResult<G>) -> Result<Self, AppError> {
        match result.outcome {
            Outcome::Released | Outcome::Delivered => Ok(Self { round, posts: result.outputs.clone() }),
            _ => Err(AppError::NotReleased),
        }
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }
}
