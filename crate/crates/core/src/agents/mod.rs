//! Sender and Receiver networks with forward and backward passes.

mod checkpoint;
mod outcome;
mod receiver;
mod sender;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};

pub use checkpoint::{AgentCheckpoint, AgentKind, CHECKPOINT_VERSION};
pub use outcome::{reconstruction_loss_batch, reconstruction_outcome, BatchLoss, ReconstructionOutcome};
pub use receiver::{
    ffn_receiver_forward, receiver_forward, FfnReceiverParams, GruReceiverParams, Receiver,
    ReceiverArch, ReceiverCache,
};
pub use sender::{sender_forward, DecodeMode, SenderCache, SenderParams, SenderTrace};

/// Default symbol embedding width (shared by Sender and GRU Receiver).
pub const DEFAULT_EMBED_DIM: usize = 50;
/// Default hidden size of every network.
pub const DEFAULT_HIDDEN: usize = 500;

/// Vocabulary size and fixed message length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub vocab_size: usize,
    pub msg_len: usize,
}

impl ChannelSpec {
    pub fn new(vocab_size: usize, msg_len: usize) -> Result<Self> {
        if vocab_size < 2 {
            return argument("vocab_size must be at least 2");
        }
        if msg_len < 1 {
            return argument("msg_len must be at least 1");
        }
        Ok(ChannelSpec {
            vocab_size,
            msg_len,
        })
    }

    /// Number of distinct messages, `vocab_size^msg_len`, `None` on overflow.
    pub fn capacity(&self) -> Option<u64> {
        (self.vocab_size as u64).checked_pow(self.msg_len as u32)
    }

    pub fn contains(&self, m: &Message) -> bool {
        m.0.len() == self.msg_len && m.0.iter().all(|&s| s < self.vocab_size)
    }

    pub fn validate(&self, m: &Message) -> Result<()> {
        if self.contains(m) {
            Ok(())
        } else {
            argument(format!(
                "message {m} invalid for channel (vocab {}, len {})",
                self.vocab_size, self.msg_len
            ))
        }
    }
}

/// A fixed-length symbol sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message(pub Vec<usize>);

impl Message {
    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for Message {
    fn from(v: Vec<usize>) -> Self {
        Message(v)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}
