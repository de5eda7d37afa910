use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::AttributeSpace;
use crate::error::{Error, Result};
use crate::numerics::ParamSet;

use super::{ChannelSpec, Receiver, ReceiverArch, SenderParams};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "emlab-agent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Sender,
    GruReceiver,
    FfnReceiver,
}

/// Versioned JSON container: hyperparameters, per-array lengths and one flat
/// parameter array. Loading rebuilds the declared architecture and rejects
/// any length mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub version: u32,
    pub kind: AgentKind,
    pub space: AttributeSpace,
    pub channel: ChannelSpec,
    pub hidden: usize,
    pub embed_dim: usize,
    pub array_lengths: Vec<usize>,
    pub params: Vec<f64>,
}

impl AgentCheckpoint {
    pub fn from_sender(p: &SenderParams, space: &AttributeSpace, channel: &ChannelSpec) -> Self {
        AgentCheckpoint {
            format: FORMAT_TAG.into(),
            version: CHECKPOINT_VERSION,
            kind: AgentKind::Sender,
            space: *space,
            channel: *channel,
            hidden: p.hidden_size(),
            embed_dim: p.embed_dim(),
            array_lengths: p.slices().iter().map(|s| s.len()).collect(),
            params: p.to_flat(),
        }
    }

    pub fn from_receiver(r: &Receiver, space: &AttributeSpace, channel: &ChannelSpec) -> Self {
        let (kind, hidden, embed_dim) = match r {
            Receiver::Gru(p) => (AgentKind::GruReceiver, p.gru.hidden_size(), p.embed.cols()),
            Receiver::Ffn(p) => (AgentKind::FfnReceiver, p.layer1.output_size(), 0),
        };
        AgentCheckpoint {
            format: FORMAT_TAG.into(),
            version: CHECKPOINT_VERSION,
            kind,
            space: *space,
            channel: *channel,
            hidden,
            embed_dim,
            array_lengths: r.slices().iter().map(|s| s.len()).collect(),
            params: r.to_flat(),
        }
    }

    fn check_header(&self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::Config(format!("not an agent checkpoint: '{}'", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    fn fill<P: ParamSet>(&self, mut target: P) -> Result<P> {
        let lengths: Vec<usize> = target.slices().iter().map(|s| s.len()).collect();
        if lengths != self.array_lengths {
            return Err(Error::Config(format!(
                "checkpoint array shapes {:?} do not match the declared architecture {:?}",
                self.array_lengths, lengths
            )));
        }
        if !target.load_flat(&self.params) {
            return Err(Error::Config(format!(
                "checkpoint holds {} parameters, architecture needs {}",
                self.params.len(),
                target.num_params()
            )));
        }
        if !target.all_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(target)
    }

    pub fn to_sender(&self) -> Result<SenderParams> {
        self.check_header()?;
        if self.kind != AgentKind::Sender {
            return Err(Error::Config(format!("checkpoint holds {:?}, not a sender", self.kind)));
        }
        self.fill(SenderParams::zeros(&self.space, &self.channel, self.hidden, self.embed_dim))
    }

    pub fn to_receiver(&self) -> Result<Receiver> {
        self.check_header()?;
        let arch = match self.kind {
            AgentKind::GruReceiver => ReceiverArch::Gru { hidden: self.hidden },
            AgentKind::FfnReceiver => ReceiverArch::Ffn { hidden: self.hidden },
            AgentKind::Sender => return Err(Error::Config("checkpoint holds a sender, not a receiver".into())),
        };
        self.fill(Receiver::zeros(arch, &self.space, &self.channel, self.embed_dim))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
