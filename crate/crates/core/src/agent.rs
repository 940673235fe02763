//! Per-turn agent construction: one agent per context entity, each with its
//! encoded state and candidate actions.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::context::{build_question_input, ContextConfig, ContextTracker, ConversationContext};
use crate::embeddings::{EmbeddingProvider, Vector};
use crate::error::{Error, Result};
use crate::kg::KgIndex;
use crate::ned::NedProvider;
use crate::policy::{ActionSet, StateInput};

/// Read-only resources shared by training, answering and evaluation.
#[derive(Clone, Copy)]
pub struct Environment<'a> {
    pub kg: &'a KgIndex,
    pub embedder: &'a dyn EmbeddingProvider,
    pub ned: &'a dyn NedProvider,
    pub context: &'a ContextConfig,
    /// Outgoing paths kept per start entity.
    pub action_cap: usize,
    /// Seed for path subsampling.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub state: Arc<StateInput>,
    pub actions: Arc<ActionSet>,
}

#[derive(Clone, Debug, Default)]
pub struct Agents {
    pub agents: Vec<Agent>,
    /// Context entities without outgoing paths.
    pub dead_ends: usize,
}

/// Stable 64-bit seed derived from a base seed and a label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(label.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

impl<'a> Environment<'a> {
    pub fn tracker(&self) -> ContextTracker<'a> {
        ContextTracker::new(self.kg, self.ned, self.context)
    }

    pub fn input_dim(&self) -> usize {
        self.context.history_mode.input_dim(self.embedder.dim())
    }

    /// Agents for the current utterance of `ctx`.
    pub fn agents(&self, ctx: &ConversationContext) -> Result<Agents> {
        let mut out = Agents::default();
        if ctx.entities.is_empty() {
            return Ok(out);
        }
        let x: Vector = build_question_input(ctx, self.context.history_mode, self.embedder)?;
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("question input {} != {}", x.len(), self.input_dim())));
        }
        for entity in ctx.entities.values() {
            let edges = self
                .kg
                .outgoing_paths(&entity.id, self.action_cap, derive_seed(self.seed, &entity.id));
            if edges.is_empty() {
                out.dead_ends += 1;
                continue;
            }
            let actions = ActionSet::encode(edges, self.embedder)?;
            out.agents.push(Agent {
                state: Arc::new(StateInput {
                    x: x.clone(),
                    start: entity.clone(),
                }),
                actions: Arc::new(actions),
            });
        }
        Ok(out)
    }
}
