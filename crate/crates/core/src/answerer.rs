//! Greedy answering: every agent takes its top-k actions, and the endpoints
//! are aggregated across agents and ranked.

use std::cmp::Ordering;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Environment};
use crate::context::ConversationContext;
use crate::error::{Error, Result};
use crate::kg::{ActionEdge, EntityRef};
use crate::policy::{forward_pass, top_k_actions, PolicyParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RankingMode {
    /// Sum of contributor probabilities.
    #[default]
    Cumulative,
    /// Contributor count, ties by summed probability.
    VoteThenScore,
    /// Highest single probability, ties by contributor count.
    ScoreThenVote,
    /// Highest single probability.
    MaxScore,
}

impl FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(RankingMode::Cumulative),
            "voteThenScore" => Ok(RankingMode::VoteThenScore),
            "scoreThenVote" => Ok(RankingMode::ScoreThenVote),
            "maxScore" => Ok(RankingMode::MaxScore),
            other => Err(Error::Config(format!("unknown ranking mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Contribution {
    pub start: EntityRef,
    pub edge: ActionEdge,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedAnswer {
    pub entity: EntityRef,
    /// Final score under the ranking mode; the summed probability for
    /// `cumulative` and `voteThenScore`, the best single one otherwise.
    pub score: f64,
    pub contributors: Vec<Contribution>,
}

impl RankedAnswer {
    pub fn summed(&self) -> f64 {
        self.contributors.iter().map(|c| c.prob).sum()
    }

    pub fn best(&self) -> f64 {
        self.contributors.iter().map(|c| c.prob).fold(0.0, f64::max)
    }

    pub fn votes(&self) -> usize {
        self.contributors.len()
    }
}

/// An action an agent served at answering time.
#[derive(Clone, Debug)]
pub struct Pick {
    pub agent: Agent,
    pub action: usize,
    pub prob: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AnswerOutput {
    pub ranked: Vec<RankedAnswer>,
    pub picks: Vec<Pick>,
    /// Context entities without any outgoing path.
    pub dead_ends: usize,
}

impl AnswerOutput {
    pub fn top(&self) -> Option<&RankedAnswer> {
        self.ranked.first()
    }

    /// 1-based rank of the first answer satisfying `pred`.
    pub fn rank_of(&self, mut pred: impl FnMut(&EntityRef) -> bool) -> Option<usize> {
        self.ranked.iter().position(|r| pred(&r.entity)).map(|i| i + 1)
    }
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Order aggregated candidates under `mode`; remaining ties go to entity id.
pub fn rank_candidates(mut candidates: Vec<RankedAnswer>, mode: RankingMode) -> Vec<RankedAnswer> {
    for c in &mut candidates {
        c.score = match mode {
            RankingMode::Cumulative | RankingMode::VoteThenScore => c.summed(),
            RankingMode::ScoreThenVote | RankingMode::MaxScore => c.best(),
        };
    }
    candidates.sort_by(|a, b| {
        let primary = match mode {
            RankingMode::Cumulative | RankingMode::MaxScore => desc(a.score, b.score),
            RankingMode::VoteThenScore => b.votes().cmp(&a.votes()).then(desc(a.score, b.score)),
            RankingMode::ScoreThenVote => desc(a.score, b.score).then(b.votes().cmp(&a.votes())),
        };
        primary.then_with(|| a.entity.id.cmp(&b.entity.id))
    });
    candidates
}

/// Group contributions by endpoint id, keeping first-seen order.
pub fn aggregate(contributions: Vec<Contribution>) -> Vec<RankedAnswer> {
    let mut by_entity: IndexMap<String, RankedAnswer> = IndexMap::new();
    for c in contributions {
        by_entity
            .entry(c.edge.end.id.clone())
            .or_insert_with(|| RankedAnswer {
                entity: c.edge.end.clone(),
                score: 0.0,
                contributors: Vec::new(),
            })
            .contributors
            .push(c);
    }
    by_entity.into_values().collect()
}

/// Answer the current utterance of `ctx` greedily.
pub fn answer(
    env: &Environment<'_>,
    params: &PolicyParams,
    ctx: &ConversationContext,
    top_k: usize,
    mode: RankingMode,
) -> Result<AnswerOutput> {
    let agents = env.agents(ctx)?;
    let mut contributions = Vec::new();
    let mut picks = Vec::new();
    for agent in agents.agents {
        let pass = forward_pass(params, agent.state.x.view(), &agent.actions.embeddings)?;
        for (i, p) in top_k_actions(&pass.probs, top_k) {
            contributions.push(Contribution {
                start: agent.state.start.clone(),
                edge: agent.actions.edges[i].clone(),
                prob: p,
            });
            picks.push(Pick {
                agent: agent.clone(),
                action: i,
                prob: p,
            });
        }
    }
    Ok(AnswerOutput {
        ranked: rank_candidates(aggregate(contributions), mode),
        picks,
        dead_ends: agents.dead_ends,
    })
}
