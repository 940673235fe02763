//! Conversation context: the context-entity set grown turn by turn with a
//! four-feature linear score, and the context questions fed to the policy.

use std::collections::HashMap;

use indexmap::{IndexMap, IndexSet};
use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingProvider, Vector};
use crate::error::{Error, Result};
use crate::kg::{EntityRef, KgIndex, NodeKind};
use crate::ned::NedProvider;
use crate::text;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HistoryMode {
    /// Current question only.
    #[default]
    None,
    /// First question of the conversation prepended.
    First,
    /// Mean of the first and previous question prepended.
    FirstPrev,
    /// Mean of the averaged utterances of the first and previous intents prepended.
    RefAveraged,
}

impl HistoryMode {
    /// Policy input width for embeddings of width `d`.
    pub fn input_dim(self, d: usize) -> usize {
        match self {
            HistoryMode::None => d,
            _ => 2 * d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ContextConfig {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub h_cxt: f64,
    pub f_max: u32,
    pub history_mode: HistoryMode,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            h1: 0.1,
            h2: 0.1,
            h3: 0.7,
            h4: 0.1,
            h_cxt: 0.25,
            f_max: 100,
            history_mode: HistoryMode::None,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        let hs = [self.h1, self.h2, self.h3, self.h4];
        if hs.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(Error::Config("context weights must lie in [0, 1]".into()));
        }
        let sum: f64 = hs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("context weights sum to {sum}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.h_cxt) {
            return Err(Error::Config("hCxt must lie in [0, 1]".into()));
        }
        if self.f_max == 0 {
            return Err(Error::Config("fMax must be positive".into()));
        }
        Ok(())
    }

    /// Drop one feature and renormalize the remaining weights to sum to 1.
    pub fn without_feature(&self, feature: Feature) -> Self {
        let mut c = self.clone();
        match feature {
            Feature::Overlap => c.h1 = 0.0,
            Feature::Match => c.h2 = 0.0,
            Feature::Ned => c.h3 = 0.0,
            Feature::Prior => c.h4 = 0.0,
        }
        let s = c.h1 + c.h2 + c.h3 + c.h4;
        if s > 0.0 {
            c.h1 /= s;
            c.h2 /= s;
            c.h3 /= s;
            c.h4 /= s;
        }
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Overlap,
    Match,
    Ned,
    Prior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub entity: EntityRef,
    pub overlap: f64,
    pub lexical_match: f64,
    pub ned: f64,
    pub prior: f64,
    pub cxt: f64,
}

/// Weighted sum of the four feature scores.
pub fn combine(cfg: &ContextConfig, overlap: f64, lexical_match: f64, ned: f64, prior: f64) -> f64 {
    cfg.h1 * overlap + cfg.h2 * lexical_match + cfg.h3 * ned + cfg.h4 * prior
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConversationContext {
    /// Context entities in admission order.
    pub entities: IndexMap<String, EntityRef>,
    /// Texts that make up the prepended context for the current turn.
    pub context_questions: Vec<String>,
    /// Utterances so far, grouped by intent.
    pub intents: Vec<Vec<String>>,
    pub turn: usize,
    pub conversation_index: usize,
}

impl ConversationContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_started(&self) -> bool {
        self.turn > 0
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn utterances(&self) -> impl Iterator<Item = &str> {
        self.intents.iter().flatten().map(String::as_str)
    }

    pub fn current(&self) -> Option<&str> {
        self.intents.last().and_then(|i| i.last()).map(String::as_str)
    }

    fn record(&mut self, q: &str, new_intent: bool) {
        if new_intent || self.intents.is_empty() {
            self.intents.push(Vec::new());
        }
        self.intents.last_mut().unwrap().push(q.to_string());
        self.turn += 1;
    }

    /// Fresh context for the next conversation.
    pub fn reset(&self) -> Self {
        ConversationContext {
            conversation_index: self.conversation_index + 1,
            ..Default::default()
        }
    }
}

/// Scores and admits context entities and assembles the policy's question input.
pub struct ContextTracker<'a> {
    pub kg: &'a KgIndex,
    pub ned: &'a dyn NedProvider,
    pub cfg: &'a ContextConfig,
}

impl<'a> ContextTracker<'a> {
    pub fn new(kg: &'a KgIndex, ned: &'a dyn NedProvider, cfg: &'a ContextConfig) -> Self {
        ContextTracker { kg, ned, cfg }
    }

    /// Start a conversation: the context is whatever the linker finds in the
    /// first question that exists in the graph and is not a literal.
    pub fn init(&self, ctx: &ConversationContext, first_question: &str) -> ConversationContext {
        let mut next = ctx.reset();
        next.conversation_index = ctx.conversation_index;
        for (id, _) in self.ned.link(first_question, self.kg, None) {
            if let Some(node) = self.kg.entity(&id) {
                if node.kind != NodeKind::Literal {
                    next.entities.entry(id).or_insert_with(|| node.clone());
                }
            }
        }
        next.record(first_question, true);
        self.refresh_context_questions(&mut next);
        next
    }

    /// Feature scores of one candidate against the previous context.
    /// `ned_scores` holds the restricted linker output for this turn.
    pub fn score_candidate(
        &self,
        candidate: &EntityRef,
        question: &str,
        prev: &IndexMap<String, EntityRef>,
        ned_scores: &HashMap<String, f64>,
    ) -> CandidateScore {
        let reach = prev
            .keys()
            .filter(|src| self.kg.edges(src).iter().any(|e| e.end.id == candidate.id))
            .count();
        let overlap = if prev.is_empty() {
            0.0
        } else {
            reach as f64 / prev.len() as f64
        };
        self.score_with_overlap(candidate, question, overlap, ned_scores)
    }

    fn score_with_overlap(
        &self,
        candidate: &EntityRef,
        question: &str,
        overlap: f64,
        ned_scores: &HashMap<String, f64>,
    ) -> CandidateScore {
        let lexical_match = text::jaccard(
            &text::content_words(&candidate.label),
            &text::content_words(question),
        );
        let ned = ned_scores.get(&candidate.id).copied().unwrap_or(0.0).clamp(0.0, 1.0);
        let prior = self.kg.kg_prior(&candidate.id, self.cfg.f_max);
        CandidateScore {
            entity: candidate.clone(),
            overlap,
            lexical_match,
            ned,
            prior,
            cxt: combine(self.cfg, overlap, lexical_match, ned, prior),
        }
    }

    /// Score the one-hop neighborhood of the current context for `question`.
    pub fn score_neighborhood(&self, ctx: &ConversationContext, question: &str) -> Vec<CandidateScore> {
        let neighbors = self.kg.one_hop_neighbors(ctx.entity_ids());
        let candidates: IndexSet<String> = neighbors
            .keys()
            .filter(|id| !ctx.entities.contains_key(*id))
            .filter(|id| self.kg.entity(id).is_some_and(|n| n.kind != NodeKind::Literal))
            .cloned()
            .collect();
        if candidates.is_empty() {
            return Vec::new();
        }
        let mut ned_input: Vec<&str> = ctx.utterances().collect();
        ned_input.push(question);
        let ned_scores: HashMap<String, f64> = self
            .ned
            .link(&ned_input.join(" "), self.kg, Some(&candidates))
            .into_iter()
            .collect();
        let n = ctx.entities.len() as f64;
        candidates
            .iter()
            .map(|id| {
                let node = self.kg.entity(id).expect("candidate from index");
                let overlap = neighbors[id] as f64 / n;
                self.score_with_overlap(node, question, overlap, &ned_scores)
            })
            .collect()
    }

    /// Advance to the next utterance of the same conversation. Candidates
    /// scoring strictly above `hCxt` join the context; nothing leaves it.
    pub fn update(&self, ctx: &ConversationContext, question: &str, new_intent: bool) -> ConversationContext {
        if !ctx.is_started() {
            return self.init(ctx, question);
        }
        let mut next = ctx.clone();
        for s in self.score_neighborhood(ctx, question) {
            if s.cxt > self.cfg.h_cxt {
                next.entities.insert(s.entity.id.clone(), s.entity);
            }
        }
        next.record(question, new_intent);
        self.refresh_context_questions(&mut next);
        next
    }

    fn refresh_context_questions(&self, ctx: &mut ConversationContext) {
        ctx.context_questions = context_question_texts(ctx, self.cfg.history_mode)
            .into_iter()
            .map(str::to_string)
            .collect();
    }
}

/// (first-part texts, previous-part texts) used for the prepended context.
fn history_parts(ctx: &ConversationContext, mode: HistoryMode) -> (Vec<&str>, Vec<&str>) {
    let all: Vec<&str> = ctx.utterances().collect();
    let Some(&current) = all.last() else {
        return (Vec::new(), Vec::new());
    };
    let first = all[0];
    match mode {
        HistoryMode::None => (Vec::new(), Vec::new()),
        HistoryMode::First => (vec![first], Vec::new()),
        HistoryMode::FirstPrev => {
            let prev = if all.len() >= 2 { all[all.len() - 2] } else { first };
            (vec![first], vec![prev])
        }
        HistoryMode::RefAveraged => {
            let cur_intent = ctx.intents.len() - 1;
            let mut first_intent: Vec<&str> = ctx.intents[0].iter().map(String::as_str).collect();
            if cur_intent == 0 {
                first_intent.pop();
            }
            if first_intent.is_empty() {
                first_intent.push(current);
            }
            let prev_intent = if cur_intent >= 1 {
                ctx.intents[cur_intent - 1].iter().map(String::as_str).collect()
            } else {
                first_intent.clone()
            };
            (first_intent, prev_intent)
        }
    }
}

fn context_question_texts(ctx: &ConversationContext, mode: HistoryMode) -> Vec<&str> {
    let (a, b) = history_parts(ctx, mode);
    let mut out: IndexSet<&str> = a.into_iter().collect();
    out.extend(b);
    out.into_iter().collect()
}

fn mean_of(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vector> {
    let mut acc = Vector::zeros(provider.dim());
    for t in texts {
        acc += &provider.encode(t)?;
    }
    Ok(acc / texts.len() as f64)
}

/// Policy input for the current utterance of `ctx`: `[q]` or `[q_cxt; q]`.
pub fn build_question_input(
    ctx: &ConversationContext,
    mode: HistoryMode,
    provider: &dyn EmbeddingProvider,
) -> Result<Vector> {
    let current = ctx.current().ok_or(Error::EmptyInput)?;
    let q = provider.encode(current)?;
    let prefix = match mode {
        HistoryMode::None => return Ok(q),
        HistoryMode::First => {
            let (first, _) = history_parts(ctx, mode);
            provider.encode(first[0])?
        }
        HistoryMode::FirstPrev | HistoryMode::RefAveraged => {
            let (first, prev) = history_parts(ctx, mode);
            (mean_of(provider, &first)? + mean_of(provider, &prev)?) / 2.0
        }
    };
    Ok(concatenate(Axis(0), &[prefix.view(), q.view()]).expect("equal widths"))
}

/// Set precision, recall and F1 of predicted against gold context entities.
pub fn set_prf<T: Eq + std::hash::Hash>(predicted: &IndexSet<T>, gold: &IndexSet<T>) -> (f64, f64, f64) {
    if predicted.is_empty() && gold.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    let tp = predicted.intersection(gold).count() as f64;
    let p = if predicted.is_empty() { 0.0 } else { tp / predicted.len() as f64 };
    let r = if gold.is_empty() { 0.0 } else { tp / gold.len() as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}
