//! Intent-level evaluation with a simulated user.
//!
//! An intent is credited with P@1 = 1 if any of its turns puts a gold answer
//! at rank one. Hit@5 and MRR use the best gold rank seen over the intent's
//! turns. Reformulation effort counts the turns after the first one.

use std::fmt::Write as _;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;

use crate::agent::Environment;
use crate::answerer::{answer, AnswerOutput, RankingMode};
use crate::context::ConversationContext;
use crate::dataset::{ConversationScript, Dataset, MAX_TURNS_PER_INTENT};
use crate::error::{Error, Result};
use crate::policy::{AdamState, PolicyParams};
use crate::refpred::{reward_from_prediction, QuestionPair, RefPredictor};
use crate::trainer::{batch_update, Experience, ExperienceQueue};
use crate::user_sim::{Next, UserModel};

pub const REF_BUCKETS: usize = MAX_TURNS_PER_INTENT;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnRecord {
    pub utterance: String,
    pub top: Option<String>,
    pub gold_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntentOutcome {
    pub conversation_id: String,
    pub domain: String,
    pub intent_id: String,
    /// 1-based turn of the first top-1 hit.
    pub answered_at_turn: Option<usize>,
    pub best_rank: Option<usize>,
    pub reformulations_used: usize,
    pub turns: Vec<TurnRecord>,
}

impl IntentOutcome {
    pub fn p1(&self) -> f64 {
        f64::from(u8::from(self.answered_at_turn.is_some()))
    }

    pub fn hit5(&self) -> f64 {
        f64::from(u8::from(self.best_rank.is_some_and(|r| r <= 5)))
    }

    pub fn reciprocal_rank(&self) -> f64 {
        self.best_rank.map_or(0.0, |r| 1.0 / r as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub intents: usize,
    pub p1: f64,
    pub hit5: f64,
    pub mrr: f64,
    pub ref_triggers: usize,
    pub ref_histogram: [usize; REF_BUCKETS],
}

impl Metrics {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a IntentOutcome>) -> Self {
        let mut m = Metrics::default();
        let (mut p1, mut hit5, mut mrr) = (0.0, 0.0, 0.0);
        for o in outcomes {
            m.intents += 1;
            p1 += o.p1();
            hit5 += o.hit5();
            mrr += o.reciprocal_rank();
            m.ref_triggers += o.reformulations_used;
            if o.answered_at_turn.is_some() {
                m.ref_histogram[o.reformulations_used] += 1;
            }
        }
        if m.intents > 0 {
            let n = m.intents as f64;
            m.p1 = p1 / n;
            m.hit5 = hit5 / n;
            m.mrr = mrr / n;
        }
        m
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub overall: Metrics,
    pub per_domain: IndexMap<String, Metrics>,
    pub outcomes: Vec<IntentOutcome>,
}

impl MetricsReport {
    pub fn from_outcomes(outcomes: Vec<IntentOutcome>) -> Self {
        let overall = Metrics::from_outcomes(&outcomes);
        let mut domains: IndexMap<String, Vec<&IntentOutcome>> = IndexMap::new();
        for o in &outcomes {
            domains.entry(o.domain.clone()).or_default().push(o);
        }
        let mut per_domain: IndexMap<String, Metrics> = domains
            .into_iter()
            .map(|(d, os)| (d, Metrics::from_outcomes(os)))
            .collect();
        per_domain.sort_keys();
        MetricsReport {
            overall,
            per_domain,
            outcomes,
        }
    }

    pub fn p1(&self) -> f64 {
        self.overall.p1
    }

    /// Tab-separated table: one `all` row, then one row per domain.
    pub fn to_tsv(&self, method: &str) -> String {
        let mut out = String::from("method\tdomain\tintents\tP@1\tHit@5\tMRR\tRefTriggers");
        for k in 0..REF_BUCKETS {
            let _ = write!(out, "\tRef={k}");
        }
        out.push('\n');
        let mut row = |domain: &str, m: &Metrics| {
            let _ = write!(
                out,
                "{method}\t{domain}\t{}\t{:.3}\t{:.3}\t{:.3}\t{}",
                m.intents, m.p1, m.hit5, m.mrr, m.ref_triggers
            );
            for c in m.ref_histogram {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        };
        row("all", &self.overall);
        for (d, m) in &self.per_domain {
            row(if d.is_empty() { "-" } else { d }, m);
        }
        out
    }
}

/// Continued learning during evaluation: the served actions of each turn are
/// rewarded from the user's next utterance.
pub struct OnlineLearner<'a> {
    pub params: PolicyParams,
    pub adam: AdamState,
    pub predictor: &'a dyn RefPredictor,
    pub queue: ExperienceQueue,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub updates: usize,
}

impl<'a> OnlineLearner<'a> {
    pub fn new(params: PolicyParams, predictor: &'a dyn RefPredictor, batch_size: usize, alpha: f64, beta: f64) -> Self {
        let adam = AdamState::new(&params);
        OnlineLearner {
            params,
            adam,
            predictor,
            queue: ExperienceQueue::new(),
            batch_size: batch_size.max(1),
            alpha,
            beta,
            updates: 0,
        }
    }

    fn observe(&mut self, question: &str, served: &AnswerOutput, next: &Next<'_>) -> Result<()> {
        if served.picks.is_empty() {
            return Ok(());
        }
        let (reward, follow) = match next {
            Next::Done => (1.0, String::new()),
            Next::Utterance(step) => {
                let pair = QuestionPair::labeled(question, step.utterance, !step.new_intent);
                (reward_from_prediction(&self.predictor.predict(&pair)?), step.utterance.to_string())
            }
        };
        for p in &served.picks {
            self.queue.enqueue(Experience {
                state: Arc::clone(&p.agent.state),
                actions: Arc::clone(&p.agent.actions),
                chosen: p.action,
                reward,
                next_utterance: follow.clone(),
            });
        }
        while self.queue.len() >= self.batch_size {
            batch_update(&mut self.queue, self.batch_size, &mut self.params, &mut self.adam, self.alpha, self.beta)?;
            self.updates += 1;
        }
        Ok(())
    }
}

enum Policy<'p, 'a> {
    Frozen(&'p PolicyParams),
    Online(&'p mut OnlineLearner<'a>),
}

impl Policy<'_, '_> {
    fn params(&self) -> &PolicyParams {
        match self {
            Policy::Frozen(p) => p,
            Policy::Online(l) => &l.params,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalSettings {
    pub user: UserModel,
    pub top_k: usize,
    pub mode: RankingMode,
}

fn run_conversation(
    env: &Environment<'_>,
    policy: &mut Policy<'_, '_>,
    script: &ConversationScript,
    settings: &EvalSettings,
    ctx: ConversationContext,
    outcomes: &mut Vec<IntentOutcome>,
) -> Result<ConversationContext> {
    let tracker = env.tracker();
    let mut ctx = ctx;
    let mut next = settings.user.start(script);
    while let Next::Utterance(step) = next {
        let cursor = step.cursor;
        let intent = &script.intents[cursor.intent];
        if step.new_intent {
            outcomes.push(IntentOutcome {
                conversation_id: script.id.clone(),
                domain: script.domain.clone(),
                intent_id: intent.id.clone(),
                answered_at_turn: None,
                best_rank: None,
                reformulations_used: 0,
                turns: Vec::new(),
            });
        }
        ctx = tracker.update(&ctx, step.utterance, step.new_intent);
        let served = answer(env, policy.params(), &ctx, settings.top_k, settings.mode)?;
        let gold_rank = served.rank_of(|e| intent.is_correct(Some(e)));
        let correct = gold_rank == Some(1);

        let o = outcomes.last_mut().expect("outcome opened on the intent's first turn");
        o.turns.push(TurnRecord {
            utterance: step.utterance.to_string(),
            top: served.top().map(|r| r.entity.id.clone()),
            gold_rank,
        });
        o.best_rank = match (o.best_rank, gold_rank) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if o.answered_at_turn.is_none() {
            if correct {
                o.answered_at_turn = Some(cursor.turn);
            }
            o.reformulations_used = cursor.turn - 1;
        }

        let question = step.utterance;
        next = settings.user.next(script, cursor, correct);
        if let Policy::Online(learner) = policy {
            learner.observe(question, &served, &next)?;
        }
    }
    Ok(ctx)
}

fn run(env: &Environment<'_>, mut policy: Policy<'_, '_>, dataset: &Dataset, settings: &EvalSettings) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::Eval("dataset has no conversations".into()));
    }
    let mut outcomes = Vec::new();
    let mut ctx = ConversationContext::new();
    for conv in &dataset.conversations {
        ctx = run_conversation(env, &mut policy, conv, settings, ctx.reset(), &mut outcomes)?;
    }
    Ok(MetricsReport::from_outcomes(outcomes))
}

/// Evaluate with a frozen policy.
pub fn evaluate(env: &Environment<'_>, params: &PolicyParams, dataset: &Dataset, settings: &EvalSettings) -> Result<MetricsReport> {
    run(env, Policy::Frozen(params), dataset, settings)
}

/// Evaluate while learning from the served answers.
pub fn evaluate_online(
    env: &Environment<'_>,
    learner: &mut OnlineLearner<'_>,
    dataset: &Dataset,
    settings: &EvalSettings,
) -> Result<MetricsReport> {
    run(env, Policy::Online(learner), dataset, settings)
}
