//! Batched REINFORCE with a mean-reward baseline and entropy regularization.
//!
//! Every scripted utterance is a training sample. For each context entity the
//! policy is evaluated once and `rollouts` actions are sampled; each sampled
//! endpoint is judged by the simulated user's follow-up and the reformulation
//! predictor, giving a reward of -1 (reformulation) or +1 (new intent).
//! Experiences queue up and are consumed `batchSize` at a time.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{derive_seed, Environment};
use crate::context::ConversationContext;
use crate::dataset::{ConversationScript, Dataset};
use crate::error::{Error, Result};
use crate::policy::{
    adam_ascent_step, backprop_signals, dlogits_entropy, entropy, forward_pass, sample_action,
    ActionSet, AdamState, Gradients, PolicyParams, StateInput, DEFAULT_HIDDEN,
};
use crate::refpred::{reward_from_prediction, QuestionPair, RefPredictor};
use crate::user_sim::{Cursor, Next, UserModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub rollouts: usize,
    pub batch_size: usize,
    pub beta: f64,
    pub epochs: usize,
    pub action_cap: usize,
    pub top_k: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.001,
            rollouts: 20,
            batch_size: 1000,
            beta: 0.1,
            epochs: 10,
            action_cap: 1000,
            top_k: 5,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.beta < 0.0 {
            return Err(Error::Config("alpha must be positive and beta non-negative".into()));
        }
        if self.rollouts == 0 || self.batch_size == 0 || self.action_cap == 0 || self.top_k == 0 || self.hidden == 0 {
            return Err(Error::Config("rollouts, batchSize, actionCap, topK and hidden must be positive".into()));
        }
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, "init")
    }
}

/// One sampled step with its reward.
#[derive(Clone, Debug)]
pub struct Experience {
    pub state: Arc<StateInput>,
    pub actions: Arc<ActionSet>,
    pub chosen: usize,
    /// -1 or +1.
    pub reward: f64,
    pub next_utterance: String,
}

#[derive(Debug, Default)]
pub struct ExperienceQueue {
    buf: VecDeque<Experience>,
    enqueued: u64,
    dequeued: u64,
}

impl ExperienceQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, e: Experience) {
        debug_assert!(e.chosen < e.actions.len());
        self.buf.push_back(e);
        self.enqueued += 1;
    }

    /// Up to `n` oldest experiences in arrival order.
    pub fn dequeue(&mut self, n: usize) -> Vec<Experience> {
        let n = n.min(self.buf.len());
        self.dequeued += n as u64;
        self.buf.drain(..n).collect()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    pub fn dequeued(&self) -> u64 {
        self.dequeued
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub batch_len: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub entropy_mean: f64,
    pub normalized_mean: f64,
    pub normalized_std: f64,
}

/// `(R - mean) / std` over the batch; a near-zero std is replaced by 1.
pub fn normalize_rewards(rewards: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let denom = if std < 1e-8 { 1.0 } else { std };
    (rewards.iter().map(|r| (r - mean) / denom).collect(), mean, std)
}

/// Summed update direction `Σ R*·∇log π(a|s) + β·∇H(s)` under the current
/// parameters. Consecutive experiences sharing a state are evaluated once.
pub fn batch_gradient(batch: &[Experience], params: &PolicyParams, beta: f64) -> Result<(Gradients, UpdateStats)> {
    let mut grad = params.zero_grad();
    if batch.is_empty() {
        return Ok((grad, UpdateStats::default()));
    }
    let rewards: Vec<f64> = batch.iter().map(|e| e.reward).collect();
    let (norm, mean, std) = normalize_rewards(&rewards);
    let mut entropy_sum = 0.0;
    // Per-state signals, stacked so each weight gradient is one product.
    let (mut dz_rows, mut hidden_rows, mut dpre_rows, mut x_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut start = 0;
    while start < batch.len() {
        let head = &batch[start];
        let mut end = start + 1;
        while end < batch.len()
            && Arc::ptr_eq(&batch[end].state, &head.state)
            && Arc::ptr_eq(&batch[end].actions, &head.actions)
        {
            end += 1;
        }
        let pass = forward_pass(params, head.state.x.view(), &head.actions.embeddings)?;
        let count = (end - start) as f64;
        let mut dlogits: Array1<f64> = dlogits_entropy(&pass.probs) * (beta * count);
        for (e, r_star) in batch[start..end].iter().zip(&norm[start..end]) {
            if e.chosen >= e.actions.len() {
                return Err(Error::Shape(format!("chosen action {} of {}", e.chosen, e.actions.len())));
            }
            dlogits.scaled_add(-*r_star, &pass.probs);
            dlogits[e.chosen] += r_star;
        }
        entropy_sum += entropy(&pass.probs) * count;
        let (dz, dpre) = backprop_signals(params, &pass, &head.actions.embeddings, &dlogits);
        dz_rows.push(dz);
        hidden_rows.push(pass.hidden);
        dpre_rows.push(dpre);
        x_rows.push(head.state.x.clone());
        start = end;
    }
    let stack = |rows: &[Array1<f64>]| -> Array2<f64> {
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        ndarray::stack(Axis(0), &views).expect("equal lengths")
    };
    // W2 += DZᵀ·H, W1 += DPREᵀ·X
    general_mat_mul(1.0, &stack(&dz_rows).t(), &stack(&hidden_rows), 1.0, &mut grad.w2);
    general_mat_mul(1.0, &stack(&dpre_rows).t(), &stack(&x_rows), 1.0, &mut grad.w1);
    let n = batch.len() as f64;
    let norm_mean = norm.iter().sum::<f64>() / n;
    let norm_std = (norm.iter().map(|r| (r - norm_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok((
        grad,
        UpdateStats {
            batch_len: batch.len(),
            mean_reward: mean,
            std_reward: std,
            entropy_mean: entropy_sum / n,
            normalized_mean: norm_mean,
            normalized_std: norm_std,
        },
    ))
}

/// Dequeue up to `n` experiences and apply one Adam ascent step.
pub fn batch_update(
    queue: &mut ExperienceQueue,
    n: usize,
    params: &mut PolicyParams,
    adam: &mut AdamState,
    alpha: f64,
    beta: f64,
) -> Result<UpdateStats> {
    let batch = queue.dequeue(n);
    let (grad, stats) = batch_gradient(&batch, params, beta)?;
    if !batch.is_empty() {
        adam_ascent_step(params, adam, &grad, alpha)?;
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub epoch: usize,
    pub batch: usize,
    pub mean_reward: f64,
    pub entropy_mean: f64,
    pub queue_len: usize,
}

/// `epoch<TAB>batch<TAB>meanReward<TAB>entropyMean<TAB>queueLen` lines.
pub fn write_training_log(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{}",
            r.epoch, r.batch, r.mean_reward, r.entropy_mean, r.queue_len
        );
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RolloutOutcome {
    pub enqueued: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub experiences: usize,
    pub mean_reward: f64,
    pub updates: usize,
}

pub struct Trainer<'a> {
    pub env: Environment<'a>,
    pub predictor: &'a dyn RefPredictor,
    pub user: UserModel,
    pub cfg: TrainConfig,
    pub params: PolicyParams,
    pub adam: AdamState,
    pub queue: ExperienceQueue,
    pub log: Vec<LogRecord>,
    pub skipped: usize,
    rng: ChaCha8Rng,
    batches: usize,
    epoch: usize,
    epoch_reward_sum: f64,
    epoch_experiences: usize,
    epoch_updates: usize,
}

impl<'a> Trainer<'a> {
    /// Fresh trainer with parameters initialized from `cfg.seed`.
    pub fn new(env: Environment<'a>, predictor: &'a dyn RefPredictor, user: UserModel, cfg: TrainConfig) -> Self {
        let params = PolicyParams::init(env.input_dim(), cfg.hidden, env.embedder.dim(), cfg.init_seed());
        Self::with_params(env, predictor, user, cfg, params, None)
    }

    pub fn with_params(
        env: Environment<'a>,
        predictor: &'a dyn RefPredictor,
        user: UserModel,
        cfg: TrainConfig,
        params: PolicyParams,
        adam: Option<AdamState>,
    ) -> Self {
        let adam = adam.unwrap_or_else(|| AdamState::new(&params));
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "rollouts"));
        Trainer {
            env,
            predictor,
            user,
            cfg,
            params,
            adam,
            queue: ExperienceQueue::new(),
            log: Vec::new(),
            skipped: 0,
            rng,
            batches: 0,
            epoch: 0,
            epoch_reward_sum: 0.0,
            epoch_experiences: 0,
            epoch_updates: 0,
        }
    }

    fn follow_up_reward(&self, question: &str, next: &Next<'_>) -> Result<(f64, String)> {
        match next {
            Next::Done => Ok((1.0, String::new())),
            Next::Utterance(step) => {
                let pair = QuestionPair::labeled(question, step.utterance, !step.new_intent);
                let p = self.predictor.predict(&pair)?;
                Ok((reward_from_prediction(&p), step.utterance.to_string()))
            }
        }
    }

    /// Sample rollouts for the current utterance of `ctx`, located at `cursor`
    /// in `script`, and queue the resulting experiences.
    pub fn rollout_question(
        &mut self,
        ctx: &ConversationContext,
        script: &ConversationScript,
        cursor: Cursor,
    ) -> Result<RolloutOutcome> {
        let intent = script
            .intents
            .get(cursor.intent)
            .ok_or_else(|| Error::Dataset(format!("cursor past end of `{}`", script.id)))?;
        let question = ctx.current().ok_or(Error::EmptyInput)?.to_string();
        let agents = self.env.agents(ctx)?;
        let mut out = RolloutOutcome {
            skipped: agents.dead_ends,
            ..Default::default()
        };
        self.skipped += agents.dead_ends;
        if agents.agents.is_empty() {
            return Ok(out);
        }
        // The follow-up depends only on whether the endpoint was right.
        let on_right = self.follow_up_reward(&question, &self.user.next(script, cursor, true))?;
        let on_wrong = self.follow_up_reward(&question, &self.user.next(script, cursor, false))?;
        for agent in agents.agents {
            let pass = forward_pass(&self.params, agent.state.x.view(), &agent.actions.embeddings)?;
            for _ in 0..self.cfg.rollouts {
                let i = sample_action(&pass.probs, &mut self.rng)?;
                let correct = intent.is_correct(Some(&agent.actions.edges[i].end));
                let (reward, next) = if correct { &on_right } else { &on_wrong };
                self.queue.enqueue(Experience {
                    state: agent.state.clone(),
                    actions: agent.actions.clone(),
                    chosen: i,
                    reward: *reward,
                    next_utterance: next.clone(),
                });
                self.epoch_reward_sum += reward;
                self.epoch_experiences += 1;
                out.enqueued += 1;
            }
        }
        Ok(out)
    }

    fn update(&mut self, n: usize) -> Result<UpdateStats> {
        let stats = batch_update(
            &mut self.queue,
            n,
            &mut self.params,
            &mut self.adam,
            self.cfg.alpha,
            self.cfg.beta,
        )?;
        self.batches += 1;
        self.epoch_updates += 1;
        self.log.push(LogRecord {
            epoch: self.epoch,
            batch: self.batches,
            mean_reward: stats.mean_reward,
            entropy_mean: stats.entropy_mean,
            queue_len: self.queue.len(),
        });
        Ok(stats)
    }

    /// Apply full batches while the queue holds at least `batchSize`.
    pub fn update_if_ready(&mut self) -> Result<usize> {
        let mut n = 0;
        while self.queue.len() >= self.cfg.batch_size {
            self.update(self.cfg.batch_size)?;
            n += 1;
        }
        Ok(n)
    }

    /// One smaller update over whatever is left in the queue.
    pub fn flush(&mut self) -> Result<bool> {
        if self.queue.is_empty() {
            return Ok(false);
        }
        let n = self.queue.len();
        self.update(n)?;
        Ok(true)
    }

    /// Walk one scripted conversation utterance by utterance.
    pub fn train_conversation(&mut self, script: &ConversationScript, ctx: &ConversationContext) -> Result<ConversationContext> {
        let tracker = self.env.tracker();
        let mut ctx = ctx.reset();
        for (ii, intent) in script.intents.iter().enumerate() {
            for (k, q) in intent.questions.iter().enumerate() {
                ctx = tracker.update(&ctx, q, k == 0);
                let cursor = Cursor {
                    intent: ii,
                    turn: k + 1,
                    utterance: k,
                };
                self.rollout_question(&ctx, script, cursor)?;
                self.update_if_ready()?;
            }
        }
        Ok(ctx)
    }

    pub fn train_epoch(&mut self, dataset: &Dataset) -> Result<EpochSummary> {
        self.epoch += 1;
        self.epoch_reward_sum = 0.0;
        self.epoch_experiences = 0;
        self.epoch_updates = 0;
        let mut ctx = ConversationContext::new();
        for conv in &dataset.conversations {
            ctx = self.train_conversation(conv, &ctx)?;
        }
        self.flush()?;
        Ok(EpochSummary {
            epoch: self.epoch,
            experiences: self.epoch_experiences,
            mean_reward: if self.epoch_experiences == 0 {
                0.0
            } else {
                self.epoch_reward_sum / self.epoch_experiences as f64
            },
            updates: self.epoch_updates,
        })
    }

    pub fn train_epochs(&mut self, dataset: &Dataset) -> Result<Vec<EpochSummary>> {
        if dataset.is_empty() {
            return Err(Error::Dataset("no conversations to train on".into()));
        }
        (0..self.cfg.epochs).map(|_| self.train_epoch(dataset)).collect()
    }
}
