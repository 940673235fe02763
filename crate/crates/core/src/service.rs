//! Live learner behind an HTTP/JSON API.
//!
//! Each turn first settles the previous turn: the follow-up is classified as
//! reformulation or new intent and the reward lands on the actions served
//! last time. Then the context advances and the next answer is served. Full
//! interactive batches trigger an update under the policy's write lock.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::answerer::{answer, Pick};
use crate::config::Resources;
use crate::context::ConversationContext;
use crate::error::{Error, Result};
use crate::policy::{AdamState, PolicyParams};
use crate::refpred::{reward_from_prediction, LexicalPredictor, PredictorKind, QuestionPair, RefPredictor};
use crate::trainer::{batch_update, Experience, ExperienceQueue};

/// Rewards kept for `meanRecentReward`.
const RECENT_WINDOW: usize = 100;

struct Pending {
    question: String,
    picks: Vec<Pick>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnLog {
    pub utterance: String,
    pub answer: Option<String>,
    pub reward_applied_to_prev_turn: Option<f64>,
    pub model_version: u64,
}

#[derive(Default)]
struct Session {
    ctx: ConversationContext,
    pending: Option<Pending>,
    log: Vec<TurnLog>,
}

struct Learner {
    params: PolicyParams,
    adam: AdamState,
    queue: ExperienceQueue,
    model_version: u64,
    updates_applied: u64,
    recent: VecDeque<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateView {
    pub id: String,
    pub label: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityView {
    pub id: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UtteranceResponse {
    pub answer: Option<CandidateView>,
    pub candidates: Vec<CandidateView>,
    pub context_entities: Vec<EntityView>,
    pub model_version: u64,
    /// Reward given to the previous turn's answer, if one was pending.
    pub reward_applied: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MissCounts {
    pub embeddings: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyStats {
    pub model_version: u64,
    pub updates_applied: u64,
    pub queue_len: usize,
    pub mean_recent_reward: f64,
    pub miss_counts: MissCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceStats {
    pub sessions: usize,
    pub turns: u64,
    pub model_version: u64,
}

pub struct Engine {
    resources: Resources,
    live_predictor: Option<Box<dyn RefPredictor>>,
    learner: RwLock<Learner>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    turns: AtomicU64,
}

impl Engine {
    /// Live conversations carry no script labels, so an oracle predictor is
    /// replaced by the lexical one.
    pub fn new(resources: Resources, params: PolicyParams, adam: Option<AdamState>) -> Result<Self> {
        let expected = resources.env().input_dim();
        if params.input_dim() != expected || params.d() != resources.embedder.dim() {
            return Err(Error::Service(format!(
                "checkpoint shape {}x{} does not fit input {} / d {}",
                params.input_dim(),
                params.d(),
                expected,
                resources.embedder.dim()
            )));
        }
        let live_predictor: Option<Box<dyn RefPredictor>> = (resources.predictor.kind() == PredictorKind::Oracle)
            .then(|| {
                Box::new(LexicalPredictor::new(
                    resources.embedder.clone(),
                    resources.config.lexical_threshold,
                )) as Box<dyn RefPredictor>
            });
        let adam = adam.unwrap_or_else(|| AdamState::new(&params));
        Ok(Engine {
            resources,
            live_predictor,
            learner: RwLock::new(Learner {
                params,
                adam,
                queue: ExperienceQueue::new(),
                model_version: 0,
                updates_applied: 0,
                recent: VecDeque::new(),
            }),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            turns: AtomicU64::new(0),
        })
    }

    pub fn predictor(&self) -> &dyn RefPredictor {
        self.live_predictor.as_deref().unwrap_or(self.resources.predictor.as_ref())
    }

    pub fn create_session(&self) -> String {
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        self.sessions.lock().unwrap().insert(id.clone(), Arc::default());
        id
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    /// End the conversation: pending answers count as accepted.
    pub fn reset_session(&self, id: &str) -> Result<Option<f64>> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        let reward = match s.pending.take() {
            Some(p) => Some(self.apply_feedback(p, 1.0)?),
            None => None,
        };
        s.ctx = s.ctx.reset();
        Ok(reward)
    }

    fn apply_feedback(&self, pending: Pending, reward: f64) -> Result<f64> {
        let batch = self.resources.config.interactive_batch_size;
        let alpha = self.resources.config.train.alpha;
        let beta = self.resources.config.train.beta;
        let mut l = self.learner.write().unwrap();
        for p in pending.picks {
            l.queue.enqueue(Experience {
                state: p.agent.state,
                actions: p.agent.actions,
                chosen: p.action,
                reward,
                next_utterance: String::new(),
            });
        }
        l.recent.push_back(reward);
        if l.recent.len() > RECENT_WINDOW {
            l.recent.pop_front();
        }
        while l.queue.len() >= batch {
            let Learner {
                params, adam, queue, ..
            } = &mut *l;
            batch_update(queue, batch, params, adam, alpha, beta)?;
            l.updates_applied += 1;
            l.model_version += 1;
        }
        Ok(reward)
    }

    pub fn utterance(&self, id: &str, text: &str, new_conversation: bool) -> Result<UtteranceResponse> {
        if text.trim().is_empty() {
            return Err(Error::Service("empty utterance".into()));
        }
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();

        let mut new_intent = true;
        let reward_applied = match s.pending.take() {
            Some(p) if new_conversation => Some(self.apply_feedback(p, 1.0)?),
            Some(p) => {
                let pred = self.predictor().predict(&QuestionPair::new(&p.question, text))?;
                new_intent = !pred.is_reformulation;
                Some(self.apply_feedback(p, reward_from_prediction(&pred))?)
            }
            None => None,
        };
        if new_conversation {
            s.ctx = s.ctx.reset();
        }

        let env = self.resources.env();
        s.ctx = env.tracker().update(&s.ctx, text, new_intent);
        let (served, model_version) = {
            let l = self.learner.read().unwrap();
            let served = answer(
                &env,
                &l.params,
                &s.ctx,
                self.resources.config.train.top_k,
                self.resources.config.ranking_mode,
            )?;
            (served, l.model_version)
        };
        let candidates: Vec<CandidateView> = served
            .ranked
            .iter()
            .take(5)
            .map(|r| CandidateView {
                id: r.entity.id.clone(),
                label: r.entity.label.clone(),
                score: r.score,
            })
            .collect();
        if !served.picks.is_empty() {
            s.pending = Some(Pending {
                question: text.to_string(),
                picks: served.picks,
            });
        }
        let response = UtteranceResponse {
            answer: candidates.first().cloned(),
            candidates,
            context_entities: s
                .ctx
                .entities
                .values()
                .map(|e| EntityView {
                    id: e.id.clone(),
                    label: e.label.clone(),
                })
                .collect(),
            model_version,
            reward_applied,
        };
        s.log.push(TurnLog {
            utterance: text.to_string(),
            answer: response.answer.as_ref().map(|a| a.id.clone()),
            reward_applied_to_prev_turn: reward_applied,
            model_version,
        });
        self.turns.fetch_add(1, Ordering::Relaxed);
        Ok(response)
    }

    pub fn policy_stats(&self) -> PolicyStats {
        let l = self.learner.read().unwrap();
        PolicyStats {
            model_version: l.model_version,
            updates_applied: l.updates_applied,
            queue_len: l.queue.len(),
            mean_recent_reward: if l.recent.is_empty() {
                0.0
            } else {
                l.recent.iter().sum::<f64>() / l.recent.len() as f64
            },
            miss_counts: MissCounts {
                embeddings: self.resources.embedder.miss_count(),
            },
        }
    }

    pub fn stats(&self) -> ServiceStats {
        ServiceStats {
            sessions: self.sessions.lock().unwrap().len(),
            turns: self.turns.load(Ordering::Relaxed),
            model_version: self.learner.read().unwrap().model_version,
        }
    }

    pub fn turn_log(&self, id: &str) -> Result<Vec<TurnLog>> {
        Ok(self.session(id)?.lock().unwrap().log.clone())
    }

    /// Current parameters and optimizer state.
    pub fn snapshot(&self) -> (PolicyParams, AdamState) {
        let l = self.learner.read().unwrap();
        (l.params.clone(), l.adam.clone())
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UtteranceRequest {
    pub text: String,
    #[serde(default)]
    pub new_conversation: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResetResponse {
    pub reward_applied: Option<f64>,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownSession(_) => StatusCode::NOT_FOUND,
            Error::Service(_) | Error::Predictor(_) | Error::MissingScore { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type Shared = Arc<Engine>;

async fn create_session(State(engine): State<Shared>) -> Json<SessionCreated> {
    Json(SessionCreated {
        session_id: engine.create_session(),
    })
}

async fn utterance(
    State(engine): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<UtteranceRequest>,
) -> std::result::Result<Json<UtteranceResponse>, ApiError> {
    tokio::task::spawn_blocking(move || engine.utterance(&id, &req.text, req.new_conversation))
        .await
        .map_err(|e| ApiError(Error::Service(e.to_string())))?
        .map(Json)
        .map_err(ApiError)
}

async fn reset(State(engine): State<Shared>, Path(id): Path<String>) -> std::result::Result<Json<ResetResponse>, ApiError> {
    engine
        .reset_session(&id)
        .map(|reward_applied| Json(ResetResponse { reward_applied }))
        .map_err(ApiError)
}

async fn stats(State(engine): State<Shared>) -> Json<ServiceStats> {
    Json(engine.stats())
}

async fn policy_stats(State(engine): State<Shared>) -> Json<PolicyStats> {
    Json(engine.policy_stats())
}

pub fn router(engine: Shared) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/utterance", post(utterance))
        .route("/session/{id}/reset", post(reset))
        .route("/stats", get(stats))
        .route("/policy/stats", get(policy_stats))
        .with_state(engine)
}
