//! A one-state, two-action bandit driven through the same batch REINFORCE
//! update the trainer uses: a sanity check of the estimator.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::{ActionEdge, EntityRef};
use crate::policy::{forward, sample_action, ActionSet, AdamState, PolicyParams, StateInput};
use crate::trainer::{batch_update, Experience, ExperienceQueue};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BanditConfig {
    /// Kept below the engine's 768 so twenty seeds of 200 updates stay cheap.
    pub dim: usize,
    pub hidden: usize,
    /// Samples per update.
    pub rollouts: usize,
    pub updates: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            dim: 128,
            hidden: 128,
            rollouts: 20,
            updates: 200,
            alpha: 0.001,
            beta: 0.1,
        }
    }
}

/// Probability of the rewarded action before each update and after the last.
pub fn run_bandit(seed: u64, cfg: &BanditConfig) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = |n: usize| {
        let v: Array1<f64> = Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0));
        let norm = v.dot(&v).sqrt();
        v / norm
    };
    let x = unit(cfg.dim);
    let mut embeddings = Array2::zeros((2, cfg.dim));
    embeddings.row_mut(0).assign(&unit(cfg.dim));
    embeddings.row_mut(1).assign(&unit(cfg.dim));
    let start = EntityRef::new("bandit", "bandit");
    let edges = (0..2)
        .map(|i| ActionEdge {
            start: start.clone(),
            end: EntityRef::new(format!("arm{i}"), format!("arm {i}")),
            path_label: format!("arm {i}"),
            source_fact: "bandit".into(),
            reversed: false,
        })
        .collect();
    let state = Arc::new(StateInput { x, start });
    let actions = Arc::new(ActionSet { edges, embeddings });
    let correct = (seed % 2) as usize;

    let mut params = PolicyParams::init(cfg.dim, cfg.hidden, cfg.dim, seed);
    let mut adam = AdamState::new(&params);
    let mut queue = ExperienceQueue::new();
    let mut sampler = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut trace = Vec::with_capacity(cfg.updates + 1);
    for _ in 0..cfg.updates {
        let probs = forward(&params, &state, &actions)?;
        trace.push(probs[correct]);
        for _ in 0..cfg.rollouts {
            let a = sample_action(&probs, &mut sampler)?;
            queue.enqueue(Experience {
                state: state.clone(),
                actions: actions.clone(),
                chosen: a,
                reward: if a == correct { 1.0 } else { -1.0 },
                next_utterance: String::new(),
            });
        }
        batch_update(&mut queue, cfg.rollouts, &mut params, &mut adam, cfg.alpha, cfg.beta)?;
    }
    trace.push(forward(&params, &state, &actions)?[correct]);
    Ok(trace)
}
