//! Drive the interactive engine the way a chat client would: each follow-up
//! rewards the previous answer and the policy updates online. The lexical
//! threshold is calibrated first on pairs built from the scripted dataset.
//!
//! ```text
//! cargo run --example live_session
//! ```

use std::sync::Arc;

use convqa::config::{EngineConfig, Resources};
use convqa::embeddings::HashEmbedder;
use convqa::policy::PolicyParams;
use convqa::refpred::{calibrate_threshold, generate_training_pairs, LexicalPredictor, PredictorKind};
use convqa::service::Engine;
use convqa::synthetic::toy_world;

fn main() -> convqa::Result<()> {
    let world = toy_world();
    let mut cfg = EngineConfig::new("toy.tsv");
    cfg.predictor = PredictorKind::Lexical;
    let probe = LexicalPredictor::new(Arc::new(HashEmbedder::new(cfg.d, cfg.train.seed)), cfg.lexical_threshold);
    let (tau, f1) = calibrate_threshold(&probe, &generate_training_pairs(&world.dataset, 0))?;
    println!("lexical threshold {tau:.3} (reformulation F1 {f1:.3})");
    cfg.lexical_threshold = tau;
    let res = Resources::from_parts(cfg, world.kg()?, None)?;
    let c = &res.config;
    let params = PolicyParams::init(res.env().input_dim(), c.train.hidden, c.d, c.train.init_seed());
    let engine = Engine::new(res, params, None)?;

    let session = engine.create_session();
    let script = [
        ("Who directed Avengers: Endgame?", false),
        ("Who was the director of Avengers: Endgame?", false),
        ("What comes next in the series?", false),
        ("When was Silent Harbor released?", true),
    ];
    for (text, new_conversation) in script {
        let r = engine.utterance(&session, text, new_conversation)?;
        let answer = r.answer.as_ref().map_or("-", |a| a.label.as_str());
        println!("> {text}\n  {answer}  (reward to previous turn {:?}, model v{})", r.reward_applied, r.model_version);
    }
    engine.reset_session(&session)?;
    let s = engine.policy_stats();
    println!(
        "updates {}  queued {}  mean recent reward {:+.2}",
        s.updates_applied, s.queue_len, s.mean_recent_reward
    );
    Ok(())
}
