//! Train on the synthetic movie world and compare against the untrained policy.
//!
//! ```text
//! cargo run --example train_synthetic -- [seed]
//! ```

use std::time::Instant;

use convqa::agent::Environment;
use convqa::context::ContextConfig;
use convqa::embeddings::HashEmbedder;
use convqa::eval::{evaluate, EvalSettings};
use convqa::ned::LexicalNed;
use convqa::refpred::OraclePredictor;
use convqa::synthetic::toy_world;
use convqa::trainer::{TrainConfig, Trainer};
use convqa::user_sim::{UserKind, UserModel};

fn main() -> convqa::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let world = toy_world();
    let kg = world.kg()?;
    let embedder = HashEmbedder::new(768, seed);
    let context = ContextConfig::default();
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let env = Environment {
        kg: &kg,
        embedder: &embedder,
        ned: &LexicalNed,
        context: &context,
        action_cap: cfg.action_cap,
        seed,
    };
    let user = UserModel::new(UserKind::Ideal);
    let settings = EvalSettings {
        user,
        top_k: cfg.top_k,
        mode: Default::default(),
    };
    println!(
        "{} facts ({} qualified), {} nodes, {} edges, {} conversations",
        kg.fact_count(),
        world.qualified_fact_count(),
        kg.node_count(),
        kg.edge_count(),
        world.dataset.conversations.len()
    );

    let mut trainer = Trainer::new(env, &OraclePredictor, user, cfg);
    let before = evaluate(&env, &trainer.params, &world.dataset, &settings)?;
    println!("untrained  P@1 {:.3}  Hit@5 {:.3}  MRR {:.3}", before.overall.p1, before.overall.hit5, before.overall.mrr);

    let start = Instant::now();
    for e in trainer.train_epochs(&world.dataset)? {
        println!(
            "epoch {:2}  experiences {:5}  mean reward {:+.3}  updates {}",
            e.epoch, e.experiences, e.mean_reward, e.updates
        );
    }
    let after = evaluate(&env, &trainer.params, &world.dataset, &settings)?;
    println!("trained    P@1 {:.3}  Hit@5 {:.3}  MRR {:.3}", after.overall.p1, after.overall.hit5, after.overall.mrr);
    println!("training took {:.1?}", start.elapsed());
    print!("{}", after.to_tsv("IdealUser-OracleRef"));
    Ok(())
}
