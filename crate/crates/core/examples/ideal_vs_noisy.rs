//! Train the synthetic world under the ideal configuration (ideal user,
//! oracle reformulation labels) and under a noisy one (noisy user, labels
//! flipped with probability 0.1), in parallel, for a few seeds.
//!
//! ```text
//! cargo run --example ideal_vs_noisy -- [seeds]
//! ```

use convqa::agent::Environment;
use convqa::context::ContextConfig;
use convqa::embeddings::HashEmbedder;
use convqa::eval::{evaluate, EvalSettings};
use convqa::ned::LexicalNed;
use convqa::refpred::{FlippedOracle, OraclePredictor, RefPredictor};
use convqa::synthetic::toy_world;
use convqa::trainer::{TrainConfig, Trainer};
use convqa::user_sim::{UserKind, UserModel};

fn run(seed: u64, user: UserKind, predictor: &dyn RefPredictor) -> convqa::Result<f64> {
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
    let user = UserModel::new(user);
    let settings = EvalSettings { user, top_k: cfg.top_k, mode: Default::default() };
    let mut trainer = Trainer::new(env, predictor, user, cfg);
    trainer.train_epochs(&world.dataset)?;
    Ok(evaluate(&env, &trainer.params, &world.dataset, &settings)?.overall.p1)
}

fn main() -> convqa::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let results: Vec<(u64, f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..seeds)
            .map(|seed| {
                let ideal = s.spawn(move || run(seed, UserKind::Ideal, &OraclePredictor));
                let noisy = s.spawn(move || {
                    let flipped = FlippedOracle { flip_prob: 0.1, seed };
                    run(seed, UserKind::Noisy, &flipped)
                });
                (seed, ideal, noisy)
            })
            .collect();
        handles
            .into_iter()
            .map(|(seed, i, n)| Ok((seed, i.join().unwrap()?, n.join().unwrap()?)))
            .collect::<convqa::Result<_>>()
    })?;
    for (seed, ideal, noisy) in &results {
        println!("seed {seed}: ideal P@1 {ideal:.3}  noisy P@1 {noisy:.3}  drop {:+.3}", ideal - noisy);
    }
    let n = results.len() as f64;
    let mean_drop = results.iter().map(|(_, i, n)| i - n).sum::<f64>() / n;
    println!("mean drop {mean_drop:+.3}");
    Ok(())
}
