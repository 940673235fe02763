//! Build labeled follow-up pairs from the scripted dataset and calibrate the
//! lexical reformulation detector on them.
//!
//! ```text
//! cargo run --example reformulation_pairs
//! ```

use std::sync::Arc;

use convqa::embeddings::HashEmbedder;
use convqa::refpred::{
    calibrate_threshold, generate_training_pairs, ref_pred_prf, LexicalPredictor, QuestionPair, RefPredictor,
    DEFAULT_LEXICAL_THRESHOLD,
};
use convqa::synthetic::toy_world;

fn main() -> convqa::Result<()> {
    let world = toy_world();
    let pairs = generate_training_pairs(&world.dataset, 0);
    let refs = pairs.iter().filter(|p| p.is_reformulation).count();
    println!("{} pairs, {refs} reformulations", pairs.len());
    for p in pairs.iter().take(4) {
        println!("  {:5}  {}  ->  {}", p.is_reformulation, p.question_a, p.question_b);
    }

    let embedder = Arc::new(HashEmbedder::new(768, 0));
    let (dev, test) = pairs.split_at(pairs.len() / 2);
    let probe = LexicalPredictor::new(embedder.clone(), DEFAULT_LEXICAL_THRESHOLD);
    let (tau, dev_f1) = calibrate_threshold(&probe, dev)?;
    println!("calibrated threshold {tau:.3} (dev reformulation F1 {dev_f1:.3})");

    let labels: Vec<bool> = test.iter().map(|p| p.is_reformulation).collect();
    for tau in [DEFAULT_LEXICAL_THRESHOLD, tau] {
        let predictor = LexicalPredictor::new(embedder.clone(), tau);
        let preds = test
            .iter()
            .map(|p| Ok(predictor.predict(&QuestionPair::new(&p.question_a, &p.question_b))?.is_reformulation))
            .collect::<convqa::Result<Vec<_>>>()?;
        let prf = ref_pred_prf(&preds, &labels)?;
        println!(
            "tau {tau:.3}: reformulation P/R/F1 {:.3}/{:.3}/{:.3}, new intent F1 {:.3}",
            prf.reformulation.precision, prf.reformulation.recall, prf.reformulation.f1, prf.new_intent.f1
        );
    }
    Ok(())
}
