//! Follow the context entities through a scripted conversation and show how
//! each admitted neighbor scored.
//!
//! ```text
//! cargo run --example context_tracking
//! ```

use convqa::context::{ContextConfig, ContextTracker, ConversationContext};
use convqa::ned::LexicalNed;
use convqa::synthetic::toy_world;

fn main() -> convqa::Result<()> {
    let kg = toy_world().kg()?;
    let cfg = ContextConfig::default();
    let tracker = ContextTracker::new(&kg, &LexicalNed, &cfg);
    let turns = [
        ("Who directed Avengers: Endgame?", true),
        ("What comes next in the series?", true),
        ("Who played Tony Stark?", true),
        ("Tony Stark was played by whom?", false),
    ];
    let mut ctx = ConversationContext::new();
    for (q, new_intent) in turns {
        if ctx.is_started() {
            for s in tracker.score_neighborhood(&ctx, q).iter().filter(|s| s.cxt > cfg.h_cxt) {
                println!(
                    "  admit {:32} overlap {:.2} match {:.2} ned {:.2} prior {:.2} cxt {:.3}",
                    s.entity.label, s.overlap, s.lexical_match, s.ned, s.prior, s.cxt
                );
            }
        }
        ctx = tracker.update(&ctx, q, new_intent);
        let labels: Vec<&str> = ctx.entities.values().map(|e| e.label.as_str()).collect();
        println!("{q}\n  context: {}", labels.join(", "));
    }
    Ok(())
}
