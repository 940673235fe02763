//! Compile an n-ary fact into labeled entity-to-entity edges and print them.
//!
//! ```text
//! cargo run --example qualifier_graph -- [facts.tsv]
//! ```

use convqa::kg::KgIndex;

fn main() -> convqa::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/endgame.tsv").to_string());
    let kg = KgIndex::load(&path)?;
    println!("{} facts, {} nodes, {} edges", kg.fact_count(), kg.node_count(), kg.edge_count());
    for e in kg.all_edges() {
        let dir = if e.reversed { "rev" } else { "fwd" };
        println!("{:10} {dir}  {} -> {}  [{}]", e.source_fact, e.start.label, e.end.label, e.path_label);
    }
    Ok(())
}
