//! Write the synthetic world as the files the `convqa` binary reads: a fact
//! TSV, a dataset JSON and an engine config.
//!
//! ```text
//! cargo run --example toy_files -- out/
//! cargo run --bin convqa -- train --config out/engine.json
//! ```

use std::path::PathBuf;

use convqa::config::EngineConfig;
use convqa::kg::write_facts;
use convqa::synthetic::toy_world;

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "toy".into()));
    std::fs::create_dir_all(&dir)?;
    let world = toy_world();
    std::fs::write(dir.join("kg.tsv"), write_facts(&world.facts))?;
    std::fs::write(dir.join("dataset.json"), world.dataset.to_json())?;
    let mut cfg = EngineConfig::new("kg.tsv");
    cfg.paths.dataset = Some("dataset.json".into());
    cfg.paths.checkpoint = Some("policy.cnq".into());
    std::fs::write(dir.join("engine.json"), cfg.to_json())?;
    println!("wrote {}/{{kg.tsv,dataset.json,engine.json}}", dir.display());
    Ok(())
}
