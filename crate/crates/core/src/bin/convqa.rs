use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use convqa::checkpoint;
use convqa::config::{EngineConfig, Resources};
use convqa::eval::{evaluate, evaluate_online, OnlineLearner};
use convqa::policy::PolicyParams;
use convqa::refpred::{generate_training_pairs, write_pairs_tsv, PredictorKind};
use convqa::service::{router, Engine};
use convqa::trainer::{write_training_log, Trainer};
use convqa::user_sim::{UserKind, UserModel};

#[derive(Parser)]
#[command(name = "convqa", about = "Conversational QA over an n-ary KG, trained from reformulation feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `paths.checkpoint`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_user)]
    user: Option<UserKind>,
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write the checkpoint and a training log.
    Train(Common),
    /// Evaluate a checkpoint and write the TSV report.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Keep learning from the served answers while evaluating.
        #[arg(long)]
        online: bool,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write reformulation training pairs for an external classifier.
    PrepPairs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn parse_user(s: &str) -> Result<UserKind, String> {
    match s {
        "ideal" => Ok(UserKind::Ideal),
        "noisy" => Ok(UserKind::Noisy),
        _ => Err(format!("expected ideal or noisy, got `{s}`")),
    }
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    s.parse().map_err(|e: convqa::Error| e.to_string())
}

fn load_config(c: &Common) -> Result<EngineConfig> {
    let mut cfg = EngineConfig::load(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
    if let Some(p) = &c.checkpoint {
        cfg.paths.checkpoint = Some(p.clone());
    }
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if let Some(u) = c.user {
        cfg.user_model = u;
    }
    if let Some(p) = c.predictor {
        cfg.predictor = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint_path(cfg: &EngineConfig) -> Result<PathBuf> {
    cfg.paths
        .checkpoint
        .clone()
        .context("no checkpoint path: set paths.checkpoint or pass --checkpoint")
}

fn load_params(res: &Resources) -> Result<(PolicyParams, Option<convqa::policy::AdamState>)> {
    let path = checkpoint_path(&res.config)?;
    let (params, adam) = checkpoint::load(&path)?;
    let env = res.env();
    if params.input_dim() != env.input_dim() || params.d() != res.embedder.dim() {
        bail!(
            "checkpoint {} was trained for input {} / d {}, config gives {} / {}",
            path.display(),
            params.input_dim(),
            params.d(),
            env.input_dim(),
            res.embedder.dim()
        );
    }
    Ok((params, adam))
}

fn train(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let out = checkpoint_path(&cfg)?;
    let res = Resources::load(cfg)?;
    let dataset = res.dataset()?;
    let mut trainer = Trainer::new(
        res.env(),
        res.predictor.as_ref(),
        UserModel::new(res.config.user_model),
        res.config.train.clone(),
    );
    for e in trainer.train_epochs(dataset)? {
        eprintln!(
            "epoch {}: {} experiences, mean reward {:.3}, {} updates",
            e.epoch, e.experiences, e.mean_reward, e.updates
        );
    }
    checkpoint::save(&out, &trainer.params, Some(&trainer.adam))?;
    let log = out.with_extension("log.tsv");
    std::fs::write(&log, write_training_log(&trainer.log)).with_context(|| format!("writing {}", log.display()))?;
    eprintln!("wrote {} and {}", out.display(), log.display());
    Ok(())
}

fn eval(common: &Common, online: bool, out: Option<&PathBuf>) -> Result<()> {
    let res = Resources::load(load_config(common)?)?;
    let dataset = res.dataset()?;
    let (params, _) = load_params(&res)?;
    let settings = res.config.eval_settings();
    let report = if online {
        let mut learner = OnlineLearner::new(
            params,
            res.predictor.as_ref(),
            res.config.interactive_batch_size,
            res.config.train.alpha,
            res.config.train.beta,
        );
        evaluate_online(&res.env(), &mut learner, dataset, &settings)?
    } else {
        evaluate(&res.env(), &params, dataset, &settings)?
    };
    let method = format!("{:?}User-{:?}Ref", res.config.user_model, res.config.predictor);
    let tsv = report.to_tsv(&method);
    match out {
        Some(p) => std::fs::write(p, tsv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{tsv}"),
    }
    Ok(())
}

fn prep_pairs(common: &Common, out: &PathBuf) -> Result<()> {
    let cfg = load_config(common)?;
    let dataset = convqa::dataset::Dataset::load(cfg.paths.dataset.as_ref().context("paths.dataset is required")?)?;
    dataset.validate()?;
    let pairs = generate_training_pairs(&dataset, cfg.train.seed);
    std::fs::write(out, write_pairs_tsv(&pairs)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}

fn serve(common: &Common, addr: &str) -> Result<()> {
    let res = Resources::load(load_config(common)?)?;
    let (params, adam) = match &res.config.paths.checkpoint {
        Some(p) if p.exists() => load_params(&res)?,
        _ => {
            let p = PolicyParams::init(
                res.env().input_dim(),
                res.config.train.hidden,
                res.embedder.dim(),
                res.config.train.init_seed(),
            );
            (p, None)
        }
    };
    if res.predictor.kind() == PredictorKind::Oracle {
        eprintln!("note: live turns carry no labels, using the lexical reformulation predictor");
    }
    let engine = Arc::new(Engine::new(res, params, adam)?);
    let app = router(engine.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    if let Some(p) = &engine.resources().config.paths.checkpoint {
        let (params, adam) = engine.snapshot();
        checkpoint::save(p, &params, Some(&adam))?;
        eprintln!("saved {}", p.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => train(&c),
        Command::Eval { common, online, out } => eval(&common, online, out.as_ref()),
        Command::PrepPairs { common, out } => prep_pairs(&common, &out),
        Command::Serve { common, addr } => serve(&common, &addr),
    }
}
