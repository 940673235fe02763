//! Acceptance gate. Prints one PASS/FAIL line per criterion with the pinned
//! tolerance and the measured value, and exits non-zero if any criterion
//! fails. Runs without the test harness so the table is always shown.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use convqa::agent::Environment;
use convqa::answerer::{answer, RankingMode};
use convqa::bandit::{run_bandit, BanditConfig};
use convqa::checkpoint;
use convqa::config::{EngineConfig, Resources};
use convqa::context::{combine, ContextConfig, ContextTracker, ConversationContext};
use convqa::dataset::{ConversationScript, Dataset, GoldAnswer, IntentScript};
use convqa::embeddings::HashEmbedder;
use convqa::eval::{evaluate, EvalSettings, MetricsReport};
use convqa::kg::{write_facts, EntityRef, KgIndex, NaryFact, Predicate};
use convqa::ned::LexicalNed;
use convqa::policy::{entropy, forward, grad_entropy, grad_log_pi, softmax, ActionSet, PolicyParams, StateInput};
use convqa::refpred::{FlippedOracle, OraclePredictor, RefPredictor};
use convqa::synthetic::toy_world;
use convqa::trainer::{TrainConfig, Trainer};
use convqa::user_sim::{UserKind, UserModel};

// Pinned tolerances and thresholds.
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const FD_INSTANCES: usize = 20;
const SOFTMAX_CASES: usize = 1000;
const SUM_TOL: f64 = 1e-9;
const EQ1_TOL: f64 = 1e-9;
const BANDIT_SEEDS: u64 = 20;
const BANDIT_REQUIRED: usize = 19;
const BANDIT_TARGET: f64 = 0.95;
const E2E_MIN_P1: f64 = 0.8;
const E2E_MIN_GAIN: f64 = 0.3;
const NOISE_SEEDS: u64 = 5;
const NOISE_MAX_DROP: f64 = 0.15;
const NOISE_FLIP: f64 = 0.1;
const BENCH_P1: (f64, f64) = (0.25, 0.45);

struct Outcome {
    name: &'static str,
    budget: Duration,
    elapsed: Duration,
    verdict: Verdict,
    detail: String,
}

enum Verdict {
    Pass,
    Fail,
    Skip,
}

fn criterion(
    name: &'static str,
    budget_secs: u64,
    run: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let start = Instant::now();
    let result = run();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    let (verdict, detail) = match result {
        Ok((ok, detail)) if ok && elapsed <= budget => (Verdict::Pass, detail),
        Ok((ok, detail)) if ok => (Verdict::Fail, format!("{detail}; over time budget")),
        Ok((_, detail)) => (Verdict::Fail, detail),
        Err(e) => (Verdict::Fail, format!("error: {e}")),
    };
    Outcome {
        name,
        budget,
        elapsed,
        verdict,
        detail,
    }
}

fn skipped(name: &'static str, why: String) -> Outcome {
    Outcome {
        name,
        budget: Duration::ZERO,
        elapsed: Duration::ZERO,
        verdict: Verdict::Skip,
        detail: why,
    }
}

fn e(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn random_instance(rng: &mut ChaCha8Rng, d: usize, hidden: usize, n_actions: usize) -> (PolicyParams, StateInput, ActionSet) {
    let mut m = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
    let params = PolicyParams {
        w1: m(hidden, d),
        w2: m(d, hidden),
    };
    let embeddings = m(n_actions, d);
    let x = m(1, d).row(0).to_owned();
    let start = EntityRef::new("s", "S");
    let edges = (0..n_actions)
        .map(|i| convqa::kg::ActionEdge {
            start: start.clone(),
            end: EntityRef::new(format!("e{i}"), format!("E{i}")),
            path_label: format!("a{i}"),
            source_fact: "f".into(),
            reversed: false,
        })
        .collect();
    (params, StateInput { x, start }, ActionSet { edges, embeddings })
}

/// Central differences of `f` with respect to every entry of W1 and W2.
fn finite_difference(params: &PolicyParams, f: impl Fn(&PolicyParams) -> f64) -> (Array2<f64>, Array2<f64>) {
    let mut g1 = Array2::zeros(params.w1.raw_dim());
    let mut g2 = Array2::zeros(params.w2.raw_dim());
    for (idx, _) in params.w1.indexed_iter() {
        let (mut p, mut q) = (params.clone(), params.clone());
        p.w1[idx] += FD_STEP;
        q.w1[idx] -= FD_STEP;
        g1[idx] = (f(&p) - f(&q)) / (2.0 * FD_STEP);
    }
    for (idx, _) in params.w2.indexed_iter() {
        let (mut p, mut q) = (params.clone(), params.clone());
        p.w2[idx] += FD_STEP;
        q.w2[idx] -= FD_STEP;
        g2[idx] = (f(&p) - f(&q)) / (2.0 * FD_STEP);
    }
    (g1, g2)
}

fn rel_error(a: (&Array2<f64>, &Array2<f64>), b: (&Array2<f64>, &Array2<f64>)) -> f64 {
    let sq = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
    let diff = sq(&(a.0 - b.0)) + sq(&(a.1 - b.1));
    let scale = (sq(a.0) + sq(a.1)).sqrt().max((sq(b.0) + sq(b.1)).sqrt()).max(1e-12);
    diff.sqrt() / scale
}

fn gradient_correctness() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < FD_INSTANCES {
        let (params, state, actions) = random_instance(&mut rng, 6, 6, 4);
        // keep pre-activations away from the relu kink so differences are valid
        let pre = params.w1.dot(&state.x);
        if pre.iter().any(|p| p.abs() < 1e-3) {
            continue;
        }
        let chosen = rng.random_range(0..4);
        let lp = grad_log_pi(&params, &state, &actions, chosen).map_err(e)?;
        let fd = finite_difference(&params, |p| forward(p, &state, &actions).unwrap()[chosen].ln());
        worst = worst.max(rel_error((&lp.w1, &lp.w2), (&fd.0, &fd.1)));
        let he = grad_entropy(&params, &state, &actions).map_err(e)?;
        let fd = finite_difference(&params, |p| entropy(&forward(p, &state, &actions).unwrap()));
        worst = worst.max(rel_error((&he.w1, &he.w2), (&fd.0, &fd.1)));
        done += 1;
    }
    Ok((
        worst <= FD_REL_TOL,
        format!("{done} instances (d=6, hidden=6, 4 actions, h={FD_STEP:e}); worst relative error {worst:.2e} (tol {FD_REL_TOL:e})"),
    ))
}

fn softmax_laws() -> Result<(bool, String), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum: f64 = 0.0;
    let mut bound_violations = 0;
    let mut uniform_err: f64 = 0.0;
    for _ in 0..SOFTMAX_CASES {
        let n = rng.random_range(1..=50);
        let scale = 10f64.powf(rng.random_range(-3.0..2.5));
        let logits = Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0) * scale);
        let p = softmax(&logits);
        worst_sum = worst_sum.max((p.sum() - 1.0).abs());
        let h = entropy(&p);
        if !(h >= -SUM_TOL && h <= (n as f64).ln() + SUM_TOL) {
            bound_violations += 1;
        }
        let u = softmax(&Array1::zeros(n));
        uniform_err = uniform_err.max(u.iter().map(|v| (v - 1.0 / n as f64).abs()).fold(0.0, f64::max));
    }
    Ok((
        worst_sum <= SUM_TOL && bound_violations == 0 && uniform_err <= SUM_TOL,
        format!(
            "{SOFTMAX_CASES} cases; max |Σp-1| {worst_sum:.1e}, entropy-bound violations {bound_violations}, max uniform deviation {uniform_err:.1e}"
        ),
    ))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qualifier_golden() -> Result<(bool, String), String> {
    let kg = KgIndex::load(fixture("endgame.tsv")).map_err(e)?;
    let (eg, mcu, ffh, n22) = ("Avengers: Endgame", "Marvel Cinematic Universe", "Spider-Man: Far from Home", "22");
    // Hand enumeration: main edge, each endpoint to each qualifier object,
    // and the qualifier-object pair, each in both directions.
    let forward = [
        (eg, mcu, "part of the series # followed by Spider-Man: Far from Home # series ordinal 22"),
        (eg, ffh, "part of the series Marvel Cinematic Universe # followed by"),
        (mcu, ffh, "part of the series Avengers: Endgame # followed by"),
        (eg, n22, "part of the series Marvel Cinematic Universe # series ordinal"),
        (mcu, n22, "part of the series Avengers: Endgame # series ordinal"),
        (ffh, n22, "part of the series Marvel Cinematic Universe # series ordinal"),
    ];
    let mut expected: Vec<(String, String, String)> = forward
        .iter()
        .flat_map(|(a, b, l)| [(a.to_string(), b.to_string(), l.to_string()), (b.to_string(), a.to_string(), l.to_string())])
        .collect();
    expected.sort();
    let mut got: Vec<(String, String, String)> = kg
        .all_edges()
        .filter(|x| x.source_fact == "f_series")
        .map(|x| (x.start.label.clone(), x.end.label.clone(), x.path_label.clone()))
        .collect();
    got.sort();
    let key_edge = kg
        .edges("Q23781155")
        .iter()
        .find(|x| x.end.id == "Q27985819")
        .map(|x| x.path_label.contains("part of the series") && x.path_label.contains("followed by"))
        .unwrap_or(false);
    Ok((
        got == expected && key_edge,
        format!("{} edges from the series fact (expected 12); Endgame→Spider-Man label carries both predicates: {key_edge}", got.len()),
    ))
}

fn eq1_oracle() -> Result<(bool, String), String> {
    // n is reachable from a and b but not from c and d, is the subject of 100
    // facts, and its label shares one of five words with the question.
    let n = EntityRef::new("n", "Harbor Lights");
    let mut facts = Vec::new();
    for (i, src) in ["a", "b"].iter().enumerate() {
        facts.push(NaryFact::triple(format!("r{i}"), EntityRef::new(*src, src.to_uppercase()), Predicate::new("p", "near"), n.clone()));
    }
    for (i, src) in ["c", "d"].iter().enumerate() {
        facts.push(NaryFact::triple(format!("o{i}"), EntityRef::new(*src, src.to_uppercase()), Predicate::new("p", "near"), EntityRef::new("z", "Z")));
    }
    for i in 0..100 {
        facts.push(NaryFact::triple(format!("s{i}"), n.clone(), Predicate::new("q", "has"), EntityRef::new(format!("lit:{i}"), i.to_string())));
    }
    let kg = KgIndex::from_facts(facts).map_err(e)?;
    let cfg = ContextConfig::default();
    let tracker = ContextTracker::new(&kg, &LexicalNed, &cfg);
    let prev: IndexMap<String, EntityRef> = ["a", "b", "c", "d"]
        .iter()
        .map(|id| (id.to_string(), kg.entity(id).unwrap().clone()))
        .collect();
    let ned: HashMap<String, f64> = [("n".to_string(), 0.9)].into();
    let s = tracker.score_candidate(&n, "harbor alpha beta gamma", &prev, &ned);
    let hand: f64 = 0.1 * 0.5 + 0.1 * 0.2 + 0.7 * 0.9 + 0.1 * 1.0;
    let ok = (s.overlap - 0.5).abs() < EQ1_TOL
        && (s.lexical_match - 0.2).abs() < EQ1_TOL
        && (s.ned - 0.9).abs() < EQ1_TOL
        && (s.prior - 1.0).abs() < EQ1_TOL
        && (s.cxt - 0.80).abs() < EQ1_TOL
        && (hand - 0.80).abs() < EQ1_TOL
        && (combine(&cfg, 0.5, 0.2, 0.9, 1.0) - 0.80).abs() < EQ1_TOL
        && s.cxt > cfg.h_cxt;
    Ok((
        ok,
        format!(
            "overlap {} match {} ned {} prior {} → cxt {:.12} (hand 0.80, tol {EQ1_TOL:e}, admitted over {})",
            s.overlap, s.lexical_match, s.ned, s.prior, s.cxt, cfg.h_cxt
        ),
    ))
}

fn bandit() -> Result<(bool, String), String> {
    let cfg = BanditConfig::default();
    let mut passed = 0;
    let mut finals = Vec::new();
    for seed in 0..BANDIT_SEEDS {
        let trace = run_bandit(seed, &cfg).map_err(e)?;
        if trace[1..].iter().any(|&p| p > BANDIT_TARGET) {
            passed += 1;
        }
        finals.push(*trace.last().unwrap());
    }
    let min_final = finals.iter().copied().fold(1.0, f64::min);
    Ok((
        passed >= BANDIT_REQUIRED,
        format!(
            "{passed}/{BANDIT_SEEDS} seeds exceed P(correct) {BANDIT_TARGET} within {} updates (need {BANDIT_REQUIRED}); lowest final P {min_final:.4}",
            cfg.updates
        ),
    ))
}

struct SyntheticRun {
    untrained: MetricsReport,
    trained: MetricsReport,
}

fn synthetic_run(seed: u64, user: UserKind, predictor: &dyn RefPredictor) -> convqa::Result<SyntheticRun> {
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
    let settings = EvalSettings {
        user,
        top_k: cfg.top_k,
        mode: RankingMode::Cumulative,
    };
    let mut trainer = Trainer::new(env, predictor, user, cfg);
    let untrained = evaluate(&env, &trainer.params, &world.dataset, &settings)?;
    trainer.train_epochs(&world.dataset)?;
    let trained = evaluate(&env, &trainer.params, &world.dataset, &settings)?;
    Ok(SyntheticRun { untrained, trained })
}

fn end_to_end(ideal_seed0: &SyntheticRun, world_shape: String) -> Result<(bool, String), String> {
    let (before, after) = (ideal_seed0.untrained.p1(), ideal_seed0.trained.p1());
    // The running example: after "Who directed Avengers: Endgame?", the
    // follow-up about the series is answered with Spider-Man: Far from Home.
    let fig = ideal_seed0
        .trained
        .outcomes
        .iter()
        .find(|o| o.intent_id == "c19_i1")
        .and_then(|o| o.turns.first())
        .and_then(|t| t.top.clone())
        .unwrap_or_default();
    Ok((
        after >= E2E_MIN_P1 && after - before >= E2E_MIN_GAIN,
        format!(
            "{world_shape}; P@1 untrained {before:.3} → trained {after:.3} (need ≥ {E2E_MIN_P1} and gain ≥ {E2E_MIN_GAIN}); series follow-up top-1 `{fig}`"
        ),
    ))
}

fn noise_robustness(ideal: &[SyntheticRun], noisy: &[SyntheticRun]) -> Result<(bool, String), String> {
    let drops: Vec<f64> = ideal.iter().zip(noisy).map(|(i, n)| i.trained.p1() - n.trained.p1()).collect();
    let mean = drops.iter().sum::<f64>() / drops.len() as f64;
    let per: Vec<String> = ideal
        .iter()
        .zip(noisy)
        .map(|(i, n)| format!("{:.2}/{:.2}", i.trained.p1(), n.trained.p1()))
        .collect();
    Ok((
        mean <= NOISE_MAX_DROP,
        format!(
            "ideal/noisy P@1 per seed [{}]; mean drop {mean:+.3} (max {NOISE_MAX_DROP}, flip prob {NOISE_FLIP})",
            per.join(", ")
        ),
    ))
}

/// Replays the protocol by hand: walk each intent turn by turn, look up the
/// gold rank, and aggregate with plain arithmetic.
fn brute_force(env: &Environment<'_>, params: &PolicyParams, ds: &Dataset, noisy: bool) -> (f64, f64, f64, usize, [usize; 5], usize) {
    let tracker = env.tracker();
    let (mut p1, mut hit5, mut mrr, mut refs, mut hist, mut n) = (0.0, 0.0, 0.0, 0usize, [0usize; 5], 0usize);
    for conv in &ds.conversations {
        let mut ctx = ConversationContext::new();
        for intent in &conv.intents {
            let k = intent.questions.len();
            let gold: Vec<&str> = intent.gold_answers.iter().filter_map(|g| g.id.as_deref()).collect();
            let (mut best, mut answered, mut turns) = (usize::MAX, None, 0);
            for turn in 1..=5 {
                turns = turn;
                let q = &intent.questions[(turn - 1) % k];
                ctx = tracker.update(&ctx, q, turn == 1);
                let out = answer(env, params, &ctx, 5, RankingMode::Cumulative).unwrap();
                if let Some(r) = out.ranked.iter().position(|a| gold.contains(&a.entity.id.as_str())) {
                    best = best.min(r + 1);
                    if r == 0 {
                        answered = Some(turn);
                        break;
                    }
                }
                if noisy && turn == k {
                    break;
                }
            }
            n += 1;
            let used = answered.unwrap_or(turns) - 1;
            refs += used;
            if answered.is_some() {
                p1 += 1.0;
                hist[used] += 1;
            }
            if best <= 5 {
                hit5 += 1.0;
            }
            if best != usize::MAX {
                mrr += 1.0 / best as f64;
            }
        }
    }
    let nf = n as f64;
    (p1 / nf, hit5 / nf, mrr / nf, refs, hist, n)
}

fn identity_policy(d: usize) -> PolicyParams {
    // z = relu(x) - relu(-x) = x, so logits are label·question cosines.
    let mut w1 = Array2::zeros((2 * d, d));
    let mut w2 = Array2::zeros((d, 2 * d));
    for i in 0..d {
        w1[(i, i)] = 1.0;
        w1[(d + i, i)] = -1.0;
        w2[(i, i)] = 1.0;
        w2[(i, d + i)] = -1.0;
    }
    PolicyParams { w1, w2 }
}

fn metrics_oracle() -> Result<(bool, String), String> {
    let world = toy_world();
    let kg = world.kg().map_err(e)?;
    let embedder = HashEmbedder::new(768, 3);
    let context = ContextConfig::default();
    let env = Environment {
        kg: &kg,
        embedder: &embedder,
        ned: &LexicalNed,
        context: &context,
        action_cap: 1000,
        seed: 3,
    };
    let ds = Dataset {
        conversations: world.dataset.conversations[..4].to_vec(),
    };
    let params = PolicyParams::init(768, 768, 768, 11);
    let mut mismatches = Vec::new();
    let mut summary = String::new();
    for (kind, noisy) in [(UserKind::Ideal, false), (UserKind::Noisy, true)] {
        let settings = EvalSettings {
            user: UserModel::new(kind),
            top_k: 5,
            mode: RankingMode::Cumulative,
        };
        let r = evaluate(&env, &params, &ds, &settings).map_err(e)?.overall;
        let b = brute_force(&env, &params, &ds, noisy);
        if (r.p1, r.hit5, r.mrr, r.ref_triggers, r.ref_histogram, r.intents) != b {
            mismatches.push(format!("{kind:?}: engine {:?} vs replay {:?}", (r.p1, r.hit5, r.mrr, r.ref_triggers, r.ref_histogram), b));
        }
        summary.push_str(&format!(
            "{kind:?} {} intents P@1 {:.2} Hit@5 {:.2} MRR {:.3} RefTriggers {} Ref {:?}; ",
            r.intents, r.p1, r.hit5, r.mrr, r.ref_triggers, r.ref_histogram
        ));
    }

    // Named case: the gold becomes reachable at rank one only with the third
    // phrasing, so the intent must count as P@1 = 1 in bucket Ref=2.
    let movie = EntityRef::new("m:silent_harbor", "Silent Harbor");
    let facts = vec![
        NaryFact::triple("f1", movie.clone(), Predicate::new("P57", "director"), EntityRef::new("p:zora_quint", "Zora Quint")),
        NaryFact::triple("f2", movie.clone(), Predicate::new("P86", "composer"), EntityRef::new("p:aldo_brand", "Aldo Brand")),
        NaryFact::triple("f3", movie, Predicate::new("P136", "genre"), EntityRef::new("g:noir", "noir")),
    ];
    let small = KgIndex::from_facts(facts).map_err(e)?;
    let env = Environment { kg: &small, ..env };
    let ds = Dataset {
        conversations: vec![ConversationScript {
            id: "named".into(),
            domain: "movies".into(),
            intents: vec![IntentScript {
                id: "third".into(),
                questions: vec!["Silent Harbor, tell me?".into(), "Any idea?".into(), "Who was the director?".into()],
                gold_answers: vec![GoldAnswer {
                    id: Some("p:zora_quint".into()),
                    label: "Zora Quint".into(),
                }],
            }],
        }],
    };
    let settings = EvalSettings {
        user: UserModel::new(UserKind::Ideal),
        top_k: 5,
        mode: RankingMode::Cumulative,
    };
    let named = evaluate(&env, &identity_policy(768), &ds, &settings).map_err(e)?;
    let o = &named.outcomes[0];
    let named_ok = o.answered_at_turn == Some(3)
        && named.overall.p1 == 1.0
        && named.overall.ref_histogram == [0, 0, 1, 0, 0]
        && named.overall.ref_triggers == 2;
    if !named_ok {
        mismatches.push(format!("named case: answered at {:?}, report {:?}", o.answered_at_turn, named.overall));
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{summary}named case answered at turn 3 → P@1 1, Ref=2 bucket, RefTriggers 2")
        } else {
            mismatches.join("; ")
        },
    ))
}

struct FileRun {
    checkpoint: Vec<u8>,
    report: String,
}

fn file_pipeline(dir: &Path, seed: u64) -> convqa::Result<FileRun> {
    let world = toy_world();
    std::fs::write(dir.join("kg.tsv"), write_facts(&world.facts)).unwrap();
    std::fs::write(dir.join("dataset.json"), world.dataset.to_json()).unwrap();
    let mut cfg = EngineConfig::new("kg.tsv");
    cfg.paths.dataset = Some("dataset.json".into());
    cfg.paths.checkpoint = Some("policy.cnq".into());
    cfg.train.seed = seed;
    std::fs::write(dir.join("engine.json"), cfg.to_json()).unwrap();

    let res = Resources::load(EngineConfig::load(dir.join("engine.json"))?)?;
    let mut trainer = Trainer::new(
        res.env(),
        res.predictor.as_ref(),
        UserModel::new(res.config.user_model),
        res.config.train.clone(),
    );
    trainer.train_epochs(res.dataset()?)?;
    let path = res.config.paths.checkpoint.clone().unwrap();
    checkpoint::save(&path, &trainer.params, Some(&trainer.adam))?;
    let (params, _) = checkpoint::load(&path)?;
    let report = evaluate(&res.env(), &params, res.dataset()?, &res.config.eval_settings())?;
    Ok(FileRun {
        checkpoint: std::fs::read(&path).unwrap(),
        report: report.to_tsv("run"),
    })
}

fn determinism() -> Result<(bool, String), String> {
    let a = tempfile::tempdir().map_err(e)?;
    let b = tempfile::tempdir().map_err(e)?;
    let ra = file_pipeline(a.path(), 5).map_err(e)?;
    let rb = file_pipeline(b.path(), 5).map_err(e)?;
    let same_ckpt = ra.checkpoint == rb.checkpoint;
    let same_report = ra.report == rb.report;
    Ok((
        same_ckpt && same_report,
        format!(
            "two config-driven runs (seed 5): checkpoints {} bytes, identical {same_ckpt}; reports identical {same_report}",
            ra.checkpoint.len()
        ),
    ))
}

/// `CONVQA_BENCH_CONFIG` names an engine config whose dataset is the training
/// split (with embeddings and entity-linking files); `CONVQA_BENCH_TEST` names
/// the test split.
fn benchmark() -> Outcome {
    const NAME: &str = "benchmark mode (optional data)";
    let (Ok(cfg_path), Ok(test_path)) = (std::env::var("CONVQA_BENCH_CONFIG"), std::env::var("CONVQA_BENCH_TEST")) else {
        return skipped(NAME, "skipped: set CONVQA_BENCH_CONFIG and CONVQA_BENCH_TEST to run".into());
    };
    criterion(NAME, 24 * 3600, || {
        let mut cfg = EngineConfig::load(&cfg_path).map_err(e)?;
        cfg.user_model = UserKind::Noisy;
        cfg.predictor = convqa::refpred::PredictorKind::Oracle;
        cfg.oracle_flip_prob = 0.0;
        let res = Resources::load(cfg).map_err(e)?;
        let test = Dataset::load(&test_path).map_err(e)?;
        let mut trainer = Trainer::new(res.env(), res.predictor.as_ref(), UserModel::new(UserKind::Noisy), res.config.train.clone());
        trainer.train_epochs(res.dataset().map_err(e)?).map_err(e)?;
        let r = evaluate(&res.env(), &trainer.params, &test, &res.config.eval_settings()).map_err(e)?;
        Ok((
            (BENCH_P1.0..=BENCH_P1.1).contains(&r.p1()),
            format!("NoisyUser-OracleRef P@1 {:.3} (need within [{}, {}])", r.p1(), BENCH_P1.0, BENCH_P1.1),
        ))
    })
}

fn main() {
    let mut outcomes = vec![
        criterion("gradient correctness", 5, gradient_correctness),
        criterion("softmax/entropy laws", 5, softmax_laws),
        criterion("qualifier-edge golden", 1, qualifier_golden),
        criterion("context score oracle", 1, eq1_oracle),
        criterion("bandit convergence", 30, bandit),
    ];

    let world = toy_world();
    let shape = format!("{} facts, {} qualified, {} conversations", world.facts.len(), world.qualified_fact_count(), world.dataset.conversations.len());
    let start = Instant::now();
    let ideal0 = synthetic_run(0, UserKind::Ideal, &OraclePredictor);
    let ideal0_time = start.elapsed();
    match ideal0 {
        Ok(ideal0) => {
            let mut o = criterion("end-to-end synthetic learning", 180, || end_to_end(&ideal0, shape));
            o.elapsed += ideal0_time;
            if matches!(o.verdict, Verdict::Pass) && o.elapsed > o.budget {
                o.verdict = Verdict::Fail;
            }
            outcomes.push(o);

            let start = Instant::now();
            let runs = (|| -> convqa::Result<(Vec<SyntheticRun>, Vec<SyntheticRun>)> {
                let mut ideal = vec![ideal0];
                let mut noisy = Vec::new();
                for seed in 0..NOISE_SEEDS {
                    if seed > 0 {
                        ideal.push(synthetic_run(seed, UserKind::Ideal, &OraclePredictor)?);
                    }
                    let flipped = FlippedOracle { flip_prob: NOISE_FLIP, seed };
                    noisy.push(synthetic_run(seed, UserKind::Noisy, &flipped)?);
                }
                Ok((ideal, noisy))
            })();
            // the seed-0 ideal run is shared with the previous criterion
            let extra = start.elapsed() + ideal0_time;
            let mut o = criterion("noise robustness", 600, || {
                let (ideal, noisy) = runs.map_err(e)?;
                noise_robustness(&ideal, &noisy)
            });
            o.elapsed += extra;
            if matches!(o.verdict, Verdict::Pass) && o.elapsed > o.budget {
                o.verdict = Verdict::Fail;
            }
            outcomes.push(o);
        }
        Err(err) => {
            let msg = err.to_string();
            outcomes.push(criterion("end-to-end synthetic learning", 180, || Err(msg.clone())));
            outcomes.push(criterion("noise robustness", 600, || Err(msg)));
        }
    }

    outcomes.push(criterion("metrics oracle", 10, metrics_oracle));
    outcomes.push(criterion("determinism", 180, determinism));
    outcomes.push(benchmark());

    println!();
    println!("acceptance criteria");
    let mut failed = 0;
    for o in &outcomes {
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        let timing = if matches!(o.verdict, Verdict::Skip) {
            String::new()
        } else {
            format!(" [{:.1?} of {:?}]", o.elapsed, o.budget)
        };
        println!("{tag} {}{timing}: {}", o.name, o.detail);
    }
    println!("{} passed, {failed} failed", outcomes.iter().filter(|o| matches!(o.verdict, Verdict::Pass)).count());
    if failed > 0 {
        std::process::exit(1);
    }
}
