//! Reformulation detection: does a follow-up restate the previous question
//! (negative feedback) or open a new intent (positive feedback)?

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::embeddings::{cosine, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::text;

/// Default cosine threshold of the lexical predictor.
pub const DEFAULT_LEXICAL_THRESHOLD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefPrediction {
    pub is_reformulation: bool,
    pub likelihood: f64,
}

impl RefPrediction {
    /// Likelihood 0.5 and above counts as a reformulation.
    pub fn from_likelihood(likelihood: f64) -> Self {
        RefPrediction {
            is_reformulation: likelihood >= 0.5,
            likelihood,
        }
    }
}

/// Reward for the answer that preceded the follow-up.
pub fn reward_from_prediction(p: &RefPrediction) -> f64 {
    if p.is_reformulation {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Oracle,
    Lexical,
    Scorefile,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(PredictorKind::Oracle),
            "lexical" => Ok(PredictorKind::Lexical),
            "scorefile" => Ok(PredictorKind::Scorefile),
            other => Err(Error::Config(format!("unknown predictor `{other}`"))),
        }
    }
}

/// A follow-up pair. `gold_reformulation` carries the script label when one exists.
#[derive(Clone, Copy, Debug)]
pub struct QuestionPair<'a> {
    pub prev: &'a str,
    pub follow: &'a str,
    pub gold_reformulation: Option<bool>,
}

impl<'a> QuestionPair<'a> {
    pub fn new(prev: &'a str, follow: &'a str) -> Self {
        QuestionPair {
            prev,
            follow,
            gold_reformulation: None,
        }
    }

    pub fn labeled(prev: &'a str, follow: &'a str, is_reformulation: bool) -> Self {
        QuestionPair {
            prev,
            follow,
            gold_reformulation: Some(is_reformulation),
        }
    }
}

pub trait RefPredictor: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> PredictorKind;
    fn predict(&self, pair: &QuestionPair<'_>) -> Result<RefPrediction>;
}

fn require_text(pair: &QuestionPair<'_>) -> Result<()> {
    if pair.prev.trim().is_empty() || pair.follow.trim().is_empty() {
        return Err(Error::Predictor("empty question in pair".into()));
    }
    Ok(())
}

/// Ground truth from script labels.
#[derive(Debug, Default, Clone)]
pub struct OraclePredictor;

impl RefPredictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::Oracle
    }

    fn predict(&self, pair: &QuestionPair<'_>) -> Result<RefPrediction> {
        let gold = pair
            .gold_reformulation
            .ok_or_else(|| Error::Predictor("oracle needs scripted labels".into()))?;
        Ok(RefPrediction::from_likelihood(if gold { 1.0 } else { 0.0 }))
    }
}

/// Oracle labels flipped with probability `flip_prob`. The flip is a hash of
/// the seed and the exact pair, so the same pair is always judged the same way.
#[derive(Debug, Clone)]
pub struct FlippedOracle {
    pub flip_prob: f64,
    pub seed: u64,
}

impl FlippedOracle {
    fn flips(&self, pair: &QuestionPair<'_>) -> bool {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(text::pair_digest(pair.prev, pair.follow).as_bytes());
        let d = h.finalize();
        let u = u64::from_le_bytes(d[..8].try_into().unwrap()) as f64 / 2f64.powi(64);
        u < self.flip_prob
    }
}

impl RefPredictor for FlippedOracle {
    fn name(&self) -> &str {
        "flipped-oracle"
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::Oracle
    }

    fn predict(&self, pair: &QuestionPair<'_>) -> Result<RefPrediction> {
        let p = OraclePredictor.predict(pair)?;
        if self.flips(pair) {
            Ok(RefPrediction::from_likelihood(1.0 - p.likelihood))
        } else {
            Ok(p)
        }
    }
}

/// Cosine similarity of the two embeddings, mapped piecewise-linearly so that
/// `cos == tau` lands on likelihood 0.5.
pub struct LexicalPredictor {
    embedder: Arc<dyn EmbeddingProvider>,
    pub tau: f64,
}

impl LexicalPredictor {
    pub fn new(embedder: Arc<dyn EmbeddingProvider>, tau: f64) -> Self {
        LexicalPredictor {
            embedder,
            tau: tau.clamp(-1.0, 1.0),
        }
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(cosine(&self.embedder.encode(a)?, &self.embedder.encode(b)?))
    }

    pub fn likelihood_of(&self, cos: f64) -> f64 {
        let tau = self.tau;
        if cos >= tau {
            if tau >= 1.0 {
                1.0
            } else {
                0.5 + 0.5 * (cos - tau) / (1.0 - tau)
            }
        } else {
            0.5 * (cos + 1.0) / (tau + 1.0)
        }
    }
}

impl RefPredictor for LexicalPredictor {
    fn name(&self) -> &str {
        "lexical"
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::Lexical
    }

    fn predict(&self, pair: &QuestionPair<'_>) -> Result<RefPrediction> {
        require_text(pair)?;
        let cos = self.similarity(pair.prev, pair.follow)?;
        Ok(RefPrediction::from_likelihood(self.likelihood_of(cos)))
    }
}

/// Externally computed likelihoods keyed by `sha256(prev NUL follow)`.
#[derive(Debug, Default, Clone)]
pub struct ScoreFilePredictor {
    table: HashMap<String, f64>,
}

impl ScoreFilePredictor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, path)
    }

    pub fn parse(raw: &str, path: &Path) -> Result<Self> {
        let mut table = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| Error::Malformed {
                module: "ref-predictor",
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, val) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected `<digest>\\t<likelihood>`".into()))?;
            if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(malformed(format!("bad digest `{key}`")));
            }
            let l: f64 = val.trim().parse().map_err(|_| malformed(format!("bad likelihood `{val}`")))?;
            if !(0.0..=1.0).contains(&l) {
                return Err(malformed(format!("likelihood {l} outside [0,1]")));
            }
            table.insert(key.to_ascii_lowercase(), l);
        }
        Ok(ScoreFilePredictor { table })
    }

    pub fn insert(&mut self, prev: &str, follow: &str, likelihood: f64) {
        self.table.insert(text::pair_digest(prev, follow), likelihood);
    }
}

impl RefPredictor for ScoreFilePredictor {
    fn name(&self) -> &str {
        "scorefile"
    }

    fn kind(&self) -> PredictorKind {
        PredictorKind::Scorefile
    }

    fn predict(&self, pair: &QuestionPair<'_>) -> Result<RefPrediction> {
        require_text(pair)?;
        let digest = text::pair_digest(pair.prev, pair.follow);
        match self.table.get(&digest) {
            Some(&l) => Ok(RefPrediction::from_likelihood(l)),
            None => Err(Error::MissingScore { digest }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingPair {
    pub question_a: String,
    pub question_b: String,
    /// True for same-intent (reformulation) pairs.
    pub is_reformulation: bool,
}

/// Same-intent pairs as positives; cross-intent pairs from the same
/// conversation as negatives, downsampled to the positive count.
pub fn generate_training_pairs(dataset: &Dataset, seed: u64) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for (ci, conv) in dataset.conversations.iter().enumerate() {
        let mut positives = Vec::new();
        for intent in &conv.intents {
            let qs = &intent.questions;
            for i in 0..qs.len() {
                for j in i + 1..qs.len() {
                    positives.push(TrainingPair {
                        question_a: qs[i].clone(),
                        question_b: qs[j].clone(),
                        is_reformulation: true,
                    });
                }
            }
        }
        let mut negatives = Vec::new();
        for (a, ia) in conv.intents.iter().enumerate() {
            for ib in &conv.intents[a + 1..] {
                for qa in &ia.questions {
                    for qb in &ib.questions {
                        negatives.push(TrainingPair {
                            question_a: qa.clone(),
                            question_b: qb.clone(),
                            is_reformulation: false,
                        });
                    }
                }
            }
        }
        if negatives.len() > positives.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(ci as u64));
            let mut keep = rand::seq::index::sample(&mut rng, negatives.len(), positives.len()).into_vec();
            keep.sort_unstable();
            negatives = keep.into_iter().map(|i| negatives[i].clone()).collect();
        }
        out.extend(positives);
        out.extend(negatives);
    }
    out
}

/// `questionA<TAB>questionB<TAB>{0,1}` lines, 1 marking reformulations.
pub fn write_pairs_tsv(pairs: &[TrainingPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            p.question_a.replace(['\t', '\n'], " "),
            p.question_b.replace(['\t', '\n'], " "),
            u8::from(p.is_reformulation)
        );
    }
    out
}

/// Per-class precision, recall and F1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryPrf {
    pub new_intent: ClassPrf,
    pub reformulation: ClassPrf,
}

fn class_prf(tp: usize, fp: usize, fn_: usize) -> ClassPrf {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassPrf { precision, recall, f1 }
}

/// `true` marks reformulation.
pub fn ref_pred_prf(predictions: &[bool], labels: &[bool]) -> Result<BinaryPrf> {
    if predictions.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let count = |p: bool, l: bool| predictions.iter().zip(labels).filter(|(&a, &b)| a == p && b == l).count();
    let (tt, tf, ft, ff) = (count(true, true), count(true, false), count(false, true), count(false, false));
    Ok(BinaryPrf {
        reformulation: class_prf(tt, tf, ft),
        new_intent: class_prf(ff, ft, tf),
    })
}

/// Pick the lexical threshold with the best reformulation F1 on labeled
/// pairs. Ties go to the smallest threshold.
pub fn calibrate_threshold(predictor: &LexicalPredictor, dev: &[TrainingPair]) -> Result<(f64, f64)> {
    let sims = dev
        .iter()
        .map(|p| predictor.similarity(&p.question_a, &p.question_b))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = dev.iter().map(|p| p.is_reformulation).collect();
    let mut candidates = sims.clone();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (DEFAULT_LEXICAL_THRESHOLD, f64::NEG_INFINITY);
    for tau in candidates {
        let preds: Vec<bool> = sims.iter().map(|&s| s >= tau).collect();
        let f1 = ref_pred_prf(&preds, &labels)?.reformulation.f1;
        if f1 > best.1 {
            best = (tau, f1);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        best.1 = 0.0;
    }
    Ok(best)
}
