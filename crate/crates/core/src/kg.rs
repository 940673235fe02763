//! Knowledge graph of n-ary facts compiled into walkable, labeled edges.
//!
//! A fact is a main triple plus an ordered list of qualifier pairs. Every fact
//! is compiled into bidirectional [`ActionEdge`]s whose labels carry enough of
//! the fact to make the step meaningful on its own:
//!
//! * subject <-> object: `P # qp1 qo1 # qp2 qo2 ...` (plain `P` without qualifiers)
//! * main endpoint <-> qualifier object: `P <other endpoint> # qp`
//! * qualifier object <-> qualifier object: `P <main object> # <qp of target>`
//!
//! Reversed edges reuse the forward label; direction is kept in
//! [`ActionEdge::reversed`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

/// Id prefix marking literal nodes (dates, numbers, strings).
pub const LITERAL_PREFIX: &str = "lit:";
/// Id prefix marking type nodes (classes such as `film`).
pub const TYPE_PREFIX: &str = "type:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Entity,
    Literal,
    Type,
}

impl NodeKind {
    pub fn from_id(id: &str) -> Self {
        if id.starts_with(LITERAL_PREFIX) {
            NodeKind::Literal
        } else if id.starts_with(TYPE_PREFIX) {
            NodeKind::Type
        } else {
            NodeKind::Entity
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub id: String,
    pub label: String,
    pub kind: NodeKind,
}

impl EntityRef {
    /// Node whose kind is inferred from the id prefix.
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        let id = id.into();
        let kind = NodeKind::from_id(&id);
        EntityRef {
            id,
            label: label.into(),
            kind,
        }
    }

    pub fn is_literal(&self) -> bool {
        self.kind == NodeKind::Literal
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub id: String,
    pub label: String,
}

impl Predicate {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Predicate {
            id: id.into(),
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Qualifier {
    pub predicate: Predicate,
    pub object: EntityRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaryFact {
    pub id: String,
    pub subject: EntityRef,
    pub predicate: Predicate,
    pub object: EntityRef,
    pub qualifiers: Vec<Qualifier>,
}

impl NaryFact {
    pub fn triple(
        id: impl Into<String>,
        subject: EntityRef,
        predicate: Predicate,
        object: EntityRef,
    ) -> Self {
        NaryFact {
            id: id.into(),
            subject,
            predicate,
            object,
            qualifiers: Vec::new(),
        }
    }

    pub fn with_qualifier(mut self, predicate: Predicate, object: EntityRef) -> Self {
        self.qualifiers.push(Qualifier { predicate, object });
        self
    }
}

/// One walkable step: the action an agent can take from `start`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionEdge {
    pub start: EntityRef,
    pub end: EntityRef,
    pub path_label: String,
    pub source_fact: String,
    pub reversed: bool,
}

/// Compile one fact into its directed edges (each forward edge followed by
/// its reversed twin).
pub fn build_action_edges(fact: &NaryFact) -> Vec<ActionEdge> {
    let mut out = Vec::with_capacity(2 * (1 + 2 * fact.qualifiers.len()));
    let mut push = |start: &EntityRef, end: &EntityRef, label: String| {
        out.push(ActionEdge {
            start: start.clone(),
            end: end.clone(),
            path_label: label.clone(),
            source_fact: fact.id.clone(),
            reversed: false,
        });
        out.push(ActionEdge {
            start: end.clone(),
            end: start.clone(),
            path_label: label,
            source_fact: fact.id.clone(),
            reversed: true,
        });
    };

    let p = &fact.predicate.label;
    let mut main_label = p.clone();
    for q in &fact.qualifiers {
        let _ = write!(main_label, " # {} {}", q.predicate.label, q.object.label);
    }
    push(&fact.subject, &fact.object, main_label);

    for q in &fact.qualifiers {
        push(
            &fact.subject,
            &q.object,
            format!("{p} {} # {}", fact.object.label, q.predicate.label),
        );
        push(
            &fact.object,
            &q.object,
            format!("{p} {} # {}", fact.subject.label, q.predicate.label),
        );
    }

    for (i, a) in fact.qualifiers.iter().enumerate() {
        for b in &fact.qualifiers[i + 1..] {
            push(
                &a.object,
                &b.object,
                format!("{p} {} # {}", fact.object.label, b.predicate.label),
            );
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Immutable compiled index over a fact set.
#[derive(Debug, Default)]
pub struct KgIndex {
    nodes: Vec<EntityRef>,
    by_id: HashMap<String, NodeId>,
    adjacency: Vec<Vec<ActionEdge>>,
    subject_frequency: Vec<u32>,
    label_index: HashMap<String, Vec<NodeId>>,
    word_index: HashMap<String, Vec<NodeId>>,
    fact_count: usize,
}

impl KgIndex {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_facts(parse_facts(&raw, path)?)
    }

    pub fn from_facts(facts: Vec<NaryFact>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut index = KgIndex::default();
        for (n, fact) in facts.iter().enumerate() {
            if !seen.insert(fact.id.clone()) {
                return Err(Error::DuplicateFact {
                    id: fact.id.clone(),
                    line: n + 1,
                });
            }
            let subj = index.intern(&fact.subject);
            index.subject_frequency[subj.0 as usize] += 1;
            for edge in build_action_edges(fact) {
                let start = index.intern(&edge.start);
                index.intern(&edge.end);
                index.adjacency[start.0 as usize].push(edge);
            }
        }
        index.fact_count = facts.len();
        Ok(index)
    }

    fn intern(&mut self, node: &EntityRef) -> NodeId {
        if let Some(&id) = self.by_id.get(&node.id) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.by_id.insert(node.id.clone(), id);
        self.adjacency.push(Vec::new());
        self.subject_frequency.push(0);
        let words = text::content_words(&node.label);
        if !words.is_empty() {
            let key = label_key(&words);
            self.label_index.entry(key).or_default().push(id);
        }
        for w in words {
            self.word_index.entry(w).or_default().push(id);
        }
        id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn fact_count(&self) -> usize {
        self.fact_count
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityRef> {
        self.nodes.iter()
    }

    pub fn entity(&self, id: &str) -> Option<&EntityRef> {
        self.by_id.get(id).map(|n| &self.nodes[n.0 as usize])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// All edges leaving `id`, in load order. Unknown ids have none.
    pub fn edges(&self, id: &str) -> &[ActionEdge] {
        match self.by_id.get(id) {
            Some(n) => &self.adjacency[n.0 as usize],
            None => &[],
        }
    }

    /// Every directed edge in the index.
    pub fn all_edges(&self) -> impl Iterator<Item = &ActionEdge> {
        self.adjacency.iter().flatten()
    }

    /// Outgoing edges of `id`, uniformly subsampled without replacement to
    /// `cap` when there are more. The sample keeps adjacency order and depends
    /// only on `seed`.
    pub fn outgoing_paths(&self, id: &str, cap: usize, seed: u64) -> Vec<ActionEdge> {
        let edges = self.edges(id);
        if edges.len() <= cap {
            return edges.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, edges.len(), cap).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| edges[i].clone()).collect()
    }

    pub fn subject_frequency(&self, id: &str) -> u32 {
        self.by_id
            .get(id)
            .map_or(0, |n| self.subject_frequency[n.0 as usize])
    }

    /// Subject frequency clipped at `f_max` and scaled into [0, 1].
    pub fn kg_prior(&self, id: &str, f_max: u32) -> f64 {
        assert!(f_max > 0, "f_max must be positive");
        f64::from(self.subject_frequency(id).min(f_max)) / f64::from(f_max)
    }

    /// For each node adjacent to any of `entities`, the number of distinct
    /// input entities it is one hop away from.
    pub fn one_hop_neighbors<'a, I>(&self, entities: I) -> IndexMap<String, usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: IndexMap<String, usize> = IndexMap::new();
        let mut sources = HashSet::new();
        for src in entities {
            if !sources.insert(src) {
                continue;
            }
            let mut local = HashSet::new();
            for e in self.edges(src) {
                if local.insert(e.end.id.as_str()) {
                    *counts.entry(e.end.id.clone()).or_default() += 1;
                }
            }
        }
        counts
    }

    /// Nodes whose normalized label word set equals `words`.
    pub fn lookup_label(&self, words: &BTreeSet<String>) -> Vec<&EntityRef> {
        self.label_index
            .get(&label_key(words))
            .map(|ids| ids.iter().map(|n| &self.nodes[n.0 as usize]).collect())
            .unwrap_or_default()
    }

    /// Nodes whose label shares at least one content word with `words`,
    /// in node order.
    pub fn nodes_sharing_words(&self, words: &BTreeSet<String>) -> Vec<&EntityRef> {
        let mut ids: Vec<NodeId> = words
            .iter()
            .filter_map(|w| self.word_index.get(w))
            .flatten()
            .copied()
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|n| &self.nodes[n.0 as usize]).collect()
    }
}

fn label_key(words: &BTreeSet<String>) -> String {
    words.iter().map(String::as_str).collect::<Vec<_>>().join(" ")
}

/// Parse the line-oriented fact format.
pub fn parse_facts(raw: &str, path: &Path) -> Result<Vec<NaryFact>> {
    let mut facts = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::FactParse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(err(format!("expected at least 4 fields, got {}", fields.len())));
        }
        let fact_id = fields[0].trim();
        if fact_id.is_empty() {
            return Err(err("empty fact id".into()));
        }
        let pair = |field: &str, what: &str| -> Result<(String, String)> {
            let parts: Vec<&str> = field.split('|').collect();
            match parts.as_slice() {
                [id, label] if !id.is_empty() && !label.is_empty() => {
                    Ok((id.to_string(), label.to_string()))
                }
                _ => Err(err(format!("{what}: expected `id|label`, got `{field}`"))),
            }
        };
        let (sid, slabel) = pair(fields[1], "subject")?;
        let (pid, plabel) = pair(fields[2], "predicate")?;
        let (oid, olabel) = pair(fields[3], "object")?;
        let subject = EntityRef::new(sid, slabel);
        if subject.kind != NodeKind::Entity {
            return Err(err(format!("subject `{}` must be an entity", subject.id)));
        }
        let mut fact = NaryFact::triple(
            fact_id,
            subject,
            Predicate::new(pid, plabel),
            EntityRef::new(oid, olabel),
        );
        for q in &fields[4..] {
            let parts: Vec<&str> = q.split('|').collect();
            match parts.as_slice() {
                [qp, qpl, qo, qol] if [qp, qpl, qo, qol].iter().all(|s| !s.is_empty()) => {
                    fact = fact.with_qualifier(Predicate::new(*qp, *qpl), EntityRef::new(*qo, *qol));
                }
                _ => {
                    return Err(err(format!(
                        "qualifier: expected `qpId|qpLabel|qoId|qoLabel`, got `{q}`"
                    )))
                }
            }
        }
        if !ids.insert(fact.id.clone()) {
            return Err(Error::DuplicateFact {
                id: fact.id,
                line: lineno,
            });
        }
        facts.push(fact);
    }
    Ok(facts)
}

/// Serialize facts in the line format read by [`parse_facts`].
pub fn write_facts(facts: &[NaryFact]) -> String {
    let mut out = String::new();
    for f in facts {
        let _ = write!(
            out,
            "{}\t{}|{}\t{}|{}\t{}|{}",
            f.id,
            f.subject.id,
            f.subject.label,
            f.predicate.id,
            f.predicate.label,
            f.object.id,
            f.object.label
        );
        for q in &f.qualifiers {
            let _ = write!(
                out,
                "\t{}|{}|{}|{}",
                q.predicate.id, q.predicate.label, q.object.id, q.object.label
            );
        }
        out.push('\n');
    }
    out
}
