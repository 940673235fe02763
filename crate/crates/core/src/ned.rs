//! Entity linking providers used to seed and extend the conversation context.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::kg::{KgIndex, NodeKind};
use crate::text;

/// Links an utterance to KG nodes with confidences in [0, 1].
pub trait NedProvider: Send + Sync {
    fn name(&self) -> &str;

    /// With `candidates`, only ids from that set may be returned. Without it
    /// the whole graph is the repository.
    fn link(&self, text: &str, kg: &KgIndex, candidates: Option<&IndexSet<String>>) -> Vec<(String, f64)>;
}

/// Lexical linker: Jaccard of label words against utterance words.
///
/// Unrestricted linking only returns nodes whose whole label appears in the
/// utterance, keeping the longest of nested matches.
#[derive(Debug, Default, Clone)]
pub struct LexicalNed;

impl NedProvider for LexicalNed {
    fn name(&self) -> &str {
        "lexical"
    }

    fn link(&self, text: &str, kg: &KgIndex, candidates: Option<&IndexSet<String>>) -> Vec<(String, f64)> {
        let words = text::content_words(text);
        if words.is_empty() {
            return Vec::new();
        }
        match candidates {
            Some(cands) => cands
                .iter()
                .filter_map(|id| {
                    let node = kg.entity(id)?;
                    let s = text::jaccard(&text::content_words(&node.label), &words);
                    (s > 0.0).then(|| (id.clone(), s))
                })
                .collect(),
            None => {
                let mut hits: Vec<(String, BTreeSet<String>, f64)> = kg
                    .nodes_sharing_words(&words)
                    .into_iter()
                    .filter(|n| n.kind != NodeKind::Literal)
                    .filter_map(|n| {
                        let lw = text::content_words(&n.label);
                        lw.is_subset(&words)
                            .then(|| (n.id.clone(), lw.clone(), text::jaccard(&lw, &words)))
                    })
                    .collect();
                let nested: Vec<bool> = hits
                    .iter()
                    .map(|(_, w, _)| {
                        hits.iter()
                            .any(|(_, other, _)| w.len() < other.len() && w.is_subset(other))
                    })
                    .collect();
                let mut i = 0;
                hits.retain(|_| {
                    i += 1;
                    !nested[i - 1]
                });
                hits.into_iter().map(|(id, _, s)| (id, s)).collect()
            }
        }
    }
}

/// Precomputed annotations keyed by the digest of the exact linker input.
///
/// Line format: `<sha256-hex><TAB><entityId>:<confidence>[ <entityId>:<confidence>]*`.
#[derive(Debug, Default, Clone)]
pub struct AnnotatedNed {
    table: HashMap<String, Vec<(String, f64)>>,
}

impl AnnotatedNed {
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
                module: "ned",
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, rest) = line.split_once('\t').unwrap_or((line, ""));
            if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(malformed(format!("bad digest `{key}`")));
            }
            let mut links = Vec::new();
            for item in rest.split(' ').filter(|s| !s.is_empty()) {
                let (id, conf) = item
                    .rsplit_once(':')
                    .ok_or_else(|| malformed(format!("expected `id:confidence`, got `{item}`")))?;
                let conf: f64 = conf.parse().map_err(|_| malformed(format!("bad confidence `{conf}`")))?;
                if !(0.0..=1.0).contains(&conf) {
                    return Err(malformed(format!("confidence {conf} outside [0,1]")));
                }
                links.push((id.to_string(), conf));
            }
            table.insert(key.to_ascii_lowercase(), links);
        }
        Ok(AnnotatedNed { table })
    }

    pub fn insert(&mut self, text: &str, links: Vec<(String, f64)>) {
        self.table.insert(text::digest_hex(text), links);
    }
}

impl NedProvider for AnnotatedNed {
    fn name(&self) -> &str {
        "annotated"
    }

    fn link(&self, text: &str, _kg: &KgIndex, candidates: Option<&IndexSet<String>>) -> Vec<(String, f64)> {
        let Some(links) = self.table.get(&text::digest_hex(text)) else {
            return Vec::new();
        };
        links
            .iter()
            .filter(|(id, _)| candidates.is_none_or(|c| c.contains(id)))
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityRef, NaryFact, Predicate};

    fn kg() -> KgIndex {
        KgIndex::from_facts(vec![
            NaryFact::triple(
                "f1",
                EntityRef::new("m1", "The Silent Harbor"),
                Predicate::new("p", "directed by"),
                EntityRef::new("p1", "Harbor Jones"),
            ),
            NaryFact::triple(
                "f2",
                EntityRef::new("m2", "Harbor"),
                Predicate::new("p", "directed by"),
                EntityRef::new("p1", "Harbor Jones"),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn unrestricted_prefers_longest_label() {
        let links = LexicalNed.link("Who directed The Silent Harbor?", &kg(), None);
        let ids: Vec<&str> = links.iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(ids, vec!["m1"]);
    }

    #[test]
    fn restricted_links_only_candidates() {
        let cands: IndexSet<String> = ["p1".to_string()].into_iter().collect();
        let links = LexicalNed.link("what about jones", &kg(), Some(&cands));
        assert_eq!(links.len(), 1);
        assert!((links[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn annotation_file_round_trip() {
        let key = text::digest_hex("who is it");
        let raw = format!("{key}\tm1:0.9 p1:0.25\n");
        let ned = AnnotatedNed::parse(&raw, Path::new("n")).unwrap();
        let got = ned.link("who is it", &kg(), None);
        assert_eq!(got, vec![("m1".to_string(), 0.9), ("p1".to_string(), 0.25)]);
        let cands: IndexSet<String> = ["p1".to_string()].into_iter().collect();
        assert_eq!(ned.link("who is it", &kg(), Some(&cands)).len(), 1);
        assert!(ned.link("other", &kg(), None).is_empty());
        assert!(AnnotatedNed::parse(&format!("{key}\tm1:1.5\n"), Path::new("n")).is_err());
    }
}
