//! Scripted conversations: intents with their utterances and gold answers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::EntityRef;
use crate::text;

/// Most utterances (first question plus reformulations) one intent may have.
pub const MAX_TURNS_PER_INTENT: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GoldAnswer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IntentScript {
    pub id: String,
    /// First question followed by its reformulations.
    pub questions: Vec<String>,
    pub gold_answers: Vec<GoldAnswer>,
}

impl IntentScript {
    /// True when `answer` matches a gold answer by id or, for literals and
    /// id-less golds, by trimmed case-folded label.
    pub fn is_correct(&self, answer: Option<&EntityRef>) -> bool {
        let Some(a) = answer else { return false };
        self.gold_answers.iter().any(|g| {
            g.id.as_deref() == Some(a.id.as_str())
                || ((a.is_literal() || g.id.is_none())
                    && text::normalize_lexical(&g.label) == text::normalize_lexical(&a.label))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConversationScript {
    pub id: String,
    #[serde(default)]
    pub domain: String,
    pub intents: Vec<IntentScript>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Dataset {
    pub conversations: Vec<ConversationScript>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(raw).map_err(|e| Error::Dataset(e.to_string()))?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.conversations {
            if c.intents.is_empty() {
                return Err(Error::Dataset(format!("conversation `{}` has no intents", c.id)));
            }
            for i in &c.intents {
                let n = i.questions.len();
                if n == 0 || n > MAX_TURNS_PER_INTENT {
                    return Err(Error::Dataset(format!(
                        "intent `{}` has {n} questions; expected 1..={MAX_TURNS_PER_INTENT}",
                        i.id
                    )));
                }
                if i.questions.iter().any(|q| q.trim().is_empty()) {
                    return Err(Error::Dataset(format!("intent `{}` has an empty question", i.id)));
                }
                if i.gold_answers.is_empty() {
                    return Err(Error::Dataset(format!("intent `{}` has no gold answers", i.id)));
                }
            }
        }
        Ok(())
    }

    pub fn intent_count(&self) -> usize {
        self.conversations.iter().map(|c| c.intents.len()).sum()
    }

    pub fn utterance_count(&self) -> usize {
        self.conversations
            .iter()
            .flat_map(|c| &c.intents)
            .map(|i| i.questions.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intent(golds: Vec<GoldAnswer>) -> IntentScript {
        IntentScript {
            id: "i".into(),
            questions: vec!["q".into()],
            gold_answers: golds,
        }
    }

    #[test]
    fn correctness_by_id_and_literal_form() {
        let i = intent(vec![
            GoldAnswer { id: Some("Q1".into()), label: "Stan Lee".into() },
            GoldAnswer { id: None, label: "04 july 2019 ".into() },
        ]);
        assert!(i.is_correct(Some(&EntityRef::new("Q1", "whatever"))));
        assert!(i.is_correct(Some(&EntityRef::new("lit:2019-07-04", "04 July 2019"))));
        assert!(!i.is_correct(Some(&EntityRef::new("Q2", "Stan Lee Jr"))));
        assert!(!i.is_correct(None));
    }

    #[test]
    fn json_shape() {
        let raw = r#"{"conversations":[{"id":"c1","domain":"movies","intents":[
            {"id":"i1","questions":["Who directed X?","director of X?"],"goldAnswers":[{"id":"p1","label":"P"}]}]}]}"#;
        let ds = Dataset::from_json(raw).unwrap();
        assert_eq!(ds.intent_count(), 1);
        assert_eq!(ds.utterance_count(), 2);
        assert_eq!(Dataset::from_json(&ds.to_json()).unwrap(), ds);
    }

    #[test]
    fn validation_errors() {
        let too_many = r#"{"conversations":[{"id":"c","intents":[{"id":"i","questions":["a","b","c","d","e","f"],"goldAnswers":[{"label":"x"}]}]}]}"#;
        assert!(Dataset::from_json(too_many).is_err());
        let no_gold = r#"{"conversations":[{"id":"c","intents":[{"id":"i","questions":["a"],"goldAnswers":[]}]}]}"#;
        assert!(Dataset::from_json(no_gold).is_err());
        let unknown = r#"{"conversations":[],"extra":1}"#;
        assert!(Dataset::from_json(unknown).is_err());
    }
}
