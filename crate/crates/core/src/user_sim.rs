//! Simulated users that walk a scripted conversation, reformulating or moving
//! on depending on whether the last answer was correct.

use serde::{Deserialize, Serialize};

use crate::dataset::{ConversationScript, MAX_TURNS_PER_INTENT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    /// Reformulates until correct, looping the script, for at most 5 turns.
    #[default]
    Ideal,
    /// Like ideal, but moves on after the last scripted reformulation.
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UserModel {
    pub kind: UserKind,
    pub max_turns_per_intent: usize,
}

impl UserModel {
    pub fn new(kind: UserKind) -> Self {
        UserModel {
            kind,
            max_turns_per_intent: MAX_TURNS_PER_INTENT,
        }
    }
}

/// Position in a script. `turn` counts utterances within the intent from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cursor {
    pub intent: usize,
    pub turn: usize,
    pub utterance: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step<'a> {
    pub cursor: Cursor,
    pub utterance: &'a str,
    pub new_intent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Next<'a> {
    Utterance(Step<'a>),
    Done,
}

impl<'a> Next<'a> {
    /// Whether the follow-up leaves the current intent. Ending the
    /// conversation counts as leaving it.
    pub fn leaves_intent(&self) -> bool {
        match self {
            Next::Utterance(s) => s.new_intent,
            Next::Done => true,
        }
    }

    pub fn step(&self) -> Option<&Step<'a>> {
        match self {
            Next::Utterance(s) => Some(s),
            Next::Done => None,
        }
    }
}

impl UserModel {
    pub fn start<'a>(&self, script: &'a ConversationScript) -> Next<'a> {
        self.open_intent(script, 0)
    }

    fn open_intent<'a>(&self, script: &'a ConversationScript, intent: usize) -> Next<'a> {
        match script.intents.get(intent) {
            Some(i) if !i.questions.is_empty() => Next::Utterance(Step {
                cursor: Cursor {
                    intent,
                    turn: 1,
                    utterance: 0,
                },
                utterance: &i.questions[0],
                new_intent: true,
            }),
            _ => Next::Done,
        }
    }

    /// The user's reaction to the answer given at `cursor`.
    pub fn next<'a>(&self, script: &'a ConversationScript, cursor: Cursor, last_correct: bool) -> Next<'a> {
        let Some(intent) = script.intents.get(cursor.intent) else {
            return Next::Done;
        };
        let n = intent.questions.len();
        let exhausted_script = cursor.utterance + 1 >= n;
        let move_on = last_correct
            || cursor.turn >= self.max_turns_per_intent
            || (self.kind == UserKind::Noisy && exhausted_script);
        if move_on {
            return self.open_intent(script, cursor.intent + 1);
        }
        let utterance = (cursor.utterance + 1) % n;
        Next::Utterance(Step {
            cursor: Cursor {
                intent: cursor.intent,
                turn: cursor.turn + 1,
                utterance,
            },
            utterance: &intent.questions[utterance],
            new_intent: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{GoldAnswer, IntentScript};

    fn script(sizes: &[usize]) -> ConversationScript {
        ConversationScript {
            id: "c".into(),
            domain: "d".into(),
            intents: sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| IntentScript {
                    id: format!("i{i}"),
                    questions: (0..n).map(|k| format!("q{i}{k}")).collect(),
                    gold_answers: vec![GoldAnswer { id: None, label: "x".into() }],
                })
                .collect(),
        }
    }

    /// Utterances emitted for a sequence of answer outcomes.
    fn trace(model: UserModel, s: &ConversationScript, outcomes: &[bool]) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        let mut cur = model.start(s);
        let mut k = 0;
        while let Next::Utterance(step) = cur {
            out.push((step.utterance.to_string(), step.new_intent));
            let correct = outcomes.get(k).copied().unwrap_or(true);
            k += 1;
            cur = model.next(s, step.cursor, correct);
        }
        out
    }

    #[test]
    fn ideal_emits_next_reformulation_on_wrong() {
        let s = script(&[5, 1]);
        let m = UserModel::new(UserKind::Ideal);
        let c = Cursor { intent: 0, turn: 2, utterance: 1 };
        let Next::Utterance(step) = m.next(&s, c, false) else { panic!() };
        assert_eq!(step.utterance, "q02");
        assert!(!step.new_intent);
    }

    #[test]
    fn ideal_loops_when_script_runs_out() {
        let s = script(&[3]);
        let t = trace(UserModel::new(UserKind::Ideal), &s, &[false; 10]);
        let utts: Vec<&str> = t.iter().map(|(u, _)| u.as_str()).collect();
        assert_eq!(utts, vec!["q00", "q01", "q02", "q00", "q01"]);
    }

    #[test]
    fn noisy_moves_on_after_last_reformulation() {
        let s = script(&[5, 2]);
        let m = UserModel::new(UserKind::Noisy);
        let c = Cursor { intent: 0, turn: 5, utterance: 4 };
        let Next::Utterance(step) = m.next(&s, c, false) else { panic!() };
        assert_eq!(step.utterance, "q10");
        assert!(step.new_intent);
        let t = trace(m, &script(&[2, 1]), &[false; 10]);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn correct_answer_opens_next_intent_or_ends() {
        let s = script(&[2, 2]);
        let m = UserModel::new(UserKind::Ideal);
        let c = Cursor { intent: 1, turn: 1, utterance: 0 };
        assert_eq!(m.next(&s, c, true), Next::Done);
        assert!(m.next(&s, c, true).leaves_intent());
        assert_eq!(m.next(&s, Cursor { intent: 9, turn: 1, utterance: 0 }, false), Next::Done);
    }

    fn all_outcomes(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0..1u32 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    #[test]
    fn turn_cap_and_ideal_faithfulness() {
        let s = script(&[1, 3, 5]);
        for kind in [UserKind::Ideal, UserKind::Noisy] {
            let m = UserModel::new(kind);
            for outcomes in all_outcomes(12) {
                let mut cur = m.start(&s);
                let mut k = 0;
                while let Next::Utterance(step) = cur {
                    assert!(step.cursor.turn <= 5);
                    let correct = outcomes.get(k).copied().unwrap_or(true);
                    k += 1;
                    let nxt = m.next(&s, step.cursor, correct);
                    if kind == UserKind::Ideal && nxt.step().is_some_and(|st| st.new_intent) {
                        assert!(correct || step.cursor.turn == 5);
                    }
                    cur = nxt;
                }
            }
        }
    }

    #[test]
    fn noisy_traces_follow_ideal_until_script_ends() {
        // Within each intent, what the noisy user says is a prefix of what the
        // ideal user says for the same outcomes; they part only once the
        // script is exhausted.
        let s = script(&[2, 4, 5]);
        let ideal = UserModel::new(UserKind::Ideal);
        let noisy = UserModel::new(UserKind::Noisy);
        let mut diverged = false;
        for outcomes in all_outcomes(15) {
            let group = |t: Vec<(String, bool)>| {
                let mut g: Vec<Vec<String>> = Vec::new();
                for (u, new) in t {
                    if new {
                        g.push(Vec::new());
                    }
                    g.last_mut().unwrap().push(u);
                }
                g
            };
            // Feed the same outcome sequence per intent to both users.
            let per_intent = |m: UserModel| {
                let mut all = Vec::new();
                let mut cur = m.start(&s);
                let mut offsets = [0usize; 3];
                while let Next::Utterance(step) = cur {
                    all.push((step.utterance.to_string(), step.new_intent));
                    let i = step.cursor.intent;
                    let correct = outcomes.get(i * 5 + offsets[i]).copied().unwrap_or(true);
                    offsets[i] += 1;
                    cur = m.next(&s, step.cursor, correct);
                }
                group(all)
            };
            let a = per_intent(ideal);
            let b = per_intent(noisy);
            assert_eq!(a.len(), b.len());
            for (ia, ib) in a.iter().zip(&b) {
                assert!(ia.starts_with(ib));
                if ia.len() != ib.len() {
                    diverged = true;
                }
            }
        }
        assert!(diverged);

        // Counterexample: moving on after a wrong answer is noisy-only.
        let t = trace(noisy, &script(&[2, 1]), &[false, false]);
        assert_eq!(t[2], ("q10".to_string(), true));
        let t_ideal = trace(ideal, &script(&[2, 1]), &[false, false]);
        assert_eq!(t_ideal[2], ("q00".to_string(), false));
    }
}
