use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::AutomataError;

/// Deterministic finite automaton over the alphabet `0..alphabet_size`.
///
/// Serialized as `{"num_states", "alphabet_size", "transition", "start",
/// "accepting"}` with `transition` flattened row-major
/// (`transition[q * alphabet_size + a]`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DfaJson", into = "DfaJson")]
pub struct Dfa {
    num_states: usize,
    alphabet_size: usize,
    transition: Vec<usize>,
    start: usize,
    accepting: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DfaJson {
    num_states: usize,
    alphabet_size: usize,
    transition: Vec<usize>,
    start: usize,
    accepting: BTreeSet<usize>,
}

impl TryFrom<DfaJson> for Dfa {
    type Error = AutomataError;

    fn try_from(j: DfaJson) -> Result<Self, Self::Error> {
        Dfa::new(j.num_states, j.alphabet_size, j.transition, j.start, j.accepting)
    }
}

impl From<Dfa> for DfaJson {
    fn from(d: Dfa) -> Self {
        let accepting = d.accepting_states().collect();
        DfaJson {
            num_states: d.num_states,
            alphabet_size: d.alphabet_size,
            transition: d.transition,
            start: d.start,
            accepting,
        }
    }
}

impl Dfa {
    pub fn new(
        num_states: usize,
        alphabet_size: usize,
        transition: Vec<usize>,
        start: usize,
        accepting: impl IntoIterator<Item = usize>,
    ) -> Result<Self, AutomataError> {
        if num_states == 0 || alphabet_size == 0 {
            return Err(AutomataError::InvalidDfa(
                "num_states and alphabet_size must be positive".into(),
            ));
        }
        if transition.len() != num_states * alphabet_size {
            return Err(AutomataError::InvalidDfa(format!(
                "transition table has {} entries, expected {} x {}",
                transition.len(),
                num_states,
                alphabet_size
            )));
        }
        if let Some(pos) = transition.iter().position(|&q| q >= num_states) {
            return Err(AutomataError::InvalidDfa(format!(
                "transition from state {} on symbol {} targets {} (only {} states)",
                pos / alphabet_size,
                pos % alphabet_size,
                transition[pos],
                num_states
            )));
        }
        if start >= num_states {
            return Err(AutomataError::InvalidDfa(format!(
                "start state {} out of range",
                start
            )));
        }
        let mut acc = vec![false; num_states];
        for q in accepting {
            if q >= num_states {
                return Err(AutomataError::InvalidDfa(format!(
                    "accepting state {} out of range",
                    q
                )));
            }
            acc[q] = true;
        }
        Ok(Self {
            num_states,
            alphabet_size,
            transition,
            start,
            accepting: acc,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.accepting
            .iter()
            .enumerate()
            .filter_map(|(q, &a)| a.then_some(q))
    }

    /// Transition table row-major, `num_states * alphabet_size` entries.
    pub fn transition_table(&self) -> &[usize] {
        &self.transition
    }

    /// `delta(q, a)`; panics on out-of-range input, use [`Dfa::try_step`]
    /// for untrusted symbols.
    pub fn step(&self, q: usize, symbol: usize) -> usize {
        self.transition[q * self.alphabet_size + symbol]
    }

    pub fn try_step(&self, q: usize, symbol: usize) -> Result<usize, AutomataError> {
        if symbol >= self.alphabet_size {
            return Err(AutomataError::SymbolOutOfRange {
                symbol,
                alphabet_size: self.alphabet_size,
            });
        }
        Ok(self.step(q, symbol))
    }

    /// State reached from `start` after reading `word`.
    pub fn run(&self, word: &[usize]) -> Result<usize, AutomataError> {
        word.iter()
            .try_fold(self.start, |q, &a| self.try_step(q, a))
    }

    pub fn accepts(&self, word: &[usize]) -> Result<bool, AutomataError> {
        Ok(self.accepting[self.run(word)?])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dfa serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, AutomataError> {
        serde_json::from_str(s).map_err(|e| AutomataError::InvalidDfa(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity() -> Dfa {
        Dfa::new(2, 2, vec![0, 1, 1, 0], 0, [0]).unwrap()
    }

    #[test]
    fn empty_word_accepts_iff_start_accepting() {
        assert!(parity().accepts(&[]).unwrap());
        let d = Dfa::new(2, 2, vec![0, 1, 1, 0], 0, [1]).unwrap();
        assert!(!d.accepts(&[]).unwrap());
    }

    #[test]
    fn out_of_range_symbol_is_an_error() {
        assert!(matches!(
            parity().accepts(&[0, 2]),
            Err(AutomataError::SymbolOutOfRange { symbol: 2, .. })
        ));
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(Dfa::new(2, 2, vec![0, 1, 2, 0], 0, [0]).is_err());
        assert!(Dfa::new(2, 2, vec![0, 1, 1], 0, [0]).is_err());
        assert!(Dfa::new(2, 2, vec![0, 1, 1, 0], 2, [0]).is_err());
        assert!(Dfa::new(2, 2, vec![0, 1, 1, 0], 0, [3]).is_err());
        assert!(Dfa::new(0, 2, vec![], 0, []).is_err());
    }

    #[test]
    fn json_layout_and_validation() {
        let json = parity().to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["transition"], serde_json::json!([0, 1, 1, 0]));
        assert_eq!(v["accepting"], serde_json::json!([0]));
        assert_eq!(Dfa::from_json(&json).unwrap(), parity());
        let bad = r#"{"num_states":1,"alphabet_size":2,"transition":[0,1],"start":0,"accepting":[]}"#;
        assert!(Dfa::from_json(bad).is_err());
    }
}
