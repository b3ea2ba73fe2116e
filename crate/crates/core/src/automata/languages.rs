use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AutomataError, Dfa};

/// The built-in binary languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    /// Words with an even number of ones.
    #[serde(rename = "PARITY")]
    Parity,
    /// Words whose first and last symbols agree (the empty word included).
    #[serde(rename = "EVEN_PAIRS")]
    EvenPairs,
    /// `((0+1)^3 (0 1* 0 + 1))*`, whose transition monoid is S5.
    #[serde(rename = "SYM5")]
    Sym5,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::Parity, Language::EvenPairs, Language::Sym5];

    pub fn name(self) -> &'static str {
        match self {
            Language::Parity => "PARITY",
            Language::EvenPairs => "EVEN_PAIRS",
            Language::Sym5 => "SYM5",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = AutomataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace([' ', '-'], "_").as_str() {
            "PARITY" => Ok(Language::Parity),
            "EVEN_PAIRS" | "EVENPAIRS" => Ok(Language::EvenPairs),
            "SYM5" | "SYM(5)" | "SYM_5" => Ok(Language::Sym5),
            _ => Err(AutomataError::UnknownLanguage(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangSpec {
    pub name: Language,
    pub dfa: Dfa,
}

/// Minimal DFA for a built-in language.
pub fn build_language(name: Language) -> LangSpec {
    let dfa = match name {
        // q0 = even, q1 = odd
        Language::Parity => Dfa::new(2, 2, vec![0, 1, 1, 0], 0, [0]),
        // 0 = nothing read, then 1 + 2*first + last
        Language::EvenPairs => {
            let pair = |first: usize, last: usize| 1 + 2 * first + last;
            let mut t = vec![pair(0, 0), pair(1, 1)];
            for first in 0..2 {
                for _last in 0..2 {
                    t.push(pair(first, 0));
                    t.push(pair(first, 1));
                }
            }
            Dfa::new(5, 2, t, 0, [0, pair(0, 0), pair(1, 1)])
        }
        // q0 -> q1 -> q2 -> q3 on anything; q3 -1-> q0, q3 -0-> q4;
        // q4 -1-> q4, q4 -0-> q0
        Language::Sym5 => Dfa::new(5, 2, vec![1, 1, 2, 2, 3, 3, 4, 0, 0, 4], 0, [0]),
    }
    .expect("built-in tables are valid");
    LangSpec { name, dfa }
}

/// Parses a word written over `'0'`/`'1'` characters.
pub fn parse_word(s: &str) -> Result<Vec<usize>, AutomataError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(AutomataError::InvalidWord(other)),
        })
        .collect()
}
