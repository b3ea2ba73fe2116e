//! Finite automata for the built-in regular languages, plus transition
//! monoids and hardness classification.

mod dfa;
mod languages;
mod monoid;

pub use dfa::Dfa;
pub use languages::{build_language, parse_word, LangSpec, Language};
pub use monoid::{
    classify_language, generated_subgroup, is_solvable, transition_monoid, HardnessClass, StateMap,
    TransitionMonoid, DEFAULT_ELEMENT_CAP,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutomataError {
    #[error("invalid DFA: {0}")]
    InvalidDfa(String),
    #[error("symbol {symbol} outside alphabet of size {alphabet_size}")]
    SymbolOutOfRange { symbol: usize, alphabet_size: usize },
    #[error("unknown language {0:?} (expected PARITY, EVEN_PAIRS or SYM5)")]
    UnknownLanguage(String),
    #[error("invalid character {0:?} in word")]
    InvalidWord(char),
    #[error("transition monoid exceeds the cap of {cap} elements")]
    MonoidTooLarge { cap: usize },
}
