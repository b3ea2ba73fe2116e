//! Transition monoids of DFAs and the group-solvability test that splits
//! regular languages into NC1-complete and TC0 ones.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AutomataError, Dfa};

pub const DEFAULT_ELEMENT_CAP: usize = 10_000;

/// A total function on states; entry `i` is the image of state `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateMap(pub Vec<usize>);

impl StateMap {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, q: usize) -> usize {
        self.0[q]
    }

    /// Apply `self` first, then `next`. With this order the map of a word
    /// `uv` is `map(u).then(&map(v))`.
    pub fn then(&self, next: &StateMap) -> StateMap {
        StateMap(self.0.iter().map(|&q| next.0[q]).collect())
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        self.0.iter().all(|&q| !std::mem::replace(&mut seen[q], true))
    }

    pub fn is_idempotent(&self) -> bool {
        self.then(self) == *self
    }

    /// The unique idempotent power `x^k` (k >= 1).
    pub fn idempotent_power(&self) -> StateMap {
        let mut p = self.clone();
        loop {
            if p.is_idempotent() {
                return p;
            }
            p = p.then(self);
        }
    }
}

impl fmt::Display for StateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", q)?;
        }
        write!(f, ")")
    }
}

/// Hardness of a regular language's recognition problem for constant-depth
/// threshold circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardnessClass {
    #[serde(rename = "NC1_COMPLETE")]
    Nc1Complete,
    #[serde(rename = "IN_TC0")]
    InTc0,
}

impl fmt::Display for HardnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HardnessClass::Nc1Complete => "NC1_COMPLETE",
            HardnessClass::InTc0 => "IN_TC0",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TransitionMonoid {
    num_states: usize,
    /// All maps induced by words, identity first, then in BFS order.
    pub elements: Vec<StateMap>,
    /// One map per alphabet symbol.
    pub generators: Vec<StateMap>,
    /// Whether the group of invertible elements (the permutations in the
    /// monoid) is solvable.
    pub is_group_of_units_solvable: bool,
    /// Whether every maximal subgroup (one per idempotent) is solvable.
    pub all_subgroups_solvable: bool,
}

impl TransitionMonoid {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn contains(&self, m: &StateMap) -> bool {
        self.elements.contains(m)
    }

    /// The permutations in the monoid.
    pub fn group_of_units(&self) -> Vec<StateMap> {
        self.elements
            .iter()
            .filter(|m| m.is_permutation())
            .cloned()
            .collect()
    }

    /// Maximal subgroup with identity `e`: elements `x` with `ex = xe = x`
    /// whose idempotent power is `e`.
    pub fn maximal_subgroup(&self, e: &StateMap) -> Vec<StateMap> {
        self.elements
            .iter()
            .filter(|x| e.then(x) == **x && x.then(e) == **x && x.idempotent_power() == *e)
            .cloned()
            .collect()
    }

    pub fn idempotents(&self) -> impl Iterator<Item = &StateMap> {
        self.elements.iter().filter(|m| m.is_idempotent())
    }

    pub fn hardness(&self) -> HardnessClass {
        if self.all_subgroups_solvable {
            HardnessClass::InTc0
        } else {
            HardnessClass::Nc1Complete
        }
    }
}

/// Closure of the per-symbol maps under composition, plus the identity.
pub fn transition_monoid(dfa: &Dfa, cap: usize) -> Result<TransitionMonoid, AutomataError> {
    let n = dfa.num_states();
    let generators: Vec<StateMap> = (0..dfa.alphabet_size())
        .map(|a| StateMap((0..n).map(|q| dfa.step(q, a)).collect()))
        .collect();
    let identity = StateMap::identity(n);
    let mut index: HashMap<StateMap, usize> = HashMap::new();
    let mut elements = vec![identity.clone()];
    index.insert(identity, 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for g in &generators {
            let next = elements[i].then(g);
            if index.contains_key(&next) {
                continue;
            }
            if elements.len() >= cap {
                return Err(AutomataError::MonoidTooLarge { cap });
            }
            index.insert(next.clone(), elements.len());
            queue.push_back(elements.len());
            elements.push(next);
        }
    }
    let mut monoid = TransitionMonoid {
        num_states: n,
        elements,
        generators,
        is_group_of_units_solvable: true,
        all_subgroups_solvable: true,
    };
    monoid.is_group_of_units_solvable = is_solvable(&monoid.group_of_units());
    let idempotents: Vec<StateMap> = monoid.idempotents().cloned().collect();
    monoid.all_subgroups_solvable = idempotents
        .iter()
        .all(|e| is_solvable(&monoid.maximal_subgroup(e)));
    Ok(monoid)
}

/// Classifies the language of `dfa` by the solvability of the groups inside
/// its transition monoid.
pub fn classify_language(dfa: &Dfa) -> Result<HardnessClass, AutomataError> {
    Ok(transition_monoid(dfa, DEFAULT_ELEMENT_CAP)?.hardness())
}

fn group_identity(group: &[StateMap]) -> Option<StateMap> {
    group.iter().find(|x| x.is_idempotent()).cloned()
}

fn inverse(x: &StateMap, identity: &StateMap) -> StateMap {
    // x^(k-1) where x^k = identity
    let mut prev = identity.clone();
    let mut p = x.clone();
    while p != *identity {
        prev = p.clone();
        p = p.then(x);
    }
    prev
}

/// Closure of `gens ∪ {identity}` under composition; in a finite group this
/// is the generated subgroup.
pub fn generated_subgroup(gens: &[StateMap], identity: &StateMap) -> Vec<StateMap> {
    let mut seen: HashSet<StateMap> = HashSet::new();
    let mut out = vec![identity.clone()];
    seen.insert(identity.clone());
    let mut i = 0;
    while i < out.len() {
        for g in gens {
            let next = out[i].then(g);
            if seen.insert(next.clone()) {
                out.push(next);
            }
        }
        i += 1;
    }
    out
}

/// Derived-series test: repeatedly replace the group by the subgroup
/// generated by its commutators; solvable iff this reaches the trivial group.
pub fn is_solvable(group: &[StateMap]) -> bool {
    let Some(identity) = group_identity(group) else {
        return true;
    };
    let mut current: Vec<StateMap> = group.to_vec();
    loop {
        if current.len() <= 1 {
            return true;
        }
        let inverses: Vec<StateMap> = current.iter().map(|x| inverse(x, &identity)).collect();
        let mut commutators: HashSet<StateMap> = HashSet::new();
        for (a, ai) in current.iter().zip(&inverses) {
            for (b, bi) in current.iter().zip(&inverses) {
                commutators.insert(ai.then(bi).then(a).then(b));
            }
        }
        let mut gens: Vec<StateMap> = commutators.into_iter().collect();
        gens.sort();
        let next = generated_subgroup(&gens, &identity);
        if next.len() == current.len() {
            return false;
        }
        current = next;
    }
}
