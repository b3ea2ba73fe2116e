use proptest::prelude::*;
use regex::Regex;
use regpomdp::automata::{
    build_language, classify_language, transition_monoid, Dfa, HardnessClass, Language, DEFAULT_ELEMENT_CAP,
};

/// Membership oracles written from the regular expressions, independent of
/// the DFA tables. EVEN_PAIRS additionally admits the empty word and single
/// symbols, whose first and last bit trivially agree.
fn oracle(lang: Language) -> Regex {
    let pattern = match lang {
        Language::Parity => r"^0*(10*10*)*$",
        Language::EvenPairs => r"^((0[01]*0)|(1[01]*1)|0|1)?$",
        Language::Sym5 => r"^(([01]){3}(01*0|1))*$",
    };
    Regex::new(pattern).unwrap()
}

fn words_up_to(max_len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=max_len).flat_map(|len| (0..1usize << len).map(move |bits| (0..len).map(|i| (bits >> i) & 1).collect()))
}

#[test]
fn dfa_membership_matches_regex_oracle_up_to_length_12() {
    for lang in Language::ALL {
        let dfa = build_language(lang).dfa;
        let re = oracle(lang);
        let mut count = 0;
        for w in words_up_to(12) {
            let s: String = w.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            assert_eq!(dfa.accepts(&w).unwrap(), re.is_match(&s), "{} on {:?}", lang, s);
            count += 1;
        }
        assert_eq!(count, (1 << 13) - 1);
    }
}

#[test]
fn monoid_orders_and_classes() {
    let order = |l| transition_monoid(&build_language(l).dfa, DEFAULT_ELEMENT_CAP).unwrap().order();
    assert_eq!(order(Language::Parity), 2);
    assert_eq!(order(Language::Sym5), 120);
    assert_eq!(classify_language(&build_language(Language::Sym5).dfa).unwrap(), HardnessClass::Nc1Complete);
    assert_eq!(classify_language(&build_language(Language::Parity).dfa).unwrap(), HardnessClass::InTc0);
    assert_eq!(classify_language(&build_language(Language::EvenPairs).dfa).unwrap(), HardnessClass::InTc0);
}

#[test]
fn sym5_generators_are_the_five_and_four_cycles() {
    let m = transition_monoid(&build_language(Language::Sym5).dfa, DEFAULT_ELEMENT_CAP).unwrap();
    assert_eq!(m.generators[0].0, vec![1, 2, 3, 4, 0]);
    assert_eq!(m.generators[1].0, vec![1, 2, 3, 0, 4]);
    assert!(!m.is_group_of_units_solvable);
}

#[test]
fn every_builtin_monoid_is_closed() {
    for lang in Language::ALL {
        let m = transition_monoid(&build_language(lang).dfa, DEFAULT_ELEMENT_CAP).unwrap();
        assert!(m.contains(&regpomdp::automata::StateMap::identity(m.num_states())));
        for a in &m.elements {
            for b in &m.elements {
                assert!(m.contains(&a.then(b)), "{}: {} ; {} escapes", lang, a, b);
            }
        }
    }
}

fn arb_dfa() -> impl Strategy<Value = Dfa> {
    (1usize..=5, 1usize..=2).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec(0..n, n * k),
            0..n,
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(t, s, acc)| {
                let accepting = acc.iter().enumerate().filter_map(|(i, &a)| a.then_some(i));
                Dfa::new(n, k, t, s, accepting).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn random_monoids_are_closed_and_bounded(dfa in arb_dfa()) {
        let m = transition_monoid(&dfa, DEFAULT_ELEMENT_CAP).unwrap();
        let n = dfa.num_states();
        prop_assert!(m.order() <= n.pow(n as u32));
        for a in &m.elements {
            for b in &m.elements {
                prop_assert!(m.contains(&a.then(b)));
            }
        }
    }

    #[test]
    fn membership_is_deterministic_and_follows_the_monoid(dfa in arb_dfa(), w in proptest::collection::vec(0usize..2, 0..10)) {
        let w: Vec<usize> = w.into_iter().map(|a| a % dfa.alphabet_size()).collect();
        let first = dfa.accepts(&w).unwrap();
        prop_assert_eq!(first, dfa.accepts(&w).unwrap());
        let m = transition_monoid(&dfa, DEFAULT_ELEMENT_CAP).unwrap();
        let map = w.iter().fold(regpomdp::automata::StateMap::identity(dfa.num_states()), |acc, &a| acc.then(&m.generators[a]));
        prop_assert!(m.contains(&map));
        prop_assert_eq!(dfa.is_accepting(map.apply(dfa.start())), first);
    }

    #[test]
    fn json_round_trip(dfa in arb_dfa()) {
        prop_assert_eq!(Dfa::from_json(&dfa.to_json()).unwrap(), dfa);
    }
}
