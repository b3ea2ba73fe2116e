//! Prints a built-in language's DFA, its transition monoid order and the
//! resulting hardness class, then classifies a few words.
//!
//! ```text
//! cargo run --example inspect_language -- SYM5 0110 10101
//! ```

use regpomdp::automata::{build_language, parse_word, transition_monoid, Language};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let lang: Language = args.next().as_deref().unwrap_or("PARITY").parse()?;
    let spec = build_language(lang);
    let monoid = transition_monoid(&spec.dfa, 1 << 16)?;

    println!("{}", spec.dfa.to_json());
    println!("{}: {} states, monoid order {}, {}", lang, spec.dfa.num_states(), monoid.order(), monoid.hardness());
    println!("group of units has {} elements", monoid.group_of_units().len());
    for w in args {
        let word = parse_word(&w)?;
        println!("{:>12} -> {}", w, if spec.dfa.accepts(&word)? { "accept" } else { "reject" });
    }
    Ok(())
}
