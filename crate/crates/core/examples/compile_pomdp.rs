//! Compiles a language into its episodic task and logs a few episodes played
//! by the DFA-shadow oracle as CSV.
//!
//! ```text
//! cargo run --example compile_pomdp -- EVEN_PAIRS 6
//! ```

use regpomdp::automata::{build_language, Language};
use regpomdp::envs::{write_episode_csv, DfaShadow, Episodic, LangPomdp, LogRow};
use regpomdp::rng::seeded;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lang: Language = args.first().map_or("PARITY", String::as_str).parse()?;
    let n: usize = args.get(1).map_or(Ok(8), |s| s.parse())?;
    let env = LangPomdp::bounded(build_language(lang).dfa, n)?;
    let mut rng = seeded(7);

    for episode in 0..3 {
        let mut shadow = DfaShadow::new(&env.dfa);
        let (mut state, mut obs) = env.reset(&mut rng);
        let mut rows = vec![];
        for t in 0.. {
            let action = shadow.act(shadow.decode(&obs).expect("one-hot"));
            let r = env.step(&mut state, action, &mut rng)?;
            rows.push(LogRow {
                t,
                observation: obs.clone(),
                action,
                reward: r.reward,
                done: r.done,
            });
            if r.done {
                break;
            }
            obs = r.observation;
        }
        println!("# episode {}", episode);
        write_episode_csv(std::io::stdout().lock(), &rows)?;
    }
    Ok(())
}
