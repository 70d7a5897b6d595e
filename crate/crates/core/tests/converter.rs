use proptest::prelude::*;

use licon::converter::{convert_all, qa_to_proposition, BinaryQA, FRONTED_VERBS};
use licon::relations::Proposition;
use licon::synth::{generate, GenerateConfig};

fn tokens(s: &str) -> Vec<String> {
    let mut t: Vec<String> = s
        .trim_end_matches(['?', '.'])
        .split_whitespace()
        .map(str::to_lowercase)
        .collect();
    t.sort();
    t
}

fn question() -> impl Strategy<Value = String> {
    (
        prop::sample::select(FRONTED_VERBS.to_vec()),
        "[a-z]{1,8}",
        prop::collection::vec("[a-z]{1,8}", 0..5),
    )
        .prop_map(|(v, subj, rest)| {
            let mut q = format!("{v} {subj}");
            for w in rest {
                q.push(' ');
                q.push_str(&w);
            }
            q.push('?');
            q
        })
}

proptest! {
    #[test]
    fn yes_keeps_tokens(q in question()) {
        let p = qa_to_proposition(&BinaryQA::new(&q, "yes").unwrap());
        prop_assert!(p.ends_with('.') && !p.contains('?'));
        prop_assert_eq!(tokens(&q), tokens(&p));
    }

    #[test]
    fn no_adds_exactly_one_not(q in question()) {
        let yes = qa_to_proposition(&BinaryQA::new(&q, "yes").unwrap());
        let no = qa_to_proposition(&BinaryQA::new(&q, "no").unwrap());
        let mut with_not = tokens(&yes);
        with_not.push("not".into());
        with_not.sort();
        prop_assert_eq!(tokens(&no), with_not);
        // "not" follows the verb, which is now second.
        prop_assert_eq!(no.trim_end_matches('.').split_whitespace().nth(2), Some("not"));
    }

    #[test]
    fn open_questions_are_rejected(w in "(what|where|who|how|why) [a-z]{1,6}\\?") {
        prop_assert!(BinaryQA::new(&w, "yes").is_err());
    }
}

#[test]
fn synthetic_queries_all_convert() {
    let ds = generate(&GenerateConfig {
        n_worlds: 5,
        ..GenerateConfig::default()
    })
    .unwrap();
    let props: Vec<Proposition> = ds.propositions().iter().cloned().collect();
    let (ok, bad) = convert_all(&props);
    assert!(bad.is_empty(), "{bad:?}");
    assert_eq!(ok.len(), 40);
    assert!(ok.iter().all(|c| c.proposition_text.starts_with('A')));
}
