use proptest::prelude::*;

use licon::relations::{invert, RelationKind};
use licon::synth::{
    generate, truth_eval, Formula, GenerateConfig, KindDistribution, Literal, Oracle,
    SyntheticDataset,
};

fn naive_implies(a: (&Formula, bool), b: (&Formula, bool), n: usize) -> bool {
    (0..1usize << n).all(|m| {
        let attrs: Vec<bool> = (0..n).map(|k| (m >> k) & 1 == 1).collect();
        a.0.eval(&attrs) != a.1 || b.0.eval(&attrs) == b.1
    })
}

fn literal(n: usize) -> impl Strategy<Value = Literal> {
    (0..n, any::<bool>()).prop_map(|(attr, neg)| Literal { attr, neg })
}

fn formula(n: usize) -> impl Strategy<Value = Formula> {
    prop_oneof![
        literal(n).prop_map(Formula::lit),
        (literal(n), literal(n)).prop_map(|(a, b)| Formula::and(a, b)),
        (literal(n), literal(n)).prop_map(|(a, b)| Formula::or(a, b)),
    ]
}

proptest! {
    #[test]
    fn oracle_agrees_with_enumeration(a in formula(6), b in formula(6), ya: bool, yb: bool) {
        let o = Oracle::new(6).unwrap();
        prop_assert_eq!(o.implies((&a, ya), (&b, yb)), naive_implies((&a, ya), (&b, yb), 6));
        let r = o.relation((&a, ya), (&b, yb));
        prop_assert_eq!(r, invert(o.relation((&b, yb), (&a, ya))));
    }

    #[test]
    fn proposition_and_its_negation(
        a in formula(5).prop_filter("contingent", |f| {
            let l = f.literals();
            l.len() == 1 || l[0].attr != l[1].attr
        })
    ) {
        let o = Oracle::new(5).unwrap();
        prop_assert_eq!(o.relation((&a, true), (&a, true)), RelationKind::Equivalent);
        // Neither answer of a contingent formula implies the other.
        prop_assert_eq!(o.relation((&a, true), (&a, false)), RelationKind::Unrelated);
    }
}

fn check_dataset(ds: &SyntheticDataset) {
    let index = ds.index();
    let oracle = Oracle::new(ds.n_attr()).unwrap();
    for e in &ds.worlds {
        for q in &e.queries {
            assert_eq!(q.gold, truth_eval(&q.query.formula, &e.world));
            assert_eq!(q.query.surface_text, q.query.formula.render());
        }
    }
    for r in &ds.relations {
        let a = index.queries[&(r.image_id.clone(), r.prop_i.clone())];
        let b = index.queries[&(r.image_id.clone(), r.prop_j.clone())];
        let n = ds.n_attr();
        let want = match (
            naive_implies((&a.query.formula, a.gold), (&b.query.formula, b.gold), n),
            naive_implies((&b.query.formula, b.gold), (&a.query.formula, a.gold), n),
        ) {
            (true, true) => RelationKind::Equivalent,
            (true, false) => RelationKind::SufficientFor,
            (false, true) => RelationKind::NecessaryFor,
            (false, false) => RelationKind::Unrelated,
        };
        assert_eq!(r.kind, want, "{r:?}");
        assert_eq!(
            oracle.relation((&a.query.formula, a.gold), (&b.query.formula, b.gold)),
            want
        );
    }
}

#[test]
fn generated_relations_are_exact() {
    let ds = generate(&GenerateConfig {
        n_worlds: 10,
        n_attr: 8,
        ..GenerateConfig::default()
    })
    .unwrap();
    check_dataset(&ds);
    // Every query pair of a world is recorded once.
    let per_world = 8 * 7 / 2;
    assert_eq!(ds.relations.len(), 10 * per_world);
}

#[test]
fn matched_relations_are_exact_too() {
    let ds = generate(&GenerateConfig {
        n_worlds: 10,
        n_attr: 8,
        match_distribution: Some(KindDistribution::INTROSPECT),
        ..GenerateConfig::default()
    })
    .unwrap();
    check_dataset(&ds);
}

#[test]
fn default_benchmark_has_arrows_of_every_kind() {
    let ds = generate(&GenerateConfig::default()).unwrap();
    let c = ds.kind_counts();
    for k in RelationKind::ALL {
        assert!(c.get(k) > 0, "no {k} relations");
    }
    assert_eq!(ds.worlds.len(), 50);
    assert!(ds
        .worlds
        .iter()
        .all(|e| e.world.attributes.len() == 12 && e.queries.len() == 8));
}

#[test]
fn directory_round_trip() {
    let ds = generate(&GenerateConfig {
        n_worlds: 6,
        ..GenerateConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.write_dir(dir.path()).unwrap();
    for f in [
        "worlds.jsonl",
        "queries.jsonl",
        "propositions.jsonl",
        "relations.jsonl",
        "dataset.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(SyntheticDataset::read_dir(dir.path()).unwrap(), ds);
}

#[test]
fn seeds_change_the_data() {
    let a = generate(&GenerateConfig::default()).unwrap();
    let b = generate(&GenerateConfig {
        seed: 2,
        ..GenerateConfig::default()
    })
    .unwrap();
    assert_ne!(a.worlds, b.worlds);
    assert_eq!(a, generate(&GenerateConfig::default()).unwrap());
}
