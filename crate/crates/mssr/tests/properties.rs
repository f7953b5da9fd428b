use std::collections::BTreeSet;

use mssr::gen::{self, Limits};
use mssr::progress::{bump_history, transitive_close, Endpoint, Event, History, Relation};
use mssr::projection::merge;
use mssr::semantics::{commute_normal, global_steps};
use mssr::types::LBranch;
use mssr::{parse_global, parse_local, parse_process, Channel, GlobalType, LocalType, Role, TypeExpr};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generated(seed: u64) -> GlobalType {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen::global_type(&mut rng, Limits::default(), 10_000).expect("generator gave up")
}

// Branchings towards one partner, the shape merge actually sees.
fn branching() -> impl Strategy<Value = LocalType> {
    let leaf = Just(LocalType::End);
    leaf.prop_recursive(3, 16, 3, |inner| {
        (proptest::sample::subsequence(vec!["a", "b", "c"], 1..=3), proptest::collection::vec(inner, 3)).prop_map(|(labels, conts)| LocalType::Branch {
            partner: Role::new("p"),
            branches: labels.into_iter().zip(conts).map(|(l, cont)| LBranch { label: l.to_string(), payload: TypeExpr::UNIT, cont }).collect(),
        })
    })
}

fn endpoint(i: u8) -> Endpoint {
    let roles = ["p", "q", "r"];
    Endpoint::new(Channel::endpoint("s", Role::new(roles[usize::from(i % 3)])), Role::new(roles[usize::from(i / 3 % 3)]))
}

fn event() -> impl Strategy<Value = Event> {
    (0u8..9, proptest::sample::select(vec!["l1", "l2"]), 1u32..4).prop_map(|(e, l, i)| Event::new(endpoint(e), l, i))
}

fn actions(g: &GlobalType) -> BTreeSet<String> {
    global_steps(g).into_iter().map(|(a, _)| a.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn global_types_round_trip(seed in any::<u64>()) {
        let g = generated(seed);
        let back = parse_global(&g.to_string()).unwrap();
        prop_assert_eq!(back.canonical(), g.canonical());
    }

    #[test]
    fn projections_round_trip(seed in any::<u64>()) {
        let g = generated(seed);
        for r in mssr::projection::roles(&g) {
            let t = mssr::projection::project_role(&g, &r).unwrap();
            prop_assert_eq!(parse_local(&t.to_string()).unwrap().canonical(), t.canonical());
        }
    }

    #[test]
    fn processes_round_trip(seed in any::<u64>()) {
        let g = generated(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(p) = gen::process_for(&mut rng, &g, "G") {
            prop_assert_eq!(parse_process(&p.to_string()).unwrap(), p.clone());
            let multi = mssr::pretty::process_multiline(&p);
            prop_assert_eq!(parse_process(&multi).unwrap(), p);
        }
    }

    #[test]
    fn merge_is_idempotent(a in branching()) {
        prop_assert_eq!(merge(&a, &a).unwrap().canonical(), a.canonical());
    }

    #[test]
    fn merge_is_commutative(a in branching(), b in branching()) {
        let ab = merge(&a, &b).map(|t| t.canonical()).ok();
        let ba = merge(&b, &a).map(|t| t.canonical()).ok();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn merge_is_associative(a in branching(), b in branching(), c in branching()) {
        let left = merge(&a, &b).and_then(|ab| merge(&ab, &c)).map(|t| t.canonical()).ok();
        let right = merge(&b, &c).and_then(|bc| merge(&a, &bc)).map(|t| t.canonical()).ok();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn closure_is_idempotent_and_extensive(pairs in proptest::collection::vec((event(), event()), 0..12)) {
        let r: Relation = pairs.into_iter().collect();
        let once = transitive_close(&r);
        prop_assert!(r.is_subset(&once));
        prop_assert_eq!(transitive_close(&once), once);
    }

    #[test]
    fn bumps_compose(e in event(), a in 0u8..9, j in 0u32..5, k in 0u32..5) {
        let alpha = endpoint(a);
        prop_assert_eq!(e.bump(&alpha, j).bump(&alpha, k), e.bump(&alpha, j + k));
        let h: History = [(endpoint(0), 2)].into_iter().collect();
        prop_assert_eq!(bump_history(&bump_history(&h, &alpha, j), &alpha, k), bump_history(&h, &alpha, j + k));
    }

    #[test]
    fn commuting_prefixes_keeps_the_actions(seed in any::<u64>()) {
        let g = generated(seed).canonical();
        let n = commute_normal(&g);
        prop_assert_eq!(commute_normal(&n), n.clone());
        prop_assert_eq!(actions(&n), actions(&g));
    }
}
