mod common;

use std::collections::BTreeSet;

use common::*;
use privarch::constraints::{check_compliance, Constraint, Positive};
use privarch::explorer::{explore, reachable_states, ExploreConfig};
use privarch::trace::{check_trace_valid, possession_closure};
use rand::seq::SliceRandom;
use rand::Rng;

fn violates(c: &Constraint, s: &TypeState) -> bool {
    match c {
        Constraint::NegCreate(n) => s[&n.subject].contains(&n.trigger) && !s.values().any(|t| t.contains(&n.required)),
        Constraint::NegPossess(n) => s[&n.subject].contains(&n.trigger) && !s[&n.holder].contains(&n.required),
        Constraint::Positive(p) => s[&p.subject].contains(&p.goal),
        Constraint::LocalSend(_) => false,
    }
}

/// Fewest events after which some state meets `c`, by the naive search.
fn shortest(layers: &[Vec<TypeState>], c: &Constraint) -> Option<usize> {
    layers.iter().position(|l| l.iter().any(|s| violates(c, s)))
}

#[test]
fn reachable_states_match_naive_search() {
    for seed in 0..300 {
        let mut r = rng(seed);
        let arch = random_arch(&mut r);
        let depth = r.gen_range(0..=4);
        let want: BTreeSet<TypeState> = bfs_layers(&arch, depth).into_iter().flatten().collect();
        let got: BTreeSet<TypeState> = reachable_states(&arch, &[], depth).into_iter().collect();
        assert_eq!(got, want, "seed {seed}, depth {depth}");
    }
}

#[test]
fn shortest_counterexamples_and_witnesses_match_naive_search() {
    let (mut found, mut absent) = (0, 0);
    for seed in 0..300 {
        let mut r = rng(1_000 + seed);
        let arch = random_arch(&mut r);
        let agents: Vec<_> = arch.agents.iter().cloned().collect();
        let types: Vec<_> = arch.type_system.atomic_types.iter().cloned().collect();
        let mut cs: Vec<Constraint> = random_neg_create(&arch, &mut r).into_iter().map(Constraint::NegCreate).collect();
        cs.extend(random_neg_possess(&arch, &mut r).into_iter().map(Constraint::NegPossess));
        cs.push(Constraint::Positive(Positive::new(
            agents.choose(&mut r).unwrap().clone(),
            types.choose(&mut r).unwrap().clone(),
        )));
        let depth = 4;
        let layers = bfs_layers(&arch, 64);
        let out = explore(&arch, &cs, &[], ExploreConfig::depth(depth)).unwrap();
        for c in &cs {
            let hit = out
                .counterexamples
                .iter()
                .find(|(x, _)| x == c)
                .map(|(_, t)| t.clone())
                .or_else(|| {
                    out.witnesses
                        .iter()
                        .find(|(p, _)| Constraint::Positive(p.clone()) == *c)
                        .map(|(_, t)| t.clone())
                });
            match (shortest(&layers, c), hit) {
                (Some(d), Some(tr)) if d <= depth => {
                    assert_eq!(tr.len(), d, "seed {seed}: {c}");
                    assert!(check_trace_valid(&arch, &tr).is_valid());
                    let states = possession_closure(&arch, &tr).unwrap();
                    if c.is_negative() {
                        assert!(!check_compliance(&states, &tr, std::slice::from_ref(c)).compliant);
                    }
                    found += 1;
                }
                (Some(d), None) if d > depth => assert!(out.unsettled.contains(c), "seed {seed}: {c}"),
                (None, None) => {
                    assert!(!out.unsettled.contains(c), "seed {seed}: {c} should be settled");
                    absent += 1;
                }
                (want, got) => panic!("seed {seed}: {c}: oracle {want:?}, explorer {:?}", got.map(|t| t.len())),
            }
        }
    }
    assert!(found > 100 && absent > 100, "found {found}, absent {absent}");
}

#[test]
fn budget_exhaustion_is_reported() {
    let arch = privarch::fixtures::coppa_unsafe();
    let cs = privarch::fixtures::coppa_constraints();
    let out = explore(&arch, &cs, &[], ExploreConfig { depth: 3, budget: 0 }).unwrap();
    assert!(!out.exhausted);
}
