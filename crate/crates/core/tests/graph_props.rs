use std::collections::BTreeMap;

use holoscope::graph::{parse_records, BipartiteGraph, EdgeRecord, RatingScale, UserSet};
use holoscope::{Error, ObjectId, UserId};
use proptest::prelude::*;

fn records() -> impl Strategy<Value = Vec<(u8, u8, u32, u8)>> {
    prop::collection::vec((0u8..15, 0u8..12, 0u32..100_000, 0u8..5), 1..120)
}

fn build(recs: &[(u8, u8, u32, u8)]) -> BipartiteGraph<f64> {
    let it = recs.iter().map(|&(u, v, t, r)| {
        EdgeRecord::new(format!("u{u}"), format!("o{v}"))
            .at(t as i64)
            .rated(1.0 + r as f64)
    });
    BipartiteGraph::ingest(it, RatingScale::five_star()).unwrap()
}

proptest! {
    #[test]
    fn both_indices_describe_the_same_pairs(recs in records()) {
        let g = build(&recs);
        let mut by_user = Vec::new();
        for u in g.users() {
            for p in g.user_pairs(u) {
                let pair = g.pair(p);
                prop_assert_eq!(pair.user, u);
                by_user.push((pair.user, pair.object, pair.multiplicity));
            }
        }
        let mut by_object = Vec::new();
        for v in g.objects() {
            for &p in g.object_pairs(v) {
                let pair = g.pair(p as usize);
                prop_assert_eq!(pair.object, v);
                by_object.push((pair.user, pair.object, pair.multiplicity));
            }
        }
        by_user.sort();
        by_object.sort();
        prop_assert_eq!(&by_user, &by_object);

        let mut direct: BTreeMap<(String, String), u32> = BTreeMap::new();
        for &(u, v, _, _) in &recs {
            *direct.entry((format!("u{u}"), format!("o{v}"))).or_default() += 1;
        }
        prop_assert_eq!(by_user.len(), direct.len());
        for (u, v, e) in by_user {
            let key = (g.user_name(u).to_string(), g.object_name(v).to_string());
            prop_assert_eq!(direct[&key], e);
        }
        prop_assert_eq!(g.n_events(), recs.len());
    }

    #[test]
    fn pair_attributes_keep_ingestion_order_sorted(recs in records()) {
        let g = build(&recs);
        for p in 0..g.n_pairs() {
            let ts = g.pair_timestamps(p).unwrap();
            prop_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(ts.len(), g.pair(p).multiplicity as usize);
            prop_assert_eq!(g.pair_ratings(p).unwrap().len(), ts.len());
        }
    }

    #[test]
    fn engagement_is_additive_and_monotone(
        recs in records(),
        split in prop::collection::vec(0u8..3, 15),
        weights in prop::collection::vec(0.5f64..3.0, 12),
    ) {
        let mut g = build(&recs);
        let w: Vec<f64> = (0..g.n_objects()).map(|j| weights[j]).collect();
        g.set_column_weights(w).unwrap();
        let n = g.n_users();
        // users labelled 0 go to A, 1 to B, 2 to neither
        let a = UserSet::from_ids(n, g.users().filter(|u| split[u.index()] == 0));
        let b = UserSet::from_ids(n, g.users().filter(|u| split[u.index()] == 1));
        let ab = UserSet::from_ids(n, g.users().filter(|u| split[u.index()] <= 1));
        let all = UserSet::full(n);
        for v in g.objects() {
            let (fa, fb, fab) = (g.engagement(&a, v).unwrap(), g.engagement(&b, v).unwrap(), g.engagement(&ab, v).unwrap());
            prop_assert!((fa + fb - fab).abs() <= 1e-9 * fab.max(1.0));
            prop_assert!(fa <= fab + 1e-12);
            let fu = g.engagement(&all, v).unwrap();
            prop_assert!(fab <= fu + 1e-12);
            prop_assert!((fu - g.weighted_indegree(v)).abs() <= 1e-9 * fu);
            prop_assert_eq!(g.engagement(&UserSet::empty(n), v).unwrap(), 0.0);
        }
    }

    #[test]
    fn restriction_keeps_exactly_the_seed_rows(recs in records(), pick in prop::collection::vec(any::<bool>(), 15)) {
        let g = build(&recs);
        let seed: Vec<UserId> = g.users().filter(|u| pick[u.index()]).collect();
        prop_assume!(!seed.is_empty());
        let view = g.restrict(&seed).unwrap();
        let names: Vec<String> = seed.iter().map(|&u| g.user_name(u).to_string()).collect();
        let scanned = recs.iter().filter(|&&(u, _, _, _)| names.contains(&format!("u{u}"))).count();
        prop_assert_eq!(view.n_events(), scanned);
        for v in view.sinks() {
            prop_assert!(view.object_pairs(v).count() > 0);
        }
    }
}

#[test]
fn engagement_examples() {
    let g = BipartiteGraph::<f64>::ingest(
        vec![
            EdgeRecord::new("u1", "v1"),
            EdgeRecord::new("u1", "v1"),
            EdgeRecord::new("u2", "v1"),
            EdgeRecord::new("u2", "v1"),
            EdgeRecord::new("u2", "v1"),
        ],
        RatingScale::five_star(),
    )
    .unwrap();
    let both = UserSet::full(2);
    assert_eq!(g.engagement_by_name(&both, "v1").unwrap(), 5.0);
    assert!(matches!(g.engagement_by_name(&both, "nope"), Err(Error::UnknownSink(_))));
    assert_eq!(g.n_pairs(), 2);
    assert_eq!(g.in_degree(ObjectId(0)), 5);
    assert_eq!(g.object_pairs(ObjectId(0)).len(), 2);
}

#[test]
fn full_restriction_is_the_whole_graph() {
    let g = build(&[(0, 0, 1, 1), (1, 1, 2, 2), (1, 0, 3, 3)]);
    let all: Vec<UserId> = g.users().collect();
    let view = g.restrict(&all).unwrap();
    assert_eq!(view.n_events(), g.n_events());
    assert_eq!(view.n_pairs(), g.n_pairs());
    assert!(matches!(g.restrict(&[]), Err(Error::EmptySeed)));
}

#[test]
fn malformed_rows_report_their_line() {
    let text = "user,object,timestamp\na,b,10\nc,d,soon\n";
    let err = parse_records(text.as_bytes()).unwrap_err();
    assert_eq!(err.to_string(), "line 3: non-numeric timestamp 'soon'");
    let err = parse_records("a,b,1\nc\n".as_bytes()).unwrap_err();
    assert!(err.to_string().starts_with("line 2:"));
    let err = parse_records("".as_bytes()).unwrap_err();
    assert_eq!(err.to_string(), "empty input");
}

#[test]
fn csv_round_trip_preserves_the_graph() {
    let g = build(&[(0, 0, 5, 1), (1, 1, 2, 4), (1, 0, 3, 0), (1, 0, 1, 2)]);
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let back = BipartiteGraph::<f64>::read_csv(buf.as_slice(), RatingScale::five_star()).unwrap();
    assert_eq!(back.to_records(), g.to_records());
}
