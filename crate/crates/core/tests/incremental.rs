mod common;

use common::{default_ctx, evaluate, rel};
use holoscope::detector::greedy_shaving;
use holoscope::graph::{BipartiteGraph, RatingScale};
use holoscope::suspiciousness::{ContrastState, Signals};
use holoscope::UserId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// 50 x 40 graph with timestamps, five-star ratings, a few surges and
/// uneven column weights.
fn attributed_graph(seed: u64) -> BipartiteGraph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nu, no) = (50u32, 40u32);
    let mut events = Vec::new();
    for _ in 0..500 {
        let u = rng.random_range(0..nu);
        let v = rng.random_range(0..no);
        let t = rng.random_range(0..10_000_000i64);
        let r = rng.random_range(0..5u16);
        events.push((u, v, Some(t), Some(r)));
    }
    // a small coordinated group with tight timing and high ratings
    let group: Vec<u32> = (0..8).map(|_| rng.random_range(0..nu)).collect();
    for v in 0..4 {
        let base = rng.random_range(0..9_000_000i64);
        for &u in &group {
            events.push((u, v, Some(base + rng.random_range(0..20_000)), Some(4)));
        }
    }
    let mut g = BipartiteGraph::from_indexed(nu as usize, no as usize, &events, RatingScale::five_star()).unwrap();
    let w: Vec<f64> = (0..no).map(|_| rng.random_range(1.0..2.0)).collect();
    g.set_column_weights(w).unwrap();
    g
}

fn assert_matches(state: &ContrastState<'_, f64>, oracle: &common::Eval, step: usize) {
    for (j, &v) in oracle.sinks.iter().enumerate() {
        assert!(rel(state.f_a(v), oracle.f_a[j]) <= TOL, "f_A at step {step}");
        assert!(rel(state.p(v).unwrap(), oracle.p[j]) <= TOL, "P at step {step}");
    }
    for &(u, s) in &oracle.scores {
        assert!(rel(state.score(u).unwrap(), s) <= TOL, "S({u:?}) at step {step}");
    }
    assert!(rel(state.hs().unwrap(), oracle.hs) <= TOL, "HS at step {step}");
}

#[test]
fn removals_match_direct_evaluation() {
    for seed in 0..50 {
        let g = attributed_graph(seed);
        let ctx = default_ctx(&g, Signals::ALL);
        assert_eq!(ctx.signals(), Signals::ALL);
        let a0: Vec<UserId> = g.users().filter(|&u| !g.user_pairs(u).is_empty()).collect();
        let mut state = ContrastState::new(&ctx, &a0).unwrap();
        let mut members = a0.clone();
        assert_matches(&state, &evaluate(&ctx, &a0, &members), 0);

        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut order = a0.clone();
        order.shuffle(&mut rng);
        for (step, &u) in order[..order.len() - 1].iter().enumerate() {
            state.remove_user(u).unwrap();
            members.retain(|&x| x != u);
            assert_matches(&state, &evaluate(&ctx, &a0, &members), step + 1);
        }
    }
}

#[test]
fn touched_users_cover_every_changed_score() {
    let g = attributed_graph(77);
    let ctx = default_ctx(&g, Signals::ALL);
    let a0: Vec<UserId> = g.users().filter(|&u| !g.user_pairs(u).is_empty()).collect();
    let mut state = ContrastState::new(&ctx, &a0).unwrap();
    for &u in &a0[..a0.len() - 1] {
        let before: Vec<(UserId, f64)> = state.user_scores();
        let local = state.remove_user(u).unwrap().to_vec();
        let touched: Vec<UserId> = local.iter().map(|&i| state.user_at(i as usize)).collect();
        for (w, s) in before {
            if w == u {
                continue;
            }
            if state.score(w).unwrap() != s {
                assert!(touched.contains(&w));
            }
        }
    }
}

#[test]
fn shaving_returns_its_trajectory_maximum() {
    for seed in 0..20 {
        let g = attributed_graph(200 + seed);
        let ctx = default_ctx(&g, Signals::ALL);
        let a0: Vec<UserId> = g.users().filter(|&u| !g.user_pairs(u).is_empty()).collect();
        let r = greedy_shaving(&ctx, &a0, true, false).unwrap();
        let trace = r.trace.clone().unwrap();
        assert_eq!(trace.len(), a0.len());

        let mut members = a0.clone();
        let mut best = (f64::NEG_INFINITY, members.clone());
        for step in &trace {
            if let Some(u) = step.removed {
                members.retain(|&x| x != u);
            }
            assert_eq!(members.len(), step.size);
            let exact = evaluate(&ctx, &a0, &members).hs;
            assert!(rel(step.hs, exact) <= TOL);
            if exact > best.0 {
                best = (exact, members.clone());
            }
        }
        assert!(rel(r.hs, best.0) <= TOL);
        assert_eq!(r.users, best.1);
    }
}

/// Three users fully connected to two objects, plus strays holding one edge
/// each to other objects.
fn planted(seed: u64) -> BipartiteGraph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_strays = rng.random_range(2..=9u32);
    let n_objects = 2 + rng.random_range(2..=6u32);
    let mut edges = Vec::new();
    for u in 0..3 {
        for v in 0..2 {
            edges.push((u, v, None, None));
        }
    }
    for s in 0..n_strays {
        edges.push((3 + s, rng.random_range(2..n_objects), None, None));
    }
    BipartiteGraph::from_indexed((3 + n_strays) as usize, n_objects as usize, &edges, RatingScale::five_star())
        .unwrap()
}

#[test]
fn planted_block_is_the_exhaustive_maximizer() {
    for seed in 0..30 {
        let g = planted(seed);
        let ctx = default_ctx(&g, Signals::ALL);
        let all: Vec<UserId> = g.users().collect();
        let n = all.len();
        assert!(n <= 12);
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 1u32..(1 << n) {
            let sub: Vec<UserId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
            let hs = evaluate(&ctx, &all, &sub).hs;
            if hs > best.0 + 1e-12 {
                best = (hs, sub);
            }
        }
        let r = greedy_shaving(&ctx, &all, false, false).unwrap();
        assert_eq!(r.users, best.1, "fixture {seed}");
        assert_eq!(r.users, vec![UserId(0), UserId(1), UserId(2)]);
        assert!(rel(r.hs, best.0) <= TOL);
    }
}
