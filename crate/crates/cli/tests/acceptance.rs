//! Acceptance runner. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero only when a criterion cannot be evaluated
//! (a panic or an I/O failure). Set `ACCEPTANCE_STRICT=1` to also exit
//! non-zero on a FAIL verdict.
//!
//! Run: cargo test --release -p holoscope-cli --test acceptance

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{default_ctx, evaluate, rel};
use holoscope::detector::{greedy_shaving, DetectorConfig};
use holoscope::evalkit::{avg_degree_baseline, density_sweep, f_measure, roc_auc, AccuracyCurve, log_grid};
use holoscope::graph::{BipartiteGraph, RatingScale};
use holoscope::spectral::{truncated_svd, SparseMatrix, SvdConfig};
use holoscope::suspiciousness::{ContrastState, ScoreConfig, Signals};
use holoscope::synth::{gen_background, hyperbolic_trap, BackgroundConfig, InjectionConfig, TrapConfig};
use holoscope::temporal::{max_drop, multiburst, time_obstruction_bound, TimeSeriesHist};
use holoscope::{Detector, UserId};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn trap_benchmark() -> Verdict {
    let start = Instant::now();
    let trap = hyperbolic_trap::<f64>(&TrapConfig::default()).unwrap();
    let detector = Detector::new(DetectorConfig {
        score: ScoreConfig {
            signals: Signals::TOPOLOGY,
            ..ScoreConfig::default()
        },
        ..DetectorConfig::default()
    });
    let r = detector.detect(&trap.graph).unwrap();
    let hs = f_measure(&r.users, &trap.block_users).unwrap().f1;
    let elapsed = start.elapsed().as_secs_f64();
    let base = avg_degree_baseline(&trap.graph).unwrap();
    let bf = f_measure(&base.users, &trap.block_users).unwrap().f1;
    Verdict::new(
        hs >= 0.9 && bf < hs && elapsed < 120.0,
        format!(
            "HS-alpha F1 {hs:.3}, baseline F1 {bf:.3}, {:.1}s, community density {:.3}, block density {:.3}",
            elapsed, trap.community_density, trap.block_density
        ),
    )
}

fn density_sweep_criterion() -> Verdict {
    let base = gen_background::<f64>(&BackgroundConfig::default()).unwrap();
    // seeds must be able to hold a whole block of up to 4000 users
    let detector = Detector::new(DetectorConfig {
        cap_exponent: 1.0,
        ..DetectorConfig::default()
    });
    let densities = [1.0, 0.5, 0.2, 0.1, 0.05];
    let report = density_sweep(&base, &densities, &InjectionConfig::default(), &detector, 2017).unwrap();
    let mut f1_ok = true;
    let mut auc_ok = true;
    let mut parts = Vec::new();
    for p in &report.points {
        let f1 = p.user.map_or(0.0, |u| u.f1);
        let auc = p.object_auc.unwrap_or(0.0);
        if p.density >= 0.1 && f1 < 0.8 {
            f1_ok = false;
        }
        if auc < 0.95 {
            auc_ok = false;
        }
        parts.push(format!("d={} F1 {f1:.3} AUC {auc:.4}", p.density));
    }
    Verdict::new(
        f1_ok && auc_ok,
        format!(
            "{}; F1>=0.8 down to 0.1: {}, AUC>=0.95 everywhere: {}",
            parts.join(", "),
            f1_ok,
            auc_ok
        ),
    )
}

/// `n` events spread as a triangle over `[0, tau]` with its apex at
/// `apex * tau`, binned at width `dt`.
fn triangle_counts(n: usize, tau: f64, apex: f64, dt: f64) -> Vec<f64> {
    let peak = apex * tau;
    let cdf_inv = |q: f64| {
        if q <= apex {
            (q * tau * peak).sqrt()
        } else {
            tau - ((1.0 - q) * tau * (tau - peak)).sqrt()
        }
    };
    let mut counts = vec![0.0; ((tau / dt).ceil() as usize).max(1)];
    for i in 0..n {
        let t = cdf_inv((i as f64 + 0.5) / n as f64);
        let b = ((t / dt) as usize).min(counts.len() - 1);
        counts[b] += 1.0;
    }
    counts
}

fn measured_slopes(counts: &[f64], dt: f64) -> (f64, f64) {
    let first = counts.iter().position(|&c| c > 0.0).unwrap();
    let last = counts.iter().rposition(|&c| c > 0.0).unwrap();
    let apex = (first..=last).fold(first, |b, i| if counts[i] > counts[b] { i } else { b });
    let rise = if apex > first {
        (counts[apex] - counts[first]) / ((apex - first) as f64 * dt)
    } else {
        f64::INFINITY
    };
    let fall = if last > apex {
        (counts[apex] - counts[last]) / ((last - apex) as f64 * dt)
    } else {
        f64::INFINITY
    };
    (rise, fall)
}

fn obstruction_suite() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fast_violations = 0;
    let mut bound_violations = 0;
    for _ in 0..100 {
        let dt = rng.random_range(60.0..86_400.0);
        let s1 = rng.random_range(0.5..20.0) / dt;
        let s2 = rng.random_range(0.5..20.0) / dt;
        let bins_at_bound: f64 = rng.random_range(80.0..240.0);
        let n = ((bins_at_bound * dt).powi(2) * s1 * s2 / (2.0 * dt * (s1 + s2))).round().max(10.0);
        let (tau_min, c_min) = time_obstruction_bound(n, dt, s1, s2).unwrap();

        let tau = rng.random_range(0.3..0.9) * tau_min;
        let counts = triangle_counts(n as usize, tau, rng.random_range(0.3..0.7), dt);
        let (rise, fall) = measured_slopes(&counts, dt);
        let h = TimeSeriesHist::from_counts(0, dt, counts).unwrap();
        let rise_found = multiburst(&h).iter().map(|p| p.slope).fold(0.0, f64::max);
        let fall_found = max_drop(&h).map_or(0.0, |d| d.slope);
        if !((rise > s1 || fall > s2) && (rise_found > s1 || fall_found > s2)) {
            fast_violations += 1;
        }

        let at_bound = triangle_counts(n as usize, tau_min, s2 / (s1 + s2), dt);
        let top = at_bound.iter().copied().fold(0.0, f64::max);
        // one bin of discretization: a neighbour differs by at most one slope step
        if top < c_min - s1.max(s2) * dt {
            bound_violations += 1;
        }
    }
    Verdict::new(
        fast_violations == 0 && bound_violations == 0,
        format!(
            "100 tuples, {fast_violations} fast attacks within normal slopes, {bound_violations} bound attacks short of c_min, {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// 50 x 40 graph with timestamps, five-star ratings, a coordinated group and
/// uneven column weights.
fn attributed_graph(seed: u64) -> BipartiteGraph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nu, no) = (50u32, 40u32);
    let mut events = Vec::new();
    for _ in 0..500 {
        let t = rng.random_range(0..10_000_000i64);
        events.push((rng.random_range(0..nu), rng.random_range(0..no), Some(t), Some(rng.random_range(0..5u16))));
    }
    let group: Vec<u32> = (0..8).map(|_| rng.random_range(0..nu)).collect();
    for v in 0..4 {
        let base = rng.random_range(0..9_000_000i64);
        for &u in &group {
            events.push((u, v, Some(base + rng.random_range(0..20_000)), Some(4)));
        }
    }
    let mut g = BipartiteGraph::from_indexed(nu as usize, no as usize, &events, RatingScale::five_star()).unwrap();
    g.set_column_weights((0..no).map(|_| rng.random_range(1.0..2.0)).collect()).unwrap();
    g
}

fn incremental_consistency() -> Verdict {
    let mut worst = 0.0f64;
    let mut states = 0;
    for seed in 0..50 {
        let g = attributed_graph(5000 + seed);
        let ctx = default_ctx(&g, Signals::ALL);
        let a0: Vec<UserId> = g.users().filter(|&u| !g.user_pairs(u).is_empty()).collect();
        let mut state = ContrastState::new(&ctx, &a0).unwrap();
        let mut members = a0.clone();
        let mut order = a0.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for step in 0..order.len() {
            if step > 0 {
                let u = order[step - 1];
                state.remove_user(u).unwrap();
                members.retain(|&x| x != u);
            }
            let oracle = evaluate(&ctx, &a0, &members);
            for (j, &v) in oracle.sinks.iter().enumerate() {
                worst = worst.max(rel(state.f_a(v), oracle.f_a[j]));
                worst = worst.max(rel(state.p(v).unwrap(), oracle.p[j]));
            }
            for &(w, s) in &oracle.scores {
                worst = worst.max(rel(state.score(w).unwrap(), s));
            }
            worst = worst.max(rel(state.hs().unwrap(), oracle.hs));
            states += 1;
        }
    }
    Verdict::new(
        worst <= 1e-9,
        format!("{states} states on 50 graphs, worst relative error {worst:.2e}"),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut trajectory_ok = 0;
    for seed in 0..20 {
        let g = attributed_graph(7000 + seed);
        let ctx = default_ctx(&g, Signals::ALL);
        let a0: Vec<UserId> = g.users().filter(|&u| !g.user_pairs(u).is_empty()).collect();
        let r = greedy_shaving(&ctx, &a0, true, false).unwrap();
        let mut members = a0.clone();
        let mut best = f64::NEG_INFINITY;
        for step in r.trace.as_ref().unwrap() {
            if let Some(u) = step.removed {
                members.retain(|&x| x != u);
            }
            best = best.max(evaluate(&ctx, &a0, &members).hs);
        }
        if rel(r.hs, best) <= 1e-9 {
            trajectory_ok += 1;
        }
    }

    let mut brute_ok = 0;
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
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
        let g = BipartiteGraph::<f64>::from_indexed(
            (3 + n_strays) as usize,
            n_objects as usize,
            &edges,
            RatingScale::five_star(),
        )
        .unwrap();
        let ctx = default_ctx(&g, Signals::ALL);
        let all: Vec<UserId> = g.users().collect();
        let n = all.len();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 1u32..(1 << n) {
            let sub: Vec<UserId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
            let hs = evaluate(&ctx, &all, &sub).hs;
            if hs > best.0 + 1e-12 {
                best = (hs, sub);
            }
        }
        let r = greedy_shaving(&ctx, &all, false, false).unwrap();
        if r.users == best.1 && r.users == [UserId(0), UserId(1), UserId(2)] {
            brute_ok += 1;
        }
    }
    Verdict::new(
        trajectory_ok == 20 && brute_ok == 30,
        format!("trajectory maximum {trajectory_ok}/20, brute-force maximizer {brute_ok}/30"),
    )
}

fn spectral_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sigma = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for _ in 0..20 {
        let mut t = Vec::new();
        let mut dense = DMatrix::<f64>::zeros(200, 150);
        for i in 0..200 {
            for j in 0..150 {
                if rng.random::<f64>() < 0.05 {
                    let x = rng.random_range(0.1..3.0);
                    t.push((i, j, x));
                    dense[(i, j)] += x;
                }
            }
        }
        let m = SparseMatrix::from_triplets(200, 150, &t).unwrap();
        let svd = truncated_svd(&m, &SvdConfig::new(5)).unwrap();
        let mut oracle: Vec<f64> = dense.singular_values().iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (s, o) in svd.sigma.iter().zip(&oracle).take(5) {
            worst_sigma = worst_sigma.max((s - o).abs() / o);
        }
        for vs in [&svd.u, &svd.v] {
            for i in 0..5 {
                for j in 0..5 {
                    let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst_ortho = worst_ortho.max((d - want).abs());
                }
            }
        }
    }
    Verdict::new(
        worst_sigma <= 1e-6 && worst_ortho <= 1e-6,
        format!("worst sigma error {worst_sigma:.2e}, worst orthonormality error {worst_ortho:.2e}"),
    )
}

fn scalability() -> Verdict {
    let dir = std::env::temp_dir().join(format!("holoscope-acceptance-{}", std::process::id()));
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_holoscope"))
        .args(["bench", "--sizes", "10000,100000,500000,1000000", "--output-dir"])
        .arg(&dir)
        .output()
        .expect("bench runs");
    if !out.status.success() {
        return Verdict::new(false, format!("bench failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("bench.json")).unwrap()).unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    let slope = report["slope"].as_f64().unwrap();
    let mut cap_ok = true;
    let mut rows = Vec::new();
    for r in report["rows"].as_array().unwrap() {
        let users = r["users"].as_f64().unwrap();
        let max_seed = r["max_seed_size"].as_u64().unwrap();
        // the bound itself, not the value the binary reports
        let cap = users.powf(1.0 / 1.6).floor() as u64;
        cap_ok &= max_seed <= cap;
        rows.push(format!(
            "|E|={} {:.2}s seed {max_seed}/{cap}",
            r["edges"],
            r["seconds"].as_f64().unwrap()
        ));
    }
    let total = start.elapsed().as_secs_f64();
    Verdict::new(
        slope <= 1.3 && cap_ok && total < 1800.0,
        format!("slope {slope:.3}, {}; total {total:.0}s", rows.join(", ")),
    )
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting half.
fn pair_count_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn metric_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst = 0.0f64;
    let mut fixtures = 0;
    while fixtures < 1000 {
        let n = rng.random_range(2..25);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
            continue;
        }
        worst = worst.max((roc_auc(&scores, &positive).unwrap() - pair_count_auc(&scores, &positive)).abs());
        fixtures += 1;
    }
    let grid = log_grid(0.01, 1.0, 12);
    let area = AccuracyCurve::new(grid.iter().map(|&d| (d, Some(1.0)))).unwrap().area;
    Verdict::new(
        worst <= 1e-12 && (area - 0.995).abs() <= 1e-9,
        format!("1000 fixtures, worst AUC gap {worst:.1e}; perfect-stub area {area:.12}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    // the test harness passes its own flags; only a name filter is honoured
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 8] = [
        ("1 hyperbolic trap", trap_benchmark),
        ("2 density sweep", density_sweep_criterion),
        ("3 time obstruction", obstruction_suite),
        ("4 incremental consistency", incremental_consistency),
        ("5 oracle equivalence", oracle_equivalence),
        ("6 spectral correctness", spectral_correctness),
        ("7 scalability", scalability),
        ("8 metric correctness", metric_correctness),
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        println!(
            "[{}] {name} ({:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
