//! Direct evaluation of the block objective, written from the definitions
//! with plain loops and no incremental bookkeeping.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use holoscope::graph::BipartiteGraph;
use holoscope::suspiciousness::{ScoreConfig, ScoreContext, Signals};
use holoscope::{ObjectId, UserId};

pub struct Eval {
    pub sinks: Vec<ObjectId>,
    pub f_a: Vec<f64>,
    pub p: Vec<f64>,
    pub scores: Vec<(UserId, f64)>,
    pub hs: f64,
}

/// Objects adjacent to `a0`, ascending.
pub fn neighborhood(g: &BipartiteGraph<f64>, a0: &[UserId]) -> Vec<ObjectId> {
    let mut out = BTreeSet::new();
    for &u in a0 {
        for p in g.user_pairs(u) {
            out.insert(g.pair(p).object);
        }
    }
    out.into_iter().collect()
}

fn kl_balanced(a: &[f64], c: &[f64], fa: f64, fc: f64, eps: f64) -> f64 {
    if fa <= 0.0 || fc <= 0.0 {
        return 0.0;
    }
    let k = a.len() as f64;
    let na: f64 = a.iter().sum::<f64>() + eps * k;
    let nc: f64 = c.iter().sum::<f64>() + eps * k;
    let mut kl = 0.0;
    for i in 0..a.len() {
        let p = (a[i] + eps) / na;
        let q = (c[i] + eps) / nc;
        kl += p * (p / q).ln();
    }
    kl.max(0.0) * (fa / fc).min(fc / fa)
}

/// The objective at `members` with sinks restricted to the neighborhood of
/// `a0` and the rating scaling taken over the current set.
pub fn evaluate(ctx: &ScoreContext<'_, f64>, a0: &[UserId], members: &[UserId]) -> Eval {
    let g = ctx.graph();
    let cfg = ctx.config();
    let on: Signals = ctx.signals();
    let inside: HashSet<UserId> = members.iter().copied().collect();
    let sinks = neighborhood(g, a0);
    let neutral = cfg
        .neutral
        .clone()
        .unwrap_or_else(|| g.scale().default_neutral());
    let cats: Vec<u16> = (0..g.scale().categories() as u16)
        .filter(|c| !neutral.contains(c))
        .collect();

    let mut f_a = Vec::new();
    let mut alpha = Vec::new();
    let mut phi = Vec::new();
    let mut kappa_raw = Vec::new();
    for &v in &sinks {
        let (mut fa, mut fu, mut num) = (0.0, 0.0, 0.0);
        let mut any = false;
        let mut ta = vec![0.0; cats.len()];
        let mut tc = vec![0.0; cats.len()];
        for &p in g.object_pairs(v) {
            let p = p as usize;
            let w = g.weight(p);
            fu += w;
            let mine = inside.contains(&g.pair(p).user);
            if mine {
                fa += w;
                any = true;
                if let (true, Some(s)) = (on.phi, ctx.spikes(v)) {
                    for &t in g.pair_timestamps(p).unwrap() {
                        num += s.profile.event_weight(&s.hist, t);
                    }
                }
            }
            if on.kappa {
                for &r in g.pair_ratings(p).unwrap() {
                    if let Some(i) = cats.iter().position(|&c| c == r) {
                        if mine {
                            ta[i] += 1.0;
                        } else {
                            tc[i] += 1.0;
                        }
                    }
                }
            }
        }
        f_a.push(if any { fa } else { 0.0 });
        alpha.push(if on.alpha { (fa / fu).min(1.0) } else { 1.0 });
        phi.push(if !on.phi {
            1.0
        } else {
            match ctx.spikes(v) {
                Some(s) if any && s.profile.phi_denominator > 0.0 => (num / s.profile.phi_denominator).min(1.0),
                _ => 0.0,
            }
        });
        kappa_raw.push(if on.kappa && any {
            kl_balanced(&ta, &tc, fa, fu - fa, cfg.smoothing)
        } else {
            0.0
        });
    }
    let kmax = kappa_raw.iter().copied().fold(0.0, f64::max);
    let p: Vec<f64> = (0..sinks.len())
        .map(|j| {
            let kappa = if !on.kappa {
                1.0
            } else if kmax > 0.0 {
                (kappa_raw[j] / kmax).min(1.0)
            } else {
                0.0
            };
            cfg.base.powf(alpha[j] + phi[j] + kappa - 3.0)
        })
        .collect();

    let mut scores = Vec::new();
    let mut sorted: Vec<UserId> = members.to_vec();
    sorted.sort();
    for &u in &sorted {
        let mut s = 0.0;
        for q in g.user_pairs(u) {
            let v = g.pair(q).object;
            let j = sinks.binary_search(&v).unwrap();
            s += g.weight(q) * p[j];
        }
        scores.push((u, s));
    }
    let num: f64 = (0..sinks.len()).map(|j| f_a[j] * p[j]).sum();
    let den: f64 = members.len() as f64 + p.iter().sum::<f64>();
    Eval {
        sinks,
        f_a,
        p,
        scores,
        hs: num / den,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn default_ctx(g: &BipartiteGraph<f64>, signals: Signals) -> ScoreContext<'_, f64> {
    ScoreContext::new(
        g,
        ScoreConfig {
            signals,
            ..ScoreConfig::default()
        },
    )
    .unwrap()
}
