//! Detection metrics, accuracy-versus-density curves, the average-degree
//! peeling baseline and the runtime benchmark.

use std::collections::HashSet;
use std::hash::Hash;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::HoloScope;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ObjectId, UserId};
use crate::heap::PriorityTree;
use crate::scalar::Scalar;
use crate::synth::{self, InjectionConfig};

/// Accuracy a detector must reach for a density to count as detected.
pub const DETECTION_ACCURACY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of `predicted` against `truth`.
pub fn f_measure<I: Hash + Eq + Copy>(predicted: &[I], truth: &[I]) -> Result<Prf> {
    if truth.is_empty() {
        return Err(Error::EmptySet);
    }
    let pred: HashSet<I> = predicted.iter().copied().collect();
    let truth: HashSet<I> = truth.iter().copied().collect();
    if pred.is_empty() {
        return Ok(Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        });
    }
    let hit = pred.intersection(&truth).count() as f64;
    let precision = hit / pred.len() as f64;
    let recall = hit / truth.len() as f64;
    let f1 = if hit == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
    })
}

/// Rank-based ROC AUC with tied scores sharing their average rank.
pub fn roc_auc<T: Scalar>(scores: &[T], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp_s(&scores[b]));
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub density: f64,
    /// `None` when the run at this density failed.
    pub accuracy: Option<f64>,
}

/// Accuracy against injected density.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyCurve {
    /// Sorted by density, ascending.
    pub points: Vec<CurvePoint>,
    pub area: f64,
}

impl AccuracyCurve {
    /// Curve from `(density, accuracy)` pairs; the area is the trapezoid
    /// integral over the present points with `(0, 0)` prepended.
    pub fn new(points: impl IntoIterator<Item = (f64, Option<f64>)>) -> Result<Self> {
        let mut points: Vec<CurvePoint> = points
            .into_iter()
            .map(|(density, accuracy)| CurvePoint { density, accuracy })
            .collect();
        for p in &points {
            if !(p.density > 0.0 && p.density <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "density {} outside (0, 1]",
                    p.density
                )));
            }
            if let Some(a) = p.accuracy {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::InvalidParameter(format!("accuracy {a} outside [0, 1]")));
                }
            }
        }
        points.sort_by(|a, b| a.density.total_cmp(&b.density));
        if points.windows(2).any(|w| w[0].density == w[1].density) {
            return Err(Error::InvalidParameter("repeated density".into()));
        }
        let mut area = 0.0;
        let mut prev = (0.0, 0.0);
        for p in &points {
            if let Some(a) = p.accuracy {
                area += (p.density - prev.0) * (a + prev.1) / 2.0;
                prev = (p.density, a);
            }
        }
        Ok(Self { points, area })
    }

    /// Smallest density whose accuracy reaches `threshold`.
    pub fn lowest_detection_density(&self, threshold: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.accuracy.is_some_and(|a| a >= threshold))
            .map(|p| p.density)
    }
}

/// `n` log-spaced values from `lo` to `hi`, inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    // exp(ln x) is not always x
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// A detector output reduced to what the metrics need.
#[derive(Clone, Debug)]
pub struct Scored {
    pub users: Vec<UserId>,
    pub object_scores: Vec<f64>,
}

pub trait BlockDetector: Sync {
    fn name(&self) -> &str;
    fn run(&self, g: &BipartiteGraph<f64>) -> Result<Scored>;
}

impl BlockDetector for HoloScope<f64> {
    fn name(&self) -> &str {
        "holoscope"
    }

    fn run(&self, g: &BipartiteGraph<f64>) -> Result<Scored> {
        let r = self.detect(g)?;
        Ok(Scored {
            object_scores: r.object_score_vector(g.n_objects()),
            users: r.users,
        })
    }
}

/// Result of average-degree peeling.
#[derive(Clone, Debug, PartialEq)]
pub struct PeelResult {
    pub users: Vec<UserId>,
    pub objects: Vec<ObjectId>,
    /// `|E(A, B)| / (|A| + |B|)` of the returned block.
    pub density: f64,
    /// Position at which each object was peeled, later is higher.
    pub object_order: Vec<usize>,
}

/// Greedy peeling of the node with the smallest remaining degree (events
/// counted with multiplicity), over users and objects jointly, keeping the
/// block with the highest average degree.
pub fn avg_degree_baseline<T: Scalar>(g: &BipartiteGraph<T>) -> Result<PeelResult> {
    let nu = g.n_users();
    let no = g.n_objects();
    if g.n_pairs() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut degree = vec![0u64; nu + no];
    for p in 0..g.n_pairs() {
        let pair = g.pair(p);
        degree[pair.user.index()] += pair.multiplicity as u64;
        degree[nu + pair.object.index()] += pair.multiplicity as u64;
    }
    let mut edges: u64 = degree[..nu].iter().sum();
    let mut heap = PriorityTree::from_items(nu + no, (0..nu + no).map(|i| (i, degree[i] as f64)));
    let mut alive = vec![true; nu + no];
    let mut removed_order = Vec::with_capacity(nu + no);
    let mut best = (edges as f64 / (nu + no) as f64, 0usize);
    let mut remaining = nu + no;
    while let Some((i, _)) = heap.pop() {
        alive[i] = false;
        removed_order.push(i);
        remaining -= 1;
        edges -= degree[i];
        if i < nu {
            for p in g.user_pairs(UserId(i as u32)) {
                let pair = g.pair(p);
                let j = nu + pair.object.index();
                if alive[j] {
                    degree[j] -= pair.multiplicity as u64;
                    heap.update(j, degree[j] as f64);
                }
            }
        } else {
            for &p in g.object_pairs(ObjectId((i - nu) as u32)) {
                let pair = g.pair(p as usize);
                let j = pair.user.index();
                if alive[j] {
                    degree[j] -= pair.multiplicity as u64;
                    heap.update(j, degree[j] as f64);
                }
            }
        }
        degree[i] = 0;
        if remaining == 0 {
            break;
        }
        let d = edges as f64 / remaining as f64;
        if d > best.0 {
            best = (d, removed_order.len());
        }
    }
    let gone: HashSet<usize> = removed_order[..best.1].iter().copied().collect();
    let users = (0..nu)
        .filter(|i| !gone.contains(i))
        .map(|i| UserId(i as u32))
        .collect();
    let objects = (0..no)
        .filter(|j| !gone.contains(&(nu + j)))
        .map(|j| ObjectId(j as u32))
        .collect();
    let mut object_order = vec![0usize; no];
    for (pos, &i) in removed_order.iter().enumerate() {
        if i >= nu {
            object_order[i - nu] = pos;
        }
    }
    Ok(PeelResult {
        users,
        objects,
        density: best.0,
        object_order,
    })
}

/// The average-degree baseline as a [`BlockDetector`]; objects are ranked by
/// how late they were peeled.
#[derive(Clone, Copy, Debug, Default)]
pub struct AvgDegree;

impl BlockDetector for AvgDegree {
    fn name(&self) -> &str {
        "avg-degree"
    }

    fn run(&self, g: &BipartiteGraph<f64>) -> Result<Scored> {
        let r = avg_degree_baseline(g)?;
        Ok(Scored {
            users: r.users,
            object_scores: r.object_order.iter().map(|&x| x as f64).collect(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub density: f64,
    pub n_fraudsters: usize,
    pub user: Option<Prf>,
    pub object_auc: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub detector: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    pub user_curve: AccuracyCurve,
    pub object_curve: AccuracyCurve,
    pub user_lowest_density: Option<f64>,
    pub object_lowest_density: Option<f64>,
}

/// Injects a fraud block at every density and scores `detector` on it.
///
/// The number of fraudsters at density `d` is `round(ratings_per_object / d)`.
/// Point `i` draws its randomness from stream `i` of `seed`, so points are
/// independent of evaluation order. A failed point is recorded without an
/// accuracy and the sweep continues.
pub fn density_sweep<D: BlockDetector + ?Sized>(
    base: &BipartiteGraph<f64>,
    densities: &[f64],
    template: &InjectionConfig,
    detector: &D,
    seed: u64,
) -> Result<SweepReport> {
    if densities.is_empty() {
        return Err(Error::InvalidParameter("empty density grid".into()));
    }
    if let Some(d) = densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::InvalidParameter(format!("density {d} outside (0, 1]")));
    }
    let points: Vec<SweepPoint> = densities
        .par_iter()
        .enumerate()
        .map(|(i, &density)| sweep_point(base, density, template, detector, synth::stream_seed(seed, i as u64)))
        .collect();
    let user_curve = AccuracyCurve::new(points.iter().map(|p| (p.density, p.user.map(|u| u.f1))))?;
    let object_curve = AccuracyCurve::new(points.iter().map(|p| (p.density, p.object_auc)))?;
    Ok(SweepReport {
        detector: detector.name().to_string(),
        seed,
        user_lowest_density: user_curve.lowest_detection_density(DETECTION_ACCURACY),
        object_lowest_density: object_curve.lowest_detection_density(DETECTION_ACCURACY),
        points,
        user_curve,
        object_curve,
    })
}

fn sweep_point<D: BlockDetector + ?Sized>(
    base: &BipartiteGraph<f64>,
    density: f64,
    template: &InjectionConfig,
    detector: &D,
    seed: u64,
) -> SweepPoint {
    let n_fraudsters = (template.ratings_per_object as f64 / density).round() as usize;
    let start = Instant::now();
    let cfg = InjectionConfig {
        n_fraudsters,
        seed,
        ..template.clone()
    };
    let outcome = (|| -> Result<(Prf, f64)> {
        let (g, truth) = synth::inject(base, &cfg)?;
        let (users, objects) = truth.resolve(&g)?;
        let scored = detector.run(&g)?;
        let prf = f_measure(&scored.users, &users)?;
        let mut positive = vec![false; g.n_objects()];
        for v in objects {
            positive[v.index()] = true;
        }
        let auc = roc_auc(&scored.object_scores, &positive)?;
        Ok((prf, auc))
    })();
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((prf, auc)) => SweepPoint {
            density,
            n_fraudsters,
            user: Some(prf),
            object_auc: Some(auc),
            seconds,
            error: None,
        },
        Err(e) => {
            log::warn!("sweep point at density {density} failed: {e}");
            SweepPoint {
                density,
                n_fraudsters,
                user: None,
                object_auc: None,
                seconds,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("need two points for a slope".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive values".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values equal".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub edges: usize,
    pub users: usize,
    pub objects: usize,
    pub seconds: f64,
    pub n_seeds: usize,
    pub max_seed_size: usize,
    pub seed_cap: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slope: Option<f64>,
}

/// Times the full detector on generated graphs of `sizes` events each.
pub fn benchmark(sizes: &[usize], detector: &HoloScope<f64>, seed: u64) -> Result<BenchReport> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no benchmark sizes".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("benchmark sizes must increase".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let g = synth::bench_graph(n, synth::stream_seed(seed, i as u64))?;
        let start = Instant::now();
        let prepared = detector.prepare(&g)?;
        let seeds = detector.seeds(&prepared)?;
        detector.detect_with_seeds(&prepared, &seeds)?;
        let seconds = start.elapsed().as_secs_f64();
        let cap = ((g.n_users() as f64).powf(detector.config.cap_exponent).floor() as usize).max(1);
        let row = BenchRow {
            edges: g.n_events(),
            users: g.n_users(),
            objects: g.n_objects(),
            seconds,
            n_seeds: seeds.len(),
            max_seed_size: seeds.iter().map(Vec::len).max().unwrap_or(0),
            seed_cap: cap,
        };
        log::info!(
            "bench |E|={} took {:.3}s, {} seeds, max seed {} (cap {})",
            row.edges,
            row.seconds,
            row.n_seeds,
            row.max_seed_size,
            row.seed_cap
        );
        rows.push(row);
    }
    let slope = if rows.len() >= 2 {
        Some(log_log_slope(
            &rows.iter().map(|r| (r.edges as f64, r.seconds.max(1e-9))).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(BenchReport { rows, slope })
}
