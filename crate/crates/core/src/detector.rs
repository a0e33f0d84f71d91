//! Greedy shaving of a seed set, SVD seeding, tensor matricization and the
//! end-to-end detector.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ObjectId, UserId};
use crate::heap::PriorityTree;
use crate::scalar::Scalar;
use crate::spectral::{truncated_svd_best_effort, SparseMatrix, SvdConfig};
use crate::suspiciousness::{compute_spikes, ContrastState, ScoreConfig, ScoreContext, Signals, SinkSpikes};
use crate::temporal::{drop_column_weights, drop_edge_weight};

pub const DEFAULT_NUM_SEEDS: usize = 10;
pub const DEFAULT_CAP_EXPONENT: f64 = 1.0 / 1.6;
pub const DEFAULT_TIME_BIN: i64 = 86_400;

/// Maps rating values onto coarse clusters for matricization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingClusters {
    /// Ratings at or below this value are "low".
    pub low_max: f64,
    /// Ratings at or above this value are "high"; between is "neutral".
    pub high_min: f64,
}

impl Default for RatingClusters {
    fn default() -> Self {
        Self {
            low_max: 2.0,
            high_min: 4.0,
        }
    }
}

impl RatingClusters {
    pub fn cluster(&self, rating: f64) -> u8 {
        if rating <= self.low_max {
            0
        } else if rating >= self.high_min {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig<T> {
    pub score: ScoreConfig<T>,
    pub num_seeds: usize,
    pub cap_exponent: f64,
    pub time_bin: i64,
    pub rating_clusters: RatingClusters,
    /// Seed from the (object, time bin, rating cluster) matrix when the time
    /// signal is available.
    pub matricize: bool,
    pub svd_tol: f64,
    pub svd_max_iter: usize,
    pub svd_seed: u64,
    pub trace: bool,
    /// Compare the incremental state against a rebuild after every step.
    pub verify: bool,
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        Self {
            score: ScoreConfig::default(),
            num_seeds: DEFAULT_NUM_SEEDS,
            cap_exponent: DEFAULT_CAP_EXPONENT,
            time_bin: DEFAULT_TIME_BIN,
            rating_clusters: RatingClusters::default(),
            matricize: true,
            svd_tol: 1e-6,
            svd_max_iter: 300,
            svd_seed: crate::spectral::DEFAULT_SEED,
            trace: false,
            verify: false,
        }
    }
}

/// One point of a shaving trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceStep<T> {
    /// User peeled to reach this set; `None` for the seed itself.
    pub removed: Option<UserId>,
    pub size: usize,
    pub hs: T,
}

/// Outcome of one shaving run or of the whole detector.
#[derive(Clone, Debug, Serialize)]
pub struct DetectionResult<T> {
    /// Best user set, in index order.
    pub users: Vec<UserId>,
    pub hs: T,
    /// `(v, f_A*(v) P(v|A*))` for objects adjacent to the seed, highest first.
    pub sink_scores: Vec<(ObjectId, T)>,
    /// `S(u)` at the best set.
    pub user_scores: Vec<(UserId, T)>,
    /// The shaving trajectory when tracing; the first step is the seed.
    pub trace: Option<Vec<TraceStep<T>>>,
    /// Largest objective seen along the trajectory.
    pub trajectory_max: T,
    pub seed_index: usize,
    pub seed_size: usize,
    pub signals: Signals,
}

impl<T: Scalar> DetectionResult<T> {
    /// Dense per-object score vector, zero for untouched objects.
    pub fn object_score_vector(&self, n_objects: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n_objects];
        for &(v, s) in &self.sink_scores {
            out[v.index()] = s;
        }
        out
    }

    /// Dense per-user score vector: `S(u)` for members of the best set and
    /// zero elsewhere.
    pub fn user_score_vector(&self, n_users: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n_users];
        for &(u, s) in &self.user_scores {
            out[u.index()] = s;
        }
        out
    }
}

/// Peels users from `a0` one at a time, lowest `S(u)` first, and returns the
/// set with the highest objective seen.
pub fn greedy_shaving<'a, T: Scalar>(
    ctx: &'a ScoreContext<'a, T>,
    a0: &[UserId],
    trace: bool,
    verify: bool,
) -> Result<DetectionResult<T>> {
    let mut state = ContrastState::new(ctx, a0)?;
    let n = state.n_local_users();
    let mut heap = PriorityTree::from_items(n, (0..n).map(|i| (i, state.score_local(i))));
    let mut removed: Vec<UserId> = Vec::with_capacity(n);
    let start = state.hs()?;
    let mut best_hs = start;
    let mut best_step = 0usize;
    let mut steps = trace.then(|| {
        vec![TraceStep {
            removed: None,
            size: state.len(),
            hs: start,
        }]
    });

    while let Some((i, _)) = heap.pop() {
        if state.len() == 1 {
            break;
        }
        let u = state.user_at(i);
        let touched = state.remove_user(u)?.to_vec();
        removed.push(u);
        for j in touched {
            let j = j as usize;
            if heap.contains(j) {
                heap.update(j, state.score_local(j));
            }
        }
        let hs = state.hs()?;
        if verify {
            let drift = state.drift()?;
            if drift > T::lit(1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "incremental state drifted by {drift} after {} removals",
                    removed.len()
                )));
            }
        }
        if let Some(s) = steps.as_mut() {
            s.push(TraceStep {
                removed: Some(u),
                size: state.len(),
                hs,
            });
        }
        if hs > best_hs {
            best_hs = hs;
            best_step = removed.len();
        }
    }

    let mut seed: Vec<UserId> = a0.to_vec();
    seed.sort_unstable();
    seed.dedup();
    let gone: std::collections::HashSet<UserId> = removed[..best_step].iter().copied().collect();
    let best: Vec<UserId> = seed.iter().copied().filter(|u| !gone.contains(u)).collect();
    let final_state = ContrastState::from_subset(ctx, &seed, &best)?;
    let mut sink_scores = final_state.sink_scores();
    sink_scores.sort_by(|a, b| b.1.total_cmp_s(&a.1).then(a.0.cmp(&b.0)));
    Ok(DetectionResult {
        hs: final_state.hs()?,
        users: best,
        sink_scores,
        user_scores: final_state.user_scores(),
        trace: steps,
        trajectory_max: best_hs,
        seed_index: 0,
        seed_size: seed.len(),
        signals: ctx.signals(),
    })
}

/// Seed orderings from one singular vector over `n` users.
///
/// Entries above `1/sqrt(n)` in magnitude are kept, largest first, up to
/// `floor(n^cap_exponent)` users. A vector with entries of both signs yields
/// one seed per sign.
pub fn seeds_from_vector<T: Scalar>(vector: &[T], cap_exponent: f64) -> Vec<Vec<UserId>> {
    let n = vector.len();
    if n == 0 {
        return Vec::new();
    }
    let threshold = T::one() / T::from_count(n).sqrt();
    let cap = ((n as f64).powf(cap_exponent).floor() as usize).max(1);
    let has_pos = vector.iter().any(|&x| x > threshold);
    let has_neg = vector.iter().any(|&x| -x > threshold);
    let pick = |sign: T| -> Vec<UserId> {
        let mut idx: Vec<usize> = (0..n).filter(|&i| vector[i] * sign > threshold).collect();
        idx.sort_by(|&a, &b| (vector[b] * sign).total_cmp_s(&(vector[a] * sign)).then(a.cmp(&b)));
        idx.truncate(cap);
        idx.into_iter().map(|i| UserId(i as u32)).collect()
    };
    let mut out = Vec::new();
    if has_pos {
        out.push(pick(T::one()));
    }
    if has_neg {
        out.push(pick(-T::one()));
    }
    out
}

/// Seeds from the top-`k` left singular vectors of `m` (rows are users).
/// Duplicate seeds are dropped; order follows the singular values.
pub fn svd_seeds<T: Scalar>(m: &SparseMatrix<T>, k: usize, cap_exponent: f64, svd: &SvdConfig) -> Result<Vec<Vec<UserId>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one singular vector".into()));
    }
    let rank = k.min(m.rows().min(m.cols()));
    if rank < k {
        log::warn!("only {rank} singular vectors available, {k} requested");
    }
    let cfg = SvdConfig { k: rank, ..svd.clone() };
    let decomposition = truncated_svd_best_effort(m, &cfg)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for u in &decomposition.u {
        for seed in seeds_from_vector(u, cap_exponent) {
            let mut key = seed.clone();
            key.sort_unstable();
            if !seed.is_empty() && seen.insert(key) {
                out.push(seed);
            }
        }
    }
    Ok(out)
}

/// One column of a matricized tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ColumnKey {
    pub object: ObjectId,
    pub time_bin: i64,
    pub cluster: u8,
}

#[derive(Clone, Debug)]
pub struct Matricized<T> {
    pub matrix: SparseMatrix<T>,
    pub columns: Vec<ColumnKey>,
}

/// Users by observed (object, time bin, rating cluster) triples; cells count
/// events and each column carries its object's weight `sigma`.
pub fn matricize<T: Scalar>(g: &BipartiteGraph<T>, time_bin: i64, clusters: &RatingClusters) -> Result<Matricized<T>> {
    if !g.has_timestamps() {
        return Err(Error::MissingTimestamps);
    }
    if time_bin <= 0 {
        return Err(Error::InvalidParameter("time bin must be positive".into()));
    }
    let scale = *g.scale();
    let mut cells: BTreeMap<(ColumnKey, u32), usize> = BTreeMap::new();
    for p in 0..g.n_pairs() {
        let pair = g.pair(p);
        let ts = g.pair_timestamps(p).unwrap_or(&[]);
        let ratings = g.pair_ratings(p);
        for (e, &t) in ts.iter().enumerate() {
            let cluster = match ratings {
                Some(r) => clusters.cluster(scale.value(r[e])),
                None => 0,
            };
            let key = ColumnKey {
                object: pair.object,
                time_bin: t.div_euclid(time_bin),
                cluster,
            };
            *cells.entry((key, pair.user.0)).or_insert(0) += 1;
        }
    }
    let mut columns: Vec<ColumnKey> = cells.keys().map(|(k, _)| *k).collect();
    columns.dedup();
    let mut triplets = Vec::with_capacity(cells.len());
    let mut col = 0usize;
    for ((key, user), count) in cells {
        while columns[col] != key {
            col += 1;
        }
        triplets.push((user as usize, col, T::from_count(count) * g.sigma(key.object)));
    }
    let matrix = SparseMatrix::from_triplets(g.n_users(), columns.len(), &triplets)?;
    Ok(Matricized { matrix, columns })
}

/// End-to-end detector: drop-weighted columns, spectral seeds, greedy
/// shaving from each seed.
#[derive(Clone, Debug)]
pub struct HoloScope<T> {
    pub config: DetectorConfig<T>,
}

impl<T: Scalar> Default for HoloScope<T> {
    fn default() -> Self {
        Self::new(DetectorConfig::default())
    }
}

/// Graph with drop-weighted columns plus everything computed on the way.
pub struct Prepared<T> {
    pub graph: BipartiteGraph<T>,
    pub spikes: Option<Vec<Option<SinkSpikes<T>>>>,
}

impl<T: Scalar> HoloScope<T> {
    pub fn new(config: DetectorConfig<T>) -> Self {
        Self { config }
    }

    /// Weights each object column by its sudden-drop suspiciousness when the
    /// time signal is on and timestamps exist.
    pub fn prepare(&self, g: &BipartiteGraph<T>) -> Result<Prepared<T>> {
        let mut graph = g.clone();
        if !(self.config.score.signals.phi && g.has_timestamps()) {
            return Ok(Prepared { graph, spikes: None });
        }
        let spikes = compute_spikes(g)?;
        let weights: Vec<T> = spikes
            .iter()
            .map(|s| drop_edge_weight(s.as_ref().and_then(|s| s.profile.max_drop.as_ref())))
            .collect();
        graph.set_column_weights(drop_column_weights(&weights))?;
        Ok(Prepared {
            graph,
            spikes: Some(spikes),
        })
    }

    /// Seeds for a prepared graph.
    pub fn seeds(&self, prepared: &Prepared<T>) -> Result<Vec<Vec<UserId>>> {
        let g = &prepared.graph;
        let matrix = if self.config.matricize && prepared.spikes.is_some() {
            matricize(g, self.config.time_bin, &self.config.rating_clusters)?.matrix
        } else {
            SparseMatrix::from_graph(g)
        };
        let svd = SvdConfig {
            tol: self.config.svd_tol,
            max_iter: self.config.svd_max_iter,
            seed: self.config.svd_seed,
            ..SvdConfig::new(self.config.num_seeds)
        };
        svd_seeds(&matrix, self.config.num_seeds, self.config.cap_exponent, &svd)
    }

    pub fn detect(&self, g: &BipartiteGraph<T>) -> Result<DetectionResult<T>> {
        let prepared = self.prepare(g)?;
        let seeds = self.seeds(&prepared)?;
        self.detect_with_seeds(&prepared, &seeds)
    }

    /// Shaves every seed and keeps the best result; ties go to the earlier
    /// seed.
    pub fn detect_with_seeds(&self, prepared: &Prepared<T>, seeds: &[Vec<UserId>]) -> Result<DetectionResult<T>> {
        if prepared.graph.n_pairs() == 0 {
            return Err(Error::EmptyInput);
        }
        let ctx = ScoreContext::with_spikes(
            &prepared.graph,
            self.config.score.clone(),
            prepared.spikes.clone(),
        )?;
        let results: Vec<Result<DetectionResult<T>>> = seeds
            .par_iter()
            .map(|seed| greedy_shaving(&ctx, seed, self.config.trace, self.config.verify))
            .collect();
        let mut best: Option<DetectionResult<T>> = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(mut r) => {
                    r.seed_index = i;
                    if best.as_ref().is_none_or(|b| r.hs > b.hs) {
                        best = Some(r);
                    }
                }
                Err(Error::DegenerateSeed) => log::warn!("seed {i} has no edges, skipped"),
                Err(e) => return Err(e),
            }
        }
        best.ok_or(Error::AllSeedsDegenerate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RatingScale;

    fn graph(n_users: usize, n_objects: usize, edges: &[(u32, u32)]) -> BipartiteGraph<f64> {
        let ev: Vec<_> = edges.iter().map(|&(u, v)| (u, v, None, None)).collect();
        BipartiteGraph::from_indexed(n_users, n_objects, &ev, RatingScale::five_star()).unwrap()
    }

    #[test]
    fn single_user_seed() {
        let g = graph(2, 2, &[(0, 0), (0, 1), (1, 1)]);
        let ctx = ScoreContext::new(&g, ScoreConfig::default()).unwrap();
        let r = greedy_shaving(&ctx, &[UserId(0)], true, true).unwrap();
        assert_eq!(r.users, vec![UserId(0)]);
        assert_eq!(r.trace.unwrap().len(), 1);
    }

    #[test]
    fn isolated_seed_is_degenerate() {
        let g = graph(3, 2, &[(0, 0), (1, 1)]);
        let ctx = ScoreContext::new(&g, ScoreConfig::default()).unwrap();
        assert!(matches!(
            greedy_shaving(&ctx, &[UserId(2)], false, false),
            Err(Error::DegenerateSeed)
        ));
    }

    #[test]
    fn seed_cap_arithmetic() {
        let cap = (10_000f64).powf(DEFAULT_CAP_EXPONENT).floor() as usize;
        assert_eq!(cap, 316);
        let v = vec![0.02f64; 10_000];
        let seeds = seeds_from_vector(&v, DEFAULT_CAP_EXPONENT);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].len(), 316);
    }

    #[test]
    fn mixed_sign_vector_gives_two_seeds() {
        let v = [0.6f64, -0.6, 0.5, -0.1, 0.0, 0.1];
        let seeds = seeds_from_vector(&v, 1.0);
        assert_eq!(seeds, vec![vec![UserId(0), UserId(2)], vec![UserId(1)]]);
    }

    #[test]
    fn rank_one_seed_is_the_block() {
        let mut edges = Vec::new();
        for u in 3..7 {
            for v in 0..5 {
                edges.push((u, v));
            }
        }
        let g = graph(20, 10, &edges);
        let m = SparseMatrix::from_graph(&g);
        let seeds = svd_seeds(&m, 1, DEFAULT_CAP_EXPONENT, &SvdConfig::new(1)).unwrap();
        let mut s = seeds[0].clone();
        s.sort();
        assert_eq!(s, (3..7).map(UserId).collect::<Vec<_>>());
    }

    #[test]
    fn matricize_counts_triples() {
        let ev = vec![
            (0u32, 0u32, Some(10i64), Some(4u16)),
            (1, 0, Some(20), Some(4)),
            (1, 0, Some(90_000), Some(4)),
        ];
        let g = BipartiteGraph::<f64>::from_indexed(2, 1, &ev, RatingScale::five_star()).unwrap();
        let m = matricize(&g, DEFAULT_TIME_BIN, &RatingClusters::default()).unwrap();
        assert_eq!(m.columns.len(), 2);
        assert_eq!(m.matrix.col_sums(), vec![2.0, 1.0]);
        let plain = graph(1, 1, &[(0, 0)]);
        assert!(matches!(
            matricize(&plain, DEFAULT_TIME_BIN, &RatingClusters::default()),
            Err(Error::MissingTimestamps)
        ));
    }
}
