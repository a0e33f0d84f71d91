//! Synthetic inputs: hyperbolic communities, planted blocks, a rating-site
//! background, and fraud injection with ground truth.
//!
//! Every generator takes one `u64` seed. Independent parts draw from
//! separate ChaCha streams of that seed, so adding draws to one part never
//! shifts another.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, EdgeRecord, ObjectId, RatingScale, UserId};
use crate::scalar::Scalar;

/// Generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for sub-task `stream` of `seed`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    rng_for(seed, stream).next_u64()
}

type Event = (u32, u32, Option<i64>, Option<u16>);

/// Staircase community: row `i` spans columns `[0, w_i)` with
/// `w_i = min(n_objects, round(top_width * (i + 1)^-exponent))`, and each
/// cell of that region is filled independently with probability `fill`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicConfig {
    pub n_users: usize,
    pub n_objects: usize,
    pub exponent: f64,
    /// Target volume density inside the staircase region.
    pub fill: f64,
    pub top_width: usize,
    pub seed: u64,
}

impl HyperbolicConfig {
    pub fn new(n_users: usize, n_objects: usize, exponent: f64, fill: f64, seed: u64) -> Self {
        Self {
            n_users,
            n_objects,
            exponent,
            fill,
            top_width: n_objects,
            seed,
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.n_users)
            .map(|i| {
                let w = self.top_width as f64 * ((i + 1) as f64).powf(-self.exponent);
                (w.round() as usize).clamp(1, self.n_objects)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_objects == 0 || self.top_width == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidParameter("exponent must be non-negative".into()));
        }
        if !(self.fill > 0.0 && self.fill <= 1.0) {
            return Err(Error::InfeasibleDensity { density: self.fill });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Hyperbolic<T> {
    pub graph: BipartiteGraph<T>,
    pub widths: Vec<usize>,
    /// Cells inside the staircase.
    pub region: usize,
    /// Realized edges / region.
    pub density: f64,
}

fn staircase_edges(cfg: &HyperbolicConfig, rng: &mut ChaCha8Rng, user_offset: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (i, &w) in cfg.widths().iter().enumerate() {
        for j in 0..w {
            if rng.random::<f64>() < cfg.fill {
                out.push((user_offset + i as u32, j as u32));
            }
        }
    }
    out
}

/// A single staircase community.
pub fn gen_hyperbolic<T: Scalar>(cfg: &HyperbolicConfig) -> Result<Hyperbolic<T>> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, 0);
    let edges = staircase_edges(cfg, &mut rng, 0);
    if edges.is_empty() {
        return Err(Error::InfeasibleDensity { density: cfg.fill });
    }
    let widths = cfg.widths();
    let region: usize = widths.iter().sum();
    let events: Vec<Event> = edges.iter().map(|&(u, v)| (u, v, None, None)).collect();
    let graph = BipartiteGraph::from_indexed(cfg.n_users, cfg.n_objects, &events, RatingScale::five_star())?;
    Ok(Hyperbolic {
        density: edges.len() as f64 / region as f64,
        graph,
        widths,
        region,
    })
}

/// Staircase community plus a separate dense rectangle whose members add
/// camouflage edges toward popular community objects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_users: usize,
    pub n_objects: usize,
    pub exponent: f64,
    pub fill: f64,
    pub block_users: usize,
    pub block_objects: usize,
    pub block_density: f64,
    /// Camouflage edges as a fraction of block edges.
    pub camouflage_ratio: f64,
    /// Uniform random edges over the whole matrix.
    pub noise_edges: usize,
    pub seed: u64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            n_users: 5000,
            n_objects: 5000,
            exponent: 0.5,
            fill: 0.84,
            block_users: 200,
            block_objects: 200,
            block_density: 0.6,
            camouflage_ratio: 0.2,
            noise_edges: 5000,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trap<T> {
    pub graph: BipartiteGraph<T>,
    pub block_users: Vec<UserId>,
    pub block_objects: Vec<ObjectId>,
    /// Realized density inside the staircase and inside the rectangle.
    pub community_density: f64,
    pub block_density: f64,
}

/// The staircase occupies users `[0, n_users - block_users)` and objects
/// `[0, n_objects - block_objects)`; the rectangle takes the remaining
/// corner.
pub fn hyperbolic_trap<T: Scalar>(cfg: &TrapConfig) -> Result<Trap<T>> {
    if cfg.block_users >= cfg.n_users || cfg.block_objects >= cfg.n_objects {
        return Err(Error::InvalidParameter("block must be smaller than the graph".into()));
    }
    if !(cfg.block_density > 0.0 && cfg.block_density <= 1.0) {
        return Err(Error::InfeasibleDensity {
            density: cfg.block_density,
        });
    }
    let cu = cfg.n_users - cfg.block_users;
    let co = cfg.n_objects - cfg.block_objects;
    let community = HyperbolicConfig::new(cu, co, cfg.exponent, cfg.fill, cfg.seed);
    community.validate()?;
    let mut rng = rng_for(cfg.seed, 0);
    let mut edges = staircase_edges(&community, &mut rng, 0);
    let region: usize = community.widths().iter().sum();
    let community_density = edges.len() as f64 / region as f64;

    let mut col_degree = vec![0usize; co];
    for &(_, v) in &edges {
        col_degree[v as usize] += 1;
    }

    let mut rng = rng_for(cfg.seed, 1);
    let mut block = 0usize;
    for i in 0..cfg.block_users {
        for j in 0..cfg.block_objects {
            if rng.random::<f64>() < cfg.block_density {
                edges.push(((cu + i) as u32, (co + j) as u32));
                block += 1;
            }
        }
    }
    let block_density = block as f64 / (cfg.block_users * cfg.block_objects) as f64;

    let camo = (cfg.camouflage_ratio * block as f64).round() as usize;
    if camo > 0 {
        let mut rng = rng_for(cfg.seed, 2);
        let weights: Vec<f64> = col_degree.iter().map(|&d| d as f64).collect();
        let pick = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidParameter(format!("camouflage weights: {e}")))?;
        for _ in 0..camo {
            let u = cu + rng.random_range(0..cfg.block_users);
            let v = pick.sample(&mut rng);
            edges.push((u as u32, v as u32));
        }
    }

    let mut rng = rng_for(cfg.seed, 3);
    for _ in 0..cfg.noise_edges {
        let u = rng.random_range(0..cfg.n_users);
        let v = rng.random_range(0..cfg.n_objects);
        edges.push((u as u32, v as u32));
    }

    let events: Vec<Event> = edges.iter().map(|&(u, v)| (u, v, None, None)).collect();
    let graph = BipartiteGraph::from_indexed(cfg.n_users, cfg.n_objects, &events, RatingScale::five_star())?;
    Ok(Trap {
        graph,
        block_users: (cu..cfg.n_users).map(|i| UserId(i as u32)).collect(),
        block_objects: (co..cfg.n_objects).map(|j| ObjectId(j as u32)).collect(),
        community_density,
        block_density,
    })
}

/// Uniform random background with one planted dense block in the first
/// `block_users` rows and `block_objects` columns.
pub fn planted_block<T: Scalar>(
    n_users: usize,
    n_objects: usize,
    block_users: usize,
    block_objects: usize,
    block_density: f64,
    background_density: f64,
    seed: u64,
) -> Result<BipartiteGraph<T>> {
    if block_users > n_users || block_objects > n_objects {
        return Err(Error::InvalidParameter("block larger than the graph".into()));
    }
    let mut rng = rng_for(seed, 0);
    let mut events: Vec<Event> = Vec::new();
    for u in 0..n_users {
        for v in 0..n_objects {
            let p = if u < block_users && v < block_objects {
                block_density
            } else {
                background_density
            };
            if rng.random::<f64>() < p {
                events.push((u as u32, v as u32, None, None));
            }
        }
    }
    BipartiteGraph::from_indexed(n_users, n_objects, &events, RatingScale::five_star())
}

/// Rating-site background: power-law user activity, power-law object
/// popularity, object launch dates spread over the span, and half-star
/// ratings around a per-object quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundConfig {
    pub n_users: usize,
    pub n_objects: usize,
    pub n_events: usize,
    pub user_exponent: f64,
    pub object_exponent: f64,
    pub start: i64,
    pub span_seconds: i64,
    pub seed: u64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            n_users: 10_000,
            n_objects: 5_000,
            n_events: 100_000,
            user_exponent: 0.8,
            object_exponent: 0.9,
            start: 1_300_000_000,
            span_seconds: 3 * 365 * 86_400,
            seed: 11,
        }
    }
}

fn power_law_weights(n: usize, exponent: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|r| ((r + 1) as f64).powf(-exponent)).collect();
    w.shuffle(rng);
    w
}

pub fn gen_background<T: Scalar>(cfg: &BackgroundConfig) -> Result<BipartiteGraph<T>> {
    if cfg.n_users == 0 || cfg.n_objects == 0 || cfg.n_events == 0 || cfg.span_seconds <= 0 {
        return Err(Error::InvalidParameter("background sizes must be positive".into()));
    }
    if cfg.start < 0 {
        return Err(Error::InvalidParameter("start time must be non-negative".into()));
    }
    let scale = RatingScale::half_star();
    let mut rng = rng_for(cfg.seed, 0);
    let user_w = power_law_weights(cfg.n_users, cfg.user_exponent, &mut rng);
    let object_w = power_law_weights(cfg.n_objects, cfg.object_exponent, &mut rng);
    let bad = |e: rand::distr::weighted::Error| Error::InvalidParameter(format!("weights: {e}"));
    let pick_user = WeightedIndex::new(&user_w).map_err(bad)?;
    let pick_object = WeightedIndex::new(&object_w).map_err(bad)?;

    let mut rng = rng_for(cfg.seed, 1);
    let quality_dist = Normal::new(3.6, 0.6).expect("valid normal");
    let launch: Vec<i64> = (0..cfg.n_objects)
        .map(|_| cfg.start + (rng.random::<f64>() * 0.8 * cfg.span_seconds as f64) as i64)
        .collect();
    let quality: Vec<f64> = (0..cfg.n_objects).map(|_| quality_dist.sample(&mut rng)).collect();

    let mut rng = rng_for(cfg.seed, 2);
    let noise = Normal::new(0.0, 0.9).expect("valid normal");
    let end = cfg.start + cfg.span_seconds;
    let mut events = Vec::with_capacity(cfg.n_events);
    for _ in 0..cfg.n_events {
        let u = pick_user.sample(&mut rng);
        let v = pick_object.sample(&mut rng);
        let t = rng.random_range(launch[v]..=end);
        let r = (quality[v] + noise.sample(&mut rng)).clamp(scale.min, scale.max);
        let cat = scale.category((r / scale.step).round() * scale.step).expect("on scale");
        events.push((u as u32, v as u32, Some(t), Some(cat)));
    }
    BipartiteGraph::from_indexed(cfg.n_users, cfg.n_objects, &events, scale)
}

/// Parameters of one fraud injection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    /// Target objects.
    pub n_objects: usize,
    pub ratings_per_object: usize,
    pub n_fraudsters: usize,
    pub max_target_indegree: usize,
    /// Camouflage edges as a fraction of fraud edges.
    pub camouflage_ratio: f64,
    pub rating_values: Vec<f64>,
    /// Multiplier applied to sampled inter-arrival gaps.
    pub compression: f64,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            n_objects: 200,
            ratings_per_object: 200,
            n_fraudsters: 2000,
            max_target_indegree: 100,
            camouflage_ratio: 0.2,
            rating_values: vec![4.0, 4.5],
            compression: 0.1,
            seed: 1,
        }
    }
}

impl InjectionConfig {
    /// `ratings_per_object / n_fraudsters`.
    pub fn density(&self) -> f64 {
        self.ratings_per_object as f64 / self.n_fraudsters as f64
    }
}

/// Injected node labels, by name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub users: Vec<String>,
    pub objects: Vec<String>,
}

impl GroundTruth {
    /// Node ids of the labels in `g`.
    pub fn resolve<T: Scalar>(&self, g: &BipartiteGraph<T>) -> Result<(Vec<UserId>, Vec<ObjectId>)> {
        let users = self
            .users
            .iter()
            .map(|n| g.user_index(n).ok_or_else(|| Error::UnknownUser(n.clone())))
            .collect::<Result<_>>()?;
        let objects = self
            .objects
            .iter()
            .map(|n| g.object_index(n).ok_or_else(|| Error::UnknownSink(n.clone())))
            .collect::<Result<_>>()?;
        Ok((users, objects))
    }

    /// Writes `id,side` rows with side `user` or `object`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,side")?;
        for u in &self.users {
            writeln!(w, "{u},user")?;
        }
        for o in &self.objects {
            writeln!(w, "{o},object")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line == "id,side") {
                continue;
            }
            let (id, side) = line.rsplit_once(',').ok_or_else(|| Error::Malformed {
                line: i + 1,
                message: "expected id,side".into(),
            })?;
            match side.trim() {
                "user" => out.users.push(id.to_string()),
                "object" => out.objects.push(id.to_string()),
                other => {
                    return Err(Error::Malformed {
                        line: i + 1,
                        message: format!("unknown side '{other}'"),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Adds a fraud block to `base`.
///
/// Targets are drawn uniformly from objects with at most
/// `max_target_indegree` events and fraudsters uniformly from all users.
/// Each target receives exactly `ratings_per_object` events, from distinct
/// fraudsters. Fraud timestamps start at a random time and advance by gaps
/// resampled from the base graph's global inter-arrival times, scaled by
/// `compression`. Camouflage events go from fraudsters to non-target objects
/// chosen in proportion to their indegree, at uniform times, with a rating
/// copied from a random existing rating of that object.
pub fn inject<T: Scalar>(base: &BipartiteGraph<T>, cfg: &InjectionConfig) -> Result<(BipartiteGraph<T>, GroundTruth)> {
    if cfg.n_objects == 0 || cfg.ratings_per_object == 0 || cfg.n_fraudsters == 0 {
        return Err(Error::InvalidParameter("injection counts must be positive".into()));
    }
    if cfg.ratings_per_object > cfg.n_fraudsters {
        return Err(Error::InfeasibleDensity {
            density: cfg.density(),
        });
    }
    if cfg.n_fraudsters > base.n_users() {
        return Err(Error::InvalidParameter(format!(
            "{} fraudsters requested from {} users",
            cfg.n_fraudsters,
            base.n_users()
        )));
    }
    if !(cfg.camouflage_ratio >= 0.0) || !(cfg.compression > 0.0) {
        return Err(Error::InvalidParameter("camouflage ratio and compression must be non-negative / positive".into()));
    }
    let scale = *base.scale();
    let rating_cats: Vec<u16> = cfg
        .rating_values
        .iter()
        .map(|&r| {
            scale
                .category(r)
                .ok_or_else(|| Error::InvalidParameter(format!("rating {r} not on the scale")))
        })
        .collect::<Result<_>>()?;
    if base.has_ratings() && rating_cats.is_empty() {
        return Err(Error::InvalidParameter("no fraud rating values".into()));
    }

    let events_of = |v: ObjectId| -> usize {
        base.object_pairs(v)
            .iter()
            .map(|&p| base.pair(p as usize).multiplicity as usize)
            .sum()
    };
    let indegree: Vec<usize> = base.objects().map(events_of).collect();
    let eligible: Vec<usize> = (0..base.n_objects())
        .filter(|&v| indegree[v] <= cfg.max_target_indegree)
        .collect();
    if eligible.len() < cfg.n_objects {
        return Err(Error::InsufficientTargets {
            needed: cfg.n_objects,
            available: eligible.len(),
        });
    }

    let mut rng = rng_for(cfg.seed, 1);
    let mut targets: Vec<usize> = index::sample(&mut rng, eligible.len(), cfg.n_objects)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    targets.sort_unstable();
    let mut rng = rng_for(cfg.seed, 2);
    let mut fraudsters: Vec<usize> = index::sample(&mut rng, base.n_users(), cfg.n_fraudsters).into_vec();
    fraudsters.sort_unstable();

    let span = base.time_span();
    let gaps = if base.has_timestamps() {
        let mut all: Vec<i64> = (0..base.n_pairs())
            .flat_map(|p| base.pair_timestamps(p).unwrap_or(&[]).to_vec())
            .collect();
        all.sort_unstable();
        let g: Vec<i64> = all.windows(2).map(|w| w[1] - w[0]).collect();
        if g.is_empty() {
            vec![1]
        } else {
            g
        }
    } else {
        Vec::new()
    };

    let mut fresh: Vec<EdgeRecord> = Vec::new();
    let mut rng_edges = rng_for(cfg.seed, 3);
    let mut rng_time = rng_for(cfg.seed, 4);
    let mut rng_rating = rng_for(cfg.seed, 5);
    for &v in &targets {
        let chosen = index::sample(&mut rng_edges, fraudsters.len(), cfg.ratings_per_object);
        let mut t = span.map(|(lo, hi)| rng_time.random_range(lo..=hi) as f64);
        for i in chosen.iter() {
            let u = fraudsters[i];
            let mut rec = EdgeRecord::new(base.user_name(UserId(u as u32)), base.object_name(ObjectId(v as u32)));
            if let Some(now) = t.as_mut() {
                let gap = gaps[rng_time.random_range(0..gaps.len())] as f64 * cfg.compression;
                *now += gap;
                rec = rec.at(now.round() as i64);
            }
            if base.has_ratings() {
                let c = rating_cats[rng_rating.random_range(0..rating_cats.len())];
                rec = rec.rated(scale.value(c));
            }
            fresh.push(rec);
        }
    }

    let n_camo = (cfg.camouflage_ratio * (cfg.n_objects * cfg.ratings_per_object) as f64).round() as usize;
    if n_camo > 0 {
        let target_set: HashSet<usize> = targets.iter().copied().collect();
        let weights: Vec<f64> = (0..base.n_objects())
            .map(|v| if target_set.contains(&v) { 0.0 } else { indegree[v] as f64 })
            .collect();
        let pick = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidParameter(format!("camouflage weights: {e}")))?;
        let mut rng = rng_for(cfg.seed, 6);
        for _ in 0..n_camo {
            let u = fraudsters[rng.random_range(0..fraudsters.len())];
            let v = pick.sample(&mut rng);
            let mut rec = EdgeRecord::new(base.user_name(UserId(u as u32)), base.object_name(ObjectId(v as u32)));
            if let Some((lo, hi)) = span {
                rec = rec.at(rng.random_range(lo..=hi));
            }
            if base.has_ratings() {
                let pairs = base.object_pairs(ObjectId(v as u32));
                let ratings: Vec<u16> = pairs
                    .iter()
                    .flat_map(|&p| base.pair_ratings(p as usize).unwrap_or(&[]).to_vec())
                    .collect();
                let c = ratings[rng.random_range(0..ratings.len())];
                rec = rec.rated(scale.value(c));
            }
            fresh.push(rec);
        }
    }

    let mut records = base.to_records();
    records.extend(fresh);
    let graph = BipartiteGraph::ingest(records, scale)?;
    let truth = GroundTruth {
        users: fraudsters
            .iter()
            .map(|&u| base.user_name(UserId(u as u32)).to_string())
            .collect(),
        objects: targets
            .iter()
            .map(|&v| base.object_name(ObjectId(v as u32)).to_string())
            .collect(),
    };
    Ok((graph, truth))
}

/// Benchmark input with about `n_events` events: a background at ten events
/// per user and twenty per object plus a small injected block.
pub fn bench_graph<T: Scalar>(n_events: usize, seed: u64) -> Result<BipartiteGraph<T>> {
    let n_users = (n_events / 10).max(200);
    let n_objects = (n_events / 20).max(100);
    let fraud_objects = (n_objects / 20).clamp(5, 200);
    let rpo = 50;
    let block = fraud_objects * rpo;
    let base = gen_background::<T>(&BackgroundConfig {
        n_users,
        n_objects,
        n_events: n_events.saturating_sub(block + block / 5).max(1),
        seed: stream_seed(seed, 0),
        ..BackgroundConfig::default()
    })?;
    let (g, _) = inject(
        &base,
        &InjectionConfig {
            n_objects: fraud_objects,
            ratings_per_object: rpo,
            n_fraudsters: 100,
            seed: stream_seed(seed, 1),
            ..InjectionConfig::default()
        },
    )?;
    Ok(g)
}
