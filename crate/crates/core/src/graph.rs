//! Dual-indexed sparse bipartite multigraph built from `(user, object,
//! timestamp, rating)` event logs.
//!
//! Node ids are interned to dense indices at ingestion. Every distinct
//! `(user, object)` pair is stored once with its multiplicity and its event
//! list (timestamps sorted, ratings aligned with them). Pairs are laid out
//! sorted by user, which doubles as the forward index; the reverse index keeps
//! pair ids grouped by object.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObjectId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One ingested event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub user: String,
    pub object: String,
    pub timestamp: Option<i64>,
    pub rating: Option<f64>,
}

impl EdgeRecord {
    pub fn new(user: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            user: user.into(),
            object: object.into(),
            timestamp: None,
            rating: None,
        }
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn rated(mut self, rating: f64) -> Self {
        self.rating = Some(rating);
        self
    }
}

/// Declared categorical rating scale `min, min + step, ..., max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::five_star()
    }
}

impl RatingScale {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rating scale {min}:{max}:{step}"
            )));
        }
        let n = (max - min) / step;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "rating scale {min}:{max}:{step} is not evenly divisible"
            )));
        }
        Ok(Self { min, max, step })
    }

    /// Integer 1..=5 stars.
    pub fn five_star() -> Self {
        Self {
            min: 1.0,
            max: 5.0,
            step: 1.0,
        }
    }

    /// Half stars 0.5..=5.0.
    pub fn half_star() -> Self {
        Self {
            min: 0.5,
            max: 5.0,
            step: 0.5,
        }
    }

    /// Parses `min:max:step`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("rating scale '{s}', expected min:max:step"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Self::new(nums[0], nums[1], nums[2])
    }

    pub fn categories(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    /// Category index of a rating value, `None` when off the scale grid.
    pub fn category(&self, value: f64) -> Option<u16> {
        if !value.is_finite() {
            return None;
        }
        let pos = (value - self.min) / self.step;
        let idx = pos.round();
        if (pos - idx).abs() > 1e-6 || idx < 0.0 || idx as usize >= self.categories() {
            return None;
        }
        Some(idx as u16)
    }

    pub fn value(&self, category: u16) -> f64 {
        self.min + self.step * category as f64
    }

    /// Middle category for odd-sized scales, the two middle ones otherwise.
    pub fn default_neutral(&self) -> Vec<u16> {
        let n = self.categories();
        if n % 2 == 1 {
            vec![(n / 2) as u16]
        } else {
            vec![(n / 2 - 1) as u16, (n / 2) as u16]
        }
    }
}

/// Membership mask over users.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSet {
    mask: Vec<bool>,
    len: usize,
}

impl UserSet {
    pub fn empty(n_users: usize) -> Self {
        Self {
            mask: vec![false; n_users],
            len: 0,
        }
    }

    pub fn full(n_users: usize) -> Self {
        Self {
            mask: vec![true; n_users],
            len: n_users,
        }
    }

    pub fn from_ids(n_users: usize, ids: impl IntoIterator<Item = UserId>) -> Self {
        let mut s = Self::empty(n_users);
        for u in ids {
            s.insert(u);
        }
        s
    }

    pub fn insert(&mut self, u: UserId) -> bool {
        let slot = &mut self.mask[u.index()];
        if *slot {
            false
        } else {
            *slot = true;
            self.len += 1;
            true
        }
    }

    pub fn remove(&mut self, u: UserId) -> bool {
        let slot = &mut self.mask[u.index()];
        if *slot {
            *slot = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    #[inline]
    pub fn contains(&self, u: UserId) -> bool {
        self.mask.get(u.index()).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = UserId> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| UserId(i as u32))
    }
}

/// Borrowed view of one stored `(user, object)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub user: UserId,
    pub object: ObjectId,
    pub multiplicity: u32,
}

#[derive(Clone, Debug)]
pub struct BipartiteGraph<T> {
    user_names: Vec<String>,
    object_names: Vec<String>,
    user_lookup: HashMap<String, u32>,
    object_lookup: HashMap<String, u32>,
    pair_user: Vec<u32>,
    pair_object: Vec<u32>,
    multiplicity: Vec<u32>,
    user_offsets: Vec<usize>,
    object_offsets: Vec<usize>,
    object_pairs: Vec<u32>,
    event_offsets: Vec<usize>,
    timestamps: Option<Vec<i64>>,
    ratings: Option<Vec<u16>>,
    scale: RatingScale,
    sigma: Vec<T>,
    edge_prior: Option<Vec<T>>,
}

struct RawEvent {
    user: u32,
    object: u32,
    timestamp: i64,
    rating: u16,
    seq: usize,
}

impl<T: Scalar> BipartiteGraph<T> {
    /// Builds the graph from a record stream. Ratings must lie on `scale`.
    ///
    /// Timestamps and ratings are each either present on every record or
    /// absent on every record.
    pub fn ingest<I>(records: I, scale: RatingScale) -> Result<Self>
    where
        I: IntoIterator<Item = EdgeRecord>,
    {
        let mut user_names = Vec::new();
        let mut object_names = Vec::new();
        let mut user_lookup: HashMap<String, u32> = HashMap::new();
        let mut object_lookup: HashMap<String, u32> = HashMap::new();
        let mut raw = Vec::new();
        let mut has_ts: Option<bool> = None;
        let mut has_rating: Option<bool> = None;

        for (seq, rec) in records.into_iter().enumerate() {
            let pos = seq + 1;
            if rec.user.is_empty() || rec.object.is_empty() {
                return Err(malformed(pos, "empty user or object id"));
            }
            match (has_ts, rec.timestamp.is_some()) {
                (None, p) => has_ts = Some(p),
                (Some(a), b) if a != b => {
                    return Err(malformed(pos, "timestamp present on some records only"))
                }
                _ => {}
            }
            match (has_rating, rec.rating.is_some()) {
                (None, p) => has_rating = Some(p),
                (Some(a), b) if a != b => {
                    return Err(malformed(pos, "rating present on some records only"))
                }
                _ => {}
            }
            let timestamp = match rec.timestamp {
                Some(t) if t < 0 => return Err(malformed(pos, "negative timestamp")),
                Some(t) => t,
                None => 0,
            };
            let rating = match rec.rating {
                Some(r) => scale.category(r).ok_or_else(|| {
                    malformed(pos, &format!("rating {r} outside declared scale"))
                })?,
                None => 0,
            };
            let user = intern(&mut user_lookup, &mut user_names, rec.user);
            let object = intern(&mut object_lookup, &mut object_names, rec.object);
            raw.push(RawEvent {
                user,
                object,
                timestamp,
                rating,
                seq,
            });
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self::assemble(
            user_names,
            object_names,
            user_lookup,
            object_lookup,
            raw,
            has_ts.unwrap_or(false),
            has_rating.unwrap_or(false),
            scale,
        ))
    }

    /// Builds a graph from index-level events; node names are `u{i}` / `o{j}`.
    /// Used by generators that work on dense indices.
    pub fn from_indexed(
        n_users: usize,
        n_objects: usize,
        events: &[(u32, u32, Option<i64>, Option<u16>)],
        scale: RatingScale,
    ) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::EmptyInput);
        }
        let has_ts = events[0].2.is_some();
        let has_rating = events[0].3.is_some();
        let mut raw = Vec::with_capacity(events.len());
        for (seq, &(u, v, t, r)) in events.iter().enumerate() {
            if u as usize >= n_users || v as usize >= n_objects {
                return Err(malformed(seq + 1, "node index out of range"));
            }
            if t.is_some() != has_ts || r.is_some() != has_rating {
                return Err(malformed(seq + 1, "inconsistent attribute presence"));
            }
            if r.is_some_and(|c| c as usize >= scale.categories()) {
                return Err(malformed(seq + 1, "rating category outside declared scale"));
            }
            if t.is_some_and(|t| t < 0) {
                return Err(malformed(seq + 1, "negative timestamp"));
            }
            raw.push(RawEvent {
                user: u,
                object: v,
                timestamp: t.unwrap_or(0),
                rating: r.unwrap_or(0),
                seq,
            });
        }
        let user_names: Vec<String> = (0..n_users).map(|i| format!("u{i}")).collect();
        let object_names: Vec<String> = (0..n_objects).map(|j| format!("o{j}")).collect();
        let user_lookup = user_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let object_lookup = object_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(Self::assemble(
            user_names,
            object_names,
            user_lookup,
            object_lookup,
            raw,
            has_ts,
            has_rating,
            scale,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        user_names: Vec<String>,
        object_names: Vec<String>,
        user_lookup: HashMap<String, u32>,
        object_lookup: HashMap<String, u32>,
        mut raw: Vec<RawEvent>,
        has_ts: bool,
        has_rating: bool,
        scale: RatingScale,
    ) -> Self {
        raw.sort_unstable_by_key(|e| (e.user, e.object, e.timestamp, e.seq));

        let n_users = user_names.len();
        let n_objects = object_names.len();
        let mut pair_user = Vec::new();
        let mut pair_object = Vec::new();
        let mut multiplicity = Vec::new();
        let mut event_offsets = vec![0usize];
        for (i, e) in raw.iter().enumerate() {
            let new_pair = match (pair_user.last(), pair_object.last()) {
                (Some(&u), Some(&v)) => u != e.user || v != e.object,
                _ => true,
            };
            if new_pair {
                if i > 0 {
                    event_offsets.push(i);
                }
                pair_user.push(e.user);
                pair_object.push(e.object);
                multiplicity.push(0u32);
            }
            *multiplicity.last_mut().unwrap() += 1;
        }
        event_offsets.push(raw.len());

        let mut user_offsets = vec![0usize; n_users + 1];
        for &u in &pair_user {
            user_offsets[u as usize + 1] += 1;
        }
        for i in 0..n_users {
            user_offsets[i + 1] += user_offsets[i];
        }

        let mut object_offsets = vec![0usize; n_objects + 1];
        for &v in &pair_object {
            object_offsets[v as usize + 1] += 1;
        }
        for i in 0..n_objects {
            object_offsets[i + 1] += object_offsets[i];
        }
        let mut fill = object_offsets.clone();
        let mut object_pairs = vec![0u32; pair_object.len()];
        // Pairs are sorted by user, so each object's list comes out user-sorted.
        for (p, &v) in pair_object.iter().enumerate() {
            object_pairs[fill[v as usize]] = p as u32;
            fill[v as usize] += 1;
        }

        let timestamps = has_ts.then(|| raw.iter().map(|e| e.timestamp).collect());
        let ratings = has_rating.then(|| raw.iter().map(|e| e.rating).collect());

        Self {
            user_names,
            object_names,
            user_lookup,
            object_lookup,
            pair_user,
            pair_object,
            multiplicity,
            user_offsets,
            object_offsets,
            object_pairs,
            event_offsets,
            timestamps,
            ratings,
            scale,
            sigma: vec![T::one(); n_objects],
            edge_prior: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_names.len()
    }

    pub fn n_objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_user.len()
    }

    /// Number of ingested events, i.e. the sum of multiplicities.
    pub fn n_events(&self) -> usize {
        *self.event_offsets.last().unwrap_or(&0)
    }

    pub fn has_timestamps(&self) -> bool {
        self.timestamps.is_some()
    }

    pub fn has_ratings(&self) -> bool {
        self.ratings.is_some()
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn user_name(&self, u: UserId) -> &str {
        &self.user_names[u.index()]
    }

    pub fn object_name(&self, v: ObjectId) -> &str {
        &self.object_names[v.index()]
    }

    pub fn user_index(&self, name: &str) -> Option<UserId> {
        self.user_lookup.get(name).map(|&i| UserId(i))
    }

    pub fn object_index(&self, name: &str) -> Option<ObjectId> {
        self.object_lookup.get(name).map(|&i| ObjectId(i))
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> {
        (0..self.n_users() as u32).map(UserId)
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> {
        (0..self.n_objects() as u32).map(ObjectId)
    }

    #[inline]
    pub fn pair(&self, p: usize) -> Pair {
        Pair {
            user: UserId(self.pair_user[p]),
            object: ObjectId(self.pair_object[p]),
            multiplicity: self.multiplicity[p],
        }
    }

    /// Pair ids of a user (forward index).
    #[inline]
    pub fn user_pairs(&self, u: UserId) -> std::ops::Range<usize> {
        self.user_offsets[u.index()]..self.user_offsets[u.index() + 1]
    }

    /// Pair ids of an object (reverse index), ordered by user.
    #[inline]
    pub fn object_pairs(&self, v: ObjectId) -> &[u32] {
        &self.object_pairs[self.object_offsets[v.index()]..self.object_offsets[v.index() + 1]]
    }

    pub fn out_degree(&self, u: UserId) -> usize {
        self.user_pairs(u).map(|p| self.multiplicity[p] as usize).sum()
    }

    pub fn in_degree(&self, v: ObjectId) -> usize {
        self.object_pairs(v)
            .iter()
            .map(|&p| self.multiplicity[p as usize] as usize)
            .sum()
    }

    #[inline]
    pub fn pair_events(&self, p: usize) -> std::ops::Range<usize> {
        self.event_offsets[p]..self.event_offsets[p + 1]
    }

    /// Sorted timestamps of one pair.
    pub fn pair_timestamps(&self, p: usize) -> Option<&[i64]> {
        self.timestamps.as_ref().map(|ts| &ts[self.pair_events(p)])
    }

    /// Rating categories of one pair, aligned with [`Self::pair_timestamps`].
    pub fn pair_ratings(&self, p: usize) -> Option<&[u16]> {
        self.ratings.as_ref().map(|rs| &rs[self.pair_events(p)])
    }

    /// All timestamps of an object, sorted.
    pub fn object_timestamps(&self, v: ObjectId) -> Option<Vec<i64>> {
        let ts = self.timestamps.as_ref()?;
        let mut out = Vec::new();
        for &p in self.object_pairs(v) {
            out.extend_from_slice(&ts[self.pair_events(p as usize)]);
        }
        out.sort_unstable();
        Some(out)
    }

    /// Earliest and latest timestamp in the graph.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        let ts = self.timestamps.as_ref()?;
        let lo = ts.iter().copied().min()?;
        let hi = ts.iter().copied().max()?;
        Some((lo, hi))
    }

    #[inline]
    pub fn sigma(&self, v: ObjectId) -> T {
        self.sigma[v.index()]
    }

    pub fn column_weights(&self) -> &[T] {
        &self.sigma
    }

    /// Replaces the per-object suspiciousness weights. All must be positive.
    pub fn set_column_weights(&mut self, weights: Vec<T>) -> Result<()> {
        if weights.len() != self.n_objects() {
            return Err(Error::InvalidParameter(format!(
                "expected {} column weights, got {}",
                self.n_objects(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "column weights must be positive and finite".into(),
            ));
        }
        self.sigma = weights;
        Ok(())
    }

    /// Per-pair prior multipliers (external knowledge about suspicious edges).
    pub fn set_edge_priors(&mut self, priors: Vec<T>) -> Result<()> {
        if priors.len() != self.n_pairs() {
            return Err(Error::InvalidParameter(format!(
                "expected {} edge priors, got {}",
                self.n_pairs(),
                priors.len()
            )));
        }
        if priors.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "edge priors must be positive and finite".into(),
            ));
        }
        self.edge_prior = Some(priors);
        Ok(())
    }

    /// `sigma * e` for one stored pair.
    #[inline]
    pub fn weight(&self, p: usize) -> T {
        let base = self.sigma[self.pair_object[p] as usize] * T::from_count(self.multiplicity[p] as usize);
        match &self.edge_prior {
            Some(pr) => base * pr[p],
            None => base,
        }
    }

    /// Weighted indegree `f_U(v)`.
    pub fn weighted_indegree(&self, v: ObjectId) -> T {
        self.object_pairs(v)
            .iter()
            .map(|&p| self.weight(p as usize))
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// `f_A(v)`: weighted edge frequency from `members` into `v`.
    pub fn engagement(&self, members: &UserSet, v: ObjectId) -> Result<T> {
        if v.index() >= self.n_objects() {
            return Err(Error::UnknownSink(v.0.to_string()));
        }
        Ok(self
            .object_pairs(v)
            .iter()
            .filter(|&&p| members.contains(UserId(self.pair_user[p as usize])))
            .map(|&p| self.weight(p as usize))
            .collect::<CompensatedSum<T>>()
            .value())
    }

    /// Engagement looked up by object name.
    pub fn engagement_by_name(&self, members: &UserSet, object: &str) -> Result<T> {
        let v = self
            .object_index(object)
            .ok_or_else(|| Error::UnknownSink(object.to_string()))?;
        self.engagement(members, v)
    }

    /// View over the edges incident to `seed`.
    pub fn restrict(&self, seed: &[UserId]) -> Result<GraphView<'_, T>> {
        if seed.is_empty() {
            return Err(Error::EmptySeed);
        }
        let mut users = seed.to_vec();
        users.sort_unstable();
        users.dedup();
        if let Some(bad) = users.iter().find(|u| u.index() >= self.n_users()) {
            return Err(Error::UnknownUser(bad.0.to_string()));
        }
        let members = UserSet::from_ids(self.n_users(), users.iter().copied());
        Ok(GraphView {
            graph: self,
            users,
            members,
        })
    }

    /// Reconstructs the event records, grouped by pair.
    pub fn to_records(&self) -> Vec<EdgeRecord> {
        let mut out = Vec::with_capacity(self.n_events());
        for p in 0..self.n_pairs() {
            let pair = self.pair(p);
            for e in self.pair_events(p) {
                out.push(EdgeRecord {
                    user: self.user_names[pair.user.index()].clone(),
                    object: self.object_names[pair.object.index()].clone(),
                    timestamp: self.timestamps.as_ref().map(|ts| ts[e]),
                    rating: self.ratings.as_ref().map(|rs| self.scale.value(rs[e])),
                });
            }
        }
        out
    }

    /// Writes `user,object[,timestamp[,rating]]` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_records(writer, &self.to_records())
    }

    pub fn read_csv<R: Read>(reader: R, scale: RatingScale) -> Result<Self> {
        let records = parse_records(reader)?;
        Self::ingest(records, scale)
    }

    pub fn from_path(path: impl AsRef<Path>, scale: RatingScale) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), scale)
    }
}

/// Edges incident to a user subset of a borrowed graph.
#[derive(Clone, Debug)]
pub struct GraphView<'a, T> {
    graph: &'a BipartiteGraph<T>,
    users: Vec<UserId>,
    members: UserSet,
}

impl<'a, T: Scalar> GraphView<'a, T> {
    pub fn graph(&self) -> &'a BipartiteGraph<T> {
        self.graph
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn members(&self) -> &UserSet {
        &self.members
    }

    /// Pair ids incident to the view's users, grouped by user.
    pub fn pairs(&self) -> impl Iterator<Item = usize> + '_ {
        self.users.iter().flat_map(move |&u| self.graph.user_pairs(u))
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs().count()
    }

    /// Number of events on the view's pairs.
    pub fn n_events(&self) -> usize {
        self.pairs()
            .map(|p| self.graph.pair(p).multiplicity as usize)
            .sum()
    }

    /// Distinct objects adjacent to the view's users, ascending.
    pub fn sinks(&self) -> Vec<ObjectId> {
        let mut seen = vec![false; self.graph.n_objects()];
        for p in self.pairs() {
            seen[self.graph.pair(p).object.index()] = true;
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| ObjectId(i as u32))
            .collect()
    }

    /// Pair ids of `v` whose user lies in the view.
    pub fn object_pairs(&self, v: ObjectId) -> impl Iterator<Item = usize> + '_ {
        self.graph
            .object_pairs(v)
            .iter()
            .map(|&p| p as usize)
            .filter(move |&p| self.members.contains(self.graph.pair(p).user))
    }
}

fn intern(lookup: &mut HashMap<String, u32>, names: &mut Vec<String>, name: String) -> u32 {
    if let Some(&i) = lookup.get(&name) {
        return i;
    }
    let i = names.len() as u32;
    names.push(name.clone());
    lookup.insert(name, i);
    i
}

fn malformed(line: usize, message: &str) -> Error {
    Error::Malformed {
        line,
        message: message.to_string(),
    }
}

/// Parses delimited `user,object[,timestamp[,rating]]` text. The delimiter
/// (tab or comma) is sniffed from the first line; a header row is detected
/// when its first field is `user` or its third field is non-numeric.
pub fn parse_records<R: Read>(mut reader: R) -> Result<Vec<EdgeRecord>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if first_line.contains('\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut out = Vec::new();
    let mut arity: Option<usize> = None;
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if idx == 0 && looks_like_header(&row) {
            continue;
        }
        if !(2..=4).contains(&row.len()) {
            return Err(malformed(
                line,
                &format!("expected 2 to 4 columns, found {}", row.len()),
            ));
        }
        match arity {
            None => arity = Some(row.len()),
            Some(a) if a != row.len() => {
                return Err(malformed(
                    line,
                    &format!("expected {a} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        let mut rec = EdgeRecord::new(&row[0], &row[1]);
        if rec.user.is_empty() || rec.object.is_empty() {
            return Err(malformed(line, "empty user or object id"));
        }
        if row.len() >= 3 {
            let t = row[2]
                .parse::<i64>()
                .map_err(|_| malformed(line, &format!("non-numeric timestamp '{}'", &row[2])))?;
            rec.timestamp = Some(t);
        }
        if row.len() == 4 {
            let r = row[3]
                .parse::<f64>()
                .map_err(|_| malformed(line, &format!("non-numeric rating '{}'", &row[3])))?;
            rec.rating = Some(r);
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

fn looks_like_header(row: &csv::StringRecord) -> bool {
    let first = row.get(0).unwrap_or("");
    if first.eq_ignore_ascii_case("user") || first.eq_ignore_ascii_case("source") {
        return true;
    }
    row.len() >= 3 && row[2].parse::<i64>().is_err()
}

/// Writes records with a header naming the columns that are present.
pub fn write_records<W: Write>(writer: W, records: &[EdgeRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let has_ts = records.first().map(|r| r.timestamp.is_some()).unwrap_or(false);
    let has_rating = records.first().map(|r| r.rating.is_some()).unwrap_or(false);
    let mut header = vec!["user", "object"];
    if has_ts {
        header.push("timestamp");
        if has_rating {
            header.push("rating");
        }
    }
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.user.clone(), r.object.clone()];
        if has_ts {
            row.push(r.timestamp.unwrap_or(0).to_string());
            if has_rating {
                row.push(format_rating(r.rating.unwrap_or(0.0)));
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn format_rating(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}
