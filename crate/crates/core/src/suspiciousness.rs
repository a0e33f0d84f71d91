//! Contrast suspiciousness of objects given a user set `A`, the block
//! objective and per-user scores, maintained incrementally while users are
//! shaved off.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ObjectId, UserId};
use crate::scalar::{CompensatedSum, Scalar};
use crate::temporal::{SpikeProfile, TimeSeriesHist};

pub const DEFAULT_BASE: f64 = 32.0;
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

const NO_SLOT: u8 = u8::MAX;
const ABSENT: u32 = u32::MAX;

/// Which signals enter the contrast exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signals {
    pub alpha: bool,
    pub phi: bool,
    pub kappa: bool,
}

impl Signals {
    pub const ALL: Signals = Signals {
        alpha: true,
        phi: true,
        kappa: true,
    };
    pub const TOPOLOGY: Signals = Signals {
        alpha: true,
        phi: false,
        kappa: false,
    };

    /// Parses a comma list such as `alpha,phi`. `all` enables everything.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = Signals {
            alpha: false,
            phi: false,
            kappa: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "alpha" | "a" => out.alpha = true,
                "phi" | "p" | "time" => out.phi = true,
                "kappa" | "k" | "rating" => out.kappa = true,
                "all" => out = Signals::ALL,
                other => {
                    return Err(Error::InvalidParameter(format!("unknown signal '{other}'")))
                }
            }
        }
        if !(out.alpha || out.phi || out.kappa) {
            return Err(Error::InvalidParameter("no signal enabled".into()));
        }
        Ok(out)
    }
}

impl Default for Signals {
    fn default() -> Self {
        Signals::ALL
    }
}

impl std::fmt::Display for Signals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = [
            (self.alpha, "alpha"),
            (self.phi, "phi"),
            (self.kappa, "kappa"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        write!(f, "{}", names.join(","))
    }
}

/// Reference maximum for scaling rating divergence into `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaScaling {
    /// Maximum over the current set, refreshed as users leave.
    #[default]
    Evolving,
    /// Maximum fixed at the seed set.
    Initial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreConfig<T> {
    pub base: T,
    pub signals: Signals,
    /// Rating categories ignored by the divergence; `None` uses the scale's
    /// middle.
    pub neutral: Option<Vec<u16>>,
    pub smoothing: T,
    pub kappa_scaling: KappaScaling,
}

impl<T: Scalar> Default for ScoreConfig<T> {
    fn default() -> Self {
        Self {
            base: T::lit(DEFAULT_BASE),
            signals: Signals::ALL,
            neutral: None,
            smoothing: T::lit(DEFAULT_SMOOTHING),
            kappa_scaling: KappaScaling::Evolving,
        }
    }
}

/// `f_A(v) / f_U(v)`.
pub fn alpha<T: Scalar>(f_a: T, f_u: T) -> Result<T> {
    if !(f_u > T::zero()) {
        return Err(Error::IsolatedSink);
    }
    Ok((f_a / f_u).max(T::zero()).min(T::one()))
}

/// `b^(x - 1)`.
pub fn q_scale<T: Scalar>(x: T, base: T) -> Result<T> {
    check_base(base)?;
    Ok(base.powf(x - T::one()))
}

fn check_base<T: Scalar>(base: T) -> Result<()> {
    if base > T::one() && base.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("scaling base must exceed 1, got {base}")))
    }
}

/// `b^(alpha + phi + kappa - 3)`.
#[inline]
pub fn contrast<T: Scalar>(base: T, alpha: T, phi: T, kappa: T) -> T {
    base.powf(alpha + phi + kappa - T::lit(3.0))
}

/// Smoothed KL divergence of the `a` rating table from `comp`, times the
/// balance factor `min(f_a / f_comp, f_comp / f_a)`.
pub fn weighted_kl<T: Scalar>(a: &[u32], comp: &[u32], f_a: T, f_comp: T, eps: T) -> T {
    if !(f_a > T::zero() && f_comp > T::zero()) {
        return T::zero();
    }
    let balance = (f_a / f_comp).min(f_comp / f_a);
    let k = T::from_count(a.len());
    let na: T = a.iter().map(|&c| T::from_count(c as usize)).sum::<T>() + eps * k;
    let nc: T = comp.iter().map(|&c| T::from_count(c as usize)).sum::<T>() + eps * k;
    let mut kl = CompensatedSum::new();
    for (&ca, &cc) in a.iter().zip(comp) {
        let p = (T::from_count(ca as usize) + eps) / na;
        let q = (T::from_count(cc as usize) + eps) / nc;
        kl.add(p * (p / q).ln());
    }
    kl.value().max(T::zero()) * balance
}

/// Histogram and spike profile of one object.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinkSpikes<T> {
    pub hist: TimeSeriesHist<T>,
    pub profile: SpikeProfile<T>,
}

/// Spike profiles for every object, `None` where fewer than three events.
pub fn compute_spikes<T: Scalar>(g: &BipartiteGraph<T>) -> Result<Vec<Option<SinkSpikes<T>>>> {
    if !g.has_timestamps() {
        return Err(Error::MissingTimestamps);
    }
    (0..g.n_objects() as u32)
        .into_par_iter()
        .map(|v| {
            let ts = g.object_timestamps(ObjectId(v)).unwrap_or_default();
            if ts.len() < 3 {
                return Ok(None);
            }
            let (hist, profile) = SpikeProfile::build(&ts)?;
            Ok(Some(SinkSpikes { hist, profile }))
        })
        .collect()
}

/// Read-only per-object data shared by every seed.
pub struct ScoreContext<'g, T> {
    graph: &'g BipartiteGraph<T>,
    config: ScoreConfig<T>,
    effective: Signals,
    f_u: Vec<T>,
    spikes: Option<Vec<Option<SinkSpikes<T>>>>,
    pair_phi: Vec<T>,
    phi_den: Vec<T>,
    slot_of: Vec<u8>,
    n_slots: usize,
    rating_u: Vec<u32>,
}

impl<'g, T: Scalar> ScoreContext<'g, T> {
    /// Precomputes everything; spike profiles are built when the time
    /// signal is on and the graph has timestamps.
    pub fn new(graph: &'g BipartiteGraph<T>, config: ScoreConfig<T>) -> Result<Self> {
        let spikes = if config.signals.phi && graph.has_timestamps() {
            Some(compute_spikes(graph)?)
        } else {
            None
        };
        Self::with_spikes(graph, config, spikes)
    }

    /// Like [`ScoreContext::new`] with profiles computed by the caller.
    pub fn with_spikes(
        graph: &'g BipartiteGraph<T>,
        config: ScoreConfig<T>,
        spikes: Option<Vec<Option<SinkSpikes<T>>>>,
    ) -> Result<Self> {
        check_base(config.base)?;
        if !(config.smoothing > T::zero()) {
            return Err(Error::InvalidParameter("smoothing must be positive".into()));
        }
        let mut effective = config.signals;
        if effective.phi && !graph.has_timestamps() {
            log::warn!("no timestamps in input: time signal disabled");
            effective.phi = false;
        }
        if effective.kappa && !graph.has_ratings() {
            log::warn!("no ratings in input: rating signal disabled");
            effective.kappa = false;
        }
        let spikes = if effective.phi {
            let s = match spikes {
                Some(s) => s,
                None => compute_spikes(graph)?,
            };
            if s.len() != graph.n_objects() {
                return Err(Error::InvalidParameter("spike profile count mismatch".into()));
            }
            Some(s)
        } else {
            None
        };

        let f_u: Vec<T> = graph.objects().map(|v| graph.weighted_indegree(v)).collect();

        let mut pair_phi = Vec::new();
        let mut phi_den = Vec::new();
        if let Some(spikes) = &spikes {
            pair_phi = vec![T::zero(); graph.n_pairs()];
            for (p, slot) in pair_phi.iter_mut().enumerate() {
                let v = graph.pair(p).object;
                if let Some(s) = &spikes[v.index()] {
                    let ts = graph.pair_timestamps(p).unwrap_or(&[]);
                    *slot = s.profile.phi_sum(&s.hist, ts);
                }
            }
            phi_den = spikes
                .iter()
                .map(|s| s.as_ref().map_or(T::zero(), |s| s.profile.phi_denominator))
                .collect();
        }

        let mut slot_of = Vec::new();
        let mut n_slots = 0;
        let mut rating_u = Vec::new();
        if effective.kappa {
            let scale = graph.scale();
            let n_cat = scale.categories();
            let neutral = config.neutral.clone().unwrap_or_else(|| scale.default_neutral());
            if let Some(bad) = neutral.iter().find(|&&c| c as usize >= n_cat) {
                return Err(Error::InvalidParameter(format!(
                    "neutral category {bad} outside the rating scale"
                )));
            }
            if n_cat - neutral.iter().collect::<std::collections::BTreeSet<_>>().len() > 250 {
                return Err(Error::InvalidParameter("too many rating categories".into()));
            }
            slot_of = vec![NO_SLOT; n_cat];
            for (c, slot) in slot_of.iter_mut().enumerate() {
                if !neutral.contains(&(c as u16)) {
                    *slot = n_slots as u8;
                    n_slots += 1;
                }
            }
            if n_slots == 0 {
                return Err(Error::InvalidParameter(
                    "every rating category is neutral".into(),
                ));
            }
            rating_u = vec![0u32; graph.n_objects() * n_slots];
            for p in 0..graph.n_pairs() {
                let v = graph.pair(p).object.index();
                for &c in graph.pair_ratings(p).unwrap_or(&[]) {
                    let s = slot_of[c as usize];
                    if s != NO_SLOT {
                        rating_u[v * n_slots + s as usize] += 1;
                    }
                }
            }
        }

        Ok(Self {
            graph,
            config,
            effective,
            f_u,
            spikes,
            pair_phi,
            phi_den,
            slot_of,
            n_slots,
            rating_u,
        })
    }

    pub fn graph(&self) -> &'g BipartiteGraph<T> {
        self.graph
    }

    pub fn config(&self) -> &ScoreConfig<T> {
        &self.config
    }

    /// Signals actually in use after dropping those the data cannot support.
    pub fn signals(&self) -> Signals {
        self.effective
    }

    pub fn f_u(&self, v: ObjectId) -> T {
        self.f_u[v.index()]
    }

    pub fn spikes(&self, v: ObjectId) -> Option<&SinkSpikes<T>> {
        self.spikes.as_ref().and_then(|s| s[v.index()].as_ref())
    }

    /// Non-neutral rating counts of `v` over all users.
    pub fn rating_table(&self, v: ObjectId) -> &[u32] {
        if self.n_slots == 0 {
            return &[];
        }
        &self.rating_u[v.index() * self.n_slots..(v.index() + 1) * self.n_slots]
    }

    fn add_pair_ratings(&self, p: usize, table: &mut [u32], sign: i32) {
        for &c in self.graph.pair_ratings(p).unwrap_or(&[]) {
            let s = self.slot_of[c as usize];
            if s != NO_SLOT {
                let cell = &mut table[s as usize];
                *cell = (*cell as i64 + sign as i64) as u32;
            }
        }
    }
}

/// Current user set `A` with every per-object and per-user aggregate.
///
/// Only users of the seed `A0` and objects adjacent to `A0` are tracked.
pub struct ContrastState<'a, T: Scalar> {
    ctx: &'a ScoreContext<'a, T>,
    users: Vec<UserId>,
    local_of: Vec<u32>,
    user_off: Vec<usize>,
    user_adj: Vec<(u32, u32)>,
    sinks: Vec<ObjectId>,
    sink_of: Vec<u32>,
    sink_off: Vec<usize>,
    sink_adj: Vec<(u32, u32)>,
    in_a: Vec<bool>,
    size: usize,
    f_a: Vec<CompensatedSum<T>>,
    f_comp: Vec<CompensatedSum<T>>,
    count_in_a: Vec<u32>,
    phi_num: Vec<CompensatedSum<T>>,
    rating_a: Vec<u32>,
    kappa_raw: Vec<T>,
    kappa_max: T,
    kappa_arg: Option<usize>,
    p: Vec<T>,
    s: Vec<CompensatedSum<T>>,
    hs_num: CompensatedSum<T>,
    hs_den: CompensatedSum<T>,
    touched: Vec<u32>,
    mark: Vec<u32>,
    epoch: u32,
}

/// Per-object terms of the contrast exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinkTerms<T> {
    pub alpha: T,
    pub phi: T,
    pub kappa: T,
    pub p: T,
}

impl<'a, T: Scalar> ContrastState<'a, T> {
    /// State with `A = A0`.
    pub fn new(ctx: &'a ScoreContext<'a, T>, a0: &[UserId]) -> Result<Self> {
        Self::from_subset(ctx, a0, a0)
    }

    /// State over seed `a0` evaluated from scratch at `A = active`.
    pub fn from_subset(ctx: &'a ScoreContext<'a, T>, a0: &[UserId], active: &[UserId]) -> Result<Self> {
        if a0.is_empty() {
            return Err(Error::EmptySeed);
        }
        let g = ctx.graph;
        let mut users = a0.to_vec();
        users.sort_unstable();
        users.dedup();
        if let Some(bad) = users.iter().find(|u| u.index() >= g.n_users()) {
            return Err(Error::UnknownUser(bad.0.to_string()));
        }
        let mut local_of = vec![ABSENT; g.n_users()];
        for (i, u) in users.iter().enumerate() {
            local_of[u.index()] = i as u32;
        }

        let mut sink_local = vec![ABSENT; g.n_objects()];
        let mut sinks = Vec::new();
        let mut user_off = vec![0usize];
        let mut user_adj = Vec::new();
        for &u in &users {
            for p in g.user_pairs(u) {
                let v = g.pair(p).object;
                if sink_local[v.index()] == ABSENT {
                    sink_local[v.index()] = sinks.len() as u32;
                    sinks.push(v);
                }
                user_adj.push((sink_local[v.index()], p as u32));
            }
            user_off.push(user_adj.len());
        }
        if user_adj.is_empty() {
            return Err(Error::DegenerateSeed);
        }

        let mut sink_off = vec![0usize; sinks.len() + 1];
        for &(j, _) in &user_adj {
            sink_off[j as usize + 1] += 1;
        }
        for j in 0..sinks.len() {
            sink_off[j + 1] += sink_off[j];
        }
        let mut fill = sink_off.clone();
        let mut sink_adj = vec![(0u32, 0u32); user_adj.len()];
        for i in 0..users.len() {
            for &(j, p) in &user_adj[user_off[i]..user_off[i + 1]] {
                sink_adj[fill[j as usize]] = (i as u32, p);
                fill[j as usize] += 1;
            }
        }

        let n_sinks = sinks.len();
        let n_users = users.len();
        let mut st = Self {
            ctx,
            users,
            local_of,
            user_off,
            user_adj,
            sinks,
            sink_of: sink_local,
            sink_off,
            sink_adj,
            in_a: vec![true; n_users],
            size: n_users,
            f_a: vec![CompensatedSum::new(); n_sinks],
            f_comp: vec![CompensatedSum::new(); n_sinks],
            count_in_a: vec![0; n_sinks],
            phi_num: vec![CompensatedSum::new(); n_sinks],
            rating_a: vec![0; n_sinks * ctx.n_slots],
            kappa_raw: vec![T::zero(); n_sinks],
            kappa_max: T::zero(),
            kappa_arg: None,
            p: vec![T::one(); n_sinks],
            s: vec![CompensatedSum::new(); n_users],
            hs_num: CompensatedSum::new(),
            hs_den: CompensatedSum::new(),
            touched: Vec::new(),
            mark: vec![0; n_users],
            epoch: 0,
        };

        let mut active_ids: Vec<UserId> = active.to_vec();
        active_ids.sort_unstable();
        active_ids.dedup();
        if active_ids.len() != n_users {
            // the initial scaling reference is always taken at A0
            st.recompute_all(true);
            st.in_a.iter_mut().for_each(|x| *x = false);
            for u in &active_ids {
                match st.local(*u) {
                    Some(i) => st.in_a[i] = true,
                    None => return Err(Error::NotInSet(u.index())),
                }
            }
            st.size = active_ids.len();
            st.recompute_all(false);
        } else {
            for u in &active_ids {
                if st.local(*u).is_none() {
                    return Err(Error::NotInSet(u.index()));
                }
            }
            st.recompute_all(true);
        }
        Ok(st)
    }

    fn local(&self, u: UserId) -> Option<usize> {
        match self.local_of.get(u.index()) {
            Some(&i) if i != ABSENT => Some(i as usize),
            _ => None,
        }
    }

    /// Recomputes every aggregate from the membership flags.
    fn recompute_all(&mut self, reset_scaling: bool) {
        let ctx = self.ctx;
        let g = ctx.graph;
        let slots = ctx.n_slots;
        for j in 0..self.sinks.len() {
            let v = self.sinks[j];
            let mut fa = CompensatedSum::new();
            let mut phi = CompensatedSum::new();
            let mut count = 0u32;
            let table = &mut self.rating_a[j * slots..(j + 1) * slots];
            table.iter_mut().for_each(|c| *c = 0);
            for &(i, p) in &self.sink_adj[self.sink_off[j]..self.sink_off[j + 1]] {
                if self.in_a[i as usize] {
                    fa.add(g.weight(p as usize));
                    count += 1;
                    if ctx.effective.phi {
                        phi.add(ctx.pair_phi[p as usize]);
                    }
                    if ctx.effective.kappa {
                        ctx.add_pair_ratings(p as usize, table, 1);
                    }
                }
            }
            let mut comp = CompensatedSum::new();
            for &p in g.object_pairs(v) {
                let u = g.pair(p as usize).user;
                let inside = self.local(u).is_some_and(|i| self.in_a[i]);
                if !inside {
                    comp.add(g.weight(p as usize));
                }
            }
            self.f_a[j] = fa;
            self.phi_num[j] = phi;
            self.count_in_a[j] = count;
            self.f_comp[j] = comp;
            self.kappa_raw[j] = self.compute_kappa_raw(j);
        }
        if ctx.effective.kappa && (reset_scaling || ctx.config.kappa_scaling == KappaScaling::Evolving) {
            self.refresh_kappa_max();
        }
        self.refresh_scores();
    }

    /// Recomputes `P` for all sinks and rebuilds `S` and the objective sums.
    fn refresh_scores(&mut self) {
        let g = self.ctx.graph;
        for j in 0..self.sinks.len() {
            self.p[j] = self.compute_p(j);
        }
        self.hs_num.reset();
        self.hs_den.reset();
        for j in 0..self.sinks.len() {
            self.hs_num.add(self.f_a[j].value() * self.p[j]);
            self.hs_den.add(self.p[j]);
        }
        for i in 0..self.users.len() {
            let mut s = CompensatedSum::new();
            if self.in_a[i] {
                for &(j, p) in &self.user_adj[self.user_off[i]..self.user_off[i + 1]] {
                    s.add(g.weight(p as usize) * self.p[j as usize]);
                }
            }
            self.s[i] = s;
        }
    }

    fn refresh_kappa_max(&mut self) {
        let mut best = T::zero();
        let mut arg = None;
        for (j, &k) in self.kappa_raw.iter().enumerate() {
            if k > best {
                best = k;
                arg = Some(j);
            }
        }
        self.kappa_max = best;
        self.kappa_arg = arg;
    }

    fn compute_kappa_raw(&self, j: usize) -> T {
        let ctx = self.ctx;
        if !ctx.effective.kappa || self.count_in_a[j] == 0 {
            return T::zero();
        }
        let slots = ctx.n_slots;
        let a = &self.rating_a[j * slots..(j + 1) * slots];
        let full = ctx.rating_table(self.sinks[j]);
        let comp: Vec<u32> = full.iter().zip(a).map(|(&f, &x)| f - x).collect();
        weighted_kl(a, &comp, self.f_a[j].value(), self.f_comp[j].value(), ctx.config.smoothing)
    }

    fn terms(&self, j: usize) -> SinkTerms<T> {
        let ctx = self.ctx;
        let v = self.sinks[j];
        let one = T::one();
        let fa = if self.count_in_a[j] == 0 {
            T::zero()
        } else {
            self.f_a[j].value()
        };
        let alpha = if ctx.effective.alpha {
            let fu = ctx.f_u[v.index()];
            (fa / fu).max(T::zero()).min(one)
        } else {
            one
        };
        let phi = if ctx.effective.phi {
            let den = ctx.phi_den[v.index()];
            if den > T::zero() && self.count_in_a[j] > 0 {
                (self.phi_num[j].value() / den).max(T::zero()).min(one)
            } else {
                T::zero()
            }
        } else {
            one
        };
        let kappa = if ctx.effective.kappa {
            if self.kappa_max > T::zero() {
                (self.kappa_raw[j] / self.kappa_max).min(one)
            } else {
                T::zero()
            }
        } else {
            one
        };
        SinkTerms {
            alpha,
            phi,
            kappa,
            p: contrast(ctx.config.base, alpha, phi, kappa),
        }
    }

    fn compute_p(&self, j: usize) -> T {
        self.terms(j).p
    }

    /// Removes `u` from `A` and returns the local indices of users whose
    /// score changed (see [`ContrastState::user_at`]).
    pub fn remove_user(&mut self, u: UserId) -> Result<&[u32]> {
        let i = match self.local(u) {
            Some(i) if self.in_a[i] => i,
            _ => return Err(Error::NotInSet(u.index())),
        };
        let ctx = self.ctx;
        let g = ctx.graph;
        let slots = ctx.n_slots;
        self.in_a[i] = false;
        self.size -= 1;
        self.s[i].reset();
        self.touched.clear();

        let (lo, hi) = (self.user_off[i], self.user_off[i + 1]);
        let mut before: Vec<(usize, T, T)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (j, p) = self.user_adj[k];
            let (j, p) = (j as usize, p as usize);
            before.push((j, self.f_a[j].value(), self.p[j]));
            let w = g.weight(p);
            self.count_in_a[j] -= 1;
            self.f_comp[j].add(w);
            if self.count_in_a[j] == 0 {
                self.f_a[j].reset();
                self.phi_num[j].reset();
            } else {
                self.f_a[j].sub(w);
                if ctx.effective.phi {
                    self.phi_num[j].sub(ctx.pair_phi[p]);
                }
            }
            if ctx.effective.kappa {
                ctx.add_pair_ratings(p, &mut self.rating_a[j * slots..(j + 1) * slots], -1);
            }
        }

        if ctx.effective.kappa {
            let mut need_max = false;
            for &(j, _, _) in &before {
                self.kappa_raw[j] = self.compute_kappa_raw(j);
                if self.kappa_arg == Some(j) || self.kappa_raw[j] > self.kappa_max {
                    need_max = true;
                }
            }
            if need_max && ctx.config.kappa_scaling == KappaScaling::Evolving {
                let old = self.kappa_max;
                self.refresh_kappa_max();
                if self.kappa_max != old {
                    self.refresh_scores();
                    self.epoch = self.epoch.wrapping_add(1);
                    for i in 0..self.users.len() {
                        if self.in_a[i] {
                            self.touched.push(i as u32);
                        }
                    }
                    return Ok(&self.touched);
                }
            }
        }

        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        for (j, fa_old, p_old) in before {
            let p_new = self.compute_p(j);
            let fa_new = self.f_a[j].value();
            self.hs_num.sub(fa_old * p_old);
            self.hs_num.add(fa_new * p_new);
            self.hs_den.sub(p_old);
            self.hs_den.add(p_new);
            self.p[j] = p_new;
            if p_new == p_old {
                continue;
            }
            for &(w, p) in &self.sink_adj[self.sink_off[j]..self.sink_off[j + 1]] {
                let w = w as usize;
                if !self.in_a[w] {
                    continue;
                }
                let wt = g.weight(p as usize);
                self.s[w].sub(wt * p_old);
                self.s[w].add(wt * p_new);
                if self.mark[w] != self.epoch {
                    self.mark[w] = self.epoch;
                    self.touched.push(w as u32);
                }
            }
        }
        Ok(&self.touched)
    }

    /// `HS(A)`.
    pub fn hs(&self) -> Result<T> {
        if self.size == 0 {
            return Err(Error::EmptySet);
        }
        Ok(self.hs_num.value() / (T::from_count(self.size) + self.hs_den.value()))
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Number of seed users (local index range).
    pub fn n_local_users(&self) -> usize {
        self.users.len()
    }

    pub fn user_at(&self, local: usize) -> UserId {
        self.users[local]
    }

    pub fn contains(&self, u: UserId) -> bool {
        self.local(u).is_some_and(|i| self.in_a[i])
    }

    /// Members of `A` in index order.
    pub fn members(&self) -> Vec<UserId> {
        self.users
            .iter()
            .zip(&self.in_a)
            .filter(|(_, &inside)| inside)
            .map(|(&u, _)| u)
            .collect()
    }

    /// `S(u)` for `u` in `A`.
    pub fn score(&self, u: UserId) -> Option<T> {
        self.local(u)
            .filter(|&i| self.in_a[i])
            .map(|i| self.s[i].value())
    }

    /// `S` by local index.
    pub fn score_local(&self, i: usize) -> T {
        self.s[i].value()
    }

    /// Scores of all members, in index order.
    pub fn user_scores(&self) -> Vec<(UserId, T)> {
        (0..self.users.len())
            .filter(|&i| self.in_a[i])
            .map(|i| (self.users[i], self.s[i].value()))
            .collect()
    }

    /// Objects adjacent to the seed.
    pub fn sinks(&self) -> &[ObjectId] {
        &self.sinks
    }

    fn sink_local(&self, v: ObjectId) -> Option<usize> {
        match self.sink_of.get(v.index()) {
            Some(&j) if j != ABSENT => Some(j as usize),
            _ => None,
        }
    }

    pub fn f_a(&self, v: ObjectId) -> T {
        match self.sink_local(v) {
            Some(j) if self.count_in_a[j] > 0 => self.f_a[j].value(),
            _ => T::zero(),
        }
    }

    pub fn p(&self, v: ObjectId) -> Option<T> {
        self.sink_local(v).map(|j| self.p[j])
    }

    pub fn terms_of(&self, v: ObjectId) -> Option<SinkTerms<T>> {
        self.sink_local(v).map(|j| self.terms(j))
    }

    /// `(v, f_A(v) P(v|A))` for every tracked object.
    pub fn sink_scores(&self) -> Vec<(ObjectId, T)> {
        (0..self.sinks.len())
            .map(|j| {
                let fa = if self.count_in_a[j] == 0 {
                    T::zero()
                } else {
                    self.f_a[j].value().max(T::zero())
                };
                (self.sinks[j], fa * self.p[j])
            })
            .collect()
    }

    /// Largest relative gap between maintained values and a from-scratch
    /// rebuild at the same `A`.
    pub fn drift(&self) -> Result<T> {
        let scratch = Self::from_subset(self.ctx, &self.users, &self.members())?;
        let mut worst = T::zero();
        let mut bump = |a: T, b: T| {
            let d = crate::scalar::relative_diff(a, b);
            if d > worst {
                worst = d;
            }
        };
        for &v in &self.sinks {
            bump(self.f_a(v), scratch.f_a(v));
            bump(self.p(v).unwrap(), scratch.p(v).unwrap());
        }
        for (u, s) in self.user_scores() {
            bump(s, scratch.score(u).unwrap());
        }
        if self.size > 0 {
            bump(self.hs()?, scratch.hs()?);
        }
        Ok(worst)
    }
}
