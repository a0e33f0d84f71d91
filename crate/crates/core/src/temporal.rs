//! Per-object timestamp histograms and spike geometry: awakening and burst
//! points, multiple bursts, the maximal drop with its dying point, the
//! burst-involvement ratio and the drop-slope column weight.
//!
//! Bin positions are kept relative to the histogram origin (the earliest
//! timestamp), so every quantity here is invariant under a time shift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// Bins never exceed this many per event; bounds memory when the
/// Freedman-Diaconis width collapses on a tight cluster inside a long span.
pub const MAX_BINS_PER_EVENT: usize = 4;

/// Fraction of the largest altitude a burst must reach to be kept.
pub const SIGNIFICANT_ALTITUDE: f64 = 0.5;

/// Histogram of one object's timestamps with uniform bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesHist<T> {
    /// Left edge of the first bin, in seconds.
    pub origin: i64,
    pub bin_width: T,
    pub counts: Vec<T>,
}

impl<T: Scalar> TimeSeriesHist<T> {
    /// Bins `timestamps` with `k = max(Sturges, Freedman-Diaconis)`.
    ///
    /// All-equal input yields one bin of width 1 second. When the
    /// interquartile range is zero the Freedman-Diaconis rule is skipped.
    pub fn build(timestamps: &[i64]) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut sorted = timestamps.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let lo = sorted[0];
        let hi = sorted[n - 1];
        if lo == hi {
            return Ok(Self {
                origin: lo,
                bin_width: T::one(),
                counts: vec![T::from_count(n)],
            });
        }
        let k = bin_count(&sorted);
        let range = (hi - lo) as f64;
        let width = range / k as f64;
        let mut counts = vec![0usize; k];
        for &t in &sorted {
            counts[bin_index(t, lo, width, k)] += 1;
        }
        Ok(Self {
            origin: lo,
            bin_width: T::lit(width),
            counts: counts.into_iter().map(T::from_count).collect(),
        })
    }

    /// Histogram from explicit counts, for simulated series.
    pub fn from_counts(origin: i64, bin_width: T, counts: Vec<T>) -> Result<Self> {
        if !(bin_width > T::zero()) {
            return Err(Error::InvalidParameter("bin width must be positive".into()));
        }
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            origin,
            bin_width,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bin center offset from the origin, in seconds.
    #[inline]
    pub fn center(&self, i: usize) -> T {
        (T::from_count(i) + T::lit(0.5)) * self.bin_width
    }

    /// Absolute bin center in seconds.
    pub fn absolute_center(&self, i: usize) -> f64 {
        self.origin as f64 + self.center(i).as_f64()
    }

    pub fn total(&self) -> T {
        self.counts.iter().copied().sum()
    }

    /// Bin holding timestamp `t`; values outside the span clamp to the ends.
    pub fn bin_of(&self, t: i64) -> usize {
        let w = self.bin_width.as_f64();
        bin_index(t, self.origin, w, self.len())
    }

    fn point(&self, i: usize) -> (T, T) {
        (self.center(i), self.counts[i])
    }

    fn argmax(&self, i: usize, j: usize) -> usize {
        let mut best = i;
        for k in i + 1..=j {
            if self.counts[k] > self.counts[best] {
                best = k;
            }
        }
        best
    }

    /// Index in `candidates` farthest from the line through points `p` and
    /// `q`; near-ties within rounding resolve to the earliest index.
    fn farthest_from_line(&self, p: usize, q: usize, candidates: std::ops::Range<usize>) -> usize {
        let (xp, cp) = self.point(p);
        let (xq, cq) = self.point(q);
        let dc = cq - cp;
        let dx = xq - xp;
        let norm = (dc * dc + dx * dx).sqrt();
        let offset = xq * cp - cq * xp;
        let cmax = self.counts[p].abs().max(self.counts[q].abs());
        let tol = T::epsilon()
            * T::lit(64.0)
            * (dc.abs() * xq.abs().max(xp.abs()) + dx.abs() * cmax + offset.abs())
            / norm;
        let mut best = candidates.start;
        let mut best_d = T::neg_infinity();
        for k in candidates {
            let (xk, ck) = self.point(k);
            let d = (dc * xk - dx * ck + offset).abs() / norm;
            if d > best_d + tol {
                best = k;
                best_d = d;
            }
        }
        best
    }
}

fn bin_count(sorted: &[i64]) -> usize {
    let n = sorted.len();
    let range = (sorted[n - 1] - sorted[0]) as f64;
    let sturges = (n as f64).log2().ceil() as usize + 1;
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let fd = if iqr > 0.0 {
        let width = 2.0 * iqr * (n as f64).powf(-1.0 / 3.0);
        (range / width).ceil() as usize
    } else {
        0
    };
    let cap = sturges.max(MAX_BINS_PER_EVENT * n);
    sturges.max(fd).min(cap).max(1)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[i64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] - sorted[lo]) as f64 * frac
}

fn bin_index(t: i64, origin: i64, width: f64, k: usize) -> usize {
    let rel = (t - origin) as f64 / width;
    if rel <= 0.0 {
        0
    } else {
        (rel.floor() as usize).min(k - 1)
    }
}

/// One awakening/burst pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstPair<T> {
    pub awakening: usize,
    pub burst: usize,
    pub t_a: T,
    pub c_a: T,
    pub t_m: T,
    pub c_m: T,
    /// Rise slope in counts per second.
    pub slope: T,
    pub altitude: T,
}

/// A burst point, its dying point and the fall between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropInfo<T> {
    pub burst: usize,
    pub dying: usize,
    pub t_m: T,
    pub c_m: T,
    pub t_d: T,
    pub c_d: T,
    /// Fall slope in counts per second (positive).
    pub slope: T,
    pub fall: T,
}

/// Awakening point for the maximum within `[i, j]`.
///
/// Returns `None` when the maximum sits at `i` (nothing rises to it).
pub fn awakening_point<T: Scalar>(h: &TimeSeriesHist<T>, i: usize, j: usize) -> Result<Option<usize>> {
    if j >= h.len() || j < i + 2 {
        return Err(Error::WindowTooShort(j.saturating_sub(i) + 1));
    }
    let m = h.argmax(i, j);
    Ok(awakening_for(h, i, m))
}

fn awakening_for<T: Scalar>(h: &TimeSeriesHist<T>, i: usize, m: usize) -> Option<usize> {
    match m - i {
        0 => None,
        1 => Some(i),
        _ => Some(h.farthest_from_line(i, m, i + 1..m)),
    }
}

fn make_pair<T: Scalar>(h: &TimeSeriesHist<T>, a: usize, m: usize) -> BurstPair<T> {
    let (t_a, c_a) = h.point(a);
    let (t_m, c_m) = h.point(m);
    let altitude = c_m - c_a;
    BurstPair {
        awakening: a,
        burst: m,
        t_a,
        c_a,
        t_m,
        c_m,
        slope: altitude / (t_m - t_a),
        altitude,
    }
}

/// All awakening/burst pairs found by the recursive search, before the
/// significance filter. Zero-altitude pairs are dropped.
pub fn multiburst_unfiltered<T: Scalar>(h: &TimeSeriesHist<T>) -> Vec<BurstPair<T>> {
    let mut out = Vec::new();
    if h.len() < 3 {
        return out;
    }
    let mut stack = vec![(0usize, h.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        if j < i + 2 {
            continue;
        }
        let m = h.argmax(i, j);
        let awakening = awakening_for(h, i, m);
        if let Some(a) = awakening {
            let pair = make_pair(h, a, m);
            if pair.altitude > T::zero() {
                out.push(pair);
            }
        }
        // right part: from the first local minimum after the burst
        if m < j {
            let k = first_local_min(h, m + 1, j);
            stack.push((k, j));
        }
        if let Some(a) = awakening {
            if a > i {
                stack.push((i, a - 1));
            }
        }
    }
    out.sort_by_key(|p| p.awakening);
    out
}

/// First `k` in `[from, j]` with `c_k <= c_{k+1}`; `j` when none.
fn first_local_min<T: Scalar>(h: &TimeSeriesHist<T>, from: usize, j: usize) -> usize {
    (from..j)
        .find(|&k| h.counts[k] <= h.counts[k + 1])
        .unwrap_or(j)
}

/// Significant awakening/burst pairs: those whose altitude reaches half of
/// the largest one.
pub fn multiburst<T: Scalar>(h: &TimeSeriesHist<T>) -> Vec<BurstPair<T>> {
    let pairs = multiburst_unfiltered(h);
    let top = pairs
        .iter()
        .map(|p| p.altitude)
        .fold(T::zero(), |a, b| a.max(b));
    let floor = top * T::lit(SIGNIFICANT_ALTITUDE);
    pairs.into_iter().filter(|p| p.altitude >= floor).collect()
}

/// The drop with the largest fall found by recursing left of each burst and
/// right of each dying point.
pub fn max_drop<T: Scalar>(h: &TimeSeriesHist<T>) -> Option<DropInfo<T>> {
    if h.len() < 3 {
        return None;
    }
    let mut best: Option<DropInfo<T>> = None;
    let mut stack = vec![(0usize, h.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        if j < i + 2 {
            continue;
        }
        let m = h.argmax(i, j);
        if m > i + 1 {
            stack.push((i, m - 1));
        }
        if m == j {
            continue;
        }
        let d = if m + 1 == j {
            j
        } else {
            h.farthest_from_line(m, j, m + 1..j)
        };
        let (t_m, c_m) = h.point(m);
        let (t_d, c_d) = h.point(d);
        let fall = c_m - c_d;
        if fall > T::zero() {
            let cand = DropInfo {
                burst: m,
                dying: d,
                t_m,
                c_m,
                t_d,
                c_d,
                slope: fall / (t_d - t_m),
                fall,
            };
            let better = match &best {
                None => true,
                Some(b) => cand.fall > b.fall || (cand.fall == b.fall && cand.burst < b.burst),
            };
            if better {
                best = Some(cand);
            }
        }
        stack.push((d, j));
    }
    best
}

/// `log2(1 + fall * slope)`, zero without a drop.
pub fn drop_edge_weight<T: Scalar>(drop: Option<&DropInfo<T>>) -> T {
    match drop {
        Some(d) => (T::one() + d.fall * d.slope).log2(),
        None => T::zero(),
    }
}

/// Column weights `1 + w(v) / max w` from per-object drop weights.
pub fn drop_column_weights<T: Scalar>(drop_weights: &[T]) -> Vec<T> {
    let top = drop_weights.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if top <= T::zero() {
        return vec![T::one(); drop_weights.len()];
    }
    drop_weights.iter().map(|&w| T::one() + w / top).collect()
}

/// Spike summary of one object, computed once from all its timestamps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeProfile<T> {
    pub pairs: Vec<BurstPair<T>>,
    pub max_drop: Option<DropInfo<T>>,
    /// `Phi(T_U)` for the object's full timestamp list.
    pub phi_denominator: T,
}

impl<T: Scalar> SpikeProfile<T> {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            max_drop: None,
            phi_denominator: T::zero(),
        }
    }

    /// Histogram and profile of an object's timestamps. Objects with fewer
    /// than three events get an empty profile.
    pub fn build(timestamps: &[i64]) -> Result<(TimeSeriesHist<T>, Self)> {
        let h = TimeSeriesHist::build(timestamps)?;
        if timestamps.len() < 3 {
            return Ok((h, Self::empty()));
        }
        let mut profile = Self::from_hist(&h);
        profile.phi_denominator = profile.phi_sum(&h, timestamps);
        Ok((h, profile))
    }

    /// Pairs and drop of a histogram; the denominator is left at zero.
    pub fn from_hist(h: &TimeSeriesHist<T>) -> Self {
        Self {
            pairs: multiburst(h),
            max_drop: max_drop(h),
            phi_denominator: T::zero(),
        }
    }

    /// Contribution `dc * s` of one timestamp: nonzero when its bin lies in
    /// an awakening..burst window.
    pub fn event_weight(&self, h: &TimeSeriesHist<T>, t: i64) -> T {
        let b = h.bin_of(t);
        // pairs are sorted by awakening and do not overlap
        let idx = self.pairs.partition_point(|p| p.awakening <= b);
        if idx == 0 {
            return T::zero();
        }
        let p = &self.pairs[idx - 1];
        if b <= p.burst {
            p.altitude * p.slope
        } else {
            T::zero()
        }
    }

    /// `Phi(T)`.
    pub fn phi_sum(&self, h: &TimeSeriesHist<T>, timestamps: &[i64]) -> T {
        timestamps
            .iter()
            .map(|&t| self.event_weight(h, t))
            .collect::<CompensatedSum<T>>()
            .value()
    }
}

/// `phi = Phi(T_A) / Phi(T_U)`, zero when the denominator vanishes.
/// `subset` must be contained in `all` as a multiset.
pub fn phi_involvement<T: Scalar>(
    profile: &SpikeProfile<T>,
    h: &TimeSeriesHist<T>,
    subset: &[i64],
    all: &[i64],
) -> Result<T> {
    if !is_submultiset(subset, all) {
        return Err(Error::InconsistentTimestamps);
    }
    let den = profile.phi_sum(h, all);
    if den <= T::zero() {
        return Ok(T::zero());
    }
    Ok((profile.phi_sum(h, subset) / den).min(T::one()))
}

fn is_submultiset(sub: &[i64], all: &[i64]) -> bool {
    let mut a = sub.to_vec();
    let mut b = all.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Minimum duration and burst height of an attack of `n_edges` events that
/// stays within normal rise slope `rise` and decline slope `decline`.
///
/// `tau = sqrt(2 N dt (S1 + S2) / (S1 S2))`, `c_m = sqrt(2 N dt S1 S2 / (S1 + S2))`.
pub fn time_obstruction_bound<T: Scalar>(n_edges: T, bin_width: T, rise: T, decline: T) -> Result<(T, T)> {
    let z = T::zero();
    if !(n_edges > z && bin_width > z && rise > z && decline > z) {
        return Err(Error::InvalidParameter(
            "time obstruction bound needs positive inputs".into(),
        ));
    }
    let two = T::lit(2.0);
    let tau = (two * n_edges * bin_width * (rise + decline) / (rise * decline)).sqrt();
    let height = (two * n_edges * bin_width * rise * decline / (rise + decline)).sqrt();
    Ok((tau, height))
}
