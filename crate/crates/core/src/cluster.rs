//! k-means++ seeding, Lloyd k-means and X-means for dominant color
//! extraction.
//!
//! Points are fixed-size `[f64; D]` arrays. Every routine is deterministic
//! for a given seed: randomness comes from a seeded ChaCha stream and the
//! parallel assignment pass writes each point's label independently.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points above this count are assigned in parallel.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub initial_k: usize,
    pub max_k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Lloyd iterations stop once no center moves farther than this.
    pub tolerance: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            initial_k: 2,
            max_k: 8,
            seed: 42,
            max_iterations: 100,
            tolerance: 1e-4,
        }
    }
}

impl ClusterConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_k == 0 || self.initial_k > self.max_k {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= initial_k <= max_k, got {} and {}",
                self.initial_k, self.max_k
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Result of a clustering run. No cluster is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<const D: usize> {
    pub centers: Vec<[f64; D]>,
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
}

impl<const D: usize> ClusterModel<D> {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Sum of squared distances from each point to its assigned center.
    pub fn inertia(&self, points: &[[f64; D]]) -> f64 {
        points
            .iter()
            .zip(&self.assignments)
            .map(|(p, &a)| sq_dist(p, &self.centers[a]))
            .sum()
    }
}

#[inline]
pub fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

fn key<const D: usize>(p: &[f64; D]) -> [u64; D] {
    // +0.0 folds -0.0 onto 0.0
    p.map(|v| (v + 0.0).to_bits())
}

pub fn distinct_points<const D: usize>(points: &[[f64; D]]) -> Vec<[f64; D]> {
    let mut seen = HashSet::with_capacity(points.len().min(1 << 16));
    points
        .iter()
        .filter(|p| seen.insert(key(p)))
        .copied()
        .collect()
}

pub fn distinct_count<const D: usize>(points: &[[f64; D]]) -> usize {
    let mut seen = HashSet::with_capacity(points.len().min(1 << 16));
    points.iter().filter(|p| seen.insert(key(p))).count()
}

/// k-means++ seeding: first center uniform, each further center drawn with
/// probability proportional to its squared distance from the nearest chosen
/// center.
pub fn kmeans_pp_init<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    seed: u64,
) -> Result<Vec<[f64; D]>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("k-means++ needs at least one point"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::TooFewDistinct { k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();

    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &w) in nearest.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(i);
            if acc > target {
                break;
            }
        }
        // k <= distinct guarantees some positive weight remains
        let c = points[chosen.expect("positive D² mass")];
        centers.push(c);
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(p, &c));
        }
    }
    Ok(centers)
}

fn nearest_center<const D: usize>(p: &[f64; D], centers: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign<const D: usize>(points: &[[f64; D]], centers: &[[f64; D]]) -> Vec<(usize, f64)> {
    if points.len() >= PARALLEL_THRESHOLD {
        points
            .par_iter()
            .map(|p| nearest_center(p, centers))
            .collect()
    } else {
        points.iter().map(|p| nearest_center(p, centers)).collect()
    }
}

/// Moves the farthest point of a multi-member cluster into each empty
/// cluster. Returns whether anything changed.
fn repair_empty<const D: usize>(
    points: &[[f64; D]],
    centers: &mut [[f64; D]],
    labels: &mut [(usize, f64)],
) -> bool {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &(a, _) in labels.iter() {
        counts[a] += 1;
    }
    let mut changed = false;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, &(a, d)) in labels.iter().enumerate() {
            if counts[a] > 1 && far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { break };
        counts[labels[i].0] -= 1;
        counts[j] += 1;
        labels[i] = (j, 0.0);
        centers[j] = points[i];
        changed = true;
    }
    changed
}

fn means<const D: usize>(points: &[[f64; D]], labels: &[(usize, f64)], centers: &mut [[f64; D]]) {
    let k = centers.len();
    let mut sums = vec![[0.0; D]; k];
    let mut counts = vec![0usize; k];
    for (p, &(a, _)) in points.iter().zip(labels) {
        counts[a] += 1;
        for d in 0..D {
            sums[a][d] += p[d];
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let n = counts[j] as f64;
            centers[j] = sums[j].map(|s| s / n);
        }
    }
}

/// Lloyd iterations starting from the given centers.
pub fn kmeans_from<const D: usize>(
    points: &[[f64; D]],
    initial: Vec<[f64; D]>,
    cfg: &ClusterConfig,
) -> Result<ClusterModel<D>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("k-means needs at least one point"));
    }
    if initial.is_empty() {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let mut centers = initial;
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..cfg.max_iterations.max(1) {
        let mut labels = assign(points, &centers);
        repair_empty(points, &mut centers, &mut labels);

        let inertia: f64 = labels.iter().map(|&(_, d)| d).sum();
        debug_assert!(
            inertia <= prev_inertia + 1e-9 * prev_inertia.abs().max(1.0),
            "inertia increased: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;

        let old = centers.clone();
        means(points, &labels, &mut centers);
        let movement = old
            .iter()
            .zip(&centers)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        if movement < cfg.tolerance {
            break;
        }
    }

    let mut labels = assign(points, &centers);
    repair_empty(points, &mut centers, &mut labels);
    means(points, &labels, &mut centers);

    let mut counts = vec![0usize; centers.len()];
    let assignments: Vec<usize> = labels
        .iter()
        .map(|&(a, _)| {
            counts[a] += 1;
            a
        })
        .collect();
    Ok(ClusterModel {
        centers,
        assignments,
        counts,
    })
}

/// k-means with k-means++ seeding.
pub fn kmeans<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    cfg: &ClusterConfig,
) -> Result<ClusterModel<D>> {
    let init = kmeans_pp_init(points, k, cfg.seed)?;
    kmeans_from(points, init, cfg)
}

fn binomial(n: usize, k: usize) -> usize {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Best-inertia k-means over many starts: every `k`-subset of the distinct
/// points when there are at most `subset_limit` of them, plus `restarts`
/// k-means++ seeds derived from `cfg.seed`.
pub fn kmeans_multi_start<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    cfg: &ClusterConfig,
    restarts: usize,
    subset_limit: usize,
) -> Result<ClusterModel<D>> {
    let distinct = distinct_points(points);
    if points.is_empty() {
        return Err(Error::EmptyInput("k-means needs at least one point"));
    }
    if k == 0 || k > distinct.len() {
        return Err(Error::TooFewDistinct {
            k,
            distinct: distinct.len(),
        });
    }

    let mut best: Option<(f64, ClusterModel<D>)> = None;
    let mut consider = |m: ClusterModel<D>| {
        let inertia = m.inertia(points);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, m));
        }
    };

    if binomial(distinct.len(), k) <= subset_limit {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let init = idx.iter().map(|&i| distinct[i]).collect();
            consider(kmeans_from(points, init, cfg)?);
            // next combination in lexicographic order
            let mut i = k;
            while i > 0 && idx[i - 1] == distinct.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    for r in 0..restarts {
        let c = ClusterConfig {
            seed: derive_seed(cfg.seed, r as u64, 0),
            ..*cfg
        };
        consider(kmeans(points, k, &c)?);
    }
    Ok(best.expect("at least one start").1)
}

pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_add(1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bayesian information criterion of a spherical Gaussian mixture with one
/// shared per-dimension variance and free means. Larger is better.
///
/// Returns `-inf` when there are no residual degrees of freedom and `+inf`
/// when the fit is exact.
pub fn bic<const D: usize>(points: &[[f64; D]], model: &ClusterModel<D>) -> f64 {
    let r = points.len() as f64;
    let k = model.k() as f64;
    let m = D as f64;
    if points.len() <= model.k() {
        return f64::NEG_INFINITY;
    }
    let ss = model.inertia(points);
    let log_lik = if ss <= 0.0 {
        f64::INFINITY
    } else {
        let var = ss / (m * (r - k));
        let mix: f64 = model
            .counts
            .iter()
            .filter(|&&n| n > 0)
            .map(|&n| {
                let n = n as f64;
                n * (n / r).ln()
            })
            .sum();
        mix - r * m / 2.0 * (2.0 * std::f64::consts::PI * var).ln() - m * (r - k) / 2.0
    };
    let params = (k - 1.0) + m * k + 1.0;
    log_lik - params / 2.0 * r.ln()
}

fn single_cluster<const D: usize>(points: &[[f64; D]]) -> ClusterModel<D> {
    let n = points.len() as f64;
    let mut c = [0.0; D];
    for p in points {
        for d in 0..D {
            c[d] += p[d];
        }
    }
    ClusterModel {
        centers: vec![c.map(|s| s / n)],
        assignments: vec![0; points.len()],
        counts: vec![points.len()],
    }
}

/// X-means: starts from `initial_k` k-means++ clusters and repeatedly tries
/// to split every cluster in two, keeping a split when the children's BIC
/// beats the parent's on the parent's points. Accepted splits are refined by
/// a global k-means pass. Stops when nothing splits or `max_k` is reached.
pub fn xmeans<const D: usize>(points: &[[f64; D]], cfg: &ClusterConfig) -> Result<ClusterModel<D>> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput("x-means needs at least one point"));
    }
    let distinct = distinct_count(points);
    let mut model = kmeans(points, cfg.initial_k.min(distinct), cfg)?;

    for round in 0u64.. {
        if model.k() >= cfg.max_k {
            break;
        }
        let mut members: Vec<Vec<[f64; D]>> = vec![Vec::new(); model.k()];
        for (p, &a) in points.iter().zip(&model.assignments) {
            members[a].push(*p);
        }

        let mut accepted: Vec<(usize, [[f64; D]; 2], f64)> = Vec::new();
        for (j, pts) in members.iter().enumerate() {
            if pts.len() < 3 || distinct_count(pts) < 2 {
                continue;
            }
            let local = ClusterConfig {
                seed: derive_seed(cfg.seed, round, j as u64),
                ..*cfg
            };
            let children = kmeans(pts, 2, &local)?;
            let gain = bic(pts, &children) - bic(pts, &single_cluster(pts));
            if gain > 0.0 {
                accepted.push((j, [children.centers[0], children.centers[1]], gain));
            }
        }
        if accepted.is_empty() {
            break;
        }
        let room = cfg.max_k - model.k();
        if accepted.len() > room {
            accepted.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
            accepted.truncate(room);
            accepted.sort_by_key(|a| a.0);
        }

        let mut centers = Vec::with_capacity(model.k() + accepted.len());
        let mut next = accepted.iter().peekable();
        for (j, c) in model.centers.iter().enumerate() {
            match next.peek() {
                Some((aj, pair, _)) if *aj == j => {
                    centers.extend_from_slice(pair);
                    next.next();
                }
                _ => centers.push(*c),
            }
        }
        model = kmeans_from(points, centers, cfg)?;
    }
    Ok(model)
}

/// Center of the most populated cluster and its share of all points. Ties go
/// to the lowest cluster index.
pub fn dominant_cluster<const D: usize>(model: &ClusterModel<D>) -> ([f64; D], f64) {
    let total: usize = model.counts.iter().sum();
    let mut best = 0;
    for (j, &c) in model.counts.iter().enumerate() {
        if c > model.counts[best] {
            best = j;
        }
    }
    let share = if total == 0 {
        0.0
    } else {
        model.counts[best] as f64 / total as f64
    };
    (model.centers[best], share)
}
