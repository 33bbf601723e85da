//! Time-series k-means over sampled target trajectories, and the virtual
//! target set built from it.
//!
//! Two trajectories on the same grid are compared with the sum of squared
//! position differences over all grid points. Centroids are pointwise means.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::prediction::{SampleBundle, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid point moves farther than this (m).
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutput {
    pub centroids: Vec<Trajectory>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
    /// Objective after each iteration, i.e. Σ d(sample, its centroid).
    pub objective_trace: Vec<f64>,
}

impl KMeansOutput {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

#[inline]
fn sq_dist(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (*p - *q).norm_squared()).sum()
}

/// Sum of squared pointwise distances between two equal-length series.
pub fn series_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    sq_dist(a, b)
}

/// Flat result of a Lloyd run over row-major series of length `n_t`.
struct FlatFit {
    centroids: Vec<Vec2>,
    assignment: Vec<usize>,
    iterations: usize,
    objective_trace: Vec<f64>,
}

fn kmeans_plus_plus<R: Rng>(points: &[Vec2], n_t: usize, k: usize, rng: &mut R) -> Vec<Vec2> {
    let n = points.len() / n_t;
    let row = |i: usize| &points[i * n_t..(i + 1) * n_t];
    let mut centroids = Vec::with_capacity(k * n_t);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(w) => w.sample(rng),
            // every sample coincides with a chosen centroid
            Err(_) => rng.random_range(0..n),
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        let c = &centroids[start..];
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), c));
        }
    }
    centroids
}

const UNASSIGNED: usize = usize::MAX;

#[inline]
fn sq_dist_flat(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..4 {
            let d = x[j] - y[j];
            acc[j] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exact Lloyd iterations with Hamerly's bounds.
///
/// Each sample keeps an upper bound on the distance to its own centroid and a
/// lower bound on the distance to every other one; the full scan is skipped
/// while the bounds prove the assignment cannot change. The result matches
/// the plain algorithm, including lowest-index tie breaking, because a skip
/// requires a strict margin.
fn lloyd(
    points: &[Vec2],
    n_t: usize,
    k: usize,
    centroids: Vec<Vec2>,
    opts: KMeansOptions,
    track_objective: bool,
) -> FlatFit {
    let dim = 2 * n_t;
    let xs: Vec<f64> = points.iter().flat_map(|p| [p.x, p.y]).collect();
    let mut cs: Vec<f64> = centroids.iter().flat_map(|p| [p.x, p.y]).collect();
    let n = xs.len() / dim;
    let row = |i: usize| &xs[i * dim..(i + 1) * dim];

    let mut assignment = vec![0usize; n];
    let mut previous = vec![UNASSIGNED; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut lower = vec![0.0f64; n];
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0f64; k * dim];
    let mut half_sep = vec![0.0f64; k];
    let mut moved = vec![0.0f64; k];
    let mut next = vec![0.0f64; k * dim];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut first = true;

    while iterations < opts.max_iter.max(1) {
        iterations += 1;

        for c in 0..k {
            let cc = &cs[c * dim..(c + 1) * dim];
            let mut m = f64::INFINITY;
            for o in 0..k {
                if o != c {
                    m = m.min(sq_dist_flat(cc, &cs[o * dim..(o + 1) * dim]));
                }
            }
            half_sep[c] = 0.5 * m.sqrt();
        }

        for i in 0..n {
            let x = row(i);
            if !first {
                let bound = half_sep[assignment[i]].max(lower[i]);
                let bound = bound - 1e-9 * bound - 1e-12;
                if upper[i] < bound {
                    continue;
                }
                let a = assignment[i];
                upper[i] = sq_dist_flat(x, &cs[a * dim..(a + 1) * dim]).sqrt();
                if upper[i] < bound {
                    continue;
                }
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            let mut second_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist_flat(x, &cs[c * dim..(c + 1) * dim]);
                if d < best_d {
                    second_d = best_d;
                    best_d = d;
                    best = c;
                } else if d < second_d {
                    second_d = d;
                }
            }
            assignment[i] = best;
            upper[i] = best_d.sqrt();
            lower[i] = second_d.sqrt();
        }
        first = false;

        counts.iter_mut().for_each(|c| *c = 0);
        for &a in &assignment {
            counts[a] += 1;
        }

        // Empty clusters take the sample farthest from its centroid, drawn
        // only from clusters that can spare one.
        if counts.contains(&0) {
            let mut dist: Vec<f64> = (0..n)
                .map(|i| {
                    let a = assignment[i];
                    sq_dist_flat(row(i), &cs[a * dim..(a + 1) * dim])
                })
                .collect();
            for c in 0..k {
                if counts[c] > 0 {
                    continue;
                }
                let mut donor = None;
                let mut donor_d = f64::NEG_INFINITY;
                for i in 0..n {
                    if counts[assignment[i]] > 1 && dist[i] > donor_d {
                        donor_d = dist[i];
                        donor = Some(i);
                    }
                }
                let i = donor.expect("k <= n guarantees a donor cluster");
                counts[assignment[i]] -= 1;
                assignment[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
                // the new centroid is this sample; other distances are unknown
                upper[i] = 0.0;
                lower[i] = 0.0;
            }
        }

        // Sums are kept incrementally: only samples that changed cluster move.
        for i in 0..n {
            let (from, to) = (previous[i], assignment[i]);
            if from == to {
                continue;
            }
            let x = row(i);
            if from != UNASSIGNED {
                for (s, p) in sums[from * dim..(from + 1) * dim].iter_mut().zip(x) {
                    *s -= *p;
                }
            }
            for (s, p) in sums[to * dim..(to + 1) * dim].iter_mut().zip(x) {
                *s += *p;
            }
            previous[i] = to;
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let base = c * dim;
            for t in 0..n_t {
                let (ix, iy) = (base + 2 * t, base + 2 * t + 1);
                next[ix] = sums[ix] * inv;
                next[iy] = sums[iy] * inv;
                let (dx, dy) = (next[ix] - cs[ix], next[iy] - cs[iy]);
                shift = shift.max((dx * dx + dy * dy).sqrt());
            }
            moved[c] = sq_dist_flat(&next[base..base + dim], &cs[base..base + dim]).sqrt();
        }
        std::mem::swap(&mut cs, &mut next);

        let (mut top, mut top_c, mut runner) = (0.0f64, 0usize, 0.0f64);
        for (c, &m) in moved.iter().enumerate() {
            if m > top {
                runner = top;
                top = m;
                top_c = c;
            } else if m > runner {
                runner = m;
            }
        }
        for i in 0..n {
            let a = assignment[i];
            upper[i] += moved[a];
            lower[i] -= if a == top_c { runner } else { top };
        }

        if track_objective {
            let objective = (0..n)
                .map(|i| {
                    let c = assignment[i];
                    sq_dist_flat(row(i), &cs[c * dim..(c + 1) * dim])
                })
                .sum();
            trace.push(objective);
        }

        if shift < opts.tol {
            break;
        }
    }

    FlatFit {
        centroids: cs.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect(),
        assignment,
        iterations,
        objective_trace: trace,
    }
}

fn fit_flat<R: Rng>(
    points: &[Vec2],
    n_t: usize,
    k: usize,
    init: Option<Vec<Vec2>>,
    opts: KMeansOptions,
    track_objective: bool,
    rng: &mut R,
) -> Result<FlatFit> {
    if n_t == 0 {
        return Err(Error::EmptyGrid);
    }
    let n = points.len() / n_t;
    if k == 0 || k > n {
        return Err(Error::InvalidClusterCount { k, samples: n });
    }
    let centroids = match init {
        Some(c) => {
            if c.len() != k * n_t {
                return Err(Error::InvalidClusterCount { k, samples: n });
            }
            c
        }
        None => kmeans_plus_plus(points, n_t, k, rng),
    };
    Ok(lloyd(points, n_t, k, centroids, opts, track_objective))
}

fn unflatten(times: &[f64], flat: &[Vec2]) -> Vec<Trajectory> {
    flat.chunks(times.len())
        .map(|c| Trajectory {
            times: times.to_vec(),
            positions: c.to_vec(),
        })
        .collect()
}

/// Lloyd's k-means over trajectories sharing one time grid.
///
/// Without `init`, centroids are seeded with k-means++ from `rng`. Ties in the
/// assignment step go to the lowest cluster index.
pub fn ts_kmeans<R: Rng>(
    samples: &[Trajectory],
    k: usize,
    init: Option<&[Trajectory]>,
    opts: KMeansOptions,
    rng: &mut R,
) -> Result<KMeansOutput> {
    let first = samples
        .first()
        .ok_or(Error::InvalidClusterCount { k, samples: 0 })?;
    let times = &first.times;
    if times.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if samples.iter().any(|s| s.times != *times) {
        return Err(Error::GridMismatch);
    }
    let init = match init {
        Some(init) => {
            if init.iter().any(|c| c.times != *times) {
                return Err(Error::GridMismatch);
            }
            if init.len() != k {
                return Err(Error::InvalidClusterCount {
                    k,
                    samples: samples.len(),
                });
            }
            Some(init.iter().flat_map(|c| c.positions.iter().copied()).collect())
        }
        None => None,
    };
    let points: Vec<Vec2> = samples
        .iter()
        .flat_map(|s| s.positions.iter().copied())
        .collect();
    let fit = fit_flat(&points, times.len(), k, init, opts, true, rng)?;
    Ok(KMeansOutput {
        centroids: unflatten(times, &fit.centroids),
        assignment: fit.assignment,
        iterations: fit.iterations,
        objective_trace: fit.objective_trace,
    })
}

/// The current virtual targets, one per active interceptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualTargetSet {
    pub vts: Vec<Trajectory>,
    /// Interceptor id pursuing each VT.
    pub owners: Vec<usize>,
    pub horizon_times: Vec<f64>,
    /// The VTs this set was warm-started from, before regridding.
    pub prev_centroids: Option<Vec<Trajectory>>,
}

impl VirtualTargetSet {
    pub fn len(&self) -> usize {
        self.vts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vts.is_empty()
    }

    pub fn slot_of(&self, interceptor: usize) -> Option<usize> {
        self.owners.iter().position(|&o| o == interceptor)
    }

    pub fn vt_for(&self, interceptor: usize) -> Option<&Trajectory> {
        self.slot_of(interceptor).map(|i| &self.vts[i])
    }
}

/// Re-clusters `bundle` into one VT per entry of `owners`.
///
/// With `prev`, each previous VT is interpolated onto the new grid and used as
/// the initial centroid for the same slot, so VT `i` stays attached to the
/// same interceptor. Without it, k-means++ seeding draws from `rng`.
pub fn update_vts<R: Rng>(
    bundle: &SampleBundle,
    owners: &[usize],
    prev: Option<&VirtualTargetSet>,
    opts: KMeansOptions,
    rng: &mut R,
) -> Result<VirtualTargetSet> {
    let k = owners.len();
    let times = &bundle.horizon_times;
    let init = match prev {
        Some(p) => {
            if p.owners != owners {
                return Err(Error::InvalidClusterCount {
                    k,
                    samples: bundle.len(),
                });
            }
            Some(
                p.vts
                    .iter()
                    .flat_map(|vt| times.iter().map(|&t| vt.position_at(t)))
                    .collect(),
            )
        }
        None => None,
    };
    let fit = fit_flat(bundle.points(), bundle.n_t(), k, init, opts, false, rng)?;
    Ok(VirtualTargetSet {
        vts: unflatten(times, &fit.centroids),
        owners: owners.to_vec(),
        horizon_times: times.clone(),
        prev_centroids: prev.map(|p| p.vts.clone()),
    })
}

/// Drops the VT in slot `index`; the other slots keep their owners.
pub fn remove_vt(set: &VirtualTargetSet, index: usize) -> Result<VirtualTargetSet> {
    if index >= set.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: set.len(),
        });
    }
    let mut out = set.clone();
    out.vts.remove(index);
    out.owners.remove(index);
    if let Some(prev) = out.prev_centroids.as_mut() {
        if index < prev.len() {
            prev.remove(index);
        }
    }
    Ok(out)
}
