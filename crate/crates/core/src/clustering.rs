//! Weighted k-means with k-means++ seeding.
//!
//! Points are passed as flat row-major slices of dimension `dim`. Labels are
//! zero-based.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::smc::count_distinct;

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// `Σ_p Σ_{j ∈ S_p} w_j ‖x_j − y_p‖²`
    pub objective: f64,
    pub iterations: usize,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Indices of the points carrying each label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: the first centroid is uniform over the points, each
/// further one is drawn with probability proportional to the squared
/// distance to the nearest centroid chosen so far.
pub fn kmeans_pp_init<R: Rng + ?Sized>(points: &[f64], dim: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    let n = points.len() / dim;
    let found = count_distinct(points, dim, k);
    if found < k {
        return Err(Error::TooFewDistinctPoints { needed: k, found });
    }
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let first = rng.random_range(0..n);
    let mut centroids = vec![point(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centroids[0])).collect();
    while centroids.len() < k {
        let pick = WeightedIndex::new(&d2)
            .map_err(|_| Error::TooFewDistinctPoints {
                needed: k,
                found: centroids.len(),
            })?
            .sample(rng);
        let c = point(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Value of the weighted k-means objective for a labelling.
pub fn objective(points: &[f64], dim: usize, weights: &[f64], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .chunks_exact(dim)
        .zip(weights)
        .zip(labels)
        .map(|((p, w), &l)| w * sq_dist(p, &centroids[l]))
        .sum()
}

/// Lloyd iteration from k-means++ seeds until no label changes.
pub fn weighted_kmeans<R: Rng + ?Sized>(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    k: usize,
    max_iters: usize,
    rng: &mut R,
) -> Result<Clustering> {
    let init = kmeans_pp_init(points, dim, k, rng)?;
    lloyd(points, dim, weights, init, max_iters)
}

/// Best of `restarts` independently seeded runs of [`weighted_kmeans`]
/// (lowest objective, earliest run on ties). Runs hitting the iteration cap
/// are discarded; the error is returned only if every run fails.
pub fn weighted_kmeans_best<R: Rng + ?Sized>(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    k: usize,
    max_iters: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<Clustering> {
    let mut best: Option<Clustering> = None;
    let mut last_err = None;
    for _ in 0..restarts.max(1) {
        match weighted_kmeans(points, dim, weights, k, max_iters, rng) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.objective < b.objective) {
                    best = Some(c);
                }
            }
            Err(e @ Error::MaxItersExceeded(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one run"))
}

/// Lloyd iteration from the given centroids.
pub fn lloyd(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    centroids: Vec<Vec<f64>>,
    max_iters: usize,
) -> Result<Clustering> {
    lloyd_traced(points, dim, weights, centroids, max_iters, None)
}

fn lloyd_traced(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    mut centroids: Vec<Vec<f64>>,
    max_iters: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Clustering> {
    let n = points.len() / dim;
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            particles: n,
            weights: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidWeights(
            "k-means needs nonnegative weights with positive sum".into(),
        ));
    }
    let k = centroids.len();
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut labels: Vec<usize> = (0..n).map(|i| nearest(point(i), &centroids)).collect();

    for iter in 1..=max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        let mut count = vec![0usize; k];
        for i in 0..n {
            let l = labels[i];
            count[l] += 1;
            let w = weights[i];
            if w > 0.0 {
                mass[l] += w;
                for (s, x) in sums[l].iter_mut().zip(point(i)) {
                    *s += w * x;
                }
            }
        }
        for j in 0..k {
            if mass[j] > 0.0 {
                centroids[j] = sums[j].iter().map(|s| s / mass[j]).collect();
            }
            // A cluster holding only zero-weight points keeps its centroid.
        }
        for j in 0..k {
            if count[j] == 0 {
                // Reseed at the worst-served point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = weights[a] * sq_dist(point(a), &centroids[labels[a]]);
                        let db = weights[b] * sq_dist(point(b), &centroids[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                centroids[j] = point(far).to_vec();
                count[labels[far]] -= 1;
                labels[far] = j;
                count[j] = 1;
            }
        }

        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let l = nearest(point(i), &centroids);
            if l != *label {
                *label = l;
                changed = true;
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(points, dim, weights, &labels, &centroids));
        }
        if !changed {
            let obj = objective(points, dim, weights, &labels, &centroids);
            return Ok(Clustering {
                labels,
                centroids,
                objective: obj,
                iterations: iter,
            });
        }
    }
    Err(Error::MaxItersExceeded(max_iters))
}
