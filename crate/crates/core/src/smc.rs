//! Weighted particle clouds and the Liu-West resampler.
//!
//! A [`ParticleCloud`] approximates a density by a convex combination of point
//! masses. Particles are stored row-major in one flat buffer so that the hot
//! loops (likelihood evaluation, resampling) stay cache friendly.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cholesky_jittered, compensated_sum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    dim: usize,
    particles: Vec<f64>,
    weights: Vec<f64>,
}

/// First two moments of a cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl ParticleCloud {
    /// Builds a cloud from flat row-major storage. Weights are renormalized.
    pub fn new(dim: usize, particles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || particles.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                len: particles.len(),
                dim,
            });
        }
        let n = particles.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        if weights.len() != n {
            return Err(Error::LengthMismatch {
                particles: n,
                weights: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let mut cloud = Self {
            dim,
            particles,
            weights,
        };
        let total = compensated_sum(cloud.weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        cloud.scale_weights(total);
        Ok(cloud)
    }

    /// Like [`ParticleCloud::new`] but keeps weights that already sum to one
    /// bit for bit, so stored clouds rebuild exactly.
    pub(crate) fn from_normalized(dim: usize, particles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Self::new(dim, particles, weights);
        }
        let checked = Self::new(dim, particles, weights.clone())?;
        Ok(Self { weights, ..checked })
    }

    /// Equal-weight cloud over the given flat particle storage.
    pub fn uniform(dim: usize, particles: Vec<f64>) -> Result<Self> {
        let n = particles.len().checked_div(dim).unwrap_or(0);
        Self::new(dim, particles, vec![1.0; n.max(1)])
    }

    /// Builds a cloud from one vector per particle.
    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptyCloud)?;
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { len: p.len(), dim });
            }
            flat.extend_from_slice(p);
        }
        Self::new(dim, flat, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat row-major particle storage.
    pub fn raw_particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.particles.chunks_exact(self.dim)
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / compensated_sum(self.weights.iter().map(|w| w * w))
    }

    pub fn moments(&self) -> Moments {
        let d = self.dim;
        let mut mean = DVector::zeros(d);
        for k in 0..d {
            mean[k] = compensated_sum(self.particles().zip(&self.weights).map(|(x, w)| w * x[k]));
        }
        let mut covariance = DMatrix::zeros(d, d);
        for (x, &w) in self.particles().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for r in 0..d {
                let dr = x[r] - mean[r];
                for c in r..d {
                    covariance[(r, c)] += w * dr * (x[c] - mean[c]);
                }
            }
        }
        for r in 0..d {
            for c in 0..r {
                covariance[(r, c)] = covariance[(c, r)];
            }
        }
        Moments { mean, covariance }
    }

    /// Multiplies each weight by its likelihood and renormalizes.
    ///
    /// Returns the normalizer `Σ w_j L_j`, which is the evidence this cloud
    /// assigns to the datum. The cloud is left untouched when that normalizer
    /// is zero.
    pub fn bayes_update(&mut self, likelihoods: &[f64]) -> Result<f64> {
        if likelihoods.len() != self.len() {
            return Err(Error::LengthMismatch {
                particles: self.len(),
                weights: likelihoods.len(),
            });
        }
        let z = compensated_sum(self.weights.iter().zip(likelihoods).map(|(w, l)| w * l));
        if !(z > 0.0) {
            return Err(Error::AllZeroLikelihood);
        }
        for (w, l) in self.weights.iter_mut().zip(likelihoods) {
            *w *= l;
        }
        self.scale_weights(z);
        Ok(z)
    }

    /// Same particles, weights restricted to `indices` and renormalized.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let mut particles = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            particles.extend_from_slice(self.particle(i));
            weights.push(self.weights[i]);
        }
        Self::new(self.dim, particles, weights)
    }

    /// Number of distinct particle positions, counting no further than `cap`.
    pub fn distinct_count(&self, cap: usize) -> usize {
        count_distinct(&self.particles, self.dim, cap)
    }

    fn scale_weights(&mut self, total: f64) {
        for w in &mut self.weights {
            *w /= total;
        }
        // A second pass absorbs the rounding left by the first division.
        let again = compensated_sum(self.weights.iter().copied());
        if again != 1.0 {
            for w in &mut self.weights {
                *w /= again;
            }
        }
    }
}

pub(crate) fn count_distinct(points: &[f64], dim: usize, cap: usize) -> usize {
    let mut reps: Vec<&[f64]> = Vec::new();
    for p in points.chunks_exact(dim) {
        if !reps.contains(&p) {
            reps.push(p);
            if reps.len() >= cap {
                break;
            }
        }
    }
    reps.len()
}

/// A local resampler: draws a fresh equal-weight cloud approximating the input.
pub trait Resampler {
    fn resample(&self, cloud: &ParticleCloud, n_out: usize, rng: &mut dyn RngCore) -> Result<ParticleCloud>;
}

/// Liu-West resampler with shrinkage parameter `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiuWest {
    pub a: f64,
}

impl Default for LiuWest {
    fn default() -> Self {
        Self { a: 0.98 }
    }
}

impl LiuWest {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Config(format!("Liu-West a = {a} is outside [0, 1]")));
        }
        Ok(Self { a })
    }
}

impl Resampler for LiuWest {
    /// Each output particle picks a parent `x_j` with probability `w_j`,
    /// shrinks it to `a x_j + (1 - a) μ` and perturbs it with
    /// `N(0, (1 - a²) Σ)`. Output weights are uniform.
    fn resample(&self, cloud: &ParticleCloud, n_out: usize, rng: &mut dyn RngCore) -> Result<ParticleCloud> {
        if n_out == 0 {
            return Err(Error::Config("resampling needs n_out >= 1".into()));
        }
        let a = self.a;
        let d = cloud.dim();
        let index = WeightedIndex::new(cloud.weights()).map_err(|e| Error::InvalidWeights(e.to_string()))?;
        let noise_scale = (1.0 - a * a).max(0.0).sqrt();
        let (mean, chol) = if a < 1.0 {
            let m = cloud.moments();
            if m.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateCovariance);
            }
            let l = cholesky_jittered(&m.covariance)?;
            (m.mean, Some(l))
        } else {
            (DVector::zeros(d), None)
        };

        let mut out = Vec::with_capacity(n_out * d);
        let mut z = vec![0.0; d];
        for _ in 0..n_out {
            let x = cloud.particle(index.sample(rng));
            if a == 1.0 {
                out.extend_from_slice(x);
                continue;
            }
            for zi in &mut z {
                *zi = StandardNormal.sample(rng);
            }
            let l = chol.as_ref().expect("factor computed when a < 1");
            for r in 0..d {
                let mut noise = 0.0;
                for c in 0..=r {
                    noise += l[(r, c)] * z[c];
                }
                out.push(a * x[r] + (1.0 - a) * mean[r] + noise_scale * noise);
            }
        }
        ParticleCloud::uniform(d, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud_1d(xs: &[f64], ws: &[f64]) -> ParticleCloud {
        ParticleCloud::new(1, xs.to_vec(), ws.to_vec()).unwrap()
    }

    #[test]
    fn ess_examples() {
        assert!((cloud_1d(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4]).ess() - 4.0).abs() < 1e-12);
        assert_eq!(cloud_1d(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.0]).ess(), 1.0);
        // 1 / (0.25 + 0.0625 + 0.0625) = 8/3
        let ess = cloud_1d(&[0.0, 1.0, 2.0], &[0.5, 0.25, 0.25]).ess();
        assert!((ess - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_examples() {
        let m = cloud_1d(&[3.5], &[1.0]).moments();
        assert_eq!(m.mean[0], 3.5);
        assert_eq!(m.covariance[(0, 0)], 0.0);

        let m = cloud_1d(&[-1.0, 1.0], &[1.0, 1.0]).moments();
        assert!(m.mean[0].abs() < 1e-15);
        assert!((m.covariance[(0, 0)] - 1.0).abs() < 1e-15);

        let m = cloud_1d(&[0.0, 1.0, 2.0], &[0.98, 0.01, 0.01]).moments();
        assert!((m.mean[0] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn bayes_update_examples() {
        let mut c = cloud_1d(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let z = c.bayes_update(&[0.3; 3]).unwrap();
        assert!((z - 0.3).abs() < 1e-15);
        for w in c.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }

        let mut c = cloud_1d(&[0.0, 1.0], &[0.5, 0.5]);
        let z = c.bayes_update(&[0.8, 0.2]).unwrap();
        assert!((z - 0.5).abs() < 1e-15);
        assert!((c.weights()[0] - 0.8).abs() < 1e-15);
        assert!((c.weights()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn bayes_update_matches_scalar_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let l: Vec<f64> = (0..3).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let mut c = cloud_1d(&[0.0, 1.0, 2.0], &w);
            let z = c.bayes_update(&l).unwrap();

            let wsum = w[0] + w[1] + w[2];
            let prior: Vec<f64> = w.iter().map(|x| x / wsum).collect();
            let expected_z = prior[0] * l[0] + prior[1] * l[1] + prior[2] * l[2];
            assert!((z - expected_z).abs() < 1e-14);
            for i in 0..3 {
                assert!((c.weights()[i] - prior[i] * l[i] / expected_z).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn all_zero_likelihood_is_reported_and_leaves_cloud() {
        let mut c = cloud_1d(&[0.0, 1.0], &[0.4, 0.6]);
        let before = c.clone();
        assert!(matches!(c.bayes_update(&[0.0, 0.0]), Err(Error::AllZeroLikelihood)));
        assert_eq!(c, before);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(ParticleCloud::new(1, vec![], vec![]), Err(Error::EmptyCloud)));
        assert!(matches!(
            ParticleCloud::new(2, vec![1.0, 2.0, 3.0], vec![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ParticleCloud::new(1, vec![1.0, 2.0], vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(ParticleCloud::new(1, vec![1.0], vec![-1.0]).is_err());
        assert!(ParticleCloud::new(1, vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn bootstrap_limit_reuses_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = cloud_1d(&[0.1, 0.7, 0.9], &[0.2, 0.5, 0.3]);
        let out = LiuWest::new(1.0).unwrap().resample(&c, 500, &mut rng).unwrap();
        assert_eq!(out.len(), 500);
        for p in out.particles() {
            assert!([0.1, 0.7, 0.9].contains(&p[0]));
        }
    }

    #[test]
    fn gaussian_limit_matches_input_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cloud_1d(&[-1.0, 1.0], &[1.0, 1.0]);
        let out = LiuWest::new(0.0).unwrap().resample(&c, 100_000, &mut rng).unwrap();
        let m = out.moments();
        // standard errors: mean 1/sqrt(n), variance sqrt(2/n)
        assert!(m.mean[0].abs() < 5.0 / (1e5f64).sqrt());
        assert!((m.covariance[(0, 0)] - 1.0).abs() < 5.0 * (2.0f64 / 1e5).sqrt());
        // a Gaussian draw essentially never lands exactly on the input support
        assert!(out.particles().all(|p| p[0] != 1.0 && p[0] != -1.0));
    }

    #[test]
    fn point_cloud_is_resamplable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ParticleCloud::uniform(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let out = LiuWest::default().resample(&c, 10, &mut rng).unwrap();
        for p in out.particles() {
            assert!((p[0] - 0.5).abs() < 1e-6 && (p[1] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_shrinkage_rejected() {
        assert!(LiuWest::new(1.5).is_err());
        assert!(LiuWest::new(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn weights_stay_normalized(
            ws in prop::collection::vec(0.001f64..1.0, 1..40),
            ls in prop::collection::vec(0.001f64..1.0, 40),
        ) {
            let n = ws.len();
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut c = cloud_1d(&xs, &ws);
            prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            c.bayes_update(&ls[..n]).unwrap();
            prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ess = c.ess();
            prop_assert!(ess >= 1.0 - 1e-12 && ess <= n as f64 + 1e-9);
        }

        #[test]
        fn update_invariant_under_likelihood_scaling(
            ws in prop::collection::vec(0.01f64..1.0, 2..20),
            ls in prop::collection::vec(0.01f64..1.0, 20),
            scale in 0.01f64..1.0,
        ) {
            let n = ws.len();
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut a = cloud_1d(&xs, &ws);
            let mut b = a.clone();
            let za = a.bayes_update(&ls[..n]).unwrap();
            let scaled: Vec<f64> = ls[..n].iter().map(|l| l * scale).collect();
            let zb = b.bayes_update(&scaled).unwrap();
            prop_assert!((zb - scale * za).abs() < 1e-12);
            for (wa, wb) in a.weights().iter().zip(b.weights()) {
                prop_assert!((wa - wb).abs() < 1e-12);
            }
        }

        #[test]
        fn moments_invariant_under_permutation(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.01f64..1.0), 2..30),
            rot in 0usize..30,
        ) {
            let pts: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.0, p.1]).collect();
            let ws: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let a = ParticleCloud::from_points(&pts, ws.clone()).unwrap().moments();
            let mut pts2 = pts.clone();
            let mut ws2 = ws.clone();
            let r = rot % pts.len();
            pts2.rotate_left(r);
            ws2.rotate_left(r);
            pts2.reverse();
            ws2.reverse();
            let b = ParticleCloud::from_points(&pts2, ws2).unwrap().moments();
            prop_assert!((a.mean - b.mean).abs().max() < 1e-12);
            prop_assert!((a.covariance - b.covariance).abs().max() < 1e-12);
        }

        #[test]
        fn resampled_ess_equals_n_out(n_out in 1usize..300, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = cloud_1d(&[0.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
            let out = LiuWest::default().resample(&c, n_out, &mut rng).unwrap();
            prop_assert_eq!(out.len(), n_out);
            prop_assert!((out.ess() - n_out as f64).abs() < 1e-9 * n_out as f64);
        }
    }
}
