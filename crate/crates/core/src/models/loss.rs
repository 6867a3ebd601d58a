use crate::smc::ParticleCloud;

/// Maps a pair of eigenvalues (with a third fixed at zero) to one
/// representative of its four-fold degeneracy class.
pub fn canonicalize(l1: f64, l2: f64) -> (f64, f64) {
    let hi = l1.max(l2);
    let lo = l1.min(l2);
    (hi, lo.min(hi - lo))
}

/// The four eigenvalue pairs sharing the gap set of `truth`.
pub fn rge_degenerate_images(truth: [f64; 2]) -> [[f64; 2]; 4] {
    let hi = truth[0].max(truth[1]);
    let lo = truth[0].min(truth[1]);
    [[hi, lo], [lo, hi], [hi - lo, hi], [hi, hi - lo]]
}

/// Weighted squared distance between canonicalized particles and truth.
pub fn canonical_loss(cloud: &ParticleCloud, truth: [f64; 2]) -> f64 {
    let (th, tl) = canonicalize(truth[0], truth[1]);
    cloud
        .particles()
        .zip(cloud.weights())
        .map(|(x, w)| {
            let (h, l) = canonicalize(x[0], x[1]);
            w * ((h - th).powi(2) + (l - tl).powi(2))
        })
        .sum()
}

/// Quadratic loss against whichever of the two eigenvalues fits best.
pub fn min_loss(cloud: &ParticleCloud, e1: f64, e2: f64) -> f64 {
    min_loss_multi(cloud, &[e1, e2])
}

pub(crate) fn min_loss_multi(cloud: &ParticleCloud, energies: &[f64]) -> f64 {
    energies
        .iter()
        .map(|e| {
            cloud
                .particles()
                .zip(cloud.weights())
                .map(|(x, w)| w * (e - x[0]).powi(2))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(x: &[f64]) -> ParticleCloud {
        ParticleCloud::uniform(x.len(), x.to_vec()).unwrap()
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(canonicalize(0.75, 0.15), (0.75, 0.15));
        let (h, l) = canonicalize(0.6, 0.75);
        assert_eq!(h, 0.75);
        assert!((l - 0.15).abs() < 1e-15);
        assert_eq!(canonicalize(0.15, 0.75), (0.75, 0.15));
    }

    #[test]
    fn canonical_loss_examples() {
        for img in rge_degenerate_images([0.75, 0.15]) {
            assert!(canonical_loss(&point(&img), [0.75, 0.15]) < 1e-30);
        }
        // distance 0.1 along the high coordinate
        let d = canonical_loss(&point(&[0.65, 0.15]), [0.75, 0.15]);
        assert!((d - 0.01).abs() < 1e-15);
        let pair = ParticleCloud::uniform(2, vec![0.65, 0.15, 0.75, 0.15]).unwrap();
        assert!((canonical_loss(&pair, [0.75, 0.15]) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn min_loss_examples() {
        assert_eq!(min_loss(&point(&[0.2]), 0.2, 0.9), 0.0);
        let mid = min_loss(&point(&[0.55]), 0.2, 0.9);
        assert!((mid - 0.35f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn min_loss_matches_two_branch_oracle() {
        let cloud = ParticleCloud::new(1, vec![0.1, 0.4, 0.8], vec![0.2, 0.5, 0.3]).unwrap();
        let branch = |e: f64| 0.2 * (e - 0.1f64).powi(2) + 0.5 * (e - 0.4f64).powi(2) + 0.3 * (e - 0.8f64).powi(2);
        let expected = branch(0.3).min(branch(0.7));
        assert!((min_loss(&cloud, 0.3, 0.7) - expected).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_collapses_class(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let c = canonicalize(a, b);
            let cc = canonicalize(c.0, c.1);
            prop_assert!((c.0 - cc.0).abs() < 1e-12 && (c.1 - cc.1).abs() < 1e-12);
            for img in rge_degenerate_images([a, b]) {
                let ci = canonicalize(img[0], img[1]);
                prop_assert!((ci.0 - c.0).abs() < 1e-12 && (ci.1 - c.1).abs() < 1e-12);
            }
        }

        #[test]
        fn losses_nonnegative(
            xs in prop::collection::vec(0.0f64..1.0, 2..20),
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let n = xs.len() / 2;
            prop_assume!(n >= 1);
            let c2 = ParticleCloud::uniform(2, xs[..2 * n].to_vec()).unwrap();
            prop_assert!(canonical_loss(&c2, [a, b]) >= 0.0);
            let c1 = ParticleCloud::uniform(1, xs.clone()).unwrap();
            prop_assert!(min_loss(&c1, a, b) >= 0.0);
        }
    }
}
