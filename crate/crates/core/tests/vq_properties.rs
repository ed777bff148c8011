use kl2clust::rng::{rng_for, GaussianSource};
use kl2clust::vq::{aqd, aqd_distance, train_codebook_logged, vq_distance, train_codebook};
use kl2clust::FeatureMatrix;

const K: usize = 16;

fn same_gaussian_mean(na: usize, nb: usize, f: &dyn Fn(&FeatureMatrix, &FeatureMatrix, u64) -> f64) -> f64 {
    let src = GaussianSource::standard(13);
    let trials = 20;
    (0..trials)
        .map(|t| {
            let mut rng = rng_for(8, &[na as u64, nb as u64, t]);
            f(&src.sample(&mut rng, na, "a"), &src.sample(&mut rng, nb, "b"), t)
        })
        .sum::<f64>()
        / trials as f64
}

#[test]
fn vq_is_more_length_sensitive_than_aqd() {
    let vq = |a: &FeatureMatrix, b: &FeatureMatrix, s: u64| {
        vq_distance(&train_codebook(a, K, s).unwrap(), &train_codebook(b, K, s).unwrap()).unwrap()
    };
    let aq = |a: &FeatureMatrix, b: &FeatureMatrix, s: u64| aqd_distance(a, b, K, s).unwrap();
    let vq_ratio = same_gaussian_mean(30, 1000, &vq) / same_gaussian_mean(1000, 1000, &vq);
    let aqd_ratio = same_gaussian_mean(30, 1000, &aq) / same_gaussian_mean(1000, 1000, &aq);
    assert!(vq_ratio > aqd_ratio, "vq {vq_ratio} aqd {aqd_ratio}");
}

#[test]
fn lloyd_distortion_never_increases() {
    let mut rng = rng_for(3, &[]);
    let x = GaussianSource::standard(13).sample(&mut rng, 700, "x");
    for k in [3, 16, 40] {
        let (_, log) = train_codebook_logged(&x, k, 1).unwrap();
        for stage in &log.stages {
            assert!(stage.windows(2).all(|w| w[1] <= w[0]), "k={k}: {stage:?}");
        }
    }
}

#[test]
fn aqd_is_zero_exactly_when_rows_are_centroids() {
    let mut rng = rng_for(4, &[]);
    let x = GaussianSource::standard(5).sample(&mut rng, 10, "x");
    let book = train_codebook(&x, 10, 0).unwrap();
    assert_eq!(aqd(&x, &book).unwrap(), 0.0);
    let y = GaussianSource::standard(5).sample(&mut rng, 10, "y");
    assert!(aqd(&y, &book).unwrap() > 0.0);
}
