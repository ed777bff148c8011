use kl2clust::kl2::{kl2, trace_term};
use kl2clust::rng::{random_rotation, rng_for, GaussianSource};
use kl2clust::stats::compute_stats;
use kl2clust::{FeatureMatrix, RegularizationPolicy};
use nalgebra::{DMatrix, DVector};

const D: usize = 13;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn affine(m: &FeatureMatrix, l: &DMatrix<f64>, b: &DVector<f64>) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = m
        .iter_rows()
        .map(|r| (l * DVector::from_column_slice(r) + b).iter().copied().collect())
        .collect();
    FeatureMatrix::from_rows(m.segment_id(), &rows).unwrap()
}

#[test]
fn kl2_is_affine_invariant() {
    let p = RegularizationPolicy::default();
    for seed in 0..20 {
        let mut rng = rng_for(seed, &[]);
        let a = GaussianSource::standard(D).sample(&mut rng, 80, "a");
        let b = GaussianSource::standard(D).sample(&mut rng, 150, "b");
        let scales = DVector::from_fn(D, |i, _| 0.5 + i as f64 / D as f64);
        let l = random_rotation(&mut rng, D) * DMatrix::from_diagonal(&scales);
        let shift = DVector::from_fn(D, |i, _| i as f64 - 6.0);
        let before = kl2(&compute_stats(&a, &p).unwrap(), &compute_stats(&b, &p).unwrap()).unwrap();
        let after = kl2(
            &compute_stats(&affine(&a, &l, &shift), &p).unwrap(),
            &compute_stats(&affine(&b, &l, &shift), &p).unwrap(),
        )
        .unwrap();
        assert!((before - after).abs() <= 1e-6 * before, "{before} vs {after}");
    }
}

fn mc(seed: u64, na: usize, nb: usize, trials: u64, f: fn(&kl2clust::SegmentStats, &kl2clust::SegmentStats) -> kl2clust::Result<f64>) -> f64 {
    // A fixed non-standard Gaussian: the statistics must not depend on it.
    let mut g = rng_for(99, &[]);
    let rot = random_rotation(&mut g, D);
    let cov = &rot * DMatrix::from_diagonal(&DVector::from_fn(D, |i, _| 1.0 + i as f64 * 0.2)) * rot.transpose();
    let src = GaussianSource::new(DVector::from_element(D, 2.0), (&cov + cov.transpose()) * 0.5).unwrap();
    let p = RegularizationPolicy::default();
    let vals: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng_for(seed, &[na as u64, nb as u64, t]);
            let a = compute_stats(&src.sample(&mut rng, na, "a"), &p).unwrap();
            let b = compute_stats(&src.sample(&mut rng, nb, "b"), &p).unwrap();
            f(&a, &b).unwrap()
        })
        .collect();
    mean(&vals)
}

#[test]
fn short_segments_inflate_kl2() {
    let short = mc(1, 20, 20, 500, kl2);
    let long = mc(1, 1000, 1000, 500, kl2);
    assert!(short > long, "{short} vs {long}");
    assert!(short > 10.0 * long);
}

#[test]
fn trace_term_is_sensitive_to_b_only() {
    let over_b: Vec<f64> = [20, 50, 100, 1000].iter().map(|&nb| mc(2, 100, nb, 1000, trace_term)).collect();
    let hi = over_b.iter().cloned().fold(0.0, f64::max);
    let lo = over_b.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo > 2.0, "{over_b:?}");

    let over_a: Vec<f64> = [30, 100, 1000].iter().map(|&na| mc(3, na, 100, 1000, trace_term)).collect();
    let hi = over_a.iter().cloned().fold(0.0, f64::max);
    let lo = over_a.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((hi - lo) / mean(&over_a) < 0.05, "{over_a:?}");
}
