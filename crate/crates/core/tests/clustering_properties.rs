use kl2clust::calibration::{simulate_surface, SimulationConfig};
use kl2clust::clustering::{agglomerate, pairwise_distances};
use kl2clust::synth::{synth_segments, SyntheticSpec};
use kl2clust::{CorrectionSurface, FeatureMatrix, MetricConfig, MetricKind};

fn spec(seed: u64, segments: usize, len: usize) -> SyntheticSpec {
    SyntheticSpec {
        num_speakers: 3,
        dim: 13,
        segments_per_speaker: segments,
        length_range: (len, len),
        speaker_separation: 0.5,
        seed,
    }
}

/// One short segment of speaker 0 plus one long segment per speaker, each from
/// its own random stream. Returns the features and each leaf's speaker.
fn scenario(seed: u64) -> (Vec<FeatureMatrix>, Vec<usize>) {
    let short = synth_segments(&spec(seed, 1, 30)).unwrap();
    let long = synth_segments(&spec(seed, 2, 1500)).unwrap();
    let mut feats = vec![short[0].features.clone()];
    let mut speakers = vec![0];
    for s in 0..3 {
        let mut f = long[2 * s + 1].features.clone();
        f.set_segment_id(format!("long{s}"));
        feats.push(f);
        speakers.push(s);
    }
    (feats, speakers)
}

/// True when the short segment joins its speaker's long segment before any
/// merge mixes speakers.
fn short_joins_own_speaker_first(feats: &[FeatureMatrix], speakers: &[usize], surface: Option<&CorrectionSurface>) -> bool {
    let d = pairwise_distances(feats, &MetricConfig::new(MetricKind::Kl2), surface).unwrap();
    let tree = agglomerate(&d);
    let n = feats.len();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in &tree.merges {
        let (l, r) = (members[m.left].clone(), members[m.right].clone());
        let mixes = l.iter().any(|&a| r.iter().any(|&b| speakers[a] != speakers[b]));
        if mixes {
            return false;
        }
        let joined: Vec<usize> = l.into_iter().chain(r).collect();
        if joined.contains(&0) && joined.contains(&1) {
            return true;
        }
        members.push(joined);
    }
    false
}

fn surface() -> CorrectionSurface {
    let mut cfg = SimulationConfig::new(MetricKind::Kl2);
    cfg.trials_per_cell = 100;
    cfg.seed = 12;
    simulate_surface(&cfg).unwrap().surface
}

#[test]
fn correction_unites_short_segments_with_their_speaker() {
    let surface = surface();
    let (mut raw_failures, mut rescued) = (0, 0);
    for seed in 0..400 {
        let (feats, speakers) = scenario(seed);
        if short_joins_own_speaker_first(&feats, &speakers, None) {
            continue;
        }
        raw_failures += 1;
        rescued += short_joins_own_speaker_first(&feats, &speakers, Some(&surface)) as usize;
        if raw_failures == 20 {
            break;
        }
    }
    assert_eq!(raw_failures, 20, "raw kl2 rarely fails in this scenario");
    assert!(rescued >= 15, "corrected metric rescued {rescued}/20");
}

#[test]
fn cut_k_extremes() {
    let (feats, _) = scenario(1);
    let tree = agglomerate(&pairwise_distances(&feats, &MetricConfig::new(MetricKind::Kl2), None).unwrap());
    assert_eq!(tree.cut_k(1).unwrap().num_clusters(), 1);
    assert_eq!(tree.cut_k(feats.len()).unwrap().num_clusters(), feats.len());
}
