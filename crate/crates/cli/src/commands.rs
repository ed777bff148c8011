use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kl2clust::calibration::{load_surface, simulate_surface_with, surface_to_string, CellDone, SimulationConfig};
use kl2clust::clustering::{agglomerate, distance_matrix_to_string, pairwise_distances, read_distance_matrix};
use kl2clust::features::{extract_mfcc, load_wav, read_features, write_features};
use kl2clust::rng::GaussianSource;
use kl2clust::sweep::{subset_sweep, SubsetMode};
use kl2clust::synth::{evaluate, synth_dataset, MANIFEST_FILE};
use kl2clust::{
    ClusterAssignment, CorrectionSurface, DatasetManifest, Error, FeatureMatrix, FrameConfig, MetricConfig, Result,
    SyntheticSpec,
};
use rayon::prelude::*;

use crate::{
    ClusterArgs, Command, DistanceArgs, EvaluateArgs, ExtractArgs, SimulateArgs, SurfaceExportArgs, SweepArgs,
    SynthArgs, EXIT_PARTIAL,
};

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Extract(a) => extract(a),
        Command::Simulate(a) => simulate(a).map(|_| 0),
        Command::Distance(a) => distance(a).map(|_| 0),
        Command::Cluster(a) => cluster(a).map(|_| 0),
        Command::Sweep(a) => sweep(a).map(|_| 0),
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Evaluate(a) => eval(a).map(|_| 0),
        Command::SurfaceExport(a) => surface_export(a).map(|_| 0),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_wav(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Expands directories to their WAV files, sorted by path.
fn collect_wavs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_wav(f))
                .collect();
            found.sort();
            if found.is_empty() {
                eprintln!("warning: no .wav files in {}", p.display());
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn extract(a: ExtractArgs) -> Result<u8> {
    let cfg = FrameConfig {
        frame_ms: a.frame_ms,
        hop_ms: a.hop_ms,
        preemphasis: a.preemphasis,
        mel_filters: a.mel_filters,
        num_ceps: a.num_ceps,
    };
    cfg.validate()?;
    let files = collect_wavs(&a.inputs)?;
    if files.is_empty() {
        eprintln!("warning: nothing to extract");
        return Ok(0);
    }
    fs::create_dir_all(&a.out_dir)?;

    let results: Vec<Result<PathBuf>> = files
        .par_iter()
        .map(|f| {
            let m = extract_mfcc(&load_wav(f)?, &cfg)?;
            let out = a.out_dir.join(format!("{}.csv", m.segment_id()));
            write_features(&m, &out)?;
            Ok(out)
        })
        .collect();

    let mut failed = 0;
    for (f, r) in files.iter().zip(&results) {
        if let Err(e) = r {
            eprintln!("error: {}: {e}", f.display());
            failed += 1;
        }
    }
    Ok(match failed {
        0 => 0,
        n if n == files.len() => 1,
        _ => EXIT_PARTIAL,
    })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = SimulationConfig::new(a.metric);
    cfg.dim = a.dim;
    if let Some(g) = a.grid {
        cfg.grid_lengths = g;
    }
    cfg.trials_per_cell = a.trials;
    cfg.seed = a.seed;
    cfg.codebook_k = a.codebook_k;
    cfg.validate()?;

    let progress = |c: CellDone| {
        eprintln!("cell ({}, {}) mean={:.6} se={:.6}", c.len_a, c.len_b, c.mean, c.std_error);
    };
    let report = simulate_surface_with(&cfg, &GaussianSource::standard(cfg.dim), Some(&progress))?;
    let s = &report.surface;
    eprintln!("surface {}", s.descriptor());
    let mut header = String::from("      ");
    for g in &s.grid_lengths {
        let _ = write!(header, " {g:>10}");
    }
    eprintln!("{header}");
    for (g, row) in s.grid_lengths.iter().zip(&s.values) {
        let mut line = format!("{g:>6}");
        for v in row {
            let _ = write!(line, " {v:>10.4}");
        }
        eprintln!("{line}");
    }
    if report.regularized_segments > 0 || report.failed_trials > 0 {
        eprintln!(
            "regularized segments: {}, failed trials: {}",
            report.regularized_segments, report.failed_trials
        );
    }
    emit(a.out.as_deref(), &surface_to_string(s))
}

fn load_inputs(features: &[PathBuf], manifest: Option<&Path>) -> Result<Vec<FeatureMatrix>> {
    match manifest {
        Some(m) => DatasetManifest::read(m)?.load_segments(),
        None => features.iter().map(read_features).collect(),
    }
}

fn distance(a: DistanceArgs) -> Result<()> {
    let metric = MetricConfig::new(a.metric).with_codebook(a.codebook_k, a.seed);
    let surface: Option<CorrectionSurface> = a.surface.as_deref().map(load_surface).transpose()?;
    let segs = load_inputs(&a.features, a.manifest.as_deref())?;
    let d = pairwise_distances(&segs, &metric, surface.as_ref())?;
    emit(a.out.as_deref(), &distance_matrix_to_string(&d)?)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let d = read_distance_matrix(&a.matrix)?;
    let tree = agglomerate(&d);
    let assign: ClusterAssignment = match (a.k, a.threshold) {
        (Some(k), _) => tree.cut_k(k)?,
        (None, Some(t)) => tree.cut(t)?,
        (None, None) => return Err(Error::InvalidConfig("one of --k or --threshold is required".into())),
    };
    fs::create_dir_all(&a.out_dir)?;
    fs::write(a.out_dir.join("dendrogram.json"), tree.to_json())?;
    fs::write(a.out_dir.join("dendrogram.nwk"), tree.to_newick() + "\n")?;
    fs::write(a.out_dir.join("assignment.csv"), assign.to_csv())?;
    eprintln!("{} segments in {} clusters", assign.ids.len(), assign.num_clusters());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let features = read_features(&a.features)?;
    let metric = MetricConfig::new(a.metric).with_codebook(a.codebook_k, a.seed);
    let mode = if a.contiguous { SubsetMode::Contiguous } else { SubsetMode::Random };
    let rows = subset_sweep(&features, &a.subset_lengths, a.trials, a.seed, &metric, mode)?;
    let mut s = String::from("len_a,len_b,mean,trials\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:?},{}", r.len_a, r.len_b, r.mean, r.trials);
    }
    emit(a.out.as_deref(), &s)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_speakers: a.speakers,
        dim: a.dim,
        segments_per_speaker: a.segments_per_speaker,
        length_range: (a.min_frames, a.max_frames),
        speaker_separation: a.separation,
        seed: a.seed,
    };
    let m = synth_dataset(&spec, &a.out_dir)?;
    eprintln!(
        "wrote {} segments and {}",
        m.entries.len(),
        a.out_dir.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn eval(a: EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.assignment).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(a.assignment.clone()),
        _ => Error::Io(e),
    })?;
    let assign = ClusterAssignment::from_csv(&text)?;
    let s = evaluate(&assign, &DatasetManifest::read(&a.manifest)?)?;
    println!("pairwise_precision={}", s.pairwise_precision);
    println!("pairwise_recall={}", s.pairwise_recall);
    println!("pairwise_f1={}", s.pairwise_f1);
    println!("purity={}", s.purity);
    Ok(())
}

fn surface_export(a: SurfaceExportArgs) -> Result<()> {
    let s = load_surface(&a.surface)?;
    let mut out = String::from("len_a,len_b,value\n");
    for (i, &na) in s.grid_lengths.iter().enumerate() {
        for (j, &nb) in s.grid_lengths.iter().enumerate() {
            let _ = writeln!(out, "{na},{nb},{:?}", s.values[i][j]);
        }
    }
    emit(a.out.as_deref(), &out)
}
