//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits nonzero if any failed. Criteria run serially so the
//! latency measurement is not disturbed by concurrent training.

#[path = "../../tinynn/tests/support/gradcheck.rs"]
mod gradcheck;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use capglove::dataset::{fit_preprocess, split_gesture_dataset, split_reconstruction_dataset, PreprocessState};
use capglove::models::{classifier, reconstructor};
use capglove::sensor::{GAUGE_FACTOR, K_BEND};
use capglove::{average_distance, ChannelMap, Frame, HandGeometry, HandPose, PointCloud15, SensingMode, Sensor};
use capglove_pipeline::commands::{evaluate, simulate, train_model, Model};
use capglove_pipeline::config::{PipelineConfig, Task};
use capglove_pipeline::stream::{batch_predictions, run_stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use tempfile::TempDir;
use tinynn::train::Network;

const SEED: u64 = 2024;
const GESTURE_EPOCHS: usize = 60;
const STREAM_FRAMES: usize = 1200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Artifacts of one simulate → train → eval run.
struct Run {
    _dir: TempDir,
    cfg: PipelineConfig,
    report: String,
    hashes: Vec<(String, String)>,
    model: Model,
    epochs: usize,
}

fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).expect("artifact exists")))
}

fn run_pipeline(task: Task) -> Run {
    let dir = TempDir::new().unwrap();
    let mut cfg = PipelineConfig::desk(task, dir.path(), SEED);
    if task == Task::Gesture {
        cfg.train.max_epochs = GESTURE_EPOCHS;
    }
    simulate(&cfg).unwrap();
    let run = train_model(&cfg).unwrap();
    let report = evaluate(&cfg).unwrap();
    let p = &cfg.paths;
    let hashes = [("dataset", &p.dataset), ("weights", &p.weights), ("report", &p.report)]
        .into_iter()
        .map(|(k, path)| (k.to_string(), sha256(path)))
        .collect();
    Run { _dir: dir, report, hashes, model: run.model, epochs: run.outcome.history.len(), cfg }
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = ")?.parse().ok())
        .unwrap_or_else(|| panic!("report has no {key}"))
}

#[derive(Default)]
struct Runs {
    gesture: Vec<Run>,
    recon: Vec<Run>,
}

impl Runs {
    fn get(&mut self, task: Task, n: usize) -> &[Run] {
        let runs = match task {
            Task::Gesture => &mut self.gesture,
            Task::Recon => &mut self.recon,
        };
        while runs.len() < n {
            runs.push(run_pipeline(task));
        }
        &runs[..n]
    }
}

fn architecture(_: &mut Runs) -> Outcome {
    let prep = |n| PreprocessState { window: 5, min: vec![0.0; n], max: vec![1.0; n] };
    let cls = capglove::GestureClassifier::new(prep(14), 0).unwrap();
    let shapes: Vec<Vec<usize>> = cls.params().shapes().into_iter().map(|(_, s)| s).collect();
    let want = vec![vec![64, 1, 2], vec![64], vec![832, 128], vec![128], vec![128, 30], vec![30]];
    let flatten = classifier::CONV_CHANNELS * classifier::CONV_LEN;

    let rec = capglove::HandReconstructor::new(prep(28), vec![0.0; 45], vec![1.0; 45], 0).unwrap();
    let rshape = |name: &str| rec.params().get(name).map(|p| p.value.shape().to_vec());
    let encoders = (0..).take_while(|i| rshape(&format!("encoder{i}.ff1.weight")).is_some()).count();
    let rec_ok = rshape("proj.weight") == Some(vec![28, 64])
        && rshape("pos") == Some(vec![1, 3, 64])
        && rshape("head.weight") == Some(vec![64, 45])
        && rshape("encoder0.ff1.weight") == Some(vec![64, 64])
        && encoders == 3
        && reconstructor::HEADS == 2
        && reconstructor::WINDOW == 3;

    let count = cls.params().num_scalars();
    let pass = shapes == want && flatten == 832 && rec_ok && count == 110_782;
    outcome(
        pass,
        format!(
            "classifier shapes {}, flatten {flatten}, transformer shapes {}, classifier parameters {count} (expected 110782)",
            if shapes == want { "ok" } else { "MISMATCH" },
            if rec_ok { "ok" } else { "MISMATCH" },
        ),
    )
}

fn gradients(_: &mut Runs) -> Outcome {
    let results = gradcheck::run_all(20);
    let worst = results.iter().cloned().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    outcome(
        worst.1 < gradcheck::TOLERANCE,
        format!("{} ops × 20 instances, worst relative error {:.2e} ({})", results.len(), worst.1, worst.0),
    )
}

fn average_distance_oracle(_: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cloud = |rng: &mut ChaCha8Rng| {
        PointCloud15::new(std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-80.0..80.0)))).unwrap()
    };
    let truth: Vec<PointCloud15> = (0..5).map(|_| cloud(&mut rng)).collect();
    let shifted: Vec<PointCloud15> = truth
        .iter()
        .map(|c| PointCloud15::new(c.points().map(|[x, y, z]| [x + 3.0, y, z + 4.0])).unwrap())
        .collect();
    let offset = average_distance(&shifted, &truth).unwrap();
    let pred: Vec<PointCloud15> = (0..5).map(|_| cloud(&mut rng)).collect();
    let mut direct = 0.0;
    for i in 0..5 {
        for j in 0..15 {
            let (p, q) = (pred[i].points()[j], truth[i].points()[j]);
            direct += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        }
    }
    direct /= 75.0;
    let ad = average_distance(&pred, &truth).unwrap().mean;
    let pass = (offset.mean - 5.0).abs() <= 1e-9 && offset.std <= 1e-9 && (ad - direct).abs() <= 1e-9;
    outcome(
        pass,
        format!(
            "offset AD {:.12} ± {:.1e}, random AD {ad:.9} vs double sum {direct:.9} (|Δ| {:.1e})",
            offset.mean,
            offset.std,
            (ad - direct).abs()
        ),
    )
}

fn sensor_law(_: &mut Runs) -> Outcome {
    let sensor = Sensor::new(ChannelMap::standard(), HandGeometry::reference()).unwrap();
    let dof = capglove::kinematics::dof_index("index.pip").unwrap();
    let channel = sensor.map().intra().iter().position(|e| e.role == capglove::channels::ChannelRole::Joint(dof)).unwrap();
    let at = |strain: f64| {
        let pose = HandPose::flat().with(dof, strain / K_BEND).unwrap();
        sensor.noiseless(&pose, SensingMode::Full).values[channel]
    };
    let one = at(0.01);
    let xs: Vec<f64> = (0..=30).map(|k| k as f64 / 100.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&s| at(s)).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let dev = xs.iter().zip(&ys).map(|(x, y)| (y - (my + slope * (x - mx))).abs()).fold(0.0, f64::max);
    let pass = (one - 0.0045).abs() <= 1e-12 && dev < 1e-9 && (slope - GAUGE_FACTOR).abs() < 1e-9;
    outcome(pass, format!("1% strain → {one:.12}, fitted slope {slope:.12}, max deviation {dev:.1e} over 0–30%"))
}

fn null_invariants(_: &mut Runs) -> Outcome {
    let sensor = Sensor::new(ChannelMap::standard(), HandGeometry::reference()).unwrap();
    let intra = sensor.noiseless(&HandPose::flat(), SensingMode::IntraOnly).values;
    let full = sensor.noiseless(&HandPose::flat(), SensingMode::Full).values;
    let max_abs = intra.iter().chain(&full).fold(0.0f64, |m, v| m.max(v.abs()));
    let pass = intra.len() == 14 && full.len() == 28 && max_abs == 0.0;
    outcome(pass, format!("{} and {} channels, largest |value| {max_abs:e}", intra.len(), full.len()))
}

fn gesture_task(runs: &mut Runs) -> Outcome {
    let run = &runs.get(Task::Gesture, 1)[0];
    let acc = report_value(&run.report, "accuracy");
    outcome(
        acc >= 0.95,
        format!(
            "held-out accuracy {:.4} after {} epochs (lr {}, batch {}), {} test subjects",
            acc,
            run.epochs,
            run.cfg.train.learning_rate,
            run.cfg.train.batch_size,
            run.cfg.data.holdout.len()
        ),
    )
}

fn reconstruction_task(runs: &mut Runs) -> Outcome {
    let run = &runs.get(Task::Recon, 1)[0];
    let ad = report_value(&run.report, "ad_mean_mm");
    let mean_pose = report_value(&run.report, "baseline_mean_pose_ad_mm");
    let linear = report_value(&run.report, "baseline_linear_ad_mm");
    outcome(
        ad < 0.3 * mean_pose && ad < linear,
        format!(
            "AD {ad:.3} mm; mean pose {mean_pose:.3} mm (ratio {:.3}, need < 0.3); linear readout {linear:.3} mm; {} epochs",
            ad / mean_pose,
            run.epochs
        ),
    )
}

fn determinism(runs: &mut Runs) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for task in [Task::Gesture, Task::Recon] {
        let pair = runs.get(task, 2);
        for ((name, a), (_, b)) in pair[0].hashes.iter().zip(&pair[1].hashes) {
            pass &= a == b;
            details.push(format!("{task:?} {name} {}", if a == b { &a[..12] } else { "DIFFERS" }));
        }
    }
    outcome(pass, details.join(", "))
}

fn real_time(runs: &mut Runs) -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for task in [Task::Gesture, Task::Recon] {
        let run = &runs.get(task, 1)[0];
        let (_, frames) = capglove::dataset::format::load_dataset(&run.cfg.paths.dataset).unwrap();
        let frames = &frames[..STREAM_FRAMES];
        let (stats, streamed) = run_stream(&run.model, frames, run.cfg.fps, true).unwrap();
        let batch = batch_predictions(&run.model, frames).unwrap();
        let diffs = streamed.iter().zip(&batch).filter(|(a, b)| a != b).count() + streamed.len().abs_diff(batch.len());
        pass &= stats.p99_ms < 1e3 / 120.0 && diffs == 0 && stats.frames == STREAM_FRAMES;
        details.push(format!(
            "{task:?}: {} frames in {:.2} s, p95 {:.3} ms, p99 {:.3} ms, {} deadline misses, {diffs} differences",
            stats.frames, stats.wall_s, stats.p95_ms, stats.p99_ms, stats.dropped_deadlines
        ));
    }
    outcome(pass, details.join("; "))
}

fn random_stream(rng: &mut ChaCha8Rng, n: usize) -> Vec<Frame> {
    let reset = n / 2;
    (0..n)
        .map(|i| Frame {
            timestamp_ns: if i < reset { i as u64 * 1000 } else { (i - reset) as u64 * 1000 },
            channels: (0..14).map(|_| rng.random_range(-0.2..0.2)).collect(),
            label: Some(0),
            target: None,
            saturated: false,
        })
        .collect()
}

fn causality(runs: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut prefix_ok = true;
    for _ in 0..20 {
        let frames = random_stream(&mut rng, 200);
        let prep = fit_preprocess(&frames, 5).unwrap();
        let full = prep.apply(&frames).unwrap();
        let mut stream = prep.streamer().unwrap();
        for (f, out) in frames.iter().zip(&full) {
            prefix_ok &= stream.push(f).unwrap() == out.channels;
        }
        for _ in 0..10 {
            let cut = rng.random_range(1..=frames.len());
            prefix_ok &= prep.apply(&frames[..cut]).unwrap() == full[..cut];
        }
    }

    let run = &runs.get(Task::Gesture, 1)[0];
    let (_, frames) = capglove::dataset::format::load_dataset(&run.cfg.paths.dataset).unwrap();
    let holdout = &run.cfg.data.holdout;
    let split_seed = capglove_pipeline::commands::seeds::split(SEED);
    let fitted = |frames: &[Frame]| {
        let split = split_gesture_dataset(frames, holdout, split_seed).unwrap();
        fit_preprocess(&split.train, run.cfg.data.filter_window).unwrap().to_bytes()
    };
    let before = fitted(&frames);
    let runs_idx = capglove::dataset::subject_runs(&frames);
    let mut mutated = frames.clone();
    for &h in holdout {
        for f in &mut mutated[runs_idx[h].clone()] {
            f.channels.iter_mut().for_each(|v| *v = *v * 7.0 + 3.0);
        }
    }
    let gesture_leak_free = fitted(&mutated) == before;

    let segments = [3000, 1000, 500];
    let recon: Vec<Frame> = random_stream(&mut rng, 4500)
        .into_iter()
        .enumerate()
        .map(|(i, f)| Frame { timestamp_ns: i as u64 * 1000, ..f })
        .collect();
    let fit_recon = |frames: &[Frame]| {
        let split = split_reconstruction_dataset(frames, segments).unwrap();
        fit_preprocess(&split.train, 5).unwrap().to_bytes()
    };
    let mut recon_mut = recon.clone();
    recon_mut[4000..].iter_mut().for_each(|f| f.channels.iter_mut().for_each(|v| *v = -*v * 5.0));
    let recon_leak_free = fit_recon(&recon) == fit_recon(&recon_mut);

    outcome(
        prefix_ok && gesture_leak_free && recon_leak_free,
        format!(
            "prefix equivalence {}, statistics after mutating test frames: gesture {}, reconstruction {}",
            if prefix_ok { "holds" } else { "BROKEN" },
            if gesture_leak_free { "identical" } else { "CHANGED" },
            if recon_leak_free { "identical" } else { "CHANGED" },
        ),
    )
}

type Criterion = fn(&mut Runs) -> Outcome;

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, Criterion); 10] = [
        ("architecture conformance", architecture),
        ("gradient correctness", gradients),
        ("average distance oracle", average_distance_oracle),
        ("sensor law", sensor_law),
        ("channel counts and null pose", null_invariants),
        ("gesture task", gesture_task),
        ("reconstruction task", reconstruction_task),
        ("determinism", determinism),
        ("real-time budget", real_time),
        ("preprocessing causality and no leakage", causality),
    ];
    let mut runs = Runs::default();
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| check(&mut runs))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {:>2} {} {name}: {} [{:.1} s]",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
        if !out.pass {
            failed.push(i + 1);
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
