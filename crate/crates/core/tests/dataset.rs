use std::collections::BTreeMap;

use capglove::dataset::{
    fit_preprocess, generate_gesture_dataset, generate_reconstruction_dataset, make_subjects, pose_trajectory,
    split_gesture_dataset, split_reconstruction_dataset, subject_runs, TrajectoryConfig,
};
use capglove::{forward_kinematics, ChannelMap, Exec, Frame, GestureLibrary, NoiseConfig, SensingMode, Sensor};
use proptest::prelude::*;

fn desk_gestures(seed: u64) -> Vec<Frame> {
    let subjects = make_subjects(6, seed);
    let lib = GestureLibrary::standard();
    generate_gesture_dataset(&subjects, &lib, &ChannelMap::standard(), 200, 120.0, &NoiseConfig::default(), Exec::default())
        .unwrap()
}

#[test]
fn desk_gesture_set_is_balanced() {
    let frames = desk_gestures(3);
    assert_eq!(frames.len(), 36_000);
    let runs = subject_runs(&frames);
    assert_eq!(runs.len(), 6);
    for run in &runs {
        let mut hist = BTreeMap::new();
        for f in &frames[run.clone()] {
            assert_eq!(f.channels.len(), 14);
            *hist.entry(f.label.unwrap()).or_insert(0) += 1;
        }
        assert_eq!(hist.len(), 30);
        assert!(hist.values().all(|&n| n == 200));
    }
}

#[test]
fn generation_is_reproducible_and_seed_dependent() {
    let a = desk_gestures(3);
    assert_eq!(a, desk_gestures(3));
    assert_ne!(a, desk_gestures(4));
}

#[test]
fn held_out_subjects_never_reach_training() {
    let frames = desk_gestures(8);
    let runs = subject_runs(&frames);
    let split = split_gesture_dataset(&frames, &[4, 5], 1).unwrap();
    let held: usize = runs[4].len() + runs[5].len();
    assert_eq!(split.test.len(), held);
    assert_eq!(split.test[..], frames[runs[4].start..runs[5].end]);
    let trainval = split.train.len() + split.validation.len();
    assert_eq!(trainval, 24_000);
    let per_label = 24_000 / 30;
    let val_per_label = (per_label as f64 * 0.2).round() as usize;
    assert!(split.validation.len().abs_diff(30 * val_per_label) <= 30);

    let key = |f: &Frame| (f.timestamp_ns, f.label, f.channels.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    let mut kept: Vec<_> = split.train.iter().chain(&split.validation).map(key).collect();
    let mut expected: Vec<_> = frames[runs[0].start..runs[3].end].iter().map(key).collect();
    kept.sort();
    expected.sort();
    assert!(kept == expected, "training and validation must be exactly subjects 0-3");
}

#[test]
fn noiseless_recording_replays_through_the_sensor() {
    let subject = &make_subjects(1, 21)[0];
    let traj = TrajectoryConfig::default();
    let frames = generate_reconstruction_dataset(
        subject,
        &ChannelMap::standard(),
        [300, 100, 50],
        120.0,
        &NoiseConfig::noiseless(0),
        &traj,
        77,
    )
    .unwrap();
    assert_eq!(frames.len(), 450);
    let geom = subject.geometry().unwrap();
    let sensor = Sensor::new(ChannelMap::standard(), geom.clone()).unwrap();
    for (f, pose) in frames.iter().zip(pose_trajectory(450, 120.0, &traj, 77)) {
        let replay: Vec<f32> = sensor.noiseless(&pose, SensingMode::Full).values.iter().map(|&v| v as f32).collect();
        assert_eq!(f.channels, replay);
        assert_eq!(f.target.unwrap(), forward_kinematics(&pose, &geom).to_flat());
    }

    let split = split_reconstruction_dataset(&frames, [300, 100, 50]).unwrap();
    assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (300, 100, 50));
    assert!(split.train.last().unwrap().timestamp_ns < split.validation[0].timestamp_ns);
    assert!(split.validation.last().unwrap().timestamp_ns < split.test[0].timestamp_ns);
}

#[test]
fn full_scale_segment_durations() {
    for (frames, secs) in [(32_965, 274.7), (27_183, 226.5), (5_446, 45.4)] {
        assert!((frames as f64 / 120.0 - secs).abs() <= 0.05);
    }
}

fn stream_strategy() -> impl Strategy<Value = Vec<Frame>> {
    (proptest::collection::vec(proptest::collection::vec(-0.2..0.2f32, 14), 2..60), any::<prop::sample::Index>())
        .prop_map(|(rows, reset)| {
            let cut = reset.index(rows.len());
            rows.into_iter()
                .enumerate()
                .map(|(i, channels)| {
                    let t = if i < cut { i } else { i - cut };
                    Frame { timestamp_ns: t as u64 * 1000, channels, label: None, target: None, saturated: false }
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn filtering_a_prefix_gives_the_prefix_of_filtering(frames in stream_strategy(), window in 1..8usize, cut in any::<prop::sample::Index>()) {
        let prep = fit_preprocess(&frames, window).unwrap();
        let full = prep.apply(&frames).unwrap();
        let n = cut.index(frames.len()) + 1;
        prop_assert_eq!(prep.apply(&frames[..n]).unwrap(), full[..n].to_vec());
        let mut stream = prep.streamer().unwrap();
        for (f, out) in frames.iter().zip(&full) {
            prop_assert_eq!(&stream.push(f).unwrap(), &out.channels);
        }
    }

    #[test]
    fn training_statistics_ignore_other_frames(train in stream_strategy(), other in stream_strategy()) {
        let a = fit_preprocess(&train, 5).unwrap();
        let _ = a.apply(&other).unwrap();
        prop_assert_eq!(a.to_bytes(), fit_preprocess(&train, 5).unwrap().to_bytes());
        for f in a.apply(&train).unwrap() {
            prop_assert!(f.channels.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
