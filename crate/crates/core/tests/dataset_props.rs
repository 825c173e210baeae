use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use audiolrp::audio::{fit_mean, write_wav, Spectrogram, Waveform};
use audiolrp::dataset::{
    make_folds, scan_audiomnist, synth_generate, AudioRecord, AudioSource, FoldPlan, FoldRole, Gender,
    SynthConfig, Task,
};
use audiolrp::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Frequency (1 Hz grid, 50 to 400 Hz) with the largest DFT magnitude.
fn dft_peak(x: &[f64]) -> f64 {
    (50..=400)
        .map(|f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let ph = 2.0 * PI * f as f64 * i as f64 / 8000.0;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            (f as f64, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

#[test]
fn gender_like_classes_separate_at_170_hz() {
    let cfg = SynthConfig {
        classes: 2,
        per_class: 20,
        ..SynthConfig::default()
    };
    let records = synth_generate(&cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let mut correct = 0;
    for r in &records {
        let peak = dft_peak(r.load().unwrap().samples());
        let predicted = usize::from(peak > 170.0);
        if predicted == r.label(Task::Gender) {
            correct += 1;
        }
        match r.gender {
            Gender::Male => assert!(peak < 170.0, "{peak}"),
            Gender::Female => assert!(peak > 170.0, "{peak}"),
        }
    }
    assert_eq!(correct, records.len());
}

fn roster(female: u32, male: u32) -> Vec<AudioRecord> {
    (0..female + male)
        .map(|s| AudioRecord {
            source: AudioSource::File(PathBuf::from(format!("{s}.wav"))),
            digit: (s % 10) as u8,
            speaker: s + 1,
            gender: if s < female { Gender::Female } else { Gender::Male },
            take: 0,
            fold: None,
        })
        .collect()
}

fn assert_plan_shape(plan: &FoldPlan, records: &[AudioRecord]) {
    plan.check_disjoint().unwrap();
    let all: Vec<u32> = plan.splits.iter().flat_map(|s| s.speakers.iter().copied()).collect();
    assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), all.len());
    match plan.task {
        Task::Digit => {
            assert_eq!(plan.splits.len(), 5);
            assert!(plan.splits.iter().all(|s| s.speakers.len() == 12));
        }
        Task::Gender => {
            assert_eq!(plan.splits.len(), 4);
            for s in &plan.splits {
                let female = s
                    .speakers
                    .iter()
                    .filter(|&&sp| records.iter().any(|r| r.speaker == sp && r.gender == Gender::Female))
                    .count();
                assert_eq!((female, s.speakers.len()), (3, 6));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fold_plans_are_speaker_disjoint(seed in any::<u64>()) {
        let records = roster(12, 48);
        for task in [Task::Digit, Task::Gender] {
            let plan = make_folds(&records, task, seed).unwrap();
            assert_plan_shape(&plan, &records);
            for k in 0..plan.rotations() {
                let rot = plan.rotation(k).unwrap();
                let mut used: Vec<usize> = rot.train.clone();
                used.extend([rot.validation, rot.test]);
                used.sort_unstable();
                prop_assert_eq!(used, (0..plan.rotations()).collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn canary_speaker_never_reaches_the_mean() {
    let records = roster(12, 48);
    let plan = make_folds(&records, Task::Gender, 5).unwrap();
    let assigned = plan.assign(&records);
    let canary = plan.splits[0].speakers[0];
    let spectrogram_of = |r: &AudioRecord| {
        let v = if r.speaker == canary { 1e9 } else { r.speaker as f64 };
        Spectrogram::new(vec![v; 227 * 227], 227, 227).unwrap()
    };
    let specs: Vec<(FoldRole, Spectrogram)> = assigned
        .iter()
        .map(|r| (plan.role_of(r.speaker, 0).unwrap().unwrap(), spectrogram_of(r)))
        .collect();
    let train: Vec<(FoldRole, &Spectrogram)> =
        specs.iter().filter(|(role, _)| *role == FoldRole::Train).map(|(r, s)| (*r, s)).collect();
    let mean = fit_mean(train).unwrap();
    assert!(mean.spectrogram().data()[0] < 100.0);
    let err = fit_mean(specs.iter().map(|(r, s)| (*r, s))).unwrap_err();
    assert!(matches!(err, Error::Leakage(_)));
}

#[test]
fn scans_published_layout() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(
        root.join("audioMNIST_meta.txt"),
        r#"{"01": {"accent": "german", "age": 30, "gender": "male", "native speaker": "yes"},
            "02": {"gender": "Female", "recordingroom": "Kemar"}}"#,
    )
    .unwrap();
    let wave = Waveform::new(vec![0.25; 600], 48_000).unwrap();
    for (speaker, digit, take) in [(1, 7, 3), (1, 0, 0), (2, 9, 49)] {
        let sub = root.join(format!("{speaker:02}"));
        std::fs::create_dir_all(&sub).unwrap();
        write_wav(&sub.join(format!("{digit}_{speaker:02}_{take}.wav")), &wave).unwrap();
    }
    let records = scan_audiomnist(root, None).unwrap();
    let keys: Vec<(u32, u8, u32, Gender)> = records.iter().map(|r| (r.speaker, r.digit, r.take, r.gender)).collect();
    assert_eq!(
        keys,
        vec![(1, 0, 0, Gender::Male), (1, 7, 3, Gender::Male), (2, 9, 49, Gender::Female)]
    );
    let loaded = records[0].load().unwrap();
    assert_eq!((loaded.sample_rate(), loaded.len()), (8000, 100));

    std::fs::create_dir_all(root.join("03")).unwrap();
    write_wav(&root.join("03").join("1_03_0.wav"), &wave).unwrap();
    assert!(matches!(scan_audiomnist(root, None), Err(Error::Data(_))));
    std::fs::remove_file(root.join("03").join("1_03_0.wav")).unwrap();

    write_wav(&root.join("02").join("x_y.wav"), &wave).unwrap();
    match scan_audiomnist(root, None) {
        Err(Error::FileName { path, .. }) => assert!(path.ends_with("x_y.wav")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn synthetic_records_fit_the_network_input() {
    for classes in [2, 10] {
        let cfg = SynthConfig {
            classes,
            per_class: 6,
            ..SynthConfig::default()
        };
        let a = synth_generate(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = synth_generate(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        for r in &a {
            let w = r.load().unwrap();
            assert_eq!(w.sample_rate(), 8000);
            assert!(w.len() <= 8000);
            assert!(w.samples().iter().all(|v| (-1.0..1.0).contains(v)));
        }
    }
}
