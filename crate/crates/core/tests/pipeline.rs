use std::fs;

use era_core::dataset::{split, synth_generate, ClassLabel, EpochSet, SynthConfig, TaskId, TaskSpec};
use era_core::era::{Checkpoint, EraConfig, EraModel, REFERENCE_SHARED_FEATURES};
use era_core::harness::{network_input, train, EpochRecord, Predictor, TrainConfig};
use era_core::tensor::{Graph, Tensor};
use proptest::prelude::*;

#[test]
fn default_trunk_yields_reference_features() {
    let task = TaskSpec::new(TaskId::FiveClass);
    let model = EraModel::<f32>::new(EraConfig::for_task(&task), task, 0).unwrap();
    let mut g = Graph::new();
    let vars = model.params().register_frozen(&mut g);
    let x = g.input(Tensor::zeros(&[1, 1, 24, 751]));
    let out = model.forward_shared(&mut g, &vars, x).unwrap();
    let f = REFERENCE_SHARED_FEATURES;
    assert_eq!(g.value(out.features).shape(), &[1, f[0], f[1], f[2]]);
    assert_eq!(g.value(out.probs).shape(), &[1, 3]);
}

fn small_set(labels: &[ClassLabel], per_class: usize, seed: u64) -> EpochSet {
    synth_generate(&SynthConfig {
        classes: labels.to_vec(),
        trials_per_class: per_class,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn epoch_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let set = small_set(&[ClassLabel::Rest, ClassLabel::Twist], 3, 1);
    let (a, b) = (dir.path().join("a.epochs"), dir.path().join("b.epochs"));
    set.write(&a).unwrap();
    let back = EpochSet::read(&a).unwrap();
    assert_eq!(back, set);
    assert!(back.epochs.data().iter().zip(set.epochs.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    back.write(&b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn checkpoints_round_trip_and_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let task = TaskSpec::new(TaskId::FiveClass);
    let model = EraModel::<f64>::new(EraConfig::for_task(&task), task.clone(), 9).unwrap();
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    model.checkpoint(9).unwrap().write(&a).unwrap();
    let ck = Checkpoint::read(&a).unwrap();
    ck.write(&b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let back: EraModel<f64> = ck.era_model().unwrap();
    for (x, y) in back.params().tensors().iter().zip(model.params().tensors()) {
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let set = small_set(&[ClassLabel::Rest, ClassLabel::ReachLeft, ClassLabel::Grasp], 2, 2);
    let x = network_input::<f64>(&set).unwrap();
    assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
}

fn tiny_config(task: &TaskSpec) -> EraConfig {
    EraConfig {
        samples: 250,
        temporal_kernel: Some(25),
        shared_width: 8,
        arm_widths: vec![8, 8],
        arm_kernels: vec![5, 5],
        hand_widths: vec![8, 8],
        hand_kernels: vec![7, 7],
        ..EraConfig::for_task(task)
    }
}

fn run(seed: u64, epochs: usize) -> (Vec<EpochRecord>, EraModel<f64>) {
    let task = TaskSpec::new(TaskId::FiveClass);
    let set = synth_generate(&SynthConfig {
        samples: 250,
        classes: task.labels.clone(),
        trials_per_class: 8,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut model = EraModel::<f64>::new(tiny_config(&task), task, seed).unwrap();
    let cfg = TrainConfig {
        epochs,
        batch_size: 8,
        seed,
        ..TrainConfig::default()
    };
    let hist = train(&mut model, &set, &cfg, |_, _| Ok(())).unwrap();
    (hist, model)
}

#[test]
fn training_lowers_the_loss() {
    let (hist, _) = run(4, 20);
    assert_eq!(hist.len(), 20);
    assert!(hist[19].total < hist[0].total, "{} -> {}", hist[0].total, hist[19].total);
}

#[test]
fn training_is_deterministic() {
    let (h1, m1) = run(5, 2);
    let (h2, m2) = run(5, 2);
    assert_eq!(h1, h2);
    for (x, y) in m1.params().tensors().iter().zip(m2.params().tensors()) {
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    let (h3, _) = run(6, 2);
    assert_ne!(h1, h3);
}

#[test]
fn predictor_checkpoints_carry_the_task() {
    let (_, model) = run(7, 1);
    let ck = Predictor::checkpoint(&model, 7).unwrap();
    assert_eq!(ck.manifest.task, TaskSpec::new(TaskId::FiveClass));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_takes_the_rounded_share_of_every_class(
        counts in prop::collection::vec(2usize..12, 1..5),
        frac in 0.0f64..0.9,
        seed in 0u64..50,
    ) {
        let mut labels = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat(ClassLabel::ALL[k]).take(c));
        }
        let n = labels.len();
        let set = EpochSet::new(Tensor::from_fn(&[n, 1, 2], |i| i as f64), labels, "p", 250.0).unwrap();
        let (train, test) = split(&set, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        for (k, &c) in counts.iter().enumerate() {
            let want = (c as f64 * frac).round() as usize;
            prop_assert_eq!(test.class_counts()[ClassLabel::ALL[k].index()], want);
        }
        let mut seen: Vec<f64> = train.epochs.data().iter().chain(test.epochs.data()).copied().collect();
        seen.sort_by(f64::total_cmp);
        prop_assert_eq!(seen, set.epochs.data().to_vec());
    }
}
