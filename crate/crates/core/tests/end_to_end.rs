use graphfolk::predict::{default_grid, nested_cv, FoldPlan, LabeledDataset, LearnerKind, Targets};
use graphfolk::sgns::{train, SgnsConfig};
use graphfolk::synth::{generate_sbm, spaced_incomes};
use graphfolk::walks::{generate_corpus, WalkConfig};
use graphfolk::{Graph, SbmSpec, Task, WalkCorpus};
use ndarray::ArrayView1;

fn two_block_corpus(seed: u64) -> (graphfolk::synth::SbmGraph, WalkCorpus) {
    let spec = SbmSpec {
        block_sizes: vec![30, 30],
        p_in: 0.3,
        p_out: 0.01,
        class_of_block: vec![1, 2],
        income_of_block: spaced_incomes(2, 20_000.0, 50_000.0, 2_000.0),
        seed,
    };
    let sbm = generate_sbm(&spec).unwrap();
    let g = Graph::build_undirected(&sbm.edges).unwrap();
    let corpus = generate_corpus(&g, &WalkConfig { walk_length: 40, walks_per_vertex: 5, seed, parallel: false });
    (sbm, corpus)
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
}

#[test]
fn same_block_users_embed_closer() {
    let (sbm, corpus) = two_block_corpus(4);
    let out = train(&corpus, &SgnsConfig { dim: 16, seed: 4, ..SgnsConfig::default() }).unwrap();
    let features = out.model.to_features();
    let block: Vec<usize> = features
        .ids()
        .iter()
        .map(|id| sbm.block_of[id[1..].parse::<usize>().unwrap()])
        .collect();
    let (mut within, mut across) = ((0.0, 0), (0.0, 0));
    let x = features.values();
    for i in 0..x.nrows() {
        for j in (i + 1)..x.nrows() {
            let c = cosine(x.row(i), x.row(j));
            let acc = if block[i] == block[j] { &mut within } else { &mut across };
            acc.0 += c;
            acc.1 += 1;
        }
    }
    let (within, across) = (within.0 / within.1 as f64, across.0 / across.1 as f64);
    assert!(within > across + 0.3, "within {within:.3} across {across:.3}");
}

#[test]
fn loss_falls_from_first_epoch() {
    let (_, corpus) = two_block_corpus(6);
    let out = train(&corpus, &SgnsConfig { dim: 8, epochs: 3, seed: 6, ..SgnsConfig::default() }).unwrap();
    assert_eq!(out.epoch_losses.len(), 3);
    assert!(out.epoch_losses[2] < out.epoch_losses[0], "{:?}", out.epoch_losses);
}

#[test]
fn graph_to_accuracy_is_reproducible_and_beats_baseline() {
    let run = || {
        let (sbm, corpus) = two_block_corpus(11);
        let features = train(&corpus, &SgnsConfig { dim: 8, seed: 11, ..SgnsConfig::default() })
            .unwrap()
            .model
            .to_features();
        let (ds, dropped) = LabeledDataset::join(&features, &sbm.labels);
        assert!(dropped.is_empty());
        let data = ds.task_data(Task::Classification);
        let Targets::Classes(classes) = &data.y else { unreachable!() };
        let plan = FoldPlan::stratified(classes, 5, 3, 11).unwrap();
        nested_cv(&data, &default_grid(LearnerKind::Logistic, 8), &plan).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let acc = a.aggregate.pooled_accuracy.unwrap();
    assert!(acc > a.aggregate.majority_baseline.unwrap() + 30.0, "accuracy {acc}");
}
