use criterion::{black_box, criterion_group, criterion_main, Criterion};

use freqscope_core::classify::features::dataset_samples;
use freqscope_core::classify::{knn_predict, ForestModel, ForestParams, KnnModel, Normalization};
use freqscope_core::experiment::WebsiteExperiment;
use freqscope_core::governor::{simulate, Governor, SimConfig};
use freqscope_core::profile::ryzen5;
use freqscope_core::workload::{synth_workload, WebsiteParams, WorkloadKind};

fn bench_simulate(c: &mut Criterion) {
    let w = synth_workload(&WorkloadKind::Website(WebsiteParams::default()), 1).unwrap();
    let mut g = c.benchmark_group("simulate_1000_ticks");
    for gov in [Governor::Ondemand, Governor::Schedutil, Governor::Conservative] {
        let cfg = SimConfig::new(ryzen5(), gov);
        g.bench_function(gov.as_str(), |b| b.iter(|| simulate(black_box(&w), &cfg).unwrap()));
    }
    g.finish();
}

fn samples() -> Vec<(Vec<f64>, String)> {
    let ds = WebsiteExperiment::new(ryzen5(), Governor::Ondemand, 20, 30, 1).dataset().unwrap();
    dataset_samples(&ds, Normalization::None).unwrap()
}

fn bench_classify(c: &mut Criterion) {
    let all = samples();
    let (train, test) = all.split_at(500);
    let knn = KnnModel::fit(1, train).unwrap();
    c.bench_function("knn_predict_500x1000", |b| b.iter(|| knn_predict(&knn, black_box(&test[0].0), 5).unwrap()));

    let params = ForestParams { n_trees: 20, ..ForestParams::default() };
    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    g.bench_function("train_20_trees_500x1000", |b| b.iter(|| ForestModel::train(black_box(train), params).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_simulate, bench_classify);
criterion_main!(benches);
