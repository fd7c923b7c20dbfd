use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hyperpam::fkmc::{moment_estimate_with, FkConfig};
use hyperpam::kernels::NoiseSpec;
use hyperpam::ledger::ConstantLedger;

fn moment(c: &mut Criterion) {
    let ledger = ConstantLedger::for_dimension(3).unwrap();
    let spec = NoiseSpec::new(0.6, 1.5, 3, 1.0).unwrap();
    let base = FkConfig::new(spec, 2, 0.5, 0.005, 4096, 1);
    let table = base.kernel_table(&ledger).unwrap();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);

    let mut group = c.benchmark_group("moment_estimate");
    group.sample_size(10);
    let mut workers = vec![1];
    if cfg!(feature = "parallel") {
        workers.push(threads.max(2));
    }
    for w in workers {
        let label = if w == 1 { "sequential" } else { "parallel" };
        let mut cfg = base;
        cfg.workers = w;
        group.bench_with_input(BenchmarkId::new(label, w), &cfg, |b, cfg| {
            b.iter(|| moment_estimate_with(cfg, &table).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, moment);
criterion_main!(benches);
