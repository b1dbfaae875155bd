use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use openrule_bench::relation_workload;
use openrule_core::sbs::supported_decode;
use openrule_core::{exhaustive_rule_oracle, SbsConfig};

fn supported_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("supported_decode");
    for n in [1, 4, 16] {
        let (model, ins) = relation_workload(n);
        let cfg = SbsConfig { k: 10, max_len: 12, beam_groups: 5, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("instantiations", n), &n, |b, _| {
            b.iter(|| supported_decode(black_box(&ins), &model, &cfg).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let (model, ins) = relation_workload(2);
    c.bench_function("exhaustive_rule_oracle/len3", |b| {
        b.iter(|| exhaustive_rule_oracle(black_box(&ins), &model, 3, false).unwrap())
    });
}

criterion_group!(benches, supported_search, oracle);
criterion_main!(benches);
