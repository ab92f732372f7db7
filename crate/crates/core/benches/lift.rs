use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use padiclf::exec::Mode;
use padiclf::lfun::PadicMeasure;
use padiclf::lift::{LiftOptions, Lifter};
use padiclf::manin::{cuspidal_eigensymbols, ClassicalSymbol, SymbolSpace};

fn newform(level: u64) -> ClassicalSymbol {
    cuspidal_eigensymbols(&SymbolSpace::for_level(level, 2), 13).unwrap().remove(0).symbol
}

const MODES: [(&str, Mode); 2] = [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)];

fn up_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("U_p per generator");
    for (level, p, depth) in [(11u64, 3u64, 8u32), (32, 3, 6), (37, 5, 6)] {
        let psi = newform(level);
        for (name, mode) in MODES {
            let lifter = Lifter::for_prime(&psi, p, None, depth, LiftOptions { noise: None, mode }).unwrap();
            let state = lifter.initial_state();
            group.bench_with_input(BenchmarkId::new(name, format!("N={level} p={p} M={depth}")), &state, |b, s| {
                b.iter(|| black_box(lifter.apply_up(&s.values)))
            });
        }
    }
    group.finish();
}

fn class_measure(c: &mut Criterion) {
    let mut group = c.benchmark_group("class moments");
    group.sample_size(10);
    for (level, p, depth, n) in [(11u64, 3u64, 8u32, 3u32), (37, 5, 6, 2)] {
        let psi = newform(level);
        let phi = Lifter::for_prime(&psi, p, None, depth, LiftOptions::default()).unwrap().run().unwrap();
        for (name, mode) in MODES {
            group.bench_function(BenchmarkId::new(name, format!("N={level} p={p} n={n}")), |b| {
                b.iter(|| black_box(PadicMeasure::new(&phi, n, 4, "", mode).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, up_evaluation, class_measure);
criterion_main!(benches);
