use criterion::{black_box, criterion_group, criterion_main, Criterion};
use loopflow::{fixtures, optimize_diameters, solve, Method, SolverConfig};
use loopflow_bench::{balanced_sizing_config, basis, perturbed_gas_network};

fn solvers(c: &mut Criterion) {
    for (label, net) in [("gas", fixtures::gas_network()), ("water", fixtures::water_network())] {
        for method in Method::ALL {
            let cfg = SolverConfig::with_method(method);
            c.bench_function(&format!("{label}/{}", method.name()), |b| {
                b.iter(|| solve(black_box(&net), black_box(&cfg)).unwrap())
            });
        }
    }
}

fn sizing(c: &mut Criterion) {
    let net = perturbed_gas_network();
    let basis = basis(&net);
    let cfg = balanced_sizing_config();
    c.bench_function("gas/sizing", |b| {
        b.iter(|| optimize_diameters(black_box(&net), &basis, &cfg).unwrap())
    });
}

criterion_group!(benches, solvers, sizing);
criterion_main!(benches);
