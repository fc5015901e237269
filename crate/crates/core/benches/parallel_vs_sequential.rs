//! Rayon against the sequential fallback on the two hot loops: independent
//! realizations and the per-eigenstate sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iaa_core::campaign::{sample_phases, CampaignConfig};
use iaa_core::hamiltonian::build_hamiltonian;
use iaa_core::observables::{distribution_from_weights, entropy_site};
use iaa_core::parallel::{self, seq};
use iaa_core::spectral::diagonalize;
use iaa_core::FockBasis;

fn realization(config: &CampaignConfig, basis: &FockBasis, phase: f64) -> f64 {
    let h = build_hamiltonian(&config.model(phase).unwrap(), basis).unwrap();
    diagonalize(&h).unwrap().eigenvalues[0]
}

fn realizations(c: &mut Criterion) {
    let config = CampaignConfig::unit_filling(5);
    let basis = FockBasis::new(5, 5).unwrap();
    let phases = sample_phases(1, 8);
    let mut g = c.benchmark_group("realizations_N5_x8");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("rayon", parallel::current_workers()), |b| {
        b.iter(|| parallel::map_slice(&phases, |&p| realization(&config, &basis, p)))
    });
    g.bench_function("sequential", |b| b.iter(|| seq::map_slice(&phases, |&p| realization(&config, &basis, p))));
    g.finish();
}

fn eigenstate_sweep(c: &mut Criterion) {
    let config = CampaignConfig::unit_filling(6);
    let basis = FockBasis::new(6, 6).unwrap();
    let spectral = diagonalize(&build_hamiltonian(&config.model(0.3).unwrap(), &basis).unwrap()).unwrap();
    let column = basis.site_column(0);
    let entropy = |m: usize| {
        let w: Vec<f64> = spectral.eigenvector(m).iter().map(|v| v * v).collect();
        entropy_site(&distribution_from_weights(&w, &column, 6))
    };
    let mut g = c.benchmark_group("sweep_N6");
    g.bench_function(BenchmarkId::new("rayon", parallel::current_workers()), |b| {
        b.iter(|| parallel::map_indexed(basis.len(), entropy))
    });
    g.bench_function("sequential", |b| b.iter(|| seq::map_indexed(basis.len(), entropy)));
    g.finish();
}

criterion_group!(benches, realizations, eigenstate_sweep);
criterion_main!(benches);
