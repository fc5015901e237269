use std::f64::consts::{PI, TAU};

use iaa_core::basis::{dimension, FockBasis, FockState};
use iaa_core::campaign::{phase_for, run, sample_phases, CampaignConfig, Stage};
use iaa_core::dynamics::{expand_initial, snapshot_distributions_all};
use iaa_core::hamiltonian::{build_hamiltonian, fock_expectation, ModelParams};
use iaa_core::observables::{average_sweeps, eigenstate_sweep, Matching};
use iaa_core::spectral::diagonalize;
use iaa_core::thermalization::{entropy_deviation, trace_distance};
use iaa_core::SiteDistribution;

#[test]
fn single_particle_dimer_closed_form() {
    let p = ModelParams {
        particles: 1,
        sites: 2,
        hopping: 0.5,
        interaction: 0.0,
        disorder: 0.6,
        beta: 1.618,
        phase: 0.0,
    };
    let basis = FockBasis::new(1, 2).unwrap();
    let h = build_hamiltonian(&p, &basis).unwrap().to_dense();
    let a = 0.6 * (2.0 * PI * 1.618).cos();
    let d = 0.6 * (4.0 * PI * 1.618).cos();
    assert!((h[(0, 0)] - a).abs() < 1e-15 && (h[(1, 1)] - d).abs() < 1e-15);
    assert_eq!((h[(0, 1)], h[(1, 0)]), (-0.5, -0.5));
    let s = diagonalize(&build_hamiltonian(&p, &basis).unwrap()).unwrap();
    let mid = 0.5 * (a + d);
    let half = (0.25 * (a - d) * (a - d) + 0.25).sqrt();
    assert!((s.eigenvalues[0] - (mid - half)).abs() < 1e-14);
    assert!((s.eigenvalues[1] - (mid + half)).abs() < 1e-14);
}

#[test]
fn fock_expectation_values() {
    let p = ModelParams::standard(7, 7, 0.0).unwrap();
    let mott = fock_expectation(&FockState::mott(7), &p).unwrap();
    let sum: f64 = (1..=7).map(|i| 0.6 * (2.0 * PI * 1.618 * i as f64).cos()).sum();
    assert!((mott - sum).abs() < 1e-13);

    // Averaging over a uniform phase grid removes the disorder term exactly.
    let s = FockState::parse("3,0,2,0,1,1,0").unwrap();
    let avg = (0..64).map(|k| fock_expectation(&s, &p.clone().with_phase(TAU * k as f64 / 64.0)).unwrap()).sum::<f64>() / 64.0;
    let u = 4.0 / 6.0;
    assert!((avg - u / 2.0 * 7.0 * (s.crowding().unwrap() - 1.0)).abs() < 1e-12);
}

#[test]
fn dimensions() {
    assert_eq!(dimension(7, 7).unwrap(), 1716);
    assert_eq!(dimension(10, 10).unwrap(), 92378);
    assert_eq!(FockBasis::new(6, 6).unwrap().len(), 462);
}

#[test]
fn phases_are_counter_based() {
    let all = sample_phases(77, 12);
    for (k, &phi) in all.iter().enumerate() {
        assert_eq!(phi, phase_for(77, k));
        assert!((0.0..TAU).contains(&phi));
    }
    assert_eq!(&sample_phases(77, 5)[..], &all[..5]);
}

#[test]
fn snapshot_at_zero_is_the_initial_state() {
    let basis = FockBasis::new(4, 4).unwrap();
    let s = diagonalize(&build_hamiltonian(&ModelParams::standard(4, 4, 1.0).unwrap(), &basis).unwrap()).unwrap();
    let dists = snapshot_distributions_all(&s, &basis, 0.0);
    for (k, d) in dists.iter().enumerate() {
        let n = basis.occupations(k)[0] as usize;
        assert!((d.probabilities[n] - 1.0).abs() < 1e-12);
    }
    let q = expand_initial(&basis.state(7), &basis, &s).unwrap();
    assert!((q.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn rank_average_is_the_mean_of_each_rank() {
    let basis = FockBasis::new(4, 4).unwrap();
    let sweeps: Vec<_> = [0.3, 2.0]
        .iter()
        .map(|&phi| {
            let s = diagonalize(&build_hamiltonian(&ModelParams::standard(4, 4, phi).unwrap(), &basis).unwrap()).unwrap();
            eigenstate_sweep(&s, &basis).unwrap()
        })
        .collect();
    let avg = average_sweeps(&sweeps, Matching::Rank).unwrap();
    for m in [0, 17, 34] {
        let e = 0.5 * (sweeps[0].records[m].energy + sweeps[1].records[m].energy);
        let s1 = 0.5 * (sweeps[0].records[m].s1 + sweeps[1].records[m].s1);
        assert!((avg.records[m].energy - e).abs() < 1e-14);
        assert!((avg.records[m].s1 - s1).abs() < 1e-14);
    }
}

#[test]
fn trace_distance_and_entropy_examples() {
    let a = SiteDistribution::delta(0, 2);
    let b = SiteDistribution::delta(2, 2);
    assert_eq!(trace_distance(&a, &b).unwrap(), 1.0);
    assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
    assert!((entropy_deviation(0.9, 1.0).unwrap() - 0.1).abs() < 1e-15);
    assert!(entropy_deviation(0.5, 0.0).is_err());
}

#[test]
fn eth_stage_is_deterministic() {
    let c = CampaignConfig { realizations: 3, dispersion_window: 20, ..CampaignConfig::unit_filling(5) };
    let a = run(&c, Stage::Eth).unwrap();
    let b = run(&CampaignConfig { workers: 2, ..c }, Stage::Eth).unwrap();
    assert_eq!(a.sweep, b.sweep);
    assert_eq!(a.s1_dispersion, b.s1_dispersion);
    assert_eq!(a.r_curve, b.r_curve);
}
