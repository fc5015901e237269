//! Self-checks at toy sizes against independent reference implementations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{FockBasis, FockState};
use crate::campaign::{run_campaign, CampaignConfig};
use crate::dynamics::{diagonal_ensemble, energy_expectation, expand_initial};
use crate::error::Result;
use crate::hamiltonian::{build_hamiltonian, ModelParams};
use crate::observables::{site_distribution, BasisKind, SiteDistribution, StateVector};
use crate::oracle::{evolve_by_expm, naive_hamiltonian, reduced_density_matrix};
use crate::spectral::diagonalize;
use crate::thermalization::trace_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, passed: value <= tol, detail: format!("{value:.3e} (tol {tol:.0e})") }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

/// Sparse Hamiltonian against a brute-force build.
pub fn hamiltonian_matches_naive() -> Result<CheckOutcome> {
    let basis = FockBasis::new(3, 3)?;
    let p = ModelParams::standard(3, 3, 0.7)?;
    let dense = build_hamiltonian(&p, &basis)?.to_dense();
    let naive = naive_hamiltonian(&p, &basis);
    let err = max_abs((0..basis.len()).flat_map(|i| {
        let d = &dense;
        let row = &naive[i];
        (0..basis.len()).map(move |j| (d[(i, j)] - row[j]).abs())
    }));
    Ok(CheckOutcome::new("hamiltonian vs brute force (N=M=3)", err, 1e-14))
}

/// Spectral time evolution against a matrix exponential.
pub fn evolution_matches_expm() -> Result<CheckOutcome> {
    let basis = FockBasis::new(4, 4)?;
    let p = ModelParams::standard(4, 4, 1.3)?;
    let h = build_hamiltonian(&p, &basis)?;
    let spectral = diagonalize(&h)?;
    let naive = naive_hamiltonian(&p, &basis);
    let state = FockState::parse("2,0,1,1")?;
    let k = basis.index_of_state(&state)?;
    let q = expand_initial(&state, &basis, &spectral)?;
    let mut psi0 = vec![Complex64::new(0.0, 0.0); basis.len()];
    psi0[k] = Complex64::new(1.0, 0.0);
    let mut err: f64 = 0.0;
    for t in [0.5, 3.0, 20.0] {
        let a = q.evolve(t);
        let b = evolve_by_expm(&naive, &psi0, t);
        err = err.max(max_abs(a.coefficients.iter().zip(&b).map(|(x, y)| (x - y).norm())));
    }
    Ok(CheckOutcome::new("evolution vs matrix exponential (Dim 35)", err, 1e-8))
}

/// Site distribution against an explicit partial trace.
pub fn partial_trace_matches() -> Result<CheckOutcome> {
    let basis = FockBasis::new(4, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut c: Vec<Complex64> = (0..basis.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= norm);
    let psi = StateVector { coefficients: c, basis: BasisKind::Fock };
    let mut err: f64 = 0.0;
    for site in 1..=4 {
        let d = site_distribution(&psi, &basis, site)?;
        let rho = reduced_density_matrix(&basis, &psi.coefficients, site - 1);
        err = err.max(max_abs(d.probabilities.iter().enumerate().map(|(i, p)| (p - rho[i][i].re).abs())));
        for i in 0..rho.len() {
            for j in 0..rho.len() {
                if i != j {
                    err = err.max(rho[i][j].norm());
                }
            }
        }
    }
    Ok(CheckOutcome::new("site distribution vs partial trace (Dim 35)", err, 1e-10))
}

/// Norm and energy drift of a long evolution.
pub fn conservation() -> Result<CheckOutcome> {
    let basis = FockBasis::new(5, 5)?;
    let h = build_hamiltonian(&ModelParams::standard(5, 5, 2.1)?, &basis)?;
    let spectral = diagonalize(&h)?;
    let q = expand_initial(&FockState::parse("3,0,0,2,0")?, &basis, &spectral)?;
    let e0 = q.mean_energy();
    let (mut dn, mut de): (f64, f64) = (0.0, 0.0);
    for t in [1.0, 1e2, 1e4, 1e5] {
        let psi = q.evolve(t);
        dn = dn.max((psi.norm_sqr() - 1.0).abs());
        de = de.max((energy_expectation(&psi, &h) - e0).abs());
    }
    Ok(CheckOutcome {
        name: "norm and energy conservation to t=1e5 (Dim 126)",
        passed: dn <= 1e-10 && de <= 1e-8,
        detail: format!("norm {dn:.3e} (tol 1e-10), energy {de:.3e} (tol 1e-8)"),
    })
}

/// Diagonal-ensemble value against the mean over random late times.
pub fn diagonal_ensemble_matches_time_average() -> Result<CheckOutcome> {
    let basis = FockBasis::new(4, 4)?;
    let h = build_hamiltonian(&ModelParams::standard(4, 4, 0.4)?, &basis)?;
    let spectral = diagonalize(&h)?;
    let q = expand_initial(&FockState::parse("4,0,0,0")?, &basis, &spectral)?;
    let column = basis.site_column(0);
    let diag: Vec<f64> = (0..basis.len())
        .map(|m| spectral.eigenvector(m).iter().zip(&column).map(|(v, &n)| v * v * n as f64).sum())
        .collect();
    let de = diagonal_ensemble(&q, &diag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<f64> = (0..200)
        .map(|_| q.site_distribution_at(rng.gen_range(1e3..1e5), &column, 4).mean_occupation())
        .collect();
    let mean = samples.iter().sum::<f64>() / 200.0;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 199.0).sqrt();
    let z = (mean - de).abs() / (sd / 200f64.sqrt());
    Ok(CheckOutcome { name: "diagonal ensemble vs late-time mean", passed: z < 3.0, detail: format!("{z:.2} standard errors") })
}

/// Metric axioms of the trace distance on random distributions.
pub fn trace_distance_axioms() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random = || {
        let v: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = v.iter().sum();
        SiteDistribution::new(v.into_iter().map(|x| x / s).collect())
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (p, q, r) = (random()?, random()?, random()?);
        let pq = trace_distance(&p, &q)?;
        worst = worst
            .max(trace_distance(&p, &p)?)
            .max((pq - trace_distance(&q, &p)?).abs())
            .max(pq - trace_distance(&p, &r)? - trace_distance(&r, &q)?)
            .max(pq - 1.0)
            .max(-pq);
    }
    Ok(CheckOutcome::new("trace distance metric axioms (1000 triples)", worst.max(0.0), 1e-12))
}

/// End-to-end campaign at N=M=3: distributions normalized, bounds respected.
pub fn toy_campaign() -> Result<CheckOutcome> {
    let c = CampaignConfig {
        realizations: 3,
        r_window: 10,
        r_stride: 10,
        dispersion_window: 5,
        micro_half_width: 3,
        ..CampaignConfig::unit_filling(3)
    };
    let r = run_campaign(&c)?;
    let mut err: f64 = 0.0;
    for e in &r.equilibrium {
        err = err.max((e.distribution.probabilities.iter().sum::<f64>() - 1.0).abs());
        err = err.max((1.0 - e.pr).max(0.0)).max((e.pr - 10.0).max(0.0));
    }
    for v in &r.verdicts {
        err = err.max((-v.td).max(0.0)).max((v.td - 1.0).max(0.0));
    }
    Ok(CheckOutcome::new("toy campaign invariants (N=M=3)", err, 1e-10))
}

/// Runs every check in a fixed order.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        hamiltonian_matches_naive()?,
        evolution_matches_expm()?,
        partial_trace_matches()?,
        conservation()?,
        diagonal_ensemble_matches_time_average()?,
        trace_distance_axioms()?,
        toy_campaign()?,
    ])
}
