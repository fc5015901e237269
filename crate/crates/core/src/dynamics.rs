//! Quench dynamics by spectral propagation.
//!
//! An initial state `|Psi(0)> = sum_m c_m |phi_m>` evolves as
//! `|Psi(t)> = sum_m c_m exp(-i E_m t) |phi_m>`. The Hamiltonian is real, so
//! the eigenvectors and the expansion coefficients of Fock states are real.

use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, FockState};
use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;
use crate::observables::{
    distribution_from_weights, entropy_site, n_site, participation_ratio_from_weights, EigenstateSweep,
    SiteDistribution, StateVector,
};
use crate::parallel;
use crate::spectral::SpectralData;

/// Equilibrium snapshot time used throughout.
pub const DEFAULT_EQUILIBRIUM_TIME: f64 = 1e4;

/// Above this dimension observable trajectories are evaluated by
/// evolve-then-measure instead of the eigenbasis double sum.
pub const DOUBLE_SUM_MAX_DIM: usize = 1000;

/// Initial state expanded in the eigenbasis of one realization.
#[derive(Debug, Clone)]
pub struct QuenchState<'a> {
    /// The occupation state this quench starts from, if any.
    pub initial: Option<FockState>,
    /// `c_m = <phi_m|Psi(0)>`.
    pub coefficients: Vec<f64>,
    pub spectral: &'a SpectralData,
}

/// Expands the occupation state `state` in the eigenbasis.
pub fn expand_initial<'a>(state: &FockState, basis: &FockBasis, spectral: &'a SpectralData) -> Result<QuenchState<'a>> {
    if spectral.dim() != basis.len() {
        return Err(Error::Mismatch(format!("spectrum has {} levels, basis {}", spectral.dim(), basis.len())));
    }
    let k = basis.index_of_state(state)?;
    Ok(QuenchState { initial: Some(state.clone()), coefficients: spectral.fock_row(k), spectral })
}

impl<'a> QuenchState<'a> {
    /// Arbitrary real eigenbasis coefficients; renormalization is the caller's job.
    pub fn from_coefficients(spectral: &'a SpectralData, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != spectral.dim() {
            return Err(Error::Mismatch("coefficient count differs from the spectrum".into()));
        }
        let norm_sq: f64 = coefficients.iter().map(|c| c * c).sum();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { initial: None, coefficients, spectral })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// `sum_m |c_m|^2 E_m`.
    pub fn mean_energy(&self) -> f64 {
        self.coefficients.iter().zip(&self.spectral.eigenvalues).map(|(c, e)| c * c * e).sum()
    }

    /// Participation ratio in the eigenbasis.
    pub fn participation_ratio(&self) -> f64 {
        participation_ratio_from_weights(self.coefficients.iter().map(|c| c * c))
    }

    /// `|Psi(t)>` in the Fock basis.
    pub fn evolve(&self, t: f64) -> StateVector {
        let dim = self.spectral.dim();
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for (m, &c) in self.coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let (s, co) = (self.spectral.eigenvalues[m] * t).sin_cos();
            let (a, b) = (c * co, -c * s);
            for ((r, i), &v) in re.iter_mut().zip(im.iter_mut()).zip(self.spectral.eigenvector(m)) {
                *r += a * v;
                *i += b * v;
            }
        }
        StateVector::fock(re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect())
    }

    /// Site distribution of `|Psi(t)>`; `column` is the boson count at the site
    /// for each basis state.
    pub fn site_distribution_at(&self, t: f64, column: &[u8], particles: usize) -> SiteDistribution {
        distribution_from_weights(&self.evolve(t).weights(), column, particles)
    }
}

/// `<Psi|H|Psi>` for a Fock-basis state.
pub fn energy_expectation(psi: &StateVector, h: &SparseHamiltonian) -> f64 {
    let re: Vec<f64> = psi.coefficients.iter().map(|c| c.re).collect();
    let im: Vec<f64> = psi.coefficients.iter().map(|c| c.im).collect();
    let hre = h.apply(&re);
    let him = h.apply(&im);
    re.iter().zip(&hre).map(|(a, b)| a * b).sum::<f64>() + im.iter().zip(&him).map(|(a, b)| a * b).sum::<f64>()
}

/// Something to measure along a trajectory.
pub enum Observable<'b> {
    /// Real symmetric operator, dense, in the Fock basis.
    Matrix(MatRef<'b, f64>),
    /// Operator diagonal in the Fock basis.
    Diagonal(&'b [f64]),
    /// Any function of the number distribution at a 1-based site.
    Site { site: usize, f: &'b (dyn Fn(&SiteDistribution) -> f64 + Sync) },
}

fn observable_matrix(obs: &Observable<'_>, dim: usize) -> Option<Mat<f64>> {
    match obs {
        Observable::Matrix(a) => Some(a.to_owned()),
        Observable::Diagonal(d) => {
            Some(Mat::from_fn(dim, dim, |i, j| if i == j { d[i] } else { 0.0 }))
        }
        Observable::Site { .. } => None,
    }
}

/// `<Psi(t)|A|Psi(t)>` at each time. Operators given as matrices use the
/// eigenbasis double sum up to [`DOUBLE_SUM_MAX_DIM`]; everything else is
/// measured on the evolved state.
pub fn observable_trajectory(
    q: &QuenchState<'_>,
    basis: &FockBasis,
    obs: &Observable<'_>,
    times: &[f64],
) -> Result<Vec<f64>> {
    let dim = q.spectral.dim();
    match obs {
        Observable::Matrix(_) | Observable::Diagonal(_) if dim <= DOUBLE_SUM_MAX_DIM => {
            trajectory_spectral_sum(q, obs, times)
        }
        _ => trajectory_evolved(q, basis, obs, times),
    }
}

/// Double-sum form `sum_{m,n} c_m c_n exp(i (E_m - E_n) t) A_mn` with
/// `A_mn = <phi_m|A|phi_n>`. Only defined for matrix observables.
pub fn trajectory_spectral_sum(q: &QuenchState<'_>, obs: &Observable<'_>, times: &[f64]) -> Result<Vec<f64>> {
    let dim = q.spectral.dim();
    let a = observable_matrix(obs, dim)
        .ok_or_else(|| Error::InvalidParameter("double-sum evaluation needs an operator matrix".into()))?;
    if a.nrows() != dim || a.ncols() != dim {
        return Err(Error::Mismatch(format!("operator is {}x{}, spectrum {dim}", a.nrows(), a.ncols())));
    }
    let v = q.spectral.eigenvectors.as_ref();
    let mut av = Mat::<f64>::zeros(dim, dim);
    faer::linalg::matmul::matmul(av.as_mut(), Accum::Replace, a.as_ref(), v, 1.0, Par::Seq);
    let mut a_eig = Mat::<f64>::zeros(dim, dim);
    faer::linalg::matmul::matmul(a_eig.as_mut(), Accum::Replace, v.transpose(), av.as_ref(), 1.0, Par::Seq);

    Ok(times
        .iter()
        .map(|&t| {
            // z_m = c_m exp(-i E_m t); value = z^dagger A z.
            let z: Vec<Complex64> = q
                .coefficients
                .iter()
                .zip(&q.spectral.eigenvalues)
                .map(|(&c, &e)| Complex64::from_polar(c, -e * t))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..dim {
                if z[n] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let col = a_eig.col_as_slice(n);
                let inner: Complex64 = z.iter().zip(col).map(|(zm, &amn)| zm.conj() * amn).sum();
                acc += inner * z[n];
            }
            acc.re
        })
        .collect())
}

/// Evolve to each time and measure on the Fock-basis state.
pub fn trajectory_evolved(
    q: &QuenchState<'_>,
    basis: &FockBasis,
    obs: &Observable<'_>,
    times: &[f64],
) -> Result<Vec<f64>> {
    let dim = q.spectral.dim();
    if basis.len() != dim {
        return Err(Error::Mismatch("basis and spectrum differ in dimension".into()));
    }
    let column = match obs {
        Observable::Site { site, .. } => {
            if *site == 0 || *site > basis.sites() {
                return Err(Error::InvalidParameter(format!("site {site} out of range")));
            }
            Some(basis.site_column(site - 1))
        }
        _ => None,
    };
    Ok(parallel::map_slice(times, |&t| {
        let psi = q.evolve(t);
        match obs {
            Observable::Matrix(a) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..dim {
                    let mut row = Complex64::new(0.0, 0.0);
                    for i in 0..dim {
                        row += psi.coefficients[i].conj() * a[(i, j)];
                    }
                    acc += row * psi.coefficients[j];
                }
                acc.re
            }
            Observable::Diagonal(d) => psi.coefficients.iter().zip(d.iter()).map(|(c, x)| c.norm_sqr() * x).sum(),
            Observable::Site { f, .. } => {
                let col = column.as_ref().expect("site column");
                f(&distribution_from_weights(&psi.weights(), col, basis.particles()))
            }
        }
    }))
}

/// Long-time average predicted by dropping the oscillating cross terms:
/// `sum_m |c_m|^2 A_mm`.
pub fn diagonal_ensemble(q: &QuenchState<'_>, diagonal_values: &[f64]) -> Result<f64> {
    if diagonal_values.len() != q.coefficients.len() {
        return Err(Error::Mismatch("per-eigenstate values differ in length from the expansion".into()));
    }
    Ok(q.coefficients.iter().zip(diagonal_values).map(|(c, a)| c * c * a).sum())
}

/// Number of adjacent level pairs closer than `1e-10` times the spectral width.
/// The diagonal ensemble ignores them; they are reported for diagnostics.
pub fn near_degenerate_gaps(spectral: &SpectralData) -> usize {
    let tol = 1e-10 * spectral.width();
    spectral.eigenvalues.windows(2).filter(|w| w[1] - w[0] < tol).count()
}

/// How the equilibrium value of a quench is extracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EquilibriumMethod {
    /// State at a single time.
    Snapshot { t: f64 },
    /// `sum_m |c_m|^2 P_i^{(m)}`.
    DiagonalEnsemble,
    /// Mean distribution over `samples` evenly spaced times in `[start, end]`.
    TimeWindow { start: f64, end: f64, samples: usize },
}

impl Default for EquilibriumMethod {
    fn default() -> Self {
        EquilibriumMethod::Snapshot { t: DEFAULT_EQUILIBRIUM_TIME }
    }
}

impl EquilibriumMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            EquilibriumMethod::Snapshot { .. } => "snapshot",
            EquilibriumMethod::DiagonalEnsemble => "diagonal-ensemble",
            EquilibriumMethod::TimeWindow { .. } => "time-window",
        }
    }
}

/// Equilibrium site-1 values of one quench. `n1` and `s1` are derived from
/// `distribution`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRecord {
    pub state: Option<FockState>,
    pub mean_energy: f64,
    /// Participation ratio in the eigenbasis.
    pub pr: f64,
    pub distribution: SiteDistribution,
    pub n1: f64,
    pub s1: f64,
    pub method: EquilibriumMethod,
}

/// Equilibrium site-1 record of `q`. `sweep` supplies the eigenstate
/// distributions for the diagonal ensemble and must come from the same spectrum.
pub fn equilibrium_record(
    q: &QuenchState<'_>,
    basis: &FockBasis,
    sweep: &EigenstateSweep,
    method: EquilibriumMethod,
) -> Result<EquilibriumRecord> {
    let column = basis.site_column(0);
    let particles = basis.particles();
    let distribution = match method {
        EquilibriumMethod::Snapshot { t } => q.site_distribution_at(t, &column, particles),
        EquilibriumMethod::DiagonalEnsemble => {
            if sweep.len() != q.coefficients.len() {
                return Err(Error::Mismatch("sweep and expansion differ in length".into()));
            }
            SiteDistribution::mix(q.coefficients.iter().zip(&sweep.records).map(|(c, r)| (c * c, &r.distribution)))
        }
        EquilibriumMethod::TimeWindow { start, end, samples } => {
            if samples == 0 || !(end >= start) {
                return Err(Error::InvalidParameter("time window needs samples >= 1 and end >= start".into()));
            }
            let times: Vec<f64> = (0..samples)
                .map(|j| if samples == 1 { start } else { start + (end - start) * j as f64 / (samples - 1) as f64 })
                .collect();
            let dists = parallel::map_slice(&times, |&t| q.site_distribution_at(t, &column, particles));
            let w = 1.0 / samples as f64;
            SiteDistribution::mix(dists.iter().map(|d| (w, d)))
        }
    };
    Ok(EquilibriumRecord {
        state: q.initial.clone(),
        mean_energy: q.mean_energy(),
        pr: q.participation_ratio(),
        n1: n_site(&distribution),
        s1: entropy_site(&distribution),
        distribution,
        method,
    })
}

/// Eigenbasis participation ratio of every Fock state: `1 / sum_m V_km^4`.
pub fn fock_participation_ratios(spectral: &SpectralData) -> Vec<f64> {
    let dim = spectral.dim();
    let mut sum4 = vec![0.0; dim];
    for m in 0..dim {
        for (s, v) in sum4.iter_mut().zip(spectral.eigenvector(m)) {
            let w = v * v;
            *s += w * w;
        }
    }
    sum4.into_iter().map(|s| 1.0 / s).collect()
}

/// Site-1 distributions at time `t` for the quench of every Fock state at once.
///
/// Builds `U(t) = V exp(-i E t) V^T` with two real matrix products; column `k`
/// is the evolved state that started in Fock state `k`.
pub fn snapshot_distributions_all(spectral: &SpectralData, basis: &FockBasis, t: f64) -> Vec<SiteDistribution> {
    let dim = spectral.dim();
    let v = spectral.eigenvectors.as_ref();
    let phases: Vec<(f64, f64)> = spectral.eigenvalues.iter().map(|e| (e * t).sin_cos()).collect();
    let scaled_cos = Mat::<f64>::from_fn(dim, dim, |i, m| v[(i, m)] * phases[m].1);
    let mut re = Mat::<f64>::zeros(dim, dim);
    faer::linalg::matmul::matmul(re.as_mut(), Accum::Replace, scaled_cos.as_ref(), v.transpose(), 1.0, Par::Seq);
    drop(scaled_cos);
    let scaled_sin = Mat::<f64>::from_fn(dim, dim, |i, m| v[(i, m)] * phases[m].0);
    let mut im = Mat::<f64>::zeros(dim, dim);
    faer::linalg::matmul::matmul(im.as_mut(), Accum::Replace, scaled_sin.as_ref(), v.transpose(), -1.0, Par::Seq);
    drop(scaled_sin);

    let column = basis.site_column(0);
    let particles = basis.particles();
    parallel::map_indexed(dim, |k| {
        let weights: Vec<f64> = re
            .col_as_slice(k)
            .iter()
            .zip(im.col_as_slice(k))
            .map(|(a, b)| a * a + b * b)
            .collect();
        distribution_from_weights(&weights, &column, particles)
    })
}

/// Diagonal-ensemble site-1 distributions for every Fock state.
pub fn diagonal_ensemble_distributions_all(spectral: &SpectralData, sweep: &EigenstateSweep) -> Vec<SiteDistribution> {
    let dim = spectral.dim();
    let width = sweep.particles + 1;
    let mut out = vec![vec![0.0; width]; dim];
    for (m, rec) in sweep.records.iter().enumerate() {
        for (row, v) in out.iter_mut().zip(spectral.eigenvector(m)) {
            let w = v * v;
            for (a, p) in row.iter_mut().zip(&rec.distribution.probabilities) {
                *a += w * p;
            }
        }
    }
    out.into_iter().map(|probabilities| SiteDistribution { probabilities }).collect()
}
