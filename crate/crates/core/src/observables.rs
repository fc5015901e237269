//! Single-site observables, participation ratios and eigenstate sweeps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::FockBasis;
use crate::error::{Error, Result};
use crate::parallel;
use crate::spectral::SpectralData;

/// Normalization tolerance accepted on input states.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Which basis a [`StateVector`]'s coefficients refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Fock,
    Eigen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coefficients: Vec<Complex64>,
    pub basis: BasisKind,
}

impl StateVector {
    pub fn fock(coefficients: Vec<Complex64>) -> Self {
        Self { coefficients, basis: BasisKind::Fock }
    }

    pub fn from_real(values: &[f64], basis: BasisKind) -> Self {
        Self { coefficients: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(), basis }
    }

    /// Basis vector `k` in a space of dimension `dim`.
    pub fn basis_state(dim: usize, k: usize, basis: BasisKind) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); dim];
        c[k] = Complex64::new(1.0, 0.0);
        Self { coefficients: c, basis }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|c_k|^2` for every component.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Probabilities `P_0..P_N` of finding `i` bosons on one site. Also the
/// diagonal of that site's reduced density matrix; at fixed total number the
/// off-diagonal elements vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDistribution {
    pub probabilities: Vec<f64>,
}

impl SiteDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.iter().any(|&p| !(p >= -1e-12)) {
            return Err(Error::InvalidParameter("probabilities must be non-negative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sq: total });
        }
        Ok(Self { probabilities })
    }

    /// Point mass at `i` on `0..=max`.
    pub fn delta(i: usize, max: usize) -> Self {
        let mut p = vec![0.0; max + 1];
        p[i] = 1.0;
        Self { probabilities: p }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn mean_occupation(&self) -> f64 {
        n_site(self)
    }

    pub fn entropy(&self) -> f64 {
        entropy_site(self)
    }

    /// Convex combination `sum_k w_k d_k`. All inputs must have the same length.
    pub fn mix<'a>(items: impl IntoIterator<Item = (f64, &'a SiteDistribution)>) -> Self {
        let mut acc: Vec<f64> = Vec::new();
        for (w, d) in items {
            if acc.is_empty() {
                acc = vec![0.0; d.len()];
            }
            for (a, p) in acc.iter_mut().zip(&d.probabilities) {
                *a += w * p;
            }
        }
        Self { probabilities: acc }
    }
}

/// `P_i = sum_{k : n_site(k) = i} w_k`, where `column[k]` is the boson count at the
/// chosen site in basis state `k`.
pub fn distribution_from_weights(weights: &[f64], column: &[u8], particles: usize) -> SiteDistribution {
    let mut p = vec![0.0; particles + 1];
    for (&w, &n) in weights.iter().zip(column) {
        p[n as usize] += w;
    }
    SiteDistribution { probabilities: p }
}

/// Number distribution at 1-based `site` for a state in the Fock basis.
pub fn site_distribution(psi: &StateVector, basis: &FockBasis, site: usize) -> Result<SiteDistribution> {
    if psi.basis != BasisKind::Fock {
        return Err(Error::Mismatch("site distributions need Fock-basis coefficients".into()));
    }
    if psi.len() != basis.len() {
        return Err(Error::Mismatch(format!("state has {} components, basis {}", psi.len(), basis.len())));
    }
    if site == 0 || site > basis.sites() {
        return Err(Error::InvalidParameter(format!("site must lie in 1..={}, got {site}", basis.sites())));
    }
    let norm_sq = psi.norm_sqr();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(distribution_from_weights(&psi.weights(), &basis.site_column(site - 1), basis.particles()))
}

/// Mean boson number `sum_i i P_i`.
pub fn n_site(dist: &SiteDistribution) -> f64 {
    dist.probabilities.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
}

/// Von Neumann entropy of the site, `-sum_i P_i ln P_i` with `0 ln 0 = 0`.
pub fn entropy_site(dist: &SiteDistribution) -> f64 {
    dist.probabilities.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>().max(0.0)
}

/// `1 / sum_k |c_k|^4`.
pub fn participation_ratio(psi: &StateVector) -> f64 {
    participation_ratio_from_weights(psi.coefficients.iter().map(|c| c.norm_sqr()))
}

pub fn participation_ratio_from_weights(weights: impl IntoIterator<Item = f64>) -> f64 {
    1.0 / weights.into_iter().map(|w| w * w).sum::<f64>()
}

/// Per-eigenstate values at site 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenRecord {
    pub energy: f64,
    pub distribution: SiteDistribution,
    pub n1: f64,
    pub s1: f64,
    /// Participation ratio of the eigenstate in the Fock basis.
    pub pr: f64,
}

/// Site-1 observables for every eigenstate, ascending in energy. After
/// averaging over realizations `realizations` counts the contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenstateSweep {
    pub particles: usize,
    pub realizations: usize,
    pub records: Vec<EigenRecord>,
}

impl EigenstateSweep {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn energies_per_particle(&self) -> Vec<f64> {
        let n = self.particles as f64;
        self.records.iter().map(|r| r.energy / n).collect()
    }

    pub fn n1(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.n1).collect()
    }

    pub fn s1(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s1).collect()
    }
}

/// Site-1 distribution, `n_1`, `S_1` and PR of every eigenstate.
pub fn eigenstate_sweep(spectral: &SpectralData, basis: &FockBasis) -> Result<EigenstateSweep> {
    if spectral.dim() != basis.len() {
        return Err(Error::Mismatch(format!(
            "spectrum has {} levels, basis {} states",
            spectral.dim(),
            basis.len()
        )));
    }
    let column = basis.site_column(0);
    let particles = basis.particles();
    let records = parallel::map_indexed(spectral.dim(), |m| {
        let v = spectral.eigenvector(m);
        let weights: Vec<f64> = v.iter().map(|x| x * x).collect();
        let distribution = distribution_from_weights(&weights, &column, particles);
        EigenRecord {
            energy: spectral.eigenvalues[m],
            n1: n_site(&distribution),
            s1: entropy_site(&distribution),
            pr: participation_ratio_from_weights(weights.iter().copied()),
            distribution,
        }
    });
    Ok(EigenstateSweep { particles, realizations: 1, records })
}

/// How eigenstates of different realizations are paired before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matching {
    /// The `m`-th eigenstate of every realization is averaged together.
    #[default]
    Rank,
    /// All eigenstates are pooled, sorted by energy, and averaged in
    /// consecutive groups of `realizations` states.
    EnergyBin,
}

/// Averages sweeps of equal length. Sums run in slice order.
pub fn average_sweeps(sweeps: &[EigenstateSweep], matching: Matching) -> Result<EigenstateSweep> {
    let first = sweeps.first().ok_or_else(|| Error::InvalidParameter("no sweeps to average".into()))?;
    let dim = first.len();
    if sweeps.iter().any(|s| s.len() != dim || s.particles != first.particles) {
        return Err(Error::Mismatch("sweeps differ in length or particle number".into()));
    }
    let k = sweeps.len();
    let groups: Vec<Vec<&EigenRecord>> = match matching {
        Matching::Rank => (0..dim).map(|m| sweeps.iter().map(|s| &s.records[m]).collect()).collect(),
        Matching::EnergyBin => {
            let mut pooled: Vec<&EigenRecord> = sweeps.iter().flat_map(|s| s.records.iter()).collect();
            // Stable sort keeps realization order among equal energies.
            pooled.sort_by(|a, b| a.energy.total_cmp(&b.energy));
            pooled.chunks(k).map(|c| c.to_vec()).collect()
        }
    };
    let inv = 1.0 / k as f64;
    let records = groups
        .into_iter()
        .map(|g| EigenRecord {
            energy: g.iter().map(|r| r.energy).sum::<f64>() * inv,
            distribution: SiteDistribution::mix(g.iter().map(|r| (inv, &r.distribution))),
            n1: g.iter().map(|r| r.n1).sum::<f64>() * inv,
            s1: g.iter().map(|r| r.s1).sum::<f64>() * inv,
            pr: g.iter().map(|r| r.pr).sum::<f64>() * inv,
        })
        .collect();
    Ok(EigenstateSweep {
        particles: first.particles,
        realizations: sweeps.iter().map(|s| s.realizations).sum(),
        records,
    })
}

/// Spread of a per-eigenstate quantity inside one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub start: usize,
    pub len: usize,
    pub energy_per_particle: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `max - min`.
    pub range: f64,
}

/// Sliding windows of `window` consecutive eigenstates, advancing by `stride`.
/// A single window covers everything when there are fewer values than `window`.
pub fn windowed_dispersion(
    values: &[f64],
    energies_per_particle: &[f64],
    window: usize,
    stride: usize,
) -> Result<Vec<Dispersion>> {
    if values.len() != energies_per_particle.len() {
        return Err(Error::Mismatch("values and energies differ in length".into()));
    }
    if window < 2 || stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "window must be >= 2 and stride >= 1, got {window}/{stride}"
        )));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let len = values.len();
    let starts: Vec<usize> = if len <= window { vec![0] } else { (0..=len - window).step_by(stride).collect() };
    Ok(starts
        .into_iter()
        .map(|start| {
            let end = (start + window).min(len);
            let v = &values[start..end];
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            Dispersion {
                start,
                len: end - start,
                energy_per_particle: energies_per_particle[start..end].iter().sum::<f64>() / n,
                std: var.sqrt(),
                range: hi - lo,
            }
        })
        .collect())
}
