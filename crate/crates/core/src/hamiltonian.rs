//! Interacting Aubry-André Hamiltonian on an open chain (hbar = 1):
//!
//! ```text
//! H = -J sum_<i,j> b_i^+ b_j + (U/2) sum_i n_i (n_i - 1) + W sum_i cos(2 pi beta i + phi) n_i
//! ```
//!
//! with sites labelled `i = 1..M` in the disorder term.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::basis::{interaction_energy, FockBasis, FockState};
use crate::error::{Error, Result};

/// Decimal approximation of the golden ratio used as the incommensurate frequency.
pub const DEFAULT_BETA: f64 = 1.618;
pub const DEFAULT_HOPPING: f64 = 0.5;
pub const DEFAULT_DISORDER: f64 = 0.6;

/// Interaction strength `U = 4/(N-1)`, which keeps every term of `H` extensive in `N`.
pub fn default_interaction(particles: usize) -> Result<f64> {
    if particles < 2 {
        return Err(Error::InvalidParameter(format!(
            "U = 4/(N-1) needs N >= 2, got N = {particles}"
        )));
    }
    Ok(4.0 / (particles as f64 - 1.0))
}

/// One realization of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub particles: usize,
    pub sites: usize,
    /// Hopping rate `J`.
    pub hopping: f64,
    /// On-site interaction `U`.
    pub interaction: f64,
    /// Disorder strength `W`.
    pub disorder: f64,
    /// Incommensurate frequency `beta`.
    pub beta: f64,
    /// Phase `phi` in `[0, 2 pi)`.
    pub phase: f64,
}

impl ModelParams {
    /// `J = 1/2`, `W = 0.6`, `beta = 1.618`, `U = 4/(N-1)`.
    pub fn standard(particles: usize, sites: usize, phase: f64) -> Result<Self> {
        let p = Self {
            particles,
            sites,
            hopping: DEFAULT_HOPPING,
            interaction: default_interaction(particles)?,
            disorder: DEFAULT_DISORDER,
            beta: DEFAULT_BETA,
            phase,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// `J = 0` is accepted: it is the localized limit used in tests.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.sites == 0 {
            return bad("at least one site is required".into());
        }
        if !(self.hopping >= 0.0 && self.hopping.is_finite()) {
            return bad(format!("hopping must be finite and >= 0, got {}", self.hopping));
        }
        if !self.interaction.is_finite() {
            return bad(format!("interaction must be finite, got {}", self.interaction));
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            return bad(format!("disorder must be finite and >= 0, got {}", self.disorder));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        if !(0.0..2.0 * PI).contains(&self.phase) {
            return bad(format!("phase must lie in [0, 2pi), got {}", self.phase));
        }
        Ok(())
    }

    /// On-site potential `W cos(2 pi beta i + phi)` at 1-based site `i`.
    pub fn site_potential(&self, site: usize) -> f64 {
        self.disorder * (2.0 * PI * self.beta * site as f64 + self.phase).cos()
    }

    fn potentials(&self) -> Vec<f64> {
        (1..=self.sites).map(|i| self.site_potential(i)).collect()
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if basis.particles() != self.particles || basis.sites() != self.sites {
            return Err(Error::Mismatch(format!(
                "basis has N={}, M={} but parameters have N={}, M={}",
                basis.particles(),
                basis.sites(),
                self.particles,
                self.sites
            )));
        }
        Ok(())
    }
}

/// Diagonal element `<n|H|n>`; hopping has no diagonal part.
pub fn fock_expectation(state: &FockState, params: &ModelParams) -> Result<f64> {
    if state.sites() != params.sites {
        return Err(Error::Mismatch(format!(
            "state has {} sites, parameters have {}",
            state.sites(),
            params.sites
        )));
    }
    Ok(diagonal_element(state.occupations(), params, &params.potentials()))
}

fn diagonal_element(occ: &[u8], params: &ModelParams, potentials: &[f64]) -> f64 {
    let disorder: f64 = occ.iter().zip(potentials).map(|(&n, v)| n as f64 * v).sum();
    interaction_energy(occ, params.interaction) + disorder
}

/// Real symmetric sparse matrix: a full diagonal plus the strictly upper
/// triangle (`row < col`) of the off-diagonal part.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    diagonal: Vec<f64>,
    upper: Vec<(usize, usize, f64)>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Strictly upper off-diagonal entries, sorted by `(row, col)`.
    pub fn upper_entries(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    /// All nonzero entries `(row, col, value)` including both triangles.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.diagonal
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .chain(self.upper.iter().flat_map(|&(i, j, v)| [(i, j, v), (j, i, v)]))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut h = Mat::<f64>::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            h[(i, j)] += v;
        }
        h
    }

    /// `H x` for a real vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y: Vec<f64> = self.diagonal.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, v) in &self.upper {
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }
}

/// Assembles `H` on `basis`. Cost is O(Dim * M).
pub fn build_hamiltonian(params: &ModelParams, basis: &FockBasis) -> Result<SparseHamiltonian> {
    params.validate()?;
    params.check_basis(basis)?;
    let potentials = params.potentials();
    let dim = basis.len();
    let sites = basis.sites();

    let diagonal: Vec<f64> = basis.iter().map(|occ| diagonal_element(occ, params, &potentials)).collect();

    let mut upper = Vec::new();
    if params.hopping != 0.0 {
        let mut scratch = vec![0u8; sites];
        for (k, occ) in basis.iter().enumerate() {
            for i in 0..sites.saturating_sub(1) {
                // Move one boson across bond (i, i+1) in each direction.
                for (from, to) in [(i + 1, i), (i, i + 1)] {
                    if occ[from] == 0 {
                        continue;
                    }
                    scratch.copy_from_slice(occ);
                    scratch[from] -= 1;
                    scratch[to] += 1;
                    let l = basis
                        .index_of(&scratch)
                        .expect("hopping preserves particle number");
                    if l > k {
                        let amp = (occ[from] as f64 * (occ[to] as f64 + 1.0)).sqrt();
                        upper.push((k, l, -params.hopping * amp));
                    }
                }
            }
        }
        upper.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    }

    Ok(SparseHamiltonian { dim, diagonal, upper })
}
