//! Full symmetric eigendecomposition and level-statistics diagnostics.

use std::f64::consts::PI;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;

/// Mean gap ratio of the Gaussian orthogonal ensemble, large-matrix limit.
pub const R_GOE: f64 = 0.5307;
/// Mean gap ratio from the 3x3 Wigner-like surmise, `4 - 2 sqrt(3)`.
pub const R_GOE_SURMISE: f64 = 0.535_898_384_862_245_4;
/// Mean gap ratio for uncorrelated (Poisson) levels, `2 ln 2 - 1`.
pub const R_POISSON: f64 = 0.386_294_361_119_890_6;

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Column `m` is the eigenvector of `eigenvalues[m]` in the Fock basis.
    pub eigenvectors: Mat<f64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, m: usize) -> &[f64] {
        self.eigenvectors.col_as_slice(m)
    }

    /// Overlap `<phi_m|k>` for every eigenstate `m`, i.e. row `k` of the eigenvector matrix.
    pub fn fock_row(&self, k: usize) -> Vec<f64> {
        (0..self.dim()).map(|m| self.eigenvectors[(k, m)]).collect()
    }

    pub fn width(&self) -> f64 {
        spectral_width(&self.eigenvalues)
    }

    /// `max |V diag(E) V^T - H|` over all entries.
    pub fn reconstruction_error(&self, h: MatRef<'_, f64>) -> f64 {
        let n = self.dim();
        let v = self.eigenvectors.as_ref();
        let scaled = Mat::<f64>::from_fn(n, n, |i, m| v[(i, m)] * self.eigenvalues[m]);
        let mut rec = Mat::<f64>::zeros(n, n);
        faer::linalg::matmul::matmul(
            rec.as_mut(),
            faer::Accum::Replace,
            scaled.as_ref(),
            v.transpose(),
            1.0,
            Par::Seq,
        );
        let mut err = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                err = err.max((rec[(i, j)] - h[(i, j)]).abs());
            }
        }
        err
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let v = self.eigenvectors.as_ref();
        let mut g = Mat::<f64>::zeros(n, n);
        faer::linalg::matmul::matmul(g.as_mut(), faer::Accum::Replace, v.transpose(), v, 1.0, Par::Seq);
        let mut err = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }
}

fn spectral_width(e: &[f64]) -> f64 {
    match (e.first(), e.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Full spectrum and eigenbasis of `h`.
pub fn diagonalize(h: &SparseHamiltonian) -> Result<SpectralData> {
    diagonalize_dense(h.to_dense().as_ref())
}

/// Full eigendecomposition of a dense symmetric matrix (lower triangle is read).
///
/// Runs single-threaded so that the result is bit-identical regardless of the
/// surrounding thread pool; callers parallelize across realizations instead.
/// Each eigenvector is normalized so that its largest-magnitude component is
/// positive (ties go to the lowest index).
pub fn diagonalize_dense(a: MatRef<'_, f64>) -> Result<SpectralData> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Mismatch(format!("matrix is {}x{}", n, a.ncols())));
    }
    let par = Par::Seq;
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(a, s.as_mut(), Some(u.as_mut()), par, MemStack::new(&mut mem), Default::default())
        .map_err(|e| Error::EigenSolver { dim: n, reason: format!("{e:?}") })?;

    let eigenvalues: Vec<f64> = s.column_vector().iter().copied().collect();
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenSolver { dim: n, reason: "non-finite eigenvalue".into() });
    }
    for m in 0..n {
        fix_sign(u.col_as_slice_mut(m));
    }
    Ok(SpectralData { eigenvalues, eigenvectors: u })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_dense(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let par = Par::Seq;
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(a, s.as_mut(), None, par, MemStack::new(&mut mem), Default::default())
        .map_err(|e| Error::EigenSolver { dim: n, reason: format!("{e:?}") })?;
    Ok(s.column_vector().iter().copied().collect())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Gap ratios of a sorted spectrum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GapRatios {
    /// `(level, r)` for each interior level `n` that yields a ratio.
    pub ratios: Vec<(usize, f64)>,
    /// Levels whose ratio is 0 because exactly one adjacent gap vanished.
    pub flagged: Vec<usize>,
    /// Levels skipped because both adjacent gaps vanished.
    pub skipped: Vec<usize>,
}

impl GapRatios {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.ratios.iter().map(|&(_, r)| r)
    }

    pub fn mean(&self) -> Option<f64> {
        if self.ratios.is_empty() {
            None
        } else {
            Some(self.values().sum::<f64>() / self.ratios.len() as f64)
        }
    }
}

/// `r_n = min(s_n, s_{n-1}) / max(s_n, s_{n-1})` with `s_n = E_{n+1} - E_n`,
/// one value per interior level.
///
/// Gaps below `1e-12` times the spectral width count as zero.
pub fn gap_ratios(eigenvalues: &[f64]) -> Result<GapRatios> {
    if eigenvalues.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "gap ratios need at least 3 levels, got {}",
            eigenvalues.len()
        )));
    }
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("eigenvalues must be sorted ascending".into()));
    }
    let tol = 1e-12 * spectral_width(eigenvalues);
    let mut out = GapRatios::default();
    for n in 1..eigenvalues.len() - 1 {
        let mut lo = eigenvalues[n] - eigenvalues[n - 1];
        let mut hi = eigenvalues[n + 1] - eigenvalues[n];
        if lo <= tol {
            lo = 0.0;
        }
        if hi <= tol {
            hi = 0.0;
        }
        let (small, big) = if lo < hi { (lo, hi) } else { (hi, lo) };
        if big == 0.0 {
            out.skipped.push(n);
            continue;
        }
        if small == 0.0 {
            out.flagged.push(n);
        }
        out.ratios.push((n, small / big));
    }
    if !out.skipped.is_empty() {
        log::warn!("{} levels skipped in gap ratios: both adjacent gaps degenerate", out.skipped.len());
    }
    Ok(out)
}

/// One window of [`windowed_r_average`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RWindow {
    pub start: usize,
    pub len: usize,
    /// Mean `E/N` of the levels in the window.
    pub energy_per_particle: f64,
    /// Mean gap ratio over the interior levels that fall in the window.
    pub r_mean: f64,
    pub ratio_count: usize,
}

/// Mean gap ratio in windows of `window` consecutive levels, advancing by `stride`.
///
/// Only full windows are reported; trailing levels that do not fill a window
/// are dropped. If the spectrum is shorter than one window, a single window
/// covers it.
pub fn windowed_r_average(
    eigenvalues: &[f64],
    particles: usize,
    window: usize,
    stride: usize,
) -> Result<Vec<RWindow>> {
    if window < 10 {
        return Err(Error::InvalidParameter(format!("r window must be >= 10, got {window}")));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("window stride must be >= 1".into()));
    }
    let ratios = gap_ratios(eigenvalues)?;
    let len = eigenvalues.len();
    let nf = particles.max(1) as f64;

    let mut per_level = vec![None; len];
    for &(n, r) in &ratios.ratios {
        per_level[n] = Some(r);
    }

    let starts: Vec<usize> = if len <= window {
        vec![0]
    } else {
        (0..=len - window).step_by(stride).collect()
    };
    let mut out = Vec::with_capacity(starts.len());
    for start in starts {
        let end = (start + window).min(len);
        let e = eigenvalues[start..end].iter().sum::<f64>() / ((end - start) as f64 * nf);
        let rs: Vec<f64> = per_level[start..end].iter().flatten().copied().collect();
        let r_mean = if rs.is_empty() { f64::NAN } else { rs.iter().sum::<f64>() / rs.len() as f64 };
        out.push(RWindow { start, len: end - start, energy_per_particle: e, r_mean, ratio_count: rs.len() });
    }
    Ok(out)
}

/// Reference spacing densities at unfolded spacing `s`:
/// `(Wigner-Dyson, Poisson)` = `((pi s / 2) exp(-pi s^2 / 4), exp(-s))`.
///
/// The Wigner-Dyson surmise is taken in its unit-mean normalization.
pub fn reference_densities(s: f64) -> Result<(f64, f64)> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("spacing must be >= 0, got {s}")));
    }
    let wd = 0.5 * PI * s * (-0.25 * PI * s * s).exp();
    Ok((wd, (-s).exp()))
}

/// Random-matrix and uncorrelated-level generators for calibrating the
/// gap-ratio statistics.
pub mod synthetic {
    use faer::Mat;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    /// GOE matrix: off-diagonal `N(0, 1)`, diagonal `N(0, 2)`, symmetric.
    pub fn goe_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
        let mut a = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let x: f64 = StandardNormal.sample(rng);
                let x = if i == j { x * 2f64.sqrt() } else { x };
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    /// Sorted levels with independent unit-mean exponential gaps.
    pub fn poisson_spectrum<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
        let mut e = Vec::with_capacity(n);
        let mut x = 0.0;
        for _ in 0..n {
            let gap: f64 = Exp1.sample(rng);
            x += gap;
            e.push(x);
        }
        e
    }
}
