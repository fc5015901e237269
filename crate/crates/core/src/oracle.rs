//! Slow reference implementations used to cross-check the fast paths.
//!
//! Nothing here shares code with the production routines it checks: the
//! Hamiltonian is built by a double loop over operator strings, time
//! evolution uses a Taylor matrix exponential, and single-site reduced
//! density matrices come from an explicit partial trace over the full
//! tensor-product space.

use num_complex::Complex64;

use crate::basis::FockBasis;
use crate::hamiltonian::ModelParams;

/// `b_to^+ b_from` applied to an occupation vector: new vector and amplitude.
fn hop(occ: &[u8], from: usize, to: usize) -> Option<(Vec<u8>, f64)> {
    if occ[from] == 0 {
        return None;
    }
    let mut out = occ.to_vec();
    let a = (occ[from] as f64).sqrt();
    out[from] -= 1;
    let c = (out[to] as f64 + 1.0).sqrt();
    out[to] += 1;
    Some((out, a * c))
}

/// Dense `<m|H|n>` by brute force over all pairs of basis states.
pub fn naive_hamiltonian(params: &ModelParams, basis: &FockBasis) -> Vec<Vec<f64>> {
    let dim = basis.len();
    let m = basis.sites();
    let mut h = vec![vec![0.0; dim]; dim];
    for (col, n) in basis.iter().enumerate() {
        for (row, bra) in basis.iter().enumerate() {
            let mut v = 0.0;
            if row == col {
                for i in 0..m {
                    let ni = n[i] as f64;
                    v += 0.5 * params.interaction * ni * (ni - 1.0);
                    let site = (i + 1) as f64;
                    v += params.disorder
                        * (2.0 * std::f64::consts::PI * params.beta * site + params.phase).cos()
                        * ni;
                }
            }
            for i in 0..m.saturating_sub(1) {
                for (from, to) in [(i, i + 1), (i + 1, i)] {
                    if let Some((ket, amp)) = hop(n, from, to) {
                        if ket.as_slice() == bra {
                            v -= params.hopping * amp;
                        }
                    }
                }
            }
            h[row][col] = v;
        }
    }
    h
}

/// Row-major dense complex matrix, only for small reference computations.
#[derive(Clone, Debug)]
pub struct DenseComplex {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl DenseComplex {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn from_real(a: &[Vec<f64>], scale: Complex64) -> Self {
        let dim = a.len();
        let data = a.iter().flat_map(|row| row.iter().map(move |&x| scale * x)).collect();
        Self { dim, data }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Self { dim: n, data }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.data[i * n + j] * x[j]).sum()).collect()
    }

    fn norm_1(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DenseComplex) -> DenseComplex {
    let n = a.dim;
    let norm = a.norm_1();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled = DenseComplex { dim: n, data: a.data.iter().map(|z| z * scale).collect() };

    let mut result = DenseComplex::identity(n);
    let mut term = DenseComplex::identity(n);
    for k in 1..=30 {
        term = term.mul(&scaled);
        let inv = 1.0 / k as f64;
        for z in &mut term.data {
            *z *= inv;
        }
        for (r, t) in result.data.iter_mut().zip(&term.data) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    result
}

/// `exp(-i H t) psi0` with `H` given densely.
pub fn evolve_by_expm(h: &[Vec<f64>], psi0: &[Complex64], t: f64) -> Vec<Complex64> {
    let a = DenseComplex::from_real(h, Complex64::new(0.0, -t));
    expm(&a).apply(psi0)
}

/// Single-site reduced density matrix of a pure state, by embedding it into the
/// `(N+1)^M` product space and tracing out every other site. `site` is 0-based.
/// Returns a `(N+1) x (N+1)` row-major matrix.
pub fn reduced_density_matrix(
    basis: &FockBasis,
    psi: &[Complex64],
    site: usize,
) -> Vec<Vec<Complex64>> {
    let local = basis.particles() + 1;
    let m = basis.sites();
    let full_dim = local.pow(m as u32);
    let mut full = vec![Complex64::new(0.0, 0.0); full_dim];
    for (k, occ) in basis.iter().enumerate() {
        let mut code = 0usize;
        for &n in occ {
            code = code * local + n as usize;
        }
        full[code] = psi[k];
    }

    // Digits of the product index, most significant first (site 0).
    let stride = local.pow((m - 1 - site) as u32);
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); local]; local];
    for code in 0..full_dim {
        let a = (code / stride) % local;
        if a != 0 {
            continue;
        }
        // `code` enumerates every configuration of the other sites exactly once.
        for ra in 0..local {
            let x = full[code + ra * stride];
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for rb in 0..local {
                let y = full[code + rb * stride];
                rho[ra][rb] += x * y.conj();
            }
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_is_phases() {
        let h = vec![vec![1.0, 0.0], vec![0.0, -2.0]];
        let psi = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let out = evolve_by_expm(&h, &psi, 3.0);
        assert!((out[0] - Complex64::new(0.0, -3.0).exp()).norm() < 1e-12);
        assert!((out[1] - Complex64::new(0.0, 1.0) * Complex64::new(0.0, 6.0).exp()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let basis = FockBasis::new(2, 2).unwrap();
        // |1,1>
        let psi = vec![0.0, 1.0, 0.0].into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        let rho = reduced_density_matrix(&basis, &psi, 0);
        assert!((rho[1][1].re - 1.0).abs() < 1e-15);
        assert_eq!(rho[0][0].re, 0.0);
    }
}
