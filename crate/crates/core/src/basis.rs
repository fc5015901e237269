//! Occupation-number (Fock) basis for `N` bosons on `M` sites.
//!
//! States are stored in descending lexicographic order of the occupation
//! vector: `(N,0,..,0)` is index 0 and `(0,..,0,N)` is the last index. The
//! position of an arbitrary state is recovered by ranking arithmetic in O(M).

use std::fmt;

use crate::error::{Error, Result};

/// Default cap on the Hilbert space dimension. Dense diagonalization beyond
/// this is not practical.
pub const DEFAULT_DIMENSION_CAP: usize = 100_000;

/// Number of ways to place `n` bosons on `m` sites, `binomial(n+m-1, n)`.
///
/// Exact integer arithmetic; overflow is reported, never wrapped.
pub fn dimension(n: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidParameter("a lattice needs at least one site".into()));
    }
    binomial(n + m - 1, n).ok_or(Error::DimensionOverflow { n, m })
}

/// `binomial(a, b)` or `None` on overflow.
fn binomial(a: usize, b: usize) -> Option<usize> {
    if b > a {
        return Some(0);
    }
    let b = b.min(a - b);
    let mut acc: usize = 1;
    for i in 0..b {
        // acc * (a - i) is divisible by (i + 1) at every step.
        let num = (acc as u128).checked_mul((a - i) as u128)?;
        acc = usize::try_from(num / (i as u128 + 1)).ok()?;
    }
    Some(acc)
}

/// Occupation vector `|n_1, ..., n_M>`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    occupations: Vec<u8>,
}

impl FockState {
    pub fn new(occupations: Vec<u8>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::InvalidState("empty occupation vector".into()));
        }
        Ok(Self { occupations })
    }

    /// Parses `"1,1,0,2"` (also accepts `-`, `|` or whitespace separators).
    pub fn parse(s: &str) -> Result<Self> {
        let occ = s
            .split(|c: char| c == ',' || c == '-' || c == '|' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u8>()
                    .map_err(|_| Error::InvalidState(format!("bad occupation {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(occ)
    }

    /// The unit-filling state with one boson per site.
    pub fn mott(sites: usize) -> Self {
        Self { occupations: vec![1; sites] }
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occupations
    }

    pub fn sites(&self) -> usize {
        self.occupations.len()
    }

    pub fn particles(&self) -> usize {
        particles(&self.occupations)
    }

    pub fn crowding(&self) -> Result<f64> {
        crowding(&self.occupations)
    }

    pub fn interaction_energy(&self, u: f64) -> f64 {
        interaction_energy(&self.occupations, u)
    }
}

impl fmt::Debug for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self)
    }
}

impl fmt::Display for FockState {
    /// `-` separated, so the label is a single CSV field.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.occupations.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

fn particles(occ: &[u8]) -> usize {
    occ.iter().map(|&n| n as usize).sum()
}

/// Crowding parameter `C = (1/N) sum n_i^2`, in `[1, N]`.
pub fn crowding(occ: &[u8]) -> Result<f64> {
    let n = particles(occ);
    if n == 0 {
        return Err(Error::InvalidState("crowding is undefined for zero particles".into()));
    }
    let sq: usize = occ.iter().map(|&k| (k as usize) * (k as usize)).sum();
    Ok(sq as f64 / n as f64)
}

/// On-site interaction energy `(U/2) sum n_i (n_i - 1)`.
pub fn interaction_energy(occ: &[u8], u: f64) -> f64 {
    let pairs: usize = occ.iter().map(|&k| (k as usize) * (k as usize).saturating_sub(1)).sum();
    0.5 * u * pairs as f64
}

/// All occupation states with fixed `N` and `M`, with O(M) index lookup.
///
/// Immutable after construction.
#[derive(Clone)]
pub struct FockBasis {
    particles: usize,
    sites: usize,
    dim: usize,
    /// Row-major `dim x sites` occupation table.
    table: Vec<u8>,
    /// `ways[s][k]` = number of ways to put `k` bosons on `s` sites.
    ways: Vec<Vec<usize>>,
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("particles", &self.particles)
            .field("sites", &self.sites)
            .field("dim", &self.dim)
            .finish()
    }
}

impl FockBasis {
    /// Enumerates the basis, rejecting dimensions above [`DEFAULT_DIMENSION_CAP`].
    pub fn new(particles: usize, sites: usize) -> Result<Self> {
        Self::with_cap(particles, sites, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(particles: usize, sites: usize, cap: usize) -> Result<Self> {
        if particles > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "at most {} particles are supported, got {particles}",
                u8::MAX
            )));
        }
        let dim = dimension(particles, sites)?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }

        // ways[s][k] = C(k+s-1, k); ways[0][k] = [k == 0]. Sites go up to M so the
        // ranking identity can look one site past the remaining ones.
        let mut ways = vec![vec![0usize; particles + 1]; sites + 1];
        ways[0][0] = 1;
        for s in 1..=sites {
            for k in 0..=particles {
                let prev = if k > 0 { ways[s][k - 1] } else { 0 };
                ways[s][k] = ways[s - 1][k]
                    .checked_add(prev)
                    .ok_or(Error::DimensionOverflow { n: particles, m: sites })?;
            }
        }

        let mut table = Vec::with_capacity(dim * sites);
        let mut cur = vec![0u8; sites];
        cur[0] = particles as u8;
        loop {
            table.extend_from_slice(&cur);
            if !next_descending(&mut cur) {
                break;
            }
        }
        debug_assert_eq!(table.len(), dim * sites);

        Ok(Self { particles, sites, dim, table, ways })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    /// Occupations of the `k`-th state.
    pub fn occupations(&self, k: usize) -> &[u8] {
        &self.table[k * self.sites..(k + 1) * self.sites]
    }

    pub fn state(&self, k: usize) -> FockState {
        FockState { occupations: self.occupations(k).to_vec() }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.table.chunks_exact(self.sites)
    }

    /// Boson count at `site` (0-based) for every basis state.
    pub fn site_column(&self, site: usize) -> Vec<u8> {
        self.iter().map(|occ| occ[site]).collect()
    }

    /// Index of `occ` in the basis, or `None` if it does not belong to it.
    ///
    /// For position `i` holding `n_i` with `r` bosons left, the states that are
    /// lexicographically larger there number `sum_{v>n_i} ways(M-i-1, r-v)`,
    /// which telescopes to `ways(M-i, r-n_i-1)`.
    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.sites || particles(occ) != self.particles {
            return None;
        }
        let mut remaining = self.particles;
        let mut rank = 0usize;
        for (i, &n) in occ.iter().enumerate().take(self.sites - 1) {
            let n = n as usize;
            if remaining > n {
                rank += self.ways[self.sites - i][remaining - n - 1];
            }
            remaining -= n;
        }
        Some(rank)
    }

    pub fn index_of_state(&self, state: &FockState) -> Result<usize> {
        self.index_of(state.occupations()).ok_or_else(|| {
            Error::Mismatch(format!(
                "state {state} is not in the basis of {} bosons on {} sites",
                self.particles, self.sites
            ))
        })
    }
}

/// Advances `occ` to its successor in descending lexicographic order.
fn next_descending(occ: &mut [u8]) -> bool {
    let m = occ.len();
    if m < 2 {
        return false;
    }
    // Rightmost position before the last that still holds a boson.
    let Some(i) = (0..m - 1).rev().find(|&i| occ[i] > 0) else {
        return false;
    };
    let tail: u8 = occ[i + 1..].iter().sum();
    occ[i] -= 1;
    occ[i + 1] = tail + 1;
    for x in &mut occ[i + 2..] {
        *x = 0;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: every vector in {0..=n}^m that sums to n.
    fn brute_force(n: usize, m: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let total = (n + 1).pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<u8> = (0..m)
                .map(|_| {
                    let d = c % (n + 1);
                    c /= n + 1;
                    d as u8
                })
                .collect();
            if particles(&v) == n {
                out.push(v);
            }
        }
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    #[test]
    fn dimension_values() {
        assert_eq!(dimension(7, 7).unwrap(), 1716);
        assert_eq!(dimension(8, 8).unwrap(), 6435);
        assert_eq!(dimension(9, 9).unwrap(), 24310);
        assert_eq!(dimension(10, 10).unwrap(), 92378);
        assert_eq!(dimension(1, 1).unwrap(), 1);
        assert_eq!(dimension(3, 3).unwrap(), brute_force(3, 3).len());
        assert_eq!(dimension(3, 3).unwrap(), 10);
        assert_eq!(dimension(0, 5).unwrap(), 1);
    }

    #[test]
    fn dimension_overflow_is_an_error() {
        assert!(matches!(dimension(200, 200), Err(Error::DimensionOverflow { .. })));
        assert!(dimension(3, 0).is_err());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for (n, m) in [(2, 2), (3, 3), (4, 4), (2, 5), (5, 2), (0, 3), (4, 1)] {
            let basis = FockBasis::new(n, m).unwrap();
            let got: Vec<Vec<u8>> = basis.iter().map(|s| s.to_vec()).collect();
            assert_eq!(got, brute_force(n, m), "n={n} m={m}");
        }
        let b = FockBasis::new(2, 2).unwrap();
        assert_eq!(b.occupations(0), &[2, 0]);
        assert_eq!(b.occupations(1), &[1, 1]);
        assert_eq!(b.occupations(2), &[0, 2]);
        let b = FockBasis::new(3, 3).unwrap();
        assert_eq!(b.occupations(0), &[3, 0, 0]);
        assert_eq!(b.occupations(9), &[0, 0, 3]);
    }

    #[test]
    fn dimension_cap_rejects() {
        assert!(matches!(FockBasis::with_cap(7, 7, 1000), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn index_of_is_a_bijection() {
        let basis = FockBasis::new(8, 8).unwrap();
        assert_eq!(basis.len(), 6435);
        for k in 0..basis.len() {
            assert_eq!(basis.index_of(basis.occupations(k)), Some(k));
        }
        assert_eq!(basis.index_of(&[1, 1, 1]), None);
        assert_eq!(basis.index_of(&[9, 0, 0, 0, 0, 0, 0, 0]), None);
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding(&[1; 8]).unwrap(), 1.0);
        assert_eq!(crowding(&[8, 0, 0, 0, 0, 0, 0, 0]).unwrap(), 8.0);
        assert_eq!(crowding(&[0, 2, 2, 0, 0, 2, 2, 0]).unwrap(), 2.0);
        assert!(crowding(&[0, 0, 0]).is_err());
    }

    #[test]
    fn interaction_energy_examples() {
        let u = 4.0 / 7.0;
        assert_eq!(interaction_energy(&[1; 8], u), 0.0);
        assert!((interaction_energy(&[8, 0, 0, 0, 0, 0, 0, 0], u) - 16.0).abs() < 1e-12);
        let e = interaction_energy(&[0, 2, 2, 0, 0, 2, 2, 0], u);
        assert!((e - 16.0 / 7.0).abs() < 1e-12);
        assert!((e - 0.5 * u * 8.0 * (2.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn crowding_census_is_permutation_symmetric() {
        // At N=M=4 the states with a given crowding value are unions of
        // permutation classes of integer partitions of 4.
        use std::collections::BTreeMap;
        let basis = FockBasis::new(4, 4).unwrap();
        let mut by_c: BTreeMap<u64, usize> = BTreeMap::new();
        for occ in basis.iter() {
            let c = crowding(occ).unwrap();
            assert!((1.0..=4.0).contains(&c));
            *by_c.entry((c * 4.0).round() as u64).or_default() += 1;
        }
        // Partitions of 4 with <= 4 parts and their sum of squares:
        // 1111 -> 4 (1 arrangement), 211 -> 6 (12), 22 -> 8 (6), 31 -> 10 (12), 4 -> 16 (4).
        let expected: BTreeMap<u64, usize> =
            [(4, 1), (6, 12), (8, 6), (10, 12), (16, 4)].into_iter().collect();
        assert_eq!(by_c, expected);
    }

    #[test]
    fn first_site_census_at_unit_filling_eight() {
        let basis = FockBasis::new(8, 8).unwrap();
        let mut counts = [0usize; 9];
        for occ in basis.iter() {
            counts[occ[0] as usize] += 1;
        }
        assert_eq!(counts, [3003, 1716, 924, 462, 210, 84, 28, 7, 1]);
    }

    #[test]
    fn parse_and_display() {
        let s = FockState::parse("0,2,2,0").unwrap();
        assert_eq!(s.occupations(), &[0, 2, 2, 0]);
        assert_eq!(s.to_string(), "0-2-2-0");
        assert_eq!(FockState::parse(&s.to_string()).unwrap(), s);
        assert!(FockState::parse("1,x").is_err());
    }

    fn arb_state(m: usize, n: usize) -> impl Strategy<Value = Vec<u8>> {
        // Stars and bars: choose bar positions among n + m - 1 slots.
        proptest::sample::subsequence((0..n + m - 1).collect::<Vec<_>>(), m - 1).prop_map(
            move |bars| {
                let mut occ = Vec::with_capacity(m);
                let mut prev = 0usize;
                for (j, &b) in bars.iter().enumerate() {
                    occ.push((b - prev - if j == 0 { 0 } else { 1 }) as u8);
                    prev = b;
                }
                let last_start = if bars.is_empty() { 0 } else { prev + 1 };
                occ.push((n + m - 1 - last_start) as u8);
                occ
            },
        )
    }

    proptest! {
        #[test]
        fn random_states_round_trip(occ in arb_state(7, 7)) {
            prop_assert_eq!(particles(&occ), 7);
            let basis = FockBasis::new(7, 7).unwrap();
            let k = basis.index_of(&occ).unwrap();
            prop_assert_eq!(basis.occupations(k), occ.as_slice());
            let c = crowding(&occ).unwrap();
            prop_assert!((1.0..=7.0).contains(&c));
            let u = 2.0 / 3.0;
            let lhs = interaction_energy(&occ, u);
            let rhs = 0.5 * u * 7.0 * (c - 1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
