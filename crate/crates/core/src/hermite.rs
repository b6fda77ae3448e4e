//! Multivariate Hermite polynomials, Gaussian and sphere moments, cumulants.
//!
//! A multi-index is stored as an exponent vector; most routines work on its
//! index list `L(alpha)`, where coordinate `i` appears `alpha_i` times.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `ell` for permutation sums in `hermite_inner`.
pub const INNER_MAX: usize = 6;
/// Largest total degree for matching sums and sphere moments.
pub const MOMENT_MAX: usize = 12;
/// Largest tuple length for partition-lattice sums.
pub const PARTITION_MAX: usize = 8;
/// Largest total degree accepted by the Hermite recurrence (memo over subsets).
pub const HERMITE_MAX: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    exps: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn zero(n: usize) -> Self {
        Self { exps: vec![0; n] }
    }

    /// Builds from an index list, e.g. `[0, 0, 2]` on `n = 3` is `(2, 0, 1)`.
    pub fn from_indices(n: usize, idx: &[usize]) -> Result<Self> {
        let mut exps = vec![0; n];
        for &i in idx {
            if i >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i + 1,
                });
            }
            exps[i] += 1;
        }
        Ok(Self { exps })
    }

    pub fn n(&self) -> usize {
        self.exps.len()
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    /// `|alpha|`.
    pub fn degree(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    /// `alpha! = prod alpha_i!`.
    pub fn factorial(&self) -> u128 {
        self.exps
            .iter()
            .map(|&e| (1..=e as u128).product::<u128>())
            .product()
    }

    /// `L(alpha)`, non-decreasing.
    pub fn indices(&self) -> Vec<usize> {
        self.exps
            .iter()
            .enumerate()
            .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
            .collect()
    }

    /// `x^alpha`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// All multi-indices over `n` coordinates with `|alpha| <= max_degree`,
    /// ordered by degree and then lexicographically by index list.
    pub fn all_up_to(n: usize, max_degree: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            for combo in (0..n).combinations_with_replacement(d) {
                let mut exps = vec![0; n];
                for i in combo {
                    exps[i] += 1;
                }
                out.push(MultiIndex { exps });
            }
        }
        out
    }
}

fn check_square(c: &DMatrix<f64>, n: usize) -> Result<()> {
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.nrows(),
        });
    }
    Ok(())
}

/// `He_alpha(x | C)` through `He_L = x_{l_m} He_{L - m} - sum_{j<m} C_{l_j l_m} He_{L - j - m}`.
pub fn hermite(alpha: &MultiIndex, x: &[f64], c: &DMatrix<f64>) -> Result<f64> {
    let n = alpha.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    check_square(c, n)?;
    hermite_list(&alpha.indices(), x, c)
}

/// Hermite polynomial for an explicit index list (repeats allowed).
pub fn hermite_list(idx: &[usize], x: &[f64], c: &DMatrix<f64>) -> Result<f64> {
    let m = idx.len();
    if m > HERMITE_MAX {
        return Err(Error::UnsupportedDegree {
            degree: m,
            max: HERMITE_MAX,
        });
    }
    let mut memo: Vec<f64> = vec![f64::NAN; 1 << m];
    memo[0] = 1.0;
    Ok(hermite_mask(idx, x, c, (1usize << m) - 1, &mut memo))
}

fn hermite_mask(idx: &[usize], x: &[f64], c: &DMatrix<f64>, mask: usize, memo: &mut [f64]) -> f64 {
    if !memo[mask].is_nan() {
        return memo[mask];
    }
    let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
    let rest = mask & !(1 << top);
    let lm = idx[top];
    let mut v = x[lm] * hermite_mask(idx, x, c, rest, memo);
    let mut bits = rest;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let cij = c[(idx[j], lm)];
        if cij != 0.0 {
            v -= cij * hermite_mask(idx, x, c, rest & !(1 << j), memo);
        }
    }
    memo[mask] = v;
    v
}

/// `E[He_alpha He_beta]` under `N(0, C)`: the permanent-like sum
/// `sum_{pi in S_ell} prod_i C_{L(alpha)_i, L(beta)_{pi(i)}}`.
pub fn hermite_inner(alpha: &MultiIndex, beta: &MultiIndex, c: &DMatrix<f64>) -> Result<f64> {
    check_square(c, alpha.n())?;
    if beta.n() != alpha.n() {
        return Err(Error::DimensionMismatch {
            expected: alpha.n(),
            got: beta.n(),
        });
    }
    let ell = alpha.degree();
    if ell != beta.degree() {
        return Ok(0.0);
    }
    if ell > INNER_MAX {
        return Err(Error::UnsupportedDegree {
            degree: ell,
            max: INNER_MAX,
        });
    }
    let la = alpha.indices();
    let lb = beta.indices();
    Ok((0..ell)
        .permutations(ell)
        .map(|pi| (0..ell).map(|i| c[(la[i], lb[pi[i]])]).product::<f64>())
        .sum())
}

fn matching_sum<F: Fn(usize, usize) -> f64>(idx: &mut Vec<usize>, pair: &F) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx.remove(0);
    let mut total = 0.0;
    for j in 0..idx.len() {
        let other = idx.remove(j);
        let w = pair(first, other);
        if w != 0.0 {
            total += w * matching_sum(idx, pair);
        }
        idx.insert(j, other);
    }
    idx.insert(0, first);
    total
}

/// Isserlis: `E x^alpha` for `x ~ N(0, C)` as a sum over perfect matchings.
pub fn gaussian_moment(alpha: &MultiIndex, c: &DMatrix<f64>) -> Result<f64> {
    check_square(c, alpha.n())?;
    gaussian_moment_list(&alpha.indices(), c)
}

/// `E prod_j x_{idx_j}` for `x ~ N(0, C)`.
pub fn gaussian_moment_list(idx: &[usize], c: &DMatrix<f64>) -> Result<f64> {
    let m = idx.len();
    if m > MOMENT_MAX {
        return Err(Error::UnsupportedDegree {
            degree: m,
            max: MOMENT_MAX,
        });
    }
    if m % 2 == 1 {
        return Ok(0.0);
    }
    Ok(matching_sum(&mut idx.to_vec(), &|i, j| c[(i, j)]))
}

/// `(m-1)!!` for even `m`, zero for odd `m`: the `m`-th standard normal moment.
pub fn normal_moment(m: u32) -> u128 {
    if m % 2 == 1 {
        return 0;
    }
    (1..m as u128).step_by(2).product()
}

/// `E x^alpha` for `x ~ N(0, I)`, exactly: `prod (alpha_i - 1)!!`.
pub fn gaussian_moment_identity(alpha: &MultiIndex) -> u128 {
    alpha.exps.iter().map(|&e| normal_moment(e)).product()
}

/// `E v^alpha` for `v` uniform on the unit sphere of `R^n`, exactly:
/// the standard Gaussian moment over `n (n+2) .. (n + 2q - 2)`, `2q = |alpha|`.
pub fn sphere_moment(alpha: &MultiIndex, n: usize) -> Result<Ratio<i128>> {
    let deg = alpha.degree();
    if deg > MOMENT_MAX {
        return Err(Error::UnsupportedDegree {
            degree: deg,
            max: MOMENT_MAX,
        });
    }
    if alpha.n() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: alpha.n(),
        });
    }
    if deg % 2 == 1 {
        return Ok(Ratio::from_integer(0));
    }
    let num = gaussian_moment_identity(alpha) as i128;
    let den: i128 = (0..deg / 2).map(|j| (n + 2 * j) as i128).product();
    Ok(Ratio::new(num, den))
}

/// Set partitions of `0..m` as block lists, via restricted growth strings.
pub fn set_partitions(m: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    if m == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut a = vec![0usize; m];
    let mut b = vec![0usize; m]; // max of a[..=i]
    loop {
        let blocks = a.iter().max().unwrap() + 1;
        let mut p = vec![Vec::new(); blocks];
        for (i, &k) in a.iter().enumerate() {
            p[k].push(i);
        }
        out.push(p);
        let mut i = m - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= b[i - 1] {
                a[i] += 1;
                b[i] = b[i - 1].max(a[i]);
                for j in i + 1..m {
                    a[j] = 0;
                    b[j] = b[i];
                }
                break;
            }
            i -= 1;
        }
    }
}

fn check_partition_len(len: usize) -> Result<()> {
    if len > PARTITION_MAX {
        return Err(Error::UnsupportedDegree {
            degree: len,
            max: PARTITION_MAX,
        });
    }
    Ok(())
}

fn block_indices(idx: &[usize], block: &[usize]) -> Vec<usize> {
    block.iter().map(|&p| idx[p]).collect()
}

/// `kappa(idx) = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{b in pi} m(idx_b)`.
pub fn cumulant_from_moments<M: Fn(&[usize]) -> f64>(moment: M, idx: &[usize]) -> Result<f64> {
    check_partition_len(idx.len())?;
    let mut total = 0.0;
    for p in set_partitions(idx.len()) {
        let k = p.len();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let fact: f64 = (1..k).map(|v| v as f64).product();
        let prod: f64 = p.iter().map(|b| moment(&block_indices(idx, b))).product();
        total += sign * fact * prod;
    }
    Ok(total)
}

/// `m(idx) = sum_pi prod_{b in pi} kappa(idx_b)`.
pub fn moment_from_cumulants<K: Fn(&[usize]) -> f64>(cumulant: K, idx: &[usize]) -> Result<f64> {
    check_partition_len(idx.len())?;
    Ok(set_partitions(idx.len())
        .iter()
        .map(|p| {
            p.iter()
                .map(|b| cumulant(&block_indices(idx, b)))
                .product::<f64>()
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteFit {
    pub coefficients: BTreeMap<MultiIndex, f64>,
    /// Empirical `E f^2`.
    pub empirical_energy: f64,
    /// Energy of the fitted expansion, `c^T G c`.
    pub projected_energy: f64,
    /// `empirical_energy - projected_energy`; nonnegative up to rounding.
    pub bessel_residual: f64,
    /// Condition number of the empirical Gram matrix.
    pub condition: f64,
    pub samples: usize,
}

impl HermiteFit {
    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.coefficients.get(alpha).copied().unwrap_or(0.0)
    }
}

/// Least-squares expansion of `f` in `He_alpha(. | C)`, `|alpha| <= max_degree`,
/// against the empirical measure of the samples (Gram-weighted normal equations).
pub fn wiener_hermite_fit(
    samples: &[(Vec<f64>, f64)],
    max_degree: usize,
    c: &DMatrix<f64>,
) -> Result<HermiteFit> {
    let n = c.nrows();
    check_square(c, n)?;
    let basis = MultiIndex::all_up_to(n, max_degree);
    let nb = basis.len();
    let ns = samples.len();
    if ns < 10 * nb {
        return Err(Error::InvalidParameter(format!(
            "{ns} samples for {nb} basis functions, need at least {}",
            10 * nb
        )));
    }
    let lists: Vec<Vec<usize>> = basis.iter().map(|a| a.indices()).collect();
    let mut phi = DMatrix::zeros(ns, nb);
    let mut y = DVector::zeros(ns);
    for (s, (x, fx)) in samples.iter().enumerate() {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        for (j, l) in lists.iter().enumerate() {
            phi[(s, j)] = hermite_list(l, x, c)?;
        }
        y[s] = *fx;
    }
    let scale = 1.0 / ns as f64;
    let gram = phi.transpose() * &phi * scale;
    let rhs = phi.transpose() * &y * scale;
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > 1e10 {
        return Err(Error::IllConditioned(condition));
    }
    let coef = gram
        .clone()
        .cholesky()
        .ok_or(Error::IllConditioned(condition))?
        .solve(&rhs);
    let empirical_energy = y.norm_squared() * scale;
    let projected_energy = coef.dot(&(&gram * &coef));
    let coefficients = basis.into_iter().zip(coef.iter().copied()).collect();
    Ok(HermiteFit {
        coefficients,
        empirical_energy,
        projected_energy,
        bessel_residual: empirical_energy - projected_energy,
        condition,
        samples: ns,
    })
}
