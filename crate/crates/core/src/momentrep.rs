//! Matrix representations of homogeneous polynomials and moment tensors.
//!
//! A `MatrixRep` with arities `(a, b)` is an `n^a x n^b` matrix whose row and
//! column indices are base-`n` tuples, most significant mode first. Pairing a
//! polynomial's mode-symmetric representation with any representation of the
//! matching moment tensor gives the expectation of the polynomial.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{gaussian_moment, gaussian_moment_list, normal_moment, MultiIndex};
use crate::rng::stream;

/// Cap on `n^(a+b)`.
pub const MAX_ENTRIES: u128 = 10_000_000;
/// Cap on the total mode count for symmetrization.
pub const MAX_MODES: usize = 8;
/// Cap on matrix size for singular value computations.
pub const MAX_SVD_ENTRIES: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRep {
    pub row_arity: usize,
    pub col_arity: usize,
    pub n: usize,
    pub data: DMatrix<f64>,
    pub mode_symmetric: bool,
    pub fully_symmetric: bool,
}

fn entries(n: usize, modes: usize) -> Result<usize> {
    let total = (n as u128).checked_pow(modes as u32).unwrap_or(u128::MAX);
    if total > MAX_ENTRIES {
        return Err(Error::MemoryBudget {
            needed: total,
            budget: MAX_ENTRIES,
        });
    }
    Ok(total as usize)
}

/// Base-`n` digits of `idx`, most significant first, appended to `out`.
fn decode(mut idx: usize, n: usize, arity: usize, out: &mut Vec<usize>) {
    let start = out.len();
    out.resize(start + arity, 0);
    for k in (0..arity).rev() {
        out[start + k] = idx % n;
        idx /= n;
    }
}

impl MatrixRep {
    pub fn zeros(n: usize, row_arity: usize, col_arity: usize) -> Result<Self> {
        entries(n, row_arity + col_arity)?;
        Ok(Self {
            row_arity,
            col_arity,
            n,
            data: DMatrix::zeros(n.pow(row_arity as u32), n.pow(col_arity as u32)),
            mode_symmetric: false,
            fully_symmetric: false,
        })
    }

    /// Index tuple of cell `(r, c)`, row modes first.
    pub fn tuple(&self, r: usize, c: usize) -> Vec<usize> {
        let mut t = Vec::with_capacity(self.row_arity + self.col_arity);
        decode(r, self.n, self.row_arity, &mut t);
        decode(c, self.n, self.col_arity, &mut t);
        t
    }

    /// Hilbert-Schmidt pairing `<self, other>`.
    pub fn pair(&self, other: &MatrixRep) -> Result<f64> {
        if self.data.shape() != other.data.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        Ok(self.data.dot(&other.data))
    }

    /// Largest deviation between entries sharing an index multiset.
    pub fn symmetry_defect(&self) -> f64 {
        let mut groups: HashMap<Vec<usize>, (f64, f64)> = HashMap::new();
        for r in 0..self.data.nrows() {
            for c in 0..self.data.ncols() {
                let mut t = self.tuple(r, c);
                t.sort_unstable();
                let v = self.data[(r, c)];
                let e = groups.entry(t).or_insert((v, v));
                e.0 = e.0.min(v);
                e.1 = e.1.max(v);
            }
        }
        groups.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }
}

/// Homogeneous polynomial as a coefficient map over multi-indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub n: usize,
    pub terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    /// Adds `coef * prod_j x_{idx_j}`.
    pub fn add_term(&mut self, idx: &[usize], coef: f64) -> Result<()> {
        let a = MultiIndex::from_indices(self.n, idx)?;
        *self.terms.entry(a).or_insert(0.0) += coef;
        Ok(())
    }

    /// `||x||^2`.
    pub fn sq_norm(n: usize) -> Self {
        let mut p = Self::new(n);
        for i in 0..n {
            p.add_term(&[i, i], 1.0).unwrap();
        }
        p
    }

    /// Homogeneous polynomial of the given degree with i.i.d. standard normal
    /// coefficients on every monomial.
    pub fn random(n: usize, degree: usize, seed: u64) -> Self {
        let mut rng = stream(seed, &[0x706f_6c79]);
        let mut p = Self::new(n);
        for a in MultiIndex::all_up_to(n, degree)
            .into_iter()
            .filter(|a| a.degree() == degree)
        {
            p.terms.insert(a, rng.sample(StandardNormal));
        }
        p
    }

    /// The common degree, or an error if the polynomial is not homogeneous.
    pub fn degree(&self) -> Result<usize> {
        let mut degs = self.terms.keys().map(|a| a.degree());
        let Some(d) = degs.next() else {
            return Ok(0);
        };
        if degs.any(|e| e != d) {
            return Err(Error::InvalidParameter(
                "polynomial is not homogeneous".into(),
            ));
        }
        Ok(d)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.monomial(x)).sum()
    }

    /// `E p(x)` for `x ~ N(0, sigma)`, via Isserlis.
    pub fn gaussian_expectation(&self, sigma: &DMatrix<f64>) -> Result<f64> {
        let mut s = 0.0;
        for (a, c) in &self.terms {
            s += c * gaussian_moment(a, sigma)?;
        }
        Ok(s)
    }
}

/// The square-most mode-symmetric representation: `C_alpha` is shared
/// equally by the `d!/alpha!` cells whose index multiset is `alpha`.
pub fn canonical_rep(poly: &Polynomial) -> Result<MatrixRep> {
    let d = poly.degree()?;
    let n = poly.n;
    let (a, b) = (d.div_ceil(2), d / 2);
    let mut rep = MatrixRep::zeros(n, a, b)?;
    let d_fact: f64 = (1..=d).map(|v| v as f64).product();
    let lookup: HashMap<&[u32], f64> = poly
        .terms
        .iter()
        .map(|(alpha, c)| (alpha.exps(), c * alpha.factorial() as f64 / d_fact))
        .collect();
    let mut exps = vec![0u32; n];
    let mut t = Vec::with_capacity(d);
    for r in 0..rep.data.nrows() {
        for c in 0..rep.data.ncols() {
            t.clear();
            decode(r, n, a, &mut t);
            decode(c, n, b, &mut t);
            exps.iter_mut().for_each(|e| *e = 0);
            for &i in &t {
                exps[i] += 1;
            }
            if let Some(v) = lookup.get(exps.as_slice()) {
                rep.data[(r, c)] = *v;
            }
        }
    }
    rep.mode_symmetric = true;
    rep.fully_symmetric = true;
    Ok(rep)
}

/// Average over all permutations of the `a + b` modes. Every cell is replaced
/// by the mean over its orbit, which is the same thing.
pub fn mode_symmetrize(rep: &MatrixRep) -> Result<MatrixRep> {
    let modes = rep.row_arity + rep.col_arity;
    if modes > MAX_MODES {
        return Err(Error::UnsupportedDegree {
            degree: modes,
            max: MAX_MODES,
        });
    }
    let mut groups: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
    let (nr, nc) = rep.data.shape();
    let mut keys = Vec::with_capacity(nr * nc);
    for r in 0..nr {
        for c in 0..nc {
            let mut t = rep.tuple(r, c);
            t.sort_unstable();
            let e = groups.entry(t.clone()).or_insert((0.0, 0));
            e.0 += rep.data[(r, c)];
            e.1 += 1;
            keys.push(t);
        }
    }
    let mut out = rep.clone();
    let mut it = keys.into_iter();
    for r in 0..nr {
        for c in 0..nc {
            let (s, k) = groups[&it.next().unwrap()];
            out.data[(r, c)] = s / k as f64;
        }
    }
    out.mode_symmetric = true;
    out.fully_symmetric = true;
    Ok(out)
}

/// Exact `E x^{(a)} (x^{(b)})^T` for `x ~ N(0, sigma)`, entry by entry.
pub fn gaussian_moment_matrix(sigma: &DMatrix<f64>, a: usize, b: usize) -> Result<MatrixRep> {
    let n = sigma.nrows();
    let mut rep = MatrixRep::zeros(n, a, b)?;
    for r in 0..rep.data.nrows() {
        for c in 0..rep.data.ncols() {
            let t = rep.tuple(r, c);
            rep.data[(r, c)] = gaussian_moment_list(&t, sigma)?;
        }
    }
    rep.mode_symmetric = true;
    rep.fully_symmetric = true;
    Ok(rep)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Low-nuclear-norm representation of the order-`eta` Gaussian moment:
/// `(eta-1)!! (Phi Phi^T)^{floor(eta/4)} (x) Sigma^{eta/2 - 2 floor(eta/4)}`,
/// with `Phi = vec(Sigma)`. Its mode symmetrization is the exact moment matrix.
pub fn gaussian_moment_rep(sigma: &DMatrix<f64>, eta: usize) -> Result<MatrixRep> {
    if eta == 0 || eta % 2 == 1 || eta > 8 {
        return Err(Error::InvalidParameter(format!(
            "eta must be even and at most 8, got {eta}"
        )));
    }
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.ncols(),
        });
    }
    entries(n, eta)?;
    let phi = DVector::from_iterator(
        n * n,
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| sigma[(i, j)]),
    );
    let pp = &phi * phi.transpose();
    let mut m = DMatrix::from_element(1, 1, normal_moment(eta as u32) as f64);
    for _ in 0..eta / 4 {
        m = kron(&m, &pp);
    }
    for _ in 0..(eta / 2 - 2 * (eta / 4)) {
        m = kron(&m, sigma);
    }
    Ok(MatrixRep {
        row_arity: eta / 2,
        col_arity: eta / 2,
        n,
        data: m,
        mode_symmetric: false,
        fully_symmetric: false,
    })
}

/// Closed form for the nuclear norm of `gaussian_moment_rep` (PSD `sigma`).
pub fn gaussian_rep_nuclear_closed_form(sigma: &DMatrix<f64>, eta: usize) -> f64 {
    let q = eta / 4;
    normal_moment(eta as u32) as f64
        * sigma.norm_squared().powi(q as i32)
        * sigma.trace().powi((eta / 2 - 2 * q) as i32)
}

fn singular_values(rep: &MatrixRep) -> Result<DVector<f64>> {
    if rep.data.len() > MAX_SVD_ENTRIES {
        return Err(Error::MemoryBudget {
            needed: rep.data.len() as u128,
            budget: MAX_SVD_ENTRIES as u128,
        });
    }
    Ok(rep.data.singular_values())
}

pub fn nuclear_norm(rep: &MatrixRep) -> Result<f64> {
    Ok(singular_values(rep)?.sum())
}

pub fn op_norm(rep: &MatrixRep) -> Result<f64> {
    Ok(singular_values(rep)?.max())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    /// `E p(x)`, exact.
    pub lhs: f64,
    /// `||mat(p)||_op ||V||_1`.
    pub rhs: f64,
    pub slack: f64,
    pub op_norm: f64,
    pub nuclear_norm: f64,
    pub holds: bool,
}

/// `E p <= ||mat(p)||_op ||V||_1` with `V` the Gaussian moment representation.
pub fn holder_moment_bound(
    poly: &Polynomial,
    sigma: &DMatrix<f64>,
    eta: usize,
) -> Result<HolderBound> {
    let d = poly.degree()?;
    if d != eta || eta % 2 == 1 || eta > 6 {
        return Err(Error::InvalidParameter(format!(
            "need a homogeneous polynomial of even degree eta <= 6, got {d} vs {eta}"
        )));
    }
    if poly.n > 10 || sigma.nrows() != poly.n {
        return Err(Error::InvalidParameter(format!(
            "need n <= 10 matching sigma, got {}",
            poly.n
        )));
    }
    let lhs = poly.gaussian_expectation(sigma)?;
    let op = op_norm(&canonical_rep(poly)?)?;
    let nuc = nuclear_norm(&gaussian_moment_rep(sigma, eta)?)?;
    let rhs = op * nuc;
    Ok(HolderBound {
        lhs,
        rhs,
        slack: rhs - lhs,
        op_norm: op,
        nuclear_norm: nuc,
        holds: lhs <= rhs + 1e-10,
    })
}

/// `2^{d k^2 / 2} eta^{eta/2 + 2k} nu^{1/2} n^{floor(eta/2 + 1)/2}` with
/// `nu = prod nu_i^{eta_i}` and `eta = sum eta_i`: the nuclear norm bound for
/// joint moments of `k` conditionally Gaussian steps whose covariances are
/// degree-`d` polynomials of the past and bounded by `nu_i I`.
pub fn nuclear_norm_bound(etas: &[usize], nus: &[f64], d: usize, n: usize) -> f64 {
    let k = etas.len() as f64;
    let eta: usize = etas.iter().sum();
    let log_nu: f64 = etas.iter().zip(nus).map(|(&e, &v)| e as f64 * v.ln()).sum();
    let e = eta as f64;
    2f64.powf(d as f64 * k * k / 2.0)
        * e.powf(e / 2.0 + 2.0 * k)
        * (0.5 * log_nu).exp()
        * (n as f64).powf(((eta / 2 + 1) as f64) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub passed: bool,
    /// Smallest `lhs - rhs` over the grid.
    pub worst_slack: f64,
    pub pairs: usize,
    pub q: f64,
    pub constant: f64,
}

/// Grid check of `y^q - x^q >= q (y - x) x^{q-1} + C (y - x)^2` on
/// `[0, 1/delta_n]^2`, `q = 2^k/(2^k - 1)`, `C = (q-1) / ((2^k - 1) delta_n^{q-2})`.
pub fn strong_convexity_check(k: u32, delta_n: f64, grid: usize) -> Result<ConvexityReport> {
    if k == 0 || k > 30 || !(delta_n > 0.0) || grid < 2 {
        return Err(Error::InvalidParameter(
            "need k >= 1, delta_n > 0 and a grid of at least 2 points".into(),
        ));
    }
    let p = 2f64.powi(k as i32);
    let q = p / (p - 1.0);
    let c = (q - 1.0) / ((p - 1.0) * delta_n.powf(q - 2.0));
    let top = 1.0 / delta_n;
    let pts: Vec<f64> = (0..grid)
        .map(|i| top * i as f64 / (grid - 1) as f64)
        .collect();
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for &x in &pts {
        for &y in &pts {
            let lhs = y.powf(q) - x.powf(q);
            let grad = if x > 0.0 { q * x.powf(q - 1.0) } else { 0.0 };
            let rhs = grad * (y - x) + c * (y - x).powi(2);
            let slack = lhs - rhs;
            let tol = 1e-12
                * (y.powf(q) + x.powf(q) + c * (y - x).powi(2) + grad * (y - x).abs())
                    .max(f64::MIN_POSITIVE);
            if slack < -tol {
                passed = false;
            }
            worst = worst.min(slack);
        }
    }
    Ok(ConvexityReport {
        passed,
        worst_slack: worst,
        pairs: grid * grid,
        q,
        constant: c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStepReport {
    /// Largest entrywise deviation of the Monte-Carlo second moment from the
    /// assembled representation, in standard errors.
    pub max_z: f64,
    pub nuclear_norm: f64,
    pub single_step_bound: f64,
    pub factor: f64,
    pub bound: f64,
    pub holds: bool,
}

fn random_psd<R: Rng>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g * g.transpose()) * (scale / n as f64) + DMatrix::identity(n, n) * (0.1 * scale)
}

/// Two conditionally Gaussian steps in `R^3`: `v1 ~ N(0, S1)`, then
/// `v2 | v1 ~ N(0, A + (u.v1)^2 B)`. The second moment of `v1 + v2` is
/// assembled from the conditional covariances, compared with Monte Carlo, and
/// its nuclear norm is held against the inflated single-step bound. The
/// second-step scale is the operator norm of the averaged covariance, since a
/// quadratic covariance of a Gaussian has no almost-sure bound.
pub fn two_step_check(seed: u64, samples: usize) -> Result<TwoStepReport> {
    let n = 3;
    let eta = 2usize;
    let d = 2usize;
    let mut rng = stream(seed, &[0x7477_6f]);
    let s1 = random_psd(n, 1.0, &mut rng);
    let a = random_psd(n, 0.5, &mut rng);
    let b = random_psd(n, 0.5, &mut rng);
    let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)) / (n as f64).sqrt();
    let uu = (u.transpose() * &s1 * &u)[(0, 0)];
    let mean_cov2 = &a + &b * uu;
    let assembled = &s1 + &mean_cov2;

    let l1 = s1
        .clone()
        .cholesky()
        .ok_or(Error::Eigen(
            "step covariance is not positive definite".into(),
        ))?
        .l();
    let mut acc = DMatrix::zeros(n, n);
    let mut acc2 = DMatrix::zeros(n, n);
    for _ in 0..samples {
        let z1 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v1 = &l1 * z1;
        let s = u.dot(&v1);
        let cov2 = &a + &b * (s * s);
        let l2 = cov2
            .cholesky()
            .ok_or(Error::Eigen(
                "conditional covariance is not positive definite".into(),
            ))?
            .l();
        let z2 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = v1 + &l2 * z2;
        let outer = &sigma * sigma.transpose();
        acc2 += outer.component_mul(&outer);
        acc += outer;
    }
    let ns = samples as f64;
    let mean = acc / ns;
    let var = acc2 / ns - mean.component_mul(&mean);
    let mut max_z: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let se = (var[(i, j)].max(0.0) / ns).sqrt();
            max_z = max_z.max((mean[(i, j)] - assembled[(i, j)]).abs() / se.max(f64::MIN_POSITIVE));
        }
    }
    let nuclear = assembled
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .sum::<f64>();
    let nu1 = s1.symmetric_eigenvalues().max();
    let nu2 = mean_cov2.symmetric_eigenvalues().max();
    let single = nuclear_norm_bound(&[eta], &[nu1], 0, n);
    let e = eta as f64;
    let factor = 2f64.powi(d as i32)
        * e.powf(e / 2.0 + 2.0)
        * nu2.powf(e / 2.0)
        * (n as f64).powf((eta / 2) as f64 / 2.0);
    let bound = factor * single;
    Ok(TwoStepReport {
        max_z,
        nuclear_norm: nuclear,
        single_step_bound: single,
        factor,
        bound,
        holds: nuclear <= bound,
    })
}
