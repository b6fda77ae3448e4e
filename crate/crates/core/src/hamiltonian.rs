//! Mixed spherical p-spin Hamiltonians with reproducible Gaussian couplings.
//!
//! Couplings are stored per monomial: for degree `k` and sorted multi-index
//! `alpha`, the coefficient `c_alpha = g_alpha * sqrt(k! / alpha!)` with `g`
//! standard normal, so that `sum_alpha c_alpha x^alpha` has the law of the
//! symmetric tuple sum. The raw normals are laid out in rows: one row per
//! sorted prefix `(i_1 <= .. <= i_{k-1})` in colexicographic order, holding the last index
//! `m = i_{k-1}, .., n-1`. Each row is drawn from its own keyed stream, so dense
//! and streamed storage produce bitwise identical coefficients.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{axpy, dot, fill_normals};
use crate::mixture::MixtureSpec;
use crate::rng::{splitmix64, StreamRng};

pub const DEFAULT_MAX_DEGREE: usize = 8;
/// Dense storage budget in coefficients (1 GiB of `f64`).
pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Dense,
    Streamed,
    /// Dense when the budget allows, streamed otherwise.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceOptions {
    pub storage: Storage,
    pub max_degree: usize,
    pub memory_budget: u128,
    /// Dimension used in the `sqrt(n)` amplitude; defaults to `n`.
    pub amplitude_dim: Option<usize>,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        Self {
            storage: Storage::Auto,
            max_degree: DEFAULT_MAX_DEGREE,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            amplitude_dim: None,
        }
    }
}

impl InstanceOptions {
    pub fn with_storage(storage: Storage) -> Self {
        Self {
            storage,
            ..Self::default()
        }
    }
}

/// JSON-serializable metadata; coefficients are regenerated from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub n: usize,
    pub amplitude_dim: usize,
    pub mixture: MixtureSpec,
    pub seed: u64,
    pub storage: Storage,
}

/// A point of the ball together with its cached squared norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    coords: DVector<f64>,
    sq_norm: f64,
}

impl Configuration {
    pub fn new(coords: DVector<f64>) -> Self {
        let sq_norm = coords.norm_squared();
        Self { coords, sq_norm }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }
}

/// Which derivatives an evaluation should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Want {
    pub gradient: bool,
    pub hessian: bool,
}

impl Want {
    pub const ENERGY: Want = Want {
        gradient: false,
        hessian: false,
    };
    pub const GRADIENT: Want = Want {
        gradient: true,
        hessian: false,
    };
    pub const ALL: Want = Want {
        gradient: true,
        hessian: true,
    };
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub energy: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// A smooth function on `R^n` that ascent routines can climb.
pub trait Landscape: Send + Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64], want: Want) -> Result<Evaluation>;

    /// Evaluates several points; implementations may share work across them.
    fn evaluate_batch(&self, xs: &[&[f64]], want: Want) -> Result<Vec<Evaluation>> {
        xs.iter().map(|x| self.evaluate(x, want)).collect()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x, Want::ENERGY)?.energy)
    }

    fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self
            .evaluate(x, Want::GRADIENT)?
            .gradient
            .expect("gradient requested"))
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self
            .evaluate(x, Want::ALL)?
            .hessian
            .expect("hessian requested"))
    }

    /// Third directional derivative `D^3 f(x)[d, d, d]`.
    fn third_directional(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        let h = 1e-3;
        let shifted = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
        let dv = DVector::from_column_slice(d);
        let qp = dv.dot(&(self.hessian(&shifted(h))? * &dv));
        let qm = dv.dot(&(self.hessian(&shifted(-h))? * &dv));
        Ok((qp - qm) / (2.0 * h))
    }

    /// `nu''(q)` of the covariance structure, when the landscape has one.
    fn nu_second(&self, _q: f64) -> Option<f64> {
        None
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `binom(n + k - 1, k)`, the number of degree-`k` monomials in `n` variables.
pub fn multiset_count(n: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 + i) / (i + 1);
    }
    c
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Multiplicity product `alpha!` of a sorted index tuple, and the length of its last run.
fn sorted_multiplicity(idx: &[usize]) -> (f64, usize) {
    let mut fact = 1.0;
    let mut run = 0usize;
    let mut prev = usize::MAX;
    for &i in idx {
        if i == prev {
            run += 1;
        } else {
            run = 1;
            prev = i;
        }
        fact *= run as f64;
    }
    (fact, run)
}

#[inline]
fn row_key(seed: u64, k: usize, prefix: &[usize]) -> u64 {
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ (k as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    for &i in prefix {
        h = splitmix64(h ^ (i as u64 + 1).wrapping_mul(0x8EBC_6AF0_9C88_C6E3));
    }
    h
}

#[inline]
fn fill_row(seed: u64, k: usize, prefix: &[usize], out: &mut [f64]) {
    let mut rng = StreamRng::seed_from_u64(row_key(seed, k, prefix));
    fill_normals(&mut rng, out);
}

#[derive(Clone, Debug)]
pub struct SpinGlassInstance {
    n: usize,
    amplitude_dim: usize,
    mixture: MixtureSpec,
    seed: u64,
    storage: Storage,
    /// Raw normals per degree (index = degree), empty when streamed.
    dense: Vec<Vec<f64>>,
}

impl SpinGlassInstance {
    /// Samples an instance whose couplings are a pure function of `seed`.
    pub fn sample(
        n: usize,
        mixture: MixtureSpec,
        seed: u64,
        options: &InstanceOptions,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("n must be at least 2".into()));
        }
        let d = mixture.max_degree();
        if d > options.max_degree {
            return Err(Error::UnsupportedDegree {
                degree: d,
                max: options.max_degree,
            });
        }
        let needed: u128 = mixture
            .degrees()
            .iter()
            .map(|&k| multiset_count(n, k))
            .sum();
        let storage = match options.storage {
            Storage::Dense if needed > options.memory_budget => {
                return Err(Error::MemoryBudget {
                    needed,
                    budget: options.memory_budget,
                })
            }
            Storage::Auto if needed <= options.memory_budget => Storage::Dense,
            Storage::Auto => Storage::Streamed,
            s => s,
        };
        let amplitude_dim = options.amplitude_dim.unwrap_or(n);
        let mut inst = Self {
            n,
            amplitude_dim,
            mixture,
            seed,
            storage,
            dense: vec![Vec::new(); d + 1],
        };
        if storage == Storage::Dense {
            for k in inst.mixture.degrees() {
                let mut data = Vec::with_capacity(multiset_count(n, k) as usize);
                let mut buf = vec![0.0; n];
                for_each_prefix(n, k - 1, |prefix| {
                    let len = n - prefix[k - 2];
                    fill_row(seed, k, prefix, &mut buf[..len]);
                    data.extend_from_slice(&buf[..len]);
                });
                inst.dense[k] = data;
            }
        }
        Ok(inst)
    }

    /// Dense instance with prescribed monomial coefficients `c(k, sorted_index)`.
    pub fn from_coefficients<F: Fn(usize, &[usize]) -> f64>(
        n: usize,
        mixture: MixtureSpec,
        coefficient: F,
    ) -> Result<Self> {
        let d = mixture.max_degree();
        let mut inst = Self {
            n,
            amplitude_dim: n,
            mixture,
            seed: 0,
            storage: Storage::Dense,
            dense: vec![Vec::new(); d + 1],
        };
        let mut idx = vec![0usize; d];
        for k in inst.mixture.degrees() {
            let kf = factorial(k);
            let mut data = Vec::with_capacity(multiset_count(n, k) as usize);
            for_each_prefix(n, k - 1, |prefix| {
                for m in prefix[k - 2]..n {
                    idx[..k - 1].copy_from_slice(prefix);
                    idx[k - 1] = m;
                    let (af, _) = sorted_multiplicity(&idx[..k]);
                    data.push(coefficient(k, &idx[..k]) / (kf / af).sqrt());
                }
            });
            inst.dense[k] = data;
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mixture(&self) -> &MixtureSpec {
        &self.mixture
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn amplitude_dim(&self) -> usize {
        self.amplitude_dim
    }

    pub fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor {
            n: self.n,
            amplitude_dim: self.amplitude_dim,
            mixture: self.mixture.clone(),
            seed: self.seed,
            storage: self.storage,
        }
    }

    /// Number of stored coefficients for degree `k` (zero when streamed).
    pub fn stored_coefficients(&self, k: usize) -> usize {
        self.dense.get(k).map_or(0, |v| v.len())
    }

    /// Monomial coefficient `c_alpha` for a sorted index tuple (without `gamma_k sqrt(n)`).
    pub fn coefficient(&self, sorted_index: &[usize]) -> Result<f64> {
        let k = sorted_index.len();
        if k < 2
            || sorted_index.windows(2).any(|w| w[0] > w[1])
            || sorted_index.iter().any(|&i| i >= self.n)
        {
            return Err(Error::InvalidParameter(
                "index tuple must be sorted, in range, and of length >= 2".into(),
            ));
        }
        let prefix = &sorted_index[..k - 1];
        let m = sorted_index[k - 1];
        let raw = if self.storage == Storage::Dense
            && !self.dense.get(k).map_or(true, |v| v.is_empty())
        {
            let mut offset = 0usize;
            let mut found = 0.0;
            for_each_prefix(self.n, k - 1, |p| {
                let len = self.n - p[k - 2];
                if p == prefix {
                    found = self.dense[k][offset + (m - p[k - 2])];
                }
                offset += len;
            });
            found
        } else {
            let mut buf = vec![0.0; self.n - prefix[k - 2]];
            fill_row(self.seed, k, prefix, &mut buf);
            buf[m - prefix[k - 2]]
        };
        let (af, _) = sorted_multiplicity(sorted_index);
        Ok(raw * (factorial(k) / af).sqrt())
    }

    fn for_each_row<F: FnMut(&[usize], &[f64])>(&self, k: usize, mut f: F) {
        let n = self.n;
        if self.storage == Storage::Dense {
            let data = &self.dense[k];
            let mut offset = 0;
            for_each_prefix(n, k - 1, |prefix| {
                let len = n - prefix[k - 2];
                f(prefix, &data[offset..offset + len]);
                offset += len;
            });
        } else {
            let mut buf = vec![0.0; n];
            for_each_prefix(n, k - 1, |prefix| {
                let len = n - prefix[k - 2];
                fill_row(self.seed, k, prefix, &mut buf[..len]);
                f(prefix, &buf[..len]);
            });
        }
    }

    fn accumulate<const GRAD: bool, const HESS: bool>(
        &self,
        xs: &[&[f64]],
    ) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let mut out: Vec<(f64, Vec<f64>, Vec<f64>)> = xs
            .iter()
            .map(|_| {
                (
                    0.0,
                    if GRAD { vec![0.0; n] } else { Vec::new() },
                    if HESS { vec![0.0; n * n] } else { Vec::new() },
                )
            })
            .collect();
        let amp_dim = (self.amplitude_dim as f64).sqrt();
        let at_origin = xs.iter().all(|x| x.iter().all(|&v| v == 0.0));
        for k in self.mixture.degrees() {
            // degree >= 3 has vanishing value, gradient and Hessian at the origin
            if at_origin && k >= 3 {
                continue;
            }
            let r = k - 1;
            let amp = self.mixture.gamma(k) * amp_dim;
            let kf = factorial(k);
            let mut xp = [0.0f64; DEFAULT_MAX_DEGREE];
            let mut pm = [0.0f64; DEFAULT_MAX_DEGREE];
            let mut e_k = vec![0.0; xs.len()];
            // With r >= 2 the slots above the first stay fixed over a run of rows
            // (colexicographic order), so their tail updates share one accumulator
            // `acc_t = sum_{i_1} x_{i_1} base g_tail`, flushed when the run ends.
            let grouped = (GRAD || HESS) && r >= 2;
            let mut acc: Vec<Vec<f64>> = if grouped {
                vec![vec![0.0; n]; xs.len()]
            } else {
                Vec::new()
            };
            let mut group: Option<[usize; DEFAULT_MAX_DEGREE]> = None;
            let flush =
                |out: &mut [(f64, Vec<f64>, Vec<f64>)], acc: &mut [Vec<f64>], suffix: &[usize]| {
                    let last = suffix[suffix.len() - 1];
                    for (t, x) in xs.iter().enumerate() {
                        let a = &mut acc[t][last + 1..];
                        let slot = &mut out[t];
                        if GRAD {
                            let p: f64 = suffix.iter().map(|&i| x[i]).product();
                            axpy(p, a, &mut slot.1[last + 1..]);
                        }
                        if HESS {
                            for j in 0..suffix.len() {
                                let mut p = 1.0;
                                for (l, &i) in suffix.iter().enumerate() {
                                    if l != j {
                                        p *= x[i];
                                    }
                                }
                                let row = suffix[j] * n;
                                axpy(p, a, &mut slot.2[row + last + 1..row + n]);
                            }
                        }
                        a.fill(0.0);
                    }
                };
            self.for_each_row(k, |prefix, g| {
                let last = prefix[r - 1];
                if grouped {
                    let same = group.is_some_and(|gp| gp[1..r] == prefix[1..r]);
                    if !same {
                        if let Some(gp) = group {
                            flush(&mut out, &mut acc, &gp[1..r]);
                        }
                        let mut gp = [0usize; DEFAULT_MAX_DEGREE];
                        gp[..r].copy_from_slice(prefix);
                        group = Some(gp);
                    }
                }
                let (pf, run) = sorted_multiplicity(prefix);
                let base = amp * (kf / pf).sqrt();
                let c0 = g[0] * base / ((run + 1) as f64).sqrt();
                let tail_g = &g[1..];
                for (t, x) in xs.iter().enumerate() {
                    let mut p_all = 1.0;
                    for j in 0..r {
                        xp[j] = x[prefix[j]];
                        p_all *= xp[j];
                    }
                    let s = c0 * x[last] + base * dot(tail_g, &x[last + 1..]);
                    e_k[t] += p_all * s;
                    if GRAD || HESS {
                        for j in 0..r {
                            let mut p = 1.0;
                            for l in 0..r {
                                if l != j {
                                    p *= xp[l];
                                }
                            }
                            pm[j] = p;
                        }
                    }
                    let slot = &mut out[t];
                    if GRAD {
                        let grad = &mut slot.1;
                        grad[last] += c0 * p_all;
                        for j in 0..r {
                            grad[prefix[j]] += s * pm[j];
                        }
                        if !grouped {
                            axpy(base * p_all, tail_g, &mut grad[last + 1..]);
                        }
                    }
                    if HESS {
                        let b = &mut slot.2;
                        for j in 0..r {
                            for l in (j + 1)..r {
                                let mut p = 1.0;
                                for u in 0..r {
                                    if u != j && u != l {
                                        p *= xp[u];
                                    }
                                }
                                b[prefix[j] * n + prefix[l]] += s * p;
                            }
                            b[prefix[j] * n + last] += c0 * pm[j];
                        }
                        let row = prefix[0] * n;
                        axpy(base * pm[0], tail_g, &mut b[row + last + 1..row + n]);
                        if !grouped {
                            for j in 1..r {
                                let row = prefix[j] * n;
                                axpy(base * pm[j], tail_g, &mut b[row + last + 1..row + n]);
                            }
                        }
                    }
                    if grouped {
                        axpy(base * xp[0], tail_g, &mut acc[t][last + 1..]);
                    }
                }
            });
            if let Some(gp) = group {
                flush(&mut out, &mut acc, &gp[1..r]);
            }
            for (slot, e) in out.iter_mut().zip(e_k) {
                slot.0 += e;
            }
        }
        out
    }

    /// `H(x)`.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        Ok(self.accumulate::<false, false>(&[x])[0].0)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.n, x.len())?;
        Ok(DVector::from_vec(
            self.accumulate::<true, false>(&[x]).swap_remove(0).1,
        ))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.evaluate_all(x, Want::ALL)?.hessian.unwrap())
    }

    /// Energy and requested derivatives in a single pass over the couplings.
    pub fn evaluate_all(&self, x: &[f64], want: Want) -> Result<Evaluation> {
        Ok(self.evaluate_many(&[x], want)?.swap_remove(0))
    }

    /// Evaluates several points while generating each coupling row once.
    pub fn evaluate_many(&self, xs: &[&[f64]], want: Want) -> Result<Vec<Evaluation>> {
        for x in xs {
            check_dim(self.n, x.len())?;
        }
        let n = self.n;
        let raw = match (want.gradient, want.hessian) {
            (_, true) => self.accumulate::<true, true>(xs),
            (true, false) => self.accumulate::<true, false>(xs),
            (false, false) => self.accumulate::<false, false>(xs),
        };
        Ok(raw
            .into_iter()
            .map(|(energy, grad, b)| {
                let hessian = want.hessian.then(|| {
                    let bm = DMatrix::from_row_slice(n, n, &b);
                    &bm + bm.transpose()
                });
                let gradient = want.gradient.then(|| DVector::from_vec(grad));
                Evaluation {
                    energy,
                    gradient,
                    hessian,
                }
            })
            .collect())
    }

    /// Taylor coefficients `a_j` of `t -> H(x + t d)`, `j = 0..=d_H`.
    pub fn directional_taylor(&self, x: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, d.len())?;
        let top = self.mixture.max_degree();
        let mut out = vec![0.0; top + 1];
        let amp_dim = (self.amplitude_dim as f64).sqrt();
        for k in self.mixture.degrees() {
            let r = k - 1;
            let amp = self.mixture.gamma(k) * amp_dim;
            let kf = factorial(k);
            let mut poly = vec![0.0; k + 1];
            self.for_each_row(k, |prefix, g| {
                let last = prefix[r - 1];
                let (pf, run) = sorted_multiplicity(prefix);
                let base = amp * (kf / pf).sqrt();
                let c0 = g[0] * base / ((run + 1) as f64).sqrt();
                let s0 = c0 * x[last] + base * dot(&g[1..], &x[last + 1..]);
                let s1 = c0 * d[last] + base * dot(&g[1..], &d[last + 1..]);
                poly.iter_mut().for_each(|v| *v = 0.0);
                poly[0] = 1.0;
                for (deg, &i) in prefix.iter().enumerate() {
                    for j in (0..=deg + 1).rev() {
                        let lower = if j > 0 { poly[j - 1] } else { 0.0 };
                        poly[j] = poly[j] * x[i] + lower * d[i];
                    }
                }
                for j in 0..=r {
                    out[j] += poly[j] * s0;
                    out[j + 1] += poly[j] * s1;
                }
            });
        }
        Ok(out)
    }

    /// `P H''(x) P` with `P` projecting onto the complement of `exclusions`.
    pub fn projected_hessian(
        &self,
        x: &[f64],
        exclusions: &[DVector<f64>],
    ) -> Result<DMatrix<f64>> {
        let h = self.hessian(x)?;
        let q = orthonormal_basis(exclusions, self.n)?;
        Ok(project_symmetric(&h, &q))
    }
}

impl Landscape for SpinGlassInstance {
    fn dim(&self) -> usize {
        self.n
    }

    fn evaluate(&self, x: &[f64], want: Want) -> Result<Evaluation> {
        self.evaluate_all(x, want)
    }

    fn evaluate_batch(&self, xs: &[&[f64]], want: Want) -> Result<Vec<Evaluation>> {
        self.evaluate_many(xs, want)
    }

    fn third_directional(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        let t = self.directional_taylor(x, d)?;
        Ok(6.0 * t.get(3).copied().unwrap_or(0.0))
    }

    fn nu_second(&self, q: f64) -> Option<f64> {
        self.mixture.nu(q.clamp(0.0, 1.0), 2).ok()
    }
}

/// Calls `f` on every non-decreasing tuple of length `len` over `0..n`, in
/// colexicographic order (the last entry varies slowest).
pub(crate) fn for_each_prefix<F: FnMut(&[usize])>(n: usize, len: usize, mut f: F) {
    let mut p = vec![0usize; len];
    loop {
        f(&p);
        let mut j = 0;
        loop {
            if j == len {
                return;
            }
            let bound = if j + 1 < len { p[j + 1] } else { n - 1 };
            if p[j] < bound {
                p[j] += 1;
                for t in &mut p[..j] {
                    *t = 0;
                }
                break;
            }
            j += 1;
        }
    }
}

/// Orthonormal basis (columns) of `span(vectors)` by twice-iterated Gram-Schmidt.
///
/// Fails when the Gram determinant of the normalized inputs drops below `1e-12`.
pub fn orthonormal_basis(vectors: &[DVector<f64>], n: usize) -> Result<DMatrix<f64>> {
    let mut q = DMatrix::<f64>::zeros(n, vectors.len());
    let mut det = 1.0;
    for (j, v) in vectors.iter().enumerate() {
        check_dim(n, v.len())?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::RankDeficient(0.0));
        }
        let mut w = v / norm;
        for _ in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&w);
                w.axpy(-c, &q.column(i), 1.0);
            }
        }
        let r = w.norm();
        det *= r * r;
        if det < 1e-12 {
            return Err(Error::RankDeficient(det));
        }
        q.set_column(j, &(w / r));
    }
    Ok(q)
}

/// `P M P` for `P = I - Q Q^T`, with `Q` orthonormal columns.
pub fn project_symmetric(m: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return m.clone();
    }
    let mq = m * q;
    let qtmq = q.transpose() * &mq;
    let mut out = m - &mq * q.transpose() - q * mq.transpose() + q * qtmq * q.transpose();
    let t = out.transpose();
    out += t;
    out *= 0.5;
    out
}
