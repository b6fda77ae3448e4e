//! Hessian ascent: randomized eigenspace steps, the deterministic top
//! eigenvector variant, trajectory bookkeeping and the high-entropy step
//! verifier.
//!
//! All Hessians are taken in energy-density units, `H''/n`. Each step is a
//! unit vector orthogonal to every earlier step, so `||sigma_i||^2 = i/k`
//! holds to rounding.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{matrix_bernstein, BernsteinSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{project_symmetric, Landscape, Want};
use crate::mixture::semicircle_cdf;
use crate::rng::{stream, StreamRng};
use crate::spectral::eigh;

const STEP_TAG: u64 = 0x7374_6570;
const PROJ_TAG: u64 = 0x7072_6f6a;
const BOOT_TAG: u64 = 0x626f_6f74;

/// Relative width within which eigenvalues count as tied with the cut-off.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentKind {
    Randomized,
    Deterministic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: AscentKind,
    pub n: usize,
    pub k: usize,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub seed: u64,
    pub steps: Vec<DVector<f64>>,
    /// `sigma_1 .. sigma_k`.
    pub iterates: Vec<DVector<f64>>,
    /// `H(sigma_i)/n`.
    pub energies: Vec<f64>,
    /// `v_i . (H''(sigma_{i-1})/n) v_i`.
    pub quadratic_forms: Vec<f64>,
    /// `nu''(i/k)^{1/2} / k`, NaN when the landscape has no mixture.
    pub targets: Vec<f64>,
    /// Dimension of the space each step was drawn from.
    pub eigenspace_dims: Vec<usize>,
    /// Deterministic variant: whether `q_i >= (1 - eps) 2 nu''(|sigma_{i-1}|^2)^{1/2}`.
    pub condition_met: Vec<bool>,
}

impl Trajectory {
    fn empty(kind: AscentKind, n: usize, k: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            k,
            delta: None,
            eps: None,
            seed,
            steps: Vec::with_capacity(k),
            iterates: Vec::with_capacity(k),
            energies: Vec::with_capacity(k),
            quadratic_forms: Vec::with_capacity(k),
            targets: Vec::with_capacity(k),
            eigenspace_dims: Vec::with_capacity(k),
            condition_met: Vec::new(),
        }
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().unwrap_or(&0.0)
    }

    pub fn sq_norms(&self) -> Vec<f64> {
        self.iterates.iter().map(|s| s.norm_squared()).collect()
    }

    /// `max_i | ||v_i|| - 1 |`.
    pub fn norm_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i |<v_i, v_1 + .. + v_{i-1}>|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let mut sum = DVector::zeros(self.n);
        let mut worst: f64 = 0.0;
        for v in &self.steps {
            worst = worst.max(v.dot(&sum).abs());
            sum += v;
        }
        worst
    }

    /// `max_i | ||sigma_i||^2 - i/k |`.
    pub fn sq_norm_residual(&self) -> f64 {
        self.sq_norms()
            .iter()
            .enumerate()
            .map(|(i, s)| (s - (i + 1) as f64 / self.k as f64).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,sq_norm,energy_density,quadratic_form,target\n");
        for (i, s) in self.sq_norms().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                float17(*s),
                float17(self.energies[i]),
                float17(self.quadratic_forms[i]),
                float17(self.targets[i])
            );
        }
        out
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

fn validate<L: Landscape + ?Sized>(land: &L, k: usize, delta: f64) -> Result<usize> {
    let n = land.dim();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} outside (0, 1/2]"
        )));
    }
    let m = (delta * n as f64).floor() as usize;
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "floor(delta n) = {m} is below 2"
        )));
    }
    if k - 1 + m > n {
        return Err(Error::InvalidParameter(format!(
            "k - 1 + floor(delta n) = {} exceeds n = {n}",
            k - 1 + m
        )));
    }
    Ok(m)
}

fn target(land: &(impl Landscape + ?Sized), i: usize, k: usize) -> f64 {
    land.nu_second(i as f64 / k as f64)
        .map_or(f64::NAN, |v| v.max(0.0).sqrt() / k as f64)
}

/// Orthonormal basis (columns) of the top-`m` eigenspace of `h` restricted to
/// the complement of the orthonormal columns `q`. Eigenvalues tied with the
/// `m`-th within `TIE_TOL` (relative) are included.
pub fn top_eigenspace(
    h: &DMatrix<f64>,
    q: &DMatrix<f64>,
    m: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = h.nrows();
    let free = n - q.ncols();
    if m == 0 || m > free {
        return Err(Error::InvalidParameter(format!(
            "eigenspace size {m} with {free} free directions"
        )));
    }
    let scale = h.norm().max(1.0);
    let mut mat = project_symmetric(h, q);
    if q.ncols() > 0 {
        mat -= (q * q.transpose()) * (2.0 * scale);
    }
    let eig = eigh(&mat)?;
    let cut = eig.eigenvalues[m - 1];
    let tol = TIE_TOL * scale;
    let mut dim = m;
    while dim < free && eig.eigenvalues[dim] >= cut - tol {
        dim += 1;
    }
    Ok((eig.top(dim), eig.eigenvalues.rows(0, dim).into_owned()))
}

/// Removes the components along `q` twice and normalizes.
fn orthonormalize(mut v: DVector<f64>, q: &[DVector<f64>]) -> DVector<f64> {
    for _ in 0..2 {
        for u in q {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
    }
    let norm = v.norm();
    v / norm
}

/// Uniform unit vector in the column span of `u`.
fn sphere_in_span(u: &DMatrix<f64>, rng: &mut StreamRng) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(u.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        if z.norm() > 0.0 {
            return u * z;
        }
    }
}

fn columns(vs: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    if vs.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(vs)
    }
}

struct Walker {
    traj: Trajectory,
    rng: StreamRng,
    x: DVector<f64>,
}

/// Randomized Hessian ascent for one seed.
pub fn randomized_ascent<L: Landscape + ?Sized>(
    land: &L,
    k: usize,
    delta: f64,
    seed: u64,
) -> Result<Trajectory> {
    Ok(randomized_ascent_batch(land, k, delta, &[seed])?.swap_remove(0))
}

/// Randomized Hessian ascent for several seeds on one landscape. Every step
/// evaluates all current iterates in one batched call, so a streamed instance
/// generates its couplings once per step rather than once per seed.
pub fn randomized_ascent_batch<L: Landscape + ?Sized>(
    land: &L,
    k: usize,
    delta: f64,
    seeds: &[u64],
) -> Result<Vec<Trajectory>> {
    let m = validate(land, k, delta)?;
    let n = land.dim();
    let mut walkers: Vec<Walker> = seeds
        .iter()
        .map(|&seed| {
            let mut traj = Trajectory::empty(AscentKind::Randomized, n, k, seed);
            traj.delta = Some(delta);
            Walker {
                traj,
                rng: stream(seed, &[STEP_TAG]),
                x: DVector::zeros(n),
            }
        })
        .collect();
    let scale = 1.0 / n as f64;
    let sqrt_k = (k as f64).sqrt();
    for i in 0..k {
        let evals = if i == 0 {
            let e = land.evaluate(&vec![0.0; n], Want::ALL)?;
            vec![e; walkers.len()]
        } else {
            let xs: Vec<&[f64]> = walkers.iter().map(|w| w.x.as_slice()).collect();
            land.evaluate_batch(&xs, Want::ALL)?
        };
        walkers
            .par_iter_mut()
            .zip(evals.into_par_iter())
            .map(|(w, e)| -> Result<()> {
                if i > 0 {
                    w.traj.energies.push(e.energy * scale);
                }
                let h = e.hessian.expect("hessian requested") * scale;
                let q = columns(&w.traj.steps, n);
                let (u, _) = top_eigenspace(&h, &q, m)?;
                let v = orthonormalize(sphere_in_span(&u, &mut w.rng), &w.traj.steps);
                w.traj.quadratic_forms.push(v.dot(&(&h * &v)));
                w.traj.eigenspace_dims.push(u.ncols());
                w.x.axpy(1.0 / sqrt_k, &v, 1.0);
                w.traj.iterates.push(w.x.clone());
                w.traj.steps.push(v);
                w.traj.targets.push(target(land, i + 1, k));
                Ok(())
            })
            .collect::<Result<()>>()?;
    }
    let xs: Vec<&[f64]> = walkers.iter().map(|w| w.x.as_slice()).collect();
    let last = land.evaluate_batch(&xs, Want::ENERGY)?;
    Ok(walkers
        .into_iter()
        .zip(last)
        .map(|(mut w, e)| {
            w.traj.energies.push(e.energy * scale);
            w.traj
        })
        .collect())
}

/// Deterministic Hessian ascent from the origin: each step is the top
/// eigenvector of the Hessian on the complement of the earlier steps and the
/// gradient, signed so that the cubic term is nonnegative. The seed is used
/// only to pick a direction when the top eigenvalue is degenerate.
pub fn deterministic_ascent<L: Landscape + ?Sized>(
    land: &L,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<Trajectory> {
    validate(land, k, 0.5)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside (0, 1)"
        )));
    }
    let n = land.dim();
    let mut traj = Trajectory::empty(AscentKind::Deterministic, n, k, seed);
    traj.eps = Some(eps);
    let mut rng = stream(seed, &[STEP_TAG]);
    let mut x = DVector::zeros(n);
    let scale = 1.0 / n as f64;
    let sqrt_k = (k as f64).sqrt();
    for i in 0..k {
        let e = land.evaluate(x.as_slice(), Want::ALL)?;
        if i > 0 {
            traj.energies.push(e.energy * scale);
        }
        let h = e.hessian.expect("hessian requested") * scale;
        let g = e.gradient.expect("gradient requested") * scale;
        let mut excl = traj.steps.clone();
        let gn = g.norm();
        if gn > 0.0 {
            let mut t = g.clone();
            for _ in 0..2 {
                for u in &excl {
                    let c = u.dot(&t);
                    t.axpy(-c, u, 1.0);
                }
            }
            if t.norm() > 1e-10 * gn {
                let t = t.normalize();
                excl.push(t);
            }
        }
        let q = columns(&excl, n);
        let (u, _) = top_eigenspace(&h, &q, 1)?;
        let mut v = if u.ncols() == 1 {
            u.column(0).into_owned()
        } else {
            sphere_in_span(&u, &mut rng)
        };
        v = orthonormalize(v, &excl);
        let cubic = land.third_directional(x.as_slice(), v.as_slice())?;
        let flip = if cubic != 0.0 {
            cubic < 0.0
        } else {
            v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        if flip {
            v = -v;
        }
        let qf = v.dot(&(&h * &v));
        let nu2 = land.nu_second(x.norm_squared()).unwrap_or(f64::NAN);
        traj.condition_met
            .push(qf >= (1.0 - eps) * 2.0 * nu2.max(0.0).sqrt());
        traj.quadratic_forms.push(qf);
        traj.eigenspace_dims.push(u.ncols());
        x.axpy(1.0 / sqrt_k, &v, 1.0);
        traj.iterates.push(x.clone());
        traj.steps.push(v);
        traj.targets.push(target(land, i + 1, k));
    }
    traj.energies.push(land.energy(x.as_slice())? * scale);
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HesOptions {
    /// Operator norm limit is `(1 + tol) / (delta n)`.
    pub tol: f64,
    pub projections: usize,
    pub bootstrap: usize,
    /// Uniform accuracy of the Bernstein surrogate.
    pub surrogate_accuracy: f64,
}

impl Default for HesOptions {
    fn default() -> Self {
        Self {
            tol: 0.3,
            projections: 20,
            bootstrap: 50,
            surrogate_accuracy: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projected {
    pub value: f64,
    pub se: f64,
}

impl Projected {
    pub fn z(&self) -> f64 {
        if self.se > 0.0 {
            self.value / self.se
        } else if self.value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HesStep {
    pub step: usize,
    pub eigenspace_dim: usize,
    /// `||E^[v v^T]||_op` over the resampled steps.
    pub op_norm: f64,
    pub op_norm_se: f64,
    pub op_norm_limit: f64,
    /// `1/m` for the `m`-dimensional sampling space, the exact conditional value.
    pub exact_op_norm: f64,
    /// Marchenko-Pastur edge `(1 + sqrt(m/R))^2 / m` expected of the estimate.
    pub finite_sample_edge: f64,
    pub third_cumulants: Vec<Projected>,
    pub fourth_cumulants: Vec<Projected>,
    /// `||delta n E^[v v^T] - B(H)/||B(H)||_op||_F`, NaN without a mixture.
    pub ldp_residual: f64,
    pub ldp_residual_se: f64,
    /// `||E^[v v^T] - U U^T / m||_F`.
    pub projector_distance: f64,
    pub projector_distance_se: f64,
    pub norm_residual: f64,
    pub orthogonality_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HesReport {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub replicas: usize,
    pub seed: u64,
    pub options: HesOptions,
    pub steps: Vec<HesStep>,
}

impl HesReport {
    pub fn max_norm_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.norm_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_orthogonality_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.orthogonality_residual)
            .fold(0.0, f64::max)
    }

    /// Largest `op_norm * delta n`.
    pub fn max_op_norm_ratio(&self) -> f64 {
        let dn = self.delta * self.n as f64;
        self.steps
            .iter()
            .map(|s| s.op_norm * dn)
            .fold(0.0, f64::max)
    }

    pub fn op_norm_ok(&self) -> bool {
        self.steps.iter().all(|s| s.op_norm <= s.op_norm_limit)
    }

    pub fn max_third_z(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.third_cumulants.iter().map(|c| c.z().abs()))
            .fold(0.0, f64::max)
    }
}

/// Central moment cumulants `k3`, `k4` of `s` with influence-function errors.
fn cumulants(s: &[f64]) -> (Projected, Projected) {
    let r = s.len() as f64;
    let mean = s.iter().sum::<f64>() / r;
    let d: Vec<f64> = s.iter().map(|v| v - mean).collect();
    let m2 = d.iter().map(|v| v * v).sum::<f64>() / r;
    let m3 = d.iter().map(|v| v.powi(3)).sum::<f64>() / r;
    let m4 = d.iter().map(|v| v.powi(4)).sum::<f64>() / r;
    let se = |psi: &dyn Fn(f64) -> f64| {
        let var = d.iter().map(|&v| psi(v).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    };
    let third = Projected {
        value: m3,
        se: se(&|v| v.powi(3) - m3 - 3.0 * m2 * v),
    };
    let k4 = m4 - 3.0 * m2 * m2;
    let fourth = Projected {
        value: k4,
        se: se(&|v| v.powi(4) - m4 - 6.0 * m2 * (v * v - m2) - 4.0 * m3 * v),
    };
    (third, fourth)
}

/// `x` with semicircle mass `delta` above it, on `[-1, 1]`.
fn semicircle_upper_quantile(delta: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - semicircle_cdf(mid)? > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bernstein surrogate for the step covariance at radius `q`: the ramp sits
/// on `[-2 sqrt(nu''), 2 sqrt(nu'')]` with its lower end at the semicircle
/// `delta` quantile, i.e. `alpha = 2 sqrt(nu'') - 2 eps/3`, `gamma = eps/3`.
fn surrogate(h: &DMatrix<f64>, nu2: f64, delta: f64, accuracy: f64) -> Result<DMatrix<f64>> {
    let r = 2.0 * nu2.sqrt();
    let eps = r * (1.0 - semicircle_upper_quantile(delta)?);
    let spec =
        BernsteinSpec::linear(-r, r, r - 2.0 * eps / 3.0, eps / 3.0, 1)?.with_accuracy(accuracy)?;
    let b = matrix_bernstein(h, &spec)?.matrix;
    let top = b.symmetric_eigenvalues().max();
    if top <= 0.0 {
        return Err(Error::Degenerate("Bernstein surrogate vanishes".into()));
    }
    Ok(b / top)
}

/// Resamples each step of one reference trajectory `replicas` times and
/// measures the high-entropy step constraints. The step law depends on the
/// prefix only through the Hessian at `sigma_{i-1}` and the span of earlier
/// steps, so resampling the current step from a fixed prefix draws from the
/// exact conditional law.
pub fn verify_hes<L: Landscape + ?Sized>(
    land: &L,
    k: usize,
    delta: f64,
    replicas: usize,
    seed: u64,
) -> Result<HesReport> {
    verify_hes_with(land, k, delta, replicas, seed, &HesOptions::default())
}

pub fn verify_hes_with<L: Landscape + ?Sized>(
    land: &L,
    k: usize,
    delta: f64,
    replicas: usize,
    seed: u64,
    opts: &HesOptions,
) -> Result<HesReport> {
    if replicas < 50 {
        return Err(Error::InvalidParameter(format!(
            "at least 50 replicas are needed, got {replicas}"
        )));
    }
    let m = validate(land, k, delta)?;
    let n = land.dim();
    let dn = delta * n as f64;
    let mut past: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut x = DVector::zeros(n);
    let mut out = Vec::with_capacity(k);
    let mut past_sum = DVector::zeros(n);
    for i in 0..k {
        let h = land.hessian(x.as_slice())? / n as f64;
        let q = columns(&past, n);
        let (u, _) = top_eigenspace(&h, &q, m)?;
        let dim = u.ncols();
        let draws: Vec<DVector<f64>> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, &[STEP_TAG, i as u64, r as u64]);
                orthonormalize(sphere_in_span(&u, &mut rng), &past)
            })
            .collect();
        let norm_residual = draws
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        let orthogonality_residual = draws
            .iter()
            .map(|v| v.dot(&past_sum).abs())
            .fold(0.0, f64::max);
        let data = DMatrix::from_columns(&draws);
        let rf = replicas as f64;
        let cov = |w: Option<&[f64]>| -> DMatrix<f64> {
            match w {
                None => &data * data.transpose() / rf,
                Some(w) => {
                    let mut scaled = data.clone();
                    for (j, mut col) in scaled.column_iter_mut().enumerate() {
                        col *= w[j];
                    }
                    &scaled * data.transpose() / rf
                }
            }
        };
        let proj = &u * u.transpose() / dim as f64;
        let sur = match land.nu_second(x.norm_squared()) {
            Some(nu2) if nu2 > 0.0 => Some(surrogate(
                &project_symmetric(&h, &q),
                nu2,
                delta,
                opts.surrogate_accuracy,
            )?),
            _ => None,
        };
        let stats = |c: &DMatrix<f64>| -> (f64, f64, f64) {
            let op = c.symmetric_eigenvalues().max();
            let ldp = sur.as_ref().map_or(f64::NAN, |s| (c * dn - s).norm());
            (op, ldp, (c - &proj).norm())
        };
        let (op_norm, ldp_residual, projector_distance) = stats(&cov(None));
        let boots: Vec<(f64, f64, f64)> = (0..opts.bootstrap)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(seed, &[BOOT_TAG, i as u64, b as u64]);
                let mut w = vec![0.0; replicas];
                for _ in 0..replicas {
                    w[rng.random_range(0..replicas)] += 1.0;
                }
                stats(&cov(Some(&w)))
            })
            .collect();
        let sd = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
            let vals: Vec<f64> = boots.iter().map(f).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0))
                .sqrt()
        };
        let mut prng = stream(seed, &[PROJ_TAG, i as u64]);
        let mut third = Vec::with_capacity(opts.projections);
        let mut fourth = Vec::with_capacity(opts.projections);
        for _ in 0..opts.projections {
            let dir = DVector::from_fn(n, |_, _| prng.sample::<f64, _>(StandardNormal)).normalize();
            let s: Vec<f64> = draws.iter().map(|v| v.dot(&dir)).collect();
            let (t, f) = cumulants(&s);
            third.push(t);
            fourth.push(f);
        }
        out.push(HesStep {
            step: i + 1,
            eigenspace_dim: dim,
            op_norm,
            op_norm_se: sd(&|b| b.0),
            op_norm_limit: (1.0 + opts.tol) / dn,
            exact_op_norm: 1.0 / dim as f64,
            finite_sample_edge: (1.0 + (dim as f64 / rf).sqrt()).powi(2) / dim as f64,
            third_cumulants: third,
            fourth_cumulants: fourth,
            ldp_residual,
            ldp_residual_se: if sur.is_some() {
                sd(&|b| b.1)
            } else {
                f64::NAN
            },
            projector_distance,
            projector_distance_se: sd(&|b| b.2),
            norm_residual,
            orthogonality_residual,
        });
        let v = draws.into_iter().next().expect("replicas >= 50");
        x.axpy(1.0 / (k as f64).sqrt(), &v, 1.0);
        past_sum += &v;
        past.push(v);
    }
    Ok(HesReport {
        n,
        k,
        delta,
        replicas,
        seed,
        options: opts.clone(),
        steps: out,
    })
}
