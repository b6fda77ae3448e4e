//! Anisotropic spin glass ensembles that mislead plain Hessian ascent, each
//! paired with a low-degree extension into the ball that agrees with it on
//! the sphere.
//!
//! * `DegreeScaling`: `H = a2 |x|^e H2(x) + H4(x)`, extension `a2 H2 + H4`.
//! * `DirectSum`: `H = a2 H2(Px) + a4 H4(Qx)`, extension `a2 |x|^2 H2(Px) + a4 H4(Qx)`.
//! * `SharedSum`: `H = a4 H4(Px) + a6 H6(Px, Qx) + a8 H8(Qx)`, extension
//!   `a4 |x|^4 H4(Px) + a6 |x|^2 H6(Px, Qx) + a8 H8(Qx)`.
//!
//! `P` keeps the first `n/2` coordinates and `Q = I - P`. Every component is
//! scaled like a spin glass on `R^n`, so `H6(r, t) = sqrt(n) <g, r^2 (x) t^4>`
//! with i.i.d. standard normal `g`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ascent::{randomized_ascent_batch, Trajectory};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    Evaluation, InstanceOptions, Landscape, SpinGlassInstance, Storage, Want,
};
use crate::mixture::MixtureSpec;
use crate::rng::{derive_seed, stream};

/// Largest `n` accepted for the shared-sum ensemble.
pub const SHARED_MAX_N: usize = 80;
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    DegreeScaling,
    DirectSum,
    SharedSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub alpha2: f64,
    pub alpha4: f64,
    pub alpha6: f64,
    pub alpha8: f64,
    /// Norm exponent of the degree-scaling ensemble.
    pub exponent: f64,
}

impl EnsembleParams {
    pub fn degree_scaling(alpha2: f64) -> Self {
        Self {
            alpha2,
            alpha4: 1.0,
            alpha6: 0.0,
            alpha8: 0.0,
            exponent: 100.0,
        }
    }

    /// `a4 = sqrt(2/3) a2` equalizes the spectral radii of the two extended
    /// Hessian blocks once `|Qx|^2 = |x|^2 / 2`, while the raw Hessian is
    /// dominated by the degree-2 block near the origin.
    pub fn direct_sum(alpha2: f64) -> Self {
        Self {
            alpha2,
            alpha4: (2.0f64 / 3.0).sqrt() * alpha2,
            alpha6: 0.0,
            alpha8: 0.0,
            exponent: 0.0,
        }
    }

    pub fn shared_sum(alpha4: f64, alpha6: f64, alpha8: f64) -> Self {
        Self {
            alpha2: 0.0,
            alpha4,
            alpha6,
            alpha8,
            exponent: 0.0,
        }
    }
}

/// Value, gradient and Hessian of one term on `R^n`.
#[derive(Clone, Debug)]
struct Part {
    e: f64,
    g: Option<DVector<f64>>,
    h: Option<DMatrix<f64>>,
}

impl Part {
    fn zero(n: usize, want: Want) -> Self {
        Self {
            e: 0.0,
            g: (want.gradient || want.hessian).then(|| DVector::zeros(n)),
            h: want.hessian.then(|| DMatrix::zeros(n, n)),
        }
    }

    fn add_scaled(&mut self, c: f64, other: &Part) {
        self.e += c * other.e;
        if let (Some(g), Some(o)) = (self.g.as_mut(), other.g.as_ref()) {
            g.axpy(c, o, 1.0);
        }
        if let (Some(h), Some(o)) = (self.h.as_mut(), other.h.as_ref()) {
            *h += o * c;
        }
    }

    /// `P(x) -> |x|^{2p} P(x)`.
    fn radial(&self, x: &DVector<f64>, p: f64) -> Part {
        let s = x.norm_squared();
        let pow = |e: f64| -> f64 {
            if e == 0.0 {
                1.0
            } else if s == 0.0 {
                if e > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (e * s.ln()).exp()
            }
        };
        let phi = pow(p);
        let d1 = if p == 0.0 { 0.0 } else { p * pow(p - 1.0) };
        let d2 = if p == 0.0 || p == 1.0 {
            0.0
        } else {
            p * (p - 1.0) * pow(p - 2.0)
        };
        let mut out = Part {
            e: phi * self.e,
            g: None,
            h: None,
        };
        if let Some(g) = &self.g {
            out.g = Some(g * phi + x * (2.0 * d1 * self.e));
        }
        if let (Some(h), Some(g)) = (&self.h, &self.g) {
            let xg = x * g.transpose();
            let mut m = h * phi + (&xg + xg.transpose()) * (2.0 * d1);
            if d2 != 0.0 {
                m += (x * x.transpose()) * (4.0 * d2 * self.e);
            }
            for i in 0..m.nrows() {
                m[(i, i)] += 2.0 * d1 * self.e;
            }
            out.h = Some(m);
        }
        out
    }

    fn from_eval(ev: Evaluation, offset: usize, n: usize, want: Want) -> Part {
        let mut p = Part::zero(n, want);
        p.e = ev.energy;
        if let (Some(g), Some(src)) = (p.g.as_mut(), ev.gradient) {
            g.rows_mut(offset, src.len()).copy_from(&src);
        }
        if let (Some(h), Some(src)) = (p.h.as_mut(), ev.hessian) {
            h.view_mut((offset, offset), (src.nrows(), src.ncols()))
                .copy_from(&src);
        }
        p
    }

    fn into_eval(self) -> Evaluation {
        Evaluation {
            energy: self.e,
            gradient: self.g,
            hessian: self.h,
        }
    }
}

fn inner_want(want: Want) -> Want {
    Want {
        gradient: want.gradient || want.hessian,
        hessian: want.hessian,
    }
}

/// `H6(r, t) = sqrt(n) sum_{a<=b} w_ab r_a r_b T_ab(t)` with independent
/// quartics `T_ab`, which has the law of the i.i.d. contraction.
struct Interaction {
    m: usize,
    scale: f64,
    pairs: Vec<(usize, usize, f64)>,
    quartics: Vec<SpinGlassInstance>,
}

impl Interaction {
    fn sample(n: usize, m: usize, seed: u64) -> Result<Self> {
        let opts = InstanceOptions {
            amplitude_dim: Some(1),
            ..InstanceOptions::with_storage(Storage::Streamed)
        };
        let mut pairs = Vec::new();
        let mut quartics = Vec::new();
        for a in 0..m {
            for b in a..m {
                let w = if a == b { 1.0 } else { 2f64.sqrt() };
                pairs.push((a, b, w));
                quartics.push(SpinGlassInstance::sample(
                    n - m,
                    MixtureSpec::pure(4, 1.0)?,
                    derive_seed(seed, &[6, a as u64, b as u64]),
                    &opts,
                )?);
            }
        }
        Ok(Self {
            m,
            scale: (n as f64).sqrt(),
            pairs,
            quartics,
        })
    }

    fn evaluate(&self, x: &[f64], want: Want) -> Result<Part> {
        let n = x.len();
        let m = self.m;
        let (rho, tau) = x.split_at(m);
        let mut out = Part::zero(n, want);
        let iw = inner_want(want);
        for (&(a, b, w), t) in self.pairs.iter().zip(&self.quartics) {
            let ev = t.evaluate_all(tau, iw)?;
            let c = self.scale * w;
            let mono = rho[a] * rho[b];
            out.e += c * mono * ev.energy;
            if let Some(g) = out.g.as_mut() {
                g[a] += c * rho[b] * ev.energy;
                g[b] += c * rho[a] * ev.energy;
                let tg = ev.gradient.as_ref().expect("gradient requested");
                g.rows_mut(m, n - m).axpy(c * mono, tg, 1.0);
            }
            if let Some(h) = out.h.as_mut() {
                h[(a, b)] += c * ev.energy;
                h[(b, a)] += c * ev.energy;
                let tg = ev.gradient.as_ref().expect("gradient requested");
                for j in 0..n - m {
                    let v = c * tg[j];
                    h[(a, m + j)] += v * rho[b];
                    h[(b, m + j)] += v * rho[a];
                    h[(m + j, a)] += v * rho[b];
                    h[(m + j, b)] += v * rho[a];
                }
                let th = ev.hessian.as_ref().expect("hessian requested");
                let mut blk = h.view_mut((m, m), (n - m, n - m));
                blk += th * (c * mono);
            }
        }
        Ok(out)
    }
}

pub struct AnisotropicEnsemble {
    pub kind: EnsembleKind,
    pub params: EnsembleParams,
    pub n: usize,
    pub seed: u64,
    /// Rank of the coordinate projector `P`.
    pub split: usize,
    h2: Option<SpinGlassInstance>,
    h4: Option<SpinGlassInstance>,
    h6: Option<Interaction>,
    h8: Option<SpinGlassInstance>,
}

fn pure(dim: usize, degree: usize, n: usize, seed: u64) -> Result<SpinGlassInstance> {
    let opts = InstanceOptions {
        amplitude_dim: Some(n),
        ..InstanceOptions::default()
    };
    SpinGlassInstance::sample(
        dim,
        MixtureSpec::pure(degree, 1.0)?,
        derive_seed(seed, &[degree as u64]),
        &opts,
    )
}

/// Builds the ensemble; components are independent and keyed by `seed`.
pub fn build_ensemble(
    kind: EnsembleKind,
    params: EnsembleParams,
    n: usize,
    seed: u64,
) -> Result<AnisotropicEnsemble> {
    if n < 8 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "n must be even and at least 8, got {n}"
        )));
    }
    let p = &params;
    if [p.alpha2, p.alpha4, p.alpha6, p.alpha8, p.exponent]
        .iter()
        .any(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(Error::InvalidParameter(
            "ensemble parameters must be finite and nonnegative".into(),
        ));
    }
    if kind != EnsembleKind::SharedSum && p.alpha6 != 0.0 {
        return Err(Error::InvalidParameter(
            "the degree-6 interaction exists only in the shared-sum ensemble".into(),
        ));
    }
    if kind == EnsembleKind::SharedSum && n > SHARED_MAX_N {
        return Err(Error::Cap(format!(
            "shared-sum ensemble needs n <= {SHARED_MAX_N}, got {n}"
        )));
    }
    let m = n / 2;
    let mut ens = AnisotropicEnsemble {
        kind,
        params: params.clone(),
        n,
        seed,
        split: m,
        h2: None,
        h4: None,
        h6: None,
        h8: None,
    };
    match kind {
        EnsembleKind::DegreeScaling => {
            ens.h2 = Some(pure(n, 2, n, seed)?);
            ens.h4 = Some(pure(n, 4, n, seed)?);
        }
        EnsembleKind::DirectSum => {
            ens.h2 = Some(pure(m, 2, n, seed)?);
            ens.h4 = Some(pure(n - m, 4, n, seed)?);
        }
        EnsembleKind::SharedSum => {
            ens.h4 = Some(pure(m, 4, n, seed)?);
            ens.h6 = Some(Interaction::sample(n, m, derive_seed(seed, &[6]))?);
            ens.h8 = Some(pure(n - m, 8, n, seed)?);
        }
    }
    Ok(ens)
}

/// One of the two Hamiltonians of an ensemble, as a landscape.
pub struct View<'a> {
    ens: &'a AnisotropicEnsemble,
    extended: bool,
}

impl AnisotropicEnsemble {
    pub fn raw(&self) -> View<'_> {
        View {
            ens: self,
            extended: false,
        }
    }

    pub fn extended(&self) -> View<'_> {
        View {
            ens: self,
            extended: true,
        }
    }

    pub fn projector(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j && i < self.split {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `|P x|^2`.
    pub fn pi_mass(&self, x: &[f64]) -> f64 {
        x[..self.split].iter().map(|v| v * v).sum()
    }

    fn evaluate_many(&self, xs: &[&[f64]], want: Want, extended: bool) -> Result<Vec<Evaluation>> {
        let n = self.n;
        let m = self.split;
        let p = &self.params;
        let iw = inner_want(want);
        let mut parts: Vec<Part> = xs.iter().map(|_| Part::zero(n, iw)).collect();
        let xv: Vec<DVector<f64>> = xs.iter().map(|x| DVector::from_column_slice(x)).collect();
        // adds `weight |x|^{2 power} inst(x[lo..])` to every point
        let add = |parts: &mut Vec<Part>,
                   inst: &SpinGlassInstance,
                   lo: usize,
                   weight: f64,
                   power: f64|
         -> Result<()> {
            if weight == 0.0 {
                return Ok(());
            }
            let subs: Vec<&[f64]> = xs.iter().map(|x| &x[lo..lo + inst.n()]).collect();
            let evs = inst.evaluate_many(&subs, iw)?;
            for ((part, ev), x) in parts.iter_mut().zip(evs).zip(&xv) {
                let term = Part::from_eval(ev, lo, n, iw);
                let term = if power == 0.0 {
                    term
                } else {
                    term.radial(x, power)
                };
                part.add_scaled(weight, &term);
            }
            Ok(())
        };
        match self.kind {
            EnsembleKind::DegreeScaling => {
                let power = if extended { 0.0 } else { p.exponent / 2.0 };
                add(&mut parts, self.h2.as_ref().unwrap(), 0, p.alpha2, power)?;
                add(&mut parts, self.h4.as_ref().unwrap(), 0, 1.0, 0.0)?;
            }
            EnsembleKind::DirectSum => {
                add(
                    &mut parts,
                    self.h2.as_ref().unwrap(),
                    0,
                    p.alpha2,
                    if extended { 1.0 } else { 0.0 },
                )?;
                add(&mut parts, self.h4.as_ref().unwrap(), m, p.alpha4, 0.0)?;
            }
            EnsembleKind::SharedSum => {
                add(
                    &mut parts,
                    self.h4.as_ref().unwrap(),
                    0,
                    p.alpha4,
                    if extended { 2.0 } else { 0.0 },
                )?;
                if p.alpha6 != 0.0 {
                    let h6 = self.h6.as_ref().unwrap();
                    for (part, x) in parts.iter_mut().zip(&xv) {
                        let term = h6.evaluate(x.as_slice(), iw)?;
                        let term = if extended { term.radial(x, 1.0) } else { term };
                        part.add_scaled(p.alpha6, &term);
                    }
                }
                add(&mut parts, self.h8.as_ref().unwrap(), m, p.alpha8, 0.0)?;
            }
        }
        Ok(parts
            .into_iter()
            .map(|mut part| {
                if !want.gradient {
                    part.g = None;
                }
                part.into_eval()
            })
            .collect())
    }
}

impl Landscape for View<'_> {
    fn dim(&self) -> usize {
        self.ens.n
    }

    fn evaluate(&self, x: &[f64], want: Want) -> Result<Evaluation> {
        Ok(self.evaluate_batch(&[x], want)?.swap_remove(0))
    }

    fn evaluate_batch(&self, xs: &[&[f64]], want: Want) -> Result<Vec<Evaluation>> {
        for x in xs {
            if x.len() != self.ens.n {
                return Err(Error::DimensionMismatch {
                    expected: self.ens.n,
                    got: x.len(),
                });
            }
        }
        self.ens.evaluate_many(xs, want, self.extended)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kind: EnsembleKind,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub seeds: Vec<u64>,
    /// Final `H(sigma_k)/n` under the raw Hamiltonian, per seed.
    pub raw_energies: Vec<f64>,
    /// The extended run's final point, also scored on the raw Hamiltonian.
    pub extended_energies: Vec<f64>,
    pub differences: Vec<f64>,
    pub mean_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `|P sigma_i|^2` per seed and step.
    pub raw_pi_mass: Vec<Vec<f64>>,
    pub extended_pi_mass: Vec<Vec<f64>>,
    /// Whether the two runs of a seed took bitwise identical steps.
    pub identical: Vec<bool>,
}

impl Comparison {
    /// Mean over seeds of `|P sigma_i|^2 / |sigma_i|^2` at each step.
    pub fn mean_occupancy(&self, extended: bool) -> Vec<f64> {
        let rows = if extended {
            &self.extended_pi_mass
        } else {
            &self.raw_pi_mass
        };
        (0..self.k)
            .map(|i| {
                let frac = (i + 1) as f64 / self.k as f64;
                rows.iter().map(|r| r[i] / frac).sum::<f64>() / rows.len() as f64
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,raw_energy,extended_energy,difference\n");
        for (i, s) in self.seeds.iter().enumerate() {
            out.push_str(&format!(
                "{s},{},{},{}\n",
                crate::ascent::float17(self.raw_energies[i]),
                crate::ascent::float17(self.extended_energies[i]),
                crate::ascent::float17(self.differences[i])
            ));
        }
        out
    }
}

/// Percentile bootstrap interval for the mean, `resamples` draws.
pub fn bootstrap_mean_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, &[0x6369]);
    let len = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            (0..len)
                .map(|_| values[rng.random_range(0..len)])
                .sum::<f64>()
                / len as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

/// Runs randomized ascent on the raw and on the extended Hamiltonian with the
/// same seeds and scores both final points on the raw Hamiltonian.
pub fn compare_ascent(
    ens: &AnisotropicEnsemble,
    k: usize,
    delta: f64,
    seeds: &[u64],
) -> Result<Comparison> {
    if seeds.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "at least 5 seeds are needed, got {}",
            seeds.len()
        )));
    }
    let raw = ens.raw();
    let ext = ens.extended();
    let raw_runs = randomized_ascent_batch(&raw, k, delta, seeds)?;
    let ext_runs = randomized_ascent_batch(&ext, k, delta, seeds)?;
    let finals: Vec<&[f64]> = ext_runs
        .iter()
        .map(|t| t.iterates[k - 1].as_slice())
        .collect();
    let scale = 1.0 / ens.n as f64;
    let extended_energies: Vec<f64> = raw
        .evaluate_batch(&finals, Want::ENERGY)?
        .into_iter()
        .map(|e| e.energy * scale)
        .collect();
    let raw_energies: Vec<f64> = raw_runs.iter().map(Trajectory::final_energy).collect();
    let differences: Vec<f64> = extended_energies
        .iter()
        .zip(&raw_energies)
        .map(|(e, r)| e - r)
        .collect();
    let mean_difference = differences.iter().sum::<f64>() / differences.len() as f64;
    let (ci_low, ci_high) = bootstrap_mean_ci(
        &differences,
        0.95,
        BOOTSTRAP_RESAMPLES,
        derive_seed(ens.seed, seeds),
    );
    let mass = |runs: &[Trajectory]| -> Vec<Vec<f64>> {
        runs.iter()
            .map(|t| {
                t.iterates
                    .iter()
                    .map(|x| ens.pi_mass(x.as_slice()))
                    .collect()
            })
            .collect()
    };
    Ok(Comparison {
        kind: ens.kind,
        n: ens.n,
        k,
        delta,
        seeds: seeds.to_vec(),
        raw_energies,
        extended_energies,
        differences,
        mean_difference,
        ci_low,
        ci_high,
        raw_pi_mass: mass(&raw_runs),
        extended_pi_mass: mass(&ext_runs),
        identical: raw_runs
            .iter()
            .zip(&ext_runs)
            .map(|(a, b)| a.steps == b.steps)
            .collect(),
    })
}

/// Uniform random unit vector, for sphere-agreement checks.
pub fn random_unit(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = stream(seed, &[0x756e]);
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize()
}
