//! Bernstein approximations of the spectral ramp, scalar and matrix valued.
//!
//! Basis weights `binom(d, i) p^i (1-p)^{d-i}` are evaluated only inside a
//! window around the binomial mode, outside of which the total weight is below
//! `1e-30`. The weights come from a ratio recurrence seeded at the mode and
//! are normalized by their sum, so degrees in the billions stay cheap and
//! overflow free. For the ramp itself there is a further shortcut: Bernstein
//! operators reproduce affine functions, so when the whole window lies on one
//! linear piece the value is that piece.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{semicircle_cdf, semicircle_partial_first_moment};
use crate::quad::adaptive_simpson_split;
use crate::spectral::{eigh, EigenDecomposition};

/// `-ln` of the tail mass ignored outside the evaluation window.
const TAIL_LOG: f64 = 70.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Ramp {
    /// 0 up to `alpha - gamma`, linear across `(alpha - gamma, alpha + gamma)`, then 1.
    Linear { alpha: f64, gamma: f64 },
    /// On `[-1, 1]`: 0 up to `1 - phi`, slope `1/phi^2`, 1 from `1 - phi + phi^2`.
    Phi { phi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinSpec {
    pub a: f64,
    pub b: f64,
    pub ramp: Ramp,
    pub degree: u64,
}

/// Degree `ceil(C w^3 / (2 eps^3))` that brings a `C`-Lipschitz function on an
/// interval of width `w` within `eps` uniformly.
pub fn degree_for_accuracy(lipschitz: f64, width: f64, eps: f64) -> Result<u64> {
    if !(lipschitz > 0.0 && width > 0.0 && eps > 0.0) {
        return Err(Error::InvalidParameter(
            "lipschitz constant, width and eps must be positive".into(),
        ));
    }
    let raw = lipschitz * width.powi(3) / (2.0 * eps.powi(3));
    // shave rounding noise so exact products like 1.6e9 do not round up
    let d = (raw * (1.0 - 1e-12)).ceil();
    if d > 1e15 {
        return Err(Error::Overflow(format!("bernstein degree {d:e}")));
    }
    Ok((d as u64).max(1))
}

impl BernsteinSpec {
    pub fn linear(a: f64, b: f64, alpha: f64, gamma: f64, degree: u64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!(
                "interval [{a}, {b}] is empty"
            )));
        }
        if !(gamma > 0.0 && alpha - gamma > a && alpha + gamma < b) {
            return Err(Error::InvalidParameter(format!(
                "ramp ({alpha} +- {gamma}) must sit strictly inside [{a}, {b}]"
            )));
        }
        if degree == 0 {
            return Err(Error::InvalidParameter("degree must be at least 1".into()));
        }
        Ok(Self {
            a,
            b,
            ramp: Ramp::Linear { alpha, gamma },
            degree,
        })
    }

    /// Ramp in `phi` form on `[-1, 1]`.
    pub fn phi(phi: f64, degree: u64) -> Result<Self> {
        if !(phi > 0.0 && phi < 0.25) {
            return Err(Error::InvalidParameter(format!(
                "phi = {phi} outside (0, 1/4)"
            )));
        }
        if degree == 0 {
            return Err(Error::InvalidParameter("degree must be at least 1".into()));
        }
        Ok(Self {
            a: -1.0,
            b: 1.0,
            ramp: Ramp::Phi { phi },
            degree,
        })
    }

    /// Same ramp with the degree chosen for uniform accuracy `eps`.
    pub fn with_accuracy(mut self, eps: f64) -> Result<Self> {
        self.degree = degree_for_accuracy(self.lipschitz(), self.b - self.a, eps)?;
        Ok(self)
    }

    /// Where the ramp leaves 0 and where it reaches 1.
    pub fn breakpoints(&self) -> (f64, f64) {
        match self.ramp {
            Ramp::Linear { alpha, gamma } => (alpha - gamma, alpha + gamma),
            Ramp::Phi { phi } => (1.0 - phi, 1.0 - phi + phi * phi),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        let (lo, hi) = self.breakpoints();
        1.0 / (hi - lo)
    }

    pub fn ramp(&self, x: f64) -> f64 {
        let (lo, hi) = self.breakpoints();
        if x <= lo {
            0.0
        } else if x >= hi {
            1.0
        } else {
            (x - lo) / (hi - lo)
        }
    }

    fn check(&self, x: f64) -> Result<f64> {
        if !(self.a..=self.b).contains(&x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.a, self.b
            )));
        }
        Ok((x - self.a) / (self.b - self.a))
    }

    fn node(&self, i: u64) -> f64 {
        self.a + (self.b - self.a) * (i as f64 / self.degree as f64)
    }
}

/// Index range `[lo, hi]` outside which `Bin(d, p)` has mass below `e^{-TAIL_LOG}`.
fn window(d: u64, p: f64) -> (u64, u64) {
    let var = d as f64 * p * (1.0 - p);
    // Bernstein inequality: P(|K - dp| >= t) <= 2 exp(-t^2 / (2 var + 2t/3))
    let c = TAIL_LOG + 2f64.ln();
    let t = (2.0 * c / 3.0 + ((2.0 * c / 3.0).powi(2) + 8.0 * c * var).sqrt()) / 2.0;
    let mean = d as f64 * p;
    let lo = (mean - t).floor().max(0.0) as u64;
    let hi = ((mean + t).ceil().min(d as f64)) as u64;
    (lo, hi)
}

/// Normalized basis weights on the window, as `(first index, weights)`.
pub fn basis_weights(d: u64, p: f64) -> (u64, Vec<f64>) {
    if p <= 0.0 {
        return (0, vec![1.0]);
    }
    if p >= 1.0 {
        return (d, vec![1.0]);
    }
    let (lo, hi) = window(d, p);
    let mode = (((d + 1) as f64 * p).floor() as u64).clamp(lo, hi);
    let len = (hi - lo + 1) as usize;
    let mut w = vec![0.0; len];
    let odds = p / (1.0 - p);
    let m = (mode - lo) as usize;
    w[m] = 1.0;
    for j in m + 1..len {
        let i = lo + j as u64 - 1;
        w[j] = w[j - 1] * ((d - i) as f64 / (i + 1) as f64) * odds;
    }
    for j in (0..m).rev() {
        let i = lo + j as u64 + 1;
        w[j] = w[j + 1] * (i as f64 / (d - i + 1) as f64) / odds;
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    (lo, w)
}

/// `sum_i f(a + i(b-a)/d) binom(d,i) ((x-a)/(b-a))^i ((b-x)/(b-a))^{d-i}`.
pub fn bernstein_scalar<F: Fn(f64) -> f64>(f: F, spec: &BernsteinSpec, x: f64) -> Result<f64> {
    let p = spec.check(x)?;
    let (lo, w) = basis_weights(spec.degree, p);
    Ok(w.iter()
        .enumerate()
        .map(|(j, wj)| wj * f(spec.node(lo + j as u64)))
        .sum())
}

/// Bernstein polynomial of the spec's own ramp, with the affine shortcut.
pub fn bernstein_ramp(spec: &BernsteinSpec, x: f64) -> Result<f64> {
    let p = spec.check(x)?;
    if p > 0.0 && p < 1.0 {
        let (lo, hi) = window(spec.degree, p);
        let (x_lo, x_hi) = (spec.node(lo), spec.node(hi));
        let (b_lo, b_hi) = spec.breakpoints();
        let one_piece = x_hi <= b_lo || x_lo >= b_hi || (x_lo >= b_lo && x_hi <= b_hi);
        if one_piece {
            return Ok(spec.ramp(x));
        }
    }
    bernstein_scalar(|y| spec.ramp(y), spec, x)
}

/// `[x_lo, x_hi]` such that `bernstein_ramp` is affine outside the windows
/// around the two breakpoints; useful as quadrature cut points.
fn ramp_cuts(spec: &BernsteinSpec) -> Vec<f64> {
    let (b_lo, b_hi) = spec.breakpoints();
    let width = spec.b - spec.a;
    let mut cuts = vec![b_lo, b_hi];
    for bp in [b_lo, b_hi] {
        let p = (bp - spec.a) / width;
        let (lo, hi) = window(spec.degree, p);
        let half = (hi - lo) as f64 / spec.degree as f64 * width;
        cuts.push(bp - half);
        cuts.push(bp + half);
    }
    cuts.retain(|c| *c > spec.a && *c < spec.b);
    cuts
}

#[derive(Clone, Debug)]
pub struct MatrixBernstein {
    pub matrix: DMatrix<f64>,
    /// Decomposition of the input; `values[i]` is the Bernstein value at its
    /// `i`-th (clamped) eigenvalue.
    pub eigen: EigenDecomposition,
    pub values: Vec<f64>,
    pub clamped_eigenvalues: Vec<f64>,
    /// Eigenvalues that were moved into `[a, b]`.
    pub clamped: usize,
}

/// Eigenvalues further than `10 n^{-2/3} (b - a)` outside `[a, b]` are rejected.
pub fn clamp_buffer(n: usize, spec: &BernsteinSpec) -> f64 {
    10.0 * (n.max(1) as f64).powf(-2.0 / 3.0) * (spec.b - spec.a)
}

/// `B(M)` applied eigenwise.
pub fn matrix_bernstein(m: &DMatrix<f64>, spec: &BernsteinSpec) -> Result<MatrixBernstein> {
    let eigen = eigh(m)?;
    let buffer = clamp_buffer(m.nrows(), spec);
    let mut clamped = 0;
    let mut lambdas = Vec::with_capacity(eigen.dim());
    for &l in eigen.eigenvalues.iter() {
        if l < spec.a - buffer || l > spec.b + buffer {
            return Err(Error::SpectrumOverflow {
                value: l,
                lo: spec.a,
                hi: spec.b,
            });
        }
        let c = l.clamp(spec.a, spec.b);
        if c != l {
            clamped += 1;
        }
        lambdas.push(c);
    }
    let values = lambdas
        .iter()
        .map(|&l| bernstein_ramp(spec, l))
        .collect::<Result<Vec<_>>>()?;
    let q = &eigen.eigenvectors;
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    let mut matrix = scaled * q.transpose();
    matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(MatrixBernstein {
        matrix,
        eigen,
        values,
        clamped_eigenvalues: lambdas,
        clamped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `||B(M)/(delta' n) - Pi/(delta' n)||_F`, `Pi` the projector onto `[alpha + gamma, b]`.
    pub gap: f64,
    /// `sqrt(2 delta''' / delta'^2) / sqrt(n)`.
    pub bound: f64,
    pub eps: f64,
    /// Fractions of eigenvalues at or above `alpha - gamma`, `alpha`, `alpha + gamma`.
    pub delta: f64,
    pub delta_prime: f64,
    pub delta_double_prime: f64,
    /// `max(eps^2, 3/4 (delta - delta''))`.
    pub delta_triple_prime: f64,
    pub n: usize,
}

impl GapReport {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Frobenius distance between the normalized matrix Bernstein polynomial and
/// the normalized spectral projector, with the matching bound.
///
/// `delta_prime` defaults to the fraction of eigenvalues at or above the ramp
/// centre. Only the linear ramp has a centre, so the phi form is rejected.
pub fn projector_gap(
    m: &DMatrix<f64>,
    spec: &BernsteinSpec,
    eps: f64,
    delta_prime: Option<f64>,
) -> Result<GapReport> {
    let Ramp::Linear { alpha, gamma } = spec.ramp else {
        return Err(Error::InvalidParameter(
            "projector_gap needs the (alpha, gamma) ramp".into(),
        ));
    };
    let mb = matrix_bernstein(m, spec)?;
    let n = m.nrows();
    let lam = &mb.clamped_eigenvalues;
    let frac = |t: f64| lam.iter().filter(|&&l| l >= t).count() as f64 / n as f64;
    let delta = frac(alpha - gamma);
    let dp = delta_prime.unwrap_or_else(|| frac(alpha));
    let ddp = frac(alpha + gamma);
    if !(dp > 0.0) {
        return Err(Error::Degenerate(
            "no eigenvalue reaches the ramp centre, delta' = 0".into(),
        ));
    }
    let sq: f64 = lam
        .iter()
        .zip(&mb.values)
        .map(|(&l, &v)| {
            let pi = if l >= alpha + gamma { 1.0 } else { 0.0 };
            (v - pi).powi(2)
        })
        .sum();
    let scale = dp * n as f64;
    let dppp = (eps * eps).max(0.75 * (delta - ddp));
    Ok(GapReport {
        gap: sq.sqrt() / scale,
        bound: (2.0 * dppp / (dp * dp)).sqrt() / (n as f64).sqrt(),
        eps,
        delta,
        delta_prime: dp,
        delta_double_prime: ddp,
        delta_triple_prime: dppp,
        n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScReport {
    pub phi: f64,
    pub eps: f64,
    pub degree: u64,
    /// Leading-order lower bound as stated, `(1 + 2eps) (4 sqrt2 / 3pi) phi^{3/2} + eps`.
    pub mass_lower: f64,
    /// `1 + eps - CDF(1 - phi)`.
    pub mass_upper: f64,
    /// `1 - CDF(1 - phi + phi^2) - eps`, which follows from `B >= L - eps` alone.
    pub mass_lower_rigorous: f64,
    /// `(2/3pi) [(1 - (1-phi+phi^2)^2)^{3/2} - 2 eps phi^{3/2} (2-phi)^{3/2}]`.
    pub correlation_lower: f64,
    /// `int_{1-phi}^1 x dmu + eps E|x|`.
    pub correlation_upper: f64,
    pub quadrature_mass: f64,
    pub quadrature_correlation: f64,
    /// `quadrature_correlation / quadrature_mass`.
    pub ratio: f64,
    /// `1 - 20 phi - 2 eps`.
    pub ratio_lower: f64,
    pub mass_in_sandwich: bool,
    pub ratio_ok: bool,
}

/// Semicircle averages of the phi-form Bernstein ramp and of `x` times it,
/// against the closed-form bounds.
///
/// The degree defaults to the uniform-accuracy degree for `eps`.
pub fn sc_mass_and_correlation(phi: f64, eps: f64, degree: Option<u64>) -> Result<ScReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside (0, 1)"
        )));
    }
    let spec = match degree {
        Some(d) => BernsteinSpec::phi(phi, d)?,
        None => BernsteinSpec::phi(phi, 1)?.with_accuracy(eps)?,
    };
    // x = sin(theta) turns (2/pi) sqrt(1 - x^2) dx into (2/pi) cos^2(theta) dtheta
    let cuts: Vec<f64> = ramp_cuts(&spec).into_iter().map(f64::asin).collect();
    let half = PI / 2.0;
    let b_of = |t: f64| bernstein_ramp(&spec, t.sin().clamp(-1.0, 1.0)).unwrap_or(f64::NAN);
    let weight = |t: f64| 2.0 / PI * t.cos().powi(2);
    let tol = 1e-13;
    let mass = adaptive_simpson_split(&|t: f64| b_of(t) * weight(t), -half, half, &cuts, tol);
    let corr = adaptive_simpson_split(
        &|t: f64| t.sin() * b_of(t) * weight(t),
        -half,
        half,
        &cuts,
        tol,
    );
    if !(mass.is_finite() && corr.is_finite()) {
        return Err(Error::Domain(
            "quadrature produced a non-finite value".into(),
        ));
    }

    let c0 = 4.0 * 2f64.sqrt() / (3.0 * PI);
    let lo = 1.0 - phi;
    let hi = 1.0 - phi + phi * phi;
    let mass_lower = (1.0 + 2.0 * eps) * c0 * phi.powf(1.5) + eps;
    let mass_upper = 1.0 + eps - semicircle_cdf(lo)?;
    let mass_lower_rigorous = 1.0 - semicircle_cdf(hi)? - eps;
    let correlation_lower = 2.0 / (3.0 * PI)
        * ((1.0 - hi * hi).powf(1.5) - 2.0 * eps * phi.powf(1.5) * (2.0 - phi).powf(1.5));
    let correlation_upper = semicircle_partial_first_moment(lo)? + eps * 4.0 / (3.0 * PI);
    let ratio = corr / mass;
    let ratio_lower = 1.0 - 20.0 * phi - 2.0 * eps;
    Ok(ScReport {
        phi,
        eps,
        degree: spec.degree,
        mass_lower,
        mass_upper,
        mass_lower_rigorous,
        correlation_lower,
        correlation_upper,
        quadrature_mass: mass,
        quadrature_correlation: corr,
        ratio,
        ratio_lower,
        mass_in_sandwich: mass_lower <= mass && mass <= mass_upper,
        ratio_ok: ratio >= ratio_lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{goe, random_orthogonal};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn naive(f: impl Fn(f64) -> f64, spec: &BernsteinSpec, x: f64) -> f64 {
        // direct sum with exact binomials, fine for small d
        let d = spec.degree;
        let p = (x - spec.a) / (spec.b - spec.a);
        let mut binom = 1.0f64;
        let mut s = 0.0;
        for i in 0..=d {
            if i > 0 {
                binom *= (d - i + 1) as f64 / i as f64;
            }
            s += f(spec.node(i)) * binom * p.powi(i as i32) * (1.0 - p).powi((d - i) as i32);
        }
        s
    }

    #[test]
    fn matches_direct_sum_at_small_degree() {
        let spec = BernsteinSpec::linear(-1.0, 2.0, 0.4, 0.3, 40).unwrap();
        for k in 0..=30 {
            let x = -1.0 + 3.0 * k as f64 / 30.0;
            let f = |y: f64| (2.0 * y).sin() + y * y;
            let a = bernstein_scalar(f, &spec, x).unwrap();
            assert!((a - naive(f, &spec, x)).abs() < 1e-12, "x = {x}");
            let r = bernstein_ramp(&spec, x).unwrap();
            assert!((r - naive(|y| spec.ramp(y), &spec, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_of_unity_and_endpoints() {
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 5000).unwrap();
        for k in 0..1000 {
            let x = -1.0 + 2.0 * k as f64 / 999.0;
            assert!((bernstein_scalar(|_| 1.0, &spec, x).unwrap() - 1.0).abs() < 1e-12);
        }
        let f = |y: f64| y.exp();
        assert_eq!(bernstein_scalar(f, &spec, -1.0).unwrap(), f(-1.0));
        assert_eq!(bernstein_scalar(f, &spec, 1.0).unwrap(), f(1.0));
        assert!(bernstein_scalar(f, &spec, 1.5).is_err());
    }

    #[test]
    fn ramp_pieces() {
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 10).unwrap();
        assert_eq!(spec.ramp(0.3), 0.0);
        assert_eq!(spec.ramp(0.4), 0.0);
        assert_eq!(spec.ramp(0.6), 1.0);
        assert!((spec.ramp(0.5) - 0.5).abs() < 1e-15);
        let phi = 0.1;
        let sp = BernsteinSpec::phi(phi, 10).unwrap();
        assert!((sp.ramp(1.0 - phi + phi * phi / 2.0) - 0.5).abs() < 1e-12);
        assert!((sp.lipschitz() - 1.0 / (phi * phi)).abs() < 1e-9);
        assert!(BernsteinSpec::phi(0.3, 10).is_err());
        assert!(BernsteinSpec::linear(-1.0, 1.0, 0.95, 0.1, 10).is_err());
    }

    #[test]
    fn accuracy_degree_gives_eps() {
        let eps = 0.1;
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 1)
            .unwrap()
            .with_accuracy(eps)
            .unwrap();
        assert_eq!(spec.degree, 20_000);
        let mut worst: f64 = 0.0;
        for k in 0..=2000 {
            let x = -1.0 + 2.0 * k as f64 / 2000.0;
            worst = worst.max((bernstein_ramp(&spec, x).unwrap() - spec.ramp(x)).abs());
        }
        assert!(worst <= eps, "{worst}");
    }

    #[test]
    fn diagonal_matrix_is_eigenwise() {
        let spec = BernsteinSpec::linear(-2.0, 2.0, 1.0, 0.3, 300).unwrap();
        let lam = [1.9, 1.1, 0.9, 0.0, -1.5];
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&lam));
        let mb = matrix_bernstein(&m, &spec).unwrap();
        for (i, &l) in lam.iter().enumerate() {
            assert!((mb.matrix[(i, i)] - bernstein_ramp(&spec, l).unwrap()).abs() < 1e-12);
        }
        let top = matrix_bernstein(&(DMatrix::identity(4, 4) * 2.0), &spec).unwrap();
        assert!((top.matrix - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn commutes_with_rotation() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let spec = BernsteinSpec::linear(-3.0, 3.0, 1.0, 0.4, 500).unwrap();
        let lam = DVector::from_fn(10, |i, _| -2.0 + 0.4 * i as f64);
        let q = random_orthogonal(10, &mut rng);
        let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let lhs = matrix_bernstein(&m, &spec).unwrap().matrix;
        let rhs = &q
            * matrix_bernstein(&DMatrix::from_diagonal(&lam), &spec)
                .unwrap()
                .matrix
            * q.transpose();
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn overflow_beyond_buffer() {
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 100).unwrap();
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[20.0, 0.0]));
        assert!(matches!(
            matrix_bernstein(&m, &spec),
            Err(Error::SpectrumOverflow { .. })
        ));
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0 + 1e-3, 0.0]));
        assert_eq!(matrix_bernstein(&m, &spec).unwrap().clamped, 1);
    }

    #[test]
    fn gap_when_everything_is_above_the_ramp() {
        let eps = 0.1;
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 1)
            .unwrap()
            .with_accuracy(eps)
            .unwrap();
        let n = 20;
        let m = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
            0.65 + 0.3 * i as f64 / n as f64
        }));
        let rep = projector_gap(&m, &spec, eps, None).unwrap();
        assert_eq!(rep.delta_prime, 1.0);
        assert!(rep.gap <= eps * (n as f64).sqrt() / n as f64);
    }

    #[test]
    fn gap_with_spectral_gap_across_ramp() {
        let eps = 0.1;
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 1)
            .unwrap()
            .with_accuracy(eps)
            .unwrap();
        let n = 40;
        let lam: Vec<f64> = (0..n)
            .map(|i| {
                if i < 8 {
                    0.8 + 0.01 * i as f64
                } else {
                    -0.9 + 0.1 * (i - 8) as f64 / 4.0
                }
            })
            .collect();
        assert!(lam.iter().all(|&l| l <= 0.3 || l >= 0.7));
        let m = DMatrix::from_diagonal(&DVector::from_vec(lam));
        let rep = projector_gap(&m, &spec, eps, None).unwrap();
        assert!(rep.within_bound(), "{rep:?}");
    }

    #[test]
    fn goe_bernstein_is_psd_and_contractive() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let m = goe(120, &mut rng);
        let eps = 0.3;
        let spec = BernsteinSpec::linear(-2.0, 2.0, 2.0 - 2.0 * eps / 3.0, eps / 3.0, 1)
            .unwrap()
            .with_accuracy(eps)
            .unwrap();
        let mb = matrix_bernstein(&m, &spec).unwrap();
        let e = eigh(&mb.matrix).unwrap();
        assert!(e.eigenvalues[e.dim() - 1] >= -1e-8);
        assert!(e.eigenvalues[0] <= 1.0 + 1e-8);
    }

    #[test]
    fn sc_small_phi_leaves_residual_only() {
        let rep = sc_mass_and_correlation(1e-6, 0.01, Some(1000)).unwrap();
        // only the node at x = 1 contributes: E[((1+x)/2)^d]
        assert!(rep.quadrature_mass < 1e-3, "{rep:?}");
        assert!(rep.quadrature_mass > 0.0);
    }

    #[test]
    fn sc_quadrature_matches_closed_form_for_ramp() {
        // at huge degree B is the ramp up to 1e-4 except near the breakpoints
        let phi = 0.1;
        let rep = sc_mass_and_correlation(phi, 0.05, Some(200_000_000)).unwrap();
        let lo = 1.0 - phi;
        let hi = lo + phi * phi;
        let inner = crate::quad::adaptive_simpson(
            &|x: f64| (x - lo) / (phi * phi) * 2.0 / PI * (1.0 - x * x).sqrt(),
            lo,
            hi,
            1e-14,
        );
        let exact = 1.0 - semicircle_cdf(hi).unwrap() + inner;
        assert!(
            (rep.quadrature_mass - exact).abs() < 1e-5,
            "{} vs {exact}",
            rep.quadrature_mass
        );
        assert!(rep.ratio > 0.9 && rep.ratio < 1.0);
    }
}
