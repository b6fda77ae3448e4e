//! Scalar analytics of the mixture polynomial `nu(q) = sum_k gamma_k^2 q^k`.
//!
//! Also hosts the combinatorial and semicircle helpers used by the spectral
//! checks, and the Lambert-W based Hölder exponent.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Default quadrature tolerance for threshold integrals.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Grid used by [`MixtureSpec::frsb_check`] when called from the threshold.
pub const FRSB_GRID: usize = 1024;

/// Coefficients `gamma_k` for degrees `k = 2..=d_H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// `gammas[i]` is the weight of degree `i + 2`.
    gammas: Vec<f64>,
}

/// Outcome of the algorithmic threshold computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub q1: f64,
    pub alg_value: f64,
    pub frsb: bool,
    /// Set when the defining equation for `q1` holds identically.
    pub degenerate: bool,
}

/// Per-step and cumulative energy targets `nu''(i/k)^{1/2} / k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTargets {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub integral: f64,
    /// `cumulative[k-1] - integral`; positive for right-endpoint overestimates.
    pub riemann_gap: f64,
    pub overestimate: bool,
}

impl MixtureSpec {
    /// Builds a mixture from weights starting at degree 2.
    pub fn new(gammas_from_degree_two: Vec<f64>) -> Result<Self> {
        let mut gammas = gammas_from_degree_two;
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidMixture(
                "weights must be finite and non-negative".into(),
            ));
        }
        while gammas.last() == Some(&0.0) {
            gammas.pop();
        }
        if gammas.is_empty() {
            return Err(Error::InvalidMixture(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self { gammas })
    }

    /// Builds a mixture from `(degree, gamma)` pairs.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let top = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        if pairs.iter().any(|p| p.0 < 2) {
            return Err(Error::InvalidMixture(
                "degrees below 2 are not supported".into(),
            ));
        }
        if top < 2 {
            return Err(Error::InvalidMixture("empty mixture".into()));
        }
        let mut g = vec![0.0; top - 1];
        for &(k, v) in pairs {
            g[k - 2] += v;
        }
        Self::new(g)
    }

    /// Single-degree mixture.
    pub fn pure(degree: usize, gamma: f64) -> Result<Self> {
        Self::from_pairs(&[(degree, gamma)])
    }

    /// Largest degree with a nonzero weight.
    pub fn max_degree(&self) -> usize {
        self.gammas.len() + 1
    }

    /// `gamma_k`, zero for degrees outside the support.
    pub fn gamma(&self, k: usize) -> f64 {
        if k < 2 {
            return 0.0;
        }
        self.gammas.get(k - 2).copied().unwrap_or(0.0)
    }

    /// Degrees with a positive weight, ascending.
    pub fn degrees(&self) -> Vec<usize> {
        (2..=self.max_degree())
            .filter(|&k| self.gamma(k) > 0.0)
            .collect()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    fn nu_unchecked(&self, q: f64, order: u32) -> f64 {
        let mut s = 0.0;
        for (i, g) in self.gammas.iter().enumerate() {
            let k = (i + 2) as i32;
            let g2 = g * g;
            s += match order {
                0 => g2 * q.powi(k),
                1 => g2 * k as f64 * q.powi(k - 1),
                _ => g2 * (k * (k - 1)) as f64 * q.powi(k - 2),
            };
        }
        s
    }

    /// `nu`, `nu'` or `nu''` at `q`.
    pub fn nu(&self, q: f64, order: u32) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("q = {q} is outside [0, 1]")));
        }
        if order > 2 {
            return Err(Error::Domain(format!(
                "derivative order {order} is not 0, 1 or 2"
            )));
        }
        Ok(self.nu_unchecked(q, order))
    }

    /// Discrete concavity test of `q -> nu''(q)^{-1/2}` on `grid_size` points of `(0, 1]`.
    pub fn frsb_check(&self, grid_size: usize) -> Result<bool> {
        if grid_size < 3 {
            return Err(Error::Domain("grid_size must be at least 3".into()));
        }
        let mut vals = Vec::with_capacity(grid_size);
        for j in 1..=grid_size {
            let q = j as f64 / grid_size as f64;
            let v = self.nu_unchecked(q, 2);
            if v <= 0.0 {
                return Err(Error::Degenerate(format!("nu'' vanishes at q = {q}")));
            }
            vals.push(v.powf(-0.5));
        }
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        Ok(vals.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= tol))
    }

    /// Solves `nu'(q) = q nu''(q)` and integrates `nu''^{1/2}` from `q1` to 1.
    pub fn alg_threshold(&self, quad_tol: f64) -> Result<ThresholdResult> {
        if !(quad_tol > 0.0) {
            return Err(Error::Domain("quad_tol must be positive".into()));
        }
        let g = |q: f64| self.nu_unchecked(q, 1) - q * self.nu_unchecked(q, 2);
        let hi = 1.0 - 1e-9;
        let steps = 1024;
        let mut scale = 0.0f64;
        let mut root = None;
        let mut prev_q = 0.0;
        let mut prev_g = g(0.0);
        for j in 1..=steps {
            let q = hi * j as f64 / steps as f64;
            let gq = g(q);
            scale = scale.max(gq.abs());
            if root.is_none() && prev_g != 0.0 && gq != 0.0 && prev_g.signum() != gq.signum() {
                root = Some((prev_q, q));
            }
            prev_q = q;
            prev_g = gq;
        }
        let degenerate = scale <= 1e-14 * (1.0 + self.nu_unchecked(1.0, 2));
        let q1 = match root {
            Some((mut lo, mut up)) if !degenerate => {
                let glo = g(lo);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + up);
                    if g(mid).signum() == glo.signum() {
                        lo = mid;
                    } else {
                        up = mid;
                    }
                    if up - lo < 1e-15 {
                        break;
                    }
                }
                0.5 * (lo + up)
            }
            _ => 0.0,
        };
        let integrand = |q: f64| self.nu_unchecked(q, 2).max(0.0).sqrt();
        let alg_value = q1 * integrand(q1) + adaptive_simpson(&integrand, q1, 1.0, quad_tol);
        let frsb = self.frsb_check(FRSB_GRID).unwrap_or(false);
        Ok(ThresholdResult {
            q1,
            alg_value,
            frsb,
            degenerate,
        })
    }

    /// Right-endpoint energy targets for a `k`-step process.
    pub fn energy_targets(&self, k: usize) -> Result<EnergyTargets> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        let per_step: Vec<f64> = (1..=k)
            .map(|i| self.nu_unchecked(i as f64 / k as f64, 2).sqrt() / k as f64)
            .collect();
        let cumulative: Vec<f64> = per_step
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let integral = adaptive_simpson(
            &|q: f64| self.nu_unchecked(q, 2).sqrt(),
            0.0,
            1.0,
            DEFAULT_QUAD_TOL,
        );
        let riemann_gap = cumulative[k - 1] - integral;
        Ok(EnergyTargets {
            per_step,
            cumulative,
            integral,
            riemann_gap,
            overestimate: riemann_gap > 0.0,
        })
    }
}

/// Catalan number `binom(2q, q) / (q + 1)` in exact integer arithmetic.
pub fn catalan(q: u32) -> Result<u128> {
    let mut c: u128 = 1;
    for i in 0..q as u128 {
        // C_{i+1} = C_i * 2(2i+1) / (i+2)
        let num = c
            .checked_mul(2 * (2 * i + 1))
            .ok_or_else(|| Error::Overflow(format!("catalan({q}) does not fit in 128 bits")))?;
        c = num / (i + 2);
    }
    Ok(c)
}

/// All closed non-negative +-1 walks of length `2q`, as height sequences of length `2q + 1`.
pub fn dyck_paths(q: u32) -> Vec<Vec<u32>> {
    fn walk(path: &mut Vec<u32>, len: usize, out: &mut Vec<Vec<u32>>) {
        let h = *path.last().unwrap();
        let remaining = len + 1 - path.len();
        if remaining == 0 {
            if h == 0 {
                out.push(path.clone());
            }
            return;
        }
        if (h as usize) < remaining {
            path.push(h + 1);
            walk(path, len, out);
            path.pop();
        }
        if h > 0 {
            path.push(h - 1);
            walk(path, len, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    let mut path = vec![0];
    walk(&mut path, 2 * q as usize, &mut out);
    out
}

/// Number of vertex labelings `n (n-1)^q` of a `q`-Dyck path.
pub fn instantiation_count(q: u32, n: u64) -> Result<u128> {
    let base = (n as u128).saturating_sub(1);
    let mut acc = n as u128;
    for _ in 0..q {
        acc = acc
            .checked_mul(base)
            .ok_or_else(|| Error::Overflow(format!("instantiation count ({q}, {n})")))?;
    }
    Ok(acc)
}

/// Semicircle quantities on `[-1, 1]` with density `(2/pi) sqrt(1 - x^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SemicircleQuery {
    Cdf(f64),
    PartialFirstMoment(f64),
    EvenMoment(u32),
}

pub fn semicircle(query: SemicircleQuery) -> Result<f64> {
    match query {
        SemicircleQuery::Cdf(x) => semicircle_cdf(x),
        SemicircleQuery::PartialFirstMoment(x) => semicircle_partial_first_moment(x),
        SemicircleQuery::EvenMoment(q) => semicircle_even_moment(q),
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} is outside [-1, 1]")))
    }
}

pub fn semicircle_cdf(x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(x * (1.0 - x * x).sqrt() / PI + x.asin() / PI + 0.5)
}

/// `int_x^1 t dmu(t) = (2 / 3pi) (1 - x^2)^{3/2}`.
pub fn semicircle_partial_first_moment(x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(2.0 / (3.0 * PI) * (1.0 - x * x).powf(1.5))
}

/// `E x^{2q} = C_q / 4^q`.
pub fn semicircle_even_moment(q: u32) -> Result<f64> {
    Ok(catalan(q)? as f64 / 4f64.powi(q as i32))
}

/// Principal branch of the Lambert W function.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / std::f64::consts::E;
    if x.is_nan() || x < branch {
        return Err(Error::Branch(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Hölder exponent before and after rounding up to an even integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderExponent {
    pub raw: f64,
    pub even: u64,
}

/// `p(eps, delta) = -3 W(-(4 / (3 pi^{1/3})) eps / delta^{2/3}) / (2 eps)`.
pub fn holder_exponent(eps: f64, delta: f64) -> Result<HolderExponent> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain("eps and delta must lie in (0, 1)".into()));
    }
    let z = -(4.0 / (3.0 * PI.cbrt())) * eps / delta.powf(2.0 / 3.0);
    let w = lambert_w0(z)?;
    let raw = -3.0 * w / (2.0 * eps);
    let mut even = raw.ceil().max(2.0) as u64;
    if even % 2 == 1 {
        even += 1;
    }
    Ok(HolderExponent { raw, even })
}

/// First-order series `(2 / pi^{1/3}) delta^{-2/3}` of the Hölder exponent.
pub fn holder_exponent_series(delta: f64) -> f64 {
    2.0 / PI.cbrt() * delta.powf(-2.0 / 3.0)
}
