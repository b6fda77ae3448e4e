//! Eigendecompositions, Schatten norms and the trace-moment Wignerianity check.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{InstanceOptions, SpinGlassInstance};
use crate::mixture::{catalan, MixtureSpec};
use crate::rng::{derive_seed, stream};

/// Relative asymmetry tolerated before `eigh` refuses a matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Descending.
    pub eigenvalues: DVector<f64>,
    /// Column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q diag(f(lambda)) Q^T`.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * q.transpose()
    }

    /// `Q Lambda Q^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.apply(|l| l)
    }

    /// Columns spanning the top `m` eigenvalues.
    pub fn top(&self, m: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, m.min(self.dim())).into_owned()
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Full symmetric eigendecomposition with eigenvalues in descending order.
pub fn eigh(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let scale = max_abs(m);
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge (n = {n})")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `Tr[M^p]` for a positive even `p`, computed from the spectrum.
pub fn schatten(m: &DMatrix<f64>, p: u32) -> Result<f64> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "schatten order must be positive and even, got {p}"
        )));
    }
    Ok(eigh(m)?.eigenvalues.iter().map(|l| l.powi(p as i32)).sum())
}

/// Uniform point on the sphere of the given radius in `R^n`.
pub fn sphere_point<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = g.norm();
        if norm > 0.0 {
            return g * (radius / norm);
        }
    }
}

/// GOE sample scaled so the spectrum fills `[-2, 2]`: off-diagonal variance
/// `1/n`, diagonal variance `2/n`.
pub fn goe<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) / (2.0 * n as f64).sqrt()
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign fixed).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// `(1/n) Tr[(M/n)^j]` for `j = 1..=orders`, from the spectrum of `M`.
pub fn normalized_trace_moments(eigenvalues: &DVector<f64>, orders: usize) -> Vec<f64> {
    let n = eigenvalues.len() as f64;
    (1..=orders)
        .map(|j| {
            eigenvalues
                .iter()
                .map(|l| (l / n).powi(j as i32))
                .sum::<f64>()
                / n
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerReport {
    pub q: f64,
    pub n: usize,
    pub replicas: usize,
    /// Moment orders `1..=p_max`.
    pub orders: Vec<usize>,
    pub means: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// `C_j nu''(q)^j` for order `2j`, zero for odd orders.
    pub targets: Vec<f64>,
    /// Mean over target for even orders; `|mean| / nu''(q)^{order/2}` for odd ones.
    pub ratios: Vec<f64>,
    /// Mean and standard deviation of `lambda_max(H''/n) / (2 sqrt(nu''(q)))`.
    pub edge_ratio_mean: f64,
    pub edge_ratio_sd: f64,
}

impl WignerReport {
    pub fn mean(&self, order: usize) -> Option<f64> {
        self.means.get(order.checked_sub(1)?).copied()
    }

    pub fn ratio(&self, order: usize) -> Option<f64> {
        self.ratios.get(order.checked_sub(1)?).copied()
    }
}

/// `C_j nu''(q)^j`, the semicircle target for the order-`2j` trace moment.
pub fn wigner_target(mixture: &MixtureSpec, q: f64, j: u32) -> Result<f64> {
    let c = catalan(j)? as f64;
    Ok(c * mixture.nu(q, 2)?.powi(j as i32))
}

/// Monte-Carlo trace moments of `H''(sigma)/n` at radius `sqrt(q)`.
///
/// Every replica draws a fresh instance and a fresh uniform `sigma`; replica
/// `r` uses streams derived from `(seed, r)`, so results do not depend on the
/// thread count.
pub fn wigner_check(
    mixture: &MixtureSpec,
    n: usize,
    q: f64,
    p_max: usize,
    replicas: usize,
    seed: u64,
    options: &InstanceOptions,
) -> Result<WignerReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter(
            "wigner_check needs at least two replicas".into(),
        ));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("radius q = {q} outside (0, 1]")));
    }
    if p_max == 0 || p_max % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "p_max must be positive and even, got {p_max}"
        )));
    }
    let nu2 = mixture.nu(q, 2)?;
    let per_replica: Vec<(Vec<f64>, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, f64)> {
            let inst = SpinGlassInstance::sample(
                n,
                mixture.clone(),
                derive_seed(seed, &[r as u64, 0]),
                options,
            )?;
            let sigma = sphere_point(n, q.sqrt(), &mut stream(seed, &[r as u64, 1]));
            let h = inst.hessian(sigma.as_slice())?;
            let eig = eigh(&h)?;
            let edge = eig.eigenvalues[0] / n as f64 / (2.0 * nu2.sqrt());
            Ok((normalized_trace_moments(&eig.eigenvalues, p_max), edge))
        })
        .collect::<Result<_>>()?;

    let reps = replicas as f64;
    let mut means = vec![0.0; p_max];
    let mut standard_errors = vec![0.0; p_max];
    for j in 0..p_max {
        let vals: Vec<f64> = per_replica.iter().map(|(m, _)| m[j]).collect();
        let mean = vals.iter().sum::<f64>() / reps;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        means[j] = mean;
        standard_errors[j] = (var / reps).sqrt();
    }
    let mut targets = vec![0.0; p_max];
    let mut ratios = vec![0.0; p_max];
    for order in 1..=p_max {
        if order % 2 == 0 {
            targets[order - 1] = wigner_target(mixture, q, (order / 2) as u32)?;
            ratios[order - 1] = means[order - 1] / targets[order - 1];
        } else {
            ratios[order - 1] = means[order - 1].abs() / nu2.powf(order as f64 / 2.0);
        }
    }
    let edges: Vec<f64> = per_replica.iter().map(|(_, e)| *e).collect();
    let edge_ratio_mean = edges.iter().sum::<f64>() / reps;
    let edge_ratio_sd = (edges
        .iter()
        .map(|e| (e - edge_ratio_mean).powi(2))
        .sum::<f64>()
        / (reps - 1.0))
        .sqrt();
    Ok(WignerReport {
        q,
        n,
        replicas,
        orders: (1..=p_max).collect(),
        means,
        standard_errors,
        targets,
        ratios,
        edge_ratio_mean,
        edge_ratio_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Storage;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        goe(n, &mut rng)
    }

    #[test]
    fn eigh_small_examples() {
        let e = eigh(&DMatrix::identity(5, 5)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, -2.0]));
        let e = eigh(&d).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[3.0, 1.0, -2.0]);
        assert!((e.eigenvectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((e.eigenvectors[(0, 1)].abs() - 1.0).abs() < 1e-14);
        assert!((e.eigenvectors[(2, 2)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_random_matrix() {
        let m = random_symmetric(50, 3);
        let e = eigh(&m).unwrap();
        let resid = (&m - e.reconstruct()).norm();
        assert!(resid <= 1e-9 * m.norm(), "residual {resid}");
        let qtq = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((qtq - DMatrix::identity(50, 50)).amax() < 1e-10);
        assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigh_rejects_asymmetric() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(matches!(eigh(&m), Err(Error::Domain(_))));
    }

    #[test]
    fn schatten_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!((schatten(&d, 2).unwrap() - 2.0).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert!((schatten(&d, 4).unwrap() - 16.0).abs() < 1e-12);
        let m = random_symmetric(30, 5);
        let fro2 = m.norm_squared();
        assert!((schatten(&m, 2).unwrap() - fro2).abs() < 1e-10 * fro2.max(1.0));
        assert!(schatten(&m, 3).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let q = random_orthogonal(12, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(12, 12)).amax() < 1e-12);
    }

    #[test]
    fn targets_match_catalan_scaling() {
        let mix = MixtureSpec::new(vec![1.0, 0.0, 1.0]).unwrap();
        let nu2 = mix.nu(0.5, 2).unwrap();
        assert!((nu2 - 5.0).abs() < 1e-14);
        let cat = [1.0, 2.0, 5.0, 14.0];
        for j in 1..=4u32 {
            let t = wigner_target(&mix, 0.5, j).unwrap();
            assert_eq!(t, cat[j as usize - 1] * nu2.powi(j as i32));
        }
    }

    #[test]
    fn pure_two_spin_second_moment() {
        let mix = MixtureSpec::pure(2, 1.0).unwrap();
        let opts = InstanceOptions::with_storage(Storage::Dense);
        let rep = wigner_check(&mix, 300, 0.7, 4, 4, 11, &opts).unwrap();
        // nu'' = 2 everywhere; second moment ratio is 1 up to O(n^{-1/2}) noise
        assert!((rep.ratio(2).unwrap() - 1.0).abs() < 0.05, "{rep:?}");
        assert!((rep.ratio(4).unwrap() - 1.0).abs() < 0.1, "{rep:?}");
        assert!((rep.edge_ratio_mean - 1.0).abs() < 0.1);
    }

    #[test]
    fn wigner_check_is_reproducible_and_validates() {
        let mix = MixtureSpec::new(vec![1.0, 0.0, 1.0]).unwrap();
        let opts = InstanceOptions::default();
        let a = wigner_check(&mix, 20, 0.5, 4, 3, 5, &opts).unwrap();
        let b = wigner_check(&mix, 20, 0.5, 4, 3, 5, &opts).unwrap();
        assert_eq!(a, b);
        assert!(wigner_check(&mix, 20, 0.5, 4, 1, 5, &opts).is_err());
        assert!(wigner_check(&mix, 20, 1.5, 4, 3, 5, &opts).is_err());
        assert!(wigner_check(&mix, 20, 0.5, 3, 3, 5, &opts).is_err());
    }
}
