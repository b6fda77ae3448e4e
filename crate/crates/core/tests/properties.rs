use hes_core::ascent::randomized_ascent;
use hes_core::bernstein::{bernstein_scalar, matrix_bernstein, BernsteinSpec};
use hes_core::ensembles::{build_ensemble, random_unit, EnsembleKind, EnsembleParams};
use hes_core::hamiltonian::{InstanceOptions, Landscape, SpinGlassInstance};
use hes_core::hermite::{
    cumulant_from_moments, gaussian_moment_identity, moment_from_cumulants, sphere_moment,
    MultiIndex,
};
use hes_core::mixture::{catalan, dyck_paths, MixtureSpec};
use hes_core::momentrep::{gaussian_moment_rep, mode_symmetrize, nuclear_norm, MatrixRep};
use hes_core::rng::stream;
use hes_core::spectral::{random_orthogonal, schatten};
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, &[r as u64, c as u64]);
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, seed);
    (&g + g.transpose()) / 2.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nu_is_convex_and_vanishes_at_zero(gammas in prop::collection::vec(0.0..2.0f64, 1..5), q in 0.0..=1.0f64) {
        prop_assume!(gammas.iter().any(|&g| g > 0.0));
        let m = MixtureSpec::new(gammas).unwrap();
        prop_assert_eq!(m.nu(0.0, 0).unwrap(), 0.0);
        prop_assert!(m.nu(q, 2).unwrap() >= 0.0);
    }

    #[test]
    fn pure_instances_are_homogeneous(k in 2usize..5, n in 3usize..8, seed in any::<u64>(), t in 0.1..1.0f64) {
        let inst = SpinGlassInstance::sample(n, MixtureSpec::pure(k, 1.0).unwrap(), seed, &InstanceOptions::default()).unwrap();
        let x = random_unit(n, seed ^ 1);
        let e = inst.energy(x.as_slice()).unwrap();
        let scaled = inst.energy((&x * t).as_slice()).unwrap();
        prop_assert!((scaled - t.powi(k as i32) * e).abs() <= 1e-12 * (1.0 + e.abs()));
        let g = inst.gradient(x.as_slice()).unwrap();
        prop_assert!((x.dot(&g) - k as f64 * e).abs() <= 1e-10 * (1.0 + e.abs()));
        let h = inst.hessian(x.as_slice()).unwrap();
        prop_assert!((&h - h.transpose()).amax() <= 1e-12 * (1.0 + h.amax()));
    }

    #[test]
    fn schatten_is_rotation_invariant(n in 2usize..12, p in 1u32..4, seed in any::<u64>()) {
        let m = symmetric(n, seed);
        let q = random_orthogonal(n, &mut stream(seed, &[7]));
        let rotated = &q * &m * q.transpose();
        let a = schatten(&m, 2 * p).unwrap();
        let b = schatten(&rotated, 2 * p).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(rel(a, b) <= 1e-9);
    }

    #[test]
    fn bernstein_reproduces_affine_functions(degree in 1u64..5000, x in -1.0..=1.0f64, c in -3.0..3.0f64) {
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.2, 0.1, degree).unwrap();
        let one = bernstein_scalar(|_| 1.0, &spec, x).unwrap();
        prop_assert!((one - 1.0).abs() <= 1e-12);
        let lin = bernstein_scalar(|y| c * y + 0.5, &spec, x).unwrap();
        prop_assert!((lin - (c * x + 0.5)).abs() <= 1e-11 * (1.0 + c.abs()));
    }

    #[test]
    fn matrix_bernstein_commutes_with_rotation(n in 2usize..10, degree in 10u64..2000, seed in any::<u64>()) {
        let spec = BernsteinSpec::linear(-1.0, 1.0, 0.3, 0.2, degree).unwrap();
        let mut rng = stream(seed, &[11]);
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = DMatrix::from_diagonal(&DVector::from_vec(lam));
        let q = random_orthogonal(n, &mut rng);
        let lhs = matrix_bernstein(&(&q * &d * q.transpose()), &spec).unwrap().matrix;
        let rhs = &q * matrix_bernstein(&d, &spec).unwrap().matrix * q.transpose();
        prop_assert!((lhs - rhs).amax() <= 1e-9);
    }

    #[test]
    fn symmetrization_is_an_orthogonal_projection(n in 2usize..4, rows in 1usize..3, cols in 1usize..3, seed in any::<u64>()) {
        let mk = |s: u64| {
            let mut r = MatrixRep::zeros(n, rows, cols).unwrap();
            r.data = gaussian_matrix(r.data.nrows(), r.data.ncols(), s);
            r
        };
        let a = mk(seed);
        let b = mk(seed ^ 0x55);
        let sa = mode_symmetrize(&a).unwrap();
        let sb = mode_symmetrize(&b).unwrap();
        let twice = mode_symmetrize(&sa).unwrap();
        prop_assert!((&twice.data - &sa.data).amax() <= 1e-12);
        prop_assert!((sa.pair(&b).unwrap() - a.pair(&sb).unwrap()).abs() <= 1e-12 * (1.0 + a.data.norm() * b.data.norm()));
    }

    #[test]
    fn gaussian_rep_nuclear_norm_scales(n in 2usize..4, c in 0.1..3.0f64, half in 1usize..4, seed in any::<u64>()) {
        let eta = 2 * half;
        let g = gaussian_matrix(n, n, seed);
        let s = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
        let base = nuclear_norm(&gaussian_moment_rep(&s, eta).unwrap()).unwrap();
        let scaled = nuclear_norm(&gaussian_moment_rep(&(&s * c), eta).unwrap()).unwrap();
        prop_assert!(rel(scaled, c.powi(half as i32) * base) <= 1e-9);
    }

    #[test]
    fn moment_cumulant_round_trip(
        atoms in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..6),
        idx in prop::collection::vec(0usize..3, 1..7),
    ) {
        let w = 1.0 / atoms.len() as f64;
        let moment = |ix: &[usize]| -> f64 { atoms.iter().map(|a| w * ix.iter().map(|&i| a[i]).product::<f64>()).sum() };
        let kappa = |ix: &[usize]| cumulant_from_moments(moment, ix).unwrap();
        let back = moment_from_cumulants(kappa, &idx).unwrap();
        prop_assert!((back - moment(&idx)).abs() <= 1e-12);
    }

    #[test]
    fn sphere_moments_against_gaussian(exps in prop::collection::vec(0u32..4, 1..8), extra in 0usize..3) {
        let alpha = MultiIndex::new(exps);
        prop_assume!(alpha.degree() <= 6);
        let n = alpha.n() + extra;
        let deg = alpha.degree();
        let sph = sphere_moment(&alpha, n).unwrap();
        let den: i128 = (0..deg / 2).map(|j| (n + 2 * j) as i128).product();
        if deg % 2 == 0 {
            prop_assert_eq!(sph * den, Ratio::from_integer(gaussian_moment_identity(&alpha) as i128));
        } else {
            prop_assert_eq!(sph, Ratio::from_integer(0));
        }
        // sum_i E[v_i^2 v^alpha] = E[v^alpha] on the unit sphere
        let mut padded = alpha.exps().to_vec();
        padded.resize(n, 0);
        let mut total = Ratio::from_integer(0);
        for i in 0..n {
            let mut e = padded.clone();
            e[i] += 2;
            total += sphere_moment(&MultiIndex::new(e), n).unwrap();
        }
        prop_assert_eq!(total, sph);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_on_the_schedule(n in 20usize..40, k in 2usize..7, delta in 0.1..0.3f64, seed in any::<u64>()) {
        let inst = SpinGlassInstance::sample(n, MixtureSpec::new(vec![1.0, 0.5, 0.7]).unwrap(), seed, &InstanceOptions::default()).unwrap();
        let t = randomized_ascent(&inst, k, delta, seed ^ 3).unwrap();
        prop_assert_eq!(t.steps.len(), k);
        prop_assert!(t.norm_residual() <= 1e-12);
        prop_assert!(t.orthogonality_residual() <= 1e-10);
        prop_assert!(t.sq_norm_residual() <= 1e-10);
    }

    #[test]
    fn ensembles_agree_on_the_sphere(kind in 0usize..3, seed in any::<u64>(), a in 0.0..3.0f64) {
        let (kind, params, n) = match kind {
            0 => (EnsembleKind::DegreeScaling, EnsembleParams::degree_scaling(a), 12),
            1 => (EnsembleKind::DirectSum, EnsembleParams::direct_sum(a), 12),
            _ => (EnsembleKind::SharedSum, EnsembleParams::shared_sum(1.0, a, 0.5), 8),
        };
        let ens = build_ensemble(kind, params, n, seed).unwrap();
        let x = random_unit(n, seed ^ 9);
        let raw = ens.raw().energy(x.as_slice()).unwrap();
        let ext = ens.extended().energy(x.as_slice()).unwrap();
        prop_assert!((raw - ext).abs() <= 1e-9 * (1.0 + raw.abs()));
    }
}

#[test]
fn catalan_counts_dyck_paths() {
    for q in 0..=8 {
        assert_eq!(catalan(q).unwrap(), dyck_paths(q).len() as u128);
    }
}
