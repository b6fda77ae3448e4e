//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. Set
//! `ACCEPTANCE_ONLY=3,9` to run a subset. The process exits nonzero when a
//! criterion fails in a way that is not one of the documented known failures.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use hes_core::ascent::{randomized_ascent_batch, verify_hes};
use hes_core::bernstein::{
    bernstein_ramp, matrix_bernstein, projector_gap, sc_mass_and_correlation, BernsteinSpec,
};
use hes_core::ensembles::{build_ensemble, compare_ascent, EnsembleKind, EnsembleParams};
use hes_core::hamiltonian::{InstanceOptions, SpinGlassInstance, Storage};
use hes_core::hermite::{
    cumulant_from_moments, gaussian_moment, moment_from_cumulants, sphere_moment, MultiIndex,
};
use hes_core::mixture::{
    catalan, dyck_paths, holder_exponent, holder_exponent_series, lambert_w0, MixtureSpec,
};
use hes_core::momentrep::{
    gaussian_moment_rep, holder_moment_bound, mode_symmetrize, nuclear_norm,
    strong_convexity_check, Polynomial,
};
use hes_core::rng::stream;
use hes_core::spectral::{eigh, goe, wigner_check};
use itertools::Itertools;
use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<Verdict, String>;

enum Verdict {
    Pass(String),
    Fail(String),
    /// Failure matching an analysed, documented failure mode.
    KnownFail(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn mixed() -> MixtureSpec {
    MixtureSpec::new(vec![1.0, 0.0, 1.0]).unwrap()
}

fn c1_alg_formula() -> Outcome {
    let tol = 1e-12;
    let r4 = MixtureSpec::pure(4, 1.0)
        .unwrap()
        .alg_threshold(tol)
        .map_err(|e| e.to_string())?;
    let r2 = MixtureSpec::pure(2, 1.0)
        .unwrap()
        .alg_threshold(tol)
        .map_err(|e| e.to_string())?;
    let rm = mixed().alg_threshold(tol).map_err(|e| e.to_string())?;
    // midpoint sum of sqrt(nu'') for nu = q^2 + q^4; q1 = 0 since nu' - q nu'' = -8q^3
    let pts = 1_000_000;
    let h = 1.0 / pts as f64;
    let riemann: f64 = (0..pts)
        .map(|i| {
            let q = (i as f64 + 0.5) * h;
            (2.0 + 12.0 * q * q).sqrt() * h
        })
        .sum();
    let e4 = (r4.alg_value - 3f64.sqrt()).abs();
    let e2 = (r2.alg_value - 2f64.sqrt()).abs();
    let em = (rm.alg_value - riemann).abs();
    Ok(verdict(
        e4 <= 1e-10 && e2 <= 1e-10 && em <= 1e-6,
        format!("|pure4 - sqrt3| = {e4:.2e}, |pure2 - sqrt2| = {e2:.2e}, |mixed - riemann| = {em:.2e} (ALG = {:.6})", rm.alg_value),
    ))
}

fn c2_wignerianity() -> Outcome {
    let rep = wigner_check(&mixed(), 300, 0.5, 4, 20, 2, &InstanceOptions::default())
        .map_err(|e| e.to_string())?;
    let m2 = rep.mean(2).ok_or("missing second moment")?;
    let m3 = rep.mean(3).ok_or("missing third moment")?;
    let m4 = rep.mean(4).ok_or("missing fourth moment")?;
    let ok = (m2 / 5.0 - 1.0).abs() <= 0.1
        && (m4 / 50.0 - 1.0).abs() <= 0.2
        && m3.abs() <= 0.1 * 5f64.powf(1.5);
    Ok(verdict(
        ok,
        format!("m2 = {m2:.4} (5), m3 = {m3:.4}, m4 = {m4:.3} (50)"),
    ))
}

fn c3_ascent_value() -> Outcome {
    let n = 400;
    let inst = SpinGlassInstance::sample(
        n,
        mixed(),
        2024,
        &InstanceOptions::with_storage(Storage::Streamed),
    )
    .map_err(|e| e.to_string())?;
    let seeds = [1, 2, 3, 4, 5];
    let trajs = randomized_ascent_batch(&inst, 40, 0.05, &seeds).map_err(|e| e.to_string())?;
    let alg = mixed()
        .alg_threshold(1e-12)
        .map_err(|e| e.to_string())?
        .alg_value;
    let mean = trajs.iter().map(|t| t.final_energy()).sum::<f64>() / trajs.len() as f64;
    let sq = trajs
        .iter()
        .map(|t| t.sq_norm_residual())
        .fold(0.0, f64::max);
    let orth = trajs
        .iter()
        .map(|t| t.orthogonality_residual())
        .fold(0.0, f64::max);
    Ok(verdict(
        mean >= 0.75 * alg && sq <= 1e-10 && orth <= 1e-10,
        format!("mean H/n = {mean:.4}, ratio to ALG = {:.4} (>= 0.75), sq-norm residual {sq:.1e}, orthogonality {orth:.1e}", mean / alg),
    ))
}

fn c4_hes_verifier() -> Outcome {
    let n = 200;
    let delta = 0.1;
    let inst = SpinGlassInstance::sample(n, mixed(), 77, &InstanceOptions::default())
        .map_err(|e| e.to_string())?;
    let rep = verify_hes(&inst, 10, delta, 200, 5).map_err(|e| e.to_string())?;
    let norm = rep.max_norm_residual();
    let orth = rep.max_orthogonality_residual();
    let third = rep.max_third_z();
    let op = rep.max_op_norm_ratio();
    let edge = rep
        .steps
        .iter()
        .map(|s| s.finite_sample_edge * delta * n as f64)
        .fold(0.0, f64::max);
    let rest_ok = norm <= 1e-12 && orth <= 1e-10 && third <= 5.0;
    let detail = format!(
        "step norm residual {norm:.1e}, orthogonality {orth:.1e}, max |third cumulant z| {third:.2}, \
         max op-norm x delta n {op:.3} (limit 1.3, sampling edge {edge:.3})"
    );
    if rest_ok && rep.op_norm_ok() {
        return Ok(Verdict::Pass(detail));
    }
    // 200 draws from a 20-dimensional sphere put the sample covariance's top
    // eigenvalue at the Marchenko-Pastur edge, above 1.3 / (delta n)
    if rest_ok && op <= 1.05 * edge {
        return Ok(Verdict::KnownFail(format!(
            "{detail}; operator-norm bound is below the sampling edge"
        )));
    }
    Ok(Verdict::Fail(detail))
}

fn c5_bernstein() -> Outcome {
    let n = 300;
    let eps = 0.2;
    let mut rng = stream(5, &[300]);
    let m = goe(n, &mut rng);
    let spec = BernsteinSpec::linear(-2.0, 2.0, 2.0 - 2.0 * eps / 3.0, eps / 3.0, 1)
        .and_then(|s| s.with_accuracy(eps))
        .map_err(|e| e.to_string())?;
    let mb = matrix_bernstein(&m, &spec).map_err(|e| e.to_string())?;
    let ev = eigh(&mb.matrix).map_err(|e| e.to_string())?.eigenvalues;
    let lo = ev.min();
    let op = ev.amax();
    let gap = projector_gap(&m, &spec, eps, None).map_err(|e| e.to_string())?;

    let s_eps = 0.05;
    let scalar = BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 1)
        .and_then(|s| s.with_accuracy(s_eps))
        .map_err(|e| e.to_string())?;
    let grid = 10_000;
    let mut sup: f64 = 0.0;
    for i in 0..grid {
        let x = -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
        let b = bernstein_ramp(&scalar, x).map_err(|e| e.to_string())?;
        sup = sup.max((b - scalar.ramp(x)).abs());
    }
    Ok(verdict(
        lo >= -1e-8 && op <= 1.0 + 1e-8 && gap.within_bound() && sup <= s_eps,
        format!(
            "degree {}: min eig {lo:.2e}, op {op:.6}, projector gap {:.4} <= {:.4}; scalar degree {}: sup error {sup:.4}",
            spec.degree, gap.gap, gap.bound, scalar.degree
        ),
    ))
}

fn c6_semicircle() -> Outcome {
    let rep = sc_mass_and_correlation(0.05, 0.01, None).map_err(|e| e.to_string())?;
    let detail = format!(
        "mass {:.6} vs sandwich [{:.6}, {:.6}], correlation {:.6} in [{:.6}, {:.6}], ratio {:.4} >= {:.2}",
        rep.quadrature_mass,
        rep.mass_lower,
        rep.mass_upper,
        rep.quadrature_correlation,
        rep.correlation_lower,
        rep.correlation_upper,
        rep.ratio,
        rep.ratio_lower
    );
    if rep.mass_in_sandwich && rep.ratio_ok {
        return Ok(Verdict::Pass(detail));
    }
    // the stated sandwich is empty at these constants
    if rep.ratio_ok && rep.mass_lower > rep.mass_upper {
        return Ok(Verdict::KnownFail(format!(
            "{detail}; sandwich is inverted"
        )));
    }
    Ok(Verdict::Fail(detail))
}

/// Number of perfect matchings of positions that pair equal labels.
fn pairings(labels: &[usize]) -> u64 {
    if labels.is_empty() {
        return 1;
    }
    let (first, rest) = labels.split_first().unwrap();
    (0..rest.len())
        .filter(|&j| rest[j] == *first)
        .map(|j| {
            let mut left = rest.to_vec();
            left.remove(j);
            pairings(&left)
        })
        .sum()
}

fn c7_identities() -> Outcome {
    // sphere vs Gaussian moments
    let mut checked = 0;
    for n in 1..=8usize {
        for alpha in MultiIndex::all_up_to(n, 6) {
            let deg = alpha.degree();
            let got = sphere_moment(&alpha, n).map_err(|e| e.to_string())?;
            let den: i128 = (0..deg / 2).map(|j| (n + 2 * j) as i128).product();
            let want = Ratio::new(pairings(&alpha.indices()) as i128, den);
            if got != want {
                return Ok(Verdict::Fail(format!(
                    "sphere moment {alpha:?} at n = {n}: {got} vs {want}"
                )));
            }
            if deg <= 4 {
                let mut sum = Ratio::from_integer(0);
                for i in 0..n {
                    let mut e = alpha.exps().to_vec();
                    e[i] += 2;
                    sum += sphere_moment(&MultiIndex::new(e), n).map_err(|e| e.to_string())?;
                }
                if sum != got {
                    return Ok(Verdict::Fail(format!(
                        "sum_i E v_i^2 v^alpha != E v^alpha for {alpha:?}"
                    )));
                }
            }
            checked += 1;
        }
    }

    // moment <-> cumulant round trip on a discrete law in R^3
    let atoms = [
        [0.3, -0.7, 0.1],
        [-0.5, 0.2, 0.9],
        [0.8, 0.4, -0.6],
        [-0.1, -0.9, 0.5],
    ];
    let probs = [0.1, 0.2, 0.3, 0.4];
    let moment = |idx: &[usize]| -> f64 {
        atoms
            .iter()
            .zip(probs)
            .map(|(a, p)| p * idx.iter().map(|&i| a[i]).product::<f64>())
            .sum()
    };
    let kappa = |idx: &[usize]| cumulant_from_moments(moment, idx).unwrap();
    let mut round_trip: f64 = 0.0;
    for len in 1..=6 {
        for idx in (0..3).combinations_with_replacement(len) {
            let back = moment_from_cumulants(kappa, &idx).map_err(|e| e.to_string())?;
            round_trip = round_trip.max((back - moment(&idx)).abs());
        }
    }

    // Isserlis against Monte Carlo, one index list per (n, degree)
    let samples = 1_000_000;
    let mut worst_z: f64 = 0.0;
    for n in 1..=4usize {
        let mut rng = stream(7, &[n as u64]);
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let c = &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
        let l = c
            .clone()
            .cholesky()
            .ok_or("covariance not positive definite")?
            .l();
        let lists: Vec<Vec<usize>> = (1..=6)
            .map(|d| (0..d).map(|_| rng.random_range(0..n)).collect())
            .collect();
        let mut sum = vec![0.0; lists.len()];
        let mut sum_sq = vec![0.0; lists.len()];
        for _ in 0..samples {
            let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &l * z;
            for (j, idx) in lists.iter().enumerate() {
                let v: f64 = idx.iter().map(|&i| x[i]).product();
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        for (j, idx) in lists.iter().enumerate() {
            let mean = sum[j] / samples as f64;
            let var =
                (sum_sq[j] / samples as f64 - mean * mean) * samples as f64 / (samples - 1) as f64;
            let se = (var / samples as f64).sqrt();
            let exact = gaussian_moment(
                &MultiIndex::from_indices(n, idx).map_err(|e| e.to_string())?,
                &c,
            )
            .map_err(|e| e.to_string())?;
            worst_z = worst_z.max((mean - exact).abs() / se);
        }
    }

    // Dyck paths by brute force over all +-1 words
    for q in 0..=8u32 {
        let len = 2 * q;
        let brute = (0u32..1 << len)
            .filter(|w| {
                let mut h = 0i32;
                for b in 0..len {
                    h += if w >> b & 1 == 1 { 1 } else { -1 };
                    if h < 0 {
                        return false;
                    }
                }
                h == 0
            })
            .count() as u128;
        let cat = catalan(q).map_err(|e| e.to_string())?;
        let listed = dyck_paths(q).len() as u128;
        if brute != cat || brute != listed {
            return Ok(Verdict::Fail(format!(
                "q = {q}: brute {brute}, catalan {cat}, listed {listed}"
            )));
        }
    }

    Ok(verdict(
        round_trip <= 1e-12 && worst_z <= 3.0,
        format!("{checked} sphere moments exact, round trip {round_trip:.1e}, Isserlis max z {worst_z:.2}, Dyck q <= 8 exact"),
    ))
}

fn random_sigma(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, &[n as u64]);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2
}

fn c8_moment_reps() -> Outcome {
    let s = random_sigma(3, 8);
    let rep = gaussian_moment_rep(&s, 4).map_err(|e| e.to_string())?;
    let sym = mode_symmetrize(&rep).map_err(|e| e.to_string())?;
    let mut entry: f64 = 0.0;
    for r in 0..sym.data.nrows() {
        for c in 0..sym.data.ncols() {
            let t = sym.tuple(r, c);
            let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
            let exact = s[(i, j)] * s[(k, l)] + s[(i, k)] * s[(j, l)] + s[(i, l)] * s[(j, k)];
            entry = entry.max((sym.data[(r, c)] - exact).abs());
        }
    }
    let nuc = nuclear_norm(&rep).map_err(|e| e.to_string())?;
    let nuc_err = (nuc - 3.0 * s.norm_squared()).abs();

    let s8 = random_sigma(8, 88);
    let mut worst = f64::INFINITY;
    for seed in 0..50 {
        let p = Polynomial::random(8, 4, seed);
        let hb = holder_moment_bound(&p, &s8, 4).map_err(|e| e.to_string())?;
        worst = worst.min(hb.slack);
    }
    Ok(verdict(
        entry <= 1e-12 && nuc_err <= 1e-10 && worst >= -1e-10,
        format!("entrywise {entry:.1e}, |nuclear - 3|S|_F^2| = {nuc_err:.1e}, min Holder slack {worst:.3e}"),
    ))
}

fn c9_ensembles() -> Outcome {
    let n = 200;
    let seeds: Vec<u64> = (1..=20).collect();
    let ens = build_ensemble(
        EnsembleKind::DegreeScaling,
        EnsembleParams::degree_scaling(3.0),
        n,
        9,
    )
    .map_err(|e| e.to_string())?;
    let cmp = compare_ascent(&ens, 30, 0.05, &seeds).map_err(|e| e.to_string())?;
    let ctrl = build_ensemble(
        EnsembleKind::DegreeScaling,
        EnsembleParams::degree_scaling(0.0),
        n,
        9,
    )
    .map_err(|e| e.to_string())?;
    let same = compare_ascent(&ctrl, 30, 0.05, &seeds).map_err(|e| e.to_string())?;
    let identical = same.identical.iter().all(|&b| b);
    Ok(verdict(
        cmp.ci_low > 0.0 && identical,
        format!(
            "mean gain {:.4}, 95% CI [{:.4}, {:.4}]; alpha2 = 0 control identical for {}/{} seeds",
            cmp.mean_difference,
            cmp.ci_low,
            cmp.ci_high,
            same.identical.iter().filter(|&&b| b).count(),
            seeds.len()
        ),
    ))
}

fn c10_analytic() -> Outcome {
    let branch = -1.0 / std::f64::consts::E;
    let pts = 10_000;
    let (lo, hi) = (1e-6f64.ln(), (1e3 - branch).ln());
    let mut resid: f64 = 0.0;
    for i in 0..pts {
        let x = branch + (lo + (hi - lo) * i as f64 / (pts - 1) as f64).exp();
        let w = lambert_w0(x).map_err(|e| e.to_string())?;
        resid = resid.max((w * w.exp() - x).abs());
    }
    let mut series: f64 = 0.0;
    for delta in [0.05, 0.1, 0.25, 0.5] {
        let raw = holder_exponent(1e-3, delta).map_err(|e| e.to_string())?.raw;
        series = series.max((raw / holder_exponent_series(delta) - 1.0).abs());
    }
    let mut convex = true;
    let mut worst = f64::INFINITY;
    for k in 1..=3 {
        for dn in [10.0, 100.0] {
            let rep = strong_convexity_check(k, dn, 50).map_err(|e| e.to_string())?;
            convex &= rep.passed;
            worst = worst.min(rep.worst_slack);
        }
    }
    Ok(verdict(
        resid <= 1e-12 && series <= 0.02 && convex,
        format!("lambert residual {resid:.1e}, holder vs series {:.3}%, convexity worst slack {worst:.2e}", 100.0 * series),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "alg formula", c1_alg_formula),
        (2, "wignerianity", c2_wignerianity),
        (3, "ascent value", c3_ascent_value),
        (4, "hes verifier", c4_hes_verifier),
        (5, "bernstein suite", c5_bernstein),
        (6, "semicircle constants", c6_semicircle),
        (7, "exact identities", c7_identities),
        (8, "moment representations", c8_moment_reps),
        (9, "ensembles", c9_ensembles),
        (10, "analytic spot-checks", c10_analytic),
    ];
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|set| !set.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = run();
        let secs = t0.elapsed().as_secs_f64();
        let line = match outcome {
            Ok(Verdict::Pass(d)) => format!("PASS {d}"),
            Ok(Verdict::KnownFail(d)) => format!("FAIL (known) {d}"),
            Ok(Verdict::Fail(d)) => {
                unexpected += 1;
                format!("FAIL {d}")
            }
            Err(e) => {
                unexpected += 1;
                format!("FAIL error: {e}")
            }
        };
        println!("criterion {id:>2} {name}: {line} [{secs:.1} s]");
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
