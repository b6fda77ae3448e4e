//! Subcommand bodies. Each validates its section, computes everything in
//! memory and hands back the files to write; nothing touches the disk here.

use std::fmt::Write as _;

use hes_core::ascent::{
    deterministic_ascent, float17, randomized_ascent, verify_hes_with, HesOptions, Trajectory,
};
use hes_core::bernstein::{
    bernstein_ramp, matrix_bernstein, projector_gap, sc_mass_and_correlation, BernsteinSpec,
};
use hes_core::ensembles::{build_ensemble, compare_ascent, EnsembleKind, EnsembleParams};
use hes_core::hamiltonian::{InstanceOptions, SpinGlassInstance};
use hes_core::hermite::{
    cumulant_from_moments, gaussian_moment_identity, gaussian_moment_list, hermite_inner,
    moment_from_cumulants, sphere_moment, MultiIndex,
};
use hes_core::mixture::{catalan, dyck_paths, MixtureSpec};
use hes_core::momentrep::{
    gaussian_moment_matrix, gaussian_moment_rep, gaussian_rep_nuclear_closed_form,
    holder_moment_bound, mode_symmetrize, nuclear_norm, two_step_check, Polynomial,
};
use hes_core::rng::{derive_seed, stream};
use hes_core::spectral::{eigh, goe, wigner_check};
use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Method};

const INSTANCE: u64 = 1;
const RUN: u64 = 2;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

pub struct Outcome {
    pub result: Value,
    pub csv: Option<String>,
    pub checks: Vec<Check>,
    /// Effective configuration section, echoed in the manifest.
    pub config: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    AlgThreshold,
    Ascend,
    VerifyHes,
    WignerCheck,
    BernsteinCheck,
    MomentCheck,
    EnsembleCompare,
    Identities,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::AlgThreshold => "alg-threshold",
            Self::Ascend => "ascend",
            Self::VerifyHes => "verify-hes",
            Self::WignerCheck => "wigner-check",
            Self::BernsteinCheck => "bernstein-check",
            Self::MomentCheck => "moment-check",
            Self::EnsembleCompare => "ensemble-compare",
            Self::Identities => "identities",
        }
    }
}

fn core<T>(r: hes_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub fn run(sub: Subcommand, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    match sub {
        Subcommand::AlgThreshold => alg_threshold(cfg),
        Subcommand::Ascend => ascend(cfg, seed),
        Subcommand::VerifyHes => verify(cfg, seed),
        Subcommand::WignerCheck => wigner(cfg, seed),
        Subcommand::BernsteinCheck => bernstein(cfg, seed),
        Subcommand::MomentCheck => moments(cfg, seed),
        Subcommand::EnsembleCompare => ensembles(cfg, seed),
        Subcommand::Identities => identities(cfg),
    }
}

fn alg_threshold(cfg: &ExperimentConfig) -> Result<Outcome, String> {
    let c = &cfg.alg_threshold;
    let mix = c.validate()?;
    let res = core(mix.alg_threshold(c.quad_tol))?;
    let targets = core(mix.energy_targets(c.k))?;
    // midpoint sum of sqrt(nu'') over [q1, 1] plus the boundary term
    let pts = c.riemann_points;
    let h = (1.0 - res.q1) / pts as f64;
    let root = |q: f64| mix.nu(q, 2).map(|v| v.max(0.0).sqrt());
    let mut midpoint = core(root(res.q1))? * res.q1;
    for i in 0..pts {
        midpoint += core(root(res.q1 + (i as f64 + 0.5) * h))? * h;
    }
    let gap = (res.alg_value - midpoint).abs();
    let mut csv = String::from("step,per_step,cumulative\n");
    for i in 0..c.k {
        let _ = writeln!(
            csv,
            "{},{},{}",
            i + 1,
            float17(targets.per_step[i]),
            float17(targets.cumulative[i])
        );
    }
    Ok(Outcome {
        result: json!({ "threshold": res, "midpoint": midpoint, "targets": targets }),
        csv: Some(csv),
        checks: vec![check(
            "midpoint_agreement",
            gap <= 1e-6,
            format!("|alg - midpoint| = {gap:e}"),
        )],
        config: to_value(c),
    })
}

fn instance(
    n: usize,
    mix: MixtureSpec,
    seed: u64,
    storage: hes_core::hamiltonian::Storage,
) -> Result<SpinGlassInstance, String> {
    core(SpinGlassInstance::sample(
        n,
        mix,
        derive_seed(seed, &[INSTANCE]),
        &InstanceOptions::with_storage(storage),
    ))
}

fn ascend(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.ascend;
    let mix = c.validate()?;
    let alg = core(mix.alg_threshold(1e-12))?.alg_value;
    let inst = instance(c.n, mix, seed, c.storage)?;
    let run_seed = derive_seed(seed, &[RUN]);
    let t: Trajectory = match c.method {
        Method::Randomized => core(randomized_ascent(&inst, c.k, c.delta, run_seed))?,
        Method::Deterministic => core(deterministic_ascent(&inst, c.k, c.eps, run_seed))?,
    };
    let sq = t.sq_norm_residual();
    let orth = t.orthogonality_residual();
    let result = json!({
        "n": c.n,
        "k": c.k,
        "method": c.method,
        "final_energy": t.final_energy(),
        "alg_value": alg,
        "ratio": t.final_energy() / alg,
        "norm_residual": t.norm_residual(),
        "sq_norm_residual": sq,
        "orthogonality_residual": orth,
        "eigenspace_dims": t.eigenspace_dims,
        "condition_met": t.condition_met,
    });
    Ok(Outcome {
        result,
        csv: Some(t.to_csv()),
        checks: vec![
            check(
                "sq_norm_schedule",
                sq <= c.tol,
                format!("max | |sigma_i|^2 - i/k | = {sq:e}"),
            ),
            check(
                "orthogonality",
                orth <= c.tol,
                format!("max |<v_i, sigma_(i-1)>| = {orth:e}"),
            ),
        ],
        config: to_value(c),
    })
}

fn verify(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.verify_hes;
    let mix = c.validate()?;
    let inst = instance(c.n, mix, seed, c.storage)?;
    let opts = HesOptions {
        tol: c.tol,
        projections: c.projections,
        bootstrap: c.bootstrap,
        surrogate_accuracy: c.surrogate_accuracy,
    };
    let rep = core(verify_hes_with(
        &inst,
        c.k,
        c.delta,
        c.replicas,
        derive_seed(seed, &[RUN]),
        &opts,
    ))?;
    let mut csv = String::from(
        "step,eigenspace_dim,op_norm,op_norm_se,op_norm_limit,finite_sample_edge,max_third_z,max_fourth_z,ldp_residual,projector_distance,norm_residual,orthogonality_residual\n",
    );
    for s in &rep.steps {
        let zmax =
            |v: &[hes_core::ascent::Projected]| v.iter().map(|p| p.z().abs()).fold(0.0, f64::max);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.step,
            s.eigenspace_dim,
            float17(s.op_norm),
            float17(s.op_norm_se),
            float17(s.op_norm_limit),
            float17(s.finite_sample_edge),
            float17(zmax(&s.third_cumulants)),
            float17(zmax(&s.fourth_cumulants)),
            float17(s.ldp_residual),
            float17(s.projector_distance),
            float17(s.norm_residual),
            float17(s.orthogonality_residual)
        );
    }
    let checks = vec![
        check(
            "step_norms",
            rep.max_norm_residual() <= 1e-12,
            format!("{:e}", rep.max_norm_residual()),
        ),
        check(
            "orthogonality",
            rep.max_orthogonality_residual() <= 1e-10,
            format!("{:e}", rep.max_orthogonality_residual()),
        ),
        check(
            "operator_norm",
            rep.op_norm_ok(),
            format!(
                "max op norm x delta n = {:.4}, limit {:.4}",
                rep.max_op_norm_ratio(),
                1.0 + c.tol
            ),
        ),
        check(
            "third_cumulants",
            rep.max_third_z() <= c.max_z,
            format!("max |z| = {:.3}", rep.max_third_z()),
        ),
    ];
    Ok(Outcome {
        result: to_value(&rep),
        csv: Some(csv),
        checks,
        config: to_value(c),
    })
}

fn wigner(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.wigner_check;
    let mix = c.validate()?;
    let nu2 = core(mix.nu(c.q, 2))?;
    let opts = InstanceOptions::with_storage(c.storage);
    let rep = core(wigner_check(
        &mix,
        c.n,
        c.q,
        c.p_max,
        c.replicas,
        derive_seed(seed, &[INSTANCE]),
        &opts,
    ))?;
    let mut csv = String::from("order,mean,standard_error,target,ratio\n");
    for i in 0..rep.orders.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            rep.orders[i],
            float17(rep.means[i]),
            float17(rep.standard_errors[i]),
            float17(rep.targets[i]),
            float17(rep.ratios[i])
        );
    }
    let m = |o: usize| rep.mean(o).unwrap_or(f64::NAN);
    let band = |o: usize, tol: f64| (m(o) / rep.targets[o - 1] - 1.0).abs() <= tol;
    let checks = vec![
        check(
            "second_moment",
            band(2, c.tol2),
            format!("{:.6} vs {:.6}", m(2), rep.targets[1]),
        ),
        check(
            "third_moment",
            m(3).abs() <= c.tol3 * nu2.powf(1.5),
            format!("{:.6}", m(3)),
        ),
        check(
            "fourth_moment",
            band(4, c.tol4),
            format!("{:.6} vs {:.6}", m(4), rep.targets[3]),
        ),
    ];
    Ok(Outcome {
        result: to_value(&rep),
        csv: Some(csv),
        checks,
        config: to_value(c),
    })
}

fn bernstein(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.bernstein_check;
    c.validate()?;
    let m = goe(c.n, &mut stream(seed, &[INSTANCE]));
    let spec = core(
        BernsteinSpec::linear(-2.0, 2.0, 2.0 - 2.0 * c.eps / 3.0, c.eps / 3.0, 1)
            .and_then(|s| s.with_accuracy(c.eps)),
    )?;
    let mb = core(matrix_bernstein(&m, &spec))?;
    let ev = core(eigh(&mb.matrix))?.eigenvalues;
    let (lo, op) = (ev.min(), ev.amax());
    let gap = core(projector_gap(&m, &spec, c.eps, None))?;

    let scalar = core(
        BernsteinSpec::linear(-1.0, 1.0, 0.5, 0.1, 1).and_then(|s| s.with_accuracy(c.scalar_eps)),
    )?;
    let mut csv = String::from("x,ramp,bernstein,error\n");
    let mut sup: f64 = 0.0;
    for i in 0..c.grid {
        let x = -1.0 + 2.0 * i as f64 / (c.grid - 1) as f64;
        let b = core(bernstein_ramp(&scalar, x))?;
        let r = scalar.ramp(x);
        sup = sup.max((b - r).abs());
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            float17(x),
            float17(r),
            float17(b),
            float17(b - r)
        );
    }
    let sc = core(sc_mass_and_correlation(c.phi, c.sc_eps, None))?;
    let checks = vec![
        check("psd", lo >= -1e-8, format!("min eigenvalue {lo:e}")),
        check(
            "contraction",
            op <= 1.0 + 1e-8,
            format!("operator norm {op}"),
        ),
        check(
            "projector_gap",
            gap.within_bound(),
            format!("{} <= {}", gap.gap, gap.bound),
        ),
        check(
            "scalar_accuracy",
            sup <= c.scalar_eps,
            format!("sup error {sup} at degree {}", scalar.degree),
        ),
        check(
            "semicircle_sandwich",
            sc.mass_in_sandwich,
            format!(
                "{} in [{}, {}]",
                sc.quadrature_mass, sc.mass_lower, sc.mass_upper
            ),
        ),
        check(
            "semicircle_ratio",
            sc.ratio_ok,
            format!("{} >= {}", sc.ratio, sc.ratio_lower),
        ),
    ];
    let result = json!({
        "matrix_degree": spec.degree,
        "min_eigenvalue": lo,
        "operator_norm": op,
        "clamped": mb.clamped,
        "projector_gap": gap,
        "scalar_degree": scalar.degree,
        "scalar_sup_error": sup,
        "semicircle": sc,
    });
    Ok(Outcome {
        result,
        csv: Some(csv),
        checks,
        config: to_value(c),
    })
}

fn moments(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.moment_check;
    c.validate()?;
    let g = goe(c.n, &mut stream(seed, &[INSTANCE]));
    let sigma = &g * &g + DMatrix::identity(c.n, c.n) * 0.2;
    let rep = core(gaussian_moment_rep(&sigma, c.eta))?;
    let sym = core(mode_symmetrize(&rep))?;
    let exact = core(gaussian_moment_matrix(&sigma, c.eta / 2, c.eta / 2))?;
    let scale = exact.data.amax().max(1.0);
    let entry = (&sym.data - &exact.data).amax();
    let nuc = core(nuclear_norm(&rep))?;
    let closed = gaussian_rep_nuclear_closed_form(&sigma, c.eta);
    let nuc_rel = (nuc - closed).abs() / closed;

    let mut csv = String::from("polynomial,expectation,bound,slack\n");
    let mut worst = f64::INFINITY;
    for p in 0..c.polynomials {
        let poly = Polynomial::random(c.n, c.eta, derive_seed(seed, &[RUN, p as u64]));
        let hb = core(holder_moment_bound(&poly, &sigma, c.eta))?;
        worst = worst.min(hb.slack);
        let _ = writeln!(
            csv,
            "{p},{},{},{}",
            float17(hb.lhs),
            float17(hb.rhs),
            float17(hb.slack)
        );
    }
    let two = core(two_step_check(derive_seed(seed, &[3]), c.two_step_samples))?;
    let checks = vec![
        check(
            "symmetrized_rep",
            entry <= 1e-12 * scale,
            format!("max entry error {entry:e}"),
        ),
        check(
            "nuclear_closed_form",
            nuc_rel <= 1e-10,
            format!("{nuc} vs {closed}"),
        ),
        check(
            "holder_direction",
            worst >= -1e-10,
            format!("min slack {worst:e}"),
        ),
        check(
            "two_step_bound",
            two.holds,
            format!("nuclear {} <= {}", two.nuclear_norm, two.bound),
        ),
    ];
    let result = json!({
        "n": c.n,
        "eta": c.eta,
        "max_entry_error": entry,
        "nuclear_norm": nuc,
        "nuclear_closed_form": closed,
        "min_holder_slack": worst,
        "two_step": two,
    });
    Ok(Outcome {
        result,
        csv: Some(csv),
        checks,
        config: to_value(c),
    })
}

fn ensembles(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, String> {
    let c = &cfg.ensemble_compare;
    c.validate()?;
    let mut params = match c.kind {
        EnsembleKind::DegreeScaling => EnsembleParams::degree_scaling(c.alpha2.unwrap_or(3.0)),
        EnsembleKind::DirectSum => EnsembleParams::direct_sum(c.alpha2.unwrap_or(1.0)),
        EnsembleKind::SharedSum => EnsembleParams::shared_sum(
            c.alpha4.unwrap_or(1.0),
            c.alpha6.unwrap_or(1.0),
            c.alpha8.unwrap_or(1.0),
        ),
    };
    for (slot, v) in [
        (&mut params.alpha2, c.alpha2),
        (&mut params.alpha4, c.alpha4),
        (&mut params.alpha6, c.alpha6),
        (&mut params.alpha8, c.alpha8),
        (&mut params.exponent, c.exponent),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    let ens = core(build_ensemble(
        c.kind,
        params,
        c.n,
        derive_seed(seed, &[INSTANCE]),
    ))?;
    let seeds: Vec<u64> = (0..c.runs as u64)
        .map(|r| derive_seed(seed, &[RUN, r]))
        .collect();
    let cmp = core(compare_ascent(&ens, c.k, c.delta, &seeds))?;
    let checks = vec![check(
        "extended_gain",
        cmp.ci_low > 0.0,
        format!(
            "mean {} with 95% interval [{}, {}]",
            cmp.mean_difference, cmp.ci_low, cmp.ci_high
        ),
    )];
    Ok(Outcome {
        result: to_value(&cmp),
        csv: Some(cmp.to_csv()),
        checks,
        config: to_value(c),
    })
}

fn pairings(labels: &[usize]) -> u64 {
    let Some((first, rest)) = labels.split_first() else {
        return 1;
    };
    (0..rest.len())
        .filter(|&j| rest[j] == *first)
        .map(|j| {
            let mut left = rest.to_vec();
            left.remove(j);
            pairings(&left)
        })
        .sum()
}

fn identities(cfg: &ExperimentConfig) -> Result<Outcome, String> {
    let c = &cfg.identities;
    c.validate()?;
    let mut sphere_ok = true;
    let mut sphere_count = 0usize;
    for n in 1..=c.max_n {
        for alpha in MultiIndex::all_up_to(n, c.max_degree) {
            let deg = alpha.degree();
            let s = core(sphere_moment(&alpha, n))?;
            let den: i128 = (0..deg / 2).map(|j| (n + 2 * j) as i128).product();
            let from_matchings = Ratio::new(pairings(&alpha.indices()) as i128, den);
            let from_products = Ratio::new(
                gaussian_moment_identity(&alpha) as i128 * (1 - (deg % 2) as i128),
                den,
            );
            sphere_ok &= s == from_matchings && s == from_products;
            sphere_count += 1;
        }
    }

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
    let kappa = |idx: &[usize]| cumulant_from_moments(moment, idx).unwrap_or(f64::NAN);
    let mut round_trip: f64 = 0.0;
    let mut tuples = vec![Vec::new()];
    for _ in 0..c.cumulant_length {
        tuples = tuples
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                let start = t.last().copied().unwrap_or(0);
                (start..3).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
        for t in &tuples {
            round_trip = round_trip.max((core(moment_from_cumulants(kappa, t))? - moment(t)).abs());
        }
    }

    // Gaussian cumulants beyond order two vanish
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.7]);
    let mut gaussian_kappa: f64 = 0.0;
    for t in [vec![0, 0, 1], vec![0, 1, 1, 1], vec![0, 0, 1, 1, 0, 1]] {
        gaussian_kappa = gaussian_kappa.max(
            core(cumulant_from_moments(
                |ix| gaussian_moment_list(ix, &cov).unwrap_or(f64::NAN),
                &t,
            ))?
            .abs(),
        );
    }

    let mut hermite_err: f64 = 0.0;
    let var = DMatrix::from_element(1, 1, 0.7);
    for m in 0..=6u32 {
        let a = MultiIndex::new(vec![m]);
        let want = (1..=m).map(f64::from).product::<f64>() * 0.7f64.powi(m as i32);
        hermite_err = hermite_err.max((core(hermite_inner(&a, &a, &var))? - want).abs());
    }

    let mut dyck_ok = true;
    for q in 0..=c.dyck_max {
        let len = 2 * q;
        let brute = (0u32..1 << len)
            .filter(|w| {
                let mut h = 0i32;
                (0..len).all(|b| {
                    h += if w >> b & 1 == 1 { 1 } else { -1 };
                    h >= 0
                }) && h == 0
            })
            .count() as u128;
        dyck_ok &= brute == core(catalan(q))? && brute == dyck_paths(q).len() as u128;
    }

    let checks = vec![
        check(
            "sphere_moments",
            sphere_ok,
            format!("{sphere_count} multi-indices"),
        ),
        check(
            "moment_cumulant_round_trip",
            round_trip <= 1e-12,
            format!("{round_trip:e}"),
        ),
        check(
            "gaussian_cumulants",
            gaussian_kappa <= 1e-12,
            format!("{gaussian_kappa:e}"),
        ),
        check(
            "hermite_norms",
            hermite_err <= 1e-9,
            format!("{hermite_err:e}"),
        ),
        check("dyck_catalan", dyck_ok, format!("q <= {}", c.dyck_max)),
    ];
    let result = json!({
        "sphere_moments_checked": sphere_count,
        "round_trip_error": round_trip,
        "gaussian_cumulant_max": gaussian_kappa,
        "hermite_norm_error": hermite_err,
        "dyck_max": c.dyck_max,
    });
    Ok(Outcome {
        result,
        csv: None,
        checks,
        config: to_value(c),
    })
}
