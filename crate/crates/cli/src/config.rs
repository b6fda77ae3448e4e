//! Experiment configuration: a TOML file with one table per subcommand.
//!
//! Every field has a default, so an empty file (or no file) is valid. Unknown
//! keys are rejected by name.

use hes_core::ensembles::EnsembleKind;
use hes_core::hamiltonian::Storage;
use hes_core::mixture::MixtureSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    /// Master seed; `--seed` takes precedence.
    pub seed: Option<u64>,
    pub alg_threshold: AlgConfig,
    pub ascend: AscendConfig,
    pub verify_hes: VerifyConfig,
    pub wigner_check: WignerConfig,
    pub bernstein_check: BernsteinConfig,
    pub moment_check: MomentConfig,
    pub ensemble_compare: EnsembleConfig,
    pub identities: IdentitiesConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("invalid config: {}", e.message()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgConfig {
    /// Mixture weights from degree 2 upwards.
    pub gammas: Vec<f64>,
    pub quad_tol: f64,
    /// Steps of the energy-target schedule written to CSV.
    pub k: usize,
    /// Midpoint points of the independent cross-check.
    pub riemann_points: usize,
}

impl Default for AlgConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.0, 0.0, 1.0],
            quad_tol: 1e-12,
            k: 40,
            riemann_points: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Randomized,
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscendConfig {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub k: usize,
    pub delta: f64,
    pub method: Method,
    /// Target slack of the deterministic variant.
    pub eps: f64,
    pub storage: Storage,
    pub tol: f64,
}

impl Default for AscendConfig {
    fn default() -> Self {
        Self {
            n: 100,
            gammas: vec![1.0, 0.0, 1.0],
            k: 20,
            delta: 0.05,
            method: Method::Randomized,
            eps: 0.1,
            storage: Storage::Auto,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub k: usize,
    pub delta: f64,
    pub replicas: usize,
    pub storage: Storage,
    /// Operator norm limit is `(1 + tol) / (delta n)`.
    pub tol: f64,
    pub projections: usize,
    pub bootstrap: usize,
    pub surrogate_accuracy: f64,
    /// Largest accepted |third cumulant| in standard errors.
    pub max_z: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n: 200,
            gammas: vec![1.0, 0.0, 1.0],
            k: 10,
            delta: 0.1,
            replicas: 200,
            storage: Storage::Auto,
            tol: 0.3,
            projections: 20,
            bootstrap: 50,
            surrogate_accuracy: 0.02,
            max_z: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub q: f64,
    pub p_max: usize,
    pub replicas: usize,
    pub storage: Storage,
    /// Relative bands on the second and fourth moments.
    pub tol2: f64,
    pub tol4: f64,
    /// Bound on |third moment| in units of `nu''(q)^{3/2}`.
    pub tol3: f64,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            n: 300,
            gammas: vec![1.0, 0.0, 1.0],
            q: 0.5,
            p_max: 4,
            replicas: 20,
            storage: Storage::Auto,
            tol2: 0.1,
            tol4: 0.2,
            tol3: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinConfig {
    /// GOE dimension.
    pub n: usize,
    /// Ramp width parameter of the matrix check.
    pub eps: f64,
    pub scalar_eps: f64,
    pub grid: usize,
    pub phi: f64,
    pub sc_eps: f64,
}

impl Default for BernsteinConfig {
    fn default() -> Self {
        Self {
            n: 300,
            eps: 0.2,
            scalar_eps: 0.05,
            grid: 10_000,
            phi: 0.05,
            sc_eps: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub n: usize,
    pub eta: usize,
    pub polynomials: usize,
    pub two_step_samples: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            n: 8,
            eta: 4,
            polynomials: 50,
            two_step_samples: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub runs: usize,
    /// Weights left unset take the ensemble's defaults.
    pub alpha2: Option<f64>,
    pub alpha4: Option<f64>,
    pub alpha6: Option<f64>,
    pub alpha8: Option<f64>,
    pub exponent: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            kind: EnsembleKind::DegreeScaling,
            n: 200,
            k: 30,
            delta: 0.05,
            runs: 20,
            alpha2: Some(3.0),
            alpha4: None,
            alpha6: None,
            alpha8: None,
            exponent: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub max_n: usize,
    pub max_degree: usize,
    pub cumulant_length: usize,
    pub dyck_max: u32,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self {
            max_n: 8,
            max_degree: 6,
            cumulant_length: 6,
            dyck_max: 8,
        }
    }
}

fn field(section: &str, name: &str, why: impl std::fmt::Display) -> String {
    format!("invalid config field [{section}] {name}: {why}")
}

fn mixture(section: &str, gammas: &[f64]) -> Result<MixtureSpec, String> {
    MixtureSpec::new(gammas.to_vec()).map_err(|e| field(section, "gammas", e))
}

fn positive(section: &str, name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(
            section,
            name,
            format!("{v} is not a positive number"),
        ))
    }
}

fn unit_open(section: &str, name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(field(section, name, format!("{v} outside (0, 1)")))
    }
}

fn at_least(section: &str, name: &str, v: usize, min: usize) -> Result<(), String> {
    if v >= min {
        Ok(())
    } else {
        Err(field(section, name, format!("{v} is below {min}")))
    }
}

fn at_most(section: &str, name: &str, v: usize, max: usize) -> Result<(), String> {
    if v <= max {
        Ok(())
    } else {
        Err(field(section, name, format!("{v} exceeds {max}")))
    }
}

fn step_budget(section: &str, n: usize, k: usize, delta: f64) -> Result<(), String> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(field(section, "delta", format!("{delta} outside (0, 1/2]")));
    }
    let m = (delta * n as f64).floor() as usize;
    if m < 2 {
        return Err(field(
            section,
            "delta",
            format!("floor(delta n) = {m} is below 2"),
        ));
    }
    if k + m > n + 1 {
        return Err(field(
            section,
            "k",
            format!("k - 1 + floor(delta n) = {} exceeds n = {n}", k - 1 + m),
        ));
    }
    Ok(())
}

impl AlgConfig {
    pub fn validate(&self) -> Result<MixtureSpec, String> {
        positive("alg-threshold", "quad_tol", self.quad_tol)?;
        at_least("alg-threshold", "k", self.k, 1)?;
        at_least("alg-threshold", "riemann_points", self.riemann_points, 1)?;
        mixture("alg-threshold", &self.gammas)
    }
}

impl AscendConfig {
    pub fn validate(&self) -> Result<MixtureSpec, String> {
        let s = "ascend";
        at_least(s, "n", self.n, 4)?;
        at_least(s, "k", self.k, 2)?;
        match self.method {
            Method::Randomized => step_budget(s, self.n, self.k, self.delta)?,
            Method::Deterministic => {
                unit_open(s, "eps", self.eps)?;
                if self.k > self.n / 2 {
                    return Err(field(
                        s,
                        "k",
                        format!("{} exceeds n/2 = {}", self.k, self.n / 2),
                    ));
                }
            }
        }
        positive(s, "tol", self.tol)?;
        mixture(s, &self.gammas)
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<MixtureSpec, String> {
        let s = "verify-hes";
        at_least(s, "n", self.n, 4)?;
        at_least(s, "k", self.k, 2)?;
        step_budget(s, self.n, self.k, self.delta)?;
        at_least(s, "replicas", self.replicas, 50)?;
        positive(s, "tol", self.tol)?;
        at_least(s, "projections", self.projections, 1)?;
        at_least(s, "bootstrap", self.bootstrap, 2)?;
        unit_open(s, "surrogate_accuracy", self.surrogate_accuracy)?;
        positive(s, "max_z", self.max_z)?;
        mixture(s, &self.gammas)
    }
}

impl WignerConfig {
    pub fn validate(&self) -> Result<MixtureSpec, String> {
        let s = "wigner-check";
        at_least(s, "n", self.n, 2)?;
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(field(s, "q", format!("{} outside (0, 1]", self.q)));
        }
        at_least(s, "p_max", self.p_max, 4)?;
        at_most(s, "p_max", self.p_max, 8)?;
        at_least(s, "replicas", self.replicas, 2)?;
        positive(s, "tol2", self.tol2)?;
        positive(s, "tol3", self.tol3)?;
        positive(s, "tol4", self.tol4)?;
        mixture(s, &self.gammas)
    }
}

impl BernsteinConfig {
    pub fn validate(&self) -> Result<(), String> {
        let s = "bernstein-check";
        at_least(s, "n", self.n, 2)?;
        if !(self.eps > 0.0 && self.eps < 1.5) {
            return Err(field(s, "eps", format!("{} outside (0, 1.5)", self.eps)));
        }
        unit_open(s, "scalar_eps", self.scalar_eps)?;
        at_least(s, "grid", self.grid, 2)?;
        if !(self.phi > 0.0 && self.phi < 0.25) {
            return Err(field(s, "phi", format!("{} outside (0, 1/4)", self.phi)));
        }
        unit_open(s, "sc_eps", self.sc_eps)
    }
}

impl MomentConfig {
    pub fn validate(&self) -> Result<(), String> {
        let s = "moment-check";
        at_least(s, "n", self.n, 2)?;
        at_most(s, "n", self.n, 10)?;
        if !matches!(self.eta, 2 | 4 | 6) {
            return Err(field(
                s,
                "eta",
                format!("{} is not one of 2, 4, 6", self.eta),
            ));
        }
        at_least(s, "polynomials", self.polynomials, 1)?;
        at_least(s, "two_step_samples", self.two_step_samples, 100)
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), String> {
        let s = "ensemble-compare";
        at_least(s, "n", self.n, 8)?;
        if self.n % 2 == 1 {
            return Err(field(s, "n", format!("{} is odd", self.n)));
        }
        at_least(s, "k", self.k, 2)?;
        step_budget(s, self.n, self.k, self.delta)?;
        at_least(s, "runs", self.runs, 5)?;
        for (name, v) in [
            ("alpha2", self.alpha2),
            ("alpha4", self.alpha4),
            ("alpha6", self.alpha6),
            ("alpha8", self.alpha8),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(field(s, name, format!("{v} is negative")));
                }
            }
        }
        if let Some(e) = self.exponent {
            positive(s, "exponent", e)?;
        }
        Ok(())
    }
}

impl IdentitiesConfig {
    pub fn validate(&self) -> Result<(), String> {
        let s = "identities";
        at_least(s, "max_n", self.max_n, 1)?;
        at_most(s, "max_n", self.max_n, 10)?;
        at_most(s, "max_degree", self.max_degree, 8)?;
        at_least(s, "cumulant_length", self.cumulant_length, 1)?;
        at_most(s, "cumulant_length", self.cumulant_length, 8)?;
        at_most(s, "dyck_max", self.dyck_max as usize, 10)
    }
}
