//! Run configuration, seeded sampling, suite orchestration and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::applications::{
    check_classical_structure, check_hbar_derivative, check_hbar_order_relation,
    check_kzb_flatness, check_trace_power_guess, CalogeroConfig,
};
use crate::error::{Error, Result};
use crate::identities::{
    check_aybe, check_fay, check_nth_order, check_outer_index_independence, check_qybe,
    check_same_site, check_scalar_cyclic, check_skew, check_unitarity, IdentityCase,
    IdentityName, IdentityReport,
};
use crate::rmatrix::{RMatrixKind, RMatrixSpec};
use crate::special::{
    weierstrass_p, FunctionKind, LatticeParams, C64, DEFAULT_EXCLUSION_RADIUS, DEFAULT_MAX_TERMS,
    DEFAULT_SERIES_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WORK_BUDGET: f64 = 1e9;
/// Smallest separation between sampled points and from lattice points.
pub const MIN_SEPARATION: f64 = 0.05;
/// Largest accepted `|℘^{(k)}(Nħ)|` for sampled `ħ`.
pub const HBAR_P_CAP: f64 = 1e8;
const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Scalar,
    RmatrixBasic,
    NthOrder,
    Applications,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Scalar,
        Suite::RmatrixBasic,
        Suite::NthOrder,
        Suite::Applications,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Scalar => "scalar",
            Suite::RmatrixBasic => "rmatrix-basic",
            Suite::NthOrder => "nth-order",
            Suite::Applications => "applications",
        }
    }

    /// Parses one suite name; `all` expands to every suite.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Suite::ALL),
                "scalar" => out.push(Suite::Scalar),
                "rmatrix-basic" => out.push(Suite::RmatrixBasic),
                "nth-order" => out.push(Suite::NthOrder),
                "applications" => out.push(Suite::Applications),
                other => return Err(Error::Usage(format!("unknown suite '{other}'"))),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

/// Which R-matrix family the run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rational,
    Elliptic,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(ModelKind::Rational),
            "elliptic" => Ok(ModelKind::Elliptic),
            other => Err(Error::Usage(format!(
                "unknown kind '{other}' (expected rational or elliptic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub suites: Vec<Suite>,
    pub kind: ModelKind,
    #[serde(rename = "N")]
    pub site_dim: usize,
    pub n_max: usize,
    #[serde(with = "crate::cserde")]
    pub tau: C64,
    /// `None` samples `ħ` per case.
    #[serde(with = "crate::cserde::option", default)]
    pub hbar: Option<C64>,
    pub seed: u64,
    pub samples: usize,
    pub tol_overrides: BTreeMap<String, f64>,
    pub size_cap: usize,
    pub work_budget: f64,
    pub deterministic: bool,
    pub parallel: bool,
    pub report_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            suites: Suite::ALL.to_vec(),
            kind: ModelKind::Elliptic,
            site_dim: 2,
            n_max: 4,
            tau: C64::new(0.0, 1.0),
            hbar: None,
            seed: 42,
            samples: 20,
            tol_overrides: BTreeMap::new(),
            size_cap: crate::tensor::DEFAULT_SIZE_CAP,
            work_budget: DEFAULT_WORK_BUDGET,
            deterministic: true,
            parallel: false,
            report_path: None,
        }
    }
}

/// Parses `a+bi`, `a-bi`, `bi`, `a` (also with `j`).
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Usage(format!("cannot parse complex number '{s}' (expected a+bi)"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Usage(format!("expected a boolean, got '{other}'"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Sets one field from its flag / config-file name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "suite" | "suites" => self.suites = Suite::parse_list(value)?,
            "kind" => self.kind = value.parse()?,
            "N" | "n" => self.site_dim = parse_num(key, value)?,
            "n-max" | "n_max" => self.n_max = parse_num(key, value)?,
            "tau" => self.tau = parse_complex(value)?,
            "hbar" => {
                self.hbar = if value == "random" {
                    None
                } else {
                    Some(parse_complex(value)?)
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "size-cap" | "size_cap" => self.size_cap = parse_num(key, value)?,
            "work-budget" | "work_budget" => self.work_budget = parse_num(key, value)?,
            "deterministic" => self.deterministic = parse_bool(value)?,
            "parallel" => self.parallel = parse_bool(value)?,
            "report" | "report_path" => self.report_path = Some(PathBuf::from(value)),
            other => match other.strip_prefix("tol.") {
                Some(name) => self.set_tolerance(name, parse_num(key, value)?)?,
                None => return Err(Error::Usage(format!("unknown option '{other}'"))),
            },
        }
        Ok(())
    }

    pub fn set_tolerance(&mut self, name: &str, tol: f64) -> Result<()> {
        if !IdentityName::keys().contains(&name) {
            return Err(Error::Usage(format!(
                "unknown identity '{name}' for a tolerance override (known: {})",
                IdentityName::keys().join(", ")
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Usage(format!("tolerance for {name} must be positive")));
        }
        self.tol_overrides.insert(name.to_string(), tol);
        Ok(())
    }

    /// Applies a flat `key = value` text; blank lines and `#` comments are
    /// ignored.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// `n_max! · N^(2 n_max)`.
    pub fn work_estimate(&self) -> f64 {
        let fact: f64 = (1..=self.n_max).map(|k| k as f64).product();
        fact * (self.site_dim as f64).powi(2 * self.n_max as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.site_dim == 0 {
            return Err(Error::Usage("N must be positive".into()));
        }
        if self.n_max < 2 {
            return Err(Error::Usage("n-max must be at least 2".into()));
        }
        if self.samples == 0 {
            return Err(Error::Usage("samples must be positive".into()));
        }
        if !(self.tau.im > 0.0) {
            return Err(Error::Usage(format!("Im(tau) must be positive, got {}", self.tau)));
        }
        let estimate = self.work_estimate();
        if estimate > self.work_budget {
            return Err(Error::BudgetExceeded {
                estimate,
                budget: self.work_budget,
                reason: format!(
                    "n_max! * N^(2 n_max) for N = {}, n_max = {}",
                    self.site_dim, self.n_max
                ),
            });
        }
        let dim = (self.site_dim as f64).powi(self.n_max as i32);
        if dim > self.size_cap as f64 {
            return Err(Error::SizeCapExceeded {
                dim: dim as usize,
                cap: self.size_cap,
            });
        }
        if let Some(h) = self.hbar {
            self.spec(h)?;
        }
        Ok(())
    }

    fn lattice(&self, kind: FunctionKind) -> Result<LatticeParams> {
        LatticeParams::new(kind, self.tau)
    }

    fn r_kind(&self) -> RMatrixKind {
        match self.kind {
            ModelKind::Rational => RMatrixKind::Yang,
            ModelKind::Elliptic => RMatrixKind::Belavin,
        }
    }

    fn spec(&self, hbar: C64) -> Result<RMatrixSpec> {
        let lattice = match self.kind {
            ModelKind::Rational => self.lattice(FunctionKind::Rational)?,
            ModelKind::Elliptic => self.lattice(FunctionKind::Elliptic)?,
        };
        RMatrixSpec::new(self.r_kind(), self.site_dim, hbar, lattice)
    }

    fn tolerance(&self, case: &IdentityCase) -> f64 {
        self.tol_overrides
            .get(case.name.key())
            .copied()
            .unwrap_or(case.tol)
    }
}

/// Seeded generator of admissible inputs.
pub struct Sampler {
    rng: ChaCha8Rng,
    tau: C64,
}

impl Sampler {
    /// A generator whose stream depends only on `seed` and `label`.
    pub fn new(seed: u64, label: &str, tau: C64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(fnv1a(label));
        Sampler { rng, tau }
    }

    fn box_point(&mut self) -> C64 {
        let x = self.rng.gen_range(0.1..0.9);
        let y = self.rng.gen_range(0.05..0.45) * self.tau.im;
        C64::new(x, y)
    }

    /// `n` points of the sampling rectangle with pairwise differences at least
    /// [`MIN_SEPARATION`] from every pole of `lattice`.
    pub fn points(&mut self, n: usize, lattice: &LatticeParams) -> Result<Vec<C64>> {
        let mut out: Vec<C64> = Vec::with_capacity(n);
        let mut retries = 0;
        while out.len() < n {
            let p = self.box_point();
            if out
                .iter()
                .all(|&q| lattice.pole_distance(p - q) >= MIN_SEPARATION)
            {
                out.push(p);
            } else {
                retries += 1;
                if retries > MAX_RETRIES {
                    return Err(Error::InvalidParameters(format!(
                        "could not place {n} separated points in {MAX_RETRIES} retries"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// A Planck-type parameter `η` with `N η` in the sampling rectangle, away
    /// from lattice points and with `|℘^{(k)}(Nη)| ≤ HBAR_P_CAP` for
    /// `k ≤ max_order`.
    pub fn hbar(&mut self, site_dim: usize, max_order: u32, lattice: &LatticeParams) -> Result<C64> {
        let nf = site_dim as f64;
        for _ in 0..=MAX_RETRIES {
            let w = self.box_point();
            if lattice.pole_distance(w) < MIN_SEPARATION {
                continue;
            }
            let tame = (0..=max_order).all(|k| {
                weierstrass_p(w, k, lattice).map_or(false, |v| v.norm() <= HBAR_P_CAP)
            });
            if tame {
                return Ok(w / nf);
            }
        }
        Err(Error::InvalidParameters(format!(
            "no admissible hbar found in {MAX_RETRIES} retries"
        )))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn complex(&mut self, lo: f64, hi: f64) -> C64 {
        C64::new(self.uniform(lo, hi), self.uniform(lo, hi))
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// One aggregated result: the worst of `samples` evaluations of a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: Suite,
    pub id: String,
    pub identity: IdentityName,
    pub n: Option<usize>,
    /// Absent for scalar records.
    #[serde(rename = "N")]
    pub site_dim: Option<usize>,
    pub samples: usize,
    pub failures: usize,
    pub tol: f64,
    pub residual: Option<f64>,
    pub passed: bool,
    pub skipped: Option<String>,
    /// The worst sample, absent for skipped records.
    pub worst: Option<IdentityReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericDefaults {
    pub series_tol: f64,
    pub max_terms: usize,
    pub exclusion_radius: f64,
    pub min_separation: f64,
    pub hbar_p_cap: f64,
    pub contour_points: usize,
    pub contour_max_residual: f64,
}

impl Default for NumericDefaults {
    fn default() -> Self {
        let opts = crate::rmatrix::ExpansionOptions::default();
        NumericDefaults {
            series_tol: DEFAULT_SERIES_TOL,
            max_terms: DEFAULT_MAX_TERMS,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
            min_separation: MIN_SEPARATION,
            hbar_p_cap: HBAR_P_CAP,
            contour_points: opts.points,
            contour_max_residual: opts.max_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub summary: Summary,
    pub numeric_defaults: NumericDefaults,
    /// Wall-clock seconds for the whole run; omitted in deterministic runs
    /// so that reruns produce identical files.
    pub wall_clock_seconds: Option<f64>,
}

impl RunReport {
    /// 0 if nothing failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.summary.failed == 0 {
            0
        } else {
            1
        }
    }

    /// The records alone, serialised; identical across deterministic reruns.
    pub fn records_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.records).map_err(|e| Error::Io(e.to_string()))
    }
}

/// A unit of work: `samples` evaluations of one identity setting.
struct Job {
    suite: Suite,
    id: String,
    identity: IdentityName,
    n: Option<usize>,
    run: Box<dyn Fn(&mut Sampler) -> (IdentityCase, Result<IdentityReport>) + Send + Sync>,
}

/// A job that is never run, with the reason.
struct Skip {
    suite: Suite,
    id: String,
    identity: IdentityName,
    n: Option<usize>,
    reason: String,
}

#[derive(Default)]
struct Plan {
    jobs: Vec<Job>,
    skips: Vec<Skip>,
}

impl Plan {
    fn job<F>(&mut self, suite: Suite, id: String, identity: IdentityName, f: F)
    where
        F: Fn(&mut Sampler) -> (IdentityCase, Result<IdentityReport>) + Send + Sync + 'static,
    {
        self.jobs.push(Job {
            suite,
            id,
            identity,
            n: identity.order(),
            run: Box::new(f),
        });
    }

    fn skip(&mut self, suite: Suite, id: String, identity: IdentityName, reason: &str) {
        self.skips.push(Skip {
            suite,
            id,
            identity,
            n: identity.order(),
            reason: reason.to_string(),
        });
    }
}

/// Evaluates `check` on a case built by `build`; sampling failures become
/// failed reports on the partially built case.
fn attempt<B, C>(placeholder: IdentityCase, build: B, check: C) -> (IdentityCase, Result<IdentityReport>)
where
    B: FnOnce() -> Result<IdentityCase>,
    C: FnOnce(&IdentityCase) -> Result<IdentityReport>,
{
    match build() {
        Ok(case) => {
            let result = check(&case);
            (case, result)
        }
        Err(e) => (placeholder, Err(e)),
    }
}

const ELLIPTIC_SKIP: &str = "elliptic case not requested (kind = rational)";

fn plan_scalar(config: &RunConfig, plan: &mut Plan) -> Result<()> {
    let n_top = (config.n_max + 1).min(6);
    for fkind in [FunctionKind::Rational, FunctionKind::Trigonometric, FunctionKind::Elliptic] {
        let kname = fkind.name();
        if fkind == FunctionKind::Elliptic && config.kind == ModelKind::Rational {
            for n in 3..=n_top {
                plan.skip(Suite::Scalar, format!("{kname}/scalar-cyclic/n={n}"), IdentityName::ScalarCyclic(n), ELLIPTIC_SKIP);
            }
            plan.skip(Suite::Scalar, format!("{kname}/fay"), IdentityName::Fay, ELLIPTIC_SKIP);
            plan.skip(Suite::Scalar, format!("{kname}/fay-degenerate"), IdentityName::Fay, ELLIPTIC_SKIP);
            continue;
        }
        let lattice = config.lattice(fkind)?;
        for n in 3..=n_top {
            let name = IdentityName::ScalarCyclic(n);
            plan.job(Suite::Scalar, format!("{kname}/scalar-cyclic/n={n}"), name, move |s| {
                let placeholder = IdentityCase::scalar(name, &lattice, Vec::new(), C64::new(0.0, 0.0));
                attempt(
                    placeholder,
                    || {
                        let eta = s.hbar(1, (n - 2) as u32, &lattice)?;
                        let points = s.points(n, &lattice)?;
                        let a = 1 + (s.uniform(0.0, n as f64) as usize).min(n - 1);
                        Ok(IdentityCase::scalar(name, &lattice, points, eta).with_outer_index(a))
                    },
                    check_scalar_cyclic,
                )
            });
        }
        for degenerate in [false, true] {
            let id = if degenerate { "fay-degenerate" } else { "fay" };
            plan.job(Suite::Scalar, format!("{kname}/{id}"), IdentityName::Fay, move |s| {
                let placeholder =
                    IdentityCase::scalar(IdentityName::Fay, &lattice, Vec::new(), C64::new(0.0, 0.0));
                attempt(
                    placeholder,
                    || {
                        for _ in 0..=MAX_RETRIES {
                            let pts = s.points(2, &lattice)?;
                            let (z, w) = (pts[0], pts[1] - pts[0]);
                            let eta = s.hbar(1, 0, &lattice)?;
                            let hbar = if degenerate { eta } else { s.hbar(1, 0, &lattice)? };
                            let ok = [z, w, z + w, z + w + eta]
                                .iter()
                                .chain(if degenerate { None } else { Some(hbar - eta) }.iter())
                                .all(|&v| lattice.pole_distance(v) >= MIN_SEPARATION);
                            if ok {
                                return Ok(IdentityCase::scalar(IdentityName::Fay, &lattice, vec![z, w], eta)
                                    .with_hbar(hbar));
                            }
                        }
                        Err(Error::InvalidParameters("no admissible Fay arguments".into()))
                    },
                    check_fay,
                )
            });
        }
    }
    Ok(())
}

/// Samples `ħ` (or uses the configured one) and builds the R-matrix spec.
fn sample_spec(config: &RunConfig, s: &mut Sampler, max_order: u32) -> Result<RMatrixSpec> {
    let hbar = match config.hbar {
        Some(h) => h,
        None => {
            let lattice = config.spec(C64::new(0.37, 0.11))?.lattice;
            s.hbar(config.site_dim, max_order, &lattice)?
        }
    };
    config.spec(hbar)
}

fn placeholder(config: &RunConfig, name: IdentityName) -> IdentityCase {
    let spec = config
        .spec(config.hbar.unwrap_or(C64::new(0.37, 0.11)))
        .expect("validated configuration");
    IdentityCase::new(name, &spec, Vec::new())
}

fn plan_rmatrix_basic(config: &RunConfig, plan: &mut Plan) {
    let su = Suite::RmatrixBasic;
    let tag = match config.kind {
        ModelKind::Rational => "yang",
        ModelKind::Elliptic => "belavin",
    };
    let cfg = config.clone();
    let name = IdentityName::Unitarity;
    plan.job(su, format!("{tag}/unitarity"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            Ok(IdentityCase::new(name, &spec, s.points(2, &spec.lattice)?))
        }, |c| {
            let spec = c.spec.expect("spec");
            check_unitarity(&spec, c.points[0], c.points[1])
        })
    });
    let cfg = config.clone();
    let name = IdentityName::Qybe;
    plan.job(su, format!("{tag}/qybe"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            Ok(IdentityCase::new(name, &spec, s.points(3, &spec.lattice)?))
        }, |c| {
            let spec = c.spec.expect("spec");
            check_qybe(&spec, c.points[0], c.points[1], c.points[2])
        })
    });
    let cfg = config.clone();
    let name = IdentityName::Aybe;
    plan.job(su, format!("{tag}/aybe"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            let nf = spec.site_dim as f64;
            for _ in 0..=MAX_RETRIES {
                let eta = s.hbar(spec.site_dim, 0, &spec.lattice)?;
                if spec.lattice.pole_distance((spec.hbar - eta) * nf) >= MIN_SEPARATION {
                    let points = s.points(3, &spec.lattice)?;
                    return Ok(IdentityCase::new(name, &spec, points).with_eta(eta));
                }
            }
            Err(Error::DegenerateArguments("no admissible eta for AYBE".into()))
        }, |c| {
            let spec = c.spec.expect("spec");
            let eta = c.eta.expect("eta");
            check_aybe(&spec, spec.hbar, eta, c.points[0], c.points[1], c.points[2])
        })
    });
    let cfg = config.clone();
    let name = IdentityName::SkewSymmetry;
    plan.job(su, format!("{tag}/skew"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            let p = s.points(2, &spec.lattice)?;
            Ok(IdentityCase::new(name, &spec, vec![p[0] - p[1]]))
        }, |c| check_skew(&c.spec.expect("spec"), c.points[0]))
    });
    let cfg = config.clone();
    let name = IdentityName::SameSite;
    plan.job(su, format!("{tag}/same-site"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            let p = s.points(2, &spec.lattice)?;
            Ok(IdentityCase::new(name, &spec, vec![p[0] - p[1]]))
        }, check_same_site)
    });
    let cfg = config.clone();
    let name = IdentityName::ClassicalExpansion;
    plan.job(su, format!("{tag}/classical"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            let p = s.points(2, &spec.lattice)?;
            Ok(IdentityCase::new(name, &spec, vec![p[0] - p[1]]))
        }, |c| check_classical_structure(&c.spec.expect("spec"), c.points[0]))
    });
    let cfg = config.clone();
    let name = IdentityName::HbarDerivative;
    plan.job(su, format!("{tag}/hbar-derivative"), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            Ok(IdentityCase::new(name, &spec, s.points(3, &spec.lattice)?))
        }, |c| {
            let spec = c.spec.expect("spec");
            check_hbar_derivative(&spec, c.points[0], c.points[1], c.points[2])
        })
    });
}

fn plan_nth_order(config: &RunConfig, plan: &mut Plan) {
    let su = Suite::NthOrder;
    let cap = config.size_cap;
    for n in 2..=config.n_max {
        let cfg = config.clone();
        let name = IdentityName::NthOrder(n);
        let max_order = n.saturating_sub(2) as u32;
        plan.job(su, format!("nth-order/n={n}"), name, move |s| {
            attempt(placeholder(&cfg, name), || {
                let spec = sample_spec(&cfg, s, max_order)?;
                let points = s.points(n, &spec.lattice)?;
                let a = 1 + (s.uniform(0.0, n as f64) as usize).min(n - 1);
                Ok(IdentityCase::new(name, &spec, points).with_outer_index(a))
            }, |c| check_nth_order(c, cap))
        });
    }
    for n in 3..=config.n_max {
        let cfg = config.clone();
        let name = IdentityName::OuterIndex(n);
        let max_order = (n - 2) as u32;
        plan.job(su, format!("outer-index/n={n}"), name, move |s| {
            attempt(placeholder(&cfg, name), || {
                let spec = sample_spec(&cfg, s, max_order)?;
                let points = s.points(n, &spec.lattice)?;
                Ok(IdentityCase::new(name, &spec, points).with_outer_index(1))
            }, |c| {
                let spec = c.spec.expect("spec");
                check_outer_index_independence(&spec, 1, n, &c.points, cap)
            })
        });
    }
}

fn plan_applications(config: &RunConfig, plan: &mut Plan) {
    let su = Suite::Applications;
    let n_top = config.n_max.min(4);
    for n in 2..=n_top {
        let dim = n as f64 * (config.site_dim as f64).powi(n as i32);
        for k in 1..=n {
            let name = IdentityName::TracePower { n, k };
            let id = format!("trace-power/n={n}/k={k}");
            if dim > config.size_cap as f64 {
                plan.skip(su, id, name, "Lax matrix exceeds the size cap");
                continue;
            }
            let cfg = config.clone();
            let cap = config.size_cap;
            plan.job(su, id, name, move |s| {
                attempt(placeholder(&cfg, name), || {
                    let spec = sample_spec(&cfg, s, 0)?;
                    let points = s.points(n, &spec.lattice)?;
                    let momenta: Vec<C64> = (0..n).map(|_| s.complex(-1.0, 1.0)).collect();
                    let nu = C64::new(s.uniform(0.5, 1.5), s.uniform(-0.5, 0.5));
                    // positions first, then momenta
                    let mut case = IdentityCase::new(name, &spec, points).with_eta(nu);
                    case.points.extend(momenta);
                    Ok(case)
                }, |c| {
                    let spec = c.spec.expect("spec");
                    let (pos, mom) = c.points.split_at(n);
                    let lax = CalogeroConfig::new(spec, mom.to_vec(), pos.to_vec(), c.eta.expect("nu"))?
                        .with_size_cap(cap)?;
                    check_trace_power_guess(&lax, k)
                })
            });
        }
    }
    let cfg = config.clone();
    let name = IdentityName::KzbFlatness;
    plan.job(su, "kzb".into(), name, move |s| {
        attempt(placeholder(&cfg, name), || {
            let spec = sample_spec(&cfg, s, 0)?;
            Ok(IdentityCase::new(name, &spec, s.points(3, &spec.lattice)?))
        }, |c| {
            let spec = c.spec.expect("spec");
            check_kzb_flatness(&spec, c.points[0], c.points[1], c.points[2])
        })
    });
    for n in 3..=n_top {
        let cfg = config.clone();
        let name = IdentityName::HbarOrder(n);
        plan.job(su, format!("hbar-order/n={n}"), name, move |s| {
            attempt(placeholder(&cfg, name), || {
                let spec = sample_spec(&cfg, s, 0)?;
                Ok(IdentityCase::new(name, &spec, s.points(n, &spec.lattice)?))
            }, |c| check_hbar_order_relation(&c.spec.expect("spec"), &c.points))
        });
    }
}

fn build_plan(config: &RunConfig) -> Result<Plan> {
    let mut plan = Plan::default();
    for suite in &config.suites {
        match suite {
            Suite::Scalar => plan_scalar(config, &mut plan)?,
            Suite::RmatrixBasic => plan_rmatrix_basic(config, &mut plan),
            Suite::NthOrder => plan_nth_order(config, &mut plan),
            Suite::Applications => plan_applications(config, &mut plan),
        }
    }
    Ok(plan)
}

/// Worse of two sample reports: failures first, then larger residual.
fn worse(a: IdentityReport, b: IdentityReport) -> IdentityReport {
    let key = |r: &IdentityReport| {
        let res = r.residual().unwrap_or(f64::INFINITY);
        (!r.passed, if res.is_nan() { f64::INFINITY } else { res })
    };
    let (ka, kb) = (key(&a), key(&b));
    if kb.0 > ka.0 || (kb.0 == ka.0 && kb.1 > ka.1) {
        b
    } else {
        a
    }
}

fn run_job(config: &RunConfig, job: &Job) -> Record {
    let sample = |i: usize| -> IdentityReport {
        let mut s = Sampler::new(config.seed, &format!("{}#{i}", job.id), config.tau);
        let (case, result) = (job.run)(&mut s);
        let tol = config.tolerance(&case);
        match result {
            Ok(mut r) => {
                r.case.tol = tol;
                r.passed = matches!(r.residual(), Some(x) if x < tol);
                r
            }
            Err(e) => IdentityReport::from_error(case.with_tol(tol), &e),
        }
    };
    let reports: Vec<IdentityReport> = if config.parallel {
        (0..config.samples).into_par_iter().map(sample).collect()
    } else {
        (0..config.samples).map(sample).collect()
    };
    let failures = reports.iter().filter(|r| !r.passed).count();
    let worst = reports.into_iter().reduce(worse).expect("at least one sample");
    Record {
        suite: job.suite,
        id: job.id.clone(),
        identity: job.identity,
        n: job.n,
        site_dim: (job.suite != Suite::Scalar).then_some(config.site_dim),
        samples: config.samples,
        failures,
        tol: worst.case.tol,
        residual: worst.residual(),
        passed: failures == 0,
        skipped: None,
        worst: Some(worst),
    }
}

/// Runs every selected suite. Identity errors become failed records; only
/// configuration errors abort.
pub fn run_suites(config: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    let plan = build_plan(config)?;
    let mut records: Vec<Record> = if config.parallel {
        plan.jobs.par_iter().map(|j| run_job(config, j)).collect()
    } else {
        plan.jobs.iter().map(|j| run_job(config, j)).collect()
    };
    records.extend(plan.skips.into_iter().map(|s| Record {
        suite: s.suite,
        id: s.id,
        identity: s.identity,
        n: s.n,
        site_dim: (s.suite != Suite::Scalar).then_some(config.site_dim),
        samples: 0,
        failures: 0,
        tol: 0.0,
        residual: None,
        passed: false,
        skipped: Some(s.reason),
        worst: None,
    }));
    records.sort_by(|a, b| (a.suite, a.n, &a.id).cmp(&(b.suite, b.n, &b.id)));
    let mut summary = Summary::default();
    for r in &records {
        match (&r.skipped, r.passed) {
            (Some(_), _) => summary.skipped += 1,
            (None, true) => summary.passed += 1,
            (None, false) => summary.failed += 1,
        }
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        records,
        summary,
        numeric_defaults: NumericDefaults::default(),
        wall_clock_seconds: (!config.deterministic).then(|| started.elapsed().as_secs_f64()),
    })
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Console table: identity, n, N, residual, tolerance, status.
pub fn summary_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<34} {:>3} {:>3} {:>24} {:>9}  {}",
        "suite", "identity", "n", "N", "residual", "tol", "status"
    );
    for r in &report.records {
        let n = r.n.map_or("-".to_string(), |n| n.to_string());
        let site_dim = r.site_dim.map_or("-".to_string(), |n| n.to_string());
        let residual = r.residual.map_or("-".to_string(), |x| format!("{x:e}"));
        let status = match (&r.skipped, r.passed) {
            (Some(reason), _) => format!("SKIP ({reason})"),
            (None, true) => "PASS".to_string(),
            (None, false) => match r.worst.as_ref().and_then(|w| w.diagnostic.as_ref()) {
                Some(d) if r.residual.is_none() => format!("FAIL ({d})"),
                _ => format!("FAIL ({}/{} samples)", r.failures, r.samples),
            },
        };
        let tol = match r.skipped {
            Some(_) => "-".to_string(),
            None => format!("{:.1e}", r.tol),
        };
        let _ = writeln!(
            out,
            "{:<14} {:<34} {:>3} {:>3} {:>24} {:>9}  {}",
            r.suite.name(),
            r.id,
            n,
            site_dim,
            residual,
            tol,
            status
        );
    }
    let s = report.summary;
    let _ = write!(out, "passed {}, failed {}, skipped {}", s.passed, s.failed, s.skipped);
    match report.wall_clock_seconds {
        Some(t) => {
            let _ = writeln!(out, " ({t:.2} s)");
        }
        None => out.push('\n'),
    }
    out
}
