//! Numerical checks of the R-matrix identities against their scalar right-hand
//! sides.
//!
//! Every check returns an [`IdentityReport`]; a report passes iff every residual
//! it carries is below the case tolerance.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{cyclic_orderings, path_edges, shuffled_orderings};
use crate::rmatrix::{r_same_site, RMatrixKind, RMatrixSpec};
use crate::special::{
    factorial, fay_check, scalar_cyclic_sum, weierstrass_p, LatticeParams, C64,
};
use crate::tensor::{
    embed_two_site, frobenius_distance, is_scalar_operator, matrix_distance, swap_sites,
    SquareMatrix, TensorOperator, TensorSpace,
};

/// Identifies a family of checks. `key()` is the name used for tolerance
/// overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityName {
    ScalarCyclic(usize),
    Fay,
    Unitarity,
    Qybe,
    Aybe,
    SkewSymmetry,
    SameSite,
    NthOrder(usize),
    OuterIndex(usize),
    ClassicalExpansion,
    HbarDerivative,
    TracePower { n: usize, k: usize },
    KzbFlatness,
    HbarOrder(usize),
}

impl IdentityName {
    pub fn key(&self) -> &'static str {
        match self {
            IdentityName::ScalarCyclic(_) => "scalar-cyclic",
            IdentityName::Fay => "fay",
            IdentityName::Unitarity => "unitarity",
            IdentityName::Qybe => "qybe",
            IdentityName::Aybe => "aybe",
            IdentityName::SkewSymmetry => "skew",
            IdentityName::SameSite => "same-site",
            IdentityName::NthOrder(_) => "nth-order",
            IdentityName::OuterIndex(_) => "outer-index",
            IdentityName::ClassicalExpansion => "classical",
            IdentityName::HbarDerivative => "hbar-derivative",
            IdentityName::TracePower { .. } => "trace-power",
            IdentityName::KzbFlatness => "kzb",
            IdentityName::HbarOrder(_) => "hbar-order",
        }
    }

    /// All override keys, in a fixed order.
    pub fn keys() -> &'static [&'static str] {
        &[
            "scalar-cyclic",
            "fay",
            "unitarity",
            "qybe",
            "aybe",
            "skew",
            "same-site",
            "nth-order",
            "outer-index",
            "classical",
            "hbar-derivative",
            "trace-power",
            "kzb",
            "hbar-order",
        ]
    }

    /// The `n` of sized identities (number of sites, or particles).
    pub fn order(&self) -> Option<usize> {
        match *self {
            IdentityName::ScalarCyclic(n)
            | IdentityName::NthOrder(n)
            | IdentityName::OuterIndex(n)
            | IdentityName::HbarOrder(n) => Some(n),
            IdentityName::TracePower { n, .. } => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for IdentityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdentityName::TracePower { n, k } => write!(f, "trace-power(n={n},k={k})"),
            other => match other.order() {
                Some(n) => write!(f, "{}({n})", other.key()),
                None => f.write_str(other.key()),
            },
        }
    }
}

/// Default tolerance for a check on the given R-matrix (or a scalar check
/// when `spec` is `None`).
pub fn default_tolerance(name: IdentityName, spec: Option<&RMatrixSpec>) -> f64 {
    let elliptic = spec.map_or(false, |s| s.kind == RMatrixKind::Belavin);
    match name {
        IdentityName::ScalarCyclic(_) | IdentityName::Fay => 1e-9,
        IdentityName::KzbFlatness | IdentityName::HbarOrder(_) | IdentityName::TracePower { .. } => {
            1e-8
        }
        IdentityName::ClassicalExpansion | IdentityName::HbarDerivative => 1e-9,
        IdentityName::NthOrder(n) | IdentityName::OuterIndex(n) if elliptic => {
            if n >= 5 || spec.map_or(false, |s| s.site_dim >= 3 && n >= 4) {
                5e-9
            } else {
                1e-9
            }
        }
        _ if elliptic => 1e-9,
        // Yang: exact rational arithmetic, but long products lose a few digits
        IdentityName::NthOrder(_) | IdentityName::OuterIndex(_) => 1e-11,
        _ => 1e-13,
    }
}

/// One identity instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub name: IdentityName,
    /// `None` for purely scalar checks.
    pub spec: Option<RMatrixSpec>,
    pub lattice: LatticeParams,
    #[serde(with = "crate::cserde::vec")]
    pub points: Vec<C64>,
    /// Second Planck-type parameter (AYBE, Fay) or `η` of scalar sums.
    #[serde(with = "crate::cserde::option", default)]
    pub eta: Option<C64>,
    /// First Planck-type argument of scalar checks that need two.
    #[serde(with = "crate::cserde::option", default)]
    pub hbar: Option<C64>,
    pub outer_index: Option<usize>,
    pub tol: f64,
}

impl IdentityCase {
    pub fn new(name: IdentityName, spec: &RMatrixSpec, points: Vec<C64>) -> Self {
        IdentityCase {
            name,
            spec: Some(*spec),
            lattice: spec.lattice,
            points,
            eta: None,
            hbar: None,
            outer_index: None,
            tol: default_tolerance(name, Some(spec)),
        }
    }

    pub fn scalar(name: IdentityName, lattice: &LatticeParams, points: Vec<C64>, eta: C64) -> Self {
        IdentityCase {
            name,
            spec: None,
            lattice: *lattice,
            points,
            eta: Some(eta),
            hbar: None,
            outer_index: None,
            tol: default_tolerance(name, None),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_outer_index(mut self, a: usize) -> Self {
        self.outer_index = Some(a);
        self
    }

    pub fn with_hbar(mut self, hbar: C64) -> Self {
        self.hbar = Some(hbar);
        self
    }

    pub fn with_eta(mut self, eta: C64) -> Self {
        self.eta = Some(eta);
        self
    }

    fn require_spec(&self) -> Result<&RMatrixSpec> {
        self.spec.as_ref().ok_or_else(|| {
            Error::InvalidParameters(format!("{} needs an R-matrix", self.name))
        })
    }
}

/// Equality ignores `elapsed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub case: IdentityCase,
    #[serde(with = "crate::cserde::option", default)]
    pub lhs_scalar: Option<C64>,
    #[serde(with = "crate::cserde::option", default)]
    pub rhs_scalar: Option<C64>,
    /// The same right-hand side computed by an independent route.
    #[serde(with = "crate::cserde::option", default)]
    pub rhs_alternate: Option<C64>,
    pub scalar_residual: Option<f64>,
    pub operator_residual: Option<f64>,
    /// Distance between the two right-hand side routes.
    pub consistency_residual: Option<f64>,
    pub term_count: usize,
    pub passed: bool,
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl PartialEq for IdentityReport {
    fn eq(&self, other: &Self) -> bool {
        self.case == other.case
            && self.lhs_scalar == other.lhs_scalar
            && self.rhs_scalar == other.rhs_scalar
            && self.rhs_alternate == other.rhs_alternate
            && self.scalar_residual == other.scalar_residual
            && self.operator_residual == other.operator_residual
            && self.consistency_residual == other.consistency_residual
            && self.term_count == other.term_count
            && self.passed == other.passed
            && self.diagnostic == other.diagnostic
    }
}

impl IdentityReport {
    pub(crate) fn from_parts(case: IdentityCase) -> Self {
        IdentityReport {
            case,
            lhs_scalar: None,
            rhs_scalar: None,
            rhs_alternate: None,
            scalar_residual: None,
            operator_residual: None,
            consistency_residual: None,
            term_count: 1,
            passed: false,
            diagnostic: None,
            elapsed: Duration::ZERO,
        }
    }

    /// A failed record carrying the error text.
    pub fn from_error(case: IdentityCase, err: &Error) -> Self {
        let mut r = Self::from_parts(case);
        r.diagnostic = Some(err.to_string());
        r
    }

    /// Largest residual carried, or `None` if there is none.
    pub fn residual(&self) -> Option<f64> {
        [self.scalar_residual, self.operator_residual, self.consistency_residual]
            .into_iter()
            .flatten()
            .reduce(|a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
    }

    /// Recomputes `passed` from the residuals and the case tolerance.
    pub fn finish(mut self, started: Instant) -> Self {
        self.passed = matches!(self.residual(), Some(r) if r < self.case.tol);
        self.elapsed = started.elapsed();
        self
    }
}

fn relative(a: C64, b: C64) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

/// Order in which the terms of a cyclic sum are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumOrder {
    Lexicographic,
    Shuffled(u64),
}

/// `Σ R_{a i₁} R_{i₁ i₂} ⋯ R_{i_{n-1} a}` on `n` sites, terms in lexicographic
/// order. `a` is 1-based and `R_{ij}` stands for `R^ħ(z_i - z_j)` acting on
/// sites `i, j`.
pub fn cyclic_product_sum(
    spec: &RMatrixSpec,
    n: usize,
    a: usize,
    points: &[C64],
    size_cap: usize,
) -> Result<TensorOperator> {
    cyclic_product_sum_with(spec, n, a, points, size_cap, SumOrder::Lexicographic, false)
}

/// As [`cyclic_product_sum`], with a chosen accumulation order. With
/// `parallel`, terms are computed concurrently and still added in order, so
/// the result does not depend on the thread count.
pub fn cyclic_product_sum_with(
    spec: &RMatrixSpec,
    n: usize,
    a: usize,
    points: &[C64],
    size_cap: usize,
    order: SumOrder,
    parallel: bool,
) -> Result<TensorOperator> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!(
            "cyclic product sums need n >= 2, got {n}"
        )));
    }
    if points.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: points.len(),
        });
    }
    let space = TensorSpace::new(spec.site_dim, n, size_cap)?;
    let orderings = match order {
        SumOrder::Lexicographic => cyclic_orderings(n, a)?,
        SumOrder::Shuffled(seed) => shuffled_orderings(n, a, seed)?,
    };
    let table = r_table(spec, points)?;
    let term = |ordering: &Vec<usize>| -> Result<TensorOperator> {
        let edges = path_edges(a, ordering);
        let mut acc = TensorOperator::identity(space);
        for &(i, j) in edges.iter().rev() {
            acc = acc.apply_two_site_left(&table[(i - 1) * n + j - 1], i, j)?;
        }
        Ok(acc)
    };
    let terms: Vec<TensorOperator> = if parallel {
        orderings.par_iter().map(term).collect::<Result<_>>()?
    } else {
        orderings.iter().map(term).collect::<Result<_>>()?
    };
    let mut total = TensorOperator::zeros(space);
    for t in &terms {
        total.add_assign(t)?;
    }
    Ok(total)
}

/// `R^ħ(z_i - z_j)` for all ordered pairs, row-major and 0-based; the diagonal
/// holds empty placeholders.
fn r_table(spec: &RMatrixSpec, points: &[C64]) -> Result<Vec<SquareMatrix>> {
    let n = points.len();
    let mut table = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                table.push(SquareMatrix::zeros(0));
                continue;
            }
            let m = spec.r_matrix(points[i] - points[j]).map_err(|e| match e {
                Error::PoleProximity { what, distance, radius } => Error::PoleProximity {
                    what: format!("{what} at z_{} - z_{}", i + 1, j + 1),
                    distance,
                    radius,
                },
                other => other,
            })?;
            table.push(m);
        }
    }
    Ok(table)
}

/// The scalar predicted by the theorem: `(-N)ⁿ ℘^{(n-2)}(Nħ)` for `n ≥ 3`,
/// `N²(℘(Nħ) - ℘(z₁ - z₂))` for `n = 2`.
pub fn nth_order_rhs(spec: &RMatrixSpec, n: usize, points: &[C64]) -> Result<C64> {
    let nf = spec.site_dim as f64;
    let lattice = &spec.lattice;
    match n {
        2 => {
            let z = points[0] - points[1];
            Ok((weierstrass_p(spec.n_hbar(), 0, lattice)? - weierstrass_p(z, 0, lattice)?)
                * nf.powi(2))
        }
        n if n >= 3 => {
            let order = u32::try_from(n - 2).map_err(|_| Error::UnsupportedDerivOrder(u32::MAX))?;
            Ok(weierstrass_p(spec.n_hbar(), order, lattice)? * (-nf).powi(n as i32))
        }
        _ => Err(Error::InvalidParameters(format!("no theorem right side for n = {n}"))),
    }
}

/// Checks the `n`-th order identity for the case's points and outer index.
pub fn check_nth_order(case: &IdentityCase, size_cap: usize) -> Result<IdentityReport> {
    let started = Instant::now();
    let spec = case.require_spec()?;
    let n = case.points.len();
    if n == 1 {
        return check_same_site(case);
    }
    let a = case.outer_index.unwrap_or(1);
    let sum = cyclic_product_sum(spec, n, a, &case.points, size_cap)?;
    let scalar = is_scalar_operator(sum.matrix(), case.tol);
    let rhs = nth_order_rhs(spec, n, &case.points)?;
    let nf = spec.site_dim as f64;
    let alternate =
        scalar_cyclic_sum(n, a, spec.n_hbar(), &case.points, &spec.lattice)? * nf.powi(n as i32);
    let mut report = IdentityReport::from_parts(case.clone());
    report.lhs_scalar = Some(scalar.coeff);
    report.rhs_scalar = Some(rhs);
    report.rhs_alternate = Some(alternate);
    report.operator_residual = Some(scalar.residual);
    report.scalar_residual = Some(relative(scalar.coeff, rhs));
    report.consistency_residual = Some(relative(alternate, rhs));
    report.term_count = (1..n).product();
    Ok(report.finish(started))
}

/// `R₁₂(z)R₂₁(-z) = N²(℘(Nħ) - ℘(z))`; the `n = 2` case of the theorem.
pub fn check_unitarity(spec: &RMatrixSpec, z1: C64, z2: C64) -> Result<IdentityReport> {
    let case = IdentityCase::new(IdentityName::Unitarity, spec, vec![z1, z2]);
    check_nth_order(&case, usize::MAX)
}

/// `R₁₂R₁₃R₂₃ = R₂₃R₁₃R₁₂` on three sites.
pub fn check_qybe(spec: &RMatrixSpec, z1: C64, z2: C64, z3: C64) -> Result<IdentityReport> {
    let started = Instant::now();
    let case = IdentityCase::new(IdentityName::Qybe, spec, vec![z1, z2, z3]);
    let space = TensorSpace::new(spec.site_dim, 3, usize::MAX)?;
    let r12 = spec.r_matrix(z1 - z2)?;
    let r13 = spec.r_matrix(z1 - z3)?;
    let r23 = spec.r_matrix(z2 - z3)?;
    let lhs = embed_two_site(&r23, 2, 3, space)?
        .apply_two_site_left(&r13, 1, 3)?
        .apply_two_site_left(&r12, 1, 2)?;
    let rhs = embed_two_site(&r12, 1, 2, space)?
        .apply_two_site_left(&r13, 1, 3)?
        .apply_two_site_left(&r23, 2, 3)?;
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(frobenius_distance(&lhs, &rhs)?);
    Ok(report.finish(started))
}

/// `R^ħ_ac R^η_cb = R^η_ab R^{ħ-η}_ac + R^{η-ħ}_cb R^ħ_ab` with
/// `(a, c, b) = (1, 3, 2)`. The residual is relative to the largest term.
pub fn check_aybe(
    spec: &RMatrixSpec,
    hbar: C64,
    eta: C64,
    z1: C64,
    z2: C64,
    z3: C64,
) -> Result<IdentityReport> {
    let started = Instant::now();
    let diff = hbar - eta;
    let lattice = &spec.lattice;
    if lattice.pole_distance(diff) < lattice.exclusion_radius
        || lattice.pole_distance(diff * spec.site_dim as f64) < lattice.exclusion_radius
    {
        return Err(Error::DegenerateArguments(format!(
            "hbar - eta = {diff} is within the exclusion radius of a lattice point"
        )));
    }
    let s_h = spec.with_hbar(hbar)?;
    let s_e = spec.with_hbar(eta)?;
    let s_d = spec.with_hbar(diff)?;
    let s_md = spec.with_hbar(-diff)?;
    let mut case = IdentityCase::new(IdentityName::Aybe, &s_h, vec![z1, z2, z3]).with_eta(eta);
    case.tol = default_tolerance(IdentityName::Aybe, Some(spec));
    let (a, b, c) = (1, 2, 3);
    let z = [z1, z2, z3];
    let zz = |i: usize, j: usize| z[i - 1] - z[j - 1];
    let space = TensorSpace::new(spec.site_dim, 3, usize::MAX)?;
    let prod = |s1: &RMatrixSpec, p1: (usize, usize), s2: &RMatrixSpec, p2: (usize, usize)| {
        let left = s1.r_matrix(zz(p1.0, p1.1))?;
        let right = s2.r_matrix(zz(p2.0, p2.1))?;
        embed_two_site(&right, p2.0, p2.1, space)?.apply_two_site_left(&left, p1.0, p1.1)
    };
    let lhs = prod(&s_h, (a, c), &s_e, (c, b))?;
    let t1 = prod(&s_e, (a, b), &s_d, (a, c))?;
    let t2 = prod(&s_md, (c, b), &s_h, (a, b))?;
    let rhs = t1.sum(&t2)?;
    let scale = lhs
        .frobenius_norm()
        .max(t1.frobenius_norm())
        .max(t2.frobenius_norm())
        .max(1.0);
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(lhs.difference(&rhs)?.frobenius_norm() / scale);
    report.term_count = 3;
    Ok(report.finish(started))
}

/// `R^ħ₁₂(z) = -R^{-ħ}₂₁(-z)`.
pub fn check_skew(spec: &RMatrixSpec, z: C64) -> Result<IdentityReport> {
    let started = Instant::now();
    let case = IdentityCase::new(IdentityName::SkewSymmetry, spec, vec![z]);
    let lhs = spec.r_matrix(z)?;
    let flipped = swap_sites(&spec.with_hbar(-spec.hbar)?.r_matrix(-z)?, spec.site_dim);
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(matrix_distance(&lhs, &flipped.scale(C64::new(-1.0, 0.0))));
    Ok(report.finish(started))
}

/// `R_aa(z)` with both factors on one site equals `N φ(Nħ, z/N)·1`. The single
/// point of the case is `z`.
pub fn check_same_site(case: &IdentityCase) -> Result<IdentityReport> {
    let started = Instant::now();
    let spec = case.require_spec()?;
    let z = *case.points.first().ok_or_else(|| {
        Error::InvalidParameters("same-site check needs a spectral parameter".into())
    })?;
    let same = r_same_site(spec, z)?;
    let scalar = is_scalar_operator(&same.matrix, case.tol);
    let mut report = IdentityReport::from_parts(case.clone());
    report.lhs_scalar = Some(scalar.coeff);
    report.rhs_scalar = Some(same.closed_form);
    report.rhs_alternate = Some(same.fourier_sum);
    report.operator_residual = Some(scalar.residual);
    report.scalar_residual = Some(relative(scalar.coeff, same.closed_form));
    report.consistency_residual = Some(relative(same.fourier_sum, same.closed_form));
    Ok(report.finish(started))
}

/// Compares the scalar coefficients of the cyclic sums with outer indices `a`
/// and `a_alt`.
pub fn check_outer_index_independence(
    spec: &RMatrixSpec,
    a: usize,
    a_alt: usize,
    points: &[C64],
    size_cap: usize,
) -> Result<IdentityReport> {
    let started = Instant::now();
    let n = points.len();
    if a == a_alt {
        return Err(Error::InvalidParameters("outer indices must differ".into()));
    }
    for idx in [a, a_alt] {
        if idx == 0 || idx > n {
            return Err(Error::IndexOutOfRange { index: idx, max: n });
        }
    }
    let case = IdentityCase::new(IdentityName::OuterIndex(n), spec, points.to_vec())
        .with_outer_index(a);
    let first = is_scalar_operator(cyclic_product_sum(spec, n, a, points, size_cap)?.matrix(), case.tol);
    let second =
        is_scalar_operator(cyclic_product_sum(spec, n, a_alt, points, size_cap)?.matrix(), case.tol);
    let mut report = IdentityReport::from_parts(case);
    report.lhs_scalar = Some(first.coeff);
    report.rhs_scalar = Some(second.coeff);
    report.operator_residual = Some(first.residual.max(second.residual));
    report.scalar_residual = Some(relative(first.coeff, second.coeff));
    report.term_count = 2 * (1..n).product::<usize>();
    Ok(report.finish(started))
}

/// Scalar cyclic Kronecker sum against `(-1)ⁿ ℘^{(n-2)}(η)`, `n ≥ 3`.
pub fn check_scalar_cyclic(case: &IdentityCase) -> Result<IdentityReport> {
    let started = Instant::now();
    let n = case.points.len();
    let eta = case
        .eta
        .ok_or_else(|| Error::InvalidParameters("scalar cyclic sum needs eta".into()))?;
    if n < 3 {
        return Err(Error::InvalidParameters(format!(
            "the scalar cyclic identity needs n >= 3, got {n}"
        )));
    }
    let a = case.outer_index.unwrap_or(1);
    let lhs = scalar_cyclic_sum(n, a, eta, &case.points, &case.lattice)?;
    let order = (n - 2) as u32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = weierstrass_p(eta, order, &case.lattice)? * sign;
    let mut report = IdentityReport::from_parts(case.clone());
    report.lhs_scalar = Some(lhs);
    report.rhs_scalar = Some(rhs);
    report.scalar_residual = Some(relative(lhs, rhs));
    report.term_count = factorial(n as u32 - 1) as usize;
    Ok(report.finish(started))
}

/// Fay identity for `φ`. Points are `(z, w)`; the case carries `ħ` and `η`.
/// The residual is absolute.
pub fn check_fay(case: &IdentityCase) -> Result<IdentityReport> {
    let started = Instant::now();
    let hbar = case
        .hbar
        .ok_or_else(|| Error::InvalidParameters("Fay check needs hbar".into()))?;
    let eta = case
        .eta
        .ok_or_else(|| Error::InvalidParameters("Fay check needs eta".into()))?;
    let [z, w] = case.points[..] else {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: case.points.len(),
        });
    };
    let residual = fay_check(hbar, eta, z, w, &case.lattice)?;
    let mut report = IdentityReport::from_parts(case.clone());
    report.scalar_residual = Some(residual);
    report.term_count = 3;
    Ok(report.finish(started))
}
