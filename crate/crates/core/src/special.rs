//! Scalar special functions in the rational, trigonometric and elliptic cases.
//!
//! The elliptic theta function uses the odd convention
//! `ϑ(z|τ) = -Σ_k exp(πiτ(k+½)² + 2πi(k+½)(z+½))`, summed in the equivalent
//! sine form `2 Σ_{k≥0} (-1)^k q^{(k+½)²} sin((2k+1)πz)` with `q = e^{πiτ}`.
//! Arguments are first reduced into the fundamental cell, and the
//! quasi-periodicity factors are applied exactly.
//!
//! The Weierstrass function is normalised as `℘(z) = -E₁'(z) + ϑ'''(0)/(3ϑ'(0))`,
//! which makes `℘(z) - 1/z²` vanish at the origin.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::cyclic_orderings;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Highest supported derivative order of `℘`.
pub const MAX_P_DERIV: u32 = 6;

pub const DEFAULT_SERIES_TOL: f64 = 1e-15;
pub const DEFAULT_MAX_TERMS: usize = 200;
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Rational,
    Trigonometric,
    Elliptic,
}

impl FunctionKind {
    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Rational => "rational",
            FunctionKind::Trigonometric => "trigonometric",
            FunctionKind::Elliptic => "elliptic",
        }
    }
}

/// Evaluation context shared by every scalar function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub kind: FunctionKind,
    /// Modular parameter; only read in the elliptic case.
    #[serde(with = "crate::cserde")]
    pub tau: C64,
    pub series_tol: f64,
    pub max_terms: usize,
    pub exclusion_radius: f64,
}

impl LatticeParams {
    pub fn new(kind: FunctionKind, tau: C64) -> Result<Self> {
        let params = LatticeParams {
            kind,
            tau,
            series_tol: DEFAULT_SERIES_TOL,
            max_terms: DEFAULT_MAX_TERMS,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn rational() -> Self {
        Self::new(FunctionKind::Rational, I).expect("rational params are always valid")
    }

    pub fn trigonometric() -> Self {
        Self::new(FunctionKind::Trigonometric, I).expect("trigonometric params are always valid")
    }

    pub fn elliptic(tau: C64) -> Result<Self> {
        Self::new(FunctionKind::Elliptic, tau)
    }

    pub fn with_series_tol(mut self, tol: f64) -> Result<Self> {
        self.series_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Result<Self> {
        self.max_terms = max_terms;
        self.validate()?;
        Ok(self)
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Result<Self> {
        self.exclusion_radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == FunctionKind::Elliptic && !(self.tau.im > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "Im(tau) must be positive, got tau = {}",
                self.tau
            )));
        }
        if !(self.series_tol > 0.0) {
            return Err(Error::InvalidParameters("series_tol must be positive".into()));
        }
        if self.max_terms < 8 {
            return Err(Error::InvalidParameters("max_terms must be at least 8".into()));
        }
        if !(self.exclusion_radius > 0.0) {
            return Err(Error::InvalidParameters("exclusion radius must be positive".into()));
        }
        Ok(())
    }

    /// Splits `z = w + m + n τ` with `w` in the cell centred at the origin.
    fn reduce(&self, z: C64) -> (C64, i64, i64) {
        let n = (z.im / self.tau.im).round();
        let shifted = z - self.tau * n;
        let m = shifted.re.round();
        (shifted - m, m as i64, n as i64)
    }

    /// Distance from `z` to the nearest pole of the kind's defining functions.
    pub fn pole_distance(&self, z: C64) -> f64 {
        match self.kind {
            FunctionKind::Rational => z.norm(),
            FunctionKind::Trigonometric => {
                let k = (z.im / PI).round();
                (z - I * (PI * k)).norm()
            }
            FunctionKind::Elliptic => {
                let (w, _, _) = self.reduce(z);
                let mut best = f64::INFINITY;
                for dm in -1..=1 {
                    for dn in -1..=1 {
                        let d = (w - dm as f64 - self.tau * dn as f64).norm();
                        best = best.min(d);
                    }
                }
                best
            }
        }
    }

    pub fn check_off_lattice(&self, z: C64, what: &str) -> Result<()> {
        let distance = self.pole_distance(z);
        if distance < self.exclusion_radius || !distance.is_finite() {
            return Err(Error::PoleProximity {
                what: format!("{what} = {z}"),
                distance,
                radius: self.exclusion_radius,
            });
        }
        Ok(())
    }

    /// Smallest half-period of the lattice (elliptic case only).
    pub fn min_half_period(&self) -> f64 {
        0.5 * self.tau.norm().min(1.0)
    }

    fn require_elliptic(&self) -> Result<()> {
        if self.kind != FunctionKind::Elliptic {
            return Err(Error::NonEllipticKind);
        }
        Ok(())
    }
}

/// Argument pair `(η, z)` of the Kronecker function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoint {
    #[serde(with = "crate::cserde")]
    pub eta: C64,
    #[serde(with = "crate::cserde")]
    pub z: C64,
}

impl ScalarPoint {
    pub fn new(eta: C64, z: C64) -> Self {
        ScalarPoint { eta, z }
    }
}

/// Sums `term(0) + term(1) + ...` until three consecutive terms fall below
/// `series_tol * (|partial sum| + 1)`.
fn sum_series<F>(params: &LatticeParams, mut term: F) -> Result<C64>
where
    F: FnMut(usize) -> C64,
{
    let mut sum = C64::new(0.0, 0.0);
    let mut quiet = 0;
    for k in 0..params.max_terms {
        let t = term(k);
        sum += t;
        if t.norm() < params.series_tol * (sum.norm() + 1.0) {
            quiet += 1;
            if quiet == 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged {
        max_terms: params.max_terms,
    })
}

fn sin_deriv(x: C64, order: u32) -> C64 {
    match order % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

/// `d^order/dw^order ϑ(w)` from the term-wise differentiated sine series.
fn theta_series(w: C64, order: u32, params: &LatticeParams) -> Result<C64> {
    let tau = params.tau;
    sum_series(params, |k| {
        let half = k as f64 + 0.5;
        let freq = (2 * k + 1) as f64 * PI;
        let sign = if k % 2 == 0 { 2.0 } else { -2.0 };
        let nome = (I * PI * tau * (half * half)).exp();
        nome * sign * freq.powi(order as i32) * sin_deriv(w * freq, order)
    })
}

/// `ϑ'(0)`.
fn theta_prime_zero(params: &LatticeParams) -> Result<C64> {
    theta_series(C64::new(0.0, 0.0), 1, params)
}

/// Odd Jacobi theta function `ϑ(z|τ)`.
pub fn theta(z: C64, params: &LatticeParams) -> Result<C64> {
    params.require_elliptic()?;
    params.validate()?;
    let (w, m, n) = params.reduce(z);
    let base = theta_series(w, 0, params)?;
    let nf = n as f64;
    let sign = if (m + n).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let factor = (-I * PI * params.tau * (nf * nf) - I * (2.0 * PI * nf) * w).exp();
    Ok(base * factor * sign)
}

/// Coefficients of `d^order/dx^order f` as a polynomial in `f`, where
/// `f' = a + b f²` (cot: a = b = -1, coth: a = 1, b = -1).
fn riccati_poly(order: u32, a: f64, b: f64) -> Vec<f64> {
    let mut poly = vec![0.0, 1.0];
    for _ in 0..order {
        let mut deriv = vec![0.0; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate().skip(1) {
            let dc = c * k as f64;
            deriv[k - 1] += dc * a;
            deriv[k + 1] += dc * b;
        }
        poly = deriv;
    }
    poly
}

fn horner(poly: &[f64], x: C64) -> C64 {
    poly.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn coth(z: C64) -> C64 {
    z.cosh() / z.sinh()
}

/// Lambert series for the elliptic `E₁^{(order)}` on a reduced argument.
fn e1_lambert(w: C64, order: u32, params: &LatticeParams) -> Result<C64> {
    let x = w * PI;
    let cot = x.cos() / x.sin();
    let head = horner(&riccati_poly(order, -1.0, -1.0), cot) * PI.powi(order as i32 + 1);
    let tau = params.tau;
    let tail = sum_series(params, |k| {
        let n = (k + 1) as f64;
        let q2n = (I * (2.0 * PI * n) * tau).exp();
        let freq = 2.0 * PI * n;
        q2n / (1.0 - q2n) * freq.powi(order as i32) * sin_deriv(w * freq, order)
    })?;
    Ok(head + tail * (4.0 * PI))
}

/// `d^order/dz^order E₁(z)`.
pub fn eisenstein_e1_deriv(z: C64, order: u32, params: &LatticeParams) -> Result<C64> {
    params.check_off_lattice(z, "E1 argument")?;
    match params.kind {
        FunctionKind::Rational => {
            let k = order as i32;
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            Ok(z.powi(-(k + 1)) * (sign * factorial(order)))
        }
        FunctionKind::Trigonometric => Ok(horner(&riccati_poly(order, 1.0, -1.0), coth(z))),
        FunctionKind::Elliptic => {
            let (w, _, n) = params.reduce(z);
            if order == 0 {
                let value = theta_series(w, 1, params)? / theta_series(w, 0, params)?;
                Ok(value - I * (2.0 * PI * n as f64))
            } else {
                e1_lambert(w, order, params)
            }
        }
    }
}

/// First Eisenstein function `E₁(z)`: `1/z`, `coth z` or `ϑ'(z)/ϑ(z)`.
pub fn eisenstein_e1(z: C64, params: &LatticeParams) -> Result<C64> {
    eisenstein_e1_deriv(z, 0, params)
}

/// Elliptic `E₁` evaluated through its Lambert series instead of `ϑ'/ϑ`.
pub fn eisenstein_e1_lambert(z: C64, params: &LatticeParams) -> Result<C64> {
    params.require_elliptic()?;
    params.check_off_lattice(z, "E1 argument")?;
    let (w, _, n) = params.reduce(z);
    Ok(e1_lambert(w, 0, params)? - I * (2.0 * PI * n as f64))
}

/// `d^deriv_order/dz^deriv_order ℘(z)`.
pub fn weierstrass_p(z: C64, deriv_order: u32, params: &LatticeParams) -> Result<C64> {
    if deriv_order > MAX_P_DERIV {
        return Err(Error::UnsupportedDerivOrder(deriv_order));
    }
    params.check_off_lattice(z, "wp argument")?;
    match params.kind {
        FunctionKind::Rational => {
            let sign = if deriv_order % 2 == 0 { 1.0 } else { -1.0 };
            Ok(z.powi(-(deriv_order as i32 + 2)) * (sign * factorial(deriv_order + 1)))
        }
        FunctionKind::Trigonometric => {
            if deriv_order == 0 {
                let s = z.sinh();
                Ok(1.0 / (s * s))
            } else {
                Ok(-eisenstein_e1_deriv(z, deriv_order + 1, params)?)
            }
        }
        FunctionKind::Elliptic => {
            let (w, _, _) = params.reduce(z);
            let value = -e1_lambert(w, deriv_order + 1, params)?;
            if deriv_order == 0 {
                Ok(value + weierstrass_shift(params)?)
            } else {
                Ok(value)
            }
        }
    }
}

/// The constant `ϑ'''(0)/(3ϑ'(0))` relating `-E₁'` to `℘`.
pub fn weierstrass_shift(params: &LatticeParams) -> Result<C64> {
    params.require_elliptic()?;
    let zero = C64::new(0.0, 0.0);
    Ok(theta_series(zero, 3, params)? / (theta_series(zero, 1, params)? * 3.0))
}

/// Kronecker function `φ(η, z)`.
pub fn kronecker_phi(p: ScalarPoint, params: &LatticeParams) -> Result<C64> {
    params.check_off_lattice(p.eta, "phi eta")?;
    params.check_off_lattice(p.z, "phi z")?;
    match params.kind {
        FunctionKind::Rational => Ok(1.0 / p.eta + 1.0 / p.z),
        FunctionKind::Trigonometric => Ok(coth(p.eta) + coth(p.z)),
        FunctionKind::Elliptic => {
            let num = theta_prime_zero(params)? * theta(p.eta + p.z, params)?;
            Ok(num / (theta(p.eta, params)? * theta(p.z, params)?))
        }
    }
}

/// `∂φ/∂η = (E₁(η+z) - E₁(η)) φ(η, z)`.
pub fn kronecker_phi_deta(p: ScalarPoint, params: &LatticeParams) -> Result<C64> {
    params.check_off_lattice(p.eta + p.z, "phi eta+z")?;
    let e1_sum = eisenstein_e1(p.eta + p.z, params)?;
    let e1_eta = eisenstein_e1(p.eta, params)?;
    Ok((e1_sum - e1_eta) * kronecker_phi(p, params)?)
}

/// Right-hand side of the shifted derivative formula
/// `(E₁(z+y) - E₁(y)) φ(η,z) - φ(η,z+y) φ(η,-y)`; independent of `y`.
pub fn kronecker_phi_deta_shifted(p: ScalarPoint, y: C64, params: &LatticeParams) -> Result<C64> {
    params.check_off_lattice(y, "auxiliary y")?;
    params.check_off_lattice(p.z + y, "z + y")?;
    let e1 = eisenstein_e1(p.z + y, params)? - eisenstein_e1(y, params)?;
    let phi = kronecker_phi(p, params)?;
    let cross = kronecker_phi(ScalarPoint::new(p.eta, p.z + y), params)?
        * kronecker_phi(ScalarPoint::new(p.eta, -y), params)?;
    Ok(e1 * phi - cross)
}

/// Residual of the degenerate Fay identity
/// `φ(η,z)φ(η,w) = φ(η,z+w)(E₁(η) + E₁(z) + E₁(w) - E₁(z+w+η))`.
pub fn degenerate_fay_residual(eta: C64, z: C64, w: C64, params: &LatticeParams) -> Result<f64> {
    for (what, v) in [("z + w", z + w), ("z + w + eta", z + w + eta)] {
        params.check_off_lattice(v, what)?;
    }
    let lhs = kronecker_phi(ScalarPoint::new(eta, z), params)?
        * kronecker_phi(ScalarPoint::new(eta, w), params)?;
    let e1 = eisenstein_e1(eta, params)? + eisenstein_e1(z, params)? + eisenstein_e1(w, params)?
        - eisenstein_e1(z + w + eta, params)?;
    let rhs = kronecker_phi(ScalarPoint::new(eta, z + w), params)? * e1;
    Ok((lhs - rhs).norm())
}

/// Absolute residual of the Fay identity
/// `φ(ħ,z)φ(η,w) = φ(ħ-η,z)φ(η,z+w) + φ(η-ħ,w)φ(ħ,z+w)`.
///
/// With `η == ħ` exactly the degenerate form is checked instead.
pub fn fay_check(hbar: C64, eta: C64, z: C64, w: C64, params: &LatticeParams) -> Result<f64> {
    if hbar == eta {
        return degenerate_fay_residual(eta, z, w, params);
    }
    let diff = hbar - eta;
    if params.pole_distance(diff) < params.exclusion_radius {
        return Err(Error::DegenerateArguments(format!(
            "hbar - eta = {diff} is within the exclusion radius but not zero"
        )));
    }
    params.check_off_lattice(z + w, "z + w")?;
    let phi = |a: C64, b: C64| kronecker_phi(ScalarPoint::new(a, b), params);
    let lhs = phi(hbar, z)? * phi(eta, w)?;
    let rhs = phi(diff, z)? * phi(eta, z + w)? + phi(-diff, w)? * phi(hbar, z + w)?;
    Ok((lhs - rhs).norm())
}

/// Sum over the `(n-1)!` closed paths `a → i₁ → … → i_{n-1} → a` of
/// `φ(η, z_a - z_{i₁}) ⋯ φ(η, z_{i_{n-1}} - z_a)`, in lexicographic order.
///
/// `a` is 1-based.
pub fn scalar_cyclic_sum(
    n: usize,
    a: usize,
    eta: C64,
    points: &[C64],
    params: &LatticeParams,
) -> Result<C64> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!(
            "cyclic sums need n >= 2, got {n}"
        )));
    }
    if points.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: points.len(),
        });
    }
    let orderings = cyclic_orderings(n, a)?;
    let table = phi_table(eta, points, params)?;
    let mut total = C64::new(0.0, 0.0);
    for path in &orderings {
        total += cycle_product(&table, n, a, path);
    }
    Ok(total)
}

/// `φ(η, z_i - z_j)` for all ordered pairs `i ≠ j` (0-based, row-major).
pub(crate) fn phi_table(eta: C64, points: &[C64], params: &LatticeParams) -> Result<Vec<C64>> {
    let n = points.len();
    let mut table = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let z = points[i] - points[j];
                table[i * n + j] = kronecker_phi(ScalarPoint::new(eta, z), params).map_err(
                    |e| match e {
                        Error::PoleProximity { distance, radius, .. } => Error::PoleProximity {
                            what: format!("z_{} - z_{}", i + 1, j + 1),
                            distance,
                            radius,
                        },
                        other => other,
                    },
                )?;
            }
        }
    }
    Ok(table)
}

pub(crate) fn cycle_product(table: &[C64], n: usize, a: usize, path: &[usize]) -> C64 {
    let mut prev = a - 1;
    let mut acc = C64::new(1.0, 0.0);
    for &next in path.iter().chain(std::iter::once(&a)) {
        acc *= table[prev * n + next - 1];
        prev = next - 1;
    }
    acc
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}
