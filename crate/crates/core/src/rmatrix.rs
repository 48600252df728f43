//! Yang and Belavin R-matrices in the fundamental representation.
//!
//! The Belavin R-matrix is assembled as
//! `R^ħ(z) = Σ_α exp(2πi α₂ z/N) φ(z, ω_α + ħ) T_α ⊗ T_{-α}` with
//! `ω_α = (α₁ + α₂τ)/N`, normalised so that `R₁₂R₂₁ = N²(℘(Nħ) - ℘(z))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    eisenstein_e1, kronecker_phi, kronecker_phi_deta, weierstrass_p, FunctionKind, LatticeParams,
    ScalarPoint, C64,
};
use crate::tensor::{
    contract_sites, embed_two_site, matrix_distance, permutation_operator, SquareMatrix,
    TensorOperator, TensorSpace, DEFAULT_SIZE_CAP,
};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RMatrixKind {
    Yang,
    Belavin,
}

/// Everything needed to evaluate `R^ħ(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RMatrixSpec {
    pub kind: RMatrixKind,
    pub site_dim: usize,
    #[serde(with = "crate::cserde")]
    pub hbar: C64,
    pub lattice: LatticeParams,
}

impl RMatrixSpec {
    pub fn new(kind: RMatrixKind, site_dim: usize, hbar: C64, lattice: LatticeParams) -> Result<Self> {
        let spec = RMatrixSpec {
            kind,
            site_dim,
            hbar,
            lattice,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn yang(site_dim: usize, hbar: C64) -> Result<Self> {
        Self::new(RMatrixKind::Yang, site_dim, hbar, LatticeParams::rational())
    }

    pub fn belavin(site_dim: usize, hbar: C64, tau: C64) -> Result<Self> {
        Self::new(RMatrixKind::Belavin, site_dim, hbar, LatticeParams::elliptic(tau)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.site_dim == 0 {
            return Err(Error::InvalidParameters("N must be positive".into()));
        }
        self.lattice.validate()?;
        match (self.kind, self.lattice.kind) {
            (RMatrixKind::Yang, FunctionKind::Rational)
            | (RMatrixKind::Belavin, FunctionKind::Elliptic) => {}
            (RMatrixKind::Yang, other) => {
                return Err(Error::InvalidParameters(format!(
                    "Yang R-matrix needs rational functions, got {}",
                    other.name()
                )))
            }
            (RMatrixKind::Belavin, _) => return Err(Error::NonEllipticKind),
        }
        if self.hbar == C64::new(0.0, 0.0) {
            return Err(Error::ZeroArgument("hbar"));
        }
        self.lattice.check_off_lattice(self.hbar, "hbar")?;
        self.lattice
            .check_off_lattice(self.hbar * self.site_dim as f64, "N*hbar")?;
        Ok(())
    }

    pub fn with_hbar(&self, hbar: C64) -> Result<Self> {
        Self::new(self.kind, self.site_dim, hbar, self.lattice)
    }

    /// `Nħ`, the argument of the scalar right-hand sides.
    pub fn n_hbar(&self) -> C64 {
        self.hbar * self.site_dim as f64
    }

    /// `R^ħ₁₂(z)` as an `N² × N²` matrix.
    pub fn r_matrix(&self, z: C64) -> Result<SquareMatrix> {
        match self.kind {
            RMatrixKind::Yang => {
                self.lattice.check_off_lattice(z, "spectral parameter")?;
                yang_r(self.hbar, z, self.site_dim)
            }
            RMatrixKind::Belavin => belavin_r(self, z),
        }
    }
}

/// Element `(α₁, α₂)` of `ℤ_N × ℤ_N`, stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub alpha1: usize,
    pub alpha2: usize,
}

impl BasisIndex {
    pub fn new(alpha1: i64, alpha2: i64, n: usize) -> Self {
        let m = n as i64;
        BasisIndex {
            alpha1: alpha1.rem_euclid(m) as usize,
            alpha2: alpha2.rem_euclid(m) as usize,
        }
    }

    /// All `N²` indices in row-major order.
    pub fn all(n: usize) -> impl Iterator<Item = BasisIndex> {
        (0..n).flat_map(move |a1| (0..n).map(move |a2| BasisIndex { alpha1: a1, alpha2: a2 }))
    }

    pub fn is_zero(&self) -> bool {
        self.alpha1 == 0 && self.alpha2 == 0
    }

    /// `ω_α = (α₁ + α₂τ)/N`.
    pub fn omega(&self, n: usize, tau: C64) -> C64 {
        (tau * self.alpha2 as f64 + self.alpha1 as f64) / n as f64
    }
}

/// `T_α` for an unreduced integer index:
/// `exp(πi α₁α₂/N) Q^{α₁} Λ^{α₂}` with `Q = diag(ω^k)` and `Λ e_k = e_{k-1}`.
///
/// The phase depends on the representative, so `T_{-α}` must be taken with
/// negated (not reduced) components to get `T_α T_{-α} = 1`.
pub fn t_basis_signed(alpha1: i64, alpha2: i64, n: usize) -> SquareMatrix {
    let m = n as i64;
    let phase = (I * (PI * (alpha1 * alpha2) as f64 / n as f64)).exp();
    let shift = alpha2.rem_euclid(m) as usize;
    let q_pow = alpha1.rem_euclid(m);
    let mut t = SquareMatrix::zeros(n);
    for col in 0..n {
        let row = (col + n - shift) % n;
        let root = (I * (2.0 * PI * ((q_pow * row as i64) % m) as f64 / n as f64)).exp();
        t.set(row, col, phase * root);
    }
    t
}

/// `T_α` on the reduced representative of `α`.
pub fn t_basis(alpha: BasisIndex, n: usize) -> SquareMatrix {
    t_basis_signed(alpha.alpha1 as i64, alpha.alpha2 as i64, n)
}

/// `T_{-α} = T_α^{-1}`.
pub fn t_basis_inverse(alpha: BasisIndex, n: usize) -> SquareMatrix {
    t_basis_signed(-(alpha.alpha1 as i64), -(alpha.alpha2 as i64), n)
}

/// `T_α ⊗ T_{-α}`.
fn t_pair(alpha: BasisIndex, n: usize) -> SquareMatrix {
    t_basis(alpha, n).kron(&t_basis_inverse(alpha, n))
}

/// Multiplication phase `κ_{α,β} = exp(πi(β₁α₂ - β₂α₁)/N)`.
pub fn kappa(alpha: (i64, i64), beta: (i64, i64), n: usize) -> C64 {
    (I * (PI * (beta.0 * alpha.1 - beta.1 * alpha.0) as f64 / n as f64)).exp()
}

/// Rational Yang R-matrix `1/ħ + (N/z) P`.
pub fn yang_r(hbar: C64, z: C64, n: usize) -> Result<SquareMatrix> {
    if hbar == C64::new(0.0, 0.0) {
        return Err(Error::ZeroArgument("hbar"));
    }
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroArgument("z"));
    }
    let mut r = SquareMatrix::identity(n * n).scale(1.0 / hbar);
    r.add_scaled(&permutation_operator(n), n as f64 / z);
    Ok(r)
}

/// Weighted Kronecker factor `exp(2πi α₂ z/N) φ(z, ω_α + u)`.
fn phi_alpha(spec: &RMatrixSpec, alpha: BasisIndex, z: C64, u: C64) -> Result<C64> {
    let n = spec.site_dim;
    let arg = alpha.omega(n, spec.lattice.tau) + u;
    let weight = (I * (2.0 * PI * alpha.alpha2 as f64 / n as f64) * z).exp();
    let phi = kronecker_phi(ScalarPoint::new(arg, z), &spec.lattice)
        .map_err(|e| tag_alpha(e, alpha))?;
    Ok(weight * phi)
}

/// `∂_u` of [`phi_alpha`].
fn phi_alpha_du(spec: &RMatrixSpec, alpha: BasisIndex, z: C64, u: C64) -> Result<C64> {
    let n = spec.site_dim;
    let arg = alpha.omega(n, spec.lattice.tau) + u;
    let weight = (I * (2.0 * PI * alpha.alpha2 as f64 / n as f64) * z).exp();
    let d = kronecker_phi_deta(ScalarPoint::new(arg, z), &spec.lattice)
        .map_err(|e| tag_alpha(e, alpha))?;
    Ok(weight * d)
}

fn tag_alpha(e: Error, alpha: BasisIndex) -> Error {
    match e {
        Error::PoleProximity {
            what,
            distance,
            radius,
        } => Error::PoleProximity {
            what: format!("{what} (alpha = ({}, {}))", alpha.alpha1, alpha.alpha2),
            distance,
            radius,
        },
        other => other,
    }
}

fn require_belavin(spec: &RMatrixSpec) -> Result<()> {
    if spec.kind != RMatrixKind::Belavin || spec.lattice.kind != FunctionKind::Elliptic {
        return Err(Error::NonEllipticKind);
    }
    Ok(())
}

/// Sums `coeff(α) T_α ⊗ T_{-α}` over `α`, skipping `α = 0` when asked.
fn alpha_sum(
    spec: &RMatrixSpec,
    skip_zero: bool,
    mut coeff: impl FnMut(BasisIndex) -> Result<C64>,
) -> Result<SquareMatrix> {
    let n = spec.site_dim;
    let mut out = SquareMatrix::zeros(n * n);
    for alpha in BasisIndex::all(n) {
        if skip_zero && alpha.is_zero() {
            continue;
        }
        out.add_scaled(&t_pair(alpha, n), coeff(alpha)?);
    }
    Ok(out)
}

/// Belavin R-matrix `R^ħ₁₂(z)`.
pub fn belavin_r(spec: &RMatrixSpec, z: C64) -> Result<SquareMatrix> {
    require_belavin(spec)?;
    spec.lattice.check_off_lattice(z, "spectral parameter")?;
    alpha_sum(spec, false, |alpha| phi_alpha(spec, alpha, z, spec.hbar))
}

/// `R^ħ_{aa}(z)`: both factors of `R` identified on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SameSite {
    pub matrix: SquareMatrix,
    /// `Σ_α φ_α(z, ω_α + ħ)` (Belavin) or the identity coefficient (Yang).
    pub fourier_sum: C64,
    /// `N φ(Nħ, z/N)`.
    pub closed_form: C64,
}

pub fn r_same_site(spec: &RMatrixSpec, z: C64) -> Result<SameSite> {
    let n = spec.site_dim;
    spec.lattice.check_off_lattice(z, "spectral parameter")?;
    let nf = n as f64;
    let closed_form =
        kronecker_phi(ScalarPoint::new(spec.n_hbar(), z / nf), &spec.lattice)? * nf;
    match spec.kind {
        RMatrixKind::Yang => {
            let matrix = contract_sites(&yang_r(spec.hbar, z, n)?, n)?;
            let fourier_sum = matrix.trace() / nf;
            Ok(SameSite {
                matrix,
                fourier_sum,
                closed_form,
            })
        }
        RMatrixKind::Belavin => {
            let mut matrix = SquareMatrix::zeros(n);
            let mut fourier_sum = C64::new(0.0, 0.0);
            for alpha in BasisIndex::all(n) {
                let c = phi_alpha(spec, alpha, z, spec.hbar)?;
                fourier_sum += c;
                matrix.add_scaled(&(&t_basis(alpha, n) * &t_basis_inverse(alpha, n)), c);
            }
            Ok(SameSite {
                matrix,
                fourier_sum,
                closed_form,
            })
        }
    }
}

/// `∂R^ħ(z)/∂ħ`, term by term.
pub fn r_matrix_hbar_derivative(spec: &RMatrixSpec, z: C64) -> Result<SquareMatrix> {
    let n = spec.site_dim;
    match spec.kind {
        RMatrixKind::Yang => {
            spec.lattice.check_off_lattice(z, "spectral parameter")?;
            Ok(SquareMatrix::identity(n * n).scale(-1.0 / (spec.hbar * spec.hbar)))
        }
        RMatrixKind::Belavin => {
            spec.lattice.check_off_lattice(z, "spectral parameter")?;
            alpha_sum(spec, false, |alpha| phi_alpha_du(spec, alpha, z, spec.hbar))
        }
    }
}

/// Laurent coefficients of `R^ħ(z)` at `ħ = 0`:
/// `R = leading/ħ + r + ħ m + O(ħ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPair {
    pub r: SquareMatrix,
    pub m: SquareMatrix,
    /// Coefficient of `1/ħ`; the identity for both kinds.
    pub leading: SquareMatrix,
    /// Distance between the quadratures with `K` and `2K` nodes.
    pub extraction_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionOptions {
    /// Contour radius in the ħ-plane; `None` picks the default.
    pub radius: Option<f64>,
    /// Number of trapezoidal nodes `K` (the check uses `2K` as well).
    pub points: usize,
    /// Largest acceptable `K` vs `2K` discrepancy.
    pub max_residual: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            radius: None,
            points: 64,
            max_residual: 1e-6,
        }
    }
}

fn default_radius(spec: &RMatrixSpec) -> f64 {
    match spec.kind {
        // R is linear in 1/ħ, so any circle works; a wide one keeps roundoff small
        RMatrixKind::Yang => 1.0,
        RMatrixKind::Belavin => 0.05 * spec.lattice.min_half_period(),
    }
}

struct Laurent {
    leading: SquareMatrix,
    r: SquareMatrix,
    m: SquareMatrix,
}

fn contour_coefficients(spec: &RMatrixSpec, z: C64, radius: f64, points: usize) -> Result<Laurent> {
    let dim = spec.site_dim * spec.site_dim;
    let mut leading = SquareMatrix::zeros(dim);
    let mut r = SquareMatrix::zeros(dim);
    let mut m = SquareMatrix::zeros(dim);
    let weight = 1.0 / points as f64;
    for j in 0..points {
        let h = C64::from_polar(radius, 2.0 * PI * j as f64 / points as f64);
        let value = spec
            .with_hbar(h)
            .and_then(|s| s.r_matrix(z))
            .map_err(|e| Error::ExpansionFailed(e.to_string()))?;
        leading.add_scaled(&value, h * weight);
        r.add_scaled(&value, C64::new(weight, 0.0));
        m.add_scaled(&value, weight / h);
    }
    Ok(Laurent { leading, r, m })
}

/// Classical `r` and `m` by trapezoidal Cauchy quadrature on `|ħ| = ρ`.
pub fn classical_expansion(spec: &RMatrixSpec, z: C64) -> Result<ClassicalPair> {
    classical_expansion_with(spec, z, ExpansionOptions::default())
}

pub fn classical_expansion_with(
    spec: &RMatrixSpec,
    z: C64,
    opts: ExpansionOptions,
) -> Result<ClassicalPair> {
    spec.lattice.check_off_lattice(z, "spectral parameter")?;
    if opts.points < 4 {
        return Err(Error::InvalidParameters("contour needs at least 4 nodes".into()));
    }
    let radius = opts.radius.unwrap_or_else(|| default_radius(spec));
    if !(radius > 0.0) {
        return Err(Error::InvalidParameters("contour radius must be positive".into()));
    }
    if spec.kind == RMatrixKind::Belavin {
        let n = spec.site_dim;
        // the other poles of R in ħ sit at -ω_α modulo the lattice
        let nearest = BasisIndex::all(n)
            .filter(|a| !a.is_zero())
            .map(|a| spec.lattice.pole_distance(a.omega(n, spec.lattice.tau)))
            .fold(f64::INFINITY, f64::min);
        if nearest < 2.0 * radius {
            return Err(Error::ContourHitsPole {
                radius,
                pole_distance: nearest,
            });
        }
    }
    let coarse = contour_coefficients(spec, z, radius, opts.points)?;
    let fine = contour_coefficients(spec, z, radius, 2 * opts.points)?;
    let residual = matrix_distance(&coarse.leading, &fine.leading)
        .max(matrix_distance(&coarse.r, &fine.r))
        .max(matrix_distance(&coarse.m, &fine.m));
    if !(residual <= opts.max_residual) {
        return Err(Error::QuadratureNotConverged { residual });
    }
    Ok(ClassicalPair {
        r: fine.r,
        m: fine.m,
        leading: fine.leading,
        extraction_residual: residual,
    })
}

/// Classical `r` and `m` from the per-term expansion of the Kronecker
/// factors: the `α = 0` term contributes `1/ħ + E₁(z) + ħ(E₁² - ℘)/2`, the
/// others their Taylor coefficients at `ħ = 0`.
pub fn classical_expansion_analytic(spec: &RMatrixSpec, z: C64) -> Result<ClassicalPair> {
    let n = spec.site_dim;
    spec.lattice.check_off_lattice(z, "spectral parameter")?;
    let leading = SquareMatrix::identity(n * n);
    match spec.kind {
        RMatrixKind::Yang => Ok(ClassicalPair {
            r: permutation_operator(n).scale(C64::new(n as f64, 0.0) / z),
            m: SquareMatrix::zeros(n * n),
            leading,
            extraction_residual: 0.0,
        }),
        RMatrixKind::Belavin => {
            let e1 = eisenstein_e1(z, &spec.lattice)?;
            let wp = weierstrass_p(z, 0, &spec.lattice)?;
            let zero = C64::new(0.0, 0.0);
            let mut r = alpha_sum(spec, true, |alpha| phi_alpha(spec, alpha, z, zero))?;
            let mut m = alpha_sum(spec, true, |alpha| phi_alpha_du(spec, alpha, z, zero))?;
            r.add_scaled(&leading, e1);
            m.add_scaled(&leading, (e1 * e1 - wp) * 0.5);
            Ok(ClassicalPair {
                r,
                m,
                leading,
                extraction_residual: 0.0,
            })
        }
    }
}

/// Both evaluations of `J^ħ_ab = ∂_ħ R^ħ_ab`.
#[derive(Debug, Clone, PartialEq)]
pub struct HbarDerivative {
    /// Term-wise derivative of `R^ħ(z_a - z_b)`.
    pub analytic: SquareMatrix,
    /// `R_ab r_ac + r_cb R_ab - R_ac R_cb` on sites `(a, b, c) = (1, 2, 3)`.
    pub structural: TensorOperator,
    /// `structural` with site 3 traced out.
    pub projected: SquareMatrix,
    /// Relative distance between `structural` and the embedded `analytic`.
    pub distance: f64,
}

pub fn r_deriv_hbar(spec: &RMatrixSpec, z_a: C64, z_b: C64, z_c: C64) -> Result<HbarDerivative> {
    let n = spec.site_dim;
    let analytic = r_matrix_hbar_derivative(spec, z_a - z_b)?;
    let space = TensorSpace::new(n, 3, DEFAULT_SIZE_CAP)?;
    let expansion = |z: C64| {
        classical_expansion(spec, z).map_err(|e| match e {
            Error::ExpansionFailed(_) => e,
            other => Error::ExpansionFailed(other.to_string()),
        })
    };
    let r_ac = expansion(z_a - z_c)?.r;
    let r_cb = expansion(z_c - z_b)?.r;
    let big_ab = embed_two_site(&spec.r_matrix(z_a - z_b)?, 1, 2, space)?;
    let big_ac = embed_two_site(&spec.r_matrix(z_a - z_c)?, 1, 3, space)?;
    let big_cb = embed_two_site(&spec.r_matrix(z_c - z_b)?, 3, 2, space)?;
    let first = big_ab.compose(&embed_two_site(&r_ac, 1, 3, space)?)?;
    let second = embed_two_site(&r_cb, 3, 2, space)?.compose(&big_ab)?;
    let third = big_ac.compose(&big_cb)?;
    let structural = first.sum(&second)?.difference(&third)?;
    let projected = structural.partial_trace_normalized(3)?.into_matrix();
    let embedded = embed_two_site(&analytic, 1, 2, space)?;
    let distance = crate::tensor::frobenius_distance(&structural, &embedded)?;
    Ok(HbarDerivative {
        analytic,
        structural,
        projected,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::swap_sites;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn id(n: usize) -> SquareMatrix {
        SquareMatrix::identity(n)
    }

    #[test]
    fn t_zero_is_identity() {
        for n in 1..=4 {
            assert_eq!(t_basis(BasisIndex::new(0, 0, n), n), id(n));
        }
    }

    #[test]
    fn t_algebra_holds_for_all_pairs() {
        for n in 1..=4usize {
            for a in BasisIndex::all(n) {
                for b in BasisIndex::all(n) {
                    let (a1, a2) = (a.alpha1 as i64, a.alpha2 as i64);
                    let (b1, b2) = (b.alpha1 as i64, b.alpha2 as i64);
                    let lhs = &t_basis(a, n) * &t_basis(b, n);
                    let rhs = t_basis_signed(a1 + b1, a2 + b2, n)
                        .scale(kappa((a1, a2), (b1, b2), n));
                    assert!(matrix_distance(&lhs, &rhs) < 1e-14, "N={n} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn t_phase_example_two() {
        let lhs = &t_basis(BasisIndex::new(0, 1, 2), 2) * &t_basis(BasisIndex::new(1, 0, 2), 2);
        let rhs = t_basis(BasisIndex::new(1, 1, 2), 2).scale(I);
        assert!(matrix_distance(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn t_inverse_pairs() {
        for n in [2, 3] {
            for a in BasisIndex::all(n) {
                let prod = &t_basis(a, n) * &t_basis_inverse(a, n);
                assert!(matrix_distance(&prod, &id(n)) < 1e-14);
            }
        }
    }

    #[test]
    fn basis_index_reduces() {
        assert_eq!(BasisIndex::new(-1, 5, 3), BasisIndex { alpha1: 2, alpha2: 2 });
    }

    #[test]
    fn yang_unitarity_closed_form() {
        let (h, z, n) = (c(0.3, 0.1), c(0.7, -0.2), 3);
        let r12 = yang_r(h, z, n).unwrap();
        let r21 = swap_sites(&yang_r(h, -z, n).unwrap(), n);
        let expected = id(9).scale(1.0 / (h * h) - (n * n) as f64 / (z * z));
        assert!(matrix_distance(&(&r12 * &r21), &expected) < 1e-13);
    }

    #[test]
    fn yang_skew_symmetry() {
        let (h, z, n) = (c(0.3, 0.1), c(0.7, -0.2), 2);
        let lhs = yang_r(h, z, n).unwrap();
        let rhs = swap_sites(&yang_r(-h, -z, n).unwrap(), n).scale(c(-1.0, 0.0));
        assert!(matrix_distance(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn yang_single_site_is_phi() {
        let r = yang_r(c(0.5, 0.0), c(0.25, 0.0), 1).unwrap();
        assert!((r.get(0, 0) - (2.0 + 4.0)).norm() < 1e-15);
    }

    #[test]
    fn yang_zero_arguments() {
        assert_eq!(yang_r(c(0.0, 0.0), c(1.0, 0.0), 2), Err(Error::ZeroArgument("hbar")));
        assert_eq!(yang_r(c(1.0, 0.0), c(0.0, 0.0), 2), Err(Error::ZeroArgument("z")));
    }

    #[test]
    fn belavin_single_site_is_phi() {
        let spec = RMatrixSpec::belavin(1, c(0.17, 0.06), c(0.1, 1.1)).unwrap();
        let z = c(0.33, 0.12);
        let r = belavin_r(&spec, z).unwrap();
        let phi = kronecker_phi(ScalarPoint::new(z, spec.hbar), &spec.lattice).unwrap();
        assert!((r.get(0, 0) - phi).norm() < 1e-12 * phi.norm());
    }

    #[test]
    fn belavin_unitarity() {
        for n in [2, 3] {
            let spec = RMatrixSpec::belavin(n, c(0.13, 0.04), I).unwrap();
            let z = c(0.31, 0.12);
            let r12 = belavin_r(&spec, z).unwrap();
            let r21 = swap_sites(&belavin_r(&spec, -z).unwrap(), n);
            let nn = (n * n) as f64;
            let coeff = (weierstrass_p(spec.n_hbar(), 0, &spec.lattice).unwrap()
                - weierstrass_p(z, 0, &spec.lattice).unwrap())
                * nn;
            let prod = &r12 * &r21;
            assert!(matrix_distance(&prod, &id(n * n).scale(coeff)) < 1e-10, "N={n}");
        }
    }

    #[test]
    fn belavin_skew_symmetry() {
        for n in [2, 3] {
            let spec = RMatrixSpec::belavin(n, c(0.13, 0.04), c(0.3, 0.9)).unwrap();
            let z = c(0.31, 0.12);
            let lhs = belavin_r(&spec, z).unwrap();
            let flipped = spec.with_hbar(-spec.hbar).unwrap();
            let rhs = swap_sites(&belavin_r(&flipped, -z).unwrap(), n).scale(c(-1.0, 0.0));
            assert!(matrix_distance(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn phi_slot_order_is_immaterial() {
        let p = LatticeParams::elliptic(c(0.3, 0.9)).unwrap();
        for (a, b) in [(c(0.31, 0.12), c(0.5, 0.2)), (c(-0.2, 0.4), c(0.13, 0.04))] {
            let x = kronecker_phi(ScalarPoint::new(a, b), &p).unwrap();
            let y = kronecker_phi(ScalarPoint::new(b, a), &p).unwrap();
            assert!((x - y).norm() < 1e-12 * x.norm());
        }
    }

    #[test]
    fn belavin_reports_offending_alpha() {
        // ω_(1,0) + ħ = 1/2 + ħ hits the lattice when ħ = 1/2
        let spec = RMatrixSpec::belavin(2, c(0.13, 0.0), I).unwrap();
        let bad = RMatrixSpec { hbar: c(0.5, 0.0), ..spec };
        let err = belavin_r(&bad, c(0.3, 0.1)).unwrap_err();
        match err {
            Error::PoleProximity { what, .. } => assert!(what.contains("alpha = (1, 0)"), "{what}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            RMatrixSpec::new(RMatrixKind::Belavin, 2, c(0.1, 0.0), LatticeParams::rational()),
            Err(Error::NonEllipticKind)
        );
        assert!(RMatrixSpec::new(RMatrixKind::Yang, 2, c(0.1, 0.0), LatticeParams::elliptic(I).unwrap()).is_err());
        assert!(RMatrixSpec::belavin(2, c(0.5, 0.0), I).is_err());
        assert!(RMatrixSpec::yang(2, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn same_site_yang() {
        let spec = RMatrixSpec::yang(3, c(0.4, 0.1)).unwrap();
        let z = c(0.6, -0.3);
        let s = r_same_site(&spec, z).unwrap();
        let expected = 1.0 / spec.hbar + 9.0 / z;
        assert!(matrix_distance(&s.matrix, &id(3).scale(expected)) < 1e-14);
        assert!((s.closed_form - expected).norm() < 1e-13);
    }

    #[test]
    fn same_site_belavin() {
        for (n, tau) in [(2, I), (3, c(0.3, 0.9)), (1, I)] {
            let spec = RMatrixSpec::belavin(n, c(0.11, 0.05), tau).unwrap();
            let z = c(0.37, 0.14);
            let s = r_same_site(&spec, z).unwrap();
            let scale = s.closed_form.norm().max(1.0);
            assert!((s.fourier_sum - s.closed_form).norm() < 1e-10 * scale, "N={n}");
            assert!(matrix_distance(&s.matrix, &id(n).scale(s.closed_form)) < 1e-10);
            let contracted = contract_sites(&belavin_r(&spec, z).unwrap(), n).unwrap();
            assert!(matrix_distance(&contracted, &s.matrix) < 1e-12);
        }
    }

    #[test]
    fn hbar_derivative_yang() {
        let spec = RMatrixSpec::yang(2, c(0.5, 0.2)).unwrap();
        let d = r_matrix_hbar_derivative(&spec, c(0.3, 0.0)).unwrap();
        let expected = id(4).scale(-1.0 / (spec.hbar * spec.hbar));
        assert_eq!(d, expected);
    }

    #[test]
    fn hbar_derivative_matches_finite_difference() {
        let spec = RMatrixSpec::belavin(2, c(0.12, 0.03), I).unwrap();
        let z = c(0.41, 0.17);
        let h = 1e-5;
        let plus = spec.with_hbar(spec.hbar + h).unwrap().r_matrix(z).unwrap();
        let minus = spec.with_hbar(spec.hbar - h).unwrap().r_matrix(z).unwrap();
        let fd = (&plus - &minus).scale(C64::new(0.5 / h, 0.0));
        let d = r_matrix_hbar_derivative(&spec, z).unwrap();
        assert!(matrix_distance(&d, &fd) < 1e-8);
    }

    #[test]
    fn structural_derivative_agrees_and_is_c_independent() {
        let spec = RMatrixSpec::belavin(2, c(0.12, 0.03), I).unwrap();
        let (za, zb) = (c(0.11, 0.05), c(0.47, 0.21));
        let d1 = r_deriv_hbar(&spec, za, zb, c(0.73, 0.1)).unwrap();
        let d2 = r_deriv_hbar(&spec, za, zb, c(0.29, 0.33)).unwrap();
        assert!(d1.distance < 1e-9, "{}", d1.distance);
        assert!(crate::tensor::frobenius_distance(&d1.structural, &d2.structural).unwrap() < 1e-9);
        assert!(matrix_distance(&d1.projected, &d1.analytic) < 1e-9);
    }

    #[test]
    fn yang_classical_pair() {
        let spec = RMatrixSpec::yang(3, c(0.4, 0.1)).unwrap();
        let z = c(0.6, -0.3);
        let pair = classical_expansion(&spec, z).unwrap();
        let expected_r = permutation_operator(3).scale(C64::new(3.0, 0.0) / z);
        assert!(matrix_distance(&pair.r, &expected_r) < 1e-12);
        assert!(pair.m.frobenius_norm() < 1e-12);
        assert!(matrix_distance(&pair.leading, &id(9)) < 1e-12);
    }

    #[test]
    fn belavin_classical_pair() {
        for (n, tau) in [(2, I), (3, c(0.3, 0.9))] {
            let spec = RMatrixSpec::belavin(n, c(0.12, 0.03), tau).unwrap();
            let z = c(0.36, 0.16);
            let pair = classical_expansion(&spec, z).unwrap();
            assert!(pair.extraction_residual < 1e-10, "{}", pair.extraction_residual);
            assert!(matrix_distance(&pair.leading, &id(n * n)) < 1e-10);
            let wp = weierstrass_p(z, 0, &spec.lattice).unwrap();
            let mut expected_m = &pair.r * &pair.r;
            expected_m.add_scaled(&id(n * n), -wp * (n * n) as f64);
            let expected_m = expected_m.scale(C64::new(0.5, 0.0));
            assert!(matrix_distance(&pair.m, &expected_m) < 1e-9);
            let analytic = classical_expansion_analytic(&spec, z).unwrap();
            assert!(matrix_distance(&pair.r, &analytic.r) < 1e-10);
            assert!(matrix_distance(&pair.m, &analytic.m) < 1e-10);
            // r skew, m symmetric under site swap with z -> -z
            let minus = classical_expansion(&spec, -z).unwrap();
            assert!(matrix_distance(&pair.r, &swap_sites(&minus.r, n).scale(c(-1.0, 0.0))) < 1e-10);
            assert!(matrix_distance(&pair.m, &swap_sites(&minus.m, n)) < 1e-10);
        }
    }

    #[test]
    fn contour_guard() {
        let spec = RMatrixSpec::belavin(2, c(0.12, 0.03), I).unwrap();
        let opts = ExpansionOptions {
            radius: Some(0.3),
            ..Default::default()
        };
        assert!(matches!(
            classical_expansion_with(&spec, c(0.3, 0.1), opts),
            Err(Error::ContourHitsPole { .. })
        ));
        let opts = ExpansionOptions {
            points: 4,
            max_residual: 1e-14,
            radius: Some(0.2),
        };
        assert!(matches!(
            classical_expansion_with(&spec, c(0.3, 0.1), opts),
            Err(Error::QuadratureNotConverged { .. })
        ));
    }
}
