//! Calogero-Moser Lax matrices built from R-matrices, and the classical-limit
//! relations (KZB flatness and the `1/ħ^{n-2}` anticommutator relation).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{IdentityCase, IdentityName, IdentityReport};
use crate::rmatrix::{
    classical_expansion_analytic, classical_expansion_with, r_deriv_hbar, ClassicalPair,
    ExpansionOptions, RMatrixKind, RMatrixSpec,
};
use crate::special::{kronecker_phi, weierstrass_p, ScalarPoint, C64};
use crate::tensor::{
    embed_two_site, is_scalar_operator, matrix_distance, swap_sites, SquareMatrix, TensorOperator,
    TensorSpace,
};

/// An `n`-particle Calogero system whose Lax matrix uses `spec`'s R-matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalogeroConfig {
    pub spec: RMatrixSpec,
    #[serde(with = "crate::cserde::vec")]
    pub momenta: Vec<C64>,
    #[serde(with = "crate::cserde::vec")]
    pub positions: Vec<C64>,
    #[serde(with = "crate::cserde")]
    pub nu: C64,
    pub size_cap: usize,
}

impl CalogeroConfig {
    pub fn new(spec: RMatrixSpec, momenta: Vec<C64>, positions: Vec<C64>, nu: C64) -> Result<Self> {
        let config = CalogeroConfig {
            spec,
            momenta,
            positions,
            nu,
            size_cap: crate::tensor::DEFAULT_SIZE_CAP,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_size_cap(mut self, cap: usize) -> Result<Self> {
        self.size_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn particles(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::InvalidParameters("need at least one particle".into()));
        }
        if self.momenta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.momenta.len(),
            });
        }
        let block = TensorSpace::new(self.spec.site_dim, n, self.size_cap)?.dim();
        let dim = block.saturating_mul(n);
        if dim > self.size_cap {
            return Err(Error::SizeCapExceeded {
                dim,
                cap: self.size_cap,
            });
        }
        for a in 0..n {
            for b in a + 1..n {
                self.spec.lattice.check_off_lattice(
                    self.positions[a] - self.positions[b],
                    &format!("z_{} - z_{}", a + 1, b + 1),
                )?;
            }
        }
        Ok(())
    }
}

/// An `n × n` matrix of `d × d` blocks stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub blocks: usize,
    pub block_dim: usize,
    pub matrix: SquareMatrix,
}

impl BlockMatrix {
    /// Block `(a, b)`, 0-based.
    pub fn block(&self, a: usize, b: usize) -> SquareMatrix {
        let d = self.block_dim;
        SquareMatrix::from_fn(d, |i, j| self.matrix.get(a * d + i, b * d + j))
    }

    pub fn pow(&self, k: u32) -> BlockMatrix {
        BlockMatrix {
            matrix: self.matrix.pow(k),
            ..*self
        }
    }
}

/// `L_ab = δ_ab p_a·1 + ν(1 - δ_ab) R^ħ_ab(z_a - z_b)` on `n` copies of the
/// `N^n`-dimensional space.
pub fn lax_rmatrix(config: &CalogeroConfig) -> Result<BlockMatrix> {
    config.validate()?;
    let n = config.particles();
    let space = TensorSpace::new(config.spec.site_dim, n, config.size_cap)?;
    let d = space.dim();
    let mut matrix = SquareMatrix::zeros(n * d);
    for a in 0..n {
        for i in 0..d {
            matrix.set(a * d + i, a * d + i, config.momenta[a]);
        }
        for b in 0..n {
            if a == b {
                continue;
            }
            let r = config.spec.r_matrix(config.positions[a] - config.positions[b])?;
            let block = embed_two_site(&r, a + 1, b + 1, space)?;
            for i in 0..d {
                for j in 0..d {
                    matrix.set(a * d + i, b * d + j, config.nu * block.matrix().get(i, j));
                }
            }
        }
    }
    Ok(BlockMatrix {
        blocks: n,
        block_dim: d,
        matrix,
    })
}

/// Krichever's scalar Lax matrix `l_ab = δ_ab p_a + ν(1 - δ_ab) Nφ(Nħ, z_a - z_b)`.
pub fn lax_krichever(config: &CalogeroConfig) -> Result<SquareMatrix> {
    config.validate()?;
    let n = config.particles();
    let spec = &config.spec;
    let nf = spec.site_dim as f64;
    let mut l = SquareMatrix::diagonal(&config.momenta);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let z = config.positions[a] - config.positions[b];
                let phi = kronecker_phi(ScalarPoint::new(spec.n_hbar(), z), &spec.lattice)?;
                l.set(a, b, config.nu * phi * nf);
            }
        }
    }
    Ok(l)
}

/// Checks that the diagonal blocks of `L^k` are scalar with coefficients
/// `(l^k)_aa`. Cases with `k < n` are extensions beyond the theorem and are
/// marked as such in the diagnostic.
pub fn check_trace_power_guess(config: &CalogeroConfig, k: usize) -> Result<IdentityReport> {
    let started = Instant::now();
    let n = config.particles();
    if k == 0 || k > n {
        return Err(Error::InvalidParameters(format!(
            "trace power k = {k} must lie in 1..={n}"
        )));
    }
    let name = IdentityName::TracePower { n, k };
    let mut case = IdentityCase::new(name, &config.spec, config.positions.clone());
    case.eta = Some(config.nu);
    let big = lax_rmatrix(config)?.pow(k as u32);
    let small = lax_krichever(config)?.pow(k as u32);
    let mut worst = 0.0f64;
    let mut worst_scalar = 0.0f64;
    let mut coeff_sum = C64::new(0.0, 0.0);
    for a in 0..n {
        let test = is_scalar_operator(&big.block(a, a), case.tol);
        let expected = small.get(a, a);
        worst = worst.max(test.residual);
        worst_scalar = worst_scalar.max((test.coeff - expected).norm() / (1.0 + expected.norm()));
        coeff_sum += test.coeff;
    }
    let trace = small.trace();
    let mut report = IdentityReport::from_parts(case);
    report.lhs_scalar = Some(coeff_sum);
    report.rhs_scalar = Some(trace);
    report.operator_residual = Some(worst);
    report.scalar_residual = Some(worst_scalar);
    report.consistency_residual = Some((coeff_sum - trace).norm() / (1.0 + trace.norm()));
    report.term_count = n;
    if k < n {
        report.diagnostic = Some(format!("extended guess: k = {k} < n = {n}"));
    }
    Ok(report.finish(started))
}

/// Contour extraction for Belavin; Yang's R is `1/ħ + r`, so its
/// coefficients are taken exactly.
fn expansion(spec: &RMatrixSpec, z: C64, opts: ExpansionOptions) -> Result<ClassicalPair> {
    let pair = match spec.kind {
        RMatrixKind::Yang => classical_expansion_analytic(spec, z),
        RMatrixKind::Belavin => classical_expansion_with(spec, z, opts),
    };
    pair.map_err(|e| match e {
        Error::ExpansionFailed(_) => e,
        other => Error::ExpansionFailed(other.to_string()),
    })
}

/// `r_ab` and `m_ab` for every ordered pair, embedded on `n` sites; indexed
/// `[a * n + b]` (0-based), diagonal entries empty.
struct Classical {
    r: Vec<Option<TensorOperator>>,
    m: Vec<Option<TensorOperator>>,
    extraction: f64,
}

fn classical_table(spec: &RMatrixSpec, points: &[C64], opts: ExpansionOptions) -> Result<Classical> {
    let n = points.len();
    let space = TensorSpace::new(spec.site_dim, n, usize::MAX)?;
    let mut r = vec![None; n * n];
    let mut m = vec![None; n * n];
    let mut extraction = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let pair = expansion(spec, points[a] - points[b], opts)?;
            extraction = extraction.max(pair.extraction_residual);
            r[a * n + b] = Some(embed_two_site(&pair.r, a + 1, b + 1, space)?);
            m[a * n + b] = Some(embed_two_site(&pair.m, a + 1, b + 1, space)?);
        }
    }
    Ok(Classical { r, m, extraction })
}

impl Classical {
    fn r(&self, n: usize, a: usize, b: usize) -> &TensorOperator {
        self.r[(a - 1) * n + b - 1].as_ref().expect("off-diagonal pair")
    }

    fn m(&self, n: usize, a: usize, b: usize) -> &TensorOperator {
        self.m[(a - 1) * n + b - 1].as_ref().expect("off-diagonal pair")
    }
}

/// `[r_ab, m_ac + m_bc] + [r_ac, m_ab + m_bc]` for `(a, b, c) = (1, 2, 3)`,
/// relative to the size of the individual commutators.
pub fn check_kzb_flatness(spec: &RMatrixSpec, z1: C64, z2: C64, z3: C64) -> Result<IdentityReport> {
    check_kzb_flatness_with(spec, z1, z2, z3, ExpansionOptions::default())
}

pub fn check_kzb_flatness_with(
    spec: &RMatrixSpec,
    z1: C64,
    z2: C64,
    z3: C64,
    opts: ExpansionOptions,
) -> Result<IdentityReport> {
    let started = Instant::now();
    let case = IdentityCase::new(IdentityName::KzbFlatness, spec, vec![z1, z2, z3]);
    let t = classical_table(spec, &[z1, z2, z3], opts)?;
    let n = 3;
    let first = t.r(n, 1, 2).commutator(&t.m(n, 1, 3).sum(t.m(n, 2, 3))?)?;
    let second = t.r(n, 1, 3).commutator(&t.m(n, 1, 2).sum(t.m(n, 2, 3))?)?;
    let scale = first.frobenius_norm().max(second.frobenius_norm()).max(1.0);
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(first.sum(&second)?.frobenius_norm() / scale);
    report.term_count = 2;
    report.diagnostic = Some(format!("extraction residual {:e}", t.extraction));
    Ok(report.finish(started))
}

/// `Σ_{c<a<b} ([r_ca, r_ab]₊ + [r_ab, r_bc]₊ + [r_bc, r_ca]₊) = -(n-2) Σ_{b≠c} m_bc`,
/// the right sum running over ordered pairs. The report's scalars are the
/// normalised traces of both sides.
pub fn check_hbar_order_relation(spec: &RMatrixSpec, points: &[C64]) -> Result<IdentityReport> {
    let started = Instant::now();
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidParameters(format!(
            "the anticommutator relation needs n >= 3, got {n}"
        )));
    }
    let case = IdentityCase::new(IdentityName::HbarOrder(n), spec, points.to_vec());
    let t = classical_table(spec, points, ExpansionOptions::default())?;
    let space = TensorSpace::new(spec.site_dim, n, usize::MAX)?;
    let mut lhs = TensorOperator::zeros(space);
    let mut terms = 0;
    for c in 1..=n {
        for a in c + 1..=n {
            for b in a + 1..=n {
                lhs.add_assign(&t.r(n, c, a).anticommutator(t.r(n, a, b))?)?;
                lhs.add_assign(&t.r(n, a, b).anticommutator(t.r(n, b, c))?)?;
                lhs.add_assign(&t.r(n, b, c).anticommutator(t.r(n, c, a))?)?;
                terms += 3;
            }
        }
    }
    let mut rhs = TensorOperator::zeros(space);
    for b in 1..=n {
        for c in 1..=n {
            if b != c {
                rhs.add_assign(t.m(n, b, c))?;
            }
        }
    }
    let rhs = rhs.scale(C64::new(-((n - 2) as f64), 0.0));
    let dim = space.dim() as f64;
    let mut report = IdentityReport::from_parts(case);
    report.lhs_scalar = Some(lhs.matrix().trace() / dim);
    report.rhs_scalar = Some(rhs.matrix().trace() / dim);
    report.operator_residual = Some(crate::tensor::frobenius_distance(&lhs, &rhs)?);
    report.term_count = terms;
    report.diagnostic = Some(format!(
        "|lhs| = {:e}, |rhs| = {:e}",
        lhs.frobenius_norm(),
        rhs.frobenius_norm()
    ));
    Ok(report.finish(started))
}

/// Laurent extraction of `r`, `m` at `z`: quadrature convergence, `r` skew,
/// `m = ½(r² - N²℘(z))` and agreement with the term-wise expansion.
pub fn check_classical_structure(spec: &RMatrixSpec, z: C64) -> Result<IdentityReport> {
    let started = Instant::now();
    let case = IdentityCase::new(IdentityName::ClassicalExpansion, spec, vec![z]);
    let n = spec.site_dim;
    let opts = ExpansionOptions::default();
    let pair = classical_expansion_with(spec, z, opts)?;
    let minus = classical_expansion_with(spec, -z, opts)?;
    let analytic = classical_expansion_analytic(spec, z)?;
    let skew = matrix_distance(&pair.r, &swap_sites(&minus.r, n).scale(C64::new(-1.0, 0.0)));
    let id = SquareMatrix::identity(n * n);
    let mut expected_m = &pair.r * &pair.r;
    expected_m.add_scaled(&id, -weierstrass_p(z, 0, &spec.lattice)? * (n * n) as f64);
    let m_formula = matrix_distance(&pair.m, &expected_m.scale(C64::new(0.5, 0.0)));
    let against_analytic = matrix_distance(&pair.r, &analytic.r)
        .max(matrix_distance(&pair.m, &analytic.m))
        .max(matrix_distance(&pair.leading, &id));
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(skew.max(m_formula).max(against_analytic));
    report.consistency_residual = Some(pair.extraction_residual);
    report.diagnostic = Some(format!(
        "extraction {:e}, skew {skew:e}, m formula {m_formula:e}, analytic {against_analytic:e}",
        pair.extraction_residual
    ));
    Ok(report.finish(started))
}

/// `∂_ħ R_ab` from the term-wise derivative against
/// `R_ab r_ac + r_cb R_ab - R_ac R_cb`.
pub fn check_hbar_derivative(spec: &RMatrixSpec, z_a: C64, z_b: C64, z_c: C64) -> Result<IdentityReport> {
    let started = Instant::now();
    let case = IdentityCase::new(IdentityName::HbarDerivative, spec, vec![z_a, z_b, z_c]);
    let d = r_deriv_hbar(spec, z_a, z_b, z_c)?;
    let mut report = IdentityReport::from_parts(case);
    report.operator_residual = Some(d.distance);
    report.consistency_residual = Some(matrix_distance(&d.projected, &d.analytic));
    report.term_count = 3;
    Ok(report.finish(started))
}
