//! Dense complex operators on `(ℂ^N)^{⊗n}`.
//!
//! Site 1 is the leftmost, slowest-varying tensor factor: the basis index of
//! `e_{i₁} ⊗ … ⊗ e_{iₙ}` is `Σ_s i_s N^{n-s}`.

use std::ops::{Add, Mul, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DEFAULT_SIZE_CAP: usize = 4096;

static TENSOR_ALLOCATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of `TensorOperator` values constructed in this process.
pub fn tensor_allocations() -> usize {
    TENSOR_ALLOCATIONS.load(Ordering::Relaxed)
}

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<C64>);

impl SquareMatrix {
    pub fn identity(dim: usize) -> Self {
        SquareMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SquareMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        SquareMatrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameters("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameters("matrix entries must be finite".into()));
        }
        Ok(SquareMatrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.0[(i, i)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.0[(row, col)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, factor: C64) -> Self {
        SquareMatrix(&self.0 * factor)
    }

    pub fn kron(&self, other: &SquareMatrix) -> Self {
        SquareMatrix(self.0.kronecker(&other.0))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn add_scaled(&mut self, other: &SquareMatrix, factor: C64) {
        self.0.zip_apply(&other.0, |a, b| *a += b * factor);
    }

    pub fn commutator(&self, other: &SquareMatrix) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &SquareMatrix) -> Self {
        &(self * other) + &(other * self)
    }
}

impl From<DMatrix<C64>> for SquareMatrix {
    fn from(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        SquareMatrix(m)
    }
}

impl<'a> Mul<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 - &rhs.0)
    }
}

/// Shape of `(ℂ^N)^{⊗n}` with a cap on `N^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpace {
    site_dim: usize,
    sites: usize,
    dim: usize,
}

impl TensorSpace {
    pub fn new(site_dim: usize, sites: usize, cap: usize) -> Result<Self> {
        if site_dim == 0 || sites == 0 {
            return Err(Error::InvalidParameters(
                "site dimension and site count must be positive".into(),
            ));
        }
        let mut dim: usize = 1;
        for _ in 0..sites {
            dim = dim.checked_mul(site_dim).unwrap_or(usize::MAX);
            if dim > cap {
                return Err(Error::SizeCapExceeded { dim, cap });
            }
        }
        Ok(TensorSpace {
            site_dim,
            sites,
            dim,
        })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Basis-index stride of the 1-based `site`.
    fn stride(&self, site: usize) -> usize {
        self.site_dim.pow((self.sites - site) as u32)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.sites {
            return Err(Error::IndexOutOfRange {
                index: site,
                max: self.sites,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize, m: &SquareMatrix) -> Result<()> {
        self.check_site(a)?;
        self.check_site(b)?;
        if a == b {
            return Err(Error::InvalidParameters(format!(
                "two-site embedding needs distinct sites, got {a} twice"
            )));
        }
        let expected = self.site_dim * self.site_dim;
        if m.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: m.dim(),
            });
        }
        Ok(())
    }
}

/// Operator on `(ℂ^N)^{⊗n}` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorOperator {
    space: TensorSpace,
    matrix: SquareMatrix,
}

impl TensorOperator {
    pub fn new(space: TensorSpace, matrix: SquareMatrix) -> Result<Self> {
        if matrix.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.dim(),
            });
        }
        TENSOR_ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        Ok(TensorOperator { space, matrix })
    }

    pub fn identity(space: TensorSpace) -> Self {
        Self::new(space, SquareMatrix::identity(space.dim())).expect("dimensions agree")
    }

    pub fn zeros(space: TensorSpace) -> Self {
        Self::new(space, SquareMatrix::zeros(space.dim())).expect("dimensions agree")
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn site_dim(&self) -> usize {
        self.space.site_dim
    }

    pub fn sites(&self) -> usize {
        self.space.sites
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.matrix
    }

    fn with_matrix(&self, matrix: SquareMatrix) -> Self {
        Self::new(self.space, matrix).expect("dimensions agree")
    }

    fn check_same_space(&self, other: &TensorOperator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                found: other.space.dim(),
            });
        }
        Ok(())
    }

    pub fn compose(&self, other: &TensorOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_matrix(&self.matrix * &other.matrix))
    }

    pub fn sum(&self, other: &TensorOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_matrix(&self.matrix + &other.matrix))
    }

    pub fn difference(&self, other: &TensorOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_matrix(&self.matrix - &other.matrix))
    }

    pub fn scale(&self, factor: C64) -> Self {
        self.with_matrix(self.matrix.scale(factor))
    }

    pub fn add_assign(&mut self, other: &TensorOperator) -> Result<()> {
        self.check_same_space(other)?;
        self.matrix.add_scaled(&other.matrix, C64::new(1.0, 0.0));
        Ok(())
    }

    pub fn commutator(&self, other: &TensorOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_matrix(self.matrix.commutator(&other.matrix)))
    }

    pub fn anticommutator(&self, other: &TensorOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_matrix(self.matrix.anticommutator(&other.matrix)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    /// `M_{ab} · self`, i.e. left multiplication by the two-site embedding
    /// of `m`, without materialising the embedding.
    pub fn apply_two_site_left(&self, m: &SquareMatrix, a: usize, b: usize) -> Result<Self> {
        let space = self.space;
        space.check_pair(a, b, m)?;
        let n = space.site_dim;
        let (sa, sb) = (space.stride(a), space.stride(b));
        let src = self.matrix.as_matrix();
        let mm = m.as_matrix();
        let dim = space.dim();
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        // base offset and (row index into m) for every basis index
        let rows: Vec<(usize, usize)> = (0..dim)
            .map(|i| {
                let (ia, ib) = ((i / sa) % n, (i / sb) % n);
                (i - ia * sa - ib * sb, ia * n + ib)
            })
            .collect();
        for col in 0..dim {
            let src_col = src.column(col);
            let mut out_col = out.column_mut(col);
            for (i, &(base, mrow)) in rows.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for ka in 0..n {
                    for kb in 0..n {
                        let coeff = mm[(mrow, ka * n + kb)];
                        if coeff != C64::new(0.0, 0.0) {
                            acc += coeff * src_col[base + ka * sa + kb * sb];
                        }
                    }
                }
                out_col[i] = acc;
            }
        }
        Ok(self.with_matrix(SquareMatrix(out)))
    }

    /// Trace over one site divided by `N`, giving an operator on the
    /// remaining `n-1` sites in their original order.
    pub fn partial_trace_normalized(&self, site: usize) -> Result<Self> {
        self.space.check_site(site)?;
        if self.space.sites < 2 {
            return Err(Error::InvalidParameters("cannot trace out the only site".into()));
        }
        let n = self.space.site_dim;
        let reduced = TensorSpace::new(n, self.space.sites - 1, usize::MAX)?;
        let stride = self.space.stride(site);
        let expand = |r: usize| {
            // insert a zero digit at `site` into a reduced index
            let high = r / stride;
            let low = r % stride;
            high * stride * n + low
        };
        let src = self.matrix.as_matrix();
        let scale = 1.0 / n as f64;
        let out = SquareMatrix::from_fn(reduced.dim(), |i, j| {
            let (bi, bj) = (expand(i), expand(j));
            let s: C64 = (0..n).map(|k| src[(bi + k * stride, bj + k * stride)]).sum();
            s * scale
        });
        Self::new(reduced, out)
    }
}

/// Embeds `m` (acting on `ℂ^N ⊗ ℂ^N`) so that its first factor acts on site
/// `a` and its second on site `b`, identity elsewhere. Sites are 1-based.
pub fn embed_two_site(m: &SquareMatrix, a: usize, b: usize, space: TensorSpace) -> Result<TensorOperator> {
    space.check_pair(a, b, m)?;
    TensorOperator::identity(space).apply_two_site_left(m, a, b)
}

/// Embeds a single-site operator at site `a`.
pub fn embed_one_site(x: &SquareMatrix, a: usize, space: TensorSpace) -> Result<TensorOperator> {
    space.check_site(a)?;
    if x.dim() != space.site_dim {
        return Err(Error::DimensionMismatch {
            expected: space.site_dim,
            found: x.dim(),
        });
    }
    if space.sites == 1 {
        return TensorOperator::new(space, x.clone());
    }
    let partner = if a == 1 { 2 } else { 1 };
    let m = if a < partner {
        x.kron(&SquareMatrix::identity(space.site_dim))
    } else {
        SquareMatrix::identity(space.site_dim).kron(x)
    };
    let (first, second) = if a < partner { (a, partner) } else { (partner, a) };
    embed_two_site(&m, first, second, space)
}

/// The swap `P = Σ E_ij ⊗ E_ji` on `ℂ^N ⊗ ℂ^N`.
pub fn permutation_operator(n: usize) -> SquareMatrix {
    let dim = n * n;
    let mut p = SquareMatrix::zeros(dim);
    for i in 0..n {
        for j in 0..n {
            p.set(i * n + j, j * n + i, C64::new(1.0, 0.0));
        }
    }
    p
}

/// `P M P`: exchanges the roles of the two factors of a two-site operator.
pub fn swap_sites(m: &SquareMatrix, n: usize) -> SquareMatrix {
    let p = permutation_operator(n);
    &(&p * m) * &p
}

/// Identifies the two tensor factors of `m = Σ A_k ⊗ B_k`, returning `Σ A_k B_k`.
pub fn contract_sites(m: &SquareMatrix, n: usize) -> Result<SquareMatrix> {
    if m.dim() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: m.dim(),
        });
    }
    Ok(SquareMatrix::from_fn(n, |i, l| {
        (0..n).map(|k| m.get(i * n + k, k * n + l)).sum()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTest {
    pub flag: bool,
    pub coeff: C64,
    pub residual: f64,
}

/// Tests whether `t` is a multiple of the identity:
/// `coeff = tr(t)/dim`, `residual = ‖t - coeff·1‖_F / max(‖t‖_F, 1)`.
pub fn is_scalar_operator(t: &SquareMatrix, tol: f64) -> ScalarTest {
    let dim = t.dim();
    let coeff = t.trace() / dim as f64;
    let mut diff = t.clone();
    for i in 0..dim {
        diff.set(i, i, diff.get(i, i) - coeff);
    }
    let residual = diff.frobenius_norm() / t.frobenius_norm().max(1.0);
    ScalarTest {
        flag: residual < tol,
        coeff,
        residual,
    }
}

/// `‖A - B‖_F / max(‖A‖_F, ‖B‖_F, 1)`.
pub fn frobenius_distance(a: &TensorOperator, b: &TensorOperator) -> Result<f64> {
    a.check_same_space(b)?;
    Ok(matrix_distance(a.matrix(), b.matrix()))
}

/// Same relative distance on bare matrices of equal dimension.
pub fn matrix_distance(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "matrix dimensions must agree");
    let scale = a.frobenius_norm().max(b.frobenius_norm()).max(1.0);
    (a - b).frobenius_norm() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(dim: usize, rng: &mut impl Rng) -> SquareMatrix {
        SquareMatrix::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
        (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Reference embedding built entry by entry from the site digits.
    fn embed_reference(m: &SquareMatrix, a: usize, b: usize, n: usize, sites: usize) -> SquareMatrix {
        let dim = n.pow(sites as u32);
        let digit = |i: usize, s: usize| (i / n.pow((sites - s) as u32)) % n;
        SquareMatrix::from_fn(dim, |i, j| {
            let others_equal = (1..=sites)
                .filter(|&s| s != a && s != b)
                .all(|s| digit(i, s) == digit(j, s));
            if !others_equal {
                return C64::new(0.0, 0.0);
            }
            m.get(digit(i, a) * n + digit(i, b), digit(j, a) * n + digit(j, b))
        })
    }

    #[test]
    fn identity_embeds_to_identity() {
        let space = TensorSpace::new(2, 3, DEFAULT_SIZE_CAP).unwrap();
        let e = embed_two_site(&SquareMatrix::identity(4), 3, 1, space).unwrap();
        assert_eq!(e.matrix(), &SquareMatrix::identity(8));
    }

    #[test]
    fn trivial_embedding_of_swap() {
        let space = TensorSpace::new(2, 2, DEFAULT_SIZE_CAP).unwrap();
        let p = permutation_operator(2);
        let e = embed_two_site(&p, 1, 2, space).unwrap();
        assert_eq!(e.matrix(), &p);
    }

    #[test]
    fn embedding_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, sites) in [(2, 3), (3, 3), (2, 4)] {
            let space = TensorSpace::new(n, sites, DEFAULT_SIZE_CAP).unwrap();
            let m = random_matrix(n * n, &mut rng);
            for (a, b) in [(1, 2), (2, 1), (1, sites), (sites, 2)] {
                let e = embed_two_site(&m, a, b, space).unwrap();
                let r = embed_reference(&m, a, b, n, sites);
                assert!(matrix_distance(e.matrix(), &r) < 1e-15);
            }
        }
    }

    #[test]
    fn disjoint_embeddings_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = TensorSpace::new(2, 4, DEFAULT_SIZE_CAP).unwrap();
        let x = embed_two_site(&random_matrix(4, &mut rng), 1, 2, space).unwrap();
        let y = embed_two_site(&random_matrix(4, &mut rng), 3, 4, space).unwrap();
        assert!(x.commutator(&y).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn swap_matrix_for_two() {
        let p = permutation_operator(2);
        let rows = [0, 2, 1, 3];
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..4 {
                let expected = if j == r { 1.0 } else { 0.0 };
                assert_eq!(p.get(i, j), C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn swap_is_an_involution_and_swaps_vectors() {
        for n in 2..=4 {
            let p = permutation_operator(n);
            assert_eq!(&p * &p, SquareMatrix::identity(n * n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_vector(3, &mut rng);
        let y = random_vector(3, &mut rng);
        let xy: Vec<C64> = x.iter().flat_map(|&a| y.iter().map(move |&b| a * b)).collect();
        let yx: Vec<C64> = y.iter().flat_map(|&a| x.iter().map(move |&b| a * b)).collect();
        let p = permutation_operator(3);
        let pxy = p.as_matrix() * nalgebra::DVector::from_vec(xy);
        let err: f64 = pxy.iter().zip(&yx).map(|(a, b)| (a - b).norm()).sum();
        assert!(err < 1e-14);
    }

    #[test]
    fn scalar_detection() {
        let t = is_scalar_operator(&SquareMatrix::identity(4), 1e-12);
        assert!(t.flag && t.coeff == C64::new(1.0, 0.0) && t.residual == 0.0);
        let t = is_scalar_operator(&SquareMatrix::identity(8).scale(C64::new(0.0, 3.0)), 1e-12);
        assert!(t.flag && t.coeff == C64::new(0.0, 3.0) && t.residual == 0.0);
        let d = SquareMatrix::diagonal(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let t = is_scalar_operator(&d, 1e-3);
        assert!(!t.flag);
        assert_eq!(t.coeff, C64::new(1.5, 0.0));
        assert!((t.residual - 0.5f64.sqrt() / 5f64.sqrt()).abs() < 1e-15);
        assert!((t.residual - 0.316).abs() < 1e-3);
    }

    #[test]
    fn distances() {
        let space = TensorSpace::new(2, 2, DEFAULT_SIZE_CAP).unwrap();
        let a = TensorOperator::identity(space);
        let b = a.scale(C64::new(2.0, 0.0));
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert!((frobenius_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let other = TensorOperator::identity(TensorSpace::new(2, 3, 64).unwrap());
        assert!(matches!(frobenius_distance(&a, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn size_cap_and_index_errors() {
        assert!(matches!(
            TensorSpace::new(3, 9, DEFAULT_SIZE_CAP),
            Err(Error::SizeCapExceeded { .. })
        ));
        let space = TensorSpace::new(2, 3, DEFAULT_SIZE_CAP).unwrap();
        let m = SquareMatrix::identity(4);
        assert!(matches!(embed_two_site(&m, 0, 2, space), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(embed_two_site(&m, 1, 4, space), Err(Error::IndexOutOfRange { .. })));
        assert!(embed_two_site(&m, 2, 2, space).is_err());
        assert!(matches!(
            embed_two_site(&SquareMatrix::identity(9), 1, 2, space),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_trace_recovers_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(4, &mut rng);
        let space = TensorSpace::new(2, 3, 64).unwrap();
        for (a, b, traced) in [(1, 2, 3), (1, 3, 2), (3, 2, 1)] {
            let e = embed_two_site(&m, a, b, space).unwrap();
            let reduced = e.partial_trace_normalized(traced).unwrap();
            // remaining sites keep their relative order
            let (fa, fb) = if a < b { (1, 2) } else { (2, 1) };
            let expected = embed_two_site(&m, fa, fb, reduced.space()).unwrap();
            assert!(frobenius_distance(&reduced, &expected).unwrap() < 1e-15);
        }
    }

    #[test]
    fn contraction_of_swap_is_n_identity() {
        let c = contract_sites(&permutation_operator(3), 3).unwrap();
        assert_eq!(c, SquareMatrix::identity(3).scale(C64::new(3.0, 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn embedding_is_multiplicative(seed in any::<u64>(), n in 2usize..=3, sites in 2usize..=4, pick in 0usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = TensorSpace::new(n, sites, DEFAULT_SIZE_CAP).unwrap();
            let a = pick % sites + 1;
            let b = (a + pick / sites) % sites + 1;
            prop_assume!(a != b);
            let m1 = random_matrix(n * n, &mut rng);
            let m2 = random_matrix(n * n, &mut rng);
            let lhs = embed_two_site(&m1, a, b, space).unwrap()
                .compose(&embed_two_site(&m2, a, b, space).unwrap()).unwrap();
            let rhs = embed_two_site(&(&m1 * &m2), a, b, space).unwrap();
            prop_assert!(frobenius_distance(&lhs, &rhs).unwrap() < 1e-13);
        }

        #[test]
        fn product_embeds_as_single_sites(seed in any::<u64>(), n in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = TensorSpace::new(n, 3, DEFAULT_SIZE_CAP).unwrap();
            let x = random_matrix(n, &mut rng);
            let y = random_matrix(n, &mut rng);
            let joint = embed_two_site(&x.kron(&y), 3, 1, space).unwrap();
            let split = embed_one_site(&x, 3, space).unwrap()
                .compose(&embed_one_site(&y, 1, space).unwrap()).unwrap();
            prop_assert!(frobenius_distance(&joint, &split).unwrap() < 1e-14);
        }

        #[test]
        fn swap_conjugation_exchanges_factors(seed in any::<u64>(), n in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_matrix(n, &mut rng);
            let y = random_matrix(n, &mut rng);
            let swapped = swap_sites(&x.kron(&y), n);
            prop_assert!(matrix_distance(&swapped, &y.kron(&x)) < 1e-15);
        }

        #[test]
        fn distance_is_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let space = TensorSpace::new(2, 2, DEFAULT_SIZE_CAP).unwrap();
            let a = TensorOperator::new(space, random_matrix(4, &mut rng)).unwrap();
            let b = TensorOperator::new(space, random_matrix(4, &mut rng)).unwrap();
            prop_assert_eq!(frobenius_distance(&a, &b).unwrap(), frobenius_distance(&b, &a).unwrap());
        }

        #[test]
        fn scalar_coefficient_is_exact(re in -1e6f64..1e6, im in -1e6f64..1e6) {
            prop_assume!(re.hypot(im) > 1e-6);
            let c = C64::new(re, im);
            let t = is_scalar_operator(&SquareMatrix::identity(16).scale(c), 1e-12);
            prop_assert!(t.flag);
            prop_assert!((t.coeff - c).norm() <= 4.0 * f64::EPSILON * c.norm());
        }
    }
}
