//! Finite-dimensional C*-algebras `B = M_{n_1}(C) + ... + M_{n_K}(C)`.
//!
//! Elements are block-diagonal complex matrices stored one block per summand.
//! The norm is the operator norm (largest singular value across blocks), the
//! involution is the blockwise conjugate transpose, and positive square roots
//! are taken blockwise through a Hermitian eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::tol::Tolerance;

#[derive(Debug, Error, PartialEq)]
pub enum AlgebraError {
    #[error("element does not belong to algebra {expected:?} (got block dims {got:?})")]
    SpecMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("element is not positive: {reason}")]
    NotPositive { reason: String },
    #[error("algebra must have at least one block, each of positive dimension")]
    EmptySpec,
}

/// Shape of a finite-dimensional C*-algebra: the sizes of its matrix blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraSpec {
    block_dims: Vec<usize>,
}

impl AlgebraSpec {
    pub fn new(block_dims: Vec<usize>) -> Result<Self, AlgebraError> {
        if block_dims.is_empty() || block_dims.iter().any(|&d| d == 0) {
            return Err(AlgebraError::EmptySpec);
        }
        Ok(AlgebraSpec { block_dims })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Complex dimension of the algebra, `sum of n_k^2`.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            spec: self.clone(),
            blocks: self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            spec: self.clone(),
            blocks: self.block_dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        }
    }

    /// The matrix unit `e_pq` of block `block`, zero elsewhere.
    pub fn matrix_unit(&self, block: usize, p: usize, q: usize) -> AlgebraElement {
        assert!(block < self.block_dims.len(), "block index out of range");
        let d = self.block_dims[block];
        assert!(p < d && q < d, "matrix unit index out of range");
        let mut el = self.zero();
        el.blocks[block][(p, q)] = Complex64::new(1.0, 0.0);
        el
    }

    /// All matrix units, a complex basis of the algebra. The order is fixed:
    /// blocks in declaration order, entries row-major within a block.
    pub fn units(&self) -> Vec<AlgebraElement> {
        let mut out = Vec::with_capacity(self.dim());
        for (k, &d) in self.block_dims.iter().enumerate() {
            for p in 0..d {
                for q in 0..d {
                    out.push(self.matrix_unit(k, p, q));
                }
            }
        }
        out
    }
}

/// An element of a block-diagonal matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    spec: AlgebraSpec,
    blocks: Vec<DMatrix<Complex64>>,
}

impl AlgebraElement {
    /// Builds an element from explicit blocks, validating shapes.
    pub fn from_blocks(
        spec: &AlgebraSpec,
        blocks: Vec<DMatrix<Complex64>>,
    ) -> Result<Self, AlgebraError> {
        let got: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
        let square = blocks.iter().all(|b| b.nrows() == b.ncols());
        if !square || got != spec.block_dims {
            return Err(AlgebraError::SpecMismatch { expected: spec.block_dims.clone(), got });
        }
        Ok(AlgebraElement { spec: spec.clone(), blocks })
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<Complex64> {
        &self.blocks[k]
    }

    /// Blockwise conjugate transpose.
    pub fn adjoint(&self) -> AlgebraElement {
        AlgebraElement {
            spec: self.spec.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> AlgebraElement {
        AlgebraElement {
            spec: self.spec.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    /// Sum of the block traces.
    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Operator norm: the largest singular value across blocks.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| spectral_norm(b))
            .fold(0.0, f64::max)
    }

    /// Smallest singular value across all blocks.
    pub fn min_singular_value(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                b.clone()
                    .svd(false, false)
                    .singular_values
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the self-adjoint part, `norm(x - x*)`.
    pub fn hermitian_defect(&self) -> f64 {
        (self - &self.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        tol.passes(self.hermitian_defect(), self.norm())
    }

    /// Hermitian within `tol` and all eigenvalues at least `-tol * norm`.
    pub fn is_positive(&self, tol: Tolerance) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let bound = -tol.threshold(self.norm());
        self.hermitian_eigenvalues().into_iter().all(|ev| ev >= bound)
    }

    /// Eigenvalues of the Hermitian part of each block, pooled.
    fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let h = hermitian_part(b);
            out.extend(h.symmetric_eigen().eigenvalues.iter().copied());
        }
        out
    }

    /// The positive square root of a positive element.
    ///
    /// Each block is diagonalized; eigenvalues in `[-tol * norm, 0]` are
    /// clamped to zero before the square root is formed.
    ///
    /// # Errors
    ///
    /// `NotPositive` when the element is not Hermitian within `tol` or has an
    /// eigenvalue below `-tol * norm`.
    pub fn sqrt_positive(&self, tol: Tolerance) -> Result<AlgebraElement, AlgebraError> {
        let defect = self.hermitian_defect();
        if !tol.passes(defect, self.norm()) {
            return Err(AlgebraError::NotPositive {
                reason: format!("hermitian defect {defect:.3e} exceeds tolerance"),
            });
        }
        let bound = tol.threshold(self.norm());
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            blocks.push(hermitian_sqrt(&hermitian_part(b), bound).map_err(|ev| {
                AlgebraError::NotPositive {
                    reason: format!("eigenvalue {ev:.3e} below -{bound:.3e}"),
                }
            })?);
        }
        Ok(AlgebraElement { spec: self.spec.clone(), blocks })
    }

    /// Invertible iff the smallest singular value exceeds `tol * norm`.
    pub fn is_invertible(&self, tol: Tolerance) -> bool {
        self.min_singular_value() > tol.threshold(self.norm())
    }

    fn same_spec(&self, other: &AlgebraElement) -> bool {
        self.spec == other.spec
    }
}

/// Largest singular value of a rectangular complex matrix.
pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub(crate) fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Square root of a Hermitian matrix. Eigenvalues within `clamp` of zero are
/// flattened to exactly zero before the root so that numerical noise around
/// zero does not inflate the rank (the root is not Lipschitz at zero).
/// Returns the offending eigenvalue when one lies below `-clamp`.
pub(crate) fn hermitian_sqrt(
    h: &DMatrix<Complex64>,
    clamp: f64,
) -> Result<DMatrix<Complex64>, f64> {
    if h.nrows() == 0 {
        return Ok(h.clone());
    }
    let eig = h.clone().symmetric_eigen();
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &ev in eig.eigenvalues.iter() {
        if ev < -clamp {
            return Err(ev);
        }
        let flattened = if ev <= clamp { 0.0 } else { ev };
        roots.push(Complex64::new(flattened.sqrt(), 0.0));
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(roots));
    Ok(u * d * u.adjoint())
}

macro_rules! elementwise_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for &AlgebraElement {
            type Output = AlgebraElement;
            fn $method(self, rhs: &AlgebraElement) -> AlgebraElement {
                assert!(self.same_spec(rhs), "algebra mismatch in element arithmetic");
                AlgebraElement {
                    spec: self.spec.clone(),
                    blocks: self
                        .blocks
                        .iter()
                        .zip(&rhs.blocks)
                        .map(|(a, b)| a $op b)
                        .collect(),
                }
            }
        }
    };
}

elementwise_binop!(Add, add, +);
elementwise_binop!(Sub, sub, -);

impl std::ops::Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert!(self.same_spec(rhs), "algebra mismatch in element product");
        AlgebraElement {
            spec: self.spec.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect(),
        }
    }
}

impl std::ops::Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_algebra() -> AlgebraSpec {
        AlgebraSpec::new(vec![1]).unwrap()
    }

    fn m2() -> AlgebraSpec {
        AlgebraSpec::new(vec![2]).unwrap()
    }

    fn m2_element(rows: [[Complex64; 2]; 2]) -> AlgebraElement {
        let b = DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]]);
        AlgebraElement::from_blocks(&m2(), vec![b]).unwrap()
    }

    /// Independent adjoint oracle: conjugate-transpose written out entrywise.
    fn adjoint_oracle(x: &AlgebraElement) -> AlgebraElement {
        let blocks = x
            .blocks()
            .iter()
            .map(|b| {
                let mut out = DMatrix::zeros(b.ncols(), b.nrows());
                for i in 0..b.nrows() {
                    for j in 0..b.ncols() {
                        out[(j, i)] = b[(i, j)].conj();
                    }
                }
                out
            })
            .collect();
        AlgebraElement::from_blocks(x.spec(), blocks).unwrap()
    }

    #[test]
    fn adjoint_fixes_self_adjoint_elements() {
        let x = m2_element([[c(2.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(2.0, 0.0)]]);
        assert_eq!(x.adjoint(), x);
    }

    #[test]
    fn adjoint_of_nilpotent_shift() {
        let x = m2_element([[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        let expected = m2_element([[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
        assert_eq!(x.adjoint(), expected);
    }

    #[test]
    fn positivity_examples() {
        let tol = Tolerance::default();
        assert!(m2().identity().is_positive(tol));
        let diag = m2_element([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        assert!(!diag.is_positive(tol));
        // Eigenvalues 1 and 3, both positive.
        let x = m2_element([[c(2.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(2.0, 0.0)]]);
        assert!(x.is_positive(tol));
        let skew = m2_element([[c(0.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(0.0, 0.0)]]);
        assert!(!skew.is_positive(tol));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let tol = Tolerance::default();
        let x = m2_element([[c(4.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(9.0, 0.0)]]);
        let r = x.sqrt_positive(tol).unwrap();
        let expected = m2_element([[c(2.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(3.0, 0.0)]]);
        assert!((&r - &expected).norm() < 1e-12);
    }

    #[test]
    fn sqrt_fixes_projections() {
        let tol = Tolerance::default();
        let p = m2_element([[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]]);
        let r = p.sqrt_positive(tol).unwrap();
        assert!((&r - &p).norm() < 1e-12);
    }

    #[test]
    fn sqrt_frozen_two_by_two() {
        // Eigendecomposition oracle for [[2,1],[1,2]]: eigenpairs
        // (1, (1,-1)/sqrt2) and (3, (1,1)/sqrt2), so the root has entries
        // (sqrt3 + 1)/2 on the diagonal and (sqrt3 - 1)/2 off it.
        let tol = Tolerance::default();
        let x = m2_element([[c(2.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(2.0, 0.0)]]);
        let r = x.sqrt_positive(tol).unwrap();
        let on = 1.3660254037844386;
        let off = 0.36602540378443865;
        let expected = m2_element([[c(on, 0.0), c(off, 0.0)], [c(off, 0.0), c(on, 0.0)]]);
        assert!((&r - &expected).norm() < 1e-12);
        assert!((&(&r * &r) - &x).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let tol = Tolerance::default();
        let x = m2_element([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        assert!(matches!(x.sqrt_positive(tol), Err(AlgebraError::NotPositive { .. })));
    }

    #[test]
    fn invertibility_examples() {
        let tol = Tolerance::default();
        assert!(m2().identity().is_invertible(tol));
        let p = m2_element([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(!p.is_invertible(tol));
        let x = m2_element([[c(2.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(2.0, 0.0)]]);
        assert!(x.is_invertible(tol));
    }

    #[test]
    fn units_span_dimension() {
        let spec = AlgebraSpec::new(vec![1, 2]).unwrap();
        assert_eq!(spec.dim(), 5);
        assert_eq!(spec.units().len(), 5);
        let sum: AlgebraElement = spec
            .units()
            .iter()
            .filter(|u| u.hermitian_defect() == 0.0 && u.trace().re > 0.5)
            .fold(spec.zero(), |acc, u| &acc + u);
        // Diagonal units sum to the identity.
        assert!((&sum - &spec.identity()).norm() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let spec = AlgebraSpec::new(vec![2]).unwrap();
        let err = AlgebraElement::from_blocks(&spec, vec![DMatrix::zeros(3, 3)]);
        assert!(matches!(err, Err(AlgebraError::SpecMismatch { .. })));
    }

    fn arb_complex() -> impl Strategy<Value = Complex64> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| Complex64::new(re, im))
    }

    fn arb_element() -> impl Strategy<Value = AlgebraElement> {
        prop_oneof![Just(vec![1usize]), Just(vec![2]), Just(vec![1, 2]), Just(vec![2, 2])]
            .prop_flat_map(|dims| {
                let total: usize = dims.iter().map(|d| d * d).sum();
                (Just(dims), proptest::collection::vec(arb_complex(), total))
            })
            .prop_map(|(dims, vals)| {
                let spec = AlgebraSpec::new(dims.clone()).unwrap();
                let mut blocks = Vec::new();
                let mut at = 0;
                for d in dims {
                    blocks.push(DMatrix::from_row_slice(d, d, &vals[at..at + d * d]));
                    at += d * d;
                }
                AlgebraElement::from_blocks(&spec, blocks).unwrap()
            })
    }

    proptest! {
        #[test]
        fn involution(x in arb_element()) {
            prop_assert!((&x.adjoint().adjoint() - &x).norm() < 1e-12);
        }

        #[test]
        fn adjoint_matches_entrywise_oracle(x in arb_element(), y in arb_element()) {
            prop_assert!((&x.adjoint() - &adjoint_oracle(&x)).norm() < 1e-12);
            if x.spec() == y.spec() {
                let lhs = (&x * &y).adjoint();
                let rhs = &y.adjoint() * &x.adjoint();
                prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + x.norm() * y.norm()));
            }
        }

        #[test]
        fn cstar_identity(x in arb_element()) {
            let lhs = (&x.adjoint() * &x).norm();
            let rhs = x.norm() * x.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
        }

        #[test]
        fn star_squares_are_positive_with_matching_root(x in arb_element()) {
            let tol = Tolerance::default();
            let p = &x.adjoint() * &x;
            prop_assert!(p.is_positive(tol));
            let r = p.sqrt_positive(tol).expect("x*x must admit a root");
            prop_assert!((&(&r * &r) - &p).norm() <= 1e-8 * (1.0 + p.norm()));
            // sqrt(y^2) = y for positive y.
            let y = r.clone();
            let again = (&y * &y).sqrt_positive(tol).unwrap();
            prop_assert!((&again - &y).norm() <= 1e-7 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn scalar_algebra_behaves_like_complex_numbers() {
        let spec = scalar_algebra();
        let x = AlgebraElement::from_blocks(
            &spec,
            vec![DMatrix::from_row_slice(1, 1, &[c(3.0, 4.0)])],
        )
        .unwrap();
        assert!((x.norm() - 5.0).abs() < 1e-12);
        assert_eq!(x.adjoint().block(0)[(0, 0)], c(3.0, -4.0));
        assert!(x.is_invertible(Tolerance::default()));
    }
}
