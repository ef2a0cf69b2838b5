//! Free Hilbert modules `E = B^n` over a block matrix algebra `B`, with the
//! `B`-valued inner product `<x, y> = sum_i x_i* y_i`, and their finitely
//! generated submodules.
//!
//! All linear algebra happens on the complex coordinate space obtained by
//! flattening the `n` algebra entries of a vector. The complex pairing of two
//! flattened vectors equals the trace of the `B`-valued inner product, and a
//! subspace is a submodule precisely when it is invariant under the right
//! action of `B`. For such subspaces the trace-pairing orthogonal complement
//! coincides with the `B`-valued one, which is what makes the dense-matrix
//! approach sound.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraSpec};
use crate::tol::Tolerance;

#[derive(Debug, Error, PartialEq)]
pub enum ModuleError {
    #[error("vectors belong to different modules")]
    ModuleMismatch,
    #[error("vector has {got} entries, module has rank {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("entry {index} does not belong to the module's algebra")]
    EntryAlgebraMismatch { index: usize },
    #[error("submodules live in different ambient modules")]
    AmbientMismatch,
    #[error("no generators supplied and no ambient module to infer")]
    NoGenerators,
}

/// The free right module `B^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FreeModule {
    algebra: AlgebraSpec,
    rank: usize,
}

impl FreeModule {
    /// A free module of the given rank. Rank zero is rejected alongside an
    /// empty algebra by construction of `AlgebraSpec`.
    pub fn new(algebra: AlgebraSpec, rank: usize) -> Self {
        assert!(rank >= 1, "free modules have rank at least one");
        FreeModule { algebra, rank }
    }

    pub fn algebra(&self) -> &AlgebraSpec {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the module as a complex vector space.
    pub fn complex_dim(&self) -> usize {
        self.rank * self.algebra.dim()
    }

    pub fn zero_vector(&self) -> ModuleVector {
        ModuleVector {
            module: self.clone(),
            entries: (0..self.rank).map(|_| self.algebra.zero()).collect(),
        }
    }

    /// The vector with `u` in position `index` and zeros elsewhere.
    pub fn embed(&self, index: usize, u: AlgebraElement) -> ModuleVector {
        assert!(index < self.rank, "entry index out of range");
        assert_eq!(u.spec(), &self.algebra, "entry from a different algebra");
        let mut v = self.zero_vector();
        v.entries[index] = u;
        v
    }

    /// Orthonormal complex basis: every position times every matrix unit.
    pub fn standard_basis(&self) -> Vec<ModuleVector> {
        let mut out = Vec::with_capacity(self.complex_dim());
        for i in 0..self.rank {
            for u in self.algebra.units() {
                out.push(self.embed(i, u));
            }
        }
        out
    }

    pub fn basis_vector(&self, flat_index: usize) -> ModuleVector {
        let n = self.complex_dim();
        assert!(flat_index < n, "flat index out of range");
        let mut coords = DVector::zeros(n);
        coords[flat_index] = Complex64::new(1.0, 0.0);
        self.unflatten(&coords)
    }

    /// Coordinate matrices of the right action of each matrix unit of `B`.
    pub fn unit_action_matrices(&self) -> Vec<DMatrix<Complex64>> {
        let n = self.complex_dim();
        self.algebra
            .units()
            .iter()
            .map(|u| {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let col = self.basis_vector(j).right_mul(u).flatten();
                    m.set_column(j, &col);
                }
                m
            })
            .collect()
    }

    /// Rebuilds a vector from flat complex coordinates.
    pub fn unflatten(&self, coords: &DVector<Complex64>) -> ModuleVector {
        assert_eq!(coords.len(), self.complex_dim(), "coordinate length mismatch");
        let mut entries = Vec::with_capacity(self.rank);
        let mut at = 0;
        for _ in 0..self.rank {
            let mut blocks = Vec::with_capacity(self.algebra.num_blocks());
            for &d in self.algebra.block_dims() {
                let mut b = DMatrix::zeros(d, d);
                for c in 0..d {
                    for r in 0..d {
                        b[(r, c)] = coords[at];
                        at += 1;
                    }
                }
                blocks.push(b);
            }
            entries.push(
                AlgebraElement::from_blocks(&self.algebra, blocks)
                    .expect("blocks constructed to match the algebra"),
            );
        }
        ModuleVector { module: self.clone(), entries }
    }
}

/// A vector in a free module: one algebra element per position.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVector {
    module: FreeModule,
    entries: Vec<AlgebraElement>,
}

impl ModuleVector {
    pub fn new(module: &FreeModule, entries: Vec<AlgebraElement>) -> Result<Self, ModuleError> {
        if entries.len() != module.rank() {
            return Err(ModuleError::WrongLength { expected: module.rank(), got: entries.len() });
        }
        for (i, e) in entries.iter().enumerate() {
            if e.spec() != module.algebra() {
                return Err(ModuleError::EntryAlgebraMismatch { index: i });
            }
        }
        Ok(ModuleVector { module: module.clone(), entries })
    }

    pub fn module(&self) -> &FreeModule {
        &self.module
    }

    pub fn entries(&self) -> &[AlgebraElement] {
        &self.entries
    }

    /// `B`-valued inner product `sum_i x_i* y_i`, conjugate-linear on the
    /// left.
    pub fn inner_product(&self, other: &ModuleVector) -> Result<AlgebraElement, ModuleError> {
        if self.module != other.module {
            return Err(ModuleError::ModuleMismatch);
        }
        let mut acc = self.module.algebra().zero();
        for (x, y) in self.entries.iter().zip(&other.entries) {
            acc = &acc + &(&x.adjoint() * y);
        }
        Ok(acc)
    }

    /// Module norm `sqrt(norm(<x, x>))`.
    pub fn module_norm(&self) -> f64 {
        self.inner_product(self)
            .expect("inner product with self")
            .norm()
            .sqrt()
    }

    /// Right action `x . u`, applied entrywise.
    pub fn right_mul(&self, u: &AlgebraElement) -> ModuleVector {
        assert_eq!(u.spec(), self.module.algebra(), "action by a foreign algebra element");
        ModuleVector {
            module: self.module.clone(),
            entries: self.entries.iter().map(|x| x * u).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> ModuleVector {
        ModuleVector {
            module: self.module.clone(),
            entries: self.entries.iter().map(|x| x.scale(c)).collect(),
        }
    }

    /// Flat complex coordinates; the standard complex pairing of flattened
    /// vectors is `trace(<x, y>)`.
    pub fn flatten(&self) -> DVector<Complex64> {
        let mut coords = Vec::with_capacity(self.module.complex_dim());
        for e in &self.entries {
            for b in e.blocks() {
                coords.extend(b.iter().copied());
            }
        }
        DVector::from_vec(coords)
    }
}

impl std::ops::Add for &ModuleVector {
    type Output = ModuleVector;
    fn add(self, rhs: &ModuleVector) -> ModuleVector {
        assert_eq!(self.module, rhs.module, "module mismatch in vector sum");
        ModuleVector {
            module: self.module.clone(),
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &ModuleVector {
    type Output = ModuleVector;
    fn sub(self, rhs: &ModuleVector) -> ModuleVector {
        assert_eq!(self.module, rhs.module, "module mismatch in vector difference");
        ModuleVector {
            module: self.module.clone(),
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Orthonormal basis of the column space of `m`, with singular values below
/// `eps * sigma_max` treated as zero.
pub(crate) fn column_space_basis(m: &DMatrix<Complex64>, tol: Tolerance) -> DMatrix<Complex64> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = tol.eps() * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cut && smax > 0.0).count();
    let u = svd.u.expect("left singular vectors requested");
    u.columns(0, rank).into_owned()
}

/// Orthonormal basis of the orthogonal complement of a family of orthonormal
/// columns. The complement projection `I - q q*` has eigenvalues exactly zero
/// and one, so splitting at one half is numerically unambiguous.
pub(crate) fn complement_of_orthonormal(q: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = q.nrows();
    if q.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    let p = DMatrix::identity(n, n) - q * q.adjoint();
    let eig = p.symmetric_eigen();
    let keep: Vec<usize> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &eig.eigenvectors.column(i));
    }
    out
}

/// Orthonormal basis of the null space of `m` (as column vectors). The rank
/// decision happens on the singular values of `m` with the same relative
/// cutoff as [`column_space_basis`]; the complement of the detected row space
/// is then exact.
pub(crate) fn null_space_basis(m: &DMatrix<Complex64>, tol: Tolerance) -> DMatrix<Complex64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let row_space = column_space_basis(&m.adjoint(), tol);
    complement_of_orthonormal(&row_space)
}

/// A finitely generated (closed) submodule of a free module, stored through
/// an orthonormal complex basis of the invariant coordinate subspace.
#[derive(Debug, Clone)]
pub struct Submodule {
    ambient: FreeModule,
    basis: DMatrix<Complex64>,
}

impl Submodule {
    /// Generates the smallest closed submodule containing the given vectors:
    /// the span of all right translates `g . u` over the matrix units of `B`.
    pub fn from_generators(
        generators: &[ModuleVector],
        tol: Tolerance,
    ) -> Result<Self, ModuleError> {
        let module = match generators.first() {
            Some(g) => g.module().clone(),
            None => return Err(ModuleError::NoGenerators),
        };
        if generators.iter().any(|g| g.module() != &module) {
            return Err(ModuleError::ModuleMismatch);
        }
        let units = module.algebra().units();
        let n = module.complex_dim();
        let mut cols = DMatrix::zeros(n, generators.len() * units.len());
        let mut j = 0;
        for g in generators {
            for u in &units {
                cols.set_column(j, &g.right_mul(u).flatten());
                j += 1;
            }
        }
        Ok(Submodule { ambient: module, basis: column_space_basis(&cols, tol) })
    }

    /// The zero submodule.
    pub fn zero(ambient: &FreeModule) -> Self {
        Submodule { ambient: ambient.clone(), basis: DMatrix::zeros(ambient.complex_dim(), 0) }
    }

    /// The whole module viewed as a submodule of itself.
    pub fn full(ambient: &FreeModule) -> Self {
        let n = ambient.complex_dim();
        Submodule { ambient: ambient.clone(), basis: DMatrix::identity(n, n) }
    }

    /// Wraps an orthonormal, right-invariant basis produced by internal
    /// linear algebra. Invariance is the caller's obligation; it is checked
    /// in debug builds.
    pub(crate) fn from_orthonormal_basis(ambient: &FreeModule, basis: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(basis.nrows(), ambient.complex_dim());
        let sub = Submodule { ambient: ambient.clone(), basis };
        debug_assert!(
            sub.invariance_defect() < 1e-7,
            "basis is not right-invariant (defect {})",
            sub.invariance_defect()
        );
        sub
    }

    /// How far the span is from being closed under the right action.
    pub(crate) fn invariance_defect(&self) -> f64 {
        let p = self.projection_matrix();
        let n = self.ambient.complex_dim();
        let id = DMatrix::identity(n, n);
        let mut worst: f64 = 0.0;
        for r in self.ambient.unit_action_matrices() {
            let leak = (&id - &p) * r * &self.basis;
            worst = worst.max(crate::algebra::spectral_norm(&leak));
        }
        worst
    }

    pub fn ambient(&self) -> &FreeModule {
        &self.ambient
    }

    /// Complex dimension of the submodule.
    pub fn complex_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.ncols() == 0
    }

    /// Orthonormal basis as columns of an `N x r` matrix.
    pub fn basis_matrix(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<ModuleVector> {
        (0..self.basis.ncols())
            .map(|j| self.ambient.unflatten(&self.basis.column(j).into_owned()))
            .collect()
    }

    /// Orthogonal projection onto the submodule in flat coordinates.
    pub fn projection_matrix(&self) -> DMatrix<Complex64> {
        &self.basis * self.basis.adjoint()
    }

    /// Distance of `x` from the submodule, relative to `norm(x)`.
    pub fn containment_defect(&self, x: &ModuleVector) -> f64 {
        assert_eq!(x.module(), &self.ambient, "vector from a different module");
        let v = x.flatten();
        let proj = &self.basis * (self.basis.adjoint() * &v);
        (v - proj).norm()
    }

    pub fn contains(&self, x: &ModuleVector, tol: Tolerance) -> bool {
        tol.passes(self.containment_defect(x), x.flatten().norm())
    }

    /// The orthogonal complement with respect to the `B`-valued inner
    /// product. For right-invariant subspaces this agrees with the complex
    /// trace-pairing complement, which is what gets computed.
    pub fn orthocomplement(&self) -> Submodule {
        let n = self.ambient.complex_dim();
        if self.basis.ncols() == 0 {
            return Submodule::full(&self.ambient);
        }
        let comp = complement_of_orthonormal(&self.basis);
        debug_assert_eq!(comp.ncols(), n - self.basis.ncols());
        Submodule::from_orthonormal_basis(&self.ambient, comp)
    }

    /// On this backend every generated submodule is complemented; the method
    /// verifies the dimension count and reports the result.
    pub fn is_complemented(&self) -> bool {
        self.complex_dim() + self.orthocomplement().complex_dim() == self.ambient.complex_dim()
    }

    /// Frobenius distance of the orthogonal projections onto the two
    /// subspaces; zero exactly when they coincide.
    pub fn projection_distance(&self, other: &Submodule) -> Result<f64, ModuleError> {
        if self.ambient != other.ambient {
            return Err(ModuleError::AmbientMismatch);
        }
        Ok((self.projection_matrix() - other.projection_matrix()).norm())
    }

    pub fn submodule_eq(&self, other: &Submodule, tol: Tolerance) -> Result<bool, ModuleError> {
        Ok(self.projection_distance(other)? <= tol.threshold(1.0))
    }

    /// Intersection with the orthocomplement of `inner`, i.e. the complement
    /// of `inner` taken inside this submodule. Requires `inner` to be
    /// contained in `self`.
    pub fn complement_within(&self, inner: &Submodule) -> Submodule {
        assert_eq!(self.ambient, inner.ambient, "ambient mismatch");
        // Coordinates of self that are killed by pairing against inner.
        let pairing = inner.basis.adjoint() * &self.basis;
        let ns = null_space_basis(&pairing, Tolerance::default());
        Submodule::from_orthonormal_basis(&self.ambient, &self.basis * ns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_module(rank: usize) -> FreeModule {
        FreeModule::new(AlgebraSpec::new(vec![1]).unwrap(), rank)
    }

    fn m2_module(rank: usize) -> FreeModule {
        FreeModule::new(AlgebraSpec::new(vec![2]).unwrap(), rank)
    }

    fn random_element(spec: &AlgebraSpec, rng: &mut ChaCha8Rng) -> AlgebraElement {
        use rand::Rng;
        let blocks = spec
            .block_dims()
            .iter()
            .map(|&d| {
                DMatrix::from_fn(d, d, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        AlgebraElement::from_blocks(spec, blocks).unwrap()
    }

    fn random_vector(module: &FreeModule, rng: &mut ChaCha8Rng) -> ModuleVector {
        let entries = (0..module.rank()).map(|_| random_element(module.algebra(), rng)).collect();
        ModuleVector::new(module, entries).unwrap()
    }

    #[test]
    fn basis_positions_are_orthogonal() {
        let e = m2_module(2);
        let x = e.embed(0, e.algebra().identity());
        let y = e.embed(1, e.algebra().identity());
        let ip = x.inner_product(&y).unwrap();
        assert_eq!(ip.norm(), 0.0);
    }

    #[test]
    fn rank_one_inner_product_is_star_product() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_element(e.algebra(), &mut rng);
        let w = random_element(e.algebra(), &mut rng);
        let ip = e.embed(0, u.clone()).inner_product(&e.embed(0, w.clone())).unwrap();
        let expected = &u.adjoint() * &w;
        assert!((&ip - &expected).norm() < 1e-12);
    }

    #[test]
    fn self_pairing_is_positive() {
        let e = m2_module(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random_vector(&e, &mut rng);
            assert!(x.inner_product(&x).unwrap().is_positive(Tolerance::default()));
        }
    }

    #[test]
    fn flatten_roundtrip_preserves_trace_pairing() {
        let e = FreeModule::new(AlgebraSpec::new(vec![1, 2]).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vector(&e, &mut rng);
        let y = random_vector(&e, &mut rng);
        let back = e.unflatten(&x.flatten());
        assert!((&back - &x).module_norm() < 1e-14);
        let complex_pairing: Complex64 = x.flatten().dotc(&y.flatten());
        let trace = x.inner_product(&y).unwrap().trace();
        assert!((complex_pairing - trace).norm() < 1e-12);
    }

    #[test]
    fn single_generator_line_over_scalars() {
        let e = scalar_module(2);
        let g = e.embed(0, e.algebra().identity());
        let s = Submodule::from_generators(&[g.clone()], Tolerance::default()).unwrap();
        assert_eq!(s.complex_dim(), 1);
        assert!(s.contains(&g, Tolerance::default()));
        assert!(!s.contains(&e.embed(1, e.algebra().identity()), Tolerance::default()));
    }

    #[test]
    fn zero_generators_give_zero_submodule() {
        let e = scalar_module(2);
        let s = Submodule::from_generators(&[e.zero_vector()], Tolerance::default()).unwrap();
        assert_eq!(s.complex_dim(), 0);
        assert!(s.is_zero());
    }

    #[test]
    fn projection_generator_spans_row_space() {
        // e_1 . p for p = diag(1, 0) in M_2 generates e_1 . (p M_2), the two
        // dimensional row space of p.
        let e = m2_module(2);
        let p = AlgebraElement::from_blocks(
            e.algebra(),
            vec![DMatrix::from_row_slice(2, 2, &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ])],
        )
        .unwrap();
        let g = e.embed(0, p);
        let s = Submodule::from_generators(&[g], Tolerance::default()).unwrap();
        assert_eq!(s.complex_dim(), 2);
    }

    #[test]
    fn orthocomplement_of_first_coordinate() {
        let e = scalar_module(2);
        let s = Submodule::from_generators(
            &[e.embed(0, e.algebra().identity())],
            Tolerance::default(),
        )
        .unwrap();
        let t = Submodule::from_generators(
            &[e.embed(1, e.algebra().identity())],
            Tolerance::default(),
        )
        .unwrap();
        assert!(s.orthocomplement().submodule_eq(&t, Tolerance::default()).unwrap());
    }

    #[test]
    fn complement_swaps_zero_and_full() {
        let e = m2_module(2);
        assert!(Submodule::zero(&e)
            .orthocomplement()
            .submodule_eq(&Submodule::full(&e), Tolerance::default())
            .unwrap());
        assert!(Submodule::full(&e)
            .orthocomplement()
            .submodule_eq(&Submodule::zero(&e), Tolerance::default())
            .unwrap());
    }

    #[test]
    fn double_complement_returns_the_submodule() {
        let tol = Tolerance::default();
        let e = FreeModule::new(AlgebraSpec::new(vec![1, 2]).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let gens = [random_vector(&e, &mut rng)];
            let s = Submodule::from_generators(&gens, tol).unwrap();
            let back = s.orthocomplement().orthocomplement();
            assert!(s.submodule_eq(&back, tol).unwrap());
            assert!(s.is_complemented());
        }
    }

    #[test]
    fn complement_agrees_with_module_valued_oracle() {
        // Independent oracle: x is B-orthogonal to the submodule iff
        // x^H (R_u g) = 0 for every generator translate, i.e. x lies in the
        // null space of the stacked rows (R_u g)^H.
        let tol = Tolerance::default();
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_vector(&e, &mut rng);
        let s = Submodule::from_generators(&[g.clone()], tol).unwrap();

        let n = e.complex_dim();
        let actions = e.unit_action_matrices();
        let mut rows = DMatrix::zeros(actions.len(), n);
        for (i, r) in actions.iter().enumerate() {
            let translated = r * g.flatten();
            rows.set_row(i, &translated.adjoint());
        }
        let ns = null_space_basis(&rows, tol);
        let oracle = Submodule::from_orthonormal_basis(&e, ns);
        assert!(s.orthocomplement().submodule_eq(&oracle, tol).unwrap());
    }

    #[test]
    fn inner_product_is_right_linear() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let x = random_vector(&e, &mut rng);
            let y = random_vector(&e, &mut rng);
            let u = random_element(e.algebra(), &mut rng);
            let lhs = x.inner_product(&y.right_mul(&u)).unwrap();
            let rhs = &x.inner_product(&y).unwrap() * &u;
            assert!((&lhs - &rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
            let lhs2 = x.right_mul(&u).inner_product(&y).unwrap();
            let rhs2 = &u.adjoint() * &x.inner_product(&y).unwrap();
            assert!((&lhs2 - &rhs2).norm() < 1e-10 * (1.0 + rhs2.norm()));
        }
    }

    #[test]
    fn cauchy_schwarz() {
        let e = FreeModule::new(AlgebraSpec::new(vec![2, 1]).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_vector(&e, &mut rng);
            let y = random_vector(&e, &mut rng);
            let cross = x.inner_product(&y).unwrap().norm();
            let bound = x.inner_product(&x).unwrap().norm() * y.inner_product(&y).unwrap().norm();
            assert!(cross * cross <= bound * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn equality_survives_generator_recombination() {
        let tol = Tolerance::default();
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g1 = random_vector(&e, &mut rng);
        let g2 = random_vector(&e, &mut rng);
        let s = Submodule::from_generators(&[g1.clone(), g2.clone()], tol).unwrap();
        let t = Submodule::from_generators(&[&g1 + &g2, &g1 - &g2], tol).unwrap();
        assert!(s.submodule_eq(&t, tol).unwrap());
        assert!(!s
            .submodule_eq(&Submodule::zero(&e), tol)
            .unwrap_or(true)
            || s.is_zero());
    }

    #[test]
    fn complement_within_splits_dimensions() {
        let tol = Tolerance::default();
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let outer_gens = [random_vector(&e, &mut rng), random_vector(&e, &mut rng)];
        let outer = Submodule::from_generators(&outer_gens, tol).unwrap();
        let inner = Submodule::from_generators(&outer_gens[..1], tol).unwrap();
        let rest = outer.complement_within(&inner);
        assert_eq!(inner.complex_dim() + rest.complex_dim(), outer.complex_dim());
        for v in rest.basis_vectors() {
            let ip = v.inner_product(&outer_gens[0]).unwrap();
            assert!(ip.norm() < 1e-9);
            assert!(outer.contains(&v, tol));
        }
    }
}
