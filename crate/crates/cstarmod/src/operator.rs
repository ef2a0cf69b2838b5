//! Module maps between free modules and their submodules, and the
//! adjoint-free operator predicates (isometry, coisometry, partial isometry,
//! Gram projection).
//!
//! A map is stored as a complex matrix in the orthonormal coordinates of its
//! domain and codomain carriers. Because the trace pairing recovers the
//! `B`-valued inner product through right translates,
//! `trace(<x, y> u) = <x, y.u>_C`, every `B`-valued Gram identity used here
//! reduces to a family of matrix identities indexed by the matrix units of
//! `B`. Module linearity is checked when a map is built, so the predicates
//! can rely on it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::spectral_norm;
use crate::module::{column_space_basis, null_space_basis, FreeModule, ModuleVector, Submodule};
use crate::tol::Tolerance;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("matrix shape {got:?} does not match carriers {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("map does not commute with the right algebra action (defect {defect:.3e})")]
    NotModuleLinear { defect: f64 },
    #[error("carriers are incompatible: {reason}")]
    CarrierMismatch { reason: String },
    #[error("vector lies outside the domain (defect {defect:.3e})")]
    VectorOutsideDomain { defect: f64 },
    #[error("image escapes the requested codomain (defect {defect:.3e})")]
    ImageEscapesCodomain { defect: f64 },
    #[error("submodule is not contained in the domain (defect {defect:.3e})")]
    SubmoduleOutsideDomain { defect: f64 },
    #[error("map is not a partial isometry")]
    NotPartialIsometry,
    #[error("domain and codomain differ")]
    DomainCodomainDiffer,
}

/// Where a map lives: a whole free module or a submodule of one.
#[derive(Debug, Clone)]
pub enum Carrier {
    Free(FreeModule),
    Sub(Submodule),
}

impl Carrier {
    pub fn free(module: FreeModule) -> Self {
        Carrier::Free(module)
    }

    pub fn sub(submodule: Submodule) -> Self {
        Carrier::Sub(submodule)
    }

    pub fn ambient(&self) -> &FreeModule {
        match self {
            Carrier::Free(m) => m,
            Carrier::Sub(s) => s.ambient(),
        }
    }

    /// Complex dimension of the carrier itself.
    pub fn dim(&self) -> usize {
        match self {
            Carrier::Free(m) => m.complex_dim(),
            Carrier::Sub(s) => s.complex_dim(),
        }
    }

    /// Orthonormal basis of the carrier inside its ambient module.
    pub fn basis(&self) -> DMatrix<Complex64> {
        match self {
            Carrier::Free(m) => DMatrix::identity(m.complex_dim(), m.complex_dim()),
            Carrier::Sub(s) => s.basis_matrix().clone(),
        }
    }

    /// The carrier as a submodule of its ambient module.
    pub fn as_submodule(&self) -> Submodule {
        match self {
            Carrier::Free(m) => Submodule::full(m),
            Carrier::Sub(s) => s.clone(),
        }
    }

    /// Right action of each matrix unit in carrier coordinates.
    pub fn unit_actions(&self) -> Vec<DMatrix<Complex64>> {
        match self {
            Carrier::Free(m) => m.unit_action_matrices(),
            Carrier::Sub(s) => {
                let q = s.basis_matrix();
                s.ambient()
                    .unit_action_matrices()
                    .into_iter()
                    .map(|r| q.adjoint() * r * q)
                    .collect()
            }
        }
    }

    /// Do the two carriers span the same subspace of the same ambient module?
    pub fn span_eq(&self, other: &Carrier, tol: Tolerance) -> bool {
        self.ambient() == other.ambient()
            && self
                .as_submodule()
                .projection_distance(&other.as_submodule())
                .map(|d| d <= tol.threshold(1.0))
                .unwrap_or(false)
    }

    /// Change of coordinates into another carrier with the same span.
    pub fn coord_change(
        &self,
        into: &Carrier,
        tol: Tolerance,
    ) -> Result<DMatrix<Complex64>, OperatorError> {
        if !self.span_eq(into, tol) {
            return Err(OperatorError::CarrierMismatch {
                reason: "carriers span different subspaces".into(),
            });
        }
        Ok(into.basis().adjoint() * self.basis())
    }

    fn coords_of(
        &self,
        x: &ModuleVector,
        tol: Tolerance,
    ) -> Result<nalgebra::DVector<Complex64>, OperatorError> {
        if x.module() != self.ambient() {
            return Err(OperatorError::CarrierMismatch {
                reason: "vector from a different ambient module".into(),
            });
        }
        if let Carrier::Sub(s) = self {
            let defect = s.containment_defect(x);
            if !tol.passes(defect, x.flatten().norm()) {
                return Err(OperatorError::VectorOutsideDomain { defect });
            }
        }
        Ok(self.basis().adjoint() * x.flatten())
    }

    fn vector_from_coords(&self, coords: &nalgebra::DVector<Complex64>) -> ModuleVector {
        self.ambient().unflatten(&(self.basis() * coords))
    }
}

/// A module-linear map between carriers, in orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct ModuleMap {
    domain: Carrier,
    codomain: Carrier,
    mat: DMatrix<Complex64>,
}

/// Worst violating triple of a `B`-valued Gram identity: basis indices into
/// the relevant carriers plus the matrix unit that detected the defect.
#[derive(Debug, Clone, PartialEq)]
pub struct GramWitness {
    pub left_index: usize,
    pub right_index: usize,
    pub unit_index: usize,
    pub defect: f64,
}

/// Result of an adjoint solve: the adjoint map, or a refusal carrying the
/// residual and the worst violating basis pair.
#[derive(Debug, Clone)]
pub enum AdjointOutcome {
    Adjoint(ModuleMap),
    Refused { residual: f64, witness: GramWitness },
}

impl AdjointOutcome {
    pub fn adjoint(&self) -> Option<&ModuleMap> {
        match self {
            AdjointOutcome::Adjoint(m) => Some(m),
            AdjointOutcome::Refused { .. } => None,
        }
    }
}

/// Largest absolute entry of a matrix together with its position.
pub(crate) fn max_entry(m: &DMatrix<Complex64>) -> (usize, usize, f64) {
    let mut best = (0, 0, 0.0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)].norm();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    best
}

impl ModuleMap {
    /// Builds a map after verifying shape and module linearity: the matrix
    /// must commute with the right action of every matrix unit.
    pub fn try_new(
        domain: Carrier,
        codomain: Carrier,
        mat: DMatrix<Complex64>,
        tol: Tolerance,
    ) -> Result<Self, OperatorError> {
        if domain.ambient().algebra() != codomain.ambient().algebra() {
            return Err(OperatorError::CarrierMismatch {
                reason: "domain and codomain lie over different algebras".into(),
            });
        }
        let expected = (codomain.dim(), domain.dim());
        let got = (mat.nrows(), mat.ncols());
        if expected != got {
            return Err(OperatorError::ShapeMismatch { expected, got });
        }
        let map = ModuleMap { domain, codomain, mat };
        let defect = map.linearity_defect();
        if !tol.passes(defect, map.norm()) {
            return Err(OperatorError::NotModuleLinear { defect });
        }
        Ok(map)
    }

    /// `max_u norm(M R_u - R_u M)` over the matrix units.
    pub fn linearity_defect(&self) -> f64 {
        let dom_actions = self.domain.unit_actions();
        let cod_actions = self.codomain.unit_actions();
        let mut worst: f64 = 0.0;
        for (rd, rc) in dom_actions.iter().zip(&cod_actions) {
            worst = worst.max(spectral_norm(&(&self.mat * rd - rc * &self.mat)));
        }
        worst
    }

    pub fn identity(carrier: Carrier) -> Self {
        let n = carrier.dim();
        ModuleMap { domain: carrier.clone(), codomain: carrier, mat: DMatrix::identity(n, n) }
    }

    pub fn zero(domain: Carrier, codomain: Carrier) -> Self {
        let shape = (codomain.dim(), domain.dim());
        ModuleMap { domain, codomain, mat: DMatrix::zeros(shape.0, shape.1) }
    }

    /// The inclusion of a submodule into its ambient free module.
    pub fn inclusion(sub: &Submodule) -> Self {
        ModuleMap {
            domain: Carrier::sub(sub.clone()),
            codomain: Carrier::free(sub.ambient().clone()),
            mat: sub.basis_matrix().clone(),
        }
    }

    /// The orthogonal projection of the ambient module onto a submodule,
    /// viewed as a map onto the submodule carrier.
    pub fn projection_onto(sub: &Submodule) -> Self {
        ModuleMap {
            domain: Carrier::free(sub.ambient().clone()),
            codomain: Carrier::sub(sub.clone()),
            mat: sub.basis_matrix().adjoint(),
        }
    }

    /// Multiplication by a complex scalar on a carrier.
    pub fn scalar(carrier: Carrier, c: Complex64) -> Self {
        let n = carrier.dim();
        ModuleMap {
            domain: carrier.clone(),
            codomain: carrier,
            mat: DMatrix::identity(n, n) * c,
        }
    }

    /// Builds the left-multiplication map given by a matrix over the algebra,
    /// `(t x)_i = sum_j t_ij x_j`, between free modules over the same
    /// algebra. `entries` is indexed `[row][col]` with `rows ==
    /// codomain.rank()` and `cols == domain.rank()`.
    pub fn from_algebra_matrix(
        domain: &FreeModule,
        codomain: &FreeModule,
        entries: &[Vec<crate::algebra::AlgebraElement>],
    ) -> Result<Self, OperatorError> {
        if domain.algebra() != codomain.algebra() {
            return Err(OperatorError::CarrierMismatch {
                reason: "free modules over different algebras".into(),
            });
        }
        if entries.len() != codomain.rank()
            || entries.iter().any(|row| row.len() != domain.rank())
        {
            return Err(OperatorError::ShapeMismatch {
                expected: (codomain.rank(), domain.rank()),
                got: (entries.len(), entries.first().map_or(0, |r| r.len())),
            });
        }
        for row in entries {
            for t in row {
                if t.spec() != domain.algebra() {
                    return Err(OperatorError::CarrierMismatch {
                        reason: "entry from a different algebra".into(),
                    });
                }
            }
        }
        let n = domain.complex_dim();
        let m = codomain.complex_dim();
        let mut mat = DMatrix::zeros(m, n);
        for j in 0..n {
            let x = domain.basis_vector(j);
            let mut out_entries = Vec::with_capacity(codomain.rank());
            for row in entries {
                let mut acc = codomain.algebra().zero();
                for (t, xj) in row.iter().zip(x.entries()) {
                    acc = &acc + &(t * xj);
                }
                out_entries.push(acc);
            }
            let image = ModuleVector::new(codomain, out_entries).expect("shape checked above");
            mat.set_column(j, &image.flatten());
        }
        // Left multiplication commutes with the right action exactly.
        Ok(ModuleMap {
            domain: Carrier::free(domain.clone()),
            codomain: Carrier::free(codomain.clone()),
            mat,
        })
    }

    pub fn domain(&self) -> &Carrier {
        &self.domain
    }

    pub fn codomain(&self) -> &Carrier {
        &self.codomain
    }

    /// Coordinate matrix in the carriers' orthonormal bases.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Matrix from ambient domain coordinates to ambient codomain
    /// coordinates (zero on the orthocomplement of a submodule domain).
    pub fn ambient_matrix(&self) -> DMatrix<Complex64> {
        self.codomain.basis() * &self.mat * self.domain.basis().adjoint()
    }

    /// Operator norm; coordinates are orthonormal so this is the largest
    /// singular value of the coordinate matrix.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.mat)
    }

    pub fn apply(&self, x: &ModuleVector, tol: Tolerance) -> Result<ModuleVector, OperatorError> {
        let coords = self.domain.coords_of(x, tol)?;
        Ok(self.codomain.vector_from_coords(&(&self.mat * coords)))
    }

    /// `self` after `inner`: requires the inner codomain and this map's
    /// domain to span the same subspace.
    pub fn compose(&self, inner: &ModuleMap, tol: Tolerance) -> Result<ModuleMap, OperatorError> {
        let change = inner.codomain.coord_change(&self.domain, tol)?;
        Ok(ModuleMap {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            mat: &self.mat * change * &inner.mat,
        })
    }

    /// Restricts the map to a submodule of its domain.
    pub fn restrict(&self, sub: &Submodule, tol: Tolerance) -> Result<ModuleMap, OperatorError> {
        if sub.ambient() != self.domain.ambient() {
            return Err(OperatorError::CarrierMismatch {
                reason: "restriction submodule lives elsewhere".into(),
            });
        }
        let q = sub.basis_matrix();
        let dom_proj = self.domain.as_submodule().projection_matrix();
        let defect = spectral_norm(&(q - &dom_proj * q));
        if !tol.passes(defect, 1.0) {
            return Err(OperatorError::SubmoduleOutsideDomain { defect });
        }
        Ok(ModuleMap {
            domain: Carrier::sub(sub.clone()),
            codomain: self.codomain.clone(),
            mat: &self.mat * (self.domain.basis().adjoint() * q),
        })
    }

    /// Corestricts the map onto a submodule of its codomain's ambient module
    /// that contains the image.
    pub fn corestrict(&self, sub: &Submodule, tol: Tolerance) -> Result<ModuleMap, OperatorError> {
        if sub.ambient() != self.codomain.ambient() {
            return Err(OperatorError::CarrierMismatch {
                reason: "corestriction submodule lives elsewhere".into(),
            });
        }
        let ambient = self.codomain.basis() * &self.mat;
        let leak = &ambient - sub.projection_matrix() * &ambient;
        let defect = spectral_norm(&leak);
        if !tol.passes(defect, self.norm()) {
            return Err(OperatorError::ImageEscapesCodomain { defect });
        }
        Ok(ModuleMap {
            domain: self.domain.clone(),
            codomain: Carrier::sub(sub.clone()),
            mat: sub.basis_matrix().adjoint() * ambient,
        })
    }

    /// Kernel as a submodule of the domain's ambient module.
    pub fn kernel(&self, tol: Tolerance) -> Submodule {
        let ns = null_space_basis(&self.mat, tol);
        Submodule::from_orthonormal_basis(self.domain.ambient(), self.domain.basis() * ns)
    }

    /// Closed range as a submodule of the codomain's ambient module.
    pub fn range_closure(&self, tol: Tolerance) -> Submodule {
        let cols = self.codomain.basis() * &self.mat;
        Submodule::from_orthonormal_basis(
            self.codomain.ambient(),
            column_space_basis(&cols, tol),
        )
    }

    /// Attempts to solve `<m x, y> = <x, a y>` for a module-linear `a`.
    ///
    /// In orthonormal coordinates the only candidate is the conjugate
    /// transpose of the coordinate matrix (it solves the trace-paired system
    /// exactly); the `B`-valued identity is then verified on all basis pairs
    /// and the worst violation reported on refusal. On this backend the
    /// verification always succeeds for module-linear maps.
    pub fn try_adjoint(&self, tol: Tolerance) -> AdjointOutcome {
        let candidate = self.mat.adjoint();
        let dom_actions = self.domain.unit_actions();
        let cod_actions = self.codomain.unit_actions();
        let mut worst = GramWitness { left_index: 0, right_index: 0, unit_index: 0, defect: 0.0 };
        for (u, (rd, rc)) in dom_actions.iter().zip(&cod_actions).enumerate() {
            // <m x_i, y_j . u> = <x_i . u*, a y_j> reduces to
            // M* R_u^cod = R_u^dom M*.
            let diff = &candidate * rc - rd * &candidate;
            let (i, j, defect) = max_entry(&diff);
            if defect > worst.defect {
                worst = GramWitness { left_index: i, right_index: j, unit_index: u, defect };
            }
        }
        if tol.passes(worst.defect, self.norm()) {
            AdjointOutcome::Adjoint(ModuleMap {
                domain: self.codomain.clone(),
                codomain: self.domain.clone(),
                mat: candidate,
            })
        } else {
            AdjointOutcome::Refused { residual: worst.defect, witness: worst }
        }
    }

    /// Largest violation of `<m x, m y> = <x, y>` over basis pairs.
    pub fn isometry_defect(&self) -> f64 {
        let dom_actions = self.domain.unit_actions();
        let cod_actions = self.codomain.unit_actions();
        let mut worst: f64 = 0.0;
        for (rd, rc) in dom_actions.iter().zip(&cod_actions) {
            let diff = self.mat.adjoint() * rc * &self.mat - rd;
            worst = worst.max(spectral_norm(&diff));
        }
        worst
    }

    /// Inner-product preserving: `<m x, m y> = <x, y>` on all basis pairs.
    pub fn is_isometry(&self, tol: Tolerance) -> bool {
        tol.passes(self.isometry_defect(), (1.0 + self.norm()).powi(2))
    }

    /// Contractive, surjective onto the codomain, and isometric on the
    /// orthocomplement of the kernel taken inside the domain.
    pub fn is_coisometry(&self, tol: Tolerance) -> bool {
        if self.norm() > 1.0 + tol.eps() {
            return false;
        }
        let range = self.range_closure(tol);
        let target = self.codomain.as_submodule();
        match range.projection_distance(&target) {
            Ok(d) if tol.passes(d, 1.0) => {}
            _ => return false,
        }
        let kernel = self.kernel(tol);
        let support = self.domain.as_submodule().complement_within(&kernel);
        if support.is_zero() {
            // Map is zero; it corestricts to a unitary only onto the zero
            // module, handled by the range check above.
            return true;
        }
        match self.restrict(&support, tol) {
            Ok(restricted) => restricted.is_isometry(tol),
            Err(_) => false,
        }
    }

    /// Corestricts onto the closed range and tests for a coisometry there.
    pub fn is_partial_isometry(&self, tol: Tolerance) -> bool {
        let range = self.range_closure(tol);
        match self.corestrict(&range, tol) {
            Ok(co) => co.is_coisometry(tol),
            Err(_) => false,
        }
    }

    /// Orthogonal projection onto the orthocomplement of the kernel inside
    /// the domain, as a map of the domain into itself.
    ///
    /// # Errors
    ///
    /// `NotPartialIsometry` when the precondition fails.
    pub fn initial_projection(&self, tol: Tolerance) -> Result<ModuleMap, OperatorError> {
        if !self.is_partial_isometry(tol) {
            return Err(OperatorError::NotPartialIsometry);
        }
        let kernel = self.kernel(tol);
        let support = self.domain.as_submodule().complement_within(&kernel);
        // Support basis in domain coordinates.
        let c = self.domain.basis().adjoint() * support.basis_matrix();
        let proj = &c * c.adjoint();
        Ok(ModuleMap {
            domain: self.domain.clone(),
            codomain: self.domain.clone(),
            mat: proj,
        })
    }

    /// Largest violation of `<x, p y> = <p x, p y>` over basis pairs.
    pub fn gram_projection_defect(&self) -> Result<f64, OperatorError> {
        if !self.domain.span_eq(&self.codomain, Tolerance::default()) {
            return Err(OperatorError::DomainCodomainDiffer);
        }
        let change = self.codomain.coord_change(&self.domain, Tolerance::default())?;
        let p = change * &self.mat;
        let actions = self.domain.unit_actions();
        let mut worst: f64 = 0.0;
        for r in &actions {
            let diff = r * &p - p.adjoint() * r * &p;
            worst = worst.max(spectral_norm(&diff));
        }
        Ok(worst)
    }

    /// Projection test through the Gram identity alone; self-adjointness and
    /// idempotency follow and are not assumed.
    pub fn is_projection_gram(&self, tol: Tolerance) -> Result<bool, OperatorError> {
        let defect = self.gram_projection_defect()?;
        Ok(tol.passes(defect, (1.0 + self.norm()).powi(2)))
    }

    /// Absolute defect between two maps with matching carriers, measured on
    /// ambient matrices.
    pub fn map_defect(&self, other: &ModuleMap, tol: Tolerance) -> Result<f64, OperatorError> {
        if !self.domain.span_eq(&other.domain, tol) || !self.codomain.span_eq(&other.codomain, tol)
        {
            return Err(OperatorError::CarrierMismatch {
                reason: "comparing maps over different carriers".into(),
            });
        }
        Ok(spectral_norm(&(self.ambient_matrix() - other.ambient_matrix())))
    }

    pub fn map_eq(&self, other: &ModuleMap, tol: Tolerance) -> Result<bool, OperatorError> {
        let defect = self.map_defect(other, tol)?;
        Ok(tol.passes(defect, self.norm().max(other.norm())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AlgebraElement, AlgebraSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn scalar_module(rank: usize) -> FreeModule {
        FreeModule::new(AlgebraSpec::new(vec![1]).unwrap(), rank)
    }

    fn m2_module(rank: usize) -> FreeModule {
        FreeModule::new(AlgebraSpec::new(vec![2]).unwrap(), rank)
    }

    /// Complex 2x2 matrix as a map on (C)^2.
    fn scalar_map(mod2: &FreeModule, rows: [[Complex64; 2]; 2]) -> ModuleMap {
        let el = |z: Complex64| {
            AlgebraElement::from_blocks(
                mod2.algebra(),
                vec![DMatrix::from_row_slice(1, 1, &[z])],
            )
            .unwrap()
        };
        ModuleMap::from_algebra_matrix(
            mod2,
            mod2,
            &[vec![el(rows[0][0]), el(rows[0][1])], vec![el(rows[1][0]), el(rows[1][1])]],
        )
        .unwrap()
    }

    fn shift_map(mod2: &FreeModule) -> ModuleMap {
        scalar_map(mod2, [[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]])
    }

    fn diag_map(mod2: &FreeModule, a: f64, b: f64) -> ModuleMap {
        scalar_map(mod2, [[c(a, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(b, 0.0)]])
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

    fn random_map(dom: &FreeModule, cod: &FreeModule, rng: &mut ChaCha8Rng) -> ModuleMap {
        let entries: Vec<Vec<AlgebraElement>> = (0..cod.rank())
            .map(|_| (0..dom.rank()).map(|_| random_element(dom.algebra(), rng)).collect())
            .collect();
        ModuleMap::from_algebra_matrix(dom, cod, &entries).unwrap()
    }

    #[test]
    fn algebra_matrix_action_matches_manual_product() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t00 = random_element(e.algebra(), &mut rng);
        let t01 = random_element(e.algebra(), &mut rng);
        let x0 = random_element(e.algebra(), &mut rng);
        let x1 = random_element(e.algebra(), &mut rng);
        let m = ModuleMap::from_algebra_matrix(
            &e,
            &e,
            &[vec![t00.clone(), t01.clone()], vec![e.algebra().zero(), e.algebra().identity()]],
        )
        .unwrap();
        let x = ModuleVector::new(&e, vec![x0.clone(), x1.clone()]).unwrap();
        let y = m.apply(&x, tol()).unwrap();
        let expected0 = &(&t00 * &x0) + &(&t01 * &x1);
        assert!((&y.entries()[0] - &expected0).norm() < 1e-12);
        assert!((&y.entries()[1] - &x1).norm() < 1e-12);
    }

    #[test]
    fn linearity_check_rejects_non_module_maps() {
        // Transposition of the matrix entries is complex-linear but does not
        // commute with right multiplication on M_2.
        let e = m2_module(1);
        let n = e.complex_dim();
        let mut mat = DMatrix::zeros(n, n);
        // Flattened layout of one M_2 entry is column-major:
        // [x11, x21, x12, x22]; transposition swaps indexes 1 and 2.
        mat[(0, 0)] = c(1.0, 0.0);
        mat[(1, 2)] = c(1.0, 0.0);
        mat[(2, 1)] = c(1.0, 0.0);
        mat[(3, 3)] = c(1.0, 0.0);
        let err = ModuleMap::try_new(
            Carrier::free(e.clone()),
            Carrier::free(e.clone()),
            mat,
            tol(),
        );
        assert!(matches!(err, Err(OperatorError::NotModuleLinear { .. })));
    }

    #[test]
    fn compose_with_identity() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_map(&e, &e, &mut rng);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        let left = id.compose(&m, tol()).unwrap();
        let right = m.compose(&id, tol()).unwrap();
        assert!(left.map_eq(&m, tol()).unwrap());
        assert!(right.map_eq(&m, tol()).unwrap());
    }

    #[test]
    fn restrict_then_apply_agrees() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_map(&e, &e, &mut rng);
        let entries = (0..e.rank())
            .map(|_| random_element(e.algebra(), &mut rng))
            .collect();
        let g = ModuleVector::new(&e, entries).unwrap();
        let s = Submodule::from_generators(&[g.clone()], tol()).unwrap();
        let restricted = m.restrict(&s, tol()).unwrap();
        let via_restriction = restricted.apply(&g, tol()).unwrap();
        let direct = m.apply(&g, tol()).unwrap();
        assert!((&via_restriction - &direct).module_norm() < 1e-9);
    }

    #[test]
    fn corestriction_to_range_is_full() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = random_map(&e, &e, &mut rng);
        let range = m.range_closure(tol());
        let co = m.corestrict(&range, tol()).unwrap();
        let co_range = co.range_closure(tol());
        assert!(co_range.submodule_eq(&range, tol()).unwrap());
    }

    #[test]
    fn corestriction_rejects_escaping_image() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        let line = Submodule::from_generators(
            &[e.embed(0, e.algebra().identity())],
            tol(),
        )
        .unwrap();
        assert!(matches!(
            id.corestrict(&line, tol()),
            Err(OperatorError::ImageEscapesCodomain { .. })
        ));
    }

    #[test]
    fn kernel_and_range_of_examples() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id.kernel(tol()).is_zero());
        assert!(id.range_closure(tol()).submodule_eq(&Submodule::full(&e), tol()).unwrap());

        let zero = ModuleMap::zero(Carrier::free(e.clone()), Carrier::free(e.clone()));
        assert_eq!(zero.kernel(tol()).complex_dim(), e.complex_dim());
        assert!(zero.range_closure(tol()).is_zero());

        let p = diag_map(&e, 1.0, 0.0);
        let e0 = Submodule::from_generators(&[e.embed(0, e.algebra().identity())], tol()).unwrap();
        let e1 = Submodule::from_generators(&[e.embed(1, e.algebra().identity())], tol()).unwrap();
        assert!(p.kernel(tol()).submodule_eq(&e1, tol()).unwrap());
        assert!(p.range_closure(tol()).submodule_eq(&e0, tol()).unwrap());
    }

    #[test]
    fn kernel_is_complement_of_adjoint_range() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let m = random_map(&e, &e, &mut rng);
            let adj = match m.try_adjoint(tol()) {
                AdjointOutcome::Adjoint(a) => a,
                AdjointOutcome::Refused { .. } => panic!("adjoint exists on this backend"),
            };
            let lhs = m.kernel(tol());
            let rhs = adj.range_closure(tol()).orthocomplement();
            assert!(lhs.submodule_eq(&rhs, tol()).unwrap());
        }
    }

    #[test]
    fn adjoint_of_shift() {
        let e = scalar_module(2);
        let m = shift_map(&e);
        let adj = m.try_adjoint(tol());
        let expected = scalar_map(&e, [[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
        assert!(adj.adjoint().unwrap().map_eq(&expected, tol()).unwrap());
    }

    #[test]
    fn adjoint_of_unitary_is_inverse() {
        let e = scalar_module(2);
        let s = 0.6_f64;
        let t = 0.8_f64;
        let u = scalar_map(&e, [[c(s, 0.0), c(-t, 0.0)], [c(t, 0.0), c(s, 0.0)]]);
        let adj = u.try_adjoint(tol());
        let composed = adj.adjoint().unwrap().compose(&u, tol()).unwrap();
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(composed.map_eq(&id, tol()).unwrap());
    }

    #[test]
    fn adjoint_satisfies_module_valued_gram_identity() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let m = random_map(&e, &e, &mut rng);
        let adj = match m.try_adjoint(tol()) {
            AdjointOutcome::Adjoint(a) => a,
            AdjointOutcome::Refused { .. } => panic!("adjoint exists on this backend"),
        };
        for x in e.standard_basis().iter().take(6) {
            for y in e.standard_basis().iter().take(6) {
                let lhs = m.apply(x, tol()).unwrap().inner_product(y).unwrap();
                let rhs = x.inner_product(&adj.apply(y, tol()).unwrap()).unwrap();
                assert!((&lhs - &rhs).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn isometry_examples() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id.is_isometry(tol()));
        let twice = ModuleMap::scalar(Carrier::free(e.clone()), c(2.0, 0.0));
        assert!(!twice.is_isometry(tol()));
        let line = Submodule::from_generators(&[e.embed(0, e.algebra().identity())], tol())
            .unwrap();
        assert!(ModuleMap::inclusion(&line).is_isometry(tol()));
    }

    #[test]
    fn coisometry_examples() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id.is_coisometry(tol()));

        let line = Submodule::from_generators(&[e.embed(0, e.algebra().identity())], tol())
            .unwrap();
        let p = diag_map(&e, 1.0, 0.0).corestrict(&line, tol()).unwrap();
        assert!(p.is_coisometry(tol()));

        let stretched = diag_map(&e, 2.0, 0.0).corestrict(&line, tol()).unwrap();
        assert!(!stretched.is_coisometry(tol()));
    }

    #[test]
    fn partial_isometry_examples() {
        let e = scalar_module(2);
        assert!(shift_map(&e).is_partial_isometry(tol()));
        let big = scalar_map(&e, [[c(0.0, 0.0), c(2.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(!big.is_partial_isometry(tol()));
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id.is_partial_isometry(tol()));
        let zero = ModuleMap::zero(Carrier::free(e.clone()), Carrier::free(e.clone()));
        assert!(zero.is_partial_isometry(tol()));
    }

    #[test]
    fn every_isometry_is_a_partial_isometry() {
        let e = m2_module(1);
        let f = m2_module(2);
        // Inclusion into the first coordinate composed with nothing else is
        // already an isometry; check the implication on it and on a rotated
        // version.
        let mut entries = vec![vec![f.algebra().identity()], vec![f.algebra().zero()]];
        let incl = ModuleMap::from_algebra_matrix(&e, &f, &entries).unwrap();
        assert!(incl.is_isometry(tol()));
        assert!(incl.is_partial_isometry(tol()));
        entries = vec![
            vec![f.algebra().identity().scale(c(0.6, 0.0))],
            vec![f.algebra().identity().scale(c(0.8, 0.0))],
        ];
        let tilted = ModuleMap::from_algebra_matrix(&e, &f, &entries).unwrap();
        assert!(tilted.is_isometry(tol()));
        assert!(tilted.is_partial_isometry(tol()));
    }

    #[test]
    fn classical_triple_product_agrees() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // Build a partial isometry from the polar factor of a random map's
        // coordinate matrix: u = U V^H from the SVD.
        let m = random_map(&e, &e, &mut rng);
        let svd = m.matrix().clone().svd(true, true);
        let u = svd.u.unwrap() * svd.v_t.unwrap();
        let v = ModuleMap::try_new(
            Carrier::free(e.clone()),
            Carrier::free(e.clone()),
            u,
            tol(),
        )
        .unwrap();
        assert!(v.is_partial_isometry(tol()));
        let vs = v.try_adjoint(tol());
        let triple = v
            .compose(&vs.adjoint().unwrap().compose(&v, tol()).unwrap(), tol())
            .unwrap();
        assert!(triple.map_eq(&v, tol()).unwrap());
    }

    #[test]
    fn initial_projection_examples() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id
            .initial_projection(tol())
            .unwrap()
            .map_eq(&id, tol())
            .unwrap());

        let m = shift_map(&e);
        let pi = m.initial_projection(tol()).unwrap();
        let expected = diag_map(&e, 0.0, 1.0);
        assert!(pi.map_eq(&expected, tol()).unwrap());
        // m composed with its initial projection reproduces m.
        let again = m.compose(&pi, tol()).unwrap();
        assert!(again.map_eq(&m, tol()).unwrap());

        let zero = ModuleMap::zero(Carrier::free(e.clone()), Carrier::free(e.clone()));
        let pi0 = zero.initial_projection(tol()).unwrap();
        assert!(pi0.norm() < 1e-12);

        let twice = ModuleMap::scalar(Carrier::free(e.clone()), c(2.0, 0.0));
        assert!(matches!(
            twice.initial_projection(tol()),
            Err(OperatorError::NotPartialIsometry)
        ));
    }

    #[test]
    fn gram_projection_examples() {
        let e = scalar_module(2);
        let id = ModuleMap::identity(Carrier::free(e.clone()));
        assert!(id.is_projection_gram(tol()).unwrap());
        assert!(diag_map(&e, 1.0, 0.0).is_projection_gram(tol()).unwrap());
        // Idempotent but oblique: fails the Gram identity.
        let oblique = scalar_map(&e, [[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(!oblique.is_projection_gram(tol()).unwrap());
    }

    #[test]
    fn gram_projection_forces_self_adjoint_idempotent() {
        let e = m2_module(2);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let entries = (0..e.rank())
            .map(|_| random_element(e.algebra(), &mut rng))
            .collect();
        let g = ModuleVector::new(&e, entries).unwrap();
        let s = Submodule::from_generators(&[g], tol()).unwrap();
        let incl = ModuleMap::inclusion(&s);
        let proj = ModuleMap::projection_onto(&s);
        let p = incl.compose(&proj, tol()).unwrap();
        assert!(p.is_projection_gram(tol()).unwrap());
        let adj = p.try_adjoint(tol());
        assert!(adj.adjoint().unwrap().map_eq(&p, tol()).unwrap());
        let squared = p.compose(&p, tol()).unwrap();
        assert!(squared.map_eq(&p, tol()).unwrap());
    }

    #[test]
    fn norm_is_spectral() {
        let e = scalar_module(2);
        let m = diag_map(&e, 3.0, -4.0);
        assert!((m.norm() - 4.0).abs() < 1e-12);
    }
}
