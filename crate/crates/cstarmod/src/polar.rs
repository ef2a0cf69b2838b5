//! Modular structure and generalized polar decomposition.
//!
//! A map `a` between module carriers is *modular* when some positive,
//! self-adjoint, module-linear `b` on the domain satisfies
//! `<x, b y> = <a x, a y>` for all `x, y`. The solver below recovers `b` by
//! an honest least-squares fit over the real vector space of Hermitian
//! module-linear endomorphisms of the domain; it never forms `b` from an
//! adjoint of `a`, so comparisons against `a* a` stay meaningful as an
//! independent oracle.
//!
//! From `b` the pipeline continues: the modulus `|a| = sqrt(b)`, the closed
//! range of the modulus, the unique isometry `v` on that range with
//! `v |a| = a`, and, when the range is orthogonally complemented in the
//! domain, the polar factor (a partial isometry on the whole domain) given
//! by composing `v` with the orthogonal projection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{hermitian_part, spectral_norm};
use crate::module::Submodule;
use crate::operator::{max_entry, Carrier, GramWitness, ModuleMap, OperatorError};
use crate::tol::Tolerance;

#[derive(Debug, Error)]
pub enum PolarError {
    #[error("least-squares solve for the Gram map failed: {0}")]
    SolveFailed(String),
    #[error("map is not modular (residual {residual:.3e})")]
    NotModular { residual: f64, witness: GramWitness },
    #[error("solved Gram map is not positive (eigenvalue floor {floor:.3e})")]
    GramNotPositive { floor: f64 },
    #[error("map rank {map_rank} disagrees with Gram spectrum rank {gram_rank}")]
    RankMismatch { map_rank: usize, gram_rank: usize },
    #[error("closed range of the modulus is not complemented in the domain")]
    RangeNotComplemented,
    #[error("closed range of the map is a proper submodule of the codomain")]
    RangeNotDense,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Spanning set, over the reals, of the Hermitian module-linear
/// endomorphisms of a carrier: the Hermitian part of the commutant of the
/// right unit actions. Computing it once and reusing it across many solves
/// on the same carrier is the main batching lever.
#[derive(Debug, Clone)]
pub struct HermitianCommutant {
    dim: usize,
    basis: Vec<DMatrix<Complex64>>,
}

impl HermitianCommutant {
    pub fn of(carrier: &Carrier, tol: Tolerance) -> Self {
        let actions = carrier.unit_actions();
        let n = carrier.dim();
        if n == 0 {
            return HermitianCommutant { dim: 0, basis: Vec::new() };
        }
        let n2 = n * n;
        let eye = DMatrix::<Complex64>::identity(n, n);
        // Commutation with every unit action, as one stacked linear operator
        // on vectorized matrices: vec(X S - S X) = (S^T (x) I - I (x) S) vec X.
        let mut k = DMatrix::<Complex64>::zeros(actions.len() * n2, n2);
        for (ui, s) in actions.iter().enumerate() {
            let block = s.transpose().kronecker(&eye) - eye.kronecker(s);
            k.view_mut((ui * n2, 0), (n2, n2)).copy_from(&block);
        }
        let null = crate::module::null_space_basis(&k, tol);
        // The commutant is closed under conjugate transpose, so Hermitian and
        // anti-Hermitian parts of a complex basis span its Hermitian part
        // over the reals. The spanning set is redundant; orthonormalize it
        // (real coefficients keep candidates Hermitian) so the solves below
        // work against a well-conditioned basis of the true dimension.
        let mut basis: Vec<DMatrix<Complex64>> = Vec::new();
        for j in 0..null.ncols() {
            let x = DMatrix::from_column_slice(n, n, null.column(j).as_slice());
            let h = (&x + &x.adjoint()) * Complex64::new(0.5, 0.0);
            let ah = (&x - &x.adjoint()) * Complex64::new(0.0, -0.5);
            for mut cand in [h, ah] {
                // Modified Gram-Schmidt with one re-orthogonalization pass.
                for _ in 0..2 {
                    for q in &basis {
                        let coeff = frobenius_re(q, &cand);
                        cand -= q * Complex64::new(coeff, 0.0);
                    }
                }
                let norm = frobenius_re(&cand, &cand).sqrt();
                if norm > 1e-8 {
                    basis.push(cand / Complex64::new(norm, 0.0));
                }
            }
        }
        HermitianCommutant { dim: n, basis }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Real part of the Frobenius pairing, the inner product for which Hermitian
/// matrices form a real Hilbert space.
fn frobenius_re(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Solved Gram map together with its quality measures.
#[derive(Debug, Clone)]
pub struct ModularityCertificate {
    /// The Gram map `b` on the domain carrier.
    pub b: ModuleMap,
    /// Largest spectral norm of the defining identity's defect over the
    /// matrix units, absolute.
    pub residual: f64,
    /// Worst violating basis pair (its defect is tiny on success).
    pub worst_pair: GramWitness,
    /// Conjugate-symmetry defect of the solved coordinate matrix.
    pub hermitian_defect: f64,
    /// Smallest eigenvalue of the solved coordinate matrix.
    pub positivity_floor: f64,
}

#[derive(Debug, Clone)]
pub enum ModularityVerdict {
    Modular(ModularityCertificate),
    NotModular { residual: f64, witness: GramWitness },
}

impl ModularityVerdict {
    pub fn certificate(&self) -> Option<&ModularityCertificate> {
        match self {
            ModularityVerdict::Modular(c) => Some(c),
            ModularityVerdict::NotModular { .. } => None,
        }
    }
}

/// Residual of a candidate coordinate matrix for the Gram identity of `a`:
/// the largest spectral norm of `S_u b - a* T_u a` over the matrix units,
/// with the worst violating basis pair.
pub fn gram_residual(a: &ModuleMap, candidate: &DMatrix<Complex64>) -> (f64, GramWitness) {
    let dom_actions = a.domain().unit_actions();
    let cod_actions = a.codomain().unit_actions();
    let m = a.matrix();
    let mut residual: f64 = 0.0;
    let mut witness = GramWitness { left_index: 0, right_index: 0, unit_index: 0, defect: 0.0 };
    for (ui, (s, t)) in dom_actions.iter().zip(&cod_actions).enumerate() {
        let d = s * candidate - m.adjoint() * t * m;
        let norm = spectral_norm(&d);
        if norm >= residual {
            residual = norm;
            let (i, j, defect) = max_entry(&d);
            witness = GramWitness { left_index: i, right_index: j, unit_index: ui, defect };
        }
    }
    (residual, witness)
}

/// Least-squares Gram solve against a precomputed Hermitian commutant.
pub fn solve_modularity_with(
    a: &ModuleMap,
    commutant: &HermitianCommutant,
    tol: Tolerance,
) -> Result<ModularityVerdict, PolarError> {
    let n = a.domain().dim();
    if commutant.dim != n {
        return Err(PolarError::SolveFailed(
            "commutant was computed for a different carrier".into(),
        ));
    }
    let bmat = if n == 0 || commutant.basis.is_empty() {
        DMatrix::zeros(n, n)
    } else {
        let dom_actions = a.domain().unit_actions();
        let cod_actions = a.codomain().unit_actions();
        let m = a.matrix();
        let n2 = n * n;
        let rows = 2 * dom_actions.len() * n2;
        let cols = commutant.basis.len();
        // One real column per Hermitian basis element: the stacked real and
        // imaginary parts of S_u H over all units u.
        let mut f = DMatrix::<f64>::zeros(rows, cols);
        for (c, h) in commutant.basis.iter().enumerate() {
            for (ui, s) in dom_actions.iter().enumerate() {
                let prod = s * h;
                let base = ui * 2 * n2;
                for (idx, v) in prod.iter().enumerate() {
                    f[(base + idx, c)] = v.re;
                    f[(base + n2 + idx, c)] = v.im;
                }
            }
        }
        let mut rhs = DVector::<f64>::zeros(rows);
        for (ui, t) in cod_actions.iter().enumerate() {
            let prod = m.adjoint() * t * m;
            let base = ui * 2 * n2;
            for (idx, v) in prod.iter().enumerate() {
                rhs[base + idx] = v.re;
                rhs[base + n2 + idx] = v.im;
            }
        }
        // Normal equations on the small coefficient space; the orthonormal
        // basis keeps the Gram matrix well conditioned, and a symmetric
        // eigendecomposition of an m-by-m real matrix is far sturdier than an
        // SVD of the tall stacked system.
        let gram = f.transpose() * &f;
        let gvec = f.transpose() * rhs;
        let eig = gram.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cut = 1e-12 * lmax.max(1e-300);
        let mut alpha = DVector::<f64>::zeros(cols);
        for i in 0..cols {
            let l = eig.eigenvalues[i];
            if l > cut {
                let vi = eig.eigenvectors.column(i);
                let coeff = vi.dot(&gvec) / l;
                alpha += vi * coeff;
            }
        }
        let mut bmat = DMatrix::<Complex64>::zeros(n, n);
        for (c, h) in commutant.basis.iter().enumerate() {
            bmat += h * Complex64::new(alpha[c], 0.0);
        }
        bmat
    };

    let (residual, worst) = gram_residual(a, &bmat);
    let scale = a.norm() * a.norm();
    if !tol.passes(residual, scale) {
        return Ok(ModularityVerdict::NotModular { residual, witness: worst });
    }
    let hermitian_defect = spectral_norm(&(&bmat - bmat.adjoint()));
    let positivity_floor = if n == 0 {
        0.0
    } else {
        hermitian_part(&bmat)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let b = ModuleMap::try_new(a.domain().clone(), a.domain().clone(), bmat, tol)?;
    Ok(ModularityVerdict::Modular(ModularityCertificate {
        b,
        residual,
        worst_pair: worst,
        hermitian_defect,
        positivity_floor,
    }))
}

/// Solves `<x, b y> = <a x, a y>` for the Gram map of `a`.
pub fn solve_modularity(a: &ModuleMap, tol: Tolerance) -> Result<ModularityVerdict, PolarError> {
    let commutant = HermitianCommutant::of(a.domain(), tol);
    solve_modularity_with(a, &commutant, tol)
}

/// Same solve with the parametrization basis shuffled; the solved Gram map
/// must not depend on the enumeration order.
pub fn solve_modularity_shuffled(
    a: &ModuleMap,
    seed: u64,
    tol: Tolerance,
) -> Result<ModularityVerdict, PolarError> {
    let mut commutant = HermitianCommutant::of(a.domain(), tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    commutant.basis.shuffle(&mut rng);
    solve_modularity_with(a, &commutant, tol)
}

/// Square root of the solved Gram map on the same carrier.
pub fn modulus(cert: &ModularityCertificate, tol: Tolerance) -> Result<ModuleMap, PolarError> {
    let bmat = hermitian_part(cert.b.matrix());
    let clamp = tol.threshold(spectral_norm(&bmat));
    let root = crate::algebra::hermitian_sqrt(&bmat, clamp)
        .map_err(|floor| PolarError::GramNotPositive { floor })?;
    Ok(ModuleMap::try_new(cert.b.domain().clone(), cert.b.domain().clone(), root, tol)?)
}

/// Everything the modular structure of a map provides before asking for a
/// complement: the Gram map, the modulus, both closed ranges, and the
/// canonical isometry from the modulus range onto the map range.
#[derive(Debug, Clone)]
pub struct PolarData {
    pub certificate: ModularityCertificate,
    pub modulus: ModuleMap,
    /// Closed range of the modulus, inside the domain's ambient module.
    pub range_of_modulus: Submodule,
    /// Closed range of the map, inside the codomain's ambient module.
    pub range_of_map: Submodule,
    /// The isometry `v` with `v |a| = a`, defined on the modulus range.
    pub isometry: ModuleMap,
    /// Spectral-norm defect of `v |a| = a` in domain coordinates.
    pub factorization_defect: f64,
    /// Gram isometry defect of `v` over all basis pairs.
    pub isometry_defect: f64,
    /// Distance between the modulus range and the Gram map's range; the two
    /// coincide in exact arithmetic.
    pub range_cross_defect: f64,
    /// Ratio of the largest to the smallest kept singular value of the map,
    /// i.e. the condition number of the modulus on its range. Bounds the
    /// forward error of the constructed factors, so construction checks are
    /// verified against it rather than against the bare tolerance.
    pub modulus_condition: f64,
}

/// Tolerance for verifying maps constructed through the inverse modulus:
/// their linearity defect grows with the Gram condition number, so the
/// acceptance threshold does too (capped to stay a real gate against
/// structurally wrong matrices).
fn construction_tolerance(tol: Tolerance, condition: f64) -> Tolerance {
    let eps = (tol.eps() * condition.max(1.0)).min(1e-2);
    Tolerance::new(eps).unwrap_or(tol)
}

/// Runs the modular pipeline up to the canonical isometry. Fails if the map
/// is not modular or the Gram map is not positive; no complement is needed
/// at this stage.
pub fn modular_isometry(a: &ModuleMap, tol: Tolerance) -> Result<PolarData, PolarError> {
    let commutant = HermitianCommutant::of(a.domain(), tol);
    modular_isometry_with(a, &commutant, tol)
}

/// As [`modular_isometry`] with a reusable commutant.
pub fn modular_isometry_with(
    a: &ModuleMap,
    commutant: &HermitianCommutant,
    tol: Tolerance,
) -> Result<PolarData, PolarError> {
    let cert = match solve_modularity_with(a, commutant, tol)? {
        ModularityVerdict::Modular(c) => c,
        ModularityVerdict::NotModular { residual, witness } => {
            return Err(PolarError::NotModular { residual, witness })
        }
    };
    let n = a.domain().dim();

    // Rank from the map itself; the kept spectral directions of the Gram
    // map must match it, and the modulus is rebuilt with exactly that rank
    // so it does not pick up noise directions (the square root is not
    // Lipschitz at zero).
    let svd = a.matrix().clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > tol.eps() * smax).count();

    let bh = hermitian_part(cert.b.matrix());
    let (order, eigvals) = if n == 0 {
        (Vec::new(), DVector::zeros(0))
    } else {
        let eig = bh.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        (order, eig.eigenvalues)
    };
    let emax = eigvals.iter().copied().fold(0.0, f64::max);
    let gram_rank = eigvals.iter().filter(|&&ev| ev > tol.eps() * emax).count();
    if gram_rank != rank {
        return Err(PolarError::RankMismatch { map_rank: rank, gram_rank });
    }
    for &col in order.iter().take(rank) {
        if eigvals[col] <= 0.0 {
            return Err(PolarError::GramNotPositive { floor: eigvals[col] });
        }
    }

    // The factors are assembled from the singular value decomposition of the
    // map itself, not from the eigenvectors of the Gram map: squaring the
    // map squares its condition number, and near-degenerate small
    // eigenvalues of the square then rotate enough under roundoff to break
    // the linearity and isometry gates downstream. The right singular
    // vectors span the modulus range, the left ones are their images, and
    // the isometry columns are orthonormal by construction.
    let u_full = svd.u.as_ref().expect("left singular vectors were requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors were requested");
    let w_kept = v_t.rows(0, rank).adjoint();
    let va_mat = u_full.columns(0, rank).into_owned();

    let modulus_condition = if rank > 0 { sv[0] / sv[rank - 1] } else { 1.0 };
    let ctol = construction_tolerance(tol, modulus_condition);
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(
        rank,
        sv.iter().take(rank).map(|&s| Complex64::new(s, 0.0)),
    ));
    let modulus_mat = &w_kept * sigma * w_kept.adjoint();
    let modulus_map =
        ModuleMap::try_new(a.domain().clone(), a.domain().clone(), modulus_mat, ctol)?;

    let range_of_modulus = Submodule::from_orthonormal_basis(
        a.domain().ambient(),
        a.domain().basis() * &w_kept,
    );
    let range_of_map = a.range_closure(tol);
    let range_cross_defect = cert
        .b
        .range_closure(tol)
        .projection_distance(&range_of_modulus)
        .unwrap_or(f64::INFINITY);

    let isometry = ModuleMap::try_new(
        Carrier::sub(range_of_modulus.clone()),
        a.codomain().clone(),
        va_mat.clone(),
        ctol,
    )?;
    let isometry_defect = isometry.isometry_defect();
    // v composed with the modulus, extended by zero off the modulus range,
    // in domain coordinates.
    let v_mat = &va_mat * w_kept.adjoint();
    let factorization_defect = spectral_norm(&(v_mat * modulus_map.matrix() - a.matrix()));

    Ok(PolarData {
        certificate: cert,
        modulus: modulus_map,
        range_of_modulus,
        range_of_map,
        isometry,
        factorization_defect,
        isometry_defect,
        range_cross_defect,
        modulus_condition,
    })
}

/// Polar decomposition: the partial isometry on the whole domain.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub data: PolarData,
    /// `v` composed with the orthogonal projection onto the modulus range;
    /// a partial isometry from the domain to the codomain.
    pub polar_factor: ModuleMap,
    pub is_partial_isometry: bool,
    /// Does the polar factor annihilate exactly the kernel of the map?
    pub kernel_matches: bool,
}

/// Full polar decomposition. Beyond requiring modularity, the closed range
/// of the modulus must be orthogonally complemented inside the domain; on
/// this finite-dimensional backend that always holds, but the check is made
/// honestly rather than assumed.
pub fn polar_decompose(a: &ModuleMap, tol: Tolerance) -> Result<PolarDecomposition, PolarError> {
    let commutant = HermitianCommutant::of(a.domain(), tol);
    polar_decompose_with(a, &commutant, tol)
}

/// As [`polar_decompose`] with a reusable commutant.
pub fn polar_decompose_with(
    a: &ModuleMap,
    commutant: &HermitianCommutant,
    tol: Tolerance,
) -> Result<PolarDecomposition, PolarError> {
    let data = modular_isometry_with(a, commutant, tol)?;
    let dom_sub = a.domain().as_submodule();
    let complement = dom_sub.complement_within(&data.range_of_modulus);
    if data.range_of_modulus.complex_dim() + complement.complex_dim() != dom_sub.complex_dim() {
        return Err(PolarError::RangeNotComplemented);
    }
    // Coordinates of the modulus-range basis inside the domain carrier.
    let c = a.domain().basis().adjoint() * data.range_of_modulus.basis_matrix();
    let v_mat = data.isometry.matrix() * c.adjoint();
    let ctol = construction_tolerance(tol, data.modulus_condition);
    let polar_factor =
        ModuleMap::try_new(a.domain().clone(), a.codomain().clone(), v_mat, ctol)?;
    let is_partial_isometry = polar_factor.is_partial_isometry(tol);
    let kernel_matches = polar_factor
        .kernel(tol)
        .submodule_eq(&a.kernel(tol), tol)
        .unwrap_or(false);
    Ok(PolarDecomposition { data, polar_factor, is_partial_isometry, kernel_matches })
}

/// Inverse transfer of the canonical isometry: the isometry from the closed
/// range of the map back onto the closed range of the modulus, included into
/// the domain. Requires the map's closed range to fill the codomain; its
/// adjoint exists exactly when the modulus range is complemented, which the
/// finite backend always grants.
pub fn transfer_isometry(data: &PolarData, tol: Tolerance) -> Result<ModuleMap, PolarError> {
    let codomain = data.isometry.codomain();
    if !data
        .range_of_map
        .submodule_eq(&codomain.as_submodule(), tol)
        .unwrap_or(false)
    {
        return Err(PolarError::RangeNotDense);
    }
    let onto_range = data.isometry.corestrict(&data.range_of_map, tol)?;
    let domain = data.modulus.domain();
    let c = domain.basis().adjoint() * data.range_of_modulus.basis_matrix();
    // The corestricted isometry is unitary in orthonormal coordinates, so
    // its inverse is the conjugate transpose.
    let w_mat = c * onto_range.matrix().adjoint();
    Ok(ModuleMap::try_new(
        Carrier::sub(data.range_of_map.clone()),
        domain.clone(),
        w_mat,
        tol,
    )?)
}

/// Kernel bookkeeping around the modular structure. Every field is computed,
/// compared, and reported; nothing is assumed from theory.
#[derive(Debug, Clone)]
pub struct KernelInvariants {
    /// Kernel of the map, inside the domain's ambient module.
    pub kernel: Submodule,
    pub kernel_agrees_with_modulus: bool,
    pub kernel_agrees_with_gram: bool,
    /// Is the Gram range contained in the orthocomplement of the kernel
    /// taken inside the domain?
    pub range_inside_kernel_complement: bool,
    /// Does the Gram range equal that orthocomplement? Reported per map, not
    /// presumed.
    pub range_equals_kernel_complement: bool,
    /// Is the modulus injective on its own closed range?
    pub modulus_injective_on_range: bool,
}

pub fn kernel_invariants(a: &ModuleMap, data: &PolarData, tol: Tolerance) -> KernelInvariants {
    let kernel = a.kernel(tol);
    let kernel_agrees_with_modulus = data
        .modulus
        .kernel(tol)
        .submodule_eq(&kernel, tol)
        .unwrap_or(false);
    let kernel_agrees_with_gram = data
        .certificate
        .b
        .kernel(tol)
        .submodule_eq(&kernel, tol)
        .unwrap_or(false);
    let dom_sub = a.domain().as_submodule();
    let kernel_complement = dom_sub.complement_within(&kernel);
    let q = data.range_of_modulus.basis_matrix();
    let leak = q - kernel_complement.projection_matrix() * q;
    let range_inside_kernel_complement = tol.passes(spectral_norm(&leak), 1.0);
    let range_equals_kernel_complement = data
        .range_of_modulus
        .submodule_eq(&kernel_complement, tol)
        .unwrap_or(false);
    let modulus_injective_on_range = if data.range_of_modulus.is_zero() {
        true
    } else {
        match data.modulus.restrict(&data.range_of_modulus, tol) {
            Ok(restricted) => {
                let sv = restricted.matrix().clone().svd(false, false).singular_values;
                let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
                smin > tol.threshold(data.modulus.norm())
            }
            Err(_) => false,
        }
    };
    KernelInvariants {
        kernel,
        kernel_agrees_with_modulus,
        kernel_agrees_with_gram,
        range_inside_kernel_complement,
        range_equals_kernel_complement,
        modulus_injective_on_range,
    }
}
