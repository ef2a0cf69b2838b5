//! Function backend: finitely generated submodules of `C[0,1]^n` with
//! polynomial-flavored generators, and multiplication or inclusion maps
//! between them.
//!
//! Everything here is certified fiberwise. A submodule is stored by its
//! generators; at each point `t` the generators span a subspace of `C^n`
//! whose dimension is the fiber rank. Rank drops at isolated points are
//! located symbolically (common zeros of the full-size minors, isolated by
//! the root finder) with a dense evaluation grid as a safety net; a
//! finitely generated submodule is orthogonally complemented exactly when
//! its fiber rank never drops. Adjoints are decided by continuity of the
//! unique fiberwise adjoint candidate across the drop points.
//!
//! Fiber ranks are decided relative to the evaluated matrix, with one
//! exception: an evaluation whose whole norm sits below a noise floor
//! (a fixed fraction of the submodule's scale over the grid) counts as the
//! zero fiber. Without the floor, evaluating a generator at an isolated
//! root returns rounding noise and the noise spans a phantom line; with a
//! hard absolute cutoff instead, two generator sets vanishing at the same
//! point at different rates (such as `t` against `t^2`) would disagree
//! near the common zero even though they generate the same submodule.
//!
//! The backend is deliberately scoped: multiplication maps and inclusions,
//! and symbolic analyses that stay inside polynomial arithmetic. Requests
//! outside that scope return [`FnError::Unsupported`] rather than a guess.

pub mod poly;
pub mod roots;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::{hermitian_part, hermitian_sqrt, spectral_norm};
use crate::module::{column_space_basis, null_space_basis};
use crate::tol::Tolerance;
use poly::{Poly, PolyFunction};
use roots::{real_roots_in_unit_interval, ROOT_CLUSTER_EPS};

#[derive(Debug, Error)]
pub enum FnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("outside the supported scope of the function backend: {0}")]
    Unsupported(String),
}

/// Number of grid points used when no explicit grid is supplied.
pub const DEFAULT_GRID_POINTS: usize = 257;

/// Evaluations below this fraction of a submodule's grid scale count as the
/// zero fiber. Far above rounding noise, far below any honest fiber value
/// on the grids in use.
pub const NOISE_FLOOR_REL: f64 = 1e-12;

/// Chebyshev-Lobatto points mapped to `[0,1]`, ascending; both endpoints are
/// included, which matters because rank drops favor the boundary.
pub fn chebyshev_lobatto_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "a grid needs at least the two endpoints");
    let n = points - 1;
    (0..=n)
        .map(|j| (1.0 - (std::f64::consts::PI * j as f64 / n as f64).cos()) / 2.0)
        .collect()
}

/// Element of `C[0,1]^n` in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FnVector {
    entries: Vec<PolyFunction>,
}

impl FnVector {
    pub fn new(entries: Vec<PolyFunction>) -> Self {
        assert!(!entries.is_empty(), "vectors need at least one entry");
        FnVector { entries }
    }

    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[PolyFunction] {
        &self.entries
    }

    pub fn eval(&self, t: f64) -> DVector<Complex64> {
        DVector::from_iterator(self.entries.len(), self.entries.iter().map(|e| e.eval(t)))
    }

    /// `sum_i conj(x_i) y_i`, the `C[0,1]`-valued inner product.
    pub fn inner_product(&self, other: &FnVector) -> Result<PolyFunction, FnError> {
        if self.rank() != other.rank() {
            return Err(FnError::Shape("inner product of different ranks".into()));
        }
        let mut acc = PolyFunction::zero();
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc = acc.add(&a.conj().mul(b));
        }
        Ok(acc)
    }
}

/// Finitely generated (closed) submodule of `C[0,1]^n`.
#[derive(Debug, Clone)]
pub struct FnSubmodule {
    ambient_rank: usize,
    generators: Vec<FnVector>,
}

impl FnSubmodule {
    pub fn new(ambient_rank: usize, generators: Vec<FnVector>) -> Result<Self, FnError> {
        if generators.iter().any(|g| g.rank() != ambient_rank) {
            return Err(FnError::Shape("generator rank differs from ambient".into()));
        }
        Ok(FnSubmodule { ambient_rank, generators })
    }

    pub fn full(ambient_rank: usize) -> Self {
        let generators = (0..ambient_rank)
            .map(|i| {
                FnVector::new(
                    (0..ambient_rank)
                        .map(|j| if i == j { PolyFunction::one() } else { PolyFunction::zero() })
                        .collect(),
                )
            })
            .collect();
        FnSubmodule { ambient_rank, generators }
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    pub fn generators(&self) -> &[FnVector] {
        &self.generators
    }

    /// Generator matrix evaluated at a point: `ambient_rank x generators`.
    pub fn generator_matrix_at(&self, t: f64) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.ambient_rank, self.generators.len());
        for (j, g) in self.generators.iter().enumerate() {
            m.set_column(j, &g.eval(t));
        }
        m
    }

    /// Largest generator-matrix norm over the grid; the reference scale for
    /// the noise floor.
    pub fn scale_on_grid(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&t| spectral_norm(&self.generator_matrix_at(t)))
            .fold(0.0, f64::max)
    }

    /// Fiber rank at a point: zero when the evaluation drowns in the noise
    /// floor, otherwise the relative numerical rank.
    pub fn fiber_rank_at(&self, t: f64, noise_floor: f64, tol: Tolerance) -> usize {
        let m = self.generator_matrix_at(t);
        if spectral_norm(&m) <= noise_floor {
            return 0;
        }
        column_space_basis(&m, tol).ncols()
    }

    /// Orthogonal projection onto the fiber span at a point, under the same
    /// noise-floor rule as the rank.
    pub fn fiber_projection_at(
        &self,
        t: f64,
        noise_floor: f64,
        tol: Tolerance,
    ) -> DMatrix<Complex64> {
        let m = self.generator_matrix_at(t);
        if spectral_norm(&m) <= noise_floor {
            return DMatrix::zeros(self.ambient_rank, self.ambient_rank);
        }
        let q = column_space_basis(&m, tol);
        &q * q.adjoint()
    }
}

/// Where a function-backend map lives.
#[derive(Debug, Clone)]
pub enum FnCarrier {
    Free(usize),
    Sub(FnSubmodule),
}

impl FnCarrier {
    pub fn ambient_rank(&self) -> usize {
        match self {
            FnCarrier::Free(n) => *n,
            FnCarrier::Sub(s) => s.ambient_rank(),
        }
    }

    /// Vectors whose right multiples span the carrier.
    pub fn spanning_vectors(&self) -> Vec<FnVector> {
        match self {
            FnCarrier::Free(n) => FnSubmodule::full(*n).generators.clone(),
            FnCarrier::Sub(s) => s.generators().to_vec(),
        }
    }

    pub fn as_submodule(&self) -> FnSubmodule {
        match self {
            FnCarrier::Free(n) => FnSubmodule::full(*n),
            FnCarrier::Sub(s) => s.clone(),
        }
    }

    fn noise_floor(&self, grid: &[f64]) -> f64 {
        match self {
            FnCarrier::Free(_) => 0.0,
            FnCarrier::Sub(s) => NOISE_FLOOR_REL * s.scale_on_grid(grid),
        }
    }

    pub fn fiber_projection_at(&self, t: f64, grid: &[f64], tol: Tolerance) -> DMatrix<Complex64> {
        match self {
            FnCarrier::Free(n) => DMatrix::identity(*n, *n),
            FnCarrier::Sub(s) => s.fiber_projection_at(t, self.noise_floor(grid), tol),
        }
    }
}

/// Multiplication by a function matrix in ambient coordinates, or the
/// inclusion of a submodule into its ambient free module.
#[derive(Debug, Clone)]
enum FnMapKind {
    Multiplication(Vec<Vec<PolyFunction>>),
    Inclusion,
}

#[derive(Debug, Clone)]
pub struct FnMap {
    domain: FnCarrier,
    codomain: FnCarrier,
    kind: FnMapKind,
}

impl FnMap {
    /// Multiplication by a `codomain.ambient_rank() x domain.ambient_rank()`
    /// matrix of functions, acting in ambient coordinates. The caller is
    /// responsible for the matrix mapping the domain carrier into the
    /// codomain carrier; the analyses verify this on the grid where it
    /// matters.
    pub fn multiplication(
        domain: FnCarrier,
        codomain: FnCarrier,
        entries: Vec<Vec<PolyFunction>>,
    ) -> Result<Self, FnError> {
        let rows = codomain.ambient_rank();
        let cols = domain.ambient_rank();
        if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
            return Err(FnError::Shape(format!(
                "multiplication matrix must be {rows} x {cols}"
            )));
        }
        Ok(FnMap { domain, codomain, kind: FnMapKind::Multiplication(entries) })
    }

    /// The inclusion of a submodule into its ambient free module.
    pub fn inclusion(sub: FnSubmodule) -> Self {
        let ambient = sub.ambient_rank();
        FnMap {
            domain: FnCarrier::Sub(sub),
            codomain: FnCarrier::Free(ambient),
            kind: FnMapKind::Inclusion,
        }
    }

    pub fn domain(&self) -> &FnCarrier {
        &self.domain
    }

    pub fn codomain(&self) -> &FnCarrier {
        &self.codomain
    }

    pub fn apply(&self, x: &FnVector) -> Result<FnVector, FnError> {
        if x.rank() != self.domain.ambient_rank() {
            return Err(FnError::Shape("vector rank differs from domain".into()));
        }
        match &self.kind {
            FnMapKind::Inclusion => Ok(x.clone()),
            FnMapKind::Multiplication(entries) => {
                let mut out = Vec::with_capacity(entries.len());
                for row in entries {
                    let mut acc = PolyFunction::zero();
                    for (e, xi) in row.iter().zip(x.entries()) {
                        acc = acc.add(&e.mul(xi));
                    }
                    out.push(acc);
                }
                Ok(FnVector::new(out))
            }
        }
    }

    /// The map's action on ambient fibers at a point.
    pub fn ambient_matrix_at(&self, t: f64) -> DMatrix<Complex64> {
        match &self.kind {
            FnMapKind::Inclusion => {
                let n = self.codomain.ambient_rank();
                DMatrix::identity(n, n)
            }
            FnMapKind::Multiplication(entries) => {
                let rows = entries.len();
                let cols = entries[0].len();
                DMatrix::from_fn(rows, cols, |i, j| entries[i][j].eval(t))
            }
        }
    }
}

/// Fiber ranks along a grid.
#[derive(Debug, Clone)]
pub struct FiberProfile {
    pub ranks: Vec<usize>,
    pub generic_rank: usize,
}

pub fn fiber_rank_profile(sub: &FnSubmodule, grid: &[f64], tol: Tolerance) -> FiberProfile {
    let floor = NOISE_FLOOR_REL * sub.scale_on_grid(grid);
    let ranks: Vec<usize> = grid
        .iter()
        .map(|&t| sub.fiber_rank_at(t, floor, tol))
        .collect();
    let generic_rank = ranks.iter().copied().max().unwrap_or(0);
    FiberProfile { ranks, generic_rank }
}

/// Points where the fiber rank falls below the generic rank.
#[derive(Debug, Clone)]
pub struct DropAnalysis {
    pub generic_rank: usize,
    pub drops: Vec<f64>,
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let n = m.len();
    if n == 0 {
        return Poly::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Poly::zero();
    for (j, pivot) in m[0].iter().enumerate() {
        if pivot.is_zero() {
            continue;
        }
        let minor: Vec<Vec<Poly>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, p)| p.clone())
                    .collect()
            })
            .collect();
        let term = pivot.mul(&poly_det(&minor));
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Locates the rank-drop points of a submodule: the common real zeros on
/// `[0,1]` of all full-size minors of the generator matrix, isolated by the
/// root finder and cross-checked against the evaluation grid.
pub fn drop_points(
    sub: &FnSubmodule,
    grid: &[f64],
    tol: Tolerance,
) -> Result<DropAnalysis, FnError> {
    let profile = fiber_rank_profile(sub, grid, tol);
    let r = profile.generic_rank;
    if r == 0 {
        return Ok(DropAnalysis { generic_rank: 0, drops: Vec::new() });
    }
    let n = sub.ambient_rank();
    let g = sub.generators.len();
    let floor = NOISE_FLOOR_REL * sub.scale_on_grid(grid);

    // Symbolic minors need polynomial entries; a single-column matrix only
    // needs the zero set, which square roots also expose.
    let minors: Vec<Poly> = if r == 1 {
        let mut entries = Vec::new();
        for gen in &sub.generators {
            for e in gen.entries() {
                match e.zero_set_poly() {
                    Some(p) => entries.push(p),
                    None => {
                        return Err(FnError::Unsupported(
                            "rank-drop isolation needs polynomial or square-root entries".into(),
                        ))
                    }
                }
            }
        }
        entries
    } else {
        let mut rows: Vec<Vec<Poly>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(g);
            for gen in &sub.generators {
                match gen.entries()[i].as_poly() {
                    Some(p) => row.push(p.clone()),
                    None => {
                        return Err(FnError::Unsupported(
                            "rank-drop isolation beyond rank one needs polynomial entries".into(),
                        ))
                    }
                }
            }
            rows.push(row);
        }
        let mut minors = Vec::new();
        for row_sel in combinations(n, r) {
            for col_sel in combinations(g, r) {
                let m: Vec<Vec<Poly>> = row_sel
                    .iter()
                    .map(|&i| col_sel.iter().map(|&j| rows[i][j].clone()).collect())
                    .collect();
                minors.push(poly_det(&m));
            }
        }
        minors
    };

    let nonzero: Vec<&Poly> = minors.iter().filter(|m| !m.is_zero()).collect();
    if nonzero.is_empty() {
        return Err(FnError::Unsupported(
            "all minors vanish identically yet the grid sees positive rank".into(),
        ));
    }
    // A drop point must zero every minor; candidates come from the first
    // nonzero minor and are filtered through the rest, then certified by the
    // fiber rank (isolated roots land within root accuracy of the true
    // point, where the noise floor classifies the fiber as collapsed).
    let scale: f64 = nonzero
        .iter()
        .map(|m| grid.iter().map(|&t| m.eval(t).norm()).fold(0.0, f64::max))
        .fold(1.0, f64::max);
    let minor_cut = tol.threshold(scale).sqrt();
    let mut drops: Vec<f64> = real_roots_in_unit_interval(nonzero[0])
        .into_iter()
        .filter(|&t| nonzero.iter().all(|m| m.eval(t).norm() <= minor_cut))
        .filter(|&t| sub.fiber_rank_at(t, floor, tol) < r)
        .collect();

    // Safety net: a grid point whose rank drops but sits near no isolated
    // root indicates the symbolic route missed something; report it anyway.
    for (&t, &rank) in grid.iter().zip(&profile.ranks) {
        if rank < r && !drops.iter().any(|&d| (d - t).abs() <= 10.0 * ROOT_CLUSTER_EPS) {
            drops.push(t);
        }
    }
    drops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DropAnalysis { generic_rank: r, drops })
}

/// Closed range of a map: the submodule generated by the images of the
/// domain's spanning vectors.
pub fn fn_range_closure(map: &FnMap) -> Result<FnSubmodule, FnError> {
    let generators: Result<Vec<FnVector>, FnError> = map
        .domain()
        .spanning_vectors()
        .iter()
        .map(|x| map.apply(x))
        .collect();
    FnSubmodule::new(map.codomain().ambient_rank(), generators?)
}

/// A finitely generated submodule is orthogonally complemented exactly when
/// its fiber rank never drops.
pub fn fn_is_complemented(
    sub: &FnSubmodule,
    grid: &[f64],
    tol: Tolerance,
) -> Result<(bool, Vec<f64>), FnError> {
    let analysis = drop_points(sub, grid, tol)?;
    Ok((analysis.drops.is_empty(), analysis.drops))
}

/// Equality of generated submodules: identical fiber spans across the grid
/// and across both drop sets. Fibers below the shared noise floor count as
/// zero on both sides.
pub fn fn_submodule_equal(
    a: &FnSubmodule,
    b: &FnSubmodule,
    grid: &[f64],
    tol: Tolerance,
) -> Result<bool, FnError> {
    if a.ambient_rank() != b.ambient_rank() {
        return Ok(false);
    }
    let floor = NOISE_FLOOR_REL * a.scale_on_grid(grid).max(b.scale_on_grid(grid));
    let mut points: Vec<f64> = grid.to_vec();
    points.extend(drop_points(a, grid, tol)?.drops);
    points.extend(drop_points(b, grid, tol)?.drops);
    for &t in &points {
        let na = spectral_norm(&a.generator_matrix_at(t));
        let nb = spectral_norm(&b.generator_matrix_at(t));
        let a_zero = na <= floor;
        let b_zero = nb <= floor;
        if a_zero != b_zero {
            return Ok(false);
        }
        if a_zero {
            continue;
        }
        let pa = a.fiber_projection_at(t, floor, tol);
        let pb = b.fiber_projection_at(t, floor, tol);
        if spectral_norm(&(&pa - &pb)) > tol.threshold(1.0).sqrt() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Kernel of a map, reported structurally.
#[derive(Debug, Clone)]
pub enum FnKernelVerdict {
    Zero,
    Full,
    Generated(FnSubmodule),
}

/// Kernel via polynomial syzygies: solutions of `A(t) p(t) = 0` with the
/// degree bound that suffices for polynomial matrices.
pub fn fn_kernel(map: &FnMap, tol: Tolerance) -> Result<FnKernelVerdict, FnError> {
    match &map.kind {
        FnMapKind::Inclusion => Ok(FnKernelVerdict::Zero),
        FnMapKind::Multiplication(entries) => {
            if entries.iter().flatten().all(|e| e.is_zero()) {
                return Ok(FnKernelVerdict::Full);
            }
            let all_poly = entries.iter().flatten().all(|e| e.as_poly().is_some());
            if !all_poly {
                // A single column only needs zero sets: multiplication by a
                // function with isolated zeros is injective on C[0,1].
                if map.domain.ambient_rank() == 1 {
                    let col_zero_sets: Option<Vec<Poly>> =
                        entries.iter().map(|row| row[0].zero_set_poly()).collect();
                    match col_zero_sets {
                        Some(ps) if ps.iter().any(|p| !p.is_zero()) => {
                            return Ok(FnKernelVerdict::Zero)
                        }
                        _ => {
                            return Err(FnError::Unsupported(
                                "kernel of a non-polynomial multiplier".into(),
                            ))
                        }
                    }
                }
                return Err(FnError::Unsupported(
                    "kernel needs polynomial matrix entries".into(),
                ));
            }
            let rows = entries.len();
            let cols = entries[0].len();
            let max_deg = entries
                .iter()
                .flatten()
                .filter_map(|e| e.as_poly().and_then(|p| p.degree()))
                .max()
                .unwrap_or(0);
            // Degree bound for a generating set of polynomial syzygies.
            let bound = cols * (max_deg + 1);
            let coeff_len = max_deg + bound + 1;
            let mut system = DMatrix::<Complex64>::zeros(rows * coeff_len, cols * (bound + 1));
            for (i, row) in entries.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    let p = e.as_poly().expect("checked all_poly above");
                    for (dc, c) in p.coeffs().iter().enumerate() {
                        for d in 0..=bound {
                            // coefficient of t^(dc + d) in a_ij * t^d
                            system[(i * coeff_len + dc + d, j * (bound + 1) + d)] += *c;
                        }
                    }
                }
            }
            let null = null_space_basis(&system, tol);
            if null.ncols() == 0 {
                return Ok(FnKernelVerdict::Zero);
            }
            let mut generators = Vec::with_capacity(null.ncols());
            for k in 0..null.ncols() {
                let col = null.column(k);
                let mut entries_out = Vec::with_capacity(cols);
                for j in 0..cols {
                    let coeffs: Vec<Complex64> =
                        (0..=bound).map(|d| col[j * (bound + 1) + d]).collect();
                    entries_out.push(PolyFunction::poly(Poly::new(coeffs)));
                }
                generators.push(FnVector::new(entries_out));
            }
            Ok(FnKernelVerdict::Generated(FnSubmodule::new(cols, generators)?))
        }
    }
}

/// Outcome of the adjoint existence test.
#[derive(Debug, Clone)]
pub enum FnAdjointOutcome {
    /// The fiberwise adjoint family is continuous; worst Gram defect of the
    /// adjoint identity over the grid is reported.
    Adjointable { defect: f64 },
    /// The unique fiberwise candidate jumps at an isolated point, so no
    /// continuous adjoint exists.
    Refused { witness_point: f64, jump: f64 },
}

/// Decides adjointability by continuity of the only possible fiberwise
/// adjoint, `C(t) = P_dom(t) A(t)* P_cod(t)`, across the rank-drop points of
/// the carriers.
pub fn fn_try_adjoint(
    map: &FnMap,
    grid: &[f64],
    tol: Tolerance,
) -> Result<FnAdjointOutcome, FnError> {
    let candidate = |t: f64| -> DMatrix<Complex64> {
        map.domain.fiber_projection_at(t, grid, tol)
            * map.ambient_matrix_at(t).adjoint()
            * map.codomain.fiber_projection_at(t, grid, tol)
    };
    let mut suspects: Vec<f64> = Vec::new();
    for carrier in [&map.domain, &map.codomain] {
        if let FnCarrier::Sub(s) = carrier {
            suspects.extend(drop_points(s, grid, tol)?.drops);
        }
    }
    for &point in &suspects {
        let at = candidate(point);
        let mut jump: f64 = 0.0;
        for k in 0..=14 {
            let delta = 1e-3 * 0.5f64.powi(k);
            for side in [point - delta, point + delta] {
                if (0.0..=1.0).contains(&side) {
                    let diff = spectral_norm(&(candidate(side) - &at));
                    if k >= 10 {
                        jump = jump.max(diff);
                    }
                }
            }
        }
        if jump > 1e-4 {
            return Ok(FnAdjointOutcome::Refused { witness_point: point, jump });
        }
    }
    // Continuous; verify the Gram identity of the adjoint on the grid.
    let dom_span = map.domain.spanning_vectors();
    let cod_span = map.codomain.spanning_vectors();
    let mut defect: f64 = 0.0;
    for &t in grid {
        let a_t = map.ambient_matrix_at(t);
        let c_t = candidate(t);
        for x in &dom_span {
            let xv = x.eval(t);
            let ax = &a_t * &xv;
            for y in &cod_span {
                let yv = y.eval(t);
                let lhs = ax.dotc(&yv);
                let rhs = xv.dotc(&(&c_t * &yv));
                defect = defect.max((lhs - rhs).norm());
            }
        }
    }
    Ok(FnAdjointOutcome::Adjointable { defect })
}

/// Gram map of a function-backend map, kept symbolic.
#[derive(Debug, Clone)]
pub enum FnGramForm {
    /// The identity on the domain carrier (inclusions preserve pairings).
    IdentityOnDomain,
    /// Multiplication by a Hermitian function matrix in ambient domain
    /// coordinates.
    Matrix(Vec<Vec<PolyFunction>>),
}

impl FnGramForm {
    pub fn apply(&self, x: &FnVector) -> FnVector {
        match self {
            FnGramForm::IdentityOnDomain => x.clone(),
            FnGramForm::Matrix(entries) => {
                let mut out = Vec::with_capacity(entries.len());
                for row in entries {
                    let mut acc = PolyFunction::zero();
                    for (e, xi) in row.iter().zip(x.entries()) {
                        acc = acc.add(&e.mul(xi));
                    }
                    out.push(acc);
                }
                FnVector::new(out)
            }
        }
    }

    pub fn matrix_at(&self, t: f64, rank: usize) -> DMatrix<Complex64> {
        match self {
            FnGramForm::IdentityOnDomain => DMatrix::identity(rank, rank),
            FnGramForm::Matrix(entries) => {
                DMatrix::from_fn(rank, rank, |i, j| entries[i][j].eval(t))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FnGram {
    pub form: FnGramForm,
    /// Worst violation of `<x, b y> = <a x, a y>` over spanning pairs and
    /// the grid.
    pub residual_on_grid: f64,
    /// Smallest eigenvalue of the Gram matrix across the grid.
    pub positivity_floor: f64,
}

/// Builds the Gram map symbolically (`b = a* a` entrywise for multiplication
/// maps, identity for inclusions) and measures the defining identity on the
/// grid.
pub fn fn_gram_map(map: &FnMap, grid: &[f64], _tol: Tolerance) -> Result<FnGram, FnError> {
    let form = match &map.kind {
        FnMapKind::Inclusion => FnGramForm::IdentityOnDomain,
        FnMapKind::Multiplication(entries) => {
            let rows = entries.len();
            let cols = entries[0].len();
            let mut b = vec![vec![PolyFunction::zero(); cols]; cols];
            for (i, row) in b.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    let mut acc = PolyFunction::zero();
                    for k in 0..rows {
                        acc = acc.add(&entries[k][i].conj().mul(&entries[k][j]));
                    }
                    *slot = acc;
                }
            }
            FnGramForm::Matrix(b)
        }
    };
    let span = map.domain.spanning_vectors();
    let mut residual: f64 = 0.0;
    let mut floor = f64::INFINITY;
    let rank = map.domain.ambient_rank();
    for &t in grid {
        for x in &span {
            let bx = form.apply(x);
            let ax = map.apply(x)?;
            for y in &span {
                let lhs = y.inner_product(&bx)?.eval(t);
                let ay = map.apply(y)?;
                let rhs = ay.inner_product(&ax)?.eval(t);
                residual = residual.max((lhs - rhs).norm());
            }
        }
        let bt = hermitian_part(&form.matrix_at(t, rank));
        let min_ev = bt
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        floor = floor.min(min_ev);
    }
    Ok(FnGram { form, residual_on_grid: residual, positivity_floor: floor })
}

/// Verdict of the polar analysis on the function backend.
#[derive(Debug, Clone)]
pub enum FnPolarVerdict {
    /// The modulus range is complemented in the domain; the polar factor
    /// exists (the verified isometry extended by zero).
    Decomposed,
    /// The modulus range has a rank drop, so no bounded projection onto it
    /// exists inside the domain and the polar factor is refused.
    RefusedNotComplemented { drop: f64 },
}

#[derive(Debug, Clone)]
pub struct FnPolarAnalysis {
    pub gram: FnGram,
    /// Closed range of the Gram map (equal to the modulus range).
    pub range_of_gram: FnSubmodule,
    /// Rank drops of the Gram range inside the ambient module, reported for
    /// any verdict.
    pub range_drops: Vec<f64>,
    /// Fiberwise distance between the range of `sqrt(b(t))` and the fiber
    /// span of the Gram range, maximized over the grid.
    pub modulus_range_consistency: f64,
    /// Worst violation of `v |a| = a` over spanning vectors and the grid.
    pub factorization_defect: f64,
    /// Worst violation of `<v x, v y> = <x, y>` on the modulus range over
    /// generator pairs and the grid.
    pub isometry_defect: f64,
    pub verdict: FnPolarVerdict,
}

/// Runs the modular pipeline on the function backend: Gram map, modulus
/// range, the canonical isometry (an inclusion for this class of maps,
/// verified rather than assumed), and the complementation verdict.
pub fn fn_polar(map: &FnMap, grid: &[f64], tol: Tolerance) -> Result<FnPolarAnalysis, FnError> {
    if map.domain.ambient_rank() != map.codomain.ambient_rank() {
        return Err(FnError::Unsupported(
            "polar analysis here requires equal ambient ranks".into(),
        ));
    }
    let gram = fn_gram_map(map, grid, tol)?;
    let rank = map.domain.ambient_rank();

    // Range of the Gram map, generated by b applied to the domain span.
    let range_generators: Vec<FnVector> = map
        .domain
        .spanning_vectors()
        .iter()
        .map(|x| gram.form.apply(x))
        .collect();
    let range_of_gram = FnSubmodule::new(rank, range_generators)?;
    let range_analysis = drop_points(&range_of_gram, grid, tol)?;
    let range_floor = NOISE_FLOOR_REL * range_of_gram.scale_on_grid(grid);

    // Modulus fibers: sqrt of b(t); its column span must agree with the
    // Gram-range fibers.
    let mut modulus_range_consistency: f64 = 0.0;
    let mut factorization_defect: f64 = 0.0;
    let span = map.domain.spanning_vectors();
    for &t in grid {
        let bt = hermitian_part(&gram.form.matrix_at(t, rank));
        let clamp = tol.threshold(spectral_norm(&bt)) * NOISE_FLOOR_REL.sqrt();
        let root = hermitian_sqrt(&bt, clamp).map_err(|f| {
            FnError::Unsupported(format!("Gram matrix not positive at {t} ({f:.3e})"))
        })?;
        let root_norm = spectral_norm(&root);
        let p_root = if root_norm <= NOISE_FLOOR_REL.sqrt() {
            DMatrix::zeros(rank, rank)
        } else {
            let q = column_space_basis(&root, tol);
            &q * q.adjoint()
        };
        let p_range = range_of_gram.fiber_projection_at(t, range_floor, tol);
        modulus_range_consistency =
            modulus_range_consistency.max(spectral_norm(&(p_root - p_range)));
        // v is the inclusion of the modulus range, so v(|a| x) evaluates to
        // |a|(t) x(t); compare against a(x)(t).
        let a_t = map.ambient_matrix_at(t);
        for x in &span {
            let xv = x.eval(t);
            let lhs = &root * &xv;
            let rhs = &a_t * &xv;
            factorization_defect = factorization_defect.max((lhs - rhs).norm());
        }
    }

    // The inclusion preserves pairings; measure it anyway.
    let mut isometry_defect: f64 = 0.0;
    for &t in grid {
        for gi in range_of_gram.generators() {
            for gj in range_of_gram.generators() {
                let pairing = gi.inner_product(gj)?.eval(t);
                let vi = gi.eval(t);
                let vj = gj.eval(t);
                isometry_defect = isometry_defect.max((vi.dotc(&vj) - pairing).norm());
            }
        }
    }

    let verdict = match &map.domain {
        FnCarrier::Free(_) => match range_analysis.drops.first() {
            Some(&drop) => FnPolarVerdict::RefusedNotComplemented { drop },
            None => FnPolarVerdict::Decomposed,
        },
        FnCarrier::Sub(dom_sub) => {
            if fn_submodule_equal(&range_of_gram, dom_sub, grid, tol)? {
                FnPolarVerdict::Decomposed
            } else {
                return Err(FnError::Unsupported(
                    "proper modulus range inside a submodule domain".into(),
                ));
            }
        }
    };

    Ok(FnPolarAnalysis {
        gram,
        range_of_gram,
        range_drops: range_analysis.drops,
        modulus_range_consistency,
        factorization_defect,
        isometry_defect,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn grid() -> Vec<f64> {
        chebyshev_lobatto_grid(65)
    }

    fn t_poly() -> PolyFunction {
        PolyFunction::poly(Poly::x())
    }

    fn t_generated() -> FnSubmodule {
        FnSubmodule::new(1, vec![FnVector::new(vec![t_poly()])]).unwrap()
    }

    #[test]
    fn grid_includes_endpoints_and_center() {
        let g = chebyshev_lobatto_grid(257);
        assert_eq!(g.len(), 257);
        assert!(g[0].abs() < 1e-15);
        assert!((g[256] - 1.0).abs() < 1e-15);
        assert!((g[128] - 0.5).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fiber_profile_of_t_generated_line() {
        let s = t_generated();
        let profile = fiber_rank_profile(&s, &grid(), tol());
        assert_eq!(profile.generic_rank, 1);
        assert_eq!(profile.ranks[0], 0);
        assert!(profile.ranks[1..].iter().all(|&r| r == 1));
    }

    #[test]
    fn drop_points_of_t_generated_line() {
        let s = t_generated();
        let analysis = drop_points(&s, &grid(), tol()).unwrap();
        assert_eq!(analysis.generic_rank, 1);
        assert_eq!(analysis.drops.len(), 1);
        assert!(analysis.drops[0].abs() < ROOT_CLUSTER_EPS);
        let (complemented, drops) = fn_is_complemented(&s, &grid(), tol()).unwrap();
        assert!(!complemented);
        assert_eq!(drops.len(), 1);
    }

    #[test]
    fn full_module_is_complemented() {
        let s = FnSubmodule::full(2);
        let (complemented, drops) = fn_is_complemented(&s, &grid(), tol()).unwrap();
        assert!(complemented);
        assert!(drops.is_empty());
    }

    #[test]
    fn interior_drop_is_isolated() {
        // Generator (t - 1/3) e_1: drop exactly at 1/3, which is not a grid
        // point of the Chebyshev grid.
        let p = Poly::new(vec![c(-1.0 / 3.0), c(1.0)]);
        let s = FnSubmodule::new(1, vec![FnVector::new(vec![PolyFunction::poly(p)])]).unwrap();
        let analysis = drop_points(&s, &grid(), tol()).unwrap();
        assert_eq!(analysis.drops.len(), 1);
        assert!((analysis.drops[0] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn equal_closures_of_t_and_t_squared() {
        let s1 = t_generated();
        let t2 = Poly::x().mul(&Poly::x());
        let s2 =
            FnSubmodule::new(1, vec![FnVector::new(vec![PolyFunction::poly(t2)])]).unwrap();
        assert!(fn_submodule_equal(&s1, &s2, &grid(), tol()).unwrap());
        let full = FnSubmodule::full(1);
        assert!(!fn_submodule_equal(&s1, &full, &grid(), tol()).unwrap());
    }

    #[test]
    fn unequal_when_only_one_side_drops_at_interior_root() {
        let p = Poly::new(vec![c(-1.0 / 3.0), c(1.0)]);
        let s = FnSubmodule::new(1, vec![FnVector::new(vec![PolyFunction::poly(p)])]).unwrap();
        assert!(!fn_submodule_equal(&s, &FnSubmodule::full(1), &grid(), tol()).unwrap());
    }

    #[test]
    fn rank_two_drop_via_minors() {
        // Generators (1, 0) and (0, t): the 2x2 minor is t.
        let g1 = FnVector::new(vec![PolyFunction::one(), PolyFunction::zero()]);
        let g2 = FnVector::new(vec![PolyFunction::zero(), t_poly()]);
        let s = FnSubmodule::new(2, vec![g1, g2]).unwrap();
        let analysis = drop_points(&s, &grid(), tol()).unwrap();
        assert_eq!(analysis.generic_rank, 2);
        assert_eq!(analysis.drops.len(), 1);
        assert!(analysis.drops[0].abs() < ROOT_CLUSTER_EPS);
    }

    #[test]
    fn kernel_of_multiplication_by_t_is_zero() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![t_poly()]],
        )
        .unwrap();
        assert!(matches!(fn_kernel(&map, tol()).unwrap(), FnKernelVerdict::Zero));
    }

    #[test]
    fn kernel_of_zero_map_is_full() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![PolyFunction::zero()]],
        )
        .unwrap();
        assert!(matches!(fn_kernel(&map, tol()).unwrap(), FnKernelVerdict::Full));
    }

    #[test]
    fn kernel_of_row_map_is_antidiagonal_line() {
        // (f, g) -> t f - t g; kernel is the closure of span{(1, 1)}.
        let row = vec![vec![t_poly(), PolyFunction::poly(Poly::x().neg())]];
        let map =
            FnMap::multiplication(FnCarrier::Free(2), FnCarrier::Free(1), row).unwrap();
        let verdict = fn_kernel(&map, tol()).unwrap();
        let kernel = match verdict {
            FnKernelVerdict::Generated(s) => s,
            other => panic!("expected generated kernel, got {other:?}"),
        };
        let expected = FnSubmodule::new(
            2,
            vec![FnVector::new(vec![PolyFunction::one(), PolyFunction::one()])],
        )
        .unwrap();
        assert!(fn_submodule_equal(&kernel, &expected, &grid(), tol()).unwrap());
    }

    #[test]
    fn multiplication_map_is_adjointable() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![t_poly()]],
        )
        .unwrap();
        match fn_try_adjoint(&map, &grid(), tol()).unwrap() {
            FnAdjointOutcome::Adjointable { defect } => assert!(defect < 1e-12),
            other => panic!("expected adjointable, got {other:?}"),
        }
    }

    #[test]
    fn inclusion_of_uncomplemented_line_refuses_adjoint() {
        let map = FnMap::inclusion(t_generated());
        match fn_try_adjoint(&map, &grid(), tol()).unwrap() {
            FnAdjointOutcome::Refused { witness_point, jump } => {
                assert!(witness_point.abs() < ROOT_CLUSTER_EPS);
                assert!(jump > 0.5);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn inclusion_with_interior_drop_refuses_adjoint() {
        let p = Poly::new(vec![c(-1.0 / 3.0), c(1.0)]);
        let s = FnSubmodule::new(1, vec![FnVector::new(vec![PolyFunction::poly(p)])]).unwrap();
        let map = FnMap::inclusion(s);
        match fn_try_adjoint(&map, &grid(), tol()).unwrap() {
            FnAdjointOutcome::Refused { witness_point, jump } => {
                assert!((witness_point - 1.0 / 3.0).abs() < 1e-8);
                assert!(jump > 0.5);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn multiplication_restricted_to_line_is_adjointable() {
        // Multiplication by t as a map of the t-generated line into itself:
        // the candidate family is t P(t), continuous at the drop.
        let line = t_generated();
        let map = FnMap::multiplication(
            FnCarrier::Sub(line.clone()),
            FnCarrier::Sub(line),
            vec![vec![t_poly()]],
        )
        .unwrap();
        match fn_try_adjoint(&map, &grid(), tol()).unwrap() {
            FnAdjointOutcome::Adjointable { defect } => assert!(defect < 1e-10),
            other => panic!("expected adjointable, got {other:?}"),
        }
    }

    #[test]
    fn gram_map_of_inclusion_is_identity_with_zero_residual() {
        let map = FnMap::inclusion(t_generated());
        let gram = fn_gram_map(&map, &grid(), tol()).unwrap();
        assert!(matches!(gram.form, FnGramForm::IdentityOnDomain));
        assert_eq!(gram.residual_on_grid, 0.0);
        assert!(gram.positivity_floor > 0.5);
    }

    #[test]
    fn gram_map_of_sqrt_multiplier_is_polynomial() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![PolyFunction::sqrt(Poly::x())]],
        )
        .unwrap();
        let gram = fn_gram_map(&map, &grid(), tol()).unwrap();
        match &gram.form {
            FnGramForm::Matrix(entries) => {
                let p = entries[0][0].as_poly().expect("sqrt square should collapse");
                assert!(p.distance(&Poly::x()) < 1e-12);
            }
            other => panic!("expected matrix form, got {other:?}"),
        }
        assert!(gram.residual_on_grid < 1e-12);
    }

    #[test]
    fn polar_of_sqrt_multiplier_refuses_at_zero() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![PolyFunction::sqrt(Poly::x())]],
        )
        .unwrap();
        let analysis = fn_polar(&map, &grid(), tol()).unwrap();
        assert!(analysis.gram.residual_on_grid < 1e-12);
        match analysis.verdict {
            FnPolarVerdict::RefusedNotComplemented { drop } => {
                assert!(drop.abs() < ROOT_CLUSTER_EPS);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        assert!(analysis.isometry_defect < 1e-9);
        assert!(analysis.factorization_defect < 1e-9);
        assert!(analysis.modulus_range_consistency < 1e-7);
    }

    #[test]
    fn polar_of_inclusion_decomposes() {
        let map = FnMap::inclusion(t_generated());
        let analysis = fn_polar(&map, &grid(), tol()).unwrap();
        assert!(matches!(analysis.verdict, FnPolarVerdict::Decomposed));
        assert_eq!(analysis.gram.residual_on_grid, 0.0);
        assert!(analysis.factorization_defect < 1e-12);
    }

    #[test]
    fn polar_of_invertible_multiplier_decomposes() {
        // 1 + t never vanishes, so the range is everything.
        let p = Poly::new(vec![c(1.0), c(1.0)]);
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![PolyFunction::poly(p)]],
        )
        .unwrap();
        let analysis = fn_polar(&map, &grid(), tol()).unwrap();
        assert!(matches!(analysis.verdict, FnPolarVerdict::Decomposed));
        assert!(analysis.range_drops.is_empty());
    }

    #[test]
    fn polar_of_t_multiplier_matches_gram_range_facts() {
        let map = FnMap::multiplication(
            FnCarrier::Free(1),
            FnCarrier::Free(1),
            vec![vec![t_poly()]],
        )
        .unwrap();
        let analysis = fn_polar(&map, &grid(), tol()).unwrap();
        // Gram map is t^2; its range closure equals the t-generated line.
        assert!(fn_submodule_equal(&analysis.range_of_gram, &t_generated(), &grid(), tol())
            .unwrap());
        match analysis.verdict {
            FnPolarVerdict::RefusedNotComplemented { drop } => assert!(drop.abs() < 1e-8),
            other => panic!("expected refusal, got {other:?}"),
        }
        // Kernel is zero, so the kernel's orthocomplement is everything,
        // while the Gram range is the proper t-generated line: the two
        // differ at the fiber over zero.
        assert!(matches!(fn_kernel(&map, tol()).unwrap(), FnKernelVerdict::Zero));
        assert!(
            !fn_submodule_equal(&analysis.range_of_gram, &FnSubmodule::full(1), &grid(), tol())
                .unwrap()
        );
    }
}
