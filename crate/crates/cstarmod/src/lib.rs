//! Computational workbench for Hilbert C*-modules over finite-dimensional
//! matrix algebras and over `C[0,1]`.
//!
//! The crate revolves around module maps that need not admit adjoints. For a
//! map `a` one asks for a positive, self-adjoint, module-linear `b` with
//! `<x, b y> = <a x, a y>`; when such a `b` exists the map has a modulus
//! `|a| = sqrt(b)` and a unique isometry `v` from the closed range of `|a|`
//! onto the closed range of `a` with `v |a| = a`. A genuine polar factor,
//! a partial isometry defined on all of the domain, exists exactly when the
//! closed range of `|a|` is orthogonally complemented; the crate computes the
//! decomposition when it exists and produces a structured refusal when it
//! cannot.
//!
//! Two backends are provided: free modules `B^n` over block matrix algebras,
//! where everything is dense linear algebra, and finitely generated
//! submodules of `C[0,1]^n` with polynomial generators, where rank profiles
//! and exact root isolation certify which classical conveniences (adjoints,
//! complements, polar factors) survive.

pub mod algebra;
pub mod fnmod;
pub mod module;
pub mod operator;
pub mod par;
pub mod polar;
pub mod random;
pub mod report;
pub mod run;
pub mod scenario;
pub mod tol;

pub use algebra::{AlgebraElement, AlgebraError, AlgebraSpec};
pub use fnmod::poly::{Poly, PolyFunction};
pub use fnmod::{
    chebyshev_lobatto_grid, drop_points, fiber_rank_profile, fn_gram_map, fn_is_complemented,
    fn_kernel, fn_polar, fn_range_closure, fn_submodule_equal, fn_try_adjoint, DropAnalysis,
    FnAdjointOutcome,
    FnCarrier, FnError, FnGram, FnGramForm, FnKernelVerdict, FnMap, FnPolarAnalysis,
    FnPolarVerdict, FnSubmodule, FnVector, DEFAULT_GRID_POINTS,
};
pub use module::{FreeModule, ModuleError, ModuleVector, Submodule};
pub use operator::{AdjointOutcome, Carrier, GramWitness, ModuleMap, OperatorError};
pub use polar::{
    kernel_invariants, modular_isometry, modulus, polar_decompose, solve_modularity,
    transfer_isometry, HermitianCommutant, KernelInvariants, ModularityCertificate,
    ModularityVerdict, PolarData, PolarDecomposition, PolarError,
};
pub use tol::Tolerance;
