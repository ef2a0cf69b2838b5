//! Seeded constructions of module vectors and module maps with known
//! structure: plain maps, unitaries, isometries, partial isometries,
//! orthogonal projections, and deliberately skewed idempotents.
//!
//! Everything is driven by a caller-supplied RNG, so a fixed seed fixes the
//! whole construction. Maps are built entrywise from algebra elements, which
//! makes them module-linear by construction rather than by accident.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{AlgebraElement, AlgebraSpec};
use crate::module::{FreeModule, ModuleVector, Submodule};
use crate::operator::{Carrier, ModuleMap};
use crate::tol::Tolerance;

/// Standard normal deviate (Box-Muller).
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// Algebra element with independent complex Gaussian entries in each block.
pub fn random_element<R: Rng>(spec: &AlgebraSpec, rng: &mut R) -> AlgebraElement {
    let blocks = spec
        .block_dims()
        .iter()
        .map(|&d| DMatrix::from_fn(d, d, |_, _| complex_normal(rng)))
        .collect();
    AlgebraElement::from_blocks(spec, blocks).expect("block shapes match the algebra")
}

pub fn random_vector<R: Rng>(module: &FreeModule, rng: &mut R) -> ModuleVector {
    let entries = (0..module.rank())
        .map(|_| random_element(module.algebra(), rng))
        .collect();
    ModuleVector::new(module, entries).expect("entry count matches the rank")
}

/// Module map with independent Gaussian algebra entries; module-linear by
/// construction.
pub fn random_map<R: Rng>(
    domain: &FreeModule,
    codomain: &FreeModule,
    rng: &mut R,
) -> ModuleMap {
    let entries: Vec<Vec<AlgebraElement>> = (0..codomain.rank())
        .map(|_| {
            (0..domain.rank())
                .map(|_| random_element(domain.algebra(), rng))
                .collect()
        })
        .collect();
    ModuleMap::from_algebra_matrix(domain, codomain, &entries)
        .expect("shapes match by construction")
}

/// Random unitary on a free module: the direction factor of a random map,
/// retried in the (measure-zero) event of a degenerate draw.
pub fn random_unitary<R: Rng>(module: &FreeModule, rng: &mut R, tol: Tolerance) -> ModuleMap {
    loop {
        let m = random_map(module, module, rng);
        let svd = m.matrix().clone().svd(true, true);
        let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        if smin < 1e-6 {
            continue;
        }
        let u = svd.u.expect("requested") * svd.v_t.expect("requested");
        // The direction factor of an invertible module-linear map is again
        // module-linear; the constructor re-verifies that.
        if let Ok(map) =
            ModuleMap::try_new(Carrier::free(module.clone()), Carrier::free(module.clone()), u, tol)
        {
            return map;
        }
    }
}

/// Random isometry between free modules: unitary, then the coordinate
/// inclusion, then another unitary. Requires `domain.rank() <= codomain.rank()`.
pub fn random_isometry<R: Rng>(
    domain: &FreeModule,
    codomain: &FreeModule,
    rng: &mut R,
    tol: Tolerance,
) -> ModuleMap {
    assert!(
        domain.rank() <= codomain.rank(),
        "an isometry needs at least as much room as it uses"
    );
    assert_eq!(domain.algebra(), codomain.algebra(), "same algebra on both sides");
    let spec = domain.algebra();
    let mut entries: Vec<Vec<AlgebraElement>> = Vec::with_capacity(codomain.rank());
    for i in 0..codomain.rank() {
        let mut row = Vec::with_capacity(domain.rank());
        for j in 0..domain.rank() {
            row.push(if i == j { spec.identity() } else { spec.zero() });
        }
        entries.push(row);
    }
    let include = ModuleMap::from_algebra_matrix(domain, codomain, &entries)
        .expect("inclusion shapes match");
    let u_dom = random_unitary(domain, rng, tol);
    let u_cod = random_unitary(codomain, rng, tol);
    let composed = u_cod
        .compose(&include, tol)
        .and_then(|m| m.compose(&u_dom, tol))
        .expect("carriers chain by construction");
    composed
}

/// Random generated submodule: the span of `generators` random vectors,
/// closed under the right algebra action.
pub fn random_submodule<R: Rng>(
    module: &FreeModule,
    generators: usize,
    rng: &mut R,
    tol: Tolerance,
) -> Submodule {
    let vecs: Vec<ModuleVector> = (0..generators).map(|_| random_vector(module, rng)).collect();
    Submodule::from_generators(&vecs, tol).expect("at least one generator")
}

/// Orthogonal projection onto a random generated submodule, as an
/// endomorphism of the ambient module.
pub fn random_projection<R: Rng>(
    module: &FreeModule,
    generators: usize,
    rng: &mut R,
    tol: Tolerance,
) -> ModuleMap {
    let sub = random_submodule(module, generators, rng, tol);
    ModuleMap::inclusion(&sub)
        .compose(&ModuleMap::projection_onto(&sub), tol)
        .expect("projection and inclusion share the submodule carrier")
}

/// Random partial isometry: an isometry following an orthogonal projection.
pub fn random_partial_isometry<R: Rng>(
    domain: &FreeModule,
    codomain: &FreeModule,
    rng: &mut R,
    tol: Tolerance,
) -> ModuleMap {
    let generators = 1 + rng.gen_range(0..domain.rank());
    let proj = random_projection(domain, generators, rng, tol);
    let iso = random_isometry(domain, codomain, rng, tol);
    iso.compose(&proj, tol).expect("carriers chain by construction")
}

/// Idempotent that is (with overwhelming probability) not self-adjoint:
/// a projection conjugated by a random invertible map.
pub fn random_skew_idempotent<R: Rng>(
    module: &FreeModule,
    rng: &mut R,
    tol: Tolerance,
) -> ModuleMap {
    loop {
        let generators = 1 + rng.gen_range(0..module.rank());
        let proj = random_projection(module, generators, rng, tol);
        let n = module.complex_dim();
        let g = {
            let m = random_map(module, module, rng);
            // Push well away from singularity so the inverse stays tame.
            let shifted = m.matrix()
                + DMatrix::<Complex64>::identity(n, n) * Complex64::new(3.0 + m.norm(), 0.0);
            ModuleMap::try_new(
                Carrier::free(module.clone()),
                Carrier::free(module.clone()),
                shifted,
                tol,
            )
            .expect("shift keeps module linearity")
        };
        let g_inv = ModuleMap::try_new(
            Carrier::free(module.clone()),
            Carrier::free(module.clone()),
            g.matrix()
                .clone()
                .try_inverse()
                .expect("shifted map is invertible"),
            tol,
        )
        .expect("inverse of a module-linear map is module-linear");
        let idem = g
            .compose(&proj.compose(&g_inv, tol).expect("chain"), tol)
            .expect("chain");
        // Discard the rare draws that happen to stay Hermitian (or collapse
        // to 0 or the identity, which are trivially self-adjoint).
        let skew = (idem.matrix() - idem.matrix().adjoint()).norm();
        if skew > 1e-3 * idem.norm().max(1.0) {
            return idem;
        }
    }
}
